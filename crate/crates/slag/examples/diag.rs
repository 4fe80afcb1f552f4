use slag::analysis::pipeline::{build_core, PipelineOptions};
use slag::analysis::SolutionHandle;
use slag::geometry::eig3_sym;
use slag::invert::*;
use slag::numerics::{sample_in_ball, seeded_rng};

fn main() {
    let opts = PipelineOptions::default();
    let core = build_core(2, 0.0, &opts).unwrap();
    let hyp = core.hyp;
    let rot = core.rotated_handle.clone();
    println!("r_m={} rot_radius={} rho={} kappa={} bracket={}", core.r_m, core.rotated_radius, hyp.rho, hyp.kappa, hyp.bracket());
    let inv = core.inverse.clone();
    println!("image_radius = {:.6e}", inv.image_radius());
    let mut rng = seeded_rng(21, 2);
    let mut worst = (0.0f64, [0.0;3]);
    for _ in 0..300 {
        let y = sample_in_ball(&mut rng, inv.image_radius());
        let x = inv.phi(&y).unwrap();
        let g = rot.grad(&x.to_array()).unwrap();
        let resid = ((g[0]-y[0]).powi(2)+(g[1]-y[1]).powi(2)+(g[2]-y[2]).powi(2)).sqrt();
        if resid > worst.0 { worst = (resid, y); }
    }
    println!("worst round trip resid {:.3e} at y={:?}", worst.0, worst.1);
    let mut rng = seeded_rng(21, 2);
    for k in 0..6 {
        let y = sample_in_ball(&mut rng, inv.image_radius());
        let x = inv.phi(&y).unwrap();
        let hf = rot.hessian(&x.to_array()).unwrap();
        let lf = eig3_sym(&hf).lambda;
        let hh = SolutionHandle::from_surface(std::sync::Arc::new((*inv).clone())).hessian(&y).unwrap();
        let lh = eig3_sym(&hh).lambda;
        let mut recips: Vec<f64> = lf.iter().map(|l| -1.0/l).collect();
        recips.sort_by(|a,b| a.partial_cmp(b).unwrap());
        println!("k={k} |y|={:.3e} |x|={:.3e}\n  lam_f={:?}\n  lam_h={:?}\n  recip={:?}",
            (y[0]*y[0]+y[1]*y[1]+y[2]*y[2]).sqrt(), x.radius(), lf, lh, recips);
    }
}
