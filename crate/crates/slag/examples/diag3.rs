use slag::analysis::pipeline::{build_core, PipelineOptions};
use slag::analysis::SolutionHandle;
use slag::geometry::eig3_sym;
use slag::numerics::{sample_in_annulus, seeded_rng};

fn main() {
    let opts = PipelineOptions::default();
    let core = build_core(2, 0.0, &opts).unwrap();
    let rot = core.rotated_handle.clone();
    let inv = core.inverse.clone();
    let handle = SolutionHandle::from_surface(std::sync::Arc::new((*inv).clone()));
    let mut rng = seeded_rng(42, 2);
    let mut worst = (0.0f64, [0.0; 3]);
    for _ in 0..1000 {
        let y = sample_in_annulus(&mut rng, 0.05 * inv.image_radius(), inv.image_radius());
        let x = inv.phi(&y).unwrap();
        let lam_f = eig3_sym(&rot.hessian(&x.to_array()).unwrap()).lambda;
        let mut recips: Vec<f64> = lam_f.iter().map(|l| -1.0 / l).collect();
        recips.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lam_h = eig3_sym(&handle.hessian(&y).unwrap()).lambda;
        for i in 0..3 {
            let scale = lam_h[i].abs().max(1.0);
            let d = (lam_h[i] - recips[i]).abs() / scale;
            if d > worst.0 {
                worst = (d, y);
            }
        }
    }
    println!("worst recip {:.3e} at y = {:?}", worst.0, worst.1);
    let y = worst.1;
    let x = inv.phi(&y).unwrap();
    println!("x = {:?} |x| = {:.4e}", x.to_array(), x.radius());
    let hf = rot.hessian(&x.to_array()).unwrap();
    let lam_f = eig3_sym(&hf).lambda;
    println!("lam_f = {:?}", lam_f);
    println!("det_f = {:.6e}, l1*l2*l3 = {:.6e}", hf.det(), lam_f.iter().product::<f64>());
    let lam_h = eig3_sym(&handle.hessian(&y).unwrap()).lambda;
    let mut recips: Vec<f64> = lam_f.iter().map(|l| -1.0 / l).collect();
    recips.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("lam_h  = {:?}", lam_h);
    println!("recips = {:?}", recips);
}
