use slag::analysis::pipeline::{build_core, PipelineOptions};
use slag::analysis::{SolutionHandle, SolutionSurface};
use slag::geometry::eig3_sym;
use slag::numerics::{sample_in_annulus, seeded_rng};

fn main() {
    let opts = PipelineOptions::default();
    let core = build_core(3, 0.0, &opts).unwrap();
    let rot = core.rotated_handle.clone();
    let inv = core.inverse.clone();
    println!("m=3: image_radius={:.3e} bracket={:.3e}", inv.image_radius(), core.hyp.bracket());
    let mut rng = seeded_rng(42, 2);
    let mut worst = (0.0f64, [0.0; 3]);
    for _ in 0..600 {
        let y = sample_in_annulus(&mut rng, 0.05 * inv.image_radius(), inv.image_radius());
        let x = inv.phi(&y).unwrap();
        let lam_f = eig3_sym(&rot.hessian(&x.to_array()).unwrap()).lambda;
        let mut pairs: Vec<(f64, f64)> = lam_f.iter().map(|&l| (-1.0 / l, l)).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let lam_h = eig3_sym(&inv.hessian(&y).unwrap()).lambda;
        for i in 0..3 {
            let d = (lam_h[i] * pairs[i].1 + 1.0).abs();
            if d > worst.0 { worst = (d, y); }
        }
    }
    println!("worst product dev {:.3e} at {:?}", worst.0, worst.1);
    let y = worst.1;
    let x = inv.phi(&y).unwrap();
    println!("x = {:?}", x.to_array());
    let hf = rot.hessian(&x.to_array()).unwrap();
    println!("hf = {:?}", hf.matrix());
    let lam_f = eig3_sym(&hf).lambda;
    println!("lam_f = {:?}  det={:.6e} prod={:.6e}", lam_f, hf.det(), lam_f.iter().product::<f64>());
    let hh = inv.hessian(&y).unwrap();
    let lam_h = eig3_sym(&hh).lambda;
    println!("lam_h = {:?}", lam_h);
    println!("products: {:?}", (0..3).map(|i| lam_h[i]*lam_f[2-i]).collect::<Vec<_>>());
    // check inverse accuracy
    let prod = hf.matrix() * hh.matrix();
    println!("hf*hh + I = {:?}", prod + nalgebra::Matrix3::identity());
}
