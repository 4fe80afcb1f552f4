use nalgebra::Matrix3;
use slag::analysis::pipeline::{build_core, PipelineOptions};
use slag::geometry::eig3_sym;
use slag::geometry::SymMat3;
use slag::numerics::{sample_in_ball, seeded_rng};

fn main() {
    let opts = PipelineOptions::default();
    let core = build_core(2, 0.0, &opts).unwrap();
    let rot = core.rotated_handle.clone();
    let inv = core.inverse.clone();
    let mut rng = seeded_rng(21, 2);
    for k in 0..4 {
        let y = sample_in_ball(&mut rng, inv.image_radius());
        let x = inv.phi(&y).unwrap();
        let hf = *rot.hessian(&x.to_array()).unwrap().matrix();
        let hinv = hf.try_inverse().unwrap();
        let resid = hf * hinv - Matrix3::identity();
        println!("k={k} |A*Ainv - I| = {:.3e}", resid.abs().max());
        // eig of -(A^{-1}) two ways: direct eig, and sym-eigen of nalgebra
        let (s, _) = SymMat3::symmetrize(&(-hinv));
        let e1 = eig3_sym(&s).lambda;
        let se = (-hinv).symmetric_eigen();
        let mut e2 = [se.eigenvalues[0], se.eigenvalues[1], se.eigenvalues[2]];
        e2.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ef = eig3_sym(&rot.hessian(&x.to_array()).unwrap()).lambda;
        let mut recip: Vec<f64> = ef.iter().map(|l| -1.0 / l).collect();
        recip.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("  eig3_sym(-Ainv)  = {:?}", e1);
        println!("  nalgebra        = {:?}", e2);
        println!("  -1/eig(A)       = {:?}", recip);
        // asymmetry of the computed inverse
        let asym = (hinv - hinv.transpose()).abs().max();
        println!("  inverse asymmetry = {:.3e}", asym);
    }
}
