use slag::analysis::pipeline::{build_core, build_singular_solution, FamilyParams, PipelineOptions};
use slag::analysis::weakform::{test_field_catalog, ray_debug};

fn main() {
    let opts = PipelineOptions::default();
    let params = FamilyParams::singular(2, 0.0).unwrap();
    let pipe = build_singular_solution(&params, &opts).unwrap();
    let field = &test_field_catalog()[1]; // bump-radial
    // per-ray integral over |z| in [0.01, 1] for directions tilting from pole to equator
    for k in 0..30 {
        let sigma = 1.0f64 * (1e-12f64 / 1.0).powf(k as f64 / 29.0);
        let c = 1.0 - sigma;
        let s = (sigma * (2.0 - sigma)).sqrt();
        let omega = [s * 0.6, s * 0.8, c];
        match ray_debug(&pipe, field, &omega, 0.01) {
            Ok((s_lo, s_hi, val)) => println!("sigma={sigma:.3e} cos={c:.12} s_range=[{s_lo:.3e},{s_hi:.3e}] integral={val:.6e}"),
            Err(e) => println!("sigma={sigma:.3e} error: {e}"),
        }
    }
}
