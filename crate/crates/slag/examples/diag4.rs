use slag::analysis::pipeline::{build_core, PipelineOptions};
use slag::analysis::SolutionHandle;
use std::time::Instant;

fn main() {
    let opts = PipelineOptions::default();
    let t0 = Instant::now();
    let core = build_core(2, 0.0, &opts).unwrap();
    println!("core: {:?}", t0.elapsed());
    let tau = core.inverse.image_radius();
    let solution = core.inverse_handle.rescaled(tau, false).unwrap();
    let t1 = Instant::now();
    let p = solution.phase_at(&[0.3, 0.2, 0.1]).unwrap();
    println!("one phase eval: {:?} -> {}", t1.elapsed(), p);
    let t1 = Instant::now();
    let p = solution.phase_at(&[1e-3, 2e-3, -1e-3]).unwrap();
    println!("small phase eval: {:?} -> {}", t1.elapsed(), p);
    let t1 = Instant::now();
    let v = solution.value(&[0.3, 0.2, 0.1]).unwrap();
    println!("one value eval: {:?} -> {:.6e}", t1.elapsed(), v);
    let t1 = Instant::now();
    let v = solution.value(&[0.301, 0.2, 0.1]).unwrap();
    println!("second value eval: {:?} -> {:.6e}", t1.elapsed(), v);
    let t1 = Instant::now();
    let g = solution.grad(&[0.3, 0.2, 0.1]).unwrap();
    println!("one grad eval: {:?} -> {:.6e}", t1.elapsed(), g.norm());
    let t1 = Instant::now();
    let rep = solution.fd_consistency(3, 7).unwrap();
    println!("fd x3: {:?} pass={}", t1.elapsed(), rep.pass);
}
