use slag::analysis::pipeline::{build_core, PipelineOptions};

fn main() {
    let opts = PipelineOptions::default();
    let core = build_core(2, 0.0, &opts).unwrap();
    let tau = core.inverse.image_radius();
    let solution = core.inverse_handle.rescaled(tau, false).unwrap();
    let rep = solution.fd_consistency(40, 42).unwrap();
    println!("pass={} fitted={:?} margins={:?}", rep.pass, rep.fitted, rep.margins);
}
