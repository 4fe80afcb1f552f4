use slag::analysis::pipeline::{build_core, PipelineOptions};

fn main() {
    let opts = PipelineOptions::default();
    let core = build_core(2, 0.0, &opts).unwrap();
    let x = [0.010130467357403883, 0.0, 0.0000000000055047205930056684];
    let h = core.series_handle.hessian(&x).unwrap();
    println!("H = {:?}", h.matrix());
    println!("det = {:.6e}", h.det());
    match h.matrix().try_inverse() {
        Some(inv) => println!("inverse ok, max {:.3e}", inv.abs().max()),
        None => println!("try_inverse FAILED"),
    }
    // pushforward through the trivial rotated map
    let g = core.rotated.map().eval(&x).unwrap();
    println!("jx = {:?}", g.jx);
    match slag::geometry::pushforward_from_point(&g, &x) {
        Ok(hh) => println!("pushforward ok det {:.3e}", hh.det()),
        Err(e) => println!("pushforward error: {e}"),
    }
}
