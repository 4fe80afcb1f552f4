use clap::Parser;
use slag::cli::{execute, Cli};

fn main() {
    // SLAG_THREADS caps the worker count; results are identical for any
    // thread count because every parallel job owns a deterministic RNG stream.
    if let Ok(threads) = std::env::var("SLAG_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
