//! Finite-difference check of both engines' gradients.
//!
//! cargo run --release --example gradient_check -- [seed]

use warpcomp::autodiff::DEFAULT_EPS;
use warpcomp::graphnet::{engine_grad_check, EngineKind, NetworkConfig};

fn main() -> warpcomp::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed"));
    for kind in [EngineKind::Predictor, EngineKind::Compensator] {
        let r = engine_grad_check(kind, &NetworkConfig::default(), seed, DEFAULT_EPS)?;
        println!(
            "{:<11} max rel error {:.2e} over {} parameters (worst #{}: {:.6e} vs {:.6e})",
            kind.as_str(),
            r.max_rel_error,
            r.checked,
            r.worst_index,
            r.analytic_at_worst,
            r.numeric_at_worst
        );
    }
    Ok(())
}
