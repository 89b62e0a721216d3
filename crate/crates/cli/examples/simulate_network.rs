//! Writes a simulated two-community network and its generating values.
//!
//! ```text
//! cargo run -p stiefel-priors-cli --example simulate_network -- <out_dir> [seed]
//! ```
//!
//! Each node loads on exactly one eigenvector, so no row of `Q` is switched off and the
//! network sits in the dense regime `ℓ ∈ [0.5, 1)`.

use std::path::PathBuf;

use nalgebra::DMatrix;
use serde_json::json;
use stiefel_priors::io::{save_json, save_matrix_csv};
use stiefel_priors::models::simulate_network_with_q;
use stiefel_priors::rng::stream_rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let (p, half) = (30, 15);
    let q = DMatrix::from_fn(p, 2, |i, j| if i / half == j { 1.0 / (half as f64).sqrt() } else { 0.0 });
    let (c, lambda) = (-1.0, [40.0, 40.0]);
    let (data, truth) = simulate_network_with_q(c, &lambda, q, 0.75, &mut stream_rng(seed, 1))?;
    std::fs::create_dir_all(&dir)?;
    save_matrix_csv(&dir.join("community_network.csv"), &data.to_matrix())?;
    save_matrix_csv(&dir.join("community_probabilities.csv"), &truth.probabilities)?;
    save_json(
        &dir.join("community_truth.json"),
        &json!({
            "seed": seed,
            "c": c,
            "lambda": lambda,
            "q": "two blocks of 15 nodes, entries 1/sqrt(15)",
            "ell_regime": [0.5, 1.0],
        }),
    )?;
    println!("wrote {}", dir.display());
    Ok(())
}
