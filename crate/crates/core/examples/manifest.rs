//! Prints the tensor names and shapes each network expects, one per line.
//!
//! `cargo run -p storewatch-core --example manifest -- wrn|xception`

use storewatch_core::nn::demographics::{wrn_manifest, WrnConfig};
use storewatch_core::nn::expression::{xception_manifest, XceptionConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let which = std::env::args().nth(1).unwrap_or_default();
    let manifest = match which.as_str() {
        "wrn" => wrn_manifest(&WrnConfig::default())?,
        "xception" => xception_manifest(&XceptionConfig::default())?,
        _ => return Err("usage: manifest wrn|xception".into()),
    };
    for (name, dims) in manifest {
        let dims: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
        println!("{name}\t{}", dims.join("x"));
    }
    Ok(())
}
