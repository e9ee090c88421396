//! Writes the synthetic fixture corpus (images, scribbles, ground truth,
//! manifest) used by the tests and the CLI walkthrough.
//!
//! Usage: `cargo run -p scribble-saliency --example gen_fixtures -- [DIR] [SEED]`

use std::env;

fn main() {
    let mut args = env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "fixtures".into());
    let seed = args
        .next()
        .map(|s| s.parse().expect("seed must be an integer"))
        .unwrap_or(0);
    let set = scribble_saliency::fixtures::generate(&out, seed).expect("generate fixtures");
    println!("wrote {} fixtures under {}", set.entries.len(), set.root.display());
    println!("manifest: {}", set.manifest.display());
}
