//! Generates a pool, writes it as CSV, reads it back and lists its cycles.
//! Usage: `pool_cycles [pairs] [seed] [out.csv]`.

use kidney_exchange::graph::{generate_pair, read_pool, CompatibilityGraph, GeneratorConfig, KeyedCrossmatch};
use kidney_exchange::rng::Stream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: u64 = args.first().map_or(Ok(25), |a| a.parse())?;
    let seed: u64 = args.get(1).map_or(Ok(1), |a| a.parse())?;

    let config = GeneratorConfig::default();
    let mut rng = Stream::Generation.rng(seed);
    let mut crossmatch = KeyedCrossmatch::new(Stream::Crossmatch.key(seed));
    let mut graph = CompatibilityGraph::with_crossmatch(config.pra_enabled);
    for id in 0..n {
        graph.add_pair(generate_pair(&mut rng, &config, id, 0)?, &mut crossmatch)?;
    }

    let mut csv = Vec::new();
    graph.write_pool(&mut csv)?;
    if let Some(path) = args.get(2) {
        std::fs::write(path, &csv)?;
        println!("pool written to {path}");
    }
    let reloaded = read_pool(csv.as_slice(), "<memory>")?;
    assert_eq!(reloaded.len(), graph.len());

    println!("{} pairs, {} edges", graph.len(), graph.edge_count());
    for max_len in [2, 3] {
        let cycles = graph.enumerate_cycles(max_len);
        println!("cycles of length <= {max_len}: {}", cycles.len());
        for c in cycles.iter().take(5) {
            println!("  {:?}", c.vertices());
        }
    }
    Ok(())
}
