//! Builds an HNSW index, writes it to disk, reloads it and queries it.

use sscd::search::{load_hnsw, save_hnsw, HnswIndex, HnswParams, NeighborIndex, SearchParams, SearchType};
use sscd::synth::random_unit_vectors;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vectors = random_unit_vectors(2_000, 64, 3);
    let index = HnswIndex::build(&vectors, &HnswParams::default())?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("fragments.hnsw");
    save_hnsw(&index, &path)?;
    println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());

    let loaded = load_hnsw(&path)?;
    let audit = loaded.audit();
    println!(
        "{} nodes, {} edges, top layer {}, audit ok: {}",
        audit.nodes,
        audit.edges,
        loaded.max_level(),
        audit.is_ok()
    );

    let params = SearchParams { search_type: SearchType::Hnsw, k: 5, similarity_floor: -1.0, ..Default::default() };
    for hit in loaded.search_id(vectors[0].fragment_id, &params)? {
        println!("  #{} {} {:.4}", hit.rank, hit.hit_id, hit.similarity);
    }
    Ok(())
}
