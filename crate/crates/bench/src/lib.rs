//! Criterion benchmarks for the sortie pipeline live in `benches/`.
