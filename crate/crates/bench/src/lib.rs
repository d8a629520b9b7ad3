//! Criterion benchmarks for the tabular solvers and the critic losses; see `benches/`.
