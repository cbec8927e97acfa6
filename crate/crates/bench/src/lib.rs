//! Criterion benchmarks for the sampler, subspace orthonormalization and
//! gradient estimator. Run with `cargo bench -p guided-es-bench`.
