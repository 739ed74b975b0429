//! Criterion benches for the repeater pipelines live in `benches/`.
