//! Evolves pairs of expression trees that map each row of a tabular dataset
//! to a 2-D point, searching the trade-off between embedding quality (a
//! neighbourhood-preservation cost in the t-SNE family) and expression size.
//! A decomposition-based multi-objective search builds a front of candidate
//! mappings, then particle-swarm refinement fine-tunes their constants.

pub mod app;
pub mod config;
pub mod data;
pub mod error;
pub mod front;
pub mod gp;
pub mod matrix;
pub mod moead;
pub mod plot;
pub mod pso;
pub mod tsne;

pub use error::{Error, Result};

/// Splits one user-facing seed into independent streams so the search, the
/// scaling baseline and each tuning swarm draw from unrelated sequences.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    base.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(stream)
        .rotate_left(17)
        .wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

/// Runs `f` inside a rayon pool of the given size. All parallel reductions in
/// this crate collect in index order, so results are identical for any thread
/// count; `threads = 1` gives a strictly sequential schedule.
pub fn with_thread_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("building rayon pool");
    pool.install(f)
}
