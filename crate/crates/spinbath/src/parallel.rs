//! Multi-threaded echo simulation with output identical to the serial run.
//!
//! Realizations are generated in parallel in fixed blocks, then folded into
//! the accumulator one by one in realization order. The thread count
//! changes only the wall-clock time.

use rayon::prelude::*;
use spinbath_core::pulse::{DecayTrace, EchoAccumulator, EchoSimulation};

use crate::Result;

/// Realizations per work item.
const BLOCK: usize = 64;
/// Blocks held in memory between serial reductions.
const BLOCKS_PER_ROUND: usize = 256;

pub fn pool(threads: Option<usize>) -> std::result::Result<rayon::ThreadPool, rayon::ThreadPoolBuildError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build()
}

/// Run `n_realizations` of `sim` on `pool`.
pub fn run_echo(sim: &EchoSimulation, n_realizations: usize, pool: &rayon::ThreadPool) -> Result<DecayTrace> {
    if n_realizations == 0 {
        return Err(spinbath_core::Error::Domain("n_realizations must be >= 1".into()).into());
    }
    let mut acc = EchoAccumulator::new(sim.taus().len());
    let n_blocks = n_realizations.div_ceil(BLOCK);
    let mut start_block = 0;
    while start_block < n_blocks {
        let end_block = (start_block + BLOCKS_PER_ROUND).min(n_blocks);
        let results: Vec<Vec<Vec<f64>>> = pool.install(|| {
            (start_block..end_block)
                .into_par_iter()
                .map(|b| {
                    let lo = b * BLOCK;
                    let hi = ((b + 1) * BLOCK).min(n_realizations);
                    (lo..hi).map(|r| sim.realization(r as u64)).collect()
                })
                .collect()
        });
        for block in &results {
            for sample in block {
                acc.push(sample);
            }
        }
        start_block = end_block;
    }
    Ok(sim.trace(&acc))
}
