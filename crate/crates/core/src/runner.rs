//! Runs many instances against one engine, optionally in parallel.
//! Results always come back in instance order.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{Engine, RunOptions, TestRunResult, Verdict};
use crate::expand::TestInstance;

/// An instance that could not be executed at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceError {
    pub instance: String,
    pub message: String,
}

pub type Outcome = Result<TestRunResult, InstanceError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteOptions {
    pub parallel: usize,
    pub run: RunOptions,
    /// Stop after the first instance (in expansion order) that does not pass.
    pub fail_fast: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            parallel: 1,
            run: RunOptions::default(),
            fail_fast: false,
        }
    }
}

pub fn outcome_passed(o: &Outcome) -> bool {
    matches!(o, Ok(r) if r.verdict == Verdict::Passed)
}

fn run_one(engine: &Engine, inst: &TestInstance, opts: &RunOptions) -> Outcome {
    engine.run(inst, opts).map_err(|e| InstanceError {
        instance: inst.full_id.clone(),
        message: e.to_string(),
    })
}

pub fn run_suite(engine: &Engine, instances: &[TestInstance], opts: &SuiteOptions) -> Vec<Outcome> {
    let threads = opts.parallel.max(1);
    let run_chunk = |chunk: &[TestInstance]| -> Vec<Outcome> {
        if threads == 1 {
            chunk.iter().map(|i| run_one(engine, i, &opts.run)).collect()
        } else {
            chunk.par_iter().map(|i| run_one(engine, i, &opts.run)).collect()
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| {
        if !opts.fail_fast {
            return run_chunk(instances);
        }
        let mut out = Vec::new();
        for chunk in instances.chunks(threads) {
            let results = run_chunk(chunk);
            if let Some(k) = results.iter().position(|o| !outcome_passed(o)) {
                out.extend(results.into_iter().take(k + 1));
                return out;
            }
            out.extend(results);
        }
        out
    })
}
