//! The shared front half of the counter: classify, then draw a marking and
//! look for Λ*, with fresh seeds until Λ* exists.

use serde::Serialize;

use crate::classify::{classify, Classification};
use crate::config::{Config, Resolved};
use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::marking::{derive_seed, find_lambda_star, find_marking, LambdaStar, Marking};

const RETRY_STREAM: u64 = 4;

#[derive(Debug, Clone, Serialize)]
pub struct Prepared {
    pub resolved: Resolved,
    pub classification: Classification,
    pub marking: Marking,
    pub lambda_star: LambdaStar,
    /// Index of the attempt that produced Λ*.
    pub attempt: usize,
    pub attempt_seed: u64,
}

/// Seed of the `attempt`-th (marking, Λ*) draw.
pub fn attempt_seed(seed: u64, attempt: usize) -> u64 {
    derive_seed(seed, RETRY_STREAM, attempt as u64)
}

pub fn prepare(formula: &Formula, config: &Config) -> Result<Prepared> {
    let resolved = config.resolve(formula.k(), formula.n())?;
    let cls = classify(formula, resolved.delta, config.bad_fraction);
    let mut last = None;
    for attempt in 0..config.retries.max(1) {
        let seed = attempt_seed(config.seed, attempt);
        let marking = match find_marking(formula, &cls, seed, config.marking_steps) {
            Ok(m) => m,
            // No marking can exist: retrying is pointless.
            Err(e @ Error::MarkingNotFound { attempts: 0, .. }) => return Err(e.at("marking")),
            Err(e @ Error::MarkingNotFound { .. }) => {
                last = Some(e.at("marking"));
                continue;
            }
            Err(e) => return Err(e.at("marking")),
        };
        match find_lambda_star(formula, &cls, &marking, seed, config.local_cap, config.local_steps) {
            Ok(lambda_star) => {
                return Ok(Prepared {
                    resolved,
                    classification: cls,
                    marking,
                    lambda_star,
                    attempt,
                    attempt_seed: seed,
                })
            }
            Err(e @ Error::LambdaStarNotFound { .. }) => last = Some(e.at("lambda-star")),
            Err(e) => return Err(e.at("lambda-star")),
        }
    }
    Err(last.expect("at least one attempt runs"))
}
