use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::AnalysisError;
use crate::codes::{binomial, Combinations};
use crate::recovery::{FailurePattern, PatternClass, RecoveryEngine};

/// Largest number of patterns an exhaustive census enumerates by default.
pub const DEFAULT_CENSUS_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CensusReport {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub total: u64,
    pub bad_count: u64,
    pub bad_fraction: f64,
    /// Bad patterns in lexicographic order.
    pub bad_patterns: Vec<FailurePattern>,
}

/// Result of the sampling mode. Not exhaustive; the interval is a 95% Wilson
/// score interval on the bad fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCensus {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub samples: u64,
    pub bad_count: u64,
    pub bad_fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn check_t(engine: &RecoveryEngine, t: usize) -> Result<(), AnalysisError> {
    let spec = engine.spec();
    if t == 0 || t > spec.n() - spec.k() {
        return Err(AnalysisError::InvalidParams(format!(
            "t={t} outside 1..={}",
            spec.n() - spec.k()
        )));
    }
    Ok(())
}

/// Classifies every t-subset of nodes. Patterns are split across threads;
/// counts and the bad list do not depend on the split.
pub fn census(engine: &RecoveryEngine, t: usize, budget: u64) -> Result<CensusReport, AnalysisError> {
    check_t(engine, t)?;
    let spec = engine.spec();
    let (n, k) = (spec.n(), spec.k());
    let total = binomial(n as u64, t as u64);
    if total > budget {
        return Err(AnalysisError::BudgetExceeded {
            patterns: total,
            budget,
        });
    }
    let patterns: Vec<Vec<usize>> = Combinations::new(n, t).collect();
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(patterns.len().max(1));
    let chunk = patterns.len().div_ceil(workers).max(1);

    let results: Vec<Result<Vec<FailurePattern>, AnalysisError>> = std::thread::scope(|s| {
        let handles: Vec<_> = patterns
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    let mut bad = Vec::new();
                    for nodes in part {
                        let p = FailurePattern::new(nodes.iter().copied(), n)?;
                        if engine.classify_uncached(&p)? == PatternClass::Bad {
                            bad.push(p);
                        }
                    }
                    Ok(bad)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("census worker panicked"))
            .collect()
    });
    let mut bad_patterns = Vec::new();
    for r in results {
        bad_patterns.extend(r?);
    }
    bad_patterns.sort();
    let bad_count = bad_patterns.len() as u64;
    Ok(CensusReport {
        n,
        k,
        t,
        total,
        bad_count,
        bad_fraction: bad_count as f64 / total as f64,
        bad_patterns,
    })
}

/// Seeded uniform sampling of t-subsets, for (n, t) beyond the exhaustive
/// budget.
pub fn census_sampled(
    engine: &RecoveryEngine,
    t: usize,
    samples: u64,
    seed: u64,
) -> Result<SampledCensus, AnalysisError> {
    check_t(engine, t)?;
    if samples == 0 {
        return Err(AnalysisError::InvalidParams("need at least one sample".into()));
    }
    let spec = engine.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0u64;
    for _ in 0..samples {
        let nodes = sample(&mut rng, spec.n(), t).into_vec();
        let p = FailurePattern::new(nodes, spec.n())?;
        if engine.classify_uncached(&p)? == PatternClass::Bad {
            bad += 1;
        }
    }
    let (lo, hi) = wilson_interval(bad, samples, 1.96);
    Ok(SampledCensus {
        n: spec.n(),
        k: spec.k(),
        t,
        samples,
        bad_count: bad,
        bad_fraction: bad as f64 / samples as f64,
        ci_low: lo,
        ci_high: hi,
    })
}

fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * ((p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()) / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{build_code, CodeKind};
    use std::sync::Arc;

    fn engine(n: usize, k: usize) -> RecoveryEngine {
        RecoveryEngine::new(Arc::new(build_code(n, k, CodeKind::Msr, 1).unwrap()))
    }

    #[test]
    fn single_failures_have_no_bad_patterns() {
        let e = engine(8, 4);
        let r = census(&e, 1, DEFAULT_CENSUS_BUDGET).unwrap();
        assert_eq!((r.total, r.bad_count, r.bad_fraction), (8, 0, 0.0));
    }

    #[test]
    fn census_matches_cached_classification() {
        let e = engine(8, 4);
        for t in 2..=4 {
            let r = census(&e, t, DEFAULT_CENSUS_BUDGET).unwrap();
            let expect: Vec<FailurePattern> = Combinations::new(8, t)
                .map(|p| e.pattern(p).unwrap())
                .filter(|p| e.classify(p).unwrap() == PatternClass::Bad)
                .collect();
            assert_eq!(r.bad_patterns, expect);
            assert_eq!(r.total, binomial(8, t as u64));
        }
    }

    #[test]
    fn budget_is_enforced() {
        let e = engine(8, 4);
        assert!(matches!(
            census(&e, 3, 10),
            Err(AnalysisError::BudgetExceeded { patterns: 56, budget: 10 })
        ));
        assert!(census(&e, 5, DEFAULT_CENSUS_BUDGET).is_err());
    }

    #[test]
    fn sampling_is_reproducible_and_brackets_the_truth() {
        let e = engine(12, 6);
        let exact = census(&e, 3, DEFAULT_CENSUS_BUDGET).unwrap();
        let a = census_sampled(&e, 3, 2000, 7).unwrap();
        let b = census_sampled(&e, 3, 2000, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low <= exact.bad_fraction && exact.bad_fraction <= a.ci_high, "{a:?}");
    }

    #[test]
    fn wilson_interval_is_sane() {
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5);
    }
}
