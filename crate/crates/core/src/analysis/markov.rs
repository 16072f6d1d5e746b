//! Continuous-time Markov model of node failures and repairs.
//!
//! State t (0 <= t <= n - k) means t nodes are down; state n - k + 1 means data
//! loss and is absorbing. From state t a further failure happens at rate
//! (n - t) lambda. From t >= 1 the whole failed set is repaired at rate mu_t,
//! which is the transfer rate divided by the bytes the scheme downloads:
//!
//! * concurrent recovery downloads t (n - t) S / (n - k), so
//!   mu_t = (n - k) B / (t (n - t) S);
//! * conventional recovery downloads k S, so mu_t = B / (k S).
//!
//! Units: lambda per year, B in bytes per second, S in bytes, MTTF in years.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AnalysisError;

/// Julian year.
pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Core,
    Conventional,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Core => "core",
            Scheme::Conventional => "conventional",
        })
    }
}

impl FromStr for Scheme {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "core" => Ok(Scheme::Core),
            "conventional" | "conv" => Ok(Scheme::Conventional),
            other => Err(AnalysisError::InvalidParams(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovParams {
    pub n: usize,
    pub k: usize,
    /// Per-node failure rate, 1/years.
    pub lambda: f64,
    /// Repair transfer rate, bytes/second.
    pub bandwidth: f64,
    /// Per-node capacity, bytes.
    pub capacity: f64,
    pub scheme: Scheme,
}

impl MarkovParams {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.k == 0 || self.k >= self.n {
            return Err(AnalysisError::InvalidParams(format!(
                "need 0 < k < n, got n={} k={}",
                self.n, self.k
            )));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("bandwidth", self.bandwidth),
            ("capacity", self.capacity),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(AnalysisError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_scheme(self, scheme: Scheme) -> MarkovParams {
        MarkovParams { scheme, ..self }
    }

    /// Index of the absorbing data-loss state.
    pub fn absorbing_state(&self) -> usize {
        self.n - self.k + 1
    }

    /// Rate of leaving state t towards t + 1, per year.
    pub fn failure_rate(&self, t: usize) -> f64 {
        (self.n - t) as f64 * self.lambda
    }

    /// Rate of returning from state t to state 0, per year. Zero in state 0.
    pub fn repair_rate(&self, t: usize) -> f64 {
        if t == 0 {
            return 0.0;
        }
        let (n, k) = (self.n as f64, self.k as f64);
        let per_second = match self.scheme {
            Scheme::Core => {
                let t = t as f64;
                (n - k) * self.bandwidth / (t * (n - t) * self.capacity)
            }
            Scheme::Conventional => self.bandwidth / (k * self.capacity),
        };
        per_second * SECONDS_PER_YEAR
    }
}

/// Expected years until data loss, starting with every node up.
///
/// First-step analysis gives T_t = 1/a_t + (u_t/a_t) T_{t+1} + (mu_t/a_t) T_0.
/// Writing T_t = alpha_t + beta_t T_0 and eliminating from the absorbing state
/// down, the quantity that matters is g_t = 1 - beta_t, the probability of
/// data loss before the next full repair. It satisfies g_t = (u_t/a_t) g_{t+1}
/// and is carried directly, so no step subtracts nearly equal numbers even
/// when repairs are many orders of magnitude faster than failures.
pub fn mttf(params: &MarkovParams) -> Result<f64, AnalysisError> {
    params.validate()?;
    let top = params.n - params.k;
    let mut alpha = 0.0;
    let mut loss = 1.0;
    for t in (1..=top).rev() {
        let up = params.failure_rate(t);
        let total = up + params.repair_rate(t);
        alpha = 1.0 / total + up / total * alpha;
        loss *= up / total;
    }
    Ok((1.0 / params.failure_rate(0) + alpha) / loss)
}

/// MTTF by dense Gaussian elimination on the hitting-time equations. Loses
/// precision when repair rates dwarf failure rates; kept as an independent
/// check of [`mttf`] in well-conditioned regimes.
pub fn mttf_dense(params: &MarkovParams) -> Result<f64, AnalysisError> {
    params.validate()?;
    let size = params.n - params.k + 1;
    let mut a = vec![vec![0.0f64; size + 1]; size];
    for (t, row) in a.iter_mut().enumerate() {
        let up = params.failure_rate(t);
        let mu = params.repair_rate(t);
        row[t] += up + mu;
        if t + 1 < size {
            row[t + 1] -= up;
        }
        if t > 0 {
            row[0] -= mu;
        }
        row[size] = 1.0;
    }
    for col in 0..size {
        let pivot = (col..size)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty");
        a.swap(col, pivot);
        let p = a[col][col];
        if p == 0.0 {
            return Err(AnalysisError::InvalidParams("singular hitting-time system".into()));
        }
        for r in 0..size {
            if r != col {
                let f = a[r][col] / p;
                if f != 0.0 {
                    for c in col..=size {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Ok(a[0][size] / a[0][0])
}

/// Simulates the chain until absorption `trials` times. Returns the sample
/// mean and its standard error, in years. Each trial walks every transition,
/// so this is only practical when data loss is reachable in few cycles.
pub fn mttf_monte_carlo(
    params: &MarkovParams,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64), AnalysisError> {
    params.validate()?;
    if trials == 0 {
        return Err(AnalysisError::InvalidParams("need at least one trial".into()));
    }
    let top = params.absorbing_state();
    let rates: Vec<(f64, f64)> = (0..top)
        .map(|t| (params.failure_rate(t), params.repair_rate(t)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let mut state = 0;
        let mut time = 0.0;
        while state < top {
            let (up, mu) = rates[state];
            let total = up + mu;
            let u: f64 = 1.0 - rng.gen::<f64>();
            time += -u.ln() / total;
            if rng.gen::<f64>() * total < up {
                state += 1;
            } else {
                state = 0;
            }
        }
        sum += time;
        sum_sq += time * time;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = if trials > 1 {
        (sum_sq - n * mean * mean).max(0.0) / (n - 1.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MttfRow {
    pub lambda: f64,
    pub bandwidth: f64,
    pub capacity: f64,
    pub mttf_core: f64,
    pub mttf_conventional: f64,
}

impl MttfRow {
    pub fn ratio(&self) -> f64 {
        self.mttf_core / self.mttf_conventional
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MttfSweep {
    pub n: usize,
    pub k: usize,
    pub rows: Vec<MttfRow>,
}

/// MTTF of both schemes for each parameter point. The scheme field of the
/// inputs is ignored.
pub fn mttf_sweep(points: &[MarkovParams]) -> Result<MttfSweep, AnalysisError> {
    let (n, k) = points.first().map_or((0, 0), |p| (p.n, p.k));
    let rows = points
        .iter()
        .map(|p| {
            if (p.n, p.k) != (n, k) {
                return Err(AnalysisError::InvalidParams("sweep mixes (n, k)".into()));
            }
            Ok(MttfRow {
                lambda: p.lambda,
                bandwidth: p.bandwidth,
                capacity: p.capacity,
                mttf_core: mttf(&p.with_scheme(Scheme::Core))?,
                mttf_conventional: mttf(&p.with_scheme(Scheme::Conventional))?,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(MttfSweep { n, k, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TB: f64 = 1e12;
    const GBPS: f64 = 1e9 / 8.0;

    fn reference(scheme: Scheme) -> MarkovParams {
        MarkovParams {
            n: 16,
            k: 8,
            lambda: 0.25,
            bandwidth: GBPS,
            capacity: TB,
            scheme,
        }
    }

    #[test]
    fn repair_rates() {
        let core = reference(Scheme::Core);
        let expect = 8.0 * GBPS / (15.0 * TB) * SECONDS_PER_YEAR;
        assert!((core.repair_rate(1) - expect).abs() / expect < 1e-12);
        let conv = reference(Scheme::Conventional);
        let flat = GBPS / (8.0 * TB) * SECONDS_PER_YEAR;
        for t in 1..=8 {
            assert!((conv.repair_rate(t) - flat).abs() / flat < 1e-12);
        }
        assert_eq!(core.repair_rate(0), 0.0);
        // concurrent repair is at least as fast while t <= k in the n = 2k regime
        for t in 1..=8 {
            assert!(core.repair_rate(t) >= conv.repair_rate(t) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn stable_solve_matches_dense_solve_when_well_conditioned() {
        for (n, k) in [(4, 2), (6, 3), (8, 4)] {
            for scheme in [Scheme::Core, Scheme::Conventional] {
                let p = MarkovParams {
                    n,
                    k,
                    lambda: 0.5,
                    bandwidth: 2e4,
                    capacity: TB,
                    scheme,
                };
                let a = mttf(&p).unwrap();
                let b = mttf_dense(&p).unwrap();
                assert!((a - b).abs() / a < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn no_repair_limit_is_sum_of_holding_times() {
        // with negligible repair the chain walks straight to absorption
        let p = MarkovParams {
            n: 6,
            k: 3,
            lambda: 1.0,
            bandwidth: 1e-12,
            capacity: TB,
            scheme: Scheme::Conventional,
        };
        let expect: f64 = (0..=3).map(|t| 1.0 / (6 - t) as f64).sum();
        assert!((mttf(&p).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn monotone_in_lambda_and_bandwidth() {
        for scheme in [Scheme::Core, Scheme::Conventional] {
            let base = reference(scheme);
            let mut prev = f64::INFINITY;
            for lambda in [0.05, 0.1, 0.25, 0.5, 1.0, 2.0] {
                let m = mttf(&MarkovParams { lambda, ..base }).unwrap();
                assert!(m < prev);
                prev = m;
            }
            let mut prev = 0.0;
            for gbps in [0.1, 0.5, 1.0, 2.0, 10.0] {
                let m = mttf(&MarkovParams { bandwidth: gbps * GBPS, ..base }).unwrap();
                assert!(m > prev);
                prev = m;
            }
        }
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let p = MarkovParams {
            n: 6,
            k: 3,
            lambda: 1.0,
            bandwidth: 5e4,
            capacity: TB,
            scheme: Scheme::Core,
        };
        assert_eq!(mttf_monte_carlo(&p, 500, 9).unwrap(), mttf_monte_carlo(&p, 500, 9).unwrap());
        assert!(mttf_monte_carlo(&p, 0, 9).is_err());
    }

    #[test]
    fn invalid_params() {
        let mut p = reference(Scheme::Core);
        p.lambda = 0.0;
        assert!(mttf(&p).is_err());
        p = reference(Scheme::Core);
        p.k = 16;
        assert!(mttf(&p).is_err());
        assert!("bogus".parse::<Scheme>().is_err());
    }
}
