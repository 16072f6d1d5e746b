use std::fmt;

use super::AnalysisError;

/// Non-negative rational, kept reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Fraction {
        assert!(den > 0, "zero denominator");
        let g = gcd(num, den).max(1);
        Fraction {
            num: num / g,
            den: den / g,
        }
    }

    pub fn one() -> Fraction {
        Fraction { num: 1, den: 1 }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn min(self, other: Fraction) -> Fraction {
        if (self.num as u128) * (other.den as u128) <= (other.num as u128) * (self.den as u128) {
            self
        } else {
            other
        }
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.as_f64())
    }
}

fn check(n: usize, k: usize, t: usize) -> Result<(), AnalysisError> {
    if k == 0 || k >= n {
        return Err(AnalysisError::InvalidParams(format!("need 0 < k < n, got n={n} k={k}")));
    }
    if t == 0 || t > n - k {
        return Err(AnalysisError::InvalidParams(format!(
            "t={t} outside 1..={} for ({n},{k})",
            n - k
        )));
    }
    Ok(())
}

/// Minimum bytes downloaded per stripe to rebuild t failed nodes:
/// `M t (n - t) / (k (n - k))` for t < k, otherwise M.
pub fn bandwidth_lower_bound(n: usize, k: usize, t: usize, m: u64) -> Result<u64, AnalysisError> {
    check(n, k, t)?;
    if t >= k {
        return Ok(m);
    }
    let den = (k * (n - k)) as u64;
    if !m.is_multiple_of(den) {
        return Err(AnalysisError::InvalidParams(format!(
            "M={m} is not divisible by k(n-k)={den}"
        )));
    }
    Ok(m / den * (t * (n - t)) as u64)
}

/// Lower bound when each failed node is rebuilt from `d` survivors:
/// `M d t / (k (d - k + t))`. `d = n - t` gives the minimum.
pub fn bandwidth_lower_bound_with_d(
    n: usize,
    k: usize,
    t: usize,
    m: f64,
    d: usize,
) -> Result<f64, AnalysisError> {
    check(n, k, t)?;
    if t >= k {
        return Ok(m);
    }
    if d < k || d > n - t {
        return Err(AnalysisError::InvalidParams(format!(
            "d={d} outside {k}..={}",
            n - t
        )));
    }
    Ok(m * (d * t) as f64 / (k * (d - k + t)) as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioRow {
    pub t: usize,
    /// Bandwidth ratio of concurrent recovery to conventional recovery.
    pub good: Fraction,
    /// Ratio for a bad t-pattern, which costs as much as a good (t+1)-pattern.
    /// `None` for t = 1, where every pattern is good.
    pub bad: Option<Fraction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioTable {
    pub n: usize,
    pub k: usize,
    pub rows: Vec<RatioRow>,
}

impl RatioTable {
    pub fn row(&self, t: usize) -> Option<&RatioRow> {
        self.rows.iter().find(|r| r.t == t)
    }
}

fn good_ratio(n: usize, k: usize, t: usize) -> Fraction {
    if t >= k {
        return Fraction::one();
    }
    Fraction::new((t * (n - t)) as u64, (k * (n - k)) as u64).min(Fraction::one())
}

/// Ratio of concurrent-recovery bandwidth to conventional bandwidth for
/// t = 1..=n-k, for good and bad patterns.
pub fn bandwidth_ratio_table(n: usize, k: usize) -> Result<RatioTable, AnalysisError> {
    if k == 0 || n != 2 * k {
        return Err(AnalysisError::InvalidParams(format!(
            "ratio tables assume n = 2k, got n={n} k={k}"
        )));
    }
    let rows = (1..=n - k)
        .map(|t| RatioRow {
            t,
            good: good_ratio(n, k, t),
            bad: (t >= 2).then(|| {
                if t < n - k {
                    good_ratio(n, k, t + 1)
                } else {
                    Fraction::one()
                }
            }),
        })
        .collect();
    Ok(RatioTable { n, k, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eq1_and_motivating_example() {
        let m = 9 * 1024;
        assert_eq!(bandwidth_lower_bound(6, 3, 1, m).unwrap(), 5 * m / 9);
        assert_eq!(bandwidth_lower_bound(6, 3, 2, m).unwrap(), 8 * m / 9);
        assert_eq!(bandwidth_lower_bound(6, 3, 3, m).unwrap(), m);
        assert!(bandwidth_lower_bound(6, 3, 4, m).is_err());
        assert!(bandwidth_lower_bound(6, 3, 0, m).is_err());
        assert!(bandwidth_lower_bound(6, 3, 1, 10).is_err());
    }

    #[test]
    fn continuous_at_t_equal_k() {
        for k in 2..12 {
            let n = 2 * k;
            assert_eq!(good_ratio(n, k, k), Fraction::one());
            // the closed form itself is 1 at t = k
            assert_eq!(Fraction::new((k * (n - k)) as u64, (k * (n - k)) as u64), Fraction::one());
        }
    }

    #[test]
    fn general_d_minimised_at_n_minus_t() {
        let m = 1.0;
        for (n, k) in [(6, 3), (12, 6), (20, 10)] {
            for t in 1..k {
                let at = |d| bandwidth_lower_bound_with_d(n, k, t, m, d).unwrap();
                let best = at(n - t);
                let exact = (t * (n - t)) as f64 / (k * (n - k)) as f64;
                assert!((best - exact).abs() < 1e-12);
                for d in k..n - t {
                    assert!(at(d) >= best);
                }
            }
        }
        assert!(bandwidth_lower_bound_with_d(6, 3, 1, 1.0, 6).is_err());
    }

    #[test]
    fn table_20_10() {
        let table = bandwidth_ratio_table(20, 10).unwrap();
        assert_eq!(table.rows.len(), 10);
        let good: Vec<Fraction> = (1..=4).map(|t| table.row(t).unwrap().good).collect();
        assert_eq!(
            good,
            vec![
                Fraction::new(19, 100),
                Fraction::new(36, 100),
                Fraction::new(51, 100),
                Fraction::new(64, 100)
            ]
        );
        let bad: Vec<Fraction> = (2..=4).map(|t| table.row(t).unwrap().bad.unwrap()).collect();
        assert_eq!(
            bad,
            vec![Fraction::new(51, 100), Fraction::new(64, 100), Fraction::new(75, 100)]
        );
        assert_eq!(table.row(1).unwrap().bad, None);
        assert_eq!(table.row(10).unwrap().good, Fraction::one());
        assert_eq!(table.row(10).unwrap().bad, Some(Fraction::one()));
    }

    #[test]
    fn table_values_in_unit_interval() {
        for k in 2..=10 {
            let table = bandwidth_ratio_table(2 * k, k).unwrap();
            for (i, row) in table.rows.iter().enumerate() {
                assert!(row.good.num > 0 && row.good.as_f64() <= 1.0);
                if let Some(bad) = row.bad {
                    assert!(bad.as_f64() <= 1.0 && bad.as_f64() >= row.good.as_f64());
                    if let Some(next) = table.rows.get(i + 1) {
                        assert_eq!(bad, next.good);
                    }
                }
            }
        }
        assert!(bandwidth_ratio_table(7, 3).is_err());
    }

    #[test]
    fn single_failure_6_3() {
        let t = bandwidth_ratio_table(6, 3).unwrap();
        assert_eq!(t.row(1).unwrap().good, Fraction::new(5, 9));
    }
}
