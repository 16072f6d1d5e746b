//! Recovery of lost strips: conventional (decode everything from k nodes),
//! single-failure MSR repair, and concurrent repair with virtual symbols.
//!
//! For a failure pattern F of size t the relayer pretends it is repairing every
//! f in F on its own from n - 1 helpers. Symbols that would come from other
//! failed nodes, `e[g][f]` with g, f in F, are unknowns (virtual symbols);
//! everything else is downloaded (real symbols). Each virtual symbol satisfies
//!
//! ```text
//! e[g][f] = Enc_{g,f}(Rec_g(e[j][g] for j != g))
//! ```
//!
//! which is linear in both real and virtual symbols. Collecting the t(t-1)
//! equations gives `A v = C y`; the pattern is good when A is invertible.
//! A and C depend only on the code and the pattern, so `A^-1 C` is solved once
//! and cached.

mod plan;

pub use plan::{Download, RecoveryPlan, RecoveryScheme};

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::codes::{
    apply_matrix, CodeError, CodeKind, CodeSpec, Combinations, EncodedSymbol, StripeView,
};
use crate::gf::{GfError, Matrix};

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("invalid failure pattern: {0}")]
    Pattern(String),
    #[error("{t} failed nodes exceed the tolerance of {max}")]
    TooManyFailures { t: usize, max: usize },
    #[error("failure pattern {0} is bad; escalate to a virtual failure pattern")]
    BadPattern(FailurePattern),
    #[error("concurrent recovery needs fewer than k = {k} failures, got {t}")]
    NotConcurrent { t: usize, k: usize },
    #[error("unrecoverable: only {survivors} survivors, need {k}")]
    Unrecoverable { survivors: usize, k: usize },
    #[error("downloaded {got} symbols, plan expects {expected}")]
    DownloadMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// Set of failed node indices, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FailurePattern {
    failed: Vec<usize>,
}

impl FailurePattern {
    /// Rejects empty patterns, duplicates and indices `>= n`.
    pub fn new(nodes: impl IntoIterator<Item = usize>, n: usize) -> Result<Self, RecoveryError> {
        let mut failed: Vec<usize> = nodes.into_iter().collect();
        if failed.is_empty() {
            return Err(RecoveryError::Pattern("no failed nodes".into()));
        }
        failed.sort_unstable();
        if failed.windows(2).any(|w| w[0] == w[1]) {
            return Err(RecoveryError::Pattern(format!("duplicate node in {failed:?}")));
        }
        if let Some(&bad) = failed.iter().find(|&&i| i >= n) {
            return Err(RecoveryError::Pattern(format!("node {bad} out of range for n={n}")));
        }
        Ok(FailurePattern { failed })
    }

    pub fn nodes(&self) -> &[usize] {
        &self.failed
    }

    pub fn t(&self) -> usize {
        self.failed.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.failed.binary_search(&i).is_ok()
    }

    /// Nodes outside the pattern, ascending.
    pub fn survivors(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&i| !self.contains(i)).collect()
    }

    fn with(&self, extra: usize) -> FailurePattern {
        let mut failed = self.failed.clone();
        failed.push(extra);
        failed.sort_unstable();
        FailurePattern { failed }
    }

    fn is_subset_of(&self, other: &FailurePattern) -> bool {
        self.failed.iter().all(|&i| other.contains(i))
    }
}

impl fmt::Display for FailurePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (pos, i) in self.failed.iter().enumerate() {
            if pos > 0 {
                f.write_str(",")?;
            }
            write!(f, "N{i}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternClass {
    Good,
    Bad,
}

/// The linear system relating virtual symbols to downloaded real symbols.
#[derive(Debug, Clone)]
pub struct VirtualSymbolSystem {
    pub pattern: FailurePattern,
    /// Virtual symbols `(g, f)`, grouped by target f, then helper g.
    pub unknowns: Vec<(usize, usize)>,
    /// Real symbols `(i, f)`, grouped by target f, then survivor i.
    pub reals: Vec<(usize, usize)>,
    /// `t(t-1) x t(t-1)` coefficients of the virtual symbols.
    pub coefficient_matrix: Matrix,
    /// `t(t-1) x t(n-t)` map from real symbols to the right-hand side.
    pub constant_map: Matrix,
}

impl VirtualSymbolSystem {
    /// `A^-1 C`, mapping real symbols to virtual symbols. `None` when the
    /// system has no unique solution.
    pub fn solve(&self) -> Option<Matrix> {
        match self.coefficient_matrix.invert() {
            Ok(inv) => Some(inv.mul(&self.constant_map).expect("shapes agree")),
            Err(GfError::Singular) => None,
            Err(e) => panic!("virtual system is malformed: {e}"),
        }
    }

    pub fn is_uniquely_solvable(&self) -> bool {
        self.coefficient_matrix.rank() == self.unknowns.len()
    }
}

/// Cached per-pattern result.
#[derive(Debug)]
struct PatternSolution {
    class: PatternClass,
    unknowns: Vec<(usize, usize)>,
    reals: Vec<(usize, usize)>,
    transform: Option<Matrix>,
}

/// Builds the virtual-symbol system of `pattern` from the code's Enc/Rec maps.
pub fn build_virtual_system(
    spec: &CodeSpec,
    pattern: &FailurePattern,
) -> Result<VirtualSymbolSystem, RecoveryError> {
    if spec.kind() != CodeKind::Msr {
        return Err(CodeError::NotMsr.into());
    }
    check_tolerance(spec, pattern)?;
    if pattern.t() < 2 {
        return Err(RecoveryError::Pattern(
            "a single failure has no virtual symbols".into(),
        ));
    }
    Ok(system_unchecked(spec, pattern)?)
}

fn system_unchecked(spec: &CodeSpec, pattern: &FailurePattern) -> Result<VirtualSymbolSystem, CodeError> {
    let n = spec.n();
    let failed = pattern.nodes();
    let survivors = pattern.survivors(n);
    let unknowns: Vec<(usize, usize)> = failed
        .iter()
        .flat_map(|&f| failed.iter().filter(move |&&g| g != f).map(move |&g| (g, f)))
        .collect();
    let reals: Vec<(usize, usize)> = failed
        .iter()
        .flat_map(|&f| survivors.iter().map(move |&i| (i, f)))
        .collect();
    let unknown_index: HashMap<(usize, usize), usize> =
        unknowns.iter().enumerate().map(|(p, &u)| (u, p)).collect();
    let real_index: HashMap<(usize, usize), usize> =
        reals.iter().enumerate().map(|(p, &u)| (u, p)).collect();

    let mut a = Matrix::identity(unknowns.len());
    let mut c = Matrix::zeros(unknowns.len(), reals.len());
    for (row, &(g, f)) in unknowns.iter().enumerate() {
        // Enc_{g,f} composed with Rec_g: a row over the helpers of g.
        let enc = spec.enc_coefficients(g, f)?;
        let rec = spec.rec_matrix(g)?;
        for (col, j) in spec.helpers(g).into_iter().enumerate() {
            let coeff = (0..spec.r()).map(|l| enc[l] * rec[(l, col)]).sum();
            if let Some(&p) = unknown_index.get(&(j, g)) {
                // moved to the left-hand side; subtraction is addition
                a[(row, p)] += coeff;
            } else {
                c[(row, real_index[&(j, g)])] += coeff;
            }
        }
    }
    Ok(VirtualSymbolSystem {
        pattern: pattern.clone(),
        unknowns,
        reals,
        coefficient_matrix: a,
        constant_map: c,
    })
}

fn check_tolerance(spec: &CodeSpec, pattern: &FailurePattern) -> Result<(), RecoveryError> {
    if let Some(&i) = pattern.nodes().iter().find(|&&i| i >= spec.n()) {
        return Err(RecoveryError::Pattern(format!("node {i} out of range for n={}", spec.n())));
    }
    let max = spec.n() - spec.k();
    if pattern.t() > max {
        return Err(RecoveryError::TooManyFailures { t: pattern.t(), max });
    }
    Ok(())
}

/// Recovery entry point for one code. Holds the memo of per-pattern
/// solutions; safe to share across threads.
pub struct RecoveryEngine {
    spec: Arc<CodeSpec>,
    memo: RwLock<HashMap<FailurePattern, Arc<PatternSolution>>>,
}

impl fmt::Debug for RecoveryEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RecoveryEngine")
            .field("spec", &self.spec)
            .field("cached_patterns", &self.cached_patterns())
            .finish()
    }
}

impl RecoveryEngine {
    pub fn new(spec: Arc<CodeSpec>) -> RecoveryEngine {
        RecoveryEngine {
            spec,
            memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &Arc<CodeSpec> {
        &self.spec
    }

    pub fn cached_patterns(&self) -> usize {
        self.memo.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn pattern(&self, nodes: impl IntoIterator<Item = usize>) -> Result<FailurePattern, RecoveryError> {
        FailurePattern::new(nodes, self.spec.n())
    }

    fn solution(&self, pattern: &FailurePattern) -> Result<Arc<PatternSolution>, RecoveryError> {
        if let Some(s) = self.memo.read().expect("memo lock poisoned").get(pattern) {
            return Ok(Arc::clone(s));
        }
        // Computed outside the lock; racing threads produce identical entries.
        let solved = if pattern.t() == 1 {
            let f = pattern.nodes()[0];
            PatternSolution {
                class: PatternClass::Good,
                unknowns: Vec::new(),
                reals: self.spec.helpers(f).into_iter().map(|i| (i, f)).collect(),
                transform: Some(Matrix::zeros(0, self.spec.n() - 1)),
            }
        } else {
            let system = system_unchecked(&self.spec, pattern)?;
            let transform = system.solve();
            PatternSolution {
                class: if transform.is_some() {
                    PatternClass::Good
                } else {
                    PatternClass::Bad
                },
                unknowns: system.unknowns,
                reals: system.reals,
                transform,
            }
        };
        let solved = Arc::new(solved);
        self.memo
            .write()
            .expect("memo lock poisoned")
            .entry(pattern.clone())
            .or_insert_with(|| Arc::clone(&solved));
        Ok(solved)
    }

    fn require_msr(&self) -> Result<(), RecoveryError> {
        if self.spec.kind() == CodeKind::Msr {
            Ok(())
        } else {
            Err(CodeError::NotMsr.into())
        }
    }

    /// Good iff the virtual symbols are uniquely determined by the real ones.
    pub fn classify(&self, pattern: &FailurePattern) -> Result<PatternClass, RecoveryError> {
        self.require_msr()?;
        check_tolerance(&self.spec, pattern)?;
        Ok(self.solution(pattern)?.class)
    }

    /// Classification by rank of the virtual system, bypassing the memo.
    /// Used for large enumerations where caching every solution would not fit
    /// in memory.
    pub fn classify_uncached(&self, pattern: &FailurePattern) -> Result<PatternClass, RecoveryError> {
        self.require_msr()?;
        check_tolerance(&self.spec, pattern)?;
        if pattern.t() == 1 {
            return Ok(PatternClass::Good);
        }
        if let Some(s) = self.memo.read().expect("memo lock poisoned").get(pattern) {
            return Ok(s.class);
        }
        let system = system_unchecked(&self.spec, pattern)?;
        Ok(if system.is_uniquely_solvable() {
            PatternClass::Good
        } else {
            PatternClass::Bad
        })
    }

    pub fn virtual_system(&self, pattern: &FailurePattern) -> Result<VirtualSymbolSystem, RecoveryError> {
        build_virtual_system(&self.spec, pattern)
    }

    /// Smallest good superset of a bad pattern. Sizes are tried in increasing
    /// order; within a size the added nodes are chosen lexicographically by
    /// index and the first good candidate wins. At size k and above any
    /// superset is acceptable, since conventional recovery handles it; a good
    /// one is still preferred.
    pub fn escalate(&self, pattern: &FailurePattern) -> Result<FailurePattern, RecoveryError> {
        self.require_msr()?;
        check_tolerance(&self.spec, pattern)?;
        let max = self.spec.n() - self.spec.k();
        let survivors = pattern.survivors(self.spec.n());
        for extra in 1..=max.saturating_sub(pattern.t()) {
            let mut fallback = None;
            for added in Combinations::new(survivors.len(), extra) {
                let mut candidate = pattern.clone();
                for &a in &added {
                    candidate = candidate.with(survivors[a]);
                }
                if self.solution(&candidate)?.class == PatternClass::Good {
                    return Ok(candidate);
                }
                if candidate.t() >= self.spec.k() {
                    fallback.get_or_insert(candidate);
                }
            }
            if let Some(found) = fallback {
                return Ok(found);
            }
        }
        // t is already n - k: nothing left to add.
        Ok(pattern.clone())
    }

    /// Plans recovery under the dispatch policy: conventional for t >= k or
    /// non-MSR codes, otherwise concurrent recovery of the pattern or of its
    /// escalation.
    pub fn plan(&self, pattern: &FailurePattern) -> Result<RecoveryPlan, RecoveryError> {
        check_tolerance(&self.spec, pattern)?;
        if self.spec.kind() != CodeKind::Msr || pattern.t() >= self.spec.k() {
            return self.plan_conventional(pattern);
        }
        match self.solution(pattern)?.class {
            PatternClass::Good => self.plan_concurrent(pattern),
            PatternClass::Bad => {
                let effective = self.escalate(pattern)?;
                if effective.t() >= self.spec.k() || effective == *pattern {
                    let mut plan = self.plan_conventional(pattern)?;
                    plan.effective_pattern = effective;
                    return Ok(plan);
                }
                self.plan_for(pattern, &effective)
            }
        }
    }

    /// Plan for concurrent recovery of a good pattern with t < k.
    pub fn plan_concurrent(&self, pattern: &FailurePattern) -> Result<RecoveryPlan, RecoveryError> {
        self.require_msr()?;
        check_tolerance(&self.spec, pattern)?;
        if pattern.t() >= self.spec.k() {
            return Err(RecoveryError::NotConcurrent {
                t: pattern.t(),
                k: self.spec.k(),
            });
        }
        if self.solution(pattern)?.class == PatternClass::Bad {
            return Err(RecoveryError::BadPattern(pattern.clone()));
        }
        self.plan_for(pattern, pattern)
    }

    fn plan_for(
        &self,
        pattern: &FailurePattern,
        effective: &FailurePattern,
    ) -> Result<RecoveryPlan, RecoveryError> {
        debug_assert!(pattern.is_subset_of(effective));
        let solution = self.solution(effective)?;
        let ss = self.spec.symbol_size();
        let downloads: Vec<Download> = solution
            .reals
            .iter()
            .map(|&(from, target)| Download {
                from,
                target: Some(target),
                bytes: ss,
            })
            .collect();
        let scheme = if effective.t() == 1 {
            RecoveryScheme::SingleMsr
        } else {
            RecoveryScheme::Concurrent
        };
        Ok(RecoveryPlan::new(
            scheme,
            pattern.clone(),
            effective.clone(),
            downloads,
            self.spec.n() - effective.t(),
        ))
    }

    /// Plan for conventional recovery: whole strips from the k lowest-indexed
    /// survivors.
    pub fn plan_conventional(&self, pattern: &FailurePattern) -> Result<RecoveryPlan, RecoveryError> {
        check_tolerance(&self.spec, pattern)?;
        let survivors = pattern.survivors(self.spec.n());
        if survivors.len() < self.spec.k() {
            return Err(RecoveryError::Unrecoverable {
                survivors: survivors.len(),
                k: self.spec.k(),
            });
        }
        let downloads = survivors[..self.spec.k()]
            .iter()
            .map(|&from| Download {
                from,
                target: None,
                bytes: self.spec.strip_bytes(),
            })
            .collect();
        Ok(RecoveryPlan::new(
            RecoveryScheme::Conventional,
            pattern.clone(),
            pattern.clone(),
            downloads,
            self.spec.k(),
        ))
    }

    /// Survivor side of a plan: reads strips and produces the payload of every
    /// download, in plan order. Touching an unavailable strip is an error.
    pub fn gather(&self, plan: &RecoveryPlan, stripe: &StripeView) -> Result<Vec<Vec<u8>>, RecoveryError> {
        plan.downloads
            .iter()
            .map(|d| {
                let strip = stripe.strip(d.from)?;
                Ok(match d.target {
                    Some(f) => self.spec.enc(d.from, f, strip)?.payload,
                    None => strip.to_vec(),
                })
            })
            .collect()
    }

    /// Relayer side of a plan: rebuilds the strips of `plan.pattern` (in
    /// ascending node order) from the downloaded payloads.
    pub fn reconstruct(&self, plan: &RecoveryPlan, payloads: &[Vec<u8>]) -> Result<Vec<Vec<u8>>, RecoveryError> {
        if payloads.len() != plan.downloads.len() {
            return Err(RecoveryError::DownloadMismatch {
                expected: plan.downloads.len(),
                got: payloads.len(),
            });
        }
        for (d, p) in plan.downloads.iter().zip(payloads) {
            if p.len() != d.bytes {
                return Err(CodeError::DataLength {
                    expected: d.bytes,
                    got: p.len(),
                }
                .into());
            }
        }
        match plan.scheme {
            RecoveryScheme::Conventional => {
                let strips: Vec<(usize, &[u8])> = plan
                    .downloads
                    .iter()
                    .zip(payloads)
                    .map(|(d, p)| (d.from, p.as_slice()))
                    .collect();
                let data = self.spec.decode_original(&strips)?;
                plan.pattern
                    .nodes()
                    .iter()
                    .map(|&f| Ok(self.spec.encode_node(f, &data)?))
                    .collect()
            }
            RecoveryScheme::SingleMsr | RecoveryScheme::Concurrent => {
                let solution = self.solution(&plan.effective_pattern)?;
                let transform = solution
                    .transform
                    .as_ref()
                    .ok_or_else(|| RecoveryError::BadPattern(plan.effective_pattern.clone()))?;
                let ss = self.spec.symbol_size();
                let inputs: Vec<&[u8]> = payloads.iter().map(Vec::as_slice).collect();
                let virtuals = apply_matrix(transform, &inputs, ss);
                let mut lookup: HashMap<(usize, usize), &[u8]> = HashMap::new();
                for (key, p) in solution.reals.iter().zip(payloads) {
                    lookup.insert(*key, p);
                }
                for (key, v) in solution.unknowns.iter().zip(&virtuals) {
                    lookup.insert(*key, v);
                }
                plan.pattern
                    .nodes()
                    .iter()
                    .map(|&f| {
                        let symbols = self
                            .spec
                            .helpers(f)
                            .into_iter()
                            .map(|j| {
                                Ok(EncodedSymbol {
                                    from_node: j,
                                    for_node: f,
                                    coefficients: self.spec.enc_coefficients(j, f)?.to_vec(),
                                    payload: lookup[&(j, f)].to_vec(),
                                })
                            })
                            .collect::<Result<Vec<_>, CodeError>>()?;
                        Ok(self.spec.rec(f, &symbols)?)
                    })
                    .collect()
            }
        }
    }

    fn execute(
        &self,
        plan: RecoveryPlan,
        stripe: &StripeView,
    ) -> Result<(Vec<Vec<u8>>, RecoveryPlan), RecoveryError> {
        let payloads = self.gather(&plan, stripe)?;
        let strips = self.reconstruct(&plan, &payloads)?;
        Ok((strips, plan))
    }

    /// Concurrent recovery of a good pattern with t < k.
    pub fn recover_concurrent(
        &self,
        stripe: &StripeView,
        pattern: &FailurePattern,
    ) -> Result<(Vec<Vec<u8>>, RecoveryPlan), RecoveryError> {
        let plan = self.plan_concurrent(pattern)?;
        self.execute(plan, stripe)
    }

    /// Conventional recovery: decode from k survivors and re-encode.
    pub fn recover_conventional(
        &self,
        stripe: &StripeView,
        pattern: &FailurePattern,
    ) -> Result<(Vec<Vec<u8>>, RecoveryPlan), RecoveryError> {
        let plan = self.plan_conventional(pattern)?;
        self.execute(plan, stripe)
    }

    /// Recovery under the dispatch policy of [`RecoveryEngine::plan`].
    pub fn recover(
        &self,
        stripe: &StripeView,
        pattern: &FailurePattern,
    ) -> Result<(Vec<Vec<u8>>, RecoveryPlan), RecoveryError> {
        let plan = self.plan(pattern)?;
        self.execute(plan, stripe)
    }
}
