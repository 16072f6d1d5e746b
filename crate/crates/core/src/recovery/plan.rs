use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use super::FailurePattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecoveryScheme {
    /// Whole strips from k survivors, decode, re-encode.
    Conventional,
    /// One encoded symbol from each of the n - 1 survivors.
    SingleMsr,
    /// t encoded symbols from each of the n - t survivors plus virtual symbols.
    Concurrent,
}

impl fmt::Display for RecoveryScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecoveryScheme::Conventional => "conventional",
            RecoveryScheme::SingleMsr => "msr-single",
            RecoveryScheme::Concurrent => "core-concurrent",
        })
    }
}

/// One transfer from a surviving node to the relayer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Download {
    pub from: usize,
    /// Failed node the encoded symbol targets; `None` for a whole strip.
    pub target: Option<usize>,
    pub bytes: usize,
}

/// What one stripe's recovery downloads, and from whom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryPlan {
    pub scheme: RecoveryScheme,
    /// Nodes whose strips are rebuilt.
    pub pattern: FailurePattern,
    /// Pattern the download set is computed for. Differs from `pattern` after
    /// escalation of a bad pattern.
    pub effective_pattern: FailurePattern,
    pub downloads: Vec<Download>,
    /// Bytes downloaded per stripe.
    pub expected_bandwidth: usize,
    /// Number of contacted survivors.
    pub d: usize,
    /// Bytes downloaded from each contacted survivor.
    pub beta_per_node: usize,
}

impl RecoveryPlan {
    pub(crate) fn new(
        scheme: RecoveryScheme,
        pattern: FailurePattern,
        effective_pattern: FailurePattern,
        downloads: Vec<Download>,
        d: usize,
    ) -> RecoveryPlan {
        let expected_bandwidth: usize = downloads.iter().map(|d| d.bytes).sum();
        let beta_per_node = expected_bandwidth.checked_div(d).unwrap_or(0);
        RecoveryPlan {
            scheme,
            pattern,
            effective_pattern,
            downloads,
            expected_bandwidth,
            d,
            beta_per_node,
        }
    }

    /// Extra nodes added by escalation (0 for a good pattern).
    pub fn escalation_depth(&self) -> usize {
        self.effective_pattern.t() - self.pattern.t()
    }

    /// Bytes downloaded from each contacted node.
    pub fn bytes_by_node(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for d in &self.downloads {
            *out.entry(d.from).or_insert(0) += d.bytes;
        }
        out
    }

    /// Plain-text report used by the CLI.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scheme: {}", self.scheme);
        let _ = writeln!(s, "pattern: {}", self.pattern);
        let _ = writeln!(s, "effective pattern: {}", self.effective_pattern);
        if self.escalation_depth() > 1 {
            let _ = writeln!(s, "escalation depth: {} (deeper than one node)", self.escalation_depth());
        } else {
            let _ = writeln!(s, "escalation depth: {}", self.escalation_depth());
        }
        let _ = writeln!(s, "contacted nodes (d): {}", self.d);
        let _ = writeln!(s, "per-node download (beta): {} bytes", self.beta_per_node);
        let nodes: Vec<String> = self
            .bytes_by_node()
            .iter()
            .map(|(n, b)| format!("N{n}={b}"))
            .collect();
        let _ = writeln!(s, "per-node bytes: {}", nodes.join(" "));
        let _ = writeln!(s, "total bandwidth: {} bytes", self.expected_bandwidth);
        s
    }
}

impl fmt::Display for RecoveryPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.report())
    }
}
