//! Systematic MDS codes: Reed-Solomon with one symbol per strip, and a
//! product-matrix MSR code with `r = n - k` symbols per strip.
//!
//! A stripe holds `n * r` stored symbols `s[i][j]` produced by multiplying the
//! `nr x kr` generator with the `kr` data symbols. For MSR codes the two
//! single-failure building blocks are exposed as linear maps:
//!
//! * `enc(i, f)` turns node `i`'s strip into the encoded symbol `e[i][f]`
//!   (a fixed dot product with a length-`r` coefficient vector);
//! * `rec(f)` turns the `n - 1` encoded symbols `e[i][f]`, `i != f`, back into
//!   the `r` symbols of node `f` (an `r x (n - 1)` matrix).
//!
//! Everything the recovery layer does is expressed in terms of these two maps.

mod msr;
mod rs;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{self, GfError, Gf256, Matrix};

/// Version tag of the textual code document.
pub const CODE_DOC_VERSION: u32 = 1;

/// Exhaustive MDS verification is skipped above this many k-subsets; a
/// deterministic sample of subsets is checked instead.
const MDS_EXHAUSTIVE_LIMIT: u64 = 1000;
const MDS_SAMPLE: usize = 64;

#[derive(Debug, Error)]
pub enum CodeError {
    #[error("invalid code parameters: {0}")]
    InvalidParams(String),
    #[error("expected {expected} bytes of data, got {got}")]
    DataLength { expected: usize, got: usize },
    #[error("{0}")]
    Symbols(String),
    #[error("operation requires an MSR code")]
    NotMsr,
    #[error("strip of node {0} is not available")]
    Unavailable(usize),
    #[error("code is not MDS: nodes {0:?} do not determine the data")]
    NotMds(Vec<usize>),
    #[error("malformed code document: {0}")]
    Document(String),
    #[error(transparent)]
    Field(#[from] GfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodeKind {
    #[serde(rename = "rs")]
    ReedSolomon,
    #[serde(rename = "msr")]
    Msr,
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeKind::ReedSolomon => "rs",
            CodeKind::Msr => "msr",
        })
    }
}

impl FromStr for CodeKind {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rs" | "reed-solomon" | "reedsolomon" => Ok(CodeKind::ReedSolomon),
            "msr" => Ok(CodeKind::Msr),
            other => Err(CodeError::InvalidParams(format!("unknown code kind `{other}`"))),
        }
    }
}

/// One MDS code instance. Immutable once built.
#[derive(Clone)]
pub struct CodeSpec {
    n: usize,
    k: usize,
    r: usize,
    symbol_size: usize,
    kind: CodeKind,
    generator: Matrix,
    repair: Option<msr::MsrRepair>,
}

impl fmt::Debug for CodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CodeSpec")
            .field("kind", &self.kind)
            .field("n", &self.n)
            .field("k", &self.k)
            .field("r", &self.r)
            .field("symbol_size", &self.symbol_size)
            .finish_non_exhaustive()
    }
}

impl PartialEq for CodeSpec {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.k == other.k
            && self.r == other.r
            && self.symbol_size == other.symbol_size
            && self.kind == other.kind
            && self.generator == other.generator
    }
}

impl Eq for CodeSpec {}

/// Builds a systematic MDS code. Deterministic for fixed parameters.
pub fn build_code(
    n: usize,
    k: usize,
    kind: CodeKind,
    symbol_size: usize,
) -> Result<CodeSpec, CodeError> {
    CodeSpec::build(n, k, kind, symbol_size)
}

impl CodeSpec {
    pub fn build(n: usize, k: usize, kind: CodeKind, symbol_size: usize) -> Result<Self, CodeError> {
        if k < 1 || k >= n {
            return Err(CodeError::InvalidParams(format!("need 1 <= k < n, got n={n} k={k}")));
        }
        if symbol_size == 0 {
            return Err(CodeError::InvalidParams("symbol size must be positive".into()));
        }
        let spec = match kind {
            CodeKind::ReedSolomon => {
                if n > 256 {
                    return Err(CodeError::InvalidParams(format!(
                        "Reed-Solomon over GF(2^8) needs n <= 256, got {n}"
                    )));
                }
                CodeSpec {
                    n,
                    k,
                    r: 1,
                    symbol_size,
                    kind,
                    generator: rs::systematic_vandermonde(n, k)?,
                    repair: None,
                }
            }
            CodeKind::Msr => {
                if n != 2 * k {
                    return Err(CodeError::InvalidParams(format!(
                        "MSR codes require n = 2k, got n={n} k={k}"
                    )));
                }
                let built = msr::build(n, k)?;
                CodeSpec {
                    n,
                    k,
                    r: n - k,
                    symbol_size,
                    kind,
                    generator: built.generator,
                    repair: Some(built.repair),
                }
            }
        };
        spec.check_systematic()?;
        spec.verify_mds()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Symbols per strip.
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn symbol_size(&self) -> usize {
        self.symbol_size
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn generator(&self) -> &Matrix {
        &self.generator
    }

    /// Bytes one node stores per stripe.
    pub fn strip_bytes(&self) -> usize {
        self.r * self.symbol_size
    }

    /// Original data per stripe (M).
    pub fn stripe_data_bytes(&self) -> usize {
        self.k * self.strip_bytes()
    }

    /// Same parameters with a different symbol size. The generator and repair
    /// maps do not depend on the symbol size.
    pub fn with_symbol_size(&self, symbol_size: usize) -> Result<CodeSpec, CodeError> {
        if symbol_size == 0 {
            return Err(CodeError::InvalidParams("symbol size must be positive".into()));
        }
        let mut spec = self.clone();
        spec.symbol_size = symbol_size;
        Ok(spec)
    }

    fn check_systematic(&self) -> Result<(), CodeError> {
        let kr = self.k * self.r;
        for i in 0..kr {
            for j in 0..kr {
                let expect = if i == j { Gf256::ONE } else { Gf256::ZERO };
                if self.generator[(i, j)] != expect {
                    return Err(CodeError::InvalidParams(
                        "generator top block is not the identity".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn node_rows(&self, nodes: &[usize]) -> Vec<usize> {
        nodes
            .iter()
            .flat_map(|&i| (0..self.r).map(move |j| i * self.r + j))
            .collect()
    }

    /// Checks that every k-subset of nodes spans the data. Exhaustive for
    /// small codes, sampled deterministically otherwise.
    pub fn verify_mds(&self) -> Result<(), CodeError> {
        let total = binomial(self.n as u64, self.k as u64);
        let subsets: Vec<Vec<usize>> = if total <= MDS_EXHAUSTIVE_LIMIT {
            Combinations::new(self.n, self.k).collect()
        } else {
            let stride = (total / MDS_SAMPLE as u64).max(1);
            Combinations::new(self.n, self.k)
                .step_by(stride as usize)
                .take(MDS_SAMPLE)
                .collect()
        };
        for nodes in subsets {
            let sub = self.generator.select_rows(&self.node_rows(&nodes));
            if sub.rank() != self.k * self.r {
                return Err(CodeError::NotMds(nodes));
            }
        }
        Ok(())
    }

    fn repair(&self) -> Result<&msr::MsrRepair, CodeError> {
        self.repair.as_ref().ok_or(CodeError::NotMsr)
    }

    fn check_node(&self, i: usize) -> Result<(), CodeError> {
        if i >= self.n {
            return Err(CodeError::Symbols(format!("node {i} out of range for n={}", self.n)));
        }
        Ok(())
    }

    /// Coefficients of `Enc_{i,f}` over node `i`'s r stored symbols.
    pub fn enc_coefficients(&self, i: usize, f: usize) -> Result<&[Gf256], CodeError> {
        let repair = self.repair()?;
        self.check_node(i)?;
        self.check_node(f)?;
        if i == f {
            return Err(CodeError::Symbols(format!("node {i} cannot help repair itself")));
        }
        Ok(&repair.enc[f])
    }

    /// Matrix of `Rec_f`: maps the encoded symbols from `helpers(f)` (in that
    /// order) to the r symbols of node `f`.
    pub fn rec_matrix(&self, f: usize) -> Result<&Matrix, CodeError> {
        let repair = self.repair()?;
        self.check_node(f)?;
        Ok(&repair.rec[f])
    }

    /// Nodes that supply encoded symbols when repairing `f`, ascending.
    pub fn helpers(&self, f: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| i != f).collect()
    }

    /// Encoded symbol `e[i][f]` computed from node `i`'s strip.
    pub fn enc(&self, i: usize, f: usize, strip: &[u8]) -> Result<EncodedSymbol, CodeError> {
        let coefficients = self.enc_coefficients(i, f)?.to_vec();
        if strip.len() != self.strip_bytes() {
            return Err(CodeError::DataLength {
                expected: self.strip_bytes(),
                got: strip.len(),
            });
        }
        let symbols: Vec<&[u8]> = strip.chunks(self.symbol_size).collect();
        let payload = gf::combine(&coefficients, &symbols, self.symbol_size);
        Ok(EncodedSymbol {
            from_node: i,
            for_node: f,
            coefficients,
            payload,
        })
    }

    /// Reconstructs node `f`'s strip from one encoded symbol of every other node.
    pub fn rec(&self, f: usize, symbols: &[EncodedSymbol]) -> Result<Vec<u8>, CodeError> {
        let matrix = self.rec_matrix(f)?;
        if symbols.len() != self.n - 1 {
            return Err(CodeError::Symbols(format!(
                "repairing node {f} needs {} encoded symbols, got {}",
                self.n - 1,
                symbols.len()
            )));
        }
        let mut ordered: Vec<Option<&[u8]>> = vec![None; self.n];
        for s in symbols {
            if s.for_node != f {
                return Err(CodeError::Symbols(format!(
                    "symbol from node {} targets node {}, not {f}",
                    s.from_node, s.for_node
                )));
            }
            if s.from_node == f || s.from_node >= self.n || ordered[s.from_node].is_some() {
                return Err(CodeError::Symbols(format!(
                    "unexpected or duplicate helper {}",
                    s.from_node
                )));
            }
            if s.payload.len() != self.symbol_size {
                return Err(CodeError::DataLength {
                    expected: self.symbol_size,
                    got: s.payload.len(),
                });
            }
            ordered[s.from_node] = Some(&s.payload);
        }
        let inputs: Vec<&[u8]> = self
            .helpers(f)
            .into_iter()
            .map(|i| ordered[i].expect("every helper checked above"))
            .collect();
        Ok(apply_matrix(matrix, &inputs, self.symbol_size).concat())
    }

    /// Encodes `k * r` data symbols into a full stripe.
    pub fn encode_stripe(&self, data: &[u8]) -> Result<StripeView, CodeError> {
        let expected = self.stripe_data_bytes();
        if data.len() != expected {
            return Err(CodeError::DataLength {
                expected,
                got: data.len(),
            });
        }
        let inputs: Vec<&[u8]> = data.chunks(self.symbol_size).collect();
        let parity_rows: Vec<usize> = (self.k * self.r..self.n * self.r).collect();
        let parity = apply_matrix(
            &self.generator.select_rows(&parity_rows),
            &inputs,
            self.symbol_size,
        );
        let mut strips: Vec<Option<Vec<u8>>> = data
            .chunks(self.strip_bytes())
            .map(|c| Some(c.to_vec()))
            .collect();
        strips.extend(parity.chunks(self.r).map(|c| Some(c.concat())));
        Ok(StripeView { strips })
    }

    /// Recovers the original `k * r` data symbols from any k strips.
    pub fn decode_original(&self, strips: &[(usize, &[u8])]) -> Result<Vec<u8>, CodeError> {
        if strips.len() != self.k {
            return Err(CodeError::Symbols(format!(
                "decoding needs exactly {} strips, got {}",
                self.k,
                strips.len()
            )));
        }
        let mut nodes: Vec<usize> = strips.iter().map(|(i, _)| *i).collect();
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.len() != self.k || nodes.iter().any(|&i| i >= self.n) {
            return Err(CodeError::Symbols("decoding needs k distinct valid nodes".into()));
        }
        for (_, s) in strips {
            if s.len() != self.strip_bytes() {
                return Err(CodeError::DataLength {
                    expected: self.strip_bytes(),
                    got: s.len(),
                });
            }
        }
        let ids: Vec<usize> = strips.iter().map(|(i, _)| *i).collect();
        let sub = self.generator.select_rows(&self.node_rows(&ids));
        let inv = sub.invert().map_err(|e| match e {
            GfError::Singular => CodeError::NotMds(nodes.clone()),
            other => other.into(),
        })?;
        let inputs: Vec<&[u8]> = strips
            .iter()
            .flat_map(|(_, s)| s.chunks(self.symbol_size))
            .collect();
        Ok(apply_matrix(&inv, &inputs, self.symbol_size).concat())
    }

    /// Strip of node `i` re-encoded from the original data.
    pub fn encode_node(&self, i: usize, data: &[u8]) -> Result<Vec<u8>, CodeError> {
        self.check_node(i)?;
        if data.len() != self.stripe_data_bytes() {
            return Err(CodeError::DataLength {
                expected: self.stripe_data_bytes(),
                got: data.len(),
            });
        }
        let inputs: Vec<&[u8]> = data.chunks(self.symbol_size).collect();
        let rows = self.generator.select_rows(&self.node_rows(&[i]));
        Ok(apply_matrix(&rows, &inputs, self.symbol_size).concat())
    }

    /// Textual metadata document. Parsing it back and re-serializing yields
    /// the same bytes.
    pub fn to_document(&self) -> String {
        let doc = CodeDocument::from(self);
        let mut s = serde_json::to_string_pretty(&doc).expect("code document serializes");
        s.push('\n');
        s
    }

    pub fn from_document(text: &str) -> Result<CodeSpec, CodeError> {
        let doc: CodeDocument =
            serde_json::from_str(text).map_err(|e| CodeError::Document(e.to_string()))?;
        doc.into_spec()
    }
}

/// Serialized form of a [`CodeSpec`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeDocument {
    pub version: u32,
    pub kind: CodeKind,
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub symbol_size: usize,
    /// One hex string per generator row.
    pub generator: Vec<String>,
}

impl From<&CodeSpec> for CodeDocument {
    fn from(spec: &CodeSpec) -> Self {
        let generator = (0..spec.generator.rows())
            .map(|i| spec.generator.row(i).iter().map(|x| format!("{:02x}", x.0)).collect())
            .collect();
        CodeDocument {
            version: CODE_DOC_VERSION,
            kind: spec.kind,
            n: spec.n,
            k: spec.k,
            r: spec.r,
            symbol_size: spec.symbol_size,
            generator,
        }
    }
}

impl CodeDocument {
    /// Rebuilds the code from its parameters and checks that the stored
    /// generator matches.
    pub fn into_spec(self) -> Result<CodeSpec, CodeError> {
        if self.version != CODE_DOC_VERSION {
            return Err(CodeError::Document(format!("unsupported version {}", self.version)));
        }
        let spec = CodeSpec::build(self.n, self.k, self.kind, self.symbol_size)?;
        if spec.r != self.r {
            return Err(CodeError::Document(format!("r={} does not match the code", self.r)));
        }
        let rows: Result<Vec<Vec<u8>>, CodeError> =
            self.generator.iter().map(|row| parse_hex(row)).collect();
        let rows = rows?;
        if rows.len() != spec.generator.rows() || rows.iter().any(|r| r.len() != spec.generator.cols())
        {
            return Err(CodeError::Document("generator has the wrong shape".into()));
        }
        if Matrix::from_rows(&rows) != spec.generator {
            return Err(CodeError::Document(
                "generator does not match the construction for these parameters".into(),
            ));
        }
        Ok(spec)
    }
}

fn parse_hex(s: &str) -> Result<Vec<u8>, CodeError> {
    if !s.len().is_multiple_of(2) {
        return Err(CodeError::Document(format!("odd-length hex row `{s}`")));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&s[i..i + 2], 16)
                .map_err(|_| CodeError::Document(format!("bad hex in row `{s}`")))
        })
        .collect()
}

/// The stored strips of one stripe. A strip is `None` once its node is
/// unavailable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripeView {
    strips: Vec<Option<Vec<u8>>>,
}

impl StripeView {
    pub fn from_strips(strips: Vec<Option<Vec<u8>>>) -> StripeView {
        StripeView { strips }
    }

    pub fn n(&self) -> usize {
        self.strips.len()
    }

    pub fn is_available(&self, i: usize) -> bool {
        self.strips.get(i).is_some_and(Option::is_some)
    }

    pub fn available(&self) -> Vec<bool> {
        self.strips.iter().map(Option::is_some).collect()
    }

    /// Reading an unavailable strip is an error.
    pub fn strip(&self, i: usize) -> Result<&[u8], CodeError> {
        self.strips
            .get(i)
            .and_then(Option::as_deref)
            .ok_or(CodeError::Unavailable(i))
    }

    /// Drops node `i`'s strip.
    pub fn erase(&mut self, i: usize) {
        if let Some(s) = self.strips.get_mut(i) {
            *s = None;
        }
    }

    pub fn restore(&mut self, i: usize, strip: Vec<u8>) {
        self.strips[i] = Some(strip);
    }

    /// Copy with the given nodes erased.
    pub fn with_failed(&self, failed: &[usize]) -> StripeView {
        let mut s = self.clone();
        for &i in failed {
            s.erase(i);
        }
        s
    }
}

/// `e[from][for]`: one symbol computed by `from_node` to help repair `for_node`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSymbol {
    pub from_node: usize,
    pub for_node: usize,
    pub coefficients: Vec<Gf256>,
    pub payload: Vec<u8>,
}

/// Applies a coefficient matrix to a vector of byte symbols.
pub fn apply_matrix(m: &Matrix, inputs: &[&[u8]], symbol_size: usize) -> Vec<Vec<u8>> {
    assert_eq!(m.cols(), inputs.len(), "matrix/input size mismatch");
    (0..m.rows())
        .map(|i| gf::combine(m.row(i), inputs, symbol_size))
        .collect()
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Lexicographic k-subsets of `0..n`.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Combinations {
        Combinations {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests;
