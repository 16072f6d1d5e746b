//! In-process storage cluster with a relayer.
//!
//! Files are cut into groups of k data blocks. Each group is encoded stripe
//! by stripe into n blocks, one per node. Block position `p` of group `g`
//! lives on node `(p + g) mod n`, so parity moves around the nodes.
//!
//! Recovery and degraded reads run through [`pipeline::run_pipeline`]: the
//! input stage reads survivor strips and encodes the symbols each plan asks
//! for, workers rebuild, and the output stage writes in stripe order.

mod ledger;
pub mod pipeline;
pub mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ledger::{NodeTraffic, TrafficLedger};
pub use pipeline::PipelineConfig;

use crate::codes::{CodeError, CodeSpec, StripeView};
use crate::recovery::{FailurePattern, RecoveryEngine, RecoveryError, RecoveryPlan};

/// Block size used when none is given: 64 MiB, rounded down to a multiple of
/// the strip size.
pub const DEFAULT_BLOCK_TARGET: usize = 64 << 20;

pub fn default_block_size(spec: &CodeSpec) -> usize {
    let sb = spec.strip_bytes();
    (DEFAULT_BLOCK_TARGET / sb).max(1) * sb
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("block size {block_size} is not a positive multiple of the strip size {strip}")]
    BlockSize { block_size: usize, strip: usize },
    #[error("unrecoverable: {failed} failed nodes, the code tolerates {max}")]
    Unrecoverable { failed: usize, max: usize },
    #[error("no block with id {0}")]
    NoSuchBlock(u64),
    #[error("no file with index {0}")]
    NoSuchFile(usize),
    #[error("block {0} is on a failed node")]
    BlockUnavailable(u64),
    #[error("metadata: {0}")]
    Metadata(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Code(#[from] CodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockRole {
    Data,
    Parity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub id: u64,
    pub group: usize,
    /// Position within the group: `0..k` data, `k..n` parity.
    pub position: usize,
    pub node: usize,
    pub role: BlockRole,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub first_group: usize,
    pub groups: usize,
    pub length: u64,
    /// Zero bytes appended to fill the last group.
    pub padding: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryMode {
    /// Dispatch policy of the recovery engine (concurrent where possible).
    Core,
    /// Whole strips from k survivors.
    Conventional,
}

/// Where the relayer runs. Downloads from its own node are counted unless
/// `count_local` is off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelayerConfig {
    pub host: Option<usize>,
    pub count_local: bool,
}

impl Default for RelayerConfig {
    fn default() -> Self {
        RelayerConfig {
            host: None,
            count_local: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecoveryOptions {
    pub mode: RecoveryMode,
    pub pipeline: PipelineConfig,
    pub relayer: RelayerConfig,
}

impl RecoveryOptions {
    pub fn new(mode: RecoveryMode) -> RecoveryOptions {
        RecoveryOptions {
            mode,
            pipeline: PipelineConfig::default(),
            relayer: RelayerConfig::default(),
        }
    }

    pub fn sequential(mut self) -> RecoveryOptions {
        self.pipeline = PipelineConfig::sequential();
        self
    }
}

type NodeStore = BTreeMap<u64, Vec<u8>>;

pub struct Cluster {
    spec: Arc<CodeSpec>,
    engine: Arc<RecoveryEngine>,
    block_size: usize,
    strips_per_block: usize,
    nodes: Vec<NodeStore>,
    groups: usize,
    files: Vec<FileEntry>,
    failed: BTreeSet<usize>,
}

impl std::fmt::Debug for Cluster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cluster")
            .field("n", &self.spec.n())
            .field("k", &self.spec.k())
            .field("kind", &self.spec.kind())
            .field("block_size", &self.block_size)
            .field("groups", &self.groups)
            .field("files", &self.files.len())
            .field("failed", &self.failed)
            .finish()
    }
}

/// One stripe after the input stage.
struct StripeJob {
    stripe: u64,
    rotation: usize,
    plan: Arc<RecoveryPlan>,
    payloads: Vec<Vec<u8>>,
    traffic: TrafficLedger,
}

struct StripeResult {
    stripe: u64,
    rotation: usize,
    plan: Arc<RecoveryPlan>,
    strips: Vec<Vec<u8>>,
    traffic: TrafficLedger,
}

impl Cluster {
    pub fn create(spec: CodeSpec, block_size: usize) -> Result<Cluster, ClusterError> {
        let strip = spec.strip_bytes();
        if block_size == 0 || !block_size.is_multiple_of(strip) {
            return Err(ClusterError::BlockSize { block_size, strip });
        }
        let spec = Arc::new(spec);
        Ok(Cluster {
            engine: Arc::new(RecoveryEngine::new(spec.clone())),
            nodes: vec![NodeStore::new(); spec.n()],
            spec,
            block_size,
            strips_per_block: block_size / strip,
            groups: 0,
            files: Vec::new(),
            failed: BTreeSet::new(),
        })
    }

    pub fn spec(&self) -> &Arc<CodeSpec> {
        &self.spec
    }

    pub fn engine(&self) -> &Arc<RecoveryEngine> {
        &self.engine
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn strips_per_block(&self) -> usize {
        self.strips_per_block
    }

    pub fn stripe_count(&self) -> u64 {
        (self.groups * self.strips_per_block) as u64
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn failed(&self) -> Vec<usize> {
        self.failed.iter().copied().collect()
    }

    pub fn rotation(&self, group: usize) -> usize {
        group % self.n()
    }

    fn node_of(&self, position: usize, rotation: usize) -> usize {
        (position + rotation) % self.n()
    }

    fn position_of(&self, node: usize, rotation: usize) -> usize {
        (node + self.n() - rotation) % self.n()
    }

    /// Stores `data` as a new file and returns the ids of all blocks written.
    pub fn stripe_file(&mut self, data: &[u8]) -> Result<Vec<u64>, ClusterError> {
        let (n, k) = (self.n(), self.spec.k());
        let group_bytes = k * self.block_size;
        let groups = data.len().div_ceil(group_bytes).max(1);
        let padding = groups * group_bytes - data.len();
        let sb = self.spec.strip_bytes();

        // Encode everything first so a failure leaves the cluster unchanged.
        let mut writes = Vec::with_capacity(groups * self.strips_per_block);
        let mut stripe_data = vec![0u8; self.spec.stripe_data_bytes()];
        for g in 0..groups {
            let group = self.groups + g;
            let base = g * group_bytes;
            for j in 0..self.strips_per_block {
                for p in 0..k {
                    let start = base + p * self.block_size + j * sb;
                    let dst = &mut stripe_data[p * sb..(p + 1) * sb];
                    dst.fill(0);
                    if start < data.len() {
                        let end = (start + sb).min(data.len());
                        dst[..end - start].copy_from_slice(&data[start..end]);
                    }
                }
                let view = self.spec.encode_stripe(&stripe_data)?;
                let stripe = (group * self.strips_per_block + j) as u64;
                writes.push((group, stripe, view));
            }
        }
        for (group, stripe, view) in writes {
            let rot = self.rotation(group);
            for p in 0..n {
                let node = self.node_of(p, rot);
                if !self.failed.contains(&node) {
                    self.nodes[node].insert(stripe, view.strip(p)?.to_vec());
                }
            }
        }
        let first_group = self.groups;
        self.groups += groups;
        self.files.push(FileEntry {
            first_group,
            groups,
            length: data.len() as u64,
            padding: padding as u64,
        });
        Ok((first_group * n..(first_group + groups) * n).map(|b| b as u64).collect())
    }

    pub fn block(&self, id: u64) -> Result<Block, ClusterError> {
        let n = self.n() as u64;
        let group = (id / n) as usize;
        if group >= self.groups {
            return Err(ClusterError::NoSuchBlock(id));
        }
        let position = (id % n) as usize;
        Ok(Block {
            id,
            group,
            position,
            node: self.node_of(position, self.rotation(group)),
            role: if position < self.spec.k() {
                BlockRole::Data
            } else {
                BlockRole::Parity
            },
            size: self.block_size,
        })
    }

    pub fn blocks(&self) -> Vec<Block> {
        (0..(self.groups * self.n()) as u64)
            .map(|id| self.block(id).expect("id in range"))
            .collect()
    }

    fn group_stripes(&self, group: usize) -> std::ops::Range<u64> {
        let s = (group * self.strips_per_block) as u64;
        s..s + self.strips_per_block as u64
    }

    /// Marks nodes as failed and drops their strips. Nodes already failed are
    /// accepted again. Exceeding n - k failures is refused and leaves the
    /// cluster unchanged.
    pub fn fail_nodes(&mut self, pattern: &FailurePattern) -> Result<(), ClusterError> {
        let max = self.n() - self.spec.k();
        let mut union = self.failed.clone();
        for &node in pattern.nodes() {
            if node >= self.n() {
                return Err(RecoveryError::Pattern(format!("node {node} out of range")).into());
            }
            union.insert(node);
        }
        if union.len() > max {
            return Err(ClusterError::Unrecoverable {
                failed: union.len(),
                max,
            });
        }
        for &node in pattern.nodes() {
            self.nodes[node].clear();
        }
        self.failed = union;
        Ok(())
    }

    /// Reads a whole block from its node.
    pub fn read_block(&self, id: u64) -> Result<Vec<u8>, ClusterError> {
        let block = self.block(id)?;
        if self.failed.contains(&block.node) {
            return Err(ClusterError::BlockUnavailable(id));
        }
        let store = &self.nodes[block.node];
        let mut out = Vec::with_capacity(self.block_size);
        for s in self.group_stripes(block.group) {
            out.extend_from_slice(&store[&s]);
        }
        Ok(out)
    }

    /// Logical failure pattern of stripes in a group with this rotation.
    fn logical_pattern(&self, rotation: usize) -> Result<FailurePattern, ClusterError> {
        Ok(FailurePattern::new(
            self.failed.iter().map(|&f| self.position_of(f, rotation)),
            self.n(),
        )?)
    }

    /// One plan per rotation offset; every stripe with that offset shares it.
    fn plans(&self, mode: RecoveryMode) -> Result<Vec<Arc<RecoveryPlan>>, ClusterError> {
        (0..self.n())
            .map(|rot| {
                let pattern = self.logical_pattern(rot)?;
                let plan = match mode {
                    RecoveryMode::Core => self.engine.plan(&pattern)?,
                    RecoveryMode::Conventional => self.engine.plan_conventional(&pattern)?,
                };
                Ok(Arc::new(plan))
            })
            .collect()
    }

    /// Input stage: read strips, encode requested symbols, count traffic.
    fn prepare(
        &self,
        stripe: u64,
        plan: Arc<RecoveryPlan>,
        relayer: RelayerConfig,
    ) -> Result<StripeJob, ClusterError> {
        let n = self.n();
        let group = (stripe / self.strips_per_block as u64) as usize;
        let rotation = self.rotation(group);
        let strips: Vec<Option<Vec<u8>>> = (0..n)
            .map(|p| self.nodes[self.node_of(p, rotation)].get(&stripe).cloned())
            .collect();
        let view = StripeView::from_strips(strips);
        let payloads = self.engine.gather(&plan, &view)?;

        let mut traffic = TrafficLedger::new(n);
        traffic.stripes = 1;
        traffic.plan_bandwidth = plan.expected_bandwidth as u64;
        if plan.escalation_depth() > 0 {
            traffic.escalated_stripes = 1;
        }
        let contacted: BTreeSet<usize> = plan.downloads.iter().map(|d| d.from).collect();
        for &p in &contacted {
            traffic.per_node[self.node_of(p, rotation)].bytes_read += self.spec.strip_bytes() as u64;
        }
        for d in &plan.downloads {
            let node = self.node_of(d.from, rotation);
            let bytes = d.bytes as u64;
            if d.target.is_some() {
                traffic.per_node[node].bytes_encoded += bytes;
            }
            if relayer.host == Some(node) && !relayer.count_local {
                traffic.local_bytes_exempt += bytes;
            } else {
                traffic.per_node[node].bytes_downloaded += bytes;
            }
        }
        Ok(StripeJob {
            stripe,
            rotation,
            plan,
            payloads,
            traffic,
        })
    }

    fn rebuild(&self, job: StripeJob) -> Result<StripeResult, ClusterError> {
        let strips = self.engine.reconstruct(&job.plan, &job.payloads)?;
        Ok(StripeResult {
            stripe: job.stripe,
            rotation: job.rotation,
            plan: job.plan,
            strips,
            traffic: job.traffic,
        })
    }

    /// Runs the pipeline over `stripes`, calling `out` with each result in
    /// stripe order.
    fn run_stripes(
        &self,
        stripes: std::ops::Range<u64>,
        opts: &RecoveryOptions,
        mut out: impl FnMut(StripeResult) -> Result<(), ClusterError>,
    ) -> Result<(), ClusterError> {
        let plans = self.plans(opts.mode)?;
        let relayer = opts.relayer;
        let spb = self.strips_per_block as u64;
        let input = stripes.map(|s| {
            let rot = self.rotation((s / spb) as usize);
            self.prepare(s, plans[rot].clone(), relayer)
        });
        pipeline::run_pipeline(&opts.pipeline, input, |job| self.rebuild(job), |_, r| out(r))
    }

    /// Rebuilds every failed node onto a replacement with the same index and
    /// returns the traffic. Without failures this does nothing and returns an
    /// empty ledger. On error the cluster is left as it was.
    pub fn run_recovery(&mut self, opts: &RecoveryOptions) -> Result<TrafficLedger, ClusterError> {
        let n = self.n();
        let mut ledger = TrafficLedger::new(n);
        if self.failed.is_empty() {
            return Ok(ledger);
        }
        let mut replacements: BTreeMap<usize, NodeStore> =
            self.failed.iter().map(|&f| (f, NodeStore::new())).collect();
        self.run_stripes(0..self.stripe_count(), opts, |r| {
            ledger.merge(&r.traffic);
            for (&p, strip) in r.plan.pattern.nodes().iter().zip(r.strips) {
                let node = (p + r.rotation) % n;
                let bytes = strip.len() as u64;
                ledger.per_node[node].bytes_uploaded += bytes;
                ledger.bytes_reconstructed += bytes;
                replacements
                    .get_mut(&node)
                    .expect("pattern nodes are failed nodes")
                    .insert(r.stripe, strip);
            }
            Ok(())
        })?;
        for (node, store) in replacements {
            self.nodes[node] = store;
        }
        self.failed.clear();
        Ok(ledger)
    }

    /// Serves a block. A block on a live node is read directly with no
    /// recovery traffic; otherwise its strips are rebuilt stripe by stripe
    /// and returned without writing anything back.
    pub fn degraded_read(
        &self,
        id: u64,
        opts: &RecoveryOptions,
    ) -> Result<(Vec<u8>, TrafficLedger), ClusterError> {
        let block = self.block(id)?;
        let mut ledger = TrafficLedger::new(self.n());
        if !self.failed.contains(&block.node) {
            let bytes = self.read_block(id)?;
            ledger.bytes_to_client = bytes.len() as u64;
            return Ok((bytes, ledger));
        }
        let mut bytes = Vec::with_capacity(self.block_size);
        self.run_stripes(self.group_stripes(block.group), opts, |r| {
            ledger.merge(&r.traffic);
            let idx = r
                .plan
                .pattern
                .nodes()
                .iter()
                .position(|&p| p == block.position)
                .expect("failed block is in the pattern");
            ledger.bytes_reconstructed += r.strips.iter().map(|s| s.len() as u64).sum::<u64>();
            bytes.extend_from_slice(&r.strips[idx]);
            Ok(())
        })?;
        ledger.bytes_to_client = bytes.len() as u64;
        Ok((bytes, ledger))
    }

    /// Reads a file back, without padding. Blocks on failed nodes are served
    /// by degraded reads.
    pub fn read_file(&self, file: usize, opts: &RecoveryOptions) -> Result<Vec<u8>, ClusterError> {
        let entry = self.files.get(file).ok_or(ClusterError::NoSuchFile(file))?;
        let n = self.n() as u64;
        let mut out = Vec::with_capacity(entry.length as usize + entry.padding as usize);
        for g in entry.first_group..entry.first_group + entry.groups {
            for p in 0..self.spec.k() as u64 {
                let (bytes, _) = self.degraded_read(g as u64 * n + p, opts)?;
                out.extend_from_slice(&bytes);
            }
        }
        out.truncate(entry.length as usize);
        Ok(out)
    }

    pub fn save(&self, dir: &Path) -> Result<(), ClusterError> {
        store::save(self, dir)
    }

    pub fn load(dir: &Path) -> Result<Cluster, ClusterError> {
        store::load(dir)
    }
}
