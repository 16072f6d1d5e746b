//! On-disk layout of a cluster:
//!
//! ```text
//! <dir>/metadata.json          code document, block size, groups, files, failed nodes
//! <dir>/node<i>/stripe<s>.strip
//! ```
//!
//! Stripe indices are global: stripe `s` belongs to group
//! `s / strips_per_block`. Nodes listed as failed have no strip files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Cluster, ClusterError, FileEntry};
use crate::codes::CodeDocument;

pub const METADATA_FILE: &str = "metadata.json";
const METADATA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    version: u32,
    code: CodeDocument,
    block_size: usize,
    /// Rotation offset of each block group.
    rotations: Vec<usize>,
    files: Vec<FileEntry>,
    failed: Vec<usize>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ClusterError + '_ {
    move |source| ClusterError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn node_dir(dir: &Path, node: usize) -> PathBuf {
    dir.join(format!("node{node}"))
}

pub fn strip_path(dir: &Path, node: usize, stripe: u64) -> PathBuf {
    node_dir(dir, node).join(format!("stripe{stripe}.strip"))
}

pub(super) fn save(cluster: &Cluster, dir: &Path) -> Result<(), ClusterError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (node, store) in cluster.nodes.iter().enumerate() {
        let nd = node_dir(dir, node);
        if nd.exists() {
            fs::remove_dir_all(&nd).map_err(io_err(&nd))?;
        }
        if cluster.failed.contains(&node) {
            continue;
        }
        fs::create_dir_all(&nd).map_err(io_err(&nd))?;
        for (&stripe, strip) in store {
            let p = strip_path(dir, node, stripe);
            fs::write(&p, strip).map_err(io_err(&p))?;
        }
    }
    let meta = Metadata {
        version: METADATA_VERSION,
        code: CodeDocument::from(cluster.spec.as_ref()),
        block_size: cluster.block_size,
        rotations: (0..cluster.groups).map(|g| cluster.rotation(g)).collect(),
        files: cluster.files.clone(),
        failed: cluster.failed.iter().copied().collect(),
    };
    let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    text.push('\n');
    let p = dir.join(METADATA_FILE);
    fs::write(&p, text).map_err(io_err(&p))
}

pub(super) fn load(dir: &Path) -> Result<Cluster, ClusterError> {
    let p = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&p).map_err(io_err(&p))?;
    let meta: Metadata =
        serde_json::from_str(&text).map_err(|e| ClusterError::Metadata(format!("{}: {e}", p.display())))?;
    if meta.version != METADATA_VERSION {
        return Err(ClusterError::Metadata(format!("unsupported metadata version {}", meta.version)));
    }
    let spec = meta.code.into_spec()?;
    let mut cluster = Cluster::create(spec, meta.block_size)?;
    let n = cluster.n();
    for (g, &rot) in meta.rotations.iter().enumerate() {
        if rot != cluster.rotation(g) {
            return Err(ClusterError::Metadata(format!("group {g} has unexpected rotation {rot}")));
        }
    }
    cluster.groups = meta.rotations.len();
    cluster.files = meta.files;
    let stripes = cluster.stripe_count();
    let strip_bytes = cluster.spec.strip_bytes();
    for &f in &meta.failed {
        if f >= n {
            return Err(ClusterError::Metadata(format!("failed node {f} out of range")));
        }
        cluster.failed.insert(f);
    }
    for node in 0..n {
        if cluster.failed.contains(&node) {
            continue;
        }
        let mut store = BTreeMap::new();
        for s in 0..stripes {
            let sp = strip_path(dir, node, s);
            let strip = fs::read(&sp).map_err(io_err(&sp))?;
            if strip.len() != strip_bytes {
                return Err(ClusterError::Metadata(format!(
                    "{}: {} bytes, expected {strip_bytes}",
                    sp.display(),
                    strip.len()
                )));
            }
            store.insert(s, strip);
        }
        cluster.nodes[node] = store;
    }
    Ok(cluster)
}
