use crate::analysis::CsvTable;

/// Byte counters of one node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeTraffic {
    /// I/O step: stored bytes the node read.
    pub bytes_read: u64,
    /// Encode step: encoded-symbol bytes the node produced.
    pub bytes_encoded: u64,
    /// Download step: bytes the relayer pulled from this node.
    pub bytes_downloaded: u64,
    /// Upload step: rebuilt bytes the relayer pushed to this node.
    pub bytes_uploaded: u64,
}

/// Traffic of one recovery operation or degraded read, per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficLedger {
    pub per_node: Vec<NodeTraffic>,
    /// Reconstruction step: bytes the relayer rebuilt.
    pub bytes_reconstructed: u64,
    /// Bytes handed to a client by a degraded read.
    pub bytes_to_client: u64,
    /// Downloads from the relayer's own node left out of `bytes_downloaded`.
    pub local_bytes_exempt: u64,
    /// Sum of the per-stripe plan bandwidths.
    pub plan_bandwidth: u64,
    pub stripes: u64,
    /// Stripes whose pattern was escalated to a virtual failure pattern.
    pub escalated_stripes: u64,
}

impl TrafficLedger {
    pub fn new(n: usize) -> TrafficLedger {
        TrafficLedger {
            per_node: vec![NodeTraffic::default(); n],
            bytes_reconstructed: 0,
            bytes_to_client: 0,
            local_bytes_exempt: 0,
            plan_bandwidth: 0,
            stripes: 0,
            escalated_stripes: 0,
        }
    }

    pub fn total_read(&self) -> u64 {
        self.per_node.iter().map(|t| t.bytes_read).sum()
    }

    pub fn total_encoded(&self) -> u64 {
        self.per_node.iter().map(|t| t.bytes_encoded).sum()
    }

    pub fn total_downloaded(&self) -> u64 {
        self.per_node.iter().map(|t| t.bytes_downloaded).sum()
    }

    pub fn total_uploaded(&self) -> u64 {
        self.per_node.iter().map(|t| t.bytes_uploaded).sum()
    }

    pub fn is_empty(&self) -> bool {
        *self == TrafficLedger::new(self.per_node.len())
    }

    pub fn merge(&mut self, other: &TrafficLedger) {
        for (a, b) in self.per_node.iter_mut().zip(&other.per_node) {
            a.bytes_read += b.bytes_read;
            a.bytes_encoded += b.bytes_encoded;
            a.bytes_downloaded += b.bytes_downloaded;
            a.bytes_uploaded += b.bytes_uploaded;
        }
        self.bytes_reconstructed += other.bytes_reconstructed;
        self.bytes_to_client += other.bytes_to_client;
        self.local_bytes_exempt += other.local_bytes_exempt;
        self.plan_bandwidth += other.plan_bandwidth;
        self.stripes += other.stripes;
        self.escalated_stripes += other.escalated_stripes;
    }

    pub fn summary(&self) -> String {
        format!(
            "stripes: {}\nread: {} bytes\nencoded: {} bytes\ndownloaded: {} bytes\nreconstructed: {} bytes\nuploaded: {} bytes\nto client: {} bytes\nescalated stripes: {}\n",
            self.stripes,
            self.total_read(),
            self.total_encoded(),
            self.total_downloaded(),
            self.bytes_reconstructed,
            self.total_uploaded(),
            self.bytes_to_client,
            self.escalated_stripes,
        )
    }
}

impl CsvTable for TrafficLedger {
    fn headers(&self) -> Vec<String> {
        ["node", "bytes_read", "bytes_encoded", "bytes_downloaded", "bytes_uploaded"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    /// One row per node, then a `total` row.
    fn records(&self) -> Vec<Vec<String>> {
        let row = |name: String, t: &NodeTraffic| {
            vec![
                name,
                t.bytes_read.to_string(),
                t.bytes_encoded.to_string(),
                t.bytes_downloaded.to_string(),
                t.bytes_uploaded.to_string(),
            ]
        };
        let mut rows: Vec<Vec<String>> = self
            .per_node
            .iter()
            .enumerate()
            .map(|(i, t)| row(i.to_string(), t))
            .collect();
        let total = NodeTraffic {
            bytes_read: self.total_read(),
            bytes_encoded: self.total_encoded(),
            bytes_downloaded: self.total_downloaded(),
            bytes_uploaded: self.total_uploaded(),
        };
        rows.push(row("total".into(), &total));
        rows
    }
}
