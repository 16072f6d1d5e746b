use std::path::Path;

use super::{AnalysisError, CensusReport, MttfSweep, RatioTable};

/// Something that renders as a headered CSV table.
pub trait CsvTable {
    fn headers(&self) -> Vec<String>;
    fn records(&self) -> Vec<Vec<String>>;
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl CsvTable for RatioTable {
    fn headers(&self) -> Vec<String> {
        strings(&["n", "k", "t", "good_ratio", "good_fraction", "bad_ratio", "bad_fraction"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    self.n.to_string(),
                    self.k.to_string(),
                    r.t.to_string(),
                    r.good.to_string(),
                    format!("{}/{}", r.good.num, r.good.den),
                    r.bad.map(|b| b.to_string()).unwrap_or_default(),
                    r.bad.map(|b| format!("{}/{}", b.num, b.den)).unwrap_or_default(),
                ]
            })
            .collect()
    }
}

impl CsvTable for [CensusReport] {
    fn headers(&self) -> Vec<String> {
        strings(&["n", "k", "t", "total_patterns", "bad_patterns", "bad_fraction"])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.k.to_string(),
                    r.t.to_string(),
                    r.total.to_string(),
                    r.bad_count.to_string(),
                    format!("{:.6}", r.bad_fraction),
                ]
            })
            .collect()
    }
}

impl CsvTable for MttfSweep {
    fn headers(&self) -> Vec<String> {
        strings(&[
            "n",
            "k",
            "lambda_per_year",
            "bandwidth_bytes_per_s",
            "capacity_bytes",
            "mttf_core_years",
            "mttf_conventional_years",
            "ratio",
        ])
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    self.n.to_string(),
                    self.k.to_string(),
                    r.lambda.to_string(),
                    r.bandwidth.to_string(),
                    r.capacity.to_string(),
                    format!("{:e}", r.mttf_core),
                    format!("{:e}", r.mttf_conventional),
                    format!("{:.4}", r.ratio()),
                ]
            })
            .collect()
    }
}

/// Writes a headered CSV table to any writer.
pub fn write_csv<T: CsvTable + ?Sized, W: std::io::Write>(table: &T, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(table.headers())?;
    for r in table.records() {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a headered CSV file.
pub fn emit_csv<T: CsvTable + ?Sized>(table: &T, path: &Path) -> Result<(), AnalysisError> {
    let file = std::fs::File::create(path).map_err(|source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(table, std::io::BufWriter::new(file)).map_err(|source| AnalysisError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a CSV file back as (headers, records).
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), AnalysisError> {
    let csv_err = |source| AnalysisError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(csv_err)?.iter().map(String::from).collect());
    }
    Ok((headers, rows))
}
