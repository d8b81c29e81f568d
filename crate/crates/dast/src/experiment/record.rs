//! Experiment records and their CSV/JSON persistence.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One identification run: configuration fingerprint, seeding, solver
/// outcome, error metrics, and bound values. Append-only; every field is
/// populated for every run (fields that do not apply to a series, such as
/// `mu` for the subspace baseline, hold zero).
///
/// All numeric fields except `wall_time` are determined bit-exactly by
/// `(config_hash, seed, threads)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    /// Series label, e.g. `identify` or `dast_vs_subspace:dast`.
    pub experiment: String,
    /// Fingerprint of every configuration field except the base seed,
    /// threads, and output destination.
    pub config_hash: String,
    /// The derived RNG seed that generated this run's randomness.
    pub seed: u64,
    pub threads: usize,
    pub rho: f64,
    pub sigma: f64,
    /// Number of measurements (or time steps for time-domain runs).
    pub n: usize,
    pub net_size: usize,
    pub eps: f64,
    pub delta: f64,
    pub mu: f64,
    /// Numerical rank of the dictionary matrix (diagnostic; a value below
    /// `n` flags a non-spanning measurement set).
    pub m_rank: usize,
    /// `converged`, `max_iterations`, `ok`, `defective`, or `clipped`.
    pub status: String,
    pub iterations: usize,
    pub h2_error: f64,
    pub hinf_error: f64,
    pub hinf_certified: f64,
    pub empirical_mse: f64,
    pub effective_degree: usize,
    pub theorem_bound: f64,
    pub theorem_bound_proof: f64,
    pub bound_satisfied: bool,
    /// Seconds; excluded from the bit-exact reproducibility contract.
    pub wall_time: f64,
}

/// Per-sweep-point summary: the median H2 error of a series at one sweep
/// value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub n: usize,
    pub runs: usize,
    pub median_h2_error: f64,
}

/// A report-only observation emitted next to sweep results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoftFlag {
    pub name: String,
    pub pass: bool,
}

/// Records plus per-point summaries from a sweep.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<ExperimentRecord>,
    pub summary: Vec<SummaryRow>,
    pub soft_flags: Vec<SoftFlag>,
}

impl SweepOutput {
    pub fn any_nonconverged(&self) -> bool {
        self.records.iter().any(|r| r.status == "max_iterations")
    }

    /// Median H2 error of one series at one sweep value.
    pub fn median_for(&self, experiment: &str, n: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.experiment == experiment && s.n == n)
            .map(|s| s.median_h2_error)
    }
}

pub fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Writes records as CSV; the header row is exactly the record field names.
pub fn write_records_csv(records: &[ExperimentRecord], out: &mut dyn Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for record in records {
        writer
            .serialize(record)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    writer
        .flush()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

pub fn read_records_csv(text: &str) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidInput(format!("record CSV: {e}")))
}

/// Writes records as a JSON array of objects.
pub fn write_records_json(records: &[ExperimentRecord], out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, records)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_records_json(text: &str) -> Result<Vec<ExperimentRecord>> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("record JSON: {e}")))
}

/// Writes summary rows as CSV.
pub fn write_summary_csv(rows: &[SummaryRow], out: &mut dyn Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    writer
        .flush()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record() -> ExperimentRecord {
        ExperimentRecord {
            experiment: "identify".into(),
            config_hash: "deadbeef01234567".into(),
            seed: 42,
            threads: 2,
            rho: 0.7,
            sigma: 0.01,
            n: 80,
            net_size: 2000,
            eps: 1.0 / 3.0,
            delta: 0.5,
            mu: 0.33854,
            m_rank: 80,
            status: "converged".into(),
            iterations: 512,
            h2_error: 0.004_371_529_188_216_33,
            hinf_error: 0.0079,
            hinf_certified: 0.0091,
            empirical_mse: 1.7e-5,
            effective_degree: 6,
            theorem_bound: 2180.0,
            theorem_bound_proof: 600.0,
            bound_satisfied: true,
            wall_time: 1.25,
        }
    }

    #[test]
    fn csv_round_trip_preserves_all_digits() {
        let records = vec![sample_record()];
        let mut buf = Vec::new();
        write_records_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("experiment,config_hash,seed,threads,rho,sigma,n,net_size"));
        let back = read_records_csv(&text).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn json_round_trip_preserves_all_digits() {
        let records = vec![sample_record()];
        let mut buf = Vec::new();
        write_records_json(&records, &mut buf).unwrap();
        let back = read_records_json(&String::from_utf8(buf).unwrap()).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn csv_and_json_agree() {
        let records = vec![sample_record()];
        let mut csv_buf = Vec::new();
        write_records_csv(&records, &mut csv_buf).unwrap();
        let from_csv = read_records_csv(&String::from_utf8(csv_buf).unwrap()).unwrap();
        let mut json_buf = Vec::new();
        write_records_json(&from_csv, &mut json_buf).unwrap();
        let from_json = read_records_json(&String::from_utf8(json_buf).unwrap()).unwrap();
        assert_eq!(records, from_json);
    }

    #[test]
    fn median_of_samples() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }
}
