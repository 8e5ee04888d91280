//! Experiment result records and their file formats.
//!
//! One record summarizes one curve point: a (K, L, P_total) combination
//! averaged over Monte-Carlo trials. Files are plot-ready CSV (one header
//! row) or JSON lines; floats use shortest round-trip formatting, so writing
//! and reading back reproduces records exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serialization format for result files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl OutputFormat {
    /// Parse a CLI flag value.
    pub fn from_flag(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(OutputFormat::Csv),
            "jsonl" => Some(OutputFormat::Jsonl),
            _ => None,
        }
    }
}

/// One averaged sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub k: usize,
    /// Feedback bits, or None for the full-feedback benchmark row.
    pub l: Option<u32>,
    pub p_total_dbm: f64,
    /// Mean achieved variance over the finite trials.
    pub mean_variance: f64,
    /// Standard error of that mean (0 when fewer than two finite trials).
    pub std_error: f64,
    /// Trials where no sensor was viable, excluded from the mean.
    pub num_infinite_trials: usize,
    /// Lloyd rounds for this point's codebook; 0 on full-feedback rows.
    pub codebook_iterations: usize,
    /// Wall-clock seconds spent producing this record. Diagnostic only:
    /// never serialized, so output files stay byte-identical across
    /// machines and thread counts.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

const CSV_HEADER: &str =
    "K,L,P_total_dBm,mean_variance,std_error,num_infinite_trials,codebook_iterations";

fn l_label(l: Option<u32>) -> String {
    match l {
        None => "full".to_string(),
        Some(l) => l.to_string(),
    }
}

fn render(records: &[ResultRecord], format: OutputFormat) -> String {
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in records {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.k,
                    l_label(r.l),
                    r.p_total_dbm,
                    r.mean_variance,
                    r.std_error,
                    r.num_infinite_trials,
                    r.codebook_iterations
                ));
            }
        }
        OutputFormat::Jsonl => {
            for r in records {
                out.push_str(&serde_json::to_string(r).expect("record serializes"));
                out.push('\n');
            }
        }
    }
    out
}

/// Write records to `path`. Refuses an empty list without touching the
/// filesystem.
pub fn write_results(records: &[ResultRecord], path: &Path, format: OutputFormat) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidConfig(
            "refusing to write an empty result set".into(),
        ));
    }
    std::fs::write(path, render(records, format))?;
    Ok(())
}

/// Read records written by [`write_results`] in the same format.
pub fn read_results(path: &Path, format: OutputFormat) -> Result<Vec<ResultRecord>> {
    let text = std::fs::read_to_string(path)?;
    let parse_err = |lineno: usize, reason: String| Error::Parse {
        path: path.display().to_string(),
        reason: format!("line {lineno}: {reason}"),
    };
    let mut records = Vec::new();
    match format {
        OutputFormat::Csv => {
            let mut lines = text.lines().enumerate();
            match lines.next() {
                Some((_, h)) if h == CSV_HEADER => {}
                other => {
                    return Err(parse_err(
                        1,
                        format!("expected header {CSV_HEADER:?}, found {:?}", other.map(|x| x.1)),
                    ))
                }
            }
            for (i, line) in lines {
                let lineno = i + 1;
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != 7 {
                    return Err(parse_err(lineno, format!("expected 7 fields, found {}", fields.len())));
                }
                let num = |s: &str| -> Result<f64> {
                    s.parse()
                        .map_err(|_| parse_err(lineno, format!("invalid float {s:?}")))
                };
                let int = |s: &str| -> Result<usize> {
                    s.parse()
                        .map_err(|_| parse_err(lineno, format!("invalid integer {s:?}")))
                };
                let l = match fields[1] {
                    "full" => None,
                    s => Some(s.parse().map_err(|_| {
                        parse_err(lineno, format!("invalid feedback bits {s:?}"))
                    })?),
                };
                records.push(ResultRecord {
                    k: int(fields[0])?,
                    l,
                    p_total_dbm: num(fields[2])?,
                    mean_variance: num(fields[3])?,
                    std_error: num(fields[4])?,
                    num_infinite_trials: int(fields[5])?,
                    codebook_iterations: int(fields[6])?,
                    wall_time_secs: 0.0,
                });
            }
        }
        OutputFormat::Jsonl => {
            for (i, line) in text.lines().enumerate() {
                records.push(
                    serde_json::from_str(line)
                        .map_err(|e| parse_err(i + 1, format!("bad record: {e}")))?,
                );
            }
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records() -> Vec<ResultRecord> {
        vec![
            ResultRecord {
                k: 5,
                l: None,
                p_total_dbm: 5.0,
                mean_variance: 0.125,
                std_error: 0.015625,
                num_infinite_trials: 0,
                codebook_iterations: 0,
                wall_time_secs: 0.0,
            },
            ResultRecord {
                k: 5,
                l: Some(2),
                p_total_dbm: 5.0,
                mean_variance: 0.25,
                std_error: 0.03125,
                num_infinite_trials: 1,
                codebook_iterations: 12,
                wall_time_secs: 0.0,
            },
            ResultRecord {
                k: 10,
                l: Some(4),
                p_total_dbm: 20.0,
                mean_variance: 0.0625,
                std_error: 0.0078125,
                num_infinite_trials: 0,
                codebook_iterations: 7,
                wall_time_secs: 0.0,
            },
        ]
    }

    #[test]
    fn csv_matches_golden_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_results(&sample_records(), &path, OutputFormat::Csv).unwrap();
        let expected = "\
K,L,P_total_dBm,mean_variance,std_error,num_infinite_trials,codebook_iterations
5,full,5,0.125,0.015625,0,0
5,2,5,0.25,0.03125,1,12
10,4,20,0.0625,0.0078125,0,7
";
        assert_eq!(std::fs::read_to_string(&path).unwrap(), expected);
    }

    #[test]
    fn csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        // Non-dyadic floats exercise the shortest round-trip formatting.
        let mut records = sample_records();
        records[0].mean_variance = 0.1 + 1e-17;
        records[0].p_total_dbm = 6.989700043360187;
        write_results(&records, &path, OutputFormat::Csv).unwrap();
        let back = read_results(&path, OutputFormat::Csv).unwrap();
        assert_eq!(back, records);
        assert_eq!(
            back[0].mean_variance.to_bits(),
            records[0].mean_variance.to_bits()
        );
    }

    #[test]
    fn jsonl_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let records = sample_records();
        write_results(&records, &path, OutputFormat::Jsonl).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().next().unwrap().contains("\"l\":null"));
        assert_eq!(read_results(&path, OutputFormat::Jsonl).unwrap(), records);
    }

    #[test]
    fn empty_records_error_without_creating_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        assert!(write_results(&[], &path, OutputFormat::Csv).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn csv_read_rejects_damage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");

        std::fs::write(&path, "wrong,header\n").unwrap();
        assert!(read_results(&path, OutputFormat::Csv).is_err());

        std::fs::write(&path, format!("{CSV_HEADER}\n5,2,10,0.5\n")).unwrap();
        assert!(read_results(&path, OutputFormat::Csv).is_err());

        std::fs::write(&path, format!("{CSV_HEADER}\n5,two,10,0.5,0.1,0,3\n")).unwrap();
        assert!(read_results(&path, OutputFormat::Csv).is_err());
    }
}
