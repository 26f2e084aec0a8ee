use std::path::{Path, PathBuf};

use super::{render_svg, ResultRow, ResultTable, SummaryRow};
use crate::error::{Error, Result};

pub fn write_results_csv<W: std::io::Write>(table: &ResultTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in &table.rows {
        w.serialize(r)?;
    }
    if table.rows.is_empty() {
        w.write_record(["algo", "n", "rep", "seed", "regret", "wall_ms"])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

pub fn read_results_csv<R: std::io::Read>(reader: R) -> Result<ResultTable> {
    let mut r = csv::Reader::from_reader(reader);
    let rows = r.deserialize::<ResultRow>().collect::<std::result::Result<_, _>>()?;
    Ok(ResultTable { rows })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub results_csv: PathBuf,
    pub summary_json: PathBuf,
    pub regret_svg: PathBuf,
}

/// Writes `results.csv`, `summary.json` and `regret.svg` into `dir`.
pub fn emit_outputs(summary: &[SummaryRow], table: &ResultTable, dir: impl AsRef<Path>) -> Result<OutputPaths> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = OutputPaths {
        results_csv: dir.join("results.csv"),
        summary_json: dir.join("summary.json"),
        regret_svg: dir.join("regret.svg"),
    };
    let mut csv_bytes = Vec::new();
    write_results_csv(table, &mut csv_bytes)?;
    write(&paths.results_csv, &csv_bytes)?;
    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    write(&paths.summary_json, json.as_bytes())?;
    write(&paths.regret_svg, render_svg(summary).as_bytes())?;
    Ok(paths)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::super::{summarize, Algorithm};
    use super::*;

    fn table() -> ResultTable {
        ResultTable {
            rows: vec![
                ResultRow {
                    algo: Algorithm::RlLow,
                    n: 100,
                    rep: 0,
                    seed: 42,
                    regret: 0.1,
                    wall_ms: 0.0,
                },
                ResultRow {
                    algo: Algorithm::DpRlLow,
                    n: 100,
                    rep: 1,
                    seed: u64::MAX,
                    regret: 1.0 / 3.0,
                    wall_ms: 1.25,
                },
            ],
        }
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let mut buf = Vec::new();
        write_results_csv(&table(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "algo,n,rep,seed,regret,wall_ms");
        assert_eq!(lines[1], "rl_low,100,0,42,0.1,0.0");
        assert_eq!(read_results_csv(&buf[..]).unwrap(), table());
    }

    #[test]
    fn emits_three_files() {
        let dir = tempfile::tempdir().unwrap();
        let t = table();
        let paths = emit_outputs(&summarize(&t), &t, dir.path()).unwrap();
        for p in [&paths.results_csv, &paths.summary_json, &paths.regret_svg] {
            assert!(p.exists());
        }
        let back = read_results_csv(std::fs::File::open(&paths.results_csv).unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
