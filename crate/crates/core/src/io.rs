//! CSV and JSON persistence for matrices, draws, summaries and reports.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{ess, split_rhat, ChainOutput};
use crate::stats::quantile_sorted;
use crate::theory::WassersteinReport;

const NA: &str = "NA";

/// How a CSV matrix is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Numeric,
    /// Square, symmetric, entries 0, 1 or NA (missing, read as NaN). The diagonal is ignored.
    Adjacency,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

/// Parses a headerless CSV matrix.
pub fn read_matrix_csv<R: Read>(reader: R, kind: MatrixKind) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if let Some(first) = rows.first() {
            if rec.len() != first.len() {
                return Err(Error::Ragged {
                    row: r + 1,
                    found: rec.len(),
                    expected: first.len(),
                });
            }
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, field)| parse_field(field, kind, r, c))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv("empty matrix".into()));
    }
    let (n, p) = (rows.len(), rows[0].len());
    let m = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    if kind == MatrixKind::Adjacency {
        check_adjacency(&m)?;
    }
    Ok(m)
}

fn parse_field(field: &str, kind: MatrixKind, row: usize, col: usize) -> Result<f64> {
    if field.eq_ignore_ascii_case(NA) {
        return Ok(f64::NAN);
    }
    match kind {
        MatrixKind::Numeric => field
            .parse::<f64>()
            .map_err(|_| Error::Csv(format!("row {}, column {}: not a number: {field:?}", row + 1, col + 1))),
        MatrixKind::Adjacency => match field.parse::<f64>() {
            Ok(v) if v == 0.0 || v == 1.0 => Ok(v),
            _ if row == col => Ok(f64::NAN),
            _ => Err(Error::NonBinary {
                row: row + 1,
                col: col + 1,
                value: field.to_string(),
            }),
        },
    }
}

fn check_adjacency(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "adjacency must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if !a.is_nan() && !b.is_nan() && a != b {
                return Err(Error::Asymmetric { row: i + 1, col: j + 1 });
            }
        }
    }
    Ok(())
}

/// Reads a headerless CSV matrix from disk.
pub fn load_matrix_csv(path: &Path, kind: MatrixKind) -> Result<DMatrix<f64>> {
    read_matrix_csv(BufReader::new(File::open(path).map_err(|e| io_context(path, e))?), kind)
}

fn io_context(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        NA.to_string()
    } else {
        // Shortest representation that parses back to the same bits.
        format!("{v:?}")
    }
}

/// Writes a headerless CSV matrix; NaN becomes `NA`.
pub fn write_matrix_csv<W: Write>(writer: W, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|&v| fmt(v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_matrix_csv(create(path)?, m)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| io_context(path, e))?))
}

fn write_table<W: Write>(writer: W, names: &[String], rows: impl Iterator<Item = (usize, usize, Vec<f64>)>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (c, d, values) in rows {
        let mut rec = vec![(c + 1).to_string(), (d + 1).to_string()];
        rec.extend(values.into_iter().map(fmt));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per post-warmup draw: `chain, draw, <parameters on the constrained scale>`.
pub fn write_draws_csv<W: Write>(writer: W, out: &ChainOutput) -> Result<()> {
    let rows = out
        .chains
        .iter()
        .enumerate()
        .flat_map(|(c, ch)| ch.draws.iter().enumerate().map(move |(d, v)| (c, d, v.clone())));
    write_table(writer, &out.names, rows)
}

/// Same layout as [`write_draws_csv`] for the derived quantities.
pub fn write_derived_csv<W: Write>(writer: W, out: &ChainOutput) -> Result<()> {
    let rows = out
        .chains
        .iter()
        .enumerate()
        .flat_map(|(c, ch)| ch.derived.iter().enumerate().map(move |(d, v)| (c, d, v.clone())));
    write_table(writer, &out.derived_names, rows)
}

/// Reads a draws table back as `(names, rows)`, dropping the chain and draw columns.
pub fn read_draws_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let names: Vec<String> = rdr.headers().map_err(csv_err)?.iter().skip(2).map(String::from).collect();
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .skip(2)
            .enumerate()
            .map(|(c, f)| parse_field(f, MatrixKind::Numeric, r, c + 2))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != names.len() {
            return Err(Error::Ragged {
                row: r + 2,
                found: row.len() + 2,
                expected: names.len() + 2,
            });
        }
        rows.push(row);
    }
    Ok((names, rows))
}

/// Reads a draws table grouped by its chain column: `(names, chains)`, each chain a list of rows.
pub fn read_draws_by_chain<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<Vec<f64>>>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() < 3 || &header[0] != "chain" || &header[1] != "draw" {
        return Err(Error::Csv("draws table must start with chain,draw columns".into()));
    }
    let names: Vec<String> = header.iter().skip(2).map(String::from).collect();
    let mut chains: Vec<Vec<Vec<f64>>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != header.len() {
            return Err(Error::Ragged {
                row: r + 2,
                found: rec.len(),
                expected: header.len(),
            });
        }
        let chain: usize = rec[0]
            .trim()
            .parse()
            .ok()
            .filter(|&c| c >= 1)
            .ok_or_else(|| Error::Csv(format!("row {}: bad chain id {:?}", r + 2, &rec[0])))?;
        let row = rec
            .iter()
            .skip(2)
            .enumerate()
            .map(|(c, f)| parse_field(f, MatrixKind::Numeric, r, c + 2))
            .collect::<Result<Vec<f64>>>()?;
        if chains.len() < chain {
            chains.resize(chain, Vec::new());
        }
        chains[chain - 1].push(row);
    }
    chains.retain(|c| !c.is_empty());
    if chains.is_empty() {
        return Err(Error::EmptyChain);
    }
    Ok((names, chains))
}

/// Posterior summary of one scalar quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    /// `None` when there are too few chains or draws.
    pub split_rhat: Option<f64>,
    pub ess: Option<f64>,
}

fn summarize_columns(names: &[String], chains: &[Vec<&[f64]>]) -> Vec<ParameterSummary> {
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let per_chain: Vec<&[f64]> = chains.iter().map(|c| c[j]).collect();
            let mut all: Vec<f64> = per_chain.iter().flat_map(|c| c.iter().copied()).collect();
            let n = all.len() as f64;
            let mean = all.iter().sum::<f64>() / n;
            let sd = if all.len() > 1 {
                (all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            all.sort_by(f64::total_cmp);
            ParameterSummary {
                name: name.clone(),
                mean,
                sd,
                q05: quantile_sorted(&all, 0.05),
                q50: quantile_sorted(&all, 0.5),
                q95: quantile_sorted(&all, 0.95),
                split_rhat: split_rhat(&per_chain).ok().filter(|v| v.is_finite()),
                ess: ess(&per_chain).ok().filter(|v| v.is_finite()),
            }
        })
        .collect()
}

fn transpose(rows: &[Vec<f64>], width: usize) -> Vec<Vec<f64>> {
    (0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

/// Summaries of every parameter and, when `with_derived`, every derived quantity.
pub fn summarize(out: &ChainOutput, with_derived: bool) -> Result<Vec<ParameterSummary>> {
    if out.total_draws() == 0 {
        return Err(Error::EmptyChain);
    }
    let cols: Vec<Vec<Vec<f64>>> = out.chains.iter().map(|c| transpose(&c.draws, out.names.len())).collect();
    let views: Vec<Vec<&[f64]>> = cols.iter().map(|c| c.iter().map(Vec::as_slice).collect()).collect();
    let mut s = summarize_columns(&out.names, &views);
    if with_derived {
        let cols: Vec<Vec<Vec<f64>>> = out
            .chains
            .iter()
            .map(|c| transpose(&c.derived, out.derived_names.len()))
            .collect();
        let views: Vec<Vec<&[f64]>> = cols.iter().map(|c| c.iter().map(Vec::as_slice).collect()).collect();
        s.extend(summarize_columns(&out.derived_names, &views));
    }
    Ok(s)
}

/// Summaries of a table read by [`read_draws_by_chain`]. Chains are truncated to the shortest.
pub fn summarize_table(names: &[String], chains: &[Vec<Vec<f64>>]) -> Result<Vec<ParameterSummary>> {
    let len = chains.iter().map(Vec::len).min().unwrap_or(0);
    if len == 0 {
        return Err(Error::EmptyChain);
    }
    let cols: Vec<Vec<Vec<f64>>> = chains.iter().map(|c| transpose(&c[..len], names.len())).collect();
    let views: Vec<Vec<&[f64]>> = cols.iter().map(|c| c.iter().map(Vec::as_slice).collect()).collect();
    Ok(summarize_columns(names, &views))
}

/// One JSON object per line with the per-chain sampler statistics.
pub fn write_chain_diagnostics_jsonl<W: Write>(mut writer: W, out: &ChainOutput) -> Result<()> {
    for (i, c) in out.chains.iter().enumerate() {
        let line = serde_json::json!({
            "chain": i + 1,
            "accept_rate": c.accept_rate,
            "stepsize": c.stepsize,
            "divergences": c.divergences,
            "warmup_divergences": c.warmup_divergences,
            "leapfrog_steps": c.leapfrog_steps,
            "inv_mass": c.inv_mass,
        });
        writeln!(writer, "{line}")?;
    }
    writer.flush()?;
    Ok(())
}

/// Pretty JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut writer: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(writer)?;
    writer.flush()?;
    Ok(())
}

pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_json(create(path)?, value)
}

/// `p, estimate, mc_se, coupled_bound, monotone_decay`, one row per grid point.
pub fn write_wasserstein_csv<W: Write>(writer: W, report: &WassersteinReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["p", "estimate", "mc_se", "coupled_bound", "monotone_decay"]).map_err(csv_err)?;
    let flag = report.monotone_decay().to_string();
    for (i, p) in report.p_grid.iter().enumerate() {
        w.write_record([
            p.to_string(),
            fmt(report.estimates[i]),
            fmt(report.mc_se[i]),
            fmt(report.coupled_bound[i]),
            flag.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Dyads of an adjacency matrix whose both entries are missing, as zero-based `(i, j)` with `i < j`.
pub fn missing_dyads(m: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let p = m.nrows();
    (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .filter(|&(i, j)| m[(i, j)].is_nan() && m[(j, i)].is_nan())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str, kind: MatrixKind) -> Result<DMatrix<f64>> {
        read_matrix_csv(s.as_bytes(), kind)
    }

    #[test]
    fn adjacency_examples() {
        let m = parse("0,1\n1,0", MatrixKind::Adjacency).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(parse("0,1\n0,0", MatrixKind::Adjacency), Err(Error::Asymmetric { row: 1, col: 2 }));
        assert!(matches!(parse("0,2\n2,0", MatrixKind::Adjacency), Err(Error::NonBinary { .. })));
        assert!(matches!(parse("0,1,0\n1,0", MatrixKind::Adjacency), Err(Error::Ragged { row: 2, found: 2, expected: 3 })));
        assert!(matches!(parse("0,1,0\n1,0,1", MatrixKind::Adjacency), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn na_positions_become_missing_dyads() {
        let text = "0,NA,1,0\nNA,0,0,NA\n1,0,0,1\n0,NA,1,0";
        let m = parse(text, MatrixKind::Adjacency).unwrap();
        assert_eq!(missing_dyads(&m), vec![(0, 1), (1, 3)]);
        let nan_cells: Vec<(usize, usize)> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)].is_nan())
            .collect();
        assert_eq!(nan_cells, vec![(0, 1), (1, 0), (1, 3), (3, 1)]);
    }

    #[test]
    fn numeric_parsing() {
        let m = parse(" 1.5, -2e3\n0, NA ", MatrixKind::Numeric).unwrap();
        assert_eq!(m[(0, 1)], -2000.0);
        assert!(m[(1, 1)].is_nan());
        assert!(matches!(parse("1,x", MatrixKind::Numeric), Err(Error::Csv(_))));
        assert!(matches!(parse("", MatrixKind::Numeric), Err(Error::Csv(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = DMatrix::from_row_slice(2, 3, &[0.1, 1.0 / 3.0, f64::NAN, -1e-300, 7.0, f64::MAX]);
        save_matrix_csv(&path, &m).unwrap();
        let back = load_matrix_csv(&path, MatrixKind::Numeric).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
        assert!(matches!(load_matrix_csv(&dir.path().join("nope.csv"), MatrixKind::Numeric), Err(Error::Io(_))));
    }

    fn output(chains: usize, draws: usize) -> ChainOutput {
        use crate::inference::Chain;
        let chains = (0..chains)
            .map(|c| Chain {
                draws: (0..draws).map(|d| vec![(c * draws + d) as f64, 1.0]).collect(),
                derived: (0..draws).map(|d| vec![-(d as f64)]).collect(),
                log_density: vec![0.0; draws],
                accept_rate: 0.8,
                stepsize: 0.25,
                stepsize_trace: vec![],
                divergences: c,
                warmup_divergences: 0,
                leapfrog_steps: 10,
                inv_mass: vec![1.0, 1.0],
            })
            .collect();
        ChainOutput {
            names: vec!["a".into(), "b".into()],
            derived_names: vec!["Q[1,1]".into()],
            chains,
            diagnostics: None,
        }
    }

    #[test]
    fn draws_table_round_trip() {
        let out = output(2, 3);
        let mut buf = Vec::new();
        write_draws_csv(&mut buf, &out).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("chain,draw,a,b\n1,1,0.0,1.0\n"));
        let (names, rows) = read_draws_csv(buf.as_slice()).unwrap();
        assert_eq!(names, out.names);
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[4], vec![4.0, 1.0]);
        let mut buf = Vec::new();
        write_derived_csv(&mut buf, &out).unwrap();
        let (names, rows) = read_draws_csv(buf.as_slice()).unwrap();
        assert_eq!(names, vec!["Q[1,1]".to_string()]);
        assert_eq!(rows[5], vec![-2.0]);
    }

    #[test]
    fn summaries() {
        let out = output(2, 100);
        let s = summarize(&out, true).unwrap();
        assert_eq!(s.len(), 3);
        assert!((s[0].mean - 99.5).abs() < 1e-12);
        assert_eq!(s[0].q50, 99.5);
        assert!(s[0].split_rhat.unwrap() > 1.5);
        assert_eq!(s[1].sd, 0.0);
        assert_eq!(s[1].split_rhat, None);
        assert_eq!(s[2].name, "Q[1,1]");
        let few = summarize(&output(1, 3), false).unwrap();
        assert_eq!(few.len(), 2);
        assert_eq!(few[0].ess, None);
        assert!(matches!(summarize(&output(1, 0), false), Err(Error::EmptyChain)));
        let mut buf = Vec::new();
        write_json(&mut buf, &s).unwrap();
        let back: Vec<ParameterSummary> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn grouped_table_matches_direct_summary() {
        let out = output(2, 100);
        let mut buf = Vec::new();
        write_draws_csv(&mut buf, &out).unwrap();
        let (names, chains) = read_draws_by_chain(buf.as_slice()).unwrap();
        assert_eq!(chains.len(), 2);
        assert_eq!(chains[1], out.chains[1].draws);
        assert_eq!(summarize_table(&names, &chains).unwrap(), summarize(&out, false).unwrap());
        assert!(read_draws_by_chain("a,b\n1,2\n".as_bytes()).is_err());
        assert!(matches!(read_draws_by_chain("chain,draw,x\n".as_bytes()), Err(Error::EmptyChain)));
    }

    #[test]
    fn chain_lines() {
        let mut buf = Vec::new();
        write_chain_diagnostics_jsonl(&mut buf, &output(3, 2)).unwrap();
        let lines: Vec<serde_json::Value> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2]["divergences"], 2);
        assert_eq!(lines[0]["chain"], 1);
    }

    #[test]
    fn wasserstein_table() {
        let report = WassersteinReport {
            p_grid: vec![10, 20],
            k: 1,
            entries: vec![(0, 0)],
            replicates: 2,
            estimates: vec![0.5, 0.25],
            mc_se: vec![0.01, 0.01],
            per_entry: vec![vec![0.5], vec![0.25]],
            coupled_bound: vec![1.0, 0.5],
        };
        let mut buf = Vec::new();
        write_wasserstein_csv(&mut buf, &report).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "p,estimate,mc_se,coupled_bound,monotone_decay\n10,0.5,0.01,1.0,true\n20,0.25,0.01,0.5,true\n"
        );
    }

    proptest! {
        #[test]
        fn matrices_round_trip_bitwise(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = DMatrix::from_fn(rows, cols, |_, _| f64::from_bits(rng.random::<u64>() >> 2) * if rng.random() { 1.0 } else { -1.0 });
            let mut buf = Vec::new();
            write_matrix_csv(&mut buf, &m).unwrap();
            let back = read_matrix_csv(buf.as_slice(), MatrixKind::Numeric).unwrap();
            for (a, b) in m.iter().zip(back.iter()) {
                prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            }
        }

        #[test]
        fn symmetric_binary_matrices_load(p in 1usize..8, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut m = DMatrix::zeros(p, p);
            for i in 0..p {
                for j in i + 1..p {
                    let v = match rng.random_range(0..3) { 0 => 0.0, 1 => 1.0, _ => f64::NAN };
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let mut buf = Vec::new();
            write_matrix_csv(&mut buf, &m).unwrap();
            let back = read_matrix_csv(buf.as_slice(), MatrixKind::Adjacency).unwrap();
            for (a, b) in m.iter().zip(back.iter()) {
                prop_assert!(a == b || (a.is_nan() && b.is_nan()));
            }
        }
    }
}
