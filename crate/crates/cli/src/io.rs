//! Plain-text file formats.
//!
//! Matrices are headerless CSV, one row per line. Metadata travels in leading
//! `# key=value` comment lines: a dataset carries `row_bound`, a released Gram
//! matrix carries its mechanism, seed and calibration.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use gramdp::linalg::SymMatrix;
use gramdp::mechanisms::{Calibration, GramEstimate, MechanismId};
use gramdp::{Coefficients, Dataset};

fn fmt_row(row: &[f64]) -> String {
    row.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

/// `# key=value` lines, in file order.
fn read_header(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let Some(rest) = line.trim_start().strip_prefix('#') else { continue };
        let (k, v) = rest
            .trim()
            .split_once('=')
            .ok_or_else(|| anyhow!("malformed header line '{line}'"))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn read_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().with_context(|| format!("row {}: bad number '{f}'", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                bail!("row {} has {} entries, expected {first}", i + 1, row.len());
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn slurp(path: &Path) -> Result<String> {
    let mut text = String::new();
    File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_string(&mut text)?;
    Ok(text)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn write_matrix_rows(out: &mut impl Write, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    for row in rows {
        writeln!(out, "{}", fmt_row(&row))?;
    }
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    read_rows(&slurp(path)?)
}

pub fn write_dataset(path: &Path, a: &Dataset) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "# row_bound={:?}", a.row_bound())?;
    write_matrix_rows(&mut out, a.iter_rows().map(<[f64]>::to_vec))?;
    out.flush()?;
    Ok(())
}

/// Reads a dataset; rows longer than the declared bound are an error, not clipped.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = slurp(path)?;
    let b = read_header(&text)?
        .into_iter()
        .find(|(k, _)| k == "row_bound")
        .ok_or_else(|| anyhow!("{}: missing '# row_bound=' header", path.display()))?
        .1
        .parse::<f64>()?;
    let rows = read_rows(&text)?;
    let cols = rows.first().map(Vec::len).ok_or_else(|| anyhow!("{}: no rows", path.display()))?;
    Ok(Dataset::new(rows.concat(), cols, b)?)
}

pub fn write_estimate(path: &Path, est: &GramEstimate) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "# mechanism={}", est.mechanism)?;
    writeln!(out, "# seed={}", est.seed)?;
    writeln!(out, "# is_pd={}", est.is_pd)?;
    for (k, v) in est.calibration.entries() {
        writeln!(out, "# {k}={v}")?;
    }
    write_matrix_rows(&mut out, est.matrix.to_rows())?;
    out.flush()?;
    Ok(())
}

/// Reads a released matrix. Files without metadata are accepted as the
/// non-private baseline so plain CSV Gram matrices can be solved too.
pub fn read_estimate(path: &Path) -> Result<GramEstimate> {
    let text = slurp(path)?;
    let mut mechanism = MechanismId::Exact;
    let mut seed = 0;
    let mut calibration = Calibration::default();
    for (k, v) in read_header(&text)? {
        match k.as_str() {
            "mechanism" => mechanism = v.parse()?,
            "seed" => seed = v.parse()?,
            "is_pd" => {}
            _ => calibration.set(&k, &v)?,
        }
    }
    let matrix = SymMatrix::from_rows(&read_rows(&text)?)?;
    Ok(GramEstimate::new(matrix, mechanism, calibration, seed))
}

pub fn write_coefficients(path: &Path, beta: &Coefficients) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{}", fmt_row(beta.values()))?;
    out.flush()?;
    Ok(())
}

pub fn read_coefficients(path: &Path) -> Result<Coefficients> {
    let rows = read_rows(&slurp(path)?)?;
    match rows.as_slice() {
        [row] => Ok(Coefficients::new(row.clone())?),
        _ => bail!("{}: expected a single row of coefficients", path.display()),
    }
}

