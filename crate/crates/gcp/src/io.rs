//! Text file formats.
//!
//! Tensor files start with a header line
//!
//! ```text
//! gcptns v1 <storage> <d> <n1> ... <nd>
//! ```
//!
//! where `storage` is `dense`, `coo` or `scarce`. A dense payload lists all
//! values in linear-index order (first mode fastest), separated by any
//! whitespace. A `coo` or `scarce` payload has one `i1 ... id value` line per
//! entry with 1-based indices; `coo` means unlisted entries are zeros,
//! `scarce` means they are unobserved. Blank lines and lines starting with
//! `#` are ignored. Values are written with 17 significant digits so that a
//! write/read cycle is exact.
//!
//! Factor matrices are exported one CSV per mode (`factor_1.csv` …
//! `factor_d.csv`, `n_k` rows by `r` columns, no header) plus `lambda.csv`
//! with one weight per line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gcp_core::{CooTensor, Data, DenseTensor, KruskalTensor, Matrix, OptTrace, Shape};

use crate::error::{Error, Result};

pub const MAGIC: &str = "gcptns";
pub const VERSION: &str = "v1";

pub fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Data> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tensor(&text, path)
}

/// Parse tensor file contents; `path` only labels error messages.
pub fn parse_tensor(text: &str, path: &Path) -> Result<Data> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 4 || fields[0] != MAGIC || fields[1] != VERSION {
        return Err(Error::parse(
            path,
            hline,
            format!("expected `{MAGIC} {VERSION} <storage> <d> <dims…>`"),
        ));
    }
    let storage = fields[2];
    let d: usize = fields[3]
        .parse()
        .map_err(|_| Error::parse(path, hline, format!("bad order `{}`", fields[3])))?;
    if fields.len() != 4 + d {
        return Err(Error::parse(
            path,
            hline,
            format!("order {d} needs {d} sizes, found {}", fields.len() - 4),
        ));
    }
    let dims = fields[4..]
        .iter()
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(path, hline, format!("bad size `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let shape = Shape::new(dims).map_err(|e| Error::parse(path, hline, e.to_string()))?;

    match storage {
        "dense" => {
            shape.check_dense_budget()?;
            let mut values = Vec::with_capacity(shape.total());
            let mut last = hline;
            for (ln, line) in lines {
                last = ln;
                for tok in line.split_whitespace() {
                    values.push(parse_value(tok, path, ln)?);
                }
            }
            if values.len() != shape.total() {
                return Err(Error::parse(
                    path,
                    last,
                    format!("expected {} values, found {}", shape.total(), values.len()),
                ));
            }
            Ok(Data::Dense(DenseTensor::new(shape, values)?))
        }
        "coo" | "scarce" => {
            let mut entries = Vec::new();
            let mut seen = std::collections::HashMap::new();
            for (ln, line) in lines {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != d + 1 {
                    return Err(Error::parse(
                        path,
                        ln,
                        format!("expected {} fields, found {}", d + 1, toks.len()),
                    ));
                }
                let idx = toks[..d]
                    .iter()
                    .zip(shape.dims())
                    .map(|(t, &n)| {
                        let i: usize = t
                            .parse()
                            .map_err(|_| Error::parse(path, ln, format!("bad index `{t}`")))?;
                        if i == 0 || i > n {
                            return Err(Error::parse(
                                path,
                                ln,
                                format!("index {i} outside 1..={n}"),
                            ));
                        }
                        Ok(i - 1)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let v = parse_value(toks[d], path, ln)?;
                if let Some(first) = seen.insert(idx.clone(), ln) {
                    return Err(Error::parse(
                        path,
                        ln,
                        format!("duplicate index, first listed on line {first}"),
                    ));
                }
                entries.push((idx, v));
            }
            let coo = CooTensor::new(shape, entries)?;
            Ok(if storage == "coo" {
                Data::Sparse(coo)
            } else {
                Data::Scarce(coo)
            })
        }
        other => Err(Error::parse(
            path,
            hline,
            format!("unknown storage `{other}`"),
        )),
    }
}

fn parse_value(tok: &str, path: &Path, line: usize) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(Error::parse(
            path,
            line,
            format!("non-finite value `{tok}`"),
        )),
        Err(_) => Err(Error::parse(path, line, format!("bad value `{tok}`"))),
    }
}

pub fn format_tensor(data: &Data) -> String {
    let shape = data.shape();
    let mut out = format!(
        "{MAGIC} {VERSION} {} {}",
        data.storage_name(),
        shape.order()
    );
    for n in shape.dims() {
        let _ = write!(out, " {n}");
    }
    out.push('\n');
    match data {
        Data::Dense(t) => {
            for &v in t.values() {
                out.push_str(&fmt_value(v));
                out.push('\n');
            }
        }
        Data::Sparse(t) | Data::Scarce(t) => {
            for (idx, v) in t.iter() {
                for i in idx {
                    let _ = write!(out, "{} ", i + 1);
                }
                out.push_str(&fmt_value(v));
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_tensor(data: &Data, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), format_tensor(data).as_bytes())
}

/// Write through a sibling temporary file and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| fmt_value(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// File name and contents of every factor CSV plus `lambda.csv`.
pub fn factor_files(m: &KruskalTensor) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = m
        .factors()
        .iter()
        .enumerate()
        .map(|(k, f)| (format!("factor_{}.csv", k + 1), matrix_csv(f)))
        .collect();
    let lambda: String = m
        .effective_weights()
        .iter()
        .map(|&w| fmt_value(w) + "\n")
        .collect();
    files.push(("lambda.csv".into(), lambda));
    files
}

pub fn write_factors(m: &KruskalTensor, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, body) in factor_files(m) {
        write_atomic(&dir.join(name), body.as_bytes())?;
    }
    Ok(())
}

fn read_csv_matrix(path: &Path) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
        let row = rec
            .iter()
            .map(|t| parse_value(t, path, i + 1))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 1, "empty matrix"));
    }
    Ok(Matrix::from_rows(&rows)?)
}

/// Read `factor_1.csv`, `factor_2.csv`, … and `lambda.csv` if present.
pub fn read_factors(dir: impl AsRef<Path>) -> Result<KruskalTensor> {
    let dir = dir.as_ref();
    let mut factors = Vec::new();
    loop {
        let p = dir.join(format!("factor_{}.csv", factors.len() + 1));
        if !p.exists() {
            break;
        }
        factors.push(read_csv_matrix(&p)?);
    }
    if factors.is_empty() {
        return Err(Error::io(
            dir.join("factor_1.csv"),
            std::io::ErrorKind::NotFound.into(),
        ));
    }
    let lp = dir.join("lambda.csv");
    if lp.exists() {
        let l = read_csv_matrix(&lp)?;
        Ok(KruskalTensor::with_weights(factors, l.as_slice().to_vec())?)
    } else {
        Ok(KruskalTensor::new(factors)?)
    }
}

pub fn trace_csv(trace: &OptTrace) -> String {
    let mut out = String::from("iteration,f,proj_grad_norm,step\n");
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.iteration,
            fmt_value(r.f),
            fmt_value(r.proj_grad_norm),
            fmt_value(r.step)
        );
    }
    out
}

/// Import a CSV of `i1,…,id,value` rows (1-based indices) as a coordinate
/// tensor. Sizes are taken from `dims` or, if absent, from the largest index
/// in each column.
pub fn import_csv(
    path: impl AsRef<Path>,
    dims: Option<&[usize]>,
    has_header: bool,
) -> Result<CooTensor> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
    let first_line = usize::from(has_header) + 1;
    let mut entries: Vec<(Vec<usize>, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let ln = first_line + i;
        let rec = rec.map_err(|source| Error::Csv {
            path: path.into(),
            source,
        })?;
        if rec.len() < 2 {
            return Err(Error::parse(
                path,
                ln,
                "need at least one index column and a value",
            ));
        }
        let d = rec.len() - 1;
        if let Some((prev, _)) = entries.first() {
            if prev.len() != d {
                return Err(Error::parse(
                    path,
                    ln,
                    format!("expected {} index columns, found {d}", prev.len()),
                ));
            }
        }
        let idx = rec
            .iter()
            .take(d)
            .map(|t| match t.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(Error::parse(path, ln, format!("bad 1-based index `{t}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let v = parse_value(&rec[d], path, ln)?;
        entries.push((idx, v));
    }
    let d = entries
        .first()
        .map(|e| e.0.len())
        .ok_or_else(|| Error::parse(path, first_line, "no entries"))?;
    let dims = match dims {
        Some(given) => given.to_vec(),
        None => (0..d)
            .map(|k| entries.iter().map(|e| e.0[k] + 1).max().unwrap_or(1))
            .collect(),
    };
    Ok(CooTensor::new(Shape::new(dims)?, entries)?)
}
