//! Matrix Market coordinate I/O (real, 1-based) and plain vector files.

use std::io::{BufRead, Write};

use super::{LinalgError, SparseMatrix};

fn parse_err(line: usize, msg: impl Into<String>) -> LinalgError {
    LinalgError::Parse {
        line,
        message: msg.into(),
    }
}

/// Writes `%%MatrixMarket matrix coordinate real general` with values in
/// 17 significant digits.
pub fn write_matrix_market<W: Write>(m: &SparseMatrix, mut out: W) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Reads a real coordinate Matrix Market file; `general` and `symmetric`
/// storage are accepted.
pub fn read_matrix_market<R: BufRead>(input: R) -> Result<SparseMatrix, LinalgError> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix ...' header"));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(1, "only coordinate format is supported"));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(parse_err(1, "only real or integer fields are supported"));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match dims {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "expected 'rows cols nnz'"));
                }
                let p = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| parse_err(lineno, format!("bad size '{s}'")))
                };
                dims = Some((p(fields[0])?, p(fields[1])?, p(fields[2])?));
            }
            Some((nrows, ncols, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "expected 'row col value'"));
                }
                let idx = |s: &str, bound: usize| -> Result<usize, LinalgError> {
                    match s.parse::<usize>() {
                        Ok(v) if v >= 1 && v <= bound => Ok(v - 1),
                        _ => Err(parse_err(lineno, format!("index '{s}' out of range"))),
                    }
                };
                let i = idx(fields[0], nrows)?;
                let j = idx(fields[1], ncols)?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad value '{}'", fields[2])))?;
                entries.push((i, j, v));
                if symmetric && i != j {
                    entries.push((j, i, v));
                }
            }
        }
    }
    let (nrows, ncols, _) = dims.ok_or_else(|| parse_err(0, "missing size line"))?;
    SparseMatrix::from_triplets(nrows, ncols, &entries)
}

/// One value per line, 17 significant digits.
pub fn write_vector<W: Write>(v: &[f64], mut out: W) -> std::io::Result<()> {
    for x in v {
        writeln!(out, "{x:.16e}")?;
    }
    Ok(())
}

pub fn read_vector<R: BufRead>(input: R) -> Result<Vec<f64>, LinalgError> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        out.push(
            t.parse()
                .map_err(|_| parse_err(idx + 1, format!("bad value '{t}'")))?,
        );
    }
    Ok(out)
}
