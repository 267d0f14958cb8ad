//! Result files: CSV, a lossless tab-separated text format and matrix
//! dumps.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use nullfem::linalg::mm::{write_matrix_market, write_vector};
use nullfem::nullspace::{BasisReport, DroppedRow};

use crate::error::CliError;
use crate::problem::AnalysisKind;
use crate::run::{Artifacts, Diagnostics, Method, ResultSet, StepResult};

pub const TEXT_MAGIC: &str = "nullfem-results";
pub const TEXT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Text,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `results.csv` → `results.reactions.csv`.
pub fn reactions_path(out: &Path) -> PathBuf {
    out.with_extension("reactions.csv")
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Write {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

fn has_rates(results: &ResultSet) -> bool {
    results.steps.iter().any(|s| s.velocity.is_some())
}

/// One row per `(step, node)`.
pub fn write_field_csv<W: Write>(results: &ResultSet, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let rates = has_rates(results);
    if rates {
        w.write_record(["time", "node", "value", "velocity", "acceleration"])?;
    } else {
        w.write_record(["time", "node", "value"])?;
    }
    for s in &results.steps {
        let t = num(s.time);
        for (node, v) in s.values.iter().enumerate() {
            let mut rec = vec![t.clone(), node.to_string(), num(*v)];
            if rates {
                for rate in [&s.velocity, &s.acceleration] {
                    rec.push(rate.as_ref().map_or_else(String::new, |r| num(r[node])));
                }
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per `(step, constraint)`.
pub fn write_reactions_csv<W: Write>(results: &ResultSet, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "constraint_label", "reaction"])?;
    for (k, s) in results.steps.iter().enumerate() {
        for (label, r) in results.labels.iter().zip(&s.reactions) {
            w.write_record([k.to_string(), label.clone(), num(*r)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| num(*v))
        .collect::<Vec<_>>()
        .join("\t")
}

fn line(out: &mut impl Write, key: &str, rest: &str) -> std::io::Result<()> {
    if rest.is_empty() {
        writeln!(out, "{key}")
    } else {
        writeln!(out, "{key}\t{rest}")
    }
}

fn opt_usize(v: Option<usize>) -> String {
    v.map_or_else(|| "-".into(), |x| x.to_string())
}

/// The structured text format. Every field of a `ResultSet` except the
/// timings is written, floats with 17 significant digits.
pub fn write_text<W: Write>(results: &ResultSet, mut out: W) -> std::io::Result<()> {
    let o = &mut out;
    line(o, TEXT_MAGIC, &TEXT_VERSION.to_string())?;
    line(o, "method", results.method.as_str())?;
    line(o, "analysis", results.analysis.as_str())?;
    line(o, "n_dofs", &results.n_dofs.to_string())?;
    let mut labels = vec![results.labels.len().to_string()];
    labels.extend(results.labels.iter().cloned());
    line(o, "labels", &labels.join("\t"))?;

    let d = &results.diagnostics;
    line(o, "rank", &opt_usize(d.rank))?;
    line(o, "n_reduced", &opt_usize(d.n_reduced))?;
    line(o, "dropped", &d.dropped_rows.len().to_string())?;
    for r in &d.dropped_rows {
        line(
            o,
            "dropped_row",
            &format!("{}\t{}\t{}", r.row, r.label, r.reason),
        )?;
    }
    match &d.basis {
        None => line(o, "basis", "-")?,
        Some(b) => line(
            o,
            "basis",
            &format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                b.n_dofs,
                b.rank,
                b.n_columns,
                num(b.max_bc),
                num(b.max_particular_residual),
                num(b.max_particular_residual_all),
                b.full_column_rank,
                num(b.bc_tolerance),
                num(b.particular_tolerance)
            ),
        )?,
    }
    line(
        o,
        "penalty_alpha",
        &d.penalty_alpha.map_or_else(|| "-".into(), num),
    )?;
    line(
        o,
        "max_constraint_residual",
        &num(d.max_constraint_residual),
    )?;
    line(
        o,
        "constraints_satisfied",
        &d.constraints_satisfied.to_string(),
    )?;

    line(o, "steps", &results.steps.len().to_string())?;
    for (k, s) in results.steps.iter().enumerate() {
        line(o, "step", &format!("{k}\t{}", num(s.time)))?;
        line(o, "values", &join(&s.values))?;
        for (key, rate) in [("velocity", &s.velocity), ("acceleration", &s.acceleration)] {
            match rate {
                Some(r) => line(o, key, &join(r))?,
                None => line(o, key, "-")?,
            }
        }
        line(o, "reactions", &join(&s.reactions))?;
    }
    out.flush()
}

struct Reader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> Reader<R> {
    fn err(&self, msg: impl std::fmt::Display) -> CliError {
        CliError::Parse(format!("results line {}: {msg}", self.line_no))
    }

    /// Next line split on tabs, with its key checked.
    fn expect(&mut self, key: &str) -> Result<Vec<String>, CliError> {
        self.line_no += 1;
        let text = match self.lines.next() {
            Some(Ok(t)) => t,
            Some(Err(e)) => return Err(self.err(e)),
            None => return Err(self.err(format!("expected '{key}', found end of file"))),
        };
        let mut parts = text.split('\t').map(str::to_string);
        let found = parts.next().unwrap_or_default();
        if found != key {
            return Err(self.err(format!("expected '{key}', found '{found}'")));
        }
        Ok(parts.collect())
    }

    fn single(&mut self, key: &str) -> Result<String, CliError> {
        let mut v = self.expect(key)?;
        if v.len() != 1 {
            return Err(self.err(format!("'{key}' takes one value")));
        }
        Ok(v.remove(0))
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T, CliError> {
        s.parse()
            .map_err(|_| self.err(format!("invalid value '{s}'")))
    }

    fn opt<T: std::str::FromStr>(&self, s: &str) -> Result<Option<T>, CliError> {
        if s == "-" {
            Ok(None)
        } else {
            self.parse(s).map(Some)
        }
    }

    fn floats(&self, parts: &[String], len: usize, key: &str) -> Result<Vec<f64>, CliError> {
        if parts.len() != len {
            return Err(self.err(format!(
                "'{key}' has {} values, expected {len}",
                parts.len()
            )));
        }
        parts.iter().map(|p| self.parse(p)).collect()
    }

    fn opt_floats(
        &self,
        parts: &[String],
        len: usize,
        key: &str,
    ) -> Result<Option<Vec<f64>>, CliError> {
        if parts.len() == 1 && parts[0] == "-" {
            Ok(None)
        } else {
            self.floats(parts, len, key).map(Some)
        }
    }
}

/// Reads the structured text format back. Timings are not stored and come
/// back empty.
pub fn read_text<R: BufRead>(input: R) -> Result<ResultSet, CliError> {
    let mut r = Reader {
        lines: input.lines(),
        line_no: 0,
    };
    let version: u32 = {
        let v = r.single(TEXT_MAGIC)?;
        r.parse(&v)?
    };
    if version != TEXT_VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let method = {
        let m = r.single("method")?;
        Method::parse(&m).ok_or_else(|| r.err(format!("unknown method '{m}'")))?
    };
    let analysis = match r.single("analysis")?.as_str() {
        "static" => AnalysisKind::Static,
        "dynamic" => AnalysisKind::Dynamic,
        other => return Err(r.err(format!("unknown analysis '{other}'"))),
    };
    let n_dofs: usize = {
        let v = r.single("n_dofs")?;
        r.parse(&v)?
    };
    let labels = {
        let mut parts = r.expect("labels")?;
        if parts.is_empty() {
            return Err(r.err("missing label count"));
        }
        let count: usize = r.parse(&parts.remove(0))?;
        if parts.len() != count {
            return Err(r.err(format!("{} labels, expected {count}", parts.len())));
        }
        parts
    };
    let m = labels.len();

    let mut d = Diagnostics {
        rank: {
            let v = r.single("rank")?;
            r.opt(&v)?
        },
        n_reduced: {
            let v = r.single("n_reduced")?;
            r.opt(&v)?
        },
        ..Diagnostics::default()
    };
    let dropped: usize = {
        let v = r.single("dropped")?;
        r.parse(&v)?
    };
    for _ in 0..dropped {
        let parts = r.expect("dropped_row")?;
        if parts.len() != 3 {
            return Err(r.err("dropped_row takes row, label and reason"));
        }
        d.dropped_rows.push(DroppedRow {
            row: r.parse(&parts[0])?,
            label: parts[1].clone(),
            reason: parts[2].clone(),
        });
    }
    let basis = r.expect("basis")?;
    d.basis = if basis.len() == 1 && basis[0] == "-" {
        None
    } else if basis.len() == 9 {
        Some(BasisReport {
            n_dofs: r.parse(&basis[0])?,
            rank: r.parse(&basis[1])?,
            n_columns: r.parse(&basis[2])?,
            max_bc: r.parse(&basis[3])?,
            max_particular_residual: r.parse(&basis[4])?,
            max_particular_residual_all: r.parse(&basis[5])?,
            full_column_rank: r.parse(&basis[6])?,
            bc_tolerance: r.parse(&basis[7])?,
            particular_tolerance: r.parse(&basis[8])?,
        })
    } else {
        return Err(r.err("basis takes '-' or nine values"));
    };
    d.penalty_alpha = {
        let v = r.single("penalty_alpha")?;
        r.opt(&v)?
    };
    d.max_constraint_residual = {
        let v = r.single("max_constraint_residual")?;
        r.parse(&v)?
    };
    d.constraints_satisfied = {
        let v = r.single("constraints_satisfied")?;
        r.parse(&v)?
    };

    let count: usize = {
        let v = r.single("steps")?;
        r.parse(&v)?
    };
    let mut steps = Vec::with_capacity(count);
    for k in 0..count {
        let head = r.expect("step")?;
        if head.len() != 2 || r.parse::<usize>(&head[0])? != k {
            return Err(r.err(format!("expected step {k}")));
        }
        let time = r.parse(&head[1])?;
        let values = {
            let p = r.expect("values")?;
            r.floats(&p, n_dofs, "values")?
        };
        let velocity = {
            let p = r.expect("velocity")?;
            r.opt_floats(&p, n_dofs, "velocity")?
        };
        let acceleration = {
            let p = r.expect("acceleration")?;
            r.opt_floats(&p, n_dofs, "acceleration")?
        };
        let reactions = {
            let p = r.expect("reactions")?;
            r.floats(&p, m, "reactions")?
        };
        steps.push(StepResult {
            time,
            values,
            velocity,
            acceleration,
            reactions,
        });
    }
    r.line_no += 1;
    if let Some(extra) = r.lines.next() {
        let extra = extra.map_err(|e| r.err(e))?;
        return Err(r.err(format!("trailing content '{extra}'")));
    }

    Ok(ResultSet {
        method,
        analysis,
        n_dofs,
        labels,
        steps,
        diagnostics: d,
    })
}

/// Writes results to `out`, or to stdout when `out` is `None`. CSV output
/// to a file also writes the reactions file next to it.
pub fn emit(results: &ResultSet, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    match (format, out) {
        (Format::Text, None) => {
            let stdout = std::io::stdout();
            write_text(results, stdout.lock()).map_err(io_err(Path::new("<stdout>")))
        }
        (Format::Text, Some(path)) => {
            let f = File::create(path).map_err(io_err(path))?;
            write_text(results, BufWriter::new(f)).map_err(io_err(path))
        }
        (Format::Csv, None) => {
            let stdout = std::io::stdout();
            write_field_csv(results, stdout.lock()).map_err(csv_err(Path::new("<stdout>")))
        }
        (Format::Csv, Some(path)) => {
            let f = File::create(path).map_err(io_err(path))?;
            write_field_csv(results, BufWriter::new(f)).map_err(csv_err(path))?;
            let rpath = reactions_path(path);
            let f = File::create(&rpath).map_err(io_err(&rpath))?;
            write_reactions_csv(results, BufWriter::new(f)).map_err(csv_err(&rpath))
        }
    }
}

/// `B.mtx`, `v_DB.txt` and, for the null-space method, `C.mtx`,
/// `K_red.mtx` and `v_p.txt`.
pub fn dump_matrices(dir: &Path, artifacts: &Artifacts) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let write = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> std::io::Result<()>| {
        let path = dir.join(name);
        let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        f(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))
    };
    write("B.mtx", &|w| write_matrix_market(&artifacts.b, w))?;
    write("v_DB.txt", &|w| write_vector(&artifacts.v_db, w))?;
    if let Some((c, k_red, v_p)) = &artifacts.basis {
        write("C.mtx", &|w| write_matrix_market(c, w))?;
        write("K_red.mtx", &|w| write_matrix_market(k_red, w))?;
        write("v_p.txt", &|w| write_vector(v_p, w))?;
    }
    Ok(())
}
