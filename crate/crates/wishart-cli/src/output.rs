//! CSV tables with `#` metadata, plot data plus gnuplot scripts, and the
//! small text formats accepted on the command line.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::Failure;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Shortest round-trip formatting, so analytic outputs are bit-reproducible.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// A CSV table: `# key=value` metadata lines, a header row, then data.
#[derive(Debug, Clone, Default)]
pub struct Table {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn row_f64(&mut self, cells: &[f64]) {
        self.row(cells.iter().map(|&v| num(v)).collect());
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        let mut text = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(text, "# {k}={v}");
        }
        let mut w = csv::Writer::from_writer(text.into_bytes());
        w.write_record(&self.header).map_err(|e| io_err(path, e))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| io_err(path, e))?;
        }
        let bytes = w.into_inner().map_err(|e| io_err(path, e))?;
        std::fs::write(path, bytes).map_err(|e| io_err(path, e))
    }
}

/// x/y plot data: one x column and any number of named y columns.
#[derive(Debug, Clone)]
pub struct Plot<'a> {
    pub name: &'a str,
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub x: &'a [f64],
    pub ys: Vec<(&'a str, &'a [f64])>,
    /// Draw as steps (histograms) instead of lines.
    pub steps: bool,
}

impl Plot<'_> {
    /// Writes `<name>.dat` and a gnuplot script `<name>.gp` rendering it to
    /// `<name>.png`.
    pub fn emit(&self, dir: &Path) -> Result<(), Failure> {
        let mut dat = String::new();
        let labels: Vec<&str> = self.ys.iter().map(|y| y.0).collect();
        let _ = writeln!(dat, "# {} {}", self.xlabel, labels.join(" "));
        for (i, x) in self.x.iter().enumerate() {
            dat.push_str(&num(*x));
            for (_, y) in &self.ys {
                dat.push(' ');
                dat.push_str(&num(y[i]));
            }
            dat.push('\n');
        }
        let dat_path = dir.join(format!("{}.dat", self.name));
        std::fs::write(&dat_path, dat).map_err(|e| io_err(&dat_path, e))?;

        let style = if self.steps { "histeps" } else { "lines" };
        let mut gp = String::new();
        let _ = writeln!(gp, "set terminal pngcairo size 900,600");
        let _ = writeln!(gp, "set output '{}.png'", self.name);
        let _ = writeln!(gp, "set title '{}'", self.title);
        let _ = writeln!(gp, "set xlabel '{}'", self.xlabel);
        let _ = writeln!(gp, "set ylabel '{}'", self.ylabel);
        let _ = writeln!(gp, "set key top right");
        let curves: Vec<String> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| format!("'{}.dat' using 1:{} with {style} title '{l}'", self.name, i + 2))
            .collect();
        let _ = writeln!(gp, "plot {}", curves.join(", \\\n     "));
        let gp_path = dir.join(format!("{}.gp", self.name));
        std::fs::write(&gp_path, gp).map_err(|e| io_err(&gp_path, e))
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64, Failure> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Failure::Usage(format!("bad number `{s}` in {what}")))
}

/// `lo:hi:n` → n equally spaced points from lo to hi inclusive.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Failure::Usage(format!("grid `{text}` is not lo:hi:points")));
    }
    let lo = parse_f64(parts[0], "grid")?;
    let hi = parse_f64(parts[1], "grid")?;
    let n: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("bad point count in grid `{text}`")))?;
    if n < 2 || hi <= lo {
        return Err(Failure::Usage(format!("grid `{text}` needs lo < hi and at least 2 points")));
    }
    Ok(linspace(lo, hi, n))
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// `lo:hi` with lo < hi.
pub fn parse_range(text: &str) -> Result<(f64, f64), Failure> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| Failure::Usage(format!("range `{text}` is not lo:hi")))?;
    let (lo, hi) = (parse_f64(a, "range")?, parse_f64(b, "range")?);
    if hi <= lo {
        return Err(Failure::Usage(format!("range `{text}` needs lo < hi")));
    }
    Ok((lo, hi))
}

/// Comma-separated positive block sizes.
pub fn parse_blocks(text: &str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&b| b > 0)
                .ok_or_else(|| Failure::Usage(format!("bad block size `{t}` in `{text}`")))
        })
        .collect()
}

/// Square matrix from CSV with a header row; `#` lines are comments.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, Failure> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let row = rec
            .iter()
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| Failure::Io(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    let p = rows.len();
    if p == 0 || rows.iter().any(|r| r.len() != p) {
        return Err(Failure::Io(format!("{}: not a square matrix", path.display())));
    }
    Ok(DMatrix::from_fn(p, p, |r, c| rows[r][c]))
}

pub fn matrix_table(m: &DMatrix<f64>) -> Table {
    let names: Vec<String> = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut t = Table::new(&refs);
    for r in 0..m.nrows() {
        t.row_f64(&m.row(r).iter().copied().collect::<Vec<f64>>());
    }
    t
}
