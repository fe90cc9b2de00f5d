//! Domain types and data ingestion: empirical spectra, aspect ratios,
//! correlation matrices, and the one-factor synthetic time-series model.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Relative distance below which two eigenvalues are treated as one.
const MERGE_TOL: f64 = 1e-12;

/// Distinct eigenvalues Λ of the empirical correlation matrix, with
/// multiplicities and an overall degeneracy factor `l` (the ensemble is built
/// from Λ⊗1_l).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSpectrum {
    values: Vec<f64>,
    mult: Vec<usize>,
    degeneracy: usize,
}

impl EmpiricalSpectrum {
    /// Builds a spectrum from (value, multiplicity) pairs in any order.
    /// Values closer than 1e-12 relative are merged.
    pub fn new(pairs: &[(f64, usize)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("empty spectrum"));
        }
        let mut v: Vec<(f64, usize)> = Vec::with_capacity(pairs.len());
        for &(x, m) in pairs {
            if !x.is_finite() || x <= 0.0 {
                return Err(Error::invalid(format!("nonpositive eigenvalue {x}")));
            }
            if m == 0 {
                return Err(Error::invalid("zero multiplicity"));
            }
            v.push((x, m));
        }
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::new();
        let mut mult: Vec<usize> = Vec::new();
        for (x, m) in v {
            match values.last() {
                Some(&last) if (x - last).abs() <= MERGE_TOL * x.abs().max(last.abs()) => {
                    *mult.last_mut().unwrap() += m;
                }
                _ => {
                    values.push(x);
                    mult.push(m);
                }
            }
        }
        Ok(Self {
            values,
            mult,
            degeneracy: 1,
        })
    }

    /// Each value with multiplicity one (duplicates merge).
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let pairs: Vec<(f64, usize)> = values.iter().map(|&x| (x, 1)).collect();
        Self::new(&pairs)
    }

    /// Λ ≡ value, repeated `p` times.
    pub fn uniform(value: f64, p: usize) -> Result<Self> {
        Self::new(&[(value, p)])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.mult
    }

    /// Number of distinct values.
    pub fn distinct(&self) -> usize {
        self.values.len()
    }

    /// Σ multiplicities (the dimension of C, before degeneracy).
    pub fn p(&self) -> usize {
        self.mult.iter().sum()
    }

    pub fn degeneracy_l(&self) -> usize {
        self.degeneracy
    }

    /// Dimension l·p of the simulated ensemble.
    pub fn effective_p(&self) -> usize {
        self.degeneracy * self.p()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Mean of Λ over the normalized eigenvalue measure.
    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// (1/p) Σ mult·Λᵏ.
    pub fn moment(&self, k: i32) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(&self.mult)
            .map(|(&x, &m)| m as f64 * x.powi(k))
            .sum();
        s / self.p() as f64
    }

    /// All l·p eigenvalues of Λ⊗1_l, ascending.
    pub fn expanded(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.effective_p());
        for (&x, &m) in self.values.iter().zip(&self.mult) {
            out.extend(std::iter::repeat_n(x, m * self.degeneracy));
        }
        out
    }

    /// Same spectrum with every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        Ok(Self {
            values: self.values.iter().map(|x| x * c).collect(),
            mult: self.mult.clone(),
            degeneracy: self.degeneracy,
        })
    }

    /// Spectrum with the distinct value at `idx` removed entirely.
    pub fn without(&self, idx: usize) -> Option<Self> {
        if self.values.len() < 2 || idx >= self.values.len() {
            return None;
        }
        let mut s = self.clone();
        s.values.remove(idx);
        s.mult.remove(idx);
        Some(s)
    }

    /// Diagonal correlation matrix diag(Λ⊗1_l).
    pub fn to_matrix(&self) -> CorrelationMatrix {
        let e = self.expanded();
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.clone()));
        CorrelationMatrix { m, eig: e }
    }
}

/// γ² = p/n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AspectRatio(f64);

impl AspectRatio {
    pub fn new(gamma_sq: f64) -> Result<Self> {
        if !(gamma_sq > 0.0 && gamma_sq <= 1.0) {
            return Err(Error::invalid(format!(
                "aspect ratio γ² = {gamma_sq} outside (0, 1]"
            )));
        }
        Ok(Self(gamma_sq))
    }

    pub fn from_dims(p: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        Self::new(p as f64 / n as f64)
    }

    pub fn gamma_sq(self) -> f64 {
        self.0
    }

    pub fn gamma(self) -> f64 {
        self.0.sqrt()
    }
}

/// Symmetric positive semidefinite matrix with cached ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    m: DMatrix<f64>,
    eig: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::invalid("correlation matrix must be square and nonempty"));
        }
        let scale = m.amax().max(1.0);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        let sym = (&m + m.transpose()) * 0.5;
        let mut eig: Vec<f64> = sym.clone().symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        if eig[0] < -1e-10 * scale {
            return Err(Error::invalid(format!(
                "matrix not positive semidefinite (eigenvalue {})",
                eig[0]
            )));
        }
        Ok(Self { m: sym, eig })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig
    }

    /// C⊗1_l, index (i, a) ↦ i·l + a.
    pub fn kron_identity(&self, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::invalid("degeneracy must be positive"));
        }
        let p = self.dim();
        let m = DMatrix::from_fn(p * l, p * l, |r, c| {
            if r % l == c % l {
                self.m[(r / l, c / l)]
            } else {
                0.0
            }
        });
        let mut eig: Vec<f64> = self.eig.iter().flat_map(|&x| std::iter::repeat_n(x, l)).collect();
        eig.sort_by(f64::total_cmp);
        Ok(Self { m, eig })
    }

    /// Spectrum of the matrix. Eigenvalues below `floor` are rejected since
    /// the saddle-point machinery needs Λ > 0.
    pub fn spectrum(&self, floor: f64) -> Result<EmpiricalSpectrum> {
        if let Some(&bad) = self.eig.iter().find(|&&x| x <= floor) {
            return Err(Error::invalid(format!(
                "eigenvalue {bad:e} at or below floor {floor:e}; matrix is (numerically) singular"
            )));
        }
        EmpiricalSpectrum::from_values(&self.eig)
    }
}

/// One-factor model: each block of rows shares one standard-normal factor
/// series, plus `s_noise` times i.i.d. standard-normal noise.
#[derive(Debug, Clone, PartialEq)]
pub struct OneFactorConfig {
    pub block_sizes: Vec<usize>,
    pub n: usize,
    pub s_noise: f64,
    pub seed: u64,
}

impl OneFactorConfig {
    pub fn p(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return Err(Error::invalid("block sizes must be positive"));
        }
        if self.n < self.p() {
            return Err(Error::invalid(format!(
                "series length n = {} below dimension p = {}",
                self.n,
                self.p()
            )));
        }
        if !(self.s_noise >= 0.0 && self.s_noise.is_finite()) {
            return Err(Error::invalid("noise strength must be nonnegative"));
        }
        Ok(())
    }
}

/// p time series of length n, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesMatrix {
    data: DMatrix<f64>,
}

impl TimeSeriesMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::invalid("empty time-series matrix"));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite time-series entry"));
        }
        Ok(Self { data })
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// Parses the spectrum text format: one value per line with an optional
/// multiplicity column; blank lines and `#` comments are ignored.
pub fn parse_spectrum(text: &str, path: &Path) -> Result<EmpiricalSpectrum> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let v: f64 = it
            .next()
            .unwrap()
            .parse()
            .map_err(|e| err(i + 1, format!("bad value: {e}")))?;
        let m: usize = match it.next() {
            Some(tok) => tok
                .parse()
                .map_err(|e| err(i + 1, format!("bad multiplicity: {e}")))?,
            None => 1,
        };
        if it.next().is_some() {
            return Err(err(i + 1, "too many columns".into()));
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(err(i + 1, format!("nonpositive eigenvalue {v}")));
        }
        if m == 0 {
            return Err(err(i + 1, "zero multiplicity".into()));
        }
        pairs.push((v, m));
    }
    if pairs.is_empty() {
        return Err(err(0, "empty spectrum file".into()));
    }
    EmpiricalSpectrum::new(&pairs)
}

pub fn load_spectrum(path: &Path) -> Result<EmpiricalSpectrum> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_spectrum(&text, path)
}

/// Writes a spectrum in the format read by [`load_spectrum`].
pub fn write_spectrum(s: &EmpiricalSpectrum, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (&x, &m) in s.values().iter().zip(s.multiplicities()) {
        let m = m * s.degeneracy_l();
        if m == 1 {
            out.push_str(&format!("{x:.17e}\n"));
        } else {
            out.push_str(&format!("{x:.17e} {m}\n"));
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Reads time series from CSV: one series per row, optional header row.
pub fn load_time_series(path: &Path) -> Result<TimeSeriesMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), std::io::Error::other(e)))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(r) => rows.push(r),
            // A non-numeric first record is a header.
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("bad number: {e}"),
                })
            }
        }
    }
    let Some(first) = rows.first() else {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "no data rows".into(),
        });
    };
    let n = first.len();
    if let Some(i) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("row has {} columns, expected {n}", rows[i].len()),
        });
    }
    let p = rows.len();
    TimeSeriesMatrix::new(DMatrix::from_fn(p, n, |r, c| rows[r][c]))
}

/// T = T₀ + s_noise·T₁ with T₀ block-constant rows (one factor per block).
pub fn one_factor_series(cfg: &OneFactorConfig) -> Result<TimeSeriesMatrix> {
    cfg.validate()?;
    let p = cfg.p();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t = DMatrix::zeros(p, cfg.n);
    let mut row = 0;
    for &b in &cfg.block_sizes {
        let factor: Vec<f64> = (0..cfg.n).map(|_| StandardNormal.sample(&mut rng)).collect();
        for r in row..row + b {
            for (c, &f) in factor.iter().enumerate() {
                t[(r, c)] = f;
            }
        }
        row += b;
    }
    for r in 0..p {
        for c in 0..cfg.n {
            let z: f64 = StandardNormal.sample(&mut rng);
            t[(r, c)] += cfg.s_noise * z;
        }
    }
    TimeSeriesMatrix::new(t)
}

/// Pearson correlation with 1/n normalization.
pub fn estimate_correlation(t: &TimeSeriesMatrix) -> Result<CorrelationMatrix> {
    let (p, n) = (t.rows(), t.cols());
    let d = t.data();
    let mut z = DMatrix::zeros(p, n);
    for r in 0..p {
        let row = d.row(r);
        let mean = row.sum() / n as f64;
        let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        if !(var > 0.0) {
            return Err(Error::invalid(format!("zero-variance row {r}")));
        }
        let sd = var.sqrt();
        for c in 0..n {
            z[(r, c)] = (d[(r, c)] - mean) / sd;
        }
    }
    let mut c = &z * z.transpose() / n as f64;
    for i in 0..p {
        c[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    CorrelationMatrix::new(c)
}

/// Λ ↦ Λ⊗1_l, recorded in the degeneracy factor (multiplicities unchanged),
/// so the normalized eigenvalue measure is untouched.
pub fn degenerate_spectrum(s: &EmpiricalSpectrum, l: usize) -> Result<EmpiricalSpectrum> {
    if l == 0 {
        return Err(Error::invalid("degeneracy must be positive"));
    }
    let mut out = s.clone();
    out.degeneracy *= l;
    Ok(out)
}

/// Λ⊗1_l written out as multiplicities (degeneracy folded into the
/// base spectrum). Useful to check that both representations agree.
pub fn degenerate_as_multiplicities(s: &EmpiricalSpectrum, l: usize) -> Result<EmpiricalSpectrum> {
    if l == 0 {
        return Err(Error::invalid("degeneracy must be positive"));
    }
    let pairs: Vec<(f64, usize)> = s
        .values()
        .iter()
        .zip(s.multiplicities())
        .map(|(&x, &m)| (x, m * l * s.degeneracy_l()))
        .collect();
    EmpiricalSpectrum::new(&pairs)
}
