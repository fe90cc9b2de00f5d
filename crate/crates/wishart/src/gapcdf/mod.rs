//! Finite-size distribution of the largest eigenvalue for the doubly
//! degenerate (l = 2) correlated Wishart ensemble, evaluated exactly as a
//! Pfaffian of a p×p kernel.
//!
//! Conventions: the ensemble is `C ⊗ 1₂` sampled with `2n` columns, `Λ` are the
//! p distinct population eigenvalues, and
//! `gap_cdf(t) = P(2·λ_max ≤ t)` for the eigenvalues of `WWᵀ/(2n)`
//! (equivalently `λ_max(WWᵀ) ≤ n·t`).
//!
//! The kernel mixes a bulk integral G with a finite sum over skew-orthogonal
//! pairs; the two parts cancel to many digits, so the whole chain runs in
//! multiprecision with an adaptively chosen number of bits.

mod kernel;
mod mp;
mod norm;
mod pfaffian;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;
use kernel::{g_value, node_count, pair_values, r_transform, ExpRow, PhiRow, PhiSeries, Tables};
use mp::Mp;

pub use norm::{h_norm, log_h_norm, log_inv_ktilde};
pub use pfaffian::{pfaffian, pfaffian_log};

/// Working precision of the first pass, in bits.
const BASE_PRECISION: usize = 192;
/// Bits kept beyond the worst-case cancellation.
const GUARD_BITS: f64 = 80.0;

/// Member of a skew-orthogonal pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Skew-orthogonal function q̂ of degree 2l (even) or 2l+1 (odd) after the
/// spectral transform, at real argument `x > 0`.
///
/// Even members are real and odd members purely imaginary; in this gauge
/// `q̂_{2l+1}(x) = −i·x·(1 + d/dx)·q̂_{2l}(x)`.
pub fn q_hat(parity: Parity, l: usize, n: usize, x: f64) -> Result<Complex64> {
    if l >= n {
        return Err(Error::invalid(format!("pair index {l} must be below n = {n}")));
    }
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::invalid("q_hat needs x > 0"));
    }
    let prec = BASE_PRECISION;
    let t = Tables::get(n, prec, node_count(prec, x));
    let xm = Mp::from_f64(x, prec);
    let row = ExpRow::new(&t, &xm);
    let (even, odd) = pair_values(&t, l, &xm, &row);
    Ok(match parity {
        Parity::Even => Complex64::new(even.to_f64(), 0.0),
        Parity::Odd => Complex64::new(0.0, odd.to_f64()),
    })
}

/// Transform R_l(x) = c_l ∫ρ_l(s)e^{−xs}ds and its derivative (unnormalised
/// building block of q̂; exposed for diagnostics).
pub fn r_transform_pair(l: usize, n: usize, x: f64) -> Result<(f64, f64)> {
    if l >= n {
        return Err(Error::invalid(format!("pair index {l} must be below n = {n}")));
    }
    let prec = BASE_PRECISION;
    let t = Tables::get(n, prec, node_count(prec, x));
    let row = ExpRow::new(&t, &Mp::from_f64(x, prec));
    let (r, d) = r_transform(&t, l, &row);
    Ok((r.to_f64(), d.to_f64()))
}

/// Bulk double integral G(x₁, x₂) (real form; antisymmetric in its arguments).
pub fn kernel_g2(x1: f64, x2: f64, n: usize) -> Result<f64> {
    if !(x1 > 0.0 && x2 > 0.0 && x1.is_finite() && x2.is_finite()) {
        return Err(Error::invalid("kernel_g2 needs positive arguments"));
    }
    if n == 0 {
        return Err(Error::invalid("kernel_g2 needs n ≥ 1"));
    }
    let prec = BASE_PRECISION;
    let t = Tables::get(n, prec, node_count(prec, x1.max(x2)));
    let mut series = PhiSeries::new(n, prec);
    let a = PhiRow::new(&t, &mut series, &Mp::from_f64(x1, prec));
    let b = PhiRow::new(&t, &mut series, &Mp::from_f64(x2, prec));
    Ok(g_value(&t, &a, &b).to_f64())
}

/// Reduced antisymmetric kernel at one threshold.
#[derive(Debug, Clone, Serialize)]
pub struct KernelMatrix {
    /// Scaled arguments x_a = n·t/(2Λ_a).
    pub x: Vec<f64>,
    /// Kernel entries rounded to f64.
    pub entries: Vec<Vec<f64>>,
    /// Bits used to assemble it.
    pub precision: usize,
}

fn validate(t: f64, lambda: &[f64], n: usize) -> Result<Vec<f64>> {
    let p = lambda.len();
    if p == 0 {
        return Err(Error::invalid("empty spectrum"));
    }
    if p % 2 == 1 {
        return Err(Error::invalid(format!(
            "odd p = {p} unsupported (dummy-eigenvalue limit not implemented)"
        )));
    }
    if p > 2 * n {
        return Err(Error::invalid(format!("need p ≤ 2n, got n = {n}, p = {p}")));
    }
    if !t.is_finite() {
        return Err(Error::invalid("threshold must be finite"));
    }
    let mut lam = lambda.to_vec();
    if lam.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid("eigenvalues must be positive"));
    }
    lam.sort_by(|a, b| a.total_cmp(b));
    for w in lam.windows(2) {
        if (w[1] - w[0]).abs() <= 1e-6 * w[1] {
            return Err(Error::invalid(format!(
                "confluent kernel unsupported: eigenvalues {} and {} closer than 1e-6 relative",
                w[0], w[1]
            )));
        }
    }
    Ok(lam)
}

struct Assembled {
    x: Vec<Mp>,
    k: Vec<Vec<Mp>>,
    /// log₂ of the largest single contribution to each entry.
    mag: Vec<Vec<f64>>,
}

fn assemble(x: &[f64], n: usize, prec: usize) -> Assembled {
    let p = x.len();
    let x_max = x.iter().cloned().fold(0.0, f64::max);
    let t = Tables::get(n, prec, node_count(prec, x_max));
    let xs: Vec<Mp> = x.iter().map(|&v| Mp::from_f64(v, prec)).collect();
    let pairs = n - p / 2;
    let mut series = PhiSeries::new(n, prec);
    let phis: Vec<PhiRow> = xs.iter().map(|xm| PhiRow::new(&t, &mut series, xm)).collect();
    let q: Vec<Vec<(Mp, Mp)>> = xs
        .iter()
        .map(|xm| {
            let row = ExpRow::new(&t, xm);
            (0..pairs).map(|l| pair_values(&t, l, xm, &row)).collect()
        })
        .collect();
    let mut k = vec![vec![Mp::zero(prec); p]; p];
    let mut mag = vec![vec![f64::NEG_INFINITY; p]; p];
    for a in 0..p {
        for b in a + 1..p {
            let g = g_value(&t, &phis[a], &phis[b]);
            let mut m = g.log2_abs();
            let mut v = g;
            for l in 0..pairs {
                let (ea, oa) = &q[a][l];
                let (eb, ob) = &q[b][l];
                let term = (ea * ob - eb * oa) / &t.h[l];
                m = m.max(term.log2_abs());
                v = v - term;
            }
            mag[a][b] = m;
            mag[b][a] = m;
            k[b][a] = -&v;
            k[a][b] = v;
        }
    }
    Assembled { x: xs, k, mag }
}

/// Kernel matrix at threshold `t` (first-pass precision).
pub fn build_kernel(t: f64, lambda: &[f64], n: usize) -> Result<KernelMatrix> {
    let lam = validate(t, lambda, n)?;
    if t <= 0.0 {
        return Err(Error::invalid("kernel needs t > 0"));
    }
    let x: Vec<f64> = lam.iter().map(|l| n as f64 * t / (2.0 * l)).collect();
    let asm = assemble(&x, n, BASE_PRECISION);
    Ok(KernelMatrix {
        x,
        entries: asm.k.iter().map(|r| r.iter().map(Mp::to_f64).collect()).collect(),
        precision: BASE_PRECISION,
    })
}

/// Outcome of one evaluation with diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapCdfPoint {
    pub t: f64,
    pub value: f64,
    /// Bits of precision used.
    pub precision: usize,
    /// Estimated log₂ of the cancellation the precision had to absorb.
    pub cancellation_bits: f64,
}

fn evaluate(x: &[f64], n: usize, prec: usize) -> (Mp, f64) {
    let p = x.len();
    let asm = assemble(x, n, prec);
    // prefactor (−1)^{p/2}·∏x^{2n} / (normaliser ratio · Vandermonde)
    let mut pref = norm::zr_range((2 * n - p + 1) as i64, 2 * n as i64, n as i64, prec).recip();
    for xa in &asm.x {
        pref = pref * xa.powi(2 * n as i64);
    }
    for a in 0..p {
        for b in a + 1..p {
            pref = pref / (&asm.x[b] - &asm.x[a]);
        }
    }
    if (p / 2) % 2 == 1 {
        pref = -pref;
    }
    let row_bits: f64 = asm
        .mag
        .iter()
        .map(|row| {
            let top = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = row.iter().map(|m| (2.0 * (m - top)).exp2()).sum();
            top + 0.5 * s.log2()
        })
        .sum();
    let cancellation = pref.log2_abs() + row_bits;
    let pf = pfaffian::pfaffian_mp(asm.k, prec);
    (pf * pref, cancellation)
}

/// P(2λ_max ≤ t) with diagnostics.
pub fn gap_cdf_point(t: f64, lambda: &[f64], n: usize) -> Result<GapCdfPoint> {
    let lam = validate(t, lambda, n)?;
    if t <= 0.0 {
        return Ok(GapCdfPoint { t, value: 0.0, precision: 0, cancellation_bits: 0.0 });
    }
    let x: Vec<f64> = lam.iter().map(|l| n as f64 * t / (2.0 * l)).collect();
    let mut prec = BASE_PRECISION;
    for _ in 0..6 {
        let (v, cancel) = evaluate(&x, n, prec);
        if (prec as f64) < cancel + GUARD_BITS {
            prec = (((cancel + GUARD_BITS + 16.0) / 64.0).ceil() as usize) * 64;
            continue;
        }
        let value = v.to_f64();
        if !value.is_finite() || !(-1e-6..=1.0 + 1e-6).contains(&value) {
            return Err(Error::numeric(format!("gap probability {value} at t = {t} is outside [0, 1]")));
        }
        return Ok(GapCdfPoint { t, value: value.clamp(0.0, 1.0), precision: prec, cancellation_bits: cancel });
    }
    Err(Error::numeric(format!("precision escalation did not converge at t = {t}")))
}

/// P(2λ_max ≤ t) for the ensemble `Λ ⊗ 1₂` with `2n` columns.
pub fn gap_cdf(t: f64, lambda: &[f64], n: usize) -> Result<f64> {
    gap_cdf_point(t, lambda, n).map(|p| p.value)
}

/// CDF tabulated on a grid of thresholds.
#[derive(Debug, Clone, Serialize)]
pub struct GapCdfTable {
    pub lambda: Vec<f64>,
    pub n: usize,
    pub points: Vec<GapCdfPoint>,
}

impl GapCdfTable {
    pub fn t(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// Linear interpolation (clamped to the end values outside the grid).
    pub fn at(&self, t: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return f64::NAN;
        }
        if t <= pts[0].t {
            return pts[0].value;
        }
        for w in pts.windows(2) {
            if t <= w[1].t {
                let f = (t - w[0].t) / (w[1].t - w[0].t);
                return w[0].value + f * (w[1].value - w[0].value);
            }
        }
        pts[pts.len() - 1].value
    }
}

/// Evaluate the CDF at every grid point (data-parallel over points).
pub fn gap_cdf_grid(grid: &[f64], lambda: &[f64], n: usize) -> Result<GapCdfTable> {
    let lam = validate(1.0, lambda, n)?;
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let points = par::map(&sorted, |&t| gap_cdf_point(t, &lam, n)).into_iter().collect::<Result<Vec<_>>>()?;
    Ok(GapCdfTable { lambda: lam, n, points })
}
