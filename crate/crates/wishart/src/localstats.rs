//! Local statistics: bulk and edge unfolding, nearest-neighbour spacings,
//! and the GOE / Tracy–Widom reference curves they are compared with.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::montecarlo::{histogram, sample_goe_eigs, sample_rng, HistogramDensity};
use crate::saddle::density;
use crate::spectrum::{AspectRatio, EmpiricalSpectrum};

/// Half-width of a bulk window, in mean spacings.
pub const BULK_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedSample {
    /// Reference point (bulk x or edge position).
    pub x: f64,
    /// Unfolded values, ascending.
    pub values: Vec<f64>,
    /// Factor applied to λ − x.
    pub scale: f64,
}

impl UnfoldedSample {
    /// Nearest-neighbour spacings.
    pub fn spacings(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// ξ̂ = R₁(x)·(lp)·(λ − x) for the eigenvalues within ±10 mean spacings of x.
pub fn unfold_bulk(eigs: &[f64], x: f64, s: &EmpiricalSpectrum, a: AspectRatio) -> Result<UnfoldedSample> {
    let r1 = density(x, s, a)?;
    if !(r1 > 1e-8 / s.mean()) {
        return Err(Error::invalid(format!("x = {x} is not in the bulk (R₁ = {r1:e})")));
    }
    bulk_window(eigs, x, r1 * s.effective_p() as f64)
}

/// Unfolding with a precomputed scale R₁(x)·lp (avoids re-solving the
/// saddle point for every sample).
pub fn bulk_window(eigs: &[f64], x: f64, scale: f64) -> Result<UnfoldedSample> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid("unfolding scale must be positive"));
    }
    let mut values: Vec<f64> = eigs
        .iter()
        .map(|&l| scale * (l - x))
        .filter(|u| u.abs() <= BULK_WINDOW)
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(UnfoldedSample { x, values, scale })
}

/// Wigner surmise P(s) = (π/2)s·exp(−πs²/4).
pub fn wigner_surmise(s: f64) -> f64 {
    if s < 0.0 {
        return 0.0;
    }
    0.5 * PI * s * (-0.25 * PI * s * s).exp()
}

/// (γ²/p)Σ mult·Λ³/(1+Λq*)³ − 1/q*³, i.e. g″(q*)/2.
pub fn edge_bracket(s: &EmpiricalSpectrum, a: AspectRatio, q_star: f64) -> f64 {
    let w = a.gamma_sq() / s.p() as f64;
    let sum: f64 = s
        .values()
        .iter()
        .zip(s.multiplicities())
        .map(|(&l, &m)| m as f64 * (l / (1.0 + l * q_star)).powi(3))
        .sum();
    w * sum - 1.0 / q_star.powi(3)
}

/// Edge scale s_e = |bracket|^{−1/3}/γ^{4/3}, so that ξ̂ = s_e·(λ − x_edge)(lp)^{2/3}.
/// At a lower edge the bracket is negative; its magnitude is used, since
/// the fluctuations there are mirrored.
pub fn edge_scale(s: &EmpiricalSpectrum, a: AspectRatio, _x_edge: f64, q_star: f64) -> Result<f64> {
    let b = edge_bracket(s, a, q_star);
    if !(b.abs() > 0.0 && b.is_finite()) || q_star >= 0.0 {
        return Err(Error::invalid("invalid edge expansion"));
    }
    // Upper edges sit at q* ∈ (−1/Λ_max, 0) where g″ > 0.
    if b <= 0.0 && q_star > -1.0 / s.max() {
        return Err(Error::invalid("invalid edge expansion"));
    }
    Ok(b.abs().powf(-1.0 / 3.0) / a.gamma_sq().powf(2.0 / 3.0))
}

/// ξ̂ = scale·(λ − x_edge)·(lp)^{2/3}.
pub fn unfold_edge(values: &[f64], x_edge: f64, scale: f64, lp: usize) -> UnfoldedSample {
    let f = scale * (lp as f64).powf(2.0 / 3.0);
    UnfoldedSample {
        x: x_edge,
        values: values.iter().map(|&l| f * (l - x_edge)).collect(),
        scale: f,
    }
}

/// Closed-form approximation to the standardized TW₁ density,
/// 6.68·10⁻⁷⁶(t+8.93)^{78.66}e^{−8.93t} for t > −8.93.
pub fn tw_approx(t: f64) -> f64 {
    if t <= -8.93 {
        return 0.0;
    }
    (-76.0 * 10f64.ln() + 6.68f64.ln() + 78.66 * (t + 8.93).ln() - 8.93 * t).exp()
}

/// Tabulated CDF of [`tw_approx`], normalized to unit mass.
#[derive(Debug, Clone)]
pub struct TwReference {
    t0: f64,
    dt: f64,
    cdf: Vec<f64>,
    pub mass: f64,
}

impl TwReference {
    pub fn new() -> Self {
        let (t0, t1, cells) = (-8.93, 12.0, 8000);
        let dt = (t1 - t0) / cells as f64;
        let mut cdf = Vec::with_capacity(cells + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 0..cells {
            let a = t0 + dt * i as f64;
            acc += crate::quad::gl_integrate(tw_approx, a, a + dt, 8);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Self { t0, dt, cdf, mass: acc }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= self.t0 {
            return 0.0;
        }
        let u = (t - self.t0) / self.dt;
        let i = u.floor() as usize;
        if i + 1 >= self.cdf.len() {
            return 1.0;
        }
        let f = u - i as f64;
        self.cdf[i] * (1.0 - f) + self.cdf[i + 1] * f
    }
}

impl Default for TwReference {
    fn default() -> Self {
        Self::new()
    }
}

/// Unit-normalized spacing histogram on [0, 5].
pub fn spacing_histogram(spacings: &[f64], bins: usize) -> Result<HistogramDensity> {
    if spacings.len() < 100 {
        return Err(Error::invalid(format!(
            "need at least 100 spacings, got {}",
            spacings.len()
        )));
    }
    histogram(spacings, bins, Some((0.0, 5.0)))
}

/// Counting function N·F(λ) of the semicircle of radius R = √(2N) (GOE with
/// unit diagonal variance).
fn semicircle_counting(lambda: f64, dim: usize) -> f64 {
    let r = (2.0 * dim as f64).sqrt();
    let x = (lambda / r).clamp(-1.0, 1.0);
    dim as f64 * (0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) / PI)
}

/// GOE bulk reference: `draws` matrices of size `dim`, unfolded with the
/// semicircle law, nearest-neighbour spacings from the central quarter of
/// each spectrum.
pub fn goe_reference_spacings(dim: usize, draws: usize, seed: u64, workers: usize) -> Vec<f64> {
    let (lo, hi) = (3 * dim / 8, 5 * dim / 8);
    crate::par::map_range(draws, workers, |k| {
        let e = sample_goe_eigs(dim, &mut sample_rng(seed, k as u64));
        let u: Vec<f64> = e[lo..hi].iter().map(|&l| semicircle_counting(l, dim)).collect();
        u.windows(2).map(|w| w[1] - w[0]).collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Spacings of sorted i.i.d. uniform points rescaled to unit mean spacing
/// (Poisson statistics), used as a negative control.
pub fn poisson_spacings(count: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = sample_rng(seed, 0);
    let mut pts: Vec<f64> = (0..=count).map(|_| rng.random::<f64>() * count as f64).collect();
    pts.sort_by(f64::total_cmp);
    pts.windows(2).map(|w| w[1] - w[0]).collect()
}
