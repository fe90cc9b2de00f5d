//! Scalar saddle-point equation −x + g(q) = 0 with
//! g(q) = −1/q + (γ²/p) Σ mult·Λ/(1+Λq): root finding, macroscopic density
//! R₁(x) = Im q₀(x)/(γ²π), and the support edges at the critical points of g.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectrum::{AspectRatio, EmpiricalSpectrum};

const POLE_TOL: f64 = 1e-14;
const POLE_GUARD: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;

/// Root q₀(x) of the saddle-point equation on the Im q ≥ 0 branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleSolution {
    pub x: f64,
    pub q0: Complex64,
    pub residual: f64,
    pub in_support: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Lower,
    Upper,
    /// Density diverges like 1/√x at the origin (γ² = 1).
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub x: f64,
    pub kind: EdgeKind,
    /// Critical point q* with g′(q*) = 0 (NaN for a hard edge).
    pub q_star: f64,
    /// c in R₁ ≈ c·√|x − x_edge|; `None` at hard or multicritical edges.
    pub coeff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportInterval {
    pub lower: Edge,
    pub upper: Edge,
    /// Indices (into the distinct values) of the Λ feeding this interval.
    pub values: std::ops::Range<usize>,
}

impl SupportInterval {
    pub fn width(&self) -> f64 {
        self.upper.x - self.lower.x
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower.x && x <= self.upper.x
    }
}

/// Disjoint, ascending support intervals of R₁.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSupport {
    pub intervals: Vec<SupportInterval>,
    pub hard_edge_at_origin: bool,
}

impl SpectralSupport {
    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(x))
    }

    pub fn lowest(&self) -> f64 {
        self.intervals[0].lower.x
    }

    pub fn highest(&self) -> f64 {
        self.intervals.last().unwrap().upper.x
    }

    /// All edges in ascending order.
    pub fn edges(&self) -> Vec<Edge> {
        self.intervals.iter().flat_map(|iv| [iv.lower, iv.upper]).collect()
    }
}

/// Saddle-point function and its first two derivatives at complex q.
pub fn g_funcs(
    q: Complex64,
    s: &EmpiricalSpectrum,
    a: AspectRatio,
) -> Result<(Complex64, Complex64, Complex64)> {
    if q.norm() < POLE_TOL {
        return Err(Error::numeric("evaluation at pole q = 0"));
    }
    let w = a.gamma_sq() / s.p() as f64;
    let inv = 1.0 / q;
    let mut g = -inv;
    let mut g1 = inv * inv;
    let mut g2 = -2.0 * inv * inv * inv;
    for (&lam, &m) in s.values().iter().zip(s.multiplicities()) {
        let d = 1.0 + lam * q;
        if d.norm() < POLE_TOL {
            return Err(Error::numeric(format!("evaluation at pole q = -1/{lam}")));
        }
        let r = lam / d;
        let c = w * m as f64;
        g += c * r;
        g1 -= c * r * r;
        g2 += 2.0 * c * r * r * r;
    }
    Ok((g, g1, g2))
}

fn g_real(q: f64, s: &EmpiricalSpectrum, a: AspectRatio) -> Result<(f64, f64, f64)> {
    let (g, g1, g2) = g_funcs(Complex64::new(q, 0.0), s, a)?;
    Ok((g.re, g1.re, g2.re))
}

fn residual(q: Complex64, x: f64, s: &EmpiricalSpectrum, a: AspectRatio) -> f64 {
    match g_funcs(q, s, a) {
        Ok((g, _, _)) => (g - x).norm(),
        Err(_) => f64::INFINITY,
    }
}

fn support_threshold(s: &EmpiricalSpectrum) -> f64 {
    1e-8 / s.mean()
}

fn newton(mut q: Complex64, x: f64, s: &EmpiricalSpectrum, a: AspectRatio) -> Option<Complex64> {
    for _ in 0..100 {
        let (g, g1, _) = g_funcs(q, s, a).ok()?;
        let f = g - x;
        if g1.norm() == 0.0 {
            return None;
        }
        let step = f / g1;
        q -= step;
        if step.norm() <= 1e-15 * q.norm() {
            break;
        }
    }
    q.is_finite().then_some(q)
}

/// Damped fixed point q ← 1/(S(q) − x), started in the upper half plane.
fn fixed_point(x: f64, s: &EmpiricalSpectrum, a: AspectRatio) -> Complex64 {
    let w = a.gamma_sq() / s.p() as f64;
    let mut q = Complex64::new(0.0, 1.0 / s.mean());
    for _ in 0..4000 {
        let mut sum = Complex64::new(0.0, 0.0);
        for (&lam, &m) in s.values().iter().zip(s.multiplicities()) {
            sum += w * m as f64 * lam / (1.0 + lam * q);
        }
        let next = 0.5 * q + 0.5 / (sum - x);
        let done = (next - q).norm() <= 1e-15 * next.norm();
        q = next;
        if done {
            break;
        }
    }
    q
}

/// Coefficients (ascending powers) of the numerator polynomial of −x + g(q).
fn saddle_polynomial(x: f64, s: &EmpiricalSpectrum, a: AspectRatio) -> Vec<f64> {
    let w = a.gamma_sq() / s.p() as f64;
    let mul = |p: &[f64], lam: f64| -> Vec<f64> {
        let mut out = vec![0.0; p.len() + 1];
        for (k, &c) in p.iter().enumerate() {
            out[k] += c;
            out[k + 1] += c * lam;
        }
        out
    };
    let m = s.distinct();
    let mut all = vec![1.0];
    for &lam in s.values() {
        all = mul(&all, lam);
    }
    // −x·q·∏ − ∏ + w·q·Σ mult·Λᵢ·∏_{j≠i}
    let mut poly = vec![0.0; m + 2];
    for (k, &c) in all.iter().enumerate() {
        poly[k + 1] -= x * c;
        poly[k] -= c;
    }
    for i in 0..m {
        let mut part = vec![1.0];
        for (j, &lam) in s.values().iter().enumerate() {
            if j != i {
                part = mul(&part, lam);
            }
        }
        let c = w * s.multiplicities()[i] as f64 * s.values()[i];
        for (k, &v) in part.iter().enumerate() {
            poly[k + 1] += c * v;
        }
    }
    poly
}

fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().unwrap().abs() == 0.0 {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return vec![];
    }
    let lead = c[deg];
    let mut comp = DMatrix::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    comp.complex_eigenvalues().iter().copied().collect()
}

fn accept(q: Complex64, x: f64, s: &EmpiricalSpectrum, a: AspectRatio) -> Option<SaddleSolution> {
    let thr = support_threshold(s);
    let res = residual(q, x, s, a);
    if !(res < RESIDUAL_TOL) {
        return None;
    }
    if q.im > thr {
        return Some(SaddleSolution {
            x,
            q0: q,
            residual: res,
            in_support: true,
        });
    }
    if q.im.abs() <= thr {
        let qr = Complex64::new(q.re, 0.0);
        let (_, g1, _) = g_funcs(qr, s, a).ok()?;
        if g1.re > 0.0 {
            return Some(SaddleSolution {
                x,
                q0: qr,
                residual: residual(qr, x, s, a),
                in_support: false,
            });
        }
    }
    None
}

/// Unique root of −x + g(q) = 0 with Im q > 0, or the real positive-slope
/// root outside the support.
pub fn solve_saddle(x: f64, s: &EmpiricalSpectrum, a: AspectRatio) -> Result<SaddleSolution> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::invalid(format!("evaluation point x = {x} must be positive")));
    }
    let fp = fixed_point(x, s, a);
    if let Some(q) = newton(fp, x, s, a) {
        if let Some(sol) = accept(q, x, s, a) {
            return Ok(sol);
        }
    }
    // Exhaustive fallback: all roots of the cleared polynomial, polished on
    // the rational function.
    let mut best: Option<SaddleSolution> = None;
    for r in polynomial_roots(&saddle_polynomial(x, s, a)) {
        let Some(q) = newton(r, x, s, a) else {
            continue;
        };
        if let Some(sol) = accept(q, x, s, a) {
            let better = match &best {
                None => true,
                Some(b) => sol.q0.im > b.q0.im,
            };
            if better {
                best = Some(sol);
            }
        }
    }
    best.ok_or_else(|| {
        Error::numeric(format!(
            "saddle solver failed at x = {x}: best iterate {fp}, residual {:e}",
            residual(fp, x, s, a)
        ))
    })
}

/// Macroscopic level density R₁(x) = Im q₀/(γ²π); zero outside the support.
pub fn density(x: f64, s: &EmpiricalSpectrum, a: AspectRatio) -> Result<f64> {
    let sol = solve_saddle(x, s, a)?;
    Ok(if sol.in_support {
        sol.q0.im / (a.gamma_sq() * PI)
    } else {
        0.0
    })
}

/// Density on a grid; grid points are independent and evaluated in parallel.
pub fn density_grid(xs: &[f64], s: &EmpiricalSpectrum, a: AspectRatio) -> Result<Vec<f64>> {
    crate::par::map(xs, |&x| density(x, s, a)).into_iter().collect()
}

/// c = √(2/|g″(q*)|)/(γ²π), so that R₁(x) ≈ c√|x − x_edge| inside the support.
pub fn edge_coefficient(
    _x_edge: f64,
    q_star: f64,
    s: &EmpiricalSpectrum,
    a: AspectRatio,
) -> Result<f64> {
    let (_, _, g2) = g_real(q_star, s, a)?;
    if g2.abs() < 1e-10 {
        return Err(Error::numeric(
            "multicritical edge (Pearcey regime), unsupported",
        ));
    }
    Ok((2.0 / g2.abs()).sqrt() / (a.gamma_sq() * PI))
}

/// Bisection for a sign change of g′ on [lo, hi], then Newton on g′.
fn critical_point(mut lo: f64, mut hi: f64, s: &EmpiricalSpectrum, a: AspectRatio) -> Result<f64> {
    let flo = g_real(lo, s, a)?.1;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = g_real(mid, s, a)?.1;
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut q = 0.5 * (lo + hi);
    for _ in 0..3 {
        let (_, g1, g2) = g_real(q, s, a)?;
        if g2 == 0.0 {
            break;
        }
        let next = q - g1 / g2;
        if !(next > lo - (hi - lo) && next < hi + (hi - lo)) {
            break;
        }
        q = next;
    }
    Ok(q)
}

fn soft_edge(q: f64, kind: EdgeKind, s: &EmpiricalSpectrum, a: AspectRatio) -> Result<Edge> {
    let x = g_real(q, s, a)?.0;
    Ok(Edge {
        x,
        kind,
        q_star: q,
        coeff: edge_coefficient(x, q, s, a).ok(),
    })
}

/// Zero or two zeros of g′ strictly between consecutive poles.
fn interior_critical_points(
    left: f64,
    right: f64,
    s: &EmpiricalSpectrum,
    a: AspectRatio,
) -> Result<Option<(f64, f64)>> {
    let span = right - left;
    // 64 probes, log-spaced towards both poles.
    let mut probes: Vec<f64> = Vec::with_capacity(64);
    for i in 0..32 {
        let u = 10f64.powf(-12.0 + 11.7 * i as f64 / 31.0);
        probes.push(left + span * u);
    }
    for i in (0..32).rev() {
        let u = 10f64.powf(-12.0 + 11.7 * i as f64 / 31.0);
        probes.push(right - span * u);
    }
    let vals: Vec<f64> = probes
        .iter()
        .map(|&q| g_real(q, s, a).map(|v| v.1))
        .collect::<Result<_>>()?;
    let (imax, _) = vals
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .unwrap();
    let mut qmax = probes[imax];
    let mut vmax = vals[imax];
    if vmax <= 0.0 {
        // Golden-section refinement of the maximum between the neighbours.
        let mut lo = probes[imax.saturating_sub(1)];
        let mut hi = probes[(imax + 1).min(probes.len() - 1)];
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = hi - r * (hi - lo);
            let d = lo + r * (hi - lo);
            if g_real(c, s, a)?.1 > g_real(d, s, a)?.1 {
                hi = d;
            } else {
                lo = c;
            }
        }
        qmax = 0.5 * (lo + hi);
        vmax = g_real(qmax, s, a)?.1;
        if vmax <= 0.0 {
            return Ok(None);
        }
    }
    let q_a = critical_point(probes[0], qmax, s, a)?;
    let q_b = critical_point(qmax, probes[63], s, a)?;
    Ok(Some((q_a, q_b)))
}

/// Support intervals from the real critical points of g.
pub fn support(s: &EmpiricalSpectrum, a: AspectRatio) -> Result<SpectralSupport> {
    let vals = s.values();
    let m = vals.len();
    let poles: Vec<f64> = vals.iter().map(|&l| -1.0 / l).collect();

    // Upper edge: unique zero of g′ in (−1/Λ_max, 0).
    let top = poles[m - 1];
    let q_up = critical_point(top * (1.0 - POLE_GUARD), top * 1e-12, s, a)?;
    let upper = soft_edge(q_up, EdgeKind::Upper, s, a)?;

    // Lower edge: unique zero in (−∞, −1/Λ_min) when γ² < 1.
    let hard = a.gamma_sq() >= 1.0;
    let lower = if hard {
        Edge {
            x: 0.0,
            kind: EdgeKind::Hard,
            q_star: f64::NAN,
            coeff: None,
        }
    } else {
        let bottom = poles[0];
        let mut far = 2.0 * bottom;
        while g_real(far, s, a)?.1 <= 0.0 {
            far *= 2.0;
            if far.abs() > 1e300 {
                return Err(Error::numeric("lower edge bracket failed"));
            }
        }
        let q_lo = critical_point(far, bottom * (1.0 + POLE_GUARD), s, a)?;
        soft_edge(q_lo, EdgeKind::Lower, s, a)?
    };

    let mut intervals = Vec::new();
    let mut cur_lower = lower;
    let mut first_value = 0;
    for k in 0..m.saturating_sub(1) {
        let left = poles[k] + POLE_GUARD * poles[k].abs();
        let right = poles[k + 1] - POLE_GUARD * poles[k + 1].abs();
        if let Some((q_a, q_b)) = interior_critical_points(left, right, s, a)? {
            let up = soft_edge(q_a, EdgeKind::Upper, s, a)?;
            let lo = soft_edge(q_b, EdgeKind::Lower, s, a)?;
            if lo.x > up.x {
                intervals.push(SupportInterval {
                    lower: cur_lower,
                    upper: up,
                    values: first_value..k + 1,
                });
                cur_lower = lo;
                first_value = k + 1;
            }
        }
    }
    intervals.push(SupportInterval {
        lower: cur_lower,
        upper,
        values: first_value..m,
    });
    Ok(SpectralSupport {
        intervals,
        hard_edge_at_origin: hard,
    })
}

/// ∫R₁ over the support, with x = lo + (hi−lo)(1−cos θ)/2 removing the
/// square-root (and 1/√x) endpoint behaviour.
pub fn total_weight(s: &EmpiricalSpectrum, a: AspectRatio, sup: &SpectralSupport) -> Result<f64> {
    let mut total = 0.0;
    for iv in &sup.intervals {
        let (lo, hi) = (iv.lower.x, iv.upper.x);
        let h = 0.5 * (hi - lo);
        let f = |th: f64| -> f64 {
            let x = lo + h * (1.0 - th.cos());
            if x <= 0.0 || x >= hi {
                return 0.0;
            }
            density(x, s, a).unwrap_or(f64::NAN) * h * th.sin()
        };
        total += crate::quad::integrate(f, 0.0, PI, 1e-9)?;
    }
    Ok(total)
}
