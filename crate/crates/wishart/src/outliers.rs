//! Outliers: eigenvalues of WWᵀ split off from the bulk by large Λₒ.
//!
//! For an outlier value Λₒ of multiplicity mₒ (an mₒ-fold degenerate outlier,
//! as in Λ⊗1_l) the remaining values enter through
//!
//! * x₀  = Λₒ(1 + (γ²/p) Σ_{j≠o} mⱼΛⱼ/(Λₒ−Λⱼ)),
//! * Δx₀ = 2γ√(1 − (γ²/p) Σ_{j≠o} mⱼΛⱼ²/(Λₒ−Λⱼ)²) · Λₒ √(mₒ/p),
//!
//! which reduce to the usual single-spike expressions for mₒ = 1 and are
//! unchanged under Λ → Λ⊗1_l in either representation of the degeneracy.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::montecarlo::{histogram, sample_goe_eigs, sample_rng};
use crate::saddle::support;
use crate::spectrum::{AspectRatio, EmpiricalSpectrum};

/// Default separation margin, in units of Δx₀.
pub const DEFAULT_MARGIN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierReport {
    pub lambda_o: f64,
    /// Index of Λₒ among the distinct values.
    pub index: usize,
    pub x0: f64,
    /// Δx₀, present iff `valid`.
    pub width: Option<f64>,
    /// (γ²/p) Σ_{j≠o} mⱼΛⱼ²/(Λₒ−Λⱼ)²; the expansion is valid iff < 1.
    pub condition: f64,
    pub valid: bool,
    /// x₀ lies outside the bulk support by more than margin·Δx₀.
    pub separated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierWidth {
    pub width: Option<f64>,
    pub condition: f64,
    pub valid: bool,
}

fn check(s: &EmpiricalSpectrum, o: usize) -> Result<()> {
    if o >= s.distinct() {
        return Err(Error::invalid(format!(
            "outlier index {o} out of range ({} distinct values)",
            s.distinct()
        )));
    }
    if s.p() < 2 {
        return Err(Error::invalid("outlier expansion needs p ≥ 2"));
    }
    let lo = s.values()[o];
    for (j, &lj) in s.values().iter().enumerate() {
        if j != o && (lj - lo).abs() <= 1e-12 * lo {
            return Err(Error::invalid("degenerate outlier unsupported by expansion"));
        }
    }
    Ok(())
}

fn others(s: &EmpiricalSpectrum, o: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
    s.values()
        .iter()
        .zip(s.multiplicities())
        .enumerate()
        .filter(move |(j, _)| *j != o)
        .map(|(_, (&l, &m))| (l, m as f64))
}

/// Predicted position x₀ of the outlier generated by the distinct value `o`.
pub fn outlier_position(s: &EmpiricalSpectrum, o: usize, a: AspectRatio) -> Result<f64> {
    check(s, o)?;
    let lo = s.values()[o];
    let sum: f64 = others(s, o).map(|(l, m)| m * l / (lo - l)).sum();
    Ok(lo * (1.0 + a.gamma_sq() / s.p() as f64 * sum))
}

/// Fluctuation width Δx₀ and the validity condition.
pub fn outlier_width(s: &EmpiricalSpectrum, o: usize, a: AspectRatio) -> Result<OutlierWidth> {
    check(s, o)?;
    let lo = s.values()[o];
    let p = s.p() as f64;
    let cond = a.gamma_sq() / p * others(s, o).map(|(l, m)| m * l * l / (lo - l).powi(2)).sum::<f64>();
    let valid = cond < 1.0;
    let mo = s.multiplicities()[o] as f64;
    let width = valid.then(|| 2.0 * a.gamma() * (1.0 - cond).sqrt() * lo * (mo / p).sqrt());
    Ok(OutlierWidth {
        width,
        condition: cond,
        valid,
    })
}

fn report(
    s: &EmpiricalSpectrum,
    o: usize,
    a: AspectRatio,
    bulk_edge: f64,
    above: bool,
    margin: f64,
) -> Result<OutlierReport> {
    let x0 = outlier_position(s, o, a)?;
    let w = outlier_width(s, o, a)?;
    let separated = match w.width {
        Some(dx) if above => x0 - bulk_edge > margin * dx,
        Some(dx) => bulk_edge - x0 > margin * dx,
        None => false,
    };
    Ok(OutlierReport {
        lambda_o: s.values()[o],
        index: o,
        x0,
        width: w.width,
        condition: w.condition,
        valid: w.valid,
        separated,
    })
}

/// Outliers above and below the bulk, sorted by x₀ descending.
///
/// At finite p the support of R₁ for the full spectrum contains a small
/// island around every isolated Λ, so the bulk is found by peeling: the
/// extreme distinct value is a candidate when its x₀ (computed against all
/// other eigenvalues, including other outliers) lies beyond the support of
/// the remaining values; peeling continues inward until a candidate fails.
/// Values carrying at least half of the remaining weight are never peeled.
pub fn classify_outliers(s: &EmpiricalSpectrum, a: AspectRatio, margin: f64) -> Result<Vec<OutlierReport>> {
    let mut out = Vec::new();
    for above in [true, false] {
        let mut rest = s.clone();
        let mut removed = 0usize;
        loop {
            if rest.distinct() < 2 {
                break;
            }
            let local = if above { rest.distinct() - 1 } else { 0 };
            if 2 * rest.multiplicities()[local] >= rest.p() {
                break;
            }
            let Some(next) = rest.without(local) else {
                break;
            };
            let sup = support(&next, a)?;
            let o = if above { s.distinct() - 1 - removed } else { removed };
            let x0 = outlier_position(s, o, a)?;
            let outside = if above {
                x0 > sup.highest()
            } else {
                x0 < sup.lowest() && !sup.hard_edge_at_origin
            };
            if !outside {
                break;
            }
            let edge = if above { sup.highest() } else { sup.lowest() };
            out.push(report(s, o, a, edge, above, margin)?);
            rest = next;
            removed += 1;
        }
    }
    out.sort_by(|x, y| y.x0.total_cmp(&x.x0));
    out.dedup_by(|x, y| x.index == y.index);
    Ok(out)
}

/// CSV with columns lambda_o, x0, width, valid, separated.
pub fn write_outlier_csv(reports: &[OutlierReport], path: &Path) -> Result<()> {
    let wrap = |e: csv::Error| Error::invalid(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(["lambda_o", "x0", "width", "valid", "separated"])
        .map_err(wrap)?;
    for r in reports {
        w.write_record([
            r.lambda_o.to_string(),
            r.x0.to_string(),
            r.width.map(|x| x.to_string()).unwrap_or_default(),
            r.valid.to_string(),
            r.separated.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Size of the GOE whose standardized level density shapes an l-fold
/// degenerate outlier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoeSize {
    Finite(usize),
    /// l → ∞: Wigner semicircle.
    Infinite,
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Level density of the 2×2 GOE (unit diagonal variance), unnormalized
/// scale: ρ(λ) = e^{−λ²/2}√(2π)·E|λ−Z| / (4√π), Z standard normal.
fn goe2_density(lambda: f64) -> f64 {
    let mean_abs = lambda * (2.0 * std_normal_cdf(lambda) - 1.0) + 2.0 * std_normal_pdf(lambda);
    (-0.5 * lambda * lambda).exp() * (2.0 * PI).sqrt() * mean_abs / (4.0 * PI.sqrt())
}

/// Zero-mean, unit-variance l×l GOE level density on `grid`. Closed forms
/// for l = 1, 2 and l = ∞; for l ≥ 3 a Monte Carlo histogram of `draws`
/// matrices (200 bins) read off at the grid points.
pub fn outlier_shape_reference(l: GoeSize, grid: &[f64], draws: usize, seed: u64) -> Result<Vec<f64>> {
    match l {
        GoeSize::Finite(0) => Err(Error::invalid("degeneracy must be positive")),
        GoeSize::Finite(1) => Ok(grid.iter().map(|&x| std_normal_pdf(x)).collect()),
        GoeSize::Finite(2) => {
            // Eigenvalue variance of the 2×2 GOE is 3/2.
            let sd = 1.5f64.sqrt();
            Ok(grid.iter().map(|&y| sd * goe2_density(sd * y)).collect())
        }
        GoeSize::Finite(l) => {
            let h = goe_mc_histogram(l, draws, seed)?;
            Ok(grid.iter().map(|&y| h.at(y)).collect())
        }
        GoeSize::Infinite => Ok(grid
            .iter()
            .map(|&y| if y.abs() < 2.0 { (4.0 - y * y).sqrt() / (2.0 * PI) } else { 0.0 })
            .collect()),
    }
}

/// Histogram (200 bins on [−4, 4]) of standardized l×l GOE eigenvalues.
pub fn goe_mc_histogram(l: usize, draws: usize, seed: u64) -> Result<crate::montecarlo::HistogramDensity> {
    if draws == 0 {
        return Err(Error::invalid("need at least one draw"));
    }
    // E tr H² / l = (l + 1)/2 for unit diagonal variance.
    let sd = ((l as f64 + 1.0) / 2.0).sqrt();
    let vals: Vec<f64> = crate::par::map_range(draws, 0, |k| {
        let mut rng = sample_rng(seed, k as u64);
        sample_goe_eigs(l, &mut rng)
    })
    .into_iter()
    .flatten()
    .map(|x| x / sd)
    .collect();
    // Keep the full sample normalization: mass beyond ±4 is negligible but
    // counted by dropping it before normalizing.
    histogram(&vals, 200, Some((-4.0, 4.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{degenerate_as_multiplicities, degenerate_spectrum};

    fn spike() -> (EmpiricalSpectrum, AspectRatio) {
        (
            EmpiricalSpectrum::new(&[(4.0, 1), (1.0, 39)]).unwrap(),
            AspectRatio::new(0.4).unwrap(),
        )
    }

    #[test]
    fn single_spike_position_and_width() {
        let (s, a) = spike();
        let o = s.distinct() - 1;
        assert!((outlier_position(&s, o, a).unwrap() - 4.52).abs() < 1e-12);
        let w = outlier_width(&s, o, a).unwrap();
        assert!(w.valid);
        assert!((w.width.unwrap() - 0.7824).abs() < 1e-4, "{:?}", w);
    }

    #[test]
    fn close_spikes_are_invalid() {
        let s = EmpiricalSpectrum::new(&[(5.0, 1), (5.05, 1), (1.0, 38)]).unwrap();
        let a = AspectRatio::new(0.4).unwrap();
        for o in [1, 2] {
            let w = outlier_width(&s, o, a).unwrap();
            assert!(!w.valid && w.width.is_none() && w.condition > 1.0);
        }
        let r = classify_outliers(&s, a, DEFAULT_MARGIN).unwrap();
        assert!(r.iter().all(|r| !r.valid && !r.separated));
    }

    #[test]
    fn large_spike_limits() {
        let s = EmpiricalSpectrum::new(&[(1e8, 1), (1.0, 39)]).unwrap();
        let a = AspectRatio::new(0.4).unwrap();
        let x0 = outlier_position(&s, 1, a).unwrap();
        assert!((x0 / 1e8 - 1.0).abs() < 1e-6);
        let w = outlier_width(&s, 1, a).unwrap().width.unwrap();
        let lim = 2.0 * a.gamma() * 1e8 / 40f64.sqrt();
        assert!((w / lim - 1.0).abs() < 1e-6);
    }

    #[test]
    fn classification() {
        let (s, a) = spike();
        let r = classify_outliers(&s, a, DEFAULT_MARGIN).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].x0 - 4.52).abs() < 1e-12);
        assert!(r[0].valid && r[0].separated);
        let flat = EmpiricalSpectrum::uniform(1.0, 40).unwrap();
        assert!(classify_outliers(&flat, a, DEFAULT_MARGIN).unwrap().is_empty());
    }

    #[test]
    fn small_sample_case_flags_two_invalid() {
        // Λ ≈ (4.44, 2.17, 2.03); the other nine share the remaining trace
        // of a 12×12 correlation matrix, n = 40.
        let rest = (12.0 - 4.44 - 2.17 - 2.03) / 9.0;
        let s = EmpiricalSpectrum::new(&[(4.44, 1), (2.17, 1), (2.03, 1), (rest, 9)]).unwrap();
        let a = AspectRatio::from_dims(12, 40).unwrap();
        let r = classify_outliers(&s, a, DEFAULT_MARGIN).unwrap();
        assert!(r[0].valid);
        let invalid: Vec<_> = r.iter().filter(|r| !r.valid).map(|r| r.lambda_o).collect();
        assert_eq!(invalid, vec![2.17, 2.03]);
    }

    #[test]
    fn scaling_and_degeneracy_invariance() {
        let s = EmpiricalSpectrum::new(&[(6.0, 1), (3.5, 1), (1.0, 20), (0.7, 10)]).unwrap();
        let a = AspectRatio::new(0.3).unwrap();
        let o = 3;
        let x0 = outlier_position(&s, o, a).unwrap();
        let w = outlier_width(&s, o, a).unwrap().width.unwrap();
        let c = 2.5;
        let sc = s.scaled(c).unwrap();
        assert!((outlier_position(&sc, o, a).unwrap() - c * x0).abs() < 1e-12 * c * x0);
        assert!((outlier_width(&sc, o, a).unwrap().width.unwrap() - c * w).abs() < 1e-12 * c * w);
        for l in [2, 3, 5] {
            for d in [degenerate_spectrum(&s, l).unwrap(), degenerate_as_multiplicities(&s, l).unwrap()] {
                assert!((outlier_position(&d, o, a).unwrap() - x0).abs() <= 1e-12 * x0);
                let wd = outlier_width(&d, o, a).unwrap().width.unwrap();
                assert!((wd - w).abs() <= 1e-12 * w);
            }
        }
    }

    #[test]
    fn position_monotone_in_spike() {
        let a = AspectRatio::new(0.4).unwrap();
        let mut last = f64::NEG_INFINITY;
        for k in 0..50 {
            let lo = 3.0 + 0.2 * k as f64;
            let s = EmpiricalSpectrum::new(&[(lo, 1), (1.0, 39)]).unwrap();
            let x0 = outlier_position(&s, 1, a).unwrap();
            assert!(x0 > last);
            last = x0;
        }
    }

    #[test]
    fn validity_is_sign_test() {
        let a = AspectRatio::new(0.5).unwrap();
        for k in 0..40 {
            let lo = 1.2 + 0.1 * k as f64;
            let s = EmpiricalSpectrum::new(&[(lo, 1), (1.0, 9)]).unwrap();
            let w = outlier_width(&s, 1, a).unwrap();
            assert_eq!(w.valid, w.condition < 1.0);
            assert_eq!(w.valid, w.width.is_some());
        }
    }

    #[test]
    fn shape_references() {
        let grid: Vec<f64> = (0..161).map(|i| -4.0 + 0.05 * i as f64).collect();
        let g1 = outlier_shape_reference(GoeSize::Finite(1), &grid, 0, 0).unwrap();
        assert!((g1[80] - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        let semi = outlier_shape_reference(GoeSize::Infinite, &grid, 0, 0).unwrap();
        assert!((semi[80] - 1.0 / PI).abs() < 1e-15);
        // GOE₂ closed form: unit mass, zero mean, unit variance.
        let f = |y: f64| outlier_shape_reference(GoeSize::Finite(2), &[y], 0, 0).unwrap()[0];
        let m0 = crate::quad::integrate(f, -12.0, 12.0, 1e-12).unwrap();
        let m2 = crate::quad::integrate(|y| y * y * f(y), -12.0, 12.0, 1e-12).unwrap();
        assert!((m0 - 1.0).abs() < 1e-10 && (m2 - 1.0).abs() < 1e-10);
        // ... and its own Monte Carlo histogram within 2% of the peak height.
        let h = goe_mc_histogram(2, 1_000_000, 7).unwrap();
        let exact: Vec<f64> = h.centers().iter().map(|&c| f(c)).collect();
        let peak = exact.iter().copied().fold(0.0, f64::max);
        let sup = h.heights.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(sup < 0.02 * peak, "sup {sup} peak {peak}");
        let g3 = outlier_shape_reference(GoeSize::Finite(3), &grid, 200_000, 1).unwrap();
        let mass: f64 = g3.iter().sum::<f64>() * 0.05;
        assert!((mass - 1.0).abs() < 0.02);
    }
}
