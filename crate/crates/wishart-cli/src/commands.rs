//! Subcommand implementations. Each writes its manifest first, then its CSV
//! outputs and, with `--plot`, plot data and scripts.

use std::path::Path;

use wishart::gapcdf::gap_cdf_grid;
use wishart::localstats::{
    bulk_window, goe_reference_spacings, poisson_spacings, spacing_histogram, tw_approx, wigner_surmise, TwReference,
};
use wishart::montecarlo::{
    extreme_samples, histogram, histogram_density, ks_distance, ks_distance_cdf, run_ensemble, standardize,
    EigenvalueEnsemble, Extreme, HistogramDensity,
};
use wishart::outliers::{classify_outliers, OutlierReport};
use wishart::quad::gl_integrate;
use wishart::saddle::{density, density_grid, support, EdgeKind, SpectralSupport};
use wishart::spectrum::{
    degenerate_spectrum, estimate_correlation, load_spectrum, load_time_series, one_factor_series, write_spectrum,
    OneFactorConfig, TimeSeriesMatrix,
};
use wishart::{AspectRatio, CorrelationMatrix, EmpiricalSpectrum};

use crate::config::Manifest;
use crate::output::{ensure_dir, linspace, matrix_table, num, parse_blocks, parse_grid, parse_range, Plot, Table};
use crate::{
    AspectArgs, Cli, Command, CompareArgs, DensityArgs, ExcludeArgs, ExtremesArgs, FactorArgs, Failure, GapCdfArgs,
    HistArgs, IngestArgs, LocalStatsArgs, OutArgs, OutlierArgs, SimulateArgs, SourceArgs, SpectrumArgs, Which,
};

type Res<T> = Result<T, Failure>;

/// Floor below which an estimated correlation spectrum counts as singular.
const SPECTRUM_FLOOR: f64 = 1e-12;

pub fn run(cli: Cli, manifest: Manifest) -> Res<()> {
    match cli.command {
        Command::Density(a) => cmd_density(a, &manifest),
        Command::Support(a) => cmd_support(a, &manifest),
        Command::Outliers(a) => cmd_outliers(a, &manifest),
        Command::Simulate(a) => cmd_simulate(a, &manifest),
        Command::Hist(a) => cmd_hist(a, &manifest),
        Command::Extremes(a) => cmd_extremes(a, &manifest),
        Command::GapCdf(a) => cmd_gap_cdf(a, &manifest),
        Command::LocalStats(a) => cmd_local_stats(a, &manifest),
        Command::CompareDegeneracy(a) => cmd_compare(a, &manifest),
        Command::Ingest(a) => cmd_ingest(a, &manifest),
    }
}

fn start(out: &OutArgs, manifest: &Manifest, workers: Option<usize>) -> Res<()> {
    if let Some(w) = workers.filter(|&w| w > 0) {
        // Sizes the global pool before its first use.
        std::env::set_var("RAYON_NUM_THREADS", w.to_string());
    }
    ensure_dir(&out.out)?;
    manifest.write(&out.out)
}

fn aspect(a: &AspectArgs, s: &EmpiricalSpectrum) -> Res<AspectRatio> {
    Ok(match (a.gamma_sq, a.n) {
        (Some(g), _) => AspectRatio::new(g)?,
        (None, Some(n)) => AspectRatio::from_dims(s.effective_p(), n)?,
        (None, None) => return Err(Failure::Usage("one of --gamma-sq or --n is required".into())),
    })
}

fn spectrum_meta(t: &mut Table, cmd: &str, path: &Path, s: &EmpiricalSpectrum, a: AspectRatio) {
    t.meta("command", cmd)
        .meta("spectrum", path.display())
        .meta("p", s.effective_p())
        .meta("distinct", s.distinct())
        .meta("gamma_sq", num(a.gamma_sq()));
}

fn edge_kind(k: EdgeKind) -> &'static str {
    match k {
        EdgeKind::Lower => "lower",
        EdgeKind::Upper => "upper",
        EdgeKind::Hard => "hard",
    }
}

/// Support padded by 10% on both sides (not below zero).
fn padded_support(sup: &SpectralSupport) -> (f64, f64) {
    let (lo, hi) = (sup.lowest(), sup.highest());
    let pad = 0.1 * (hi - lo);
    ((lo - pad).max(0.0), hi + pad)
}

/// R₁ on a grid that may reach x ≤ 0, where the continuous part of the
/// density vanishes (it diverges at a hard edge at the origin).
fn density_on_grid(xs: &[f64], s: &EmpiricalSpectrum, a: AspectRatio) -> Res<Vec<f64>> {
    let pos: Vec<f64> = xs.iter().copied().filter(|&x| x > 0.0).collect();
    let mut r = density_grid(&pos, s, a)?.into_iter();
    let hard = a.gamma_sq() == 1.0;
    Ok(xs
        .iter()
        .map(|&x| match x {
            x if x > 0.0 => r.next().unwrap_or(f64::NAN),
            x if x == 0.0 && hard => f64::INFINITY,
            _ => 0.0,
        })
        .collect())
}

fn cmd_density(a: DensityArgs, m: &Manifest) -> Res<()> {
    let b = &a.base;
    start(&b.out, m, None)?;
    let s = load_spectrum(&b.spectrum)?;
    let asp = aspect(&b.aspect, &s)?;
    let xs = match &a.grid {
        Some(g) => parse_grid(g)?,
        None => {
            let (lo, hi) = padded_support(&support(&s, asp)?);
            linspace(lo, hi, 400)
        }
    };
    let r1 = density_on_grid(&xs, &s, asp)?;
    let mut t = Table::new(&["x", "density"]);
    spectrum_meta(&mut t, "density", &b.spectrum, &s, asp);
    for (x, r) in xs.iter().zip(&r1) {
        t.row_f64(&[*x, *r]);
    }
    t.write(&b.out.out.join("density.csv"))?;
    if b.out.plot {
        Plot {
            name: "density",
            title: "level density",
            xlabel: "x",
            ylabel: "R1(x)",
            x: &xs,
            ys: vec![("analytic", &r1)],
            steps: false,
        }
        .emit(&b.out.out)?;
    }
    Ok(())
}

fn cmd_support(a: SpectrumArgs, m: &Manifest) -> Res<()> {
    start(&a.out, m, None)?;
    let s = load_spectrum(&a.spectrum)?;
    let asp = aspect(&a.aspect, &s)?;
    let sup = support(&s, asp)?;
    let weight = wishart::saddle::total_weight(&s, asp, &sup)?;
    let mut t = Table::new(&[
        "interval",
        "lower",
        "upper",
        "lower_kind",
        "upper_kind",
        "lower_coeff",
        "upper_coeff",
        "lambda_min",
        "lambda_max",
    ]);
    spectrum_meta(&mut t, "support", &a.spectrum, &s, asp);
    t.meta("total_weight", num(weight))
        .meta("hard_edge_at_origin", sup.hard_edge_at_origin);
    let coeff = |c: Option<f64>| c.map(num).unwrap_or_default();
    for (i, iv) in sup.intervals.iter().enumerate() {
        let vals = &s.values()[iv.values.clone()];
        t.row(vec![
            i.to_string(),
            num(iv.lower.x),
            num(iv.upper.x),
            edge_kind(iv.lower.kind).into(),
            edge_kind(iv.upper.kind).into(),
            coeff(iv.lower.coeff),
            coeff(iv.upper.coeff),
            vals.first().map(|&v| num(v)).unwrap_or_default(),
            vals.last().map(|&v| num(v)).unwrap_or_default(),
        ]);
    }
    t.write(&a.out.out.join("support.csv"))?;
    if a.out.plot {
        let (lo, hi) = padded_support(&sup);
        let xs = linspace(lo, hi, 400);
        let r1 = density_grid(&xs, &s, asp)?;
        Plot {
            name: "support",
            title: "level density and its support",
            xlabel: "x",
            ylabel: "R1(x)",
            x: &xs,
            ys: vec![("analytic", &r1)],
            steps: false,
        }
        .emit(&a.out.out)?;
    }
    Ok(())
}

fn outlier_table(reports: &[OutlierReport], s: &EmpiricalSpectrum) -> Table {
    let mut t = Table::new(&[
        "index",
        "lambda_o",
        "multiplicity",
        "x0",
        "width",
        "condition",
        "valid",
        "separated",
    ]);
    for r in reports {
        t.row(vec![
            r.index.to_string(),
            num(r.lambda_o),
            (s.multiplicities()[r.index] * s.degeneracy_l()).to_string(),
            num(r.x0),
            r.width.map(num).unwrap_or_default(),
            num(r.condition),
            r.valid.to_string(),
            r.separated.to_string(),
        ]);
    }
    t
}

fn cmd_outliers(a: OutlierArgs, m: &Manifest) -> Res<()> {
    let b = &a.base;
    start(&b.out, m, None)?;
    let s = load_spectrum(&b.spectrum)?;
    let asp = aspect(&b.aspect, &s)?;
    let reports = classify_outliers(&s, asp, a.margin)?;
    let mut t = outlier_table(&reports, &s);
    spectrum_meta(&mut t, "outliers", &b.spectrum, &s, asp);
    t.meta("margin", num(a.margin));
    t.write(&b.out.out.join("outliers.csv"))?;
    if b.out.plot {
        let (lo, hi) = padded_support(&support(&s, asp)?);
        let hi = reports.iter().map(|r| r.x0 * 1.1).fold(hi, f64::max);
        let xs = linspace(lo, hi, 600);
        let r1 = density_grid(&xs, &s, asp)?;
        Plot {
            name: "outliers",
            title: "level density including outlier islands",
            xlabel: "x",
            ylabel: "R1(x)",
            x: &xs,
            ys: vec![("analytic", &r1)],
            steps: false,
        }
        .emit(&b.out.out)?;
    }
    Ok(())
}

/// The population matrix selected by the source flags, with a label for
/// the metadata and the time series it came from, if any.
fn source_matrix(src: &SourceArgs, f: &FactorArgs) -> Res<(CorrelationMatrix, String, Option<TimeSeriesMatrix>)> {
    if let Some(p) = &src.spectrum {
        let s = load_spectrum(p)?;
        return Ok((s.to_matrix(), format!("spectrum:{}", p.display()), None));
    }
    if let Some(p) = &src.correlation {
        let c = CorrelationMatrix::new(crate::output::read_matrix(p)?)?;
        return Ok((c, format!("correlation:{}", p.display()), None));
    }
    if let Some(p) = &src.series {
        let ts = load_time_series(p)?;
        let c = estimate_correlation(&ts)?;
        return Ok((c, format!("series:{}", p.display()), Some(ts)));
    }
    if let Some(blocks) = &src.one_factor {
        let seed = f
            .factor_seed
            .ok_or_else(|| Failure::Usage("--one-factor needs --factor-seed".into()))?;
        let cfg = OneFactorConfig {
            block_sizes: parse_blocks(blocks)?,
            n: f.length,
            s_noise: f.s_noise,
            seed,
        };
        let ts = one_factor_series(&cfg)?;
        let c = estimate_correlation(&ts)?;
        let label = format!("one-factor:{blocks};length={};s_noise={};seed={seed}", f.length, num(f.s_noise));
        return Ok((c, label, Some(ts)));
    }
    Err(Failure::Usage(
        "one of --spectrum, --correlation, --series or --one-factor is required".into(),
    ))
}

/// Eigenvalues above / below the bulk for one copy of Λ: multiplicities of
/// the classified outliers.
fn outlier_counts(s: &EmpiricalSpectrum, reports: &[OutlierReport]) -> (usize, usize) {
    let mid = s.mean();
    let mut above = 0;
    let mut below = 0;
    for r in reports {
        let k = s.multiplicities()[r.index] * s.degeneracy_l();
        if r.lambda_o > mid {
            above += k;
        } else {
            below += k;
        }
    }
    (above, below)
}

fn ensemble_meta(t: &mut Table, cmd: &str, e: &EigenvalueEnsemble) {
    t.meta("command", cmd)
        .meta("dim", e.meta.p)
        .meta("n", e.meta.n)
        .meta("degeneracy", e.meta.l)
        .meta("samples", e.meta.count)
        .meta("seed", e.meta.seed)
        .meta("c_hash", &e.meta.c_hash);
}

fn cmd_simulate(a: SimulateArgs, m: &Manifest) -> Res<()> {
    start(&a.out, m, Some(a.workers))?;
    if a.degeneracy == 0 {
        return Err(Failure::Usage("--degeneracy must be at least 1".into()));
    }
    let (c, label, _) = source_matrix(&a.source, &a.factor)?;
    let sampled = if a.degeneracy > 1 { c.kron_identity(a.degeneracy)? } else { c.clone() };
    let dir = a.out.out.join("ensemble");
    let e = run_ensemble(
        &sampled,
        a.n * a.degeneracy,
        a.degeneracy,
        a.samples,
        a.seed,
        a.workers,
        Some(&dir),
    )?;
    // The base spectrum lets later analyses overlay analytic curves.
    match c.spectrum(SPECTRUM_FLOOR) {
        Ok(s) => write_spectrum(&s, &dir.join("spectrum.txt"))?,
        Err(err) => eprintln!("wishart: note: no spectrum.txt written ({err})"),
    }
    let dim = e.dim();
    let count = e.count() as f64;
    let mut mean = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    for sample in e.samples() {
        for (k, &v) in sample.iter().enumerate() {
            mean[k] += v;
            sq[k] += v * v;
        }
    }
    let mut t = Table::new(&["k", "mean", "sd"]);
    ensemble_meta(&mut t, "simulate", &e);
    t.meta("source", &label);
    let ks: Vec<f64> = (0..dim).map(|k| k as f64).collect();
    for k in 0..dim {
        mean[k] /= count;
        let var = (sq[k] / count - mean[k] * mean[k]).max(0.0);
        sq[k] = var.sqrt();
        t.row(vec![k.to_string(), num(mean[k]), num(sq[k])]);
    }
    t.write(&a.out.out.join("eigenvalue_moments.csv"))?;
    if a.csv {
        e.write_csv(&a.out.out.join("eigenvalues.csv"))?;
    }
    if a.out.plot {
        Plot {
            name: "eigenvalue_moments",
            title: "ordered eigenvalues: mean and standard deviation",
            xlabel: "k",
            ylabel: "lambda_k",
            x: &ks,
            ys: vec![("mean", &mean), ("sd", &sq)],
            steps: false,
        }
        .emit(&a.out.out)?;
    }
    Ok(())
}

/// Ensemble plus its base spectrum (if `simulate` could write one) and the
/// matching analytic inputs Λ⊗1_l, γ² = dim/n.
struct Loaded {
    e: EigenvalueEnsemble,
    analytic: Option<(EmpiricalSpectrum, AspectRatio)>,
}

fn load_ensemble(dir: &Path) -> Res<Loaded> {
    let e = EigenvalueEnsemble::load(dir)?;
    let sp = dir.join("spectrum.txt");
    let analytic = if sp.exists() {
        let s = degenerate_spectrum(&load_spectrum(&sp)?, e.meta.l)?;
        Some((s, AspectRatio::from_dims(e.meta.p, e.meta.n)?))
    } else {
        None
    };
    Ok(Loaded { e, analytic })
}

/// Eigenvalues to drop at the (top, bottom) of each sample.
fn exclusions(x: &ExcludeArgs, l: &Loaded) -> Res<(usize, usize)> {
    if !x.exclude_outliers {
        return Ok((x.exclude_top, x.exclude_bottom));
    }
    if x.exclude_top > 0 || x.exclude_bottom > 0 {
        return Err(Failure::Usage(
            "--exclude-outliers cannot be combined with explicit exclusion counts".into(),
        ));
    }
    let (s, a) = l.analytic.as_ref().ok_or_else(|| {
        Failure::Usage("--exclude-outliers needs spectrum.txt in the ensemble directory".into())
    })?;
    Ok(outlier_counts(s, &classify_outliers(s, *a, x.margin)?))
}

fn hist_rows(t: &mut Table, h: &HistogramDensity, extra: &[&[f64]]) {
    for (i, c) in h.centers().iter().enumerate() {
        let mut row = vec![num(*c), num(h.edges[i]), num(h.edges[i + 1]), num(h.heights[i]), h.counts[i].to_string()];
        row.extend(extra.iter().map(|col| num(col[i])));
        t.row(row);
    }
}

fn cmd_hist(a: HistArgs, m: &Manifest) -> Res<()> {
    start(&a.out, m, None)?;
    let l = load_ensemble(&a.ensemble)?;
    let (top, bottom) = exclusions(&a.exclude, &l)?;
    let range = a.range.as_deref().map(parse_range).transpose()?;
    let h = histogram_density(&l.e, a.bins, range, top, bottom)?;
    let centers = h.centers();
    // Analytic R₁ renormalized to the eigenvalues kept per sample.
    let analytic = match &l.analytic {
        Some((s, asp)) => {
            let dim = l.e.dim() as f64;
            let keep = dim - (top + bottom) as f64;
            Some(density_grid(&centers, s, *asp)?.into_iter().map(|r| r * dim / keep).collect::<Vec<f64>>())
        }
        None => None,
    };
    let mut header = vec!["center", "lower", "upper", "density", "count"];
    if analytic.is_some() {
        header.push("analytic");
    }
    let mut t = Table::new(&header);
    ensemble_meta(&mut t, "hist", &l.e);
    t.meta("exclude_top", top).meta("exclude_bottom", bottom);
    let extra: Vec<&[f64]> = analytic.iter().map(|v| v.as_slice()).collect();
    hist_rows(&mut t, &h, &extra);
    t.write(&a.out.out.join("hist.csv"))?;
    if a.out.plot {
        let mut ys = vec![("Monte Carlo", h.heights.as_slice())];
        if let Some(v) = &analytic {
            ys.push(("analytic", v.as_slice()));
        }
        Plot {
            name: "hist",
            title: "bulk eigenvalue density",
            xlabel: "x",
            ylabel: "density",
            x: &centers,
            ys,
            steps: true,
        }
        .emit(&a.out.out)?;
    }
    Ok(())
}

/// Mean and variance of the normalized [`tw_approx`], used to compare
/// empirically standardized samples with it.
fn tw_moments(tw: &TwReference) -> (f64, f64) {
    let mean = gl_integrate(|t| t * tw_approx(t), -8.93, 12.0, 400) / tw.mass;
    let var = gl_integrate(|t| (t - mean).powi(2) * tw_approx(t), -8.93, 12.0, 400) / tw.mass;
    (mean, var)
}

fn cmd_extremes(a: ExtremesArgs, m: &Manifest) -> Res<()> {
    start(&a.out, m, None)?;
    let l = load_ensemble(&a.ensemble)?;
    let (top, bottom) = exclusions(&a.exclude, &l)?;
    let (which, exclude, mirror) = match a.which {
        Which::Largest => (Extreme::Largest, top, false),
        Which::Smallest => (Extreme::Smallest, bottom, true),
    };
    let values = extreme_samples(&l.e, which, exclude)?;
    let z = standardize(&values, mirror)?;
    let tw = TwReference::new();
    let (tm, tv) = tw_moments(&tw);
    let sd = tv.sqrt();
    let ks = ks_distance_cdf(&z, |t| tw.cdf(tm + sd * t))?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;

    let mut t = Table::new(&["sample", "value", "standardized"]);
    ensemble_meta(&mut t, "extremes", &l.e);
    t.meta("which", if mirror { "smallest" } else { "largest" })
        .meta("exclude", exclude)
        .meta("mean", num(mean))
        .meta("sd", num(var.sqrt()))
        .meta("ks_tw", num(ks));
    for (i, (v, s)) in values.iter().zip(&z).enumerate() {
        t.row(vec![i.to_string(), num(*v), num(*s)]);
    }
    t.write(&a.out.out.join("extremes.csv"))?;

    let h = histogram(&z, a.bins, Some((-5.0, 5.0)))?;
    let centers = h.centers();
    let twd: Vec<f64> = centers.iter().map(|&x| sd * tw_approx(tm + sd * x) / tw.mass).collect();
    let mut th = Table::new(&["center", "lower", "upper", "density", "count", "tw"]);
    ensemble_meta(&mut th, "extremes", &l.e);
    th.meta("ks_tw", num(ks));
    hist_rows(&mut th, &h, &[&twd]);
    th.write(&a.out.out.join("extremes_hist.csv"))?;
    if a.out.plot {
        Plot {
            name: "extremes",
            title: "standardized extreme eigenvalue vs Tracy-Widom",
            xlabel: "standardized value",
            ylabel: "density",
            x: &centers,
            ys: vec![("Monte Carlo", &h.heights), ("Tracy-Widom", &twd)],
            steps: true,
        }
        .emit(&a.out.out)?;
    }
    Ok(())
}

/// A t beyond which E(t) is within a tiny amount of one: a generous
/// multiple of the Marchenko–Pastur edge of the largest Λ, widened for
/// small n.
fn default_t_max(lambda_max: f64, p: usize, n: usize) -> f64 {
    let g = (p as f64 / (2 * n) as f64).sqrt();
    2.0 * lambda_max * (1.0 + g).powi(2) * (1.0 + 6.0 / (2.0 * n as f64).sqrt())
}

fn cmd_gap_cdf(a: GapCdfArgs, m: &Manifest) -> Res<()> {
    start(&a.out, m, Some(a.workers))?;
    let s = load_spectrum(&a.spectrum)?;
    let lambda = s.expanded();
    if a.points < 2 {
        return Err(Failure::Usage("--points must be at least 2".into()));
    }
    let t_max = a.t_max.unwrap_or_else(|| default_t_max(s.max(), lambda.len(), a.n));
    let t_min = a.t_min.unwrap_or(t_max / a.points as f64);
    if !(t_min > 0.0 && t_max > t_min) {
        return Err(Failure::Usage(format!("need 0 < t-min < t-max, got {t_min} and {t_max}")));
    }
    let grid = linspace(t_min, t_max, a.points);
    let table = gap_cdf_grid(&grid, &lambda, a.n)?;
    let mut t = Table::new(&["t", "E"]);
    t.meta("command", "gap-cdf")
        .meta("spectrum", a.spectrum.display())
        .meta("p", lambda.len())
        .meta("n", a.n)
        .meta("definition", "E(t) = P(2 lambda_max <= t) for W W^T/(2n) with C = Lambda (x) 1_2")
        .meta("max_precision_bits", table.points.iter().map(|p| p.precision).max().unwrap_or(0));
    let ts = table.t();
    let es = table.values();
    for (x, e) in ts.iter().zip(&es) {
        t.row_f64(&[*x, *e]);
    }
    t.write(&a.out.out.join("gap_cdf.csv"))?;
    if a.out.plot {
        Plot {
            name: "gap_cdf",
            title: "largest-eigenvalue distribution",
            xlabel: "t",
            ylabel: "E(t)",
            x: &ts,
            ys: vec![("E", &es)],
            steps: false,
        }
        .emit(&a.out.out)?;
    }
    Ok(())
}

/// Density maximum on the support interval carrying the most eigenvalues.
fn density_peak(s: &EmpiricalSpectrum, a: AspectRatio) -> Res<f64> {
    let sup = support(s, a)?;
    let bulk = sup
        .intervals
        .iter()
        .max_by_key(|iv| s.multiplicities()[iv.values.clone()].iter().sum::<usize>())
        .ok_or_else(|| Failure::Numeric("empty support".into()))?;
    let xs = linspace(bulk.lower.x, bulk.upper.x, 402);
    let inner = &xs[1..xs.len() - 1];
    let r = density_grid(inner, s, a)?;
    let i = (0..r.len()).max_by(|&i, &j| r[i].total_cmp(&r[j])).unwrap_or(0);
    Ok(inner[i])
}

fn cmd_local_stats(a: LocalStatsArgs, m: &Manifest) -> Res<()> {
    start(&a.out, m, Some(a.workers))?;
    let l = load_ensemble(&a.ensemble)?;
    let (s, asp) = l.analytic.as_ref().ok_or_else(|| {
        Failure::Usage("local-stats needs spectrum.txt in the ensemble directory".into())
    })?;
    let x = match a.x {
        Some(x) => x,
        None => density_peak(s, *asp)?,
    };
    let scale = density(x, s, *asp)? * s.effective_p() as f64;
    let mut spacings = Vec::new();
    for sample in l.e.samples() {
        spacings.extend(bulk_window(sample, x, scale)?.spacings());
    }
    let h = spacing_histogram(&spacings, a.bins)?;
    let goe = goe_reference_spacings(a.goe_dim, a.goe_draws, a.seed, a.workers);
    let hg = spacing_histogram(&goe, a.bins)?;
    let ks_goe = ks_distance(&spacings, &goe)?;
    let ks_poisson = ks_distance(&spacings, &poisson_spacings(spacings.len(), a.seed.wrapping_add(1)))?;
    let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
    let centers = h.centers();
    let wig: Vec<f64> = centers.iter().map(|&c| wigner_surmise(c)).collect();

    let mut t = Table::new(&["center", "lower", "upper", "density", "count", "goe", "wigner"]);
    ensemble_meta(&mut t, "local-stats", &l.e);
    t.meta("x", num(x))
        .meta("scale", num(scale))
        .meta("spacings", spacings.len())
        .meta("mean_spacing", num(mean))
        .meta("goe_spacings", goe.len())
        .meta("ks_goe", num(ks_goe))
        .meta("ks_poisson", num(ks_poisson));
    hist_rows(&mut t, &h, &[&hg.heights, &wig]);
    t.write(&a.out.out.join("spacings.csv"))?;
    if a.out.plot {
        Plot {
            name: "spacings",
            title: "unfolded nearest-neighbour spacings",
            xlabel: "s",
            ylabel: "P(s)",
            x: &centers,
            ys: vec![("Wishart", &h.heights), ("GOE", &hg.heights), ("Wigner surmise", &wig)],
            steps: true,
        }
        .emit(&a.out.out)?;
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs, m: &Manifest) -> Res<()> {
    start(&a.out, m, Some(a.workers))?;
    let l = a.degeneracy;
    if l < 2 {
        return Err(Failure::Usage("--degeneracy must be at least 2 for a comparison".into()));
    }
    let (c, label, _) = source_matrix(&a.source, &a.factor)?;
    let s = c.spectrum(SPECTRUM_FLOOR)?;
    let asp = AspectRatio::from_dims(c.dim(), a.n)?;
    let (up, dn) = outlier_counts(&s, &classify_outliers(&s, asp, a.margin)?);

    let single = run_ensemble(&c, a.n, 1, a.samples, a.seed, a.workers, None)?;
    let multi = run_ensemble(&c.kron_identity(l)?, l * a.n, l, a.samples, a.seed.wrapping_add(1), a.workers, None)?;

    // Common bulk range from the l = 1 ensemble.
    let lo = single.samples().map(|x| x[dn]).fold(f64::INFINITY, f64::min);
    let hi = single.samples().map(|x| x[x.len() - 1 - up]).fold(f64::NEG_INFINITY, f64::max);
    let h1 = histogram_density(&single, a.bins, Some((lo, hi)), up, dn)?;
    let hl = histogram_density(&multi, a.bins, Some((lo, hi)), l * up, l * dn)?;
    let tv = h1.tv_distance(&hl)?;
    let std_ext = |e: &EigenvalueEnsemble, w: Extreme, k: usize| -> Res<Vec<f64>> {
        Ok(standardize(&extreme_samples(e, w, k)?, w == Extreme::Smallest)?)
    };
    let max1 = std_ext(&single, Extreme::Largest, up)?;
    let maxl = std_ext(&multi, Extreme::Largest, l * up)?;
    let min1 = std_ext(&single, Extreme::Smallest, dn)?;
    let minl = std_ext(&multi, Extreme::Smallest, l * dn)?;
    let ks_max = ks_distance(&max1, &maxl)?;
    let ks_min = ks_distance(&min1, &minl)?;

    let dir = &a.out.out;
    let mut t = Table::new(&["metric", "value"]);
    t.meta("command", "compare-degeneracy")
        .meta("source", &label)
        .meta("p", c.dim())
        .meta("n", a.n)
        .meta("degeneracy", l)
        .meta("samples", a.samples)
        .meta("seed", a.seed);
    for (k, v) in [
        ("bulk_tv", num(tv)),
        ("ks_lambda_max", num(ks_max)),
        ("ks_lambda_min", num(ks_min)),
        ("outliers_above", up.to_string()),
        ("outliers_below", dn.to_string()),
    ] {
        t.row(vec![k.to_string(), v]);
    }
    t.write(&dir.join("comparison.csv"))?;

    let lcol = format!("density_l{l}");
    let mut th = Table::new(&["center", "lower", "upper", "density_l1", "count_l1", &lcol]);
    th.meta("command", "compare-degeneracy").meta("bulk_tv", num(tv));
    hist_rows(&mut th, &h1, &[&hl.heights]);
    th.write(&dir.join("hist_overlay.csv"))?;

    let range = Some((-5.0, 5.0));
    let bins = 60;
    let e = [
        histogram(&max1, bins, range)?,
        histogram(&maxl, bins, range)?,
        histogram(&min1, bins, range)?,
        histogram(&minl, bins, range)?,
    ];
    let names = [
        "lambda_max_l1".to_string(),
        format!("lambda_max_l{l}"),
        "lambda_min_l1".to_string(),
        format!("lambda_min_l{l}"),
    ];
    let mut header = vec!["center"];
    header.extend(names.iter().map(String::as_str));
    let mut te = Table::new(&header);
    te.meta("command", "compare-degeneracy")
        .meta("standardization", "zero mean, unit variance; smallest eigenvalues mirrored")
        .meta("ks_lambda_max", num(ks_max))
        .meta("ks_lambda_min", num(ks_min));
    let centers = e[0].centers();
    for (i, c) in centers.iter().enumerate() {
        let mut row = vec![num(*c)];
        row.extend(e.iter().map(|h| num(h.heights[i])));
        te.row(row);
    }
    te.write(&dir.join("extremes_overlay.csv"))?;

    if a.out.plot {
        let bc = h1.centers();
        Plot {
            name: "hist_overlay",
            title: "bulk density: C vs C (x) 1_l",
            xlabel: "x",
            ylabel: "density",
            x: &bc,
            ys: vec![("l = 1", &h1.heights), (&lcol, &hl.heights)],
            steps: true,
        }
        .emit(dir)?;
        Plot {
            name: "extremes_overlay",
            title: "standardized extreme eigenvalues",
            xlabel: "standardized value",
            ylabel: "density",
            x: &centers,
            ys: names.iter().zip(&e).map(|(n, h)| (n.as_str(), h.heights.as_slice())).collect(),
            steps: true,
        }
        .emit(dir)?;
    }
    Ok(())
}

fn cmd_ingest(a: IngestArgs, m: &Manifest) -> Res<()> {
    start(&a.out, m, None)?;
    if a.source.series.is_none() && a.source.one_factor.is_none() {
        return Err(Failure::Usage("ingest reads --series or generates --one-factor".into()));
    }
    let (c, label, ts) = source_matrix(&a.source, &a.factor)?;
    let ts = ts.expect("series-backed sources carry their series");
    let dir = &a.out.out;
    if a.source.one_factor.is_some() {
        let d = ts.data();
        let names: Vec<String> = (0..d.ncols()).map(|j| format!("t{j}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut t = Table::new(&refs);
        t.meta("command", "ingest").meta("source", &label);
        for r in 0..d.nrows() {
            t.row_f64(&d.row(r).iter().copied().collect::<Vec<f64>>());
        }
        t.write(&dir.join("series.csv"))?;
    }
    let mut tc = matrix_table(c.matrix());
    tc.meta("command", "ingest").meta("source", &label);
    tc.write(&dir.join("correlation.csv"))?;

    let eig = c.eigenvalues();
    let mut te = Table::new(&["k", "eigenvalue"]);
    te.meta("command", "ingest")
        .meta("source", &label)
        .meta("p", ts.rows())
        .meta("n", ts.cols());
    for (k, v) in eig.iter().enumerate() {
        te.row(vec![k.to_string(), num(*v)]);
    }
    te.write(&dir.join("spectrum.csv"))?;

    match c.spectrum(SPECTRUM_FLOOR) {
        Ok(s) => {
            write_spectrum(&s, &dir.join("spectrum.txt"))?;
            let asp = AspectRatio::from_dims(ts.rows(), ts.cols())?;
            let reports = classify_outliers(&s, asp, a.margin)?;
            let mut to = outlier_table(&reports, &s);
            to.meta("command", "ingest")
                .meta("source", &label)
                .meta("gamma_sq", num(asp.gamma_sq()))
                .meta("margin", num(a.margin));
            to.write(&dir.join("outliers.csv"))?;
        }
        Err(err) => eprintln!("wishart: note: spectrum.txt and outliers.csv skipped ({err})"),
    }
    if a.out.plot {
        let ks: Vec<f64> = (0..eig.len()).map(|k| k as f64).collect();
        Plot {
            name: "spectrum",
            title: "eigenvalues of the estimated correlation matrix",
            xlabel: "k",
            ylabel: "eigenvalue",
            x: &ks,
            ys: vec![("eigenvalue", eig)],
            steps: false,
        }
        .emit(dir)?;
    }
    Ok(())
}
