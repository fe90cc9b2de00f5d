//! Direct Monte Carlo sampling of W = C^{1/2}X/√n, chunked on-disk
//! persistence of eigenvalue samples, and the empirical statistics used to
//! compare against analytic curves (histograms, extremes, KS and TV distances).

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::CorrelationMatrix;

/// Samples per `chunk-%04d.bin` file.
pub const CHUNK_SAMPLES: usize = 10_000;

/// RNG for sample `k` of a run seeded with `seed`: one ChaCha stream per
/// sample, so results do not depend on how samples are spread over threads.
pub fn sample_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Precomputed C^{1/2} for repeated draws.
#[derive(Debug, Clone)]
pub struct WishartSampler {
    root: DMatrix<f64>,
    /// Diagonal of `root` when C is diagonal: the product then reduces to
    /// a row scaling with bit-identical results.
    diag: Option<Vec<f64>>,
    n: usize,
}

impl WishartSampler {
    pub fn new(c: &CorrelationMatrix, n: usize) -> Result<Self> {
        let p = c.dim();
        if n < p {
            return Err(Error::invalid(format!("need n ≥ p, got n = {n}, p = {p}")));
        }
        let eig = c.matrix().clone().symmetric_eigen();
        let v = &eig.eigenvectors;
        let d = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
        let root = v * DMatrix::from_diagonal(&d) * v.transpose();
        if !root.iter().all(|x| x.is_finite()) {
            return Err(Error::numeric("eigendecomposition of C failed"));
        }
        let m = c.matrix();
        let is_diag = (0..p).all(|i| (0..p).all(|j| i == j || m[(i, j)] == 0.0));
        let diag: Option<Vec<f64>> = is_diag.then(|| (0..p).map(|i| m[(i, i)].max(0.0).sqrt()).collect());
        let root = match &diag {
            Some(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
            None => root,
        };
        Ok(Self { root, diag, n })
    }

    pub fn dim(&self) -> usize {
        self.root.nrows()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Ascending eigenvalues of WWᵀ for one draw of X from `rng`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let p = self.dim();
        let x = DMatrix::from_fn(p, self.n, |_, _| StandardNormal.sample(rng));
        let w = match &self.diag {
            Some(d) => {
                let mut x = x;
                for (i, mut row) in x.row_iter_mut().enumerate() {
                    row *= d[i];
                }
                x
            }
            None => &self.root * x,
        };
        let wwt = (&w * w.transpose()) / self.n as f64;
        let mut e: Vec<f64> = wwt.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        for v in &mut e {
            if *v < 0.0 && *v >= -1e-10 {
                *v = 0.0;
            }
        }
        e
    }
}

/// One draw: ascending eigenvalues of WWᵀ, W = C^{1/2}X/√n.
pub fn sample_wishart_eigs(c: &CorrelationMatrix, n: usize, seed: u64) -> Result<Vec<f64>> {
    let s = WishartSampler::new(c, n)?;
    Ok(s.sample(&mut sample_rng(seed, 0)))
}

/// Ascending eigenvalues of a dim×dim GOE matrix (A + Aᵀ)/2: unit diagonal
/// variance, off-diagonal variance 1/2.
pub fn sample_goe_eigs(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let h: DMatrix<f64> = (&a + a.transpose()) * 0.5;
    let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMeta {
    /// FNV-1a hash of the entries of C, hex.
    pub c_hash: String,
    pub p: usize,
    pub n: usize,
    pub l: usize,
    pub count: usize,
    pub seed: u64,
    pub chunk_samples: usize,
}

/// `count` sorted eigenvalue arrays of length `dim`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueEnsemble {
    pub meta: EnsembleMeta,
    data: Vec<f64>,
}

impl EigenvalueEnsemble {
    pub fn from_samples(meta: EnsembleMeta, samples: Vec<Vec<f64>>) -> Result<Self> {
        if samples.len() != meta.count {
            return Err(Error::invalid("sample count does not match metadata"));
        }
        let dim = meta.p;
        let mut data = Vec::with_capacity(dim * samples.len());
        for s in samples {
            if s.len() != dim {
                return Err(Error::invalid("sample dimension does not match metadata"));
            }
            data.extend(s);
        }
        Ok(Self { meta, data })
    }

    pub fn dim(&self) -> usize {
        self.meta.p
    }

    pub fn count(&self) -> usize {
        self.meta.count
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.data[k * d..(k + 1) * d]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim())
    }

    /// Writes `meta.json` and `chunk-%04d.bin` (little-endian f64) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let meta = serde_json::to_string_pretty(&self.meta)
            .map_err(|e| Error::invalid(format!("serializing metadata: {e}")))?;
        let mp = dir.join("meta.json");
        fs::write(&mp, meta).map_err(|e| Error::io(format!("writing {}", mp.display()), e))?;
        let per = self.meta.chunk_samples.max(1) * self.dim();
        for (i, chunk) in self.data.chunks(per).enumerate() {
            write_chunk(&chunk_path(dir, i), chunk)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mp = dir.join("meta.json");
        let text =
            fs::read_to_string(&mp).map_err(|e| Error::io(format!("reading {}", mp.display()), e))?;
        let meta: EnsembleMeta = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: mp.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        let total = meta.count * meta.p;
        let mut data = Vec::with_capacity(total);
        let mut i = 0;
        while data.len() < total {
            let path = chunk_path(dir, i);
            let mut bytes = Vec::new();
            fs::File::open(&path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            if bytes.len() % 8 != 0 {
                return Err(Error::invalid(format!("{} is truncated", path.display())));
            }
            data.extend(
                bytes
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap())),
            );
            i += 1;
        }
        if data.len() != total {
            return Err(Error::invalid("ensemble chunks do not match metadata count"));
        }
        Ok(Self { meta, data })
    }

    /// One row per sample, eigenvalues ascending.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        let header: Vec<String> = (0..self.dim()).map(|i| format!("lambda_{i}")).collect();
        let wrap = |e: csv::Error| Error::invalid(format!("{}: {e}", path.display()));
        w.write_record(&header).map_err(wrap)?;
        for s in self.samples() {
            w.write_record(s.iter().map(|x| format!("{x:e}"))).map_err(wrap)?;
        }
        w.flush()
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

fn chunk_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("chunk-{i:04}.bin"))
}

fn write_chunk(path: &Path, values: &[f64]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(f);
    for v in values {
        w.write_all(&v.to_le_bytes())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn fnv1a(m: &DMatrix<f64>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in m.iter() {
        for b in x.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Draws `count` samples; sample k uses stream k of `seed`, so the result
/// is identical for any `workers`. Chunks are written to `out` as they
/// complete when a directory is given. `l` is recorded in the metadata only.
pub fn run_ensemble(
    c: &CorrelationMatrix,
    n: usize,
    l: usize,
    count: usize,
    seed: u64,
    workers: usize,
    out: Option<&Path>,
) -> Result<EigenvalueEnsemble> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let sampler = WishartSampler::new(c, n)?;
    let meta = EnsembleMeta {
        c_hash: fnv1a(c.matrix()),
        p: c.dim(),
        n,
        l,
        count,
        seed,
        chunk_samples: CHUNK_SAMPLES,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    let mut data = Vec::with_capacity(count * c.dim());
    for (ci, start) in (0..count).step_by(CHUNK_SAMPLES).enumerate() {
        let len = CHUNK_SAMPLES.min(count - start);
        let chunk = crate::par::map_range(len, workers, |i| {
            sampler.sample(&mut sample_rng(seed, (start + i) as u64))
        });
        let flat: Vec<f64> = chunk.into_iter().flatten().collect();
        if let Some(dir) = out {
            write_chunk(&chunk_path(dir, ci), &flat)?;
        }
        data.extend(flat);
    }
    let e = EigenvalueEnsemble { meta, data };
    if let Some(dir) = out {
        let mp = dir.join("meta.json");
        let text = serde_json::to_string_pretty(&e.meta)
            .map_err(|err| Error::invalid(format!("serializing metadata: {err}")))?;
        fs::write(&mp, text).map_err(|err| Error::io(format!("writing {}", mp.display()), err))?;
    }
    Ok(e)
}

/// Unit-integral histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramDensity {
    pub edges: Vec<f64>,
    pub heights: Vec<f64>,
    pub counts: Vec<u64>,
}

impl HistogramDensity {
    pub fn bins(&self) -> usize {
        self.heights.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Height of the bin containing x (0 outside the range).
    pub fn at(&self, x: f64) -> f64 {
        let (lo, hi) = (self.edges[0], *self.edges.last().unwrap());
        if !(x >= lo && x <= hi) {
            return 0.0;
        }
        let i = self.edges.partition_point(|&e| e <= x).saturating_sub(1);
        self.heights[i.min(self.bins() - 1)]
    }

    /// Total-variation distance ½∫|h − f| to an analytic density, with f
    /// averaged over each bin and its mass outside the range counted fully.
    pub fn tv_distance_to(&self, f: impl Fn(f64) -> f64, outside_mass: f64) -> f64 {
        let mut tv = 0.5 * outside_mass.abs();
        for (i, w) in self.edges.windows(2).enumerate() {
            let mass = crate::quad::gl_integrate(&f, w[0], w[1], 16);
            tv += 0.5 * (self.heights[i] * (w[1] - w[0]) - mass).abs();
        }
        tv
    }

    /// Total-variation distance to a histogram on the same bin edges.
    pub fn tv_distance(&self, other: &HistogramDensity) -> Result<f64> {
        if self.edges.len() != other.edges.len()
            || self
                .edges
                .iter()
                .zip(&other.edges)
                .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
        {
            return Err(Error::invalid("histograms have different bin edges"));
        }
        let w = self.widths();
        Ok(0.5
            * self
                .heights
                .iter()
                .zip(&other.heights)
                .zip(&w)
                .map(|((a, b), w)| (a - b).abs() * w)
                .sum::<f64>())
    }
}

/// Unit-normalized histogram of `values` on `range` (defaults to the data
/// range); values outside the range are dropped before normalizing.
pub fn histogram(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<HistogramDensity> {
    if bins == 0 {
        return Err(Error::invalid("bins must be at least 1"));
    }
    if values.is_empty() {
        return Err(Error::invalid("no values retained for histogram"));
    }
    let (lo, hi) = match range {
        Some(r) => r,
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        }
    };
    if !(hi > lo) {
        return Err(Error::invalid("histogram range is empty"));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    for &v in values {
        if v < lo || v > hi {
            continue;
        }
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::invalid("no values inside the histogram range"));
    }
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let heights = counts
        .iter()
        .map(|&c| c as f64 / (total as f64 * width))
        .collect();
    Ok(HistogramDensity {
        edges,
        heights,
        counts,
    })
}

/// Histogram of all eigenvalues after removing the `exclude_top` largest
/// and `exclude_bottom` smallest of each sample.
pub fn histogram_density(
    e: &EigenvalueEnsemble,
    bins: usize,
    range: Option<(f64, f64)>,
    exclude_top: usize,
    exclude_bottom: usize,
) -> Result<HistogramDensity> {
    if exclude_top + exclude_bottom >= e.dim() {
        return Err(Error::invalid("outlier exclusion removes every eigenvalue"));
    }
    let keep = e.dim() - exclude_top;
    let values: Vec<f64> = e.samples().flat_map(|s| s[exclude_bottom..keep].iter().copied()).collect();
    histogram(&values, bins, range)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Largest,
    Smallest,
}

/// Per sample, the extreme eigenvalue at the requested end after removing
/// the `exclude` outermost ones there (outliers).
pub fn extreme_samples(e: &EigenvalueEnsemble, which: Extreme, exclude: usize) -> Result<Vec<f64>> {
    if exclude >= e.dim() {
        return Err(Error::invalid("exclusion count must be below the matrix dimension"));
    }
    let idx = match which {
        Extreme::Largest => e.dim() - 1 - exclude,
        Extreme::Smallest => exclude,
    };
    Ok(e.samples().map(|s| s[idx]).collect())
}

/// Zero mean, unit variance by sample moments; `mirror` also flips the sign
/// (used for smallest eigenvalues).
pub fn standardize(samples: &[f64], mirror: bool) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::invalid("need at least two samples to standardize"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::invalid("zero variance"));
    }
    let sd = var.sqrt();
    let sign = if mirror { -1.0 } else { 1.0 };
    Ok(samples.iter().map(|x| sign * (x - mean) / sd).collect())
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS distance needs nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample KS statistic against a continuous CDF.
pub fn ks_distance_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("KS distance needs nonempty samples"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// Empirical CDF of `samples` evaluated at `t`.
pub fn empirical_cdf(sorted: &[f64], t: f64) -> f64 {
    sorted.partition_point(|&x| x <= t) as f64 / sorted.len() as f64
}
