//! Multiprecision evaluation of the skew-orthogonal functions, the bulk
//! double integral G and the reduced p×p kernel.
//!
//! Every quantity here is a finite sum of terms that cancel heavily, so all
//! arithmetic runs at a caller-chosen binary precision `prec`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::mp::Mp;
use super::norm::{gamma_half, skew_norm};

/// Gauss–Legendre nodes and weights on [0, 1] computed to `prec` bits.
fn gauss_legendre_mp(count: usize, prec: usize) -> Vec<(Mp, Mp)> {
    let eval = |x: &Mp| -> (Mp, Mp) {
        // Returns (P_N(x), P_N'(x)) through the three-term recurrence.
        let mut p0 = Mp::one(prec);
        let mut p1 = x.clone();
        for k in 2..=count as i64 {
            let p2 = ((x * &p1).mul_i(2 * k - 1) - p0.mul_i(k - 1)).div_i(k);
            p0 = p1;
            p1 = p2;
        }
        let dp = (x * &p1 - &p0).mul_i(count as i64) / (x * x - Mp::one(prec));
        (p1, dp)
    };
    let eval_f64 = |x: f64| -> (f64, f64) {
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=count {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        (p1, count as f64 * (x * p1 - p0) / (x * x - 1.0))
    };
    (1..=count)
        .map(|i| {
            let mut g = (std::f64::consts::PI * (i as f64 - 0.25) / (count as f64 + 0.5)).cos();
            for _ in 0..6 {
                let (p, dp) = eval_f64(g);
                g -= p / dp;
            }
            let mut x = Mp::from_f64(g, prec);
            let mut dp = eval(&x).1;
            for _ in 0..12 {
                let (p, d) = eval(&x);
                let dx = &p / &d;
                x = &x - &dx;
                dp = d;
                if dx.is_zero() || dx.log2_abs() < -(prec as f64) + 4.0 {
                    dp = eval(&x).1;
                    break;
                }
            }
            let one = Mp::one(prec);
            let u = (&one - &x).div_i(2);
            let w = ((&one - &(&x * &x)) * &dp * &dp).recip();
            (u, w)
        })
        .collect()
}

fn binom(m: usize, k: usize) -> i64 {
    let mut c: i64 = 1;
    for i in 0..k {
        c = c * (m - i) as i64 / (i + 1) as i64;
    }
    c
}

/// ρ on s ∈ [0, 1] for the pair index `l` (m = n − l − 1).
fn rho_lo(s: &Mp, l: usize, m: usize, prec: usize) -> Mp {
    let one = Mp::one(prec);
    let oms = &one - s;
    let half = s.div_i(2);
    let half_sq = &half * &half;
    let mut pw = half.powi(2 * l as i64 + 1);
    let mut tot = Mp::zero(prec);
    for k in 0..=m {
        // (s/2)^{2l+1+2k} / (l + k + 1/2)
        let t = (&pw * &oms.powi((m - k) as i64)).mul_i(binom(m, k) * 2).div_i(2 * (l + k) as i64 + 1);
        tot = tot + t;
        pw = &pw * &half_sq;
    }
    tot.mul_i(2)
}

/// ρ on s = 1 + v² ∈ [1, 2], written in v to keep every power integral.
fn rho_hi(v: &Mp, l: usize, m: usize, prec: usize) -> Mp {
    let one = Mp::one(prec);
    let c = v * v;
    let b = {
        let d = &one - &c;
        (&d * &d).div_i(4)
    };
    if b < c.div_i(2) {
        // Expansion in B/c, away from s = 1.
        let a2 = 2 * l as i64 - 1; // 2a
        let mut binc = Mp::one(prec); // binom(a, j)
        let inv_c = c.recip();
        let mut cpow = v.powi(a2); // c^{a-j}
        let mut bpow = b.powi(m as i64 + 1);
        let mut tot = Mp::zero(prec);
        let mut j: i64 = 0;
        loop {
            let t = (&binc * &cpow * &bpow).div_i(m as i64 + j + 1);
            tot = &tot + &t;
            if j > 2 && (t.is_zero() || t.log2_abs() < tot.log2_abs() - prec as f64) {
                break;
            }
            // binom(a, j+1) = binom(a, j)·(a − j)/(j + 1)
            binc = binc.mul_i(a2 - 2 * j).div_i(2 * (j + 1));
            cpow = &cpow * &inv_c;
            bpow = &bpow * &b;
            j += 1;
            if j > 100_000 {
                break;
            }
        }
        return tot.mul_i(2);
    }
    let top = (&one + &c).div_i(2);
    let top_sq = &top * &top;
    let mut tpow = top.powi(2 * l as i64 + 1);
    let mut vpow = v.powi(2 * l as i64 + 1);
    let neg_c = -&c;
    let mut tot = Mp::zero(prec);
    for k in 0..=m {
        let diff = &tpow - &vpow;
        let t = (&diff * &neg_c.powi((m - k) as i64)).mul_i(binom(m, k) * 2).div_i(2 * (l + k) as i64 + 1);
        tot = tot + t;
        tpow = &tpow * &top_sq;
        vpow = &vpow * &c;
    }
    tot.mul_i(2)
}

/// Node tables shared by every evaluation at one (n, precision, node count).
pub(crate) struct Tables {
    pub prec: usize,
    pub n: usize,
    /// Exponential abscissae s_i for the R-transform (lower half then upper half).
    pub s: Vec<Mp>,
    /// Per pair index l: weights multiplying e^{−x s_i} (normalising constant folded in).
    pub weights: Vec<Vec<Mp>>,
    /// Per pair index l: skew norm.
    pub h: Vec<Mp>,
    /// Per pair index l: π^{−(2l+2)}.
    pub pi_pow: Vec<Mp>,
    /// Per node: 2y·w/(1 − y²), and ω = 1 − y².
    pub g_fac: Vec<Mp>,
    pub omega: Vec<Mp>,
    /// 1/Γ(n + 1/2).
    pub inv_gamma_kappa: Mp,
}

impl Tables {
    fn build(n: usize, prec: usize, count: usize) -> Self {
        let nodes = gauss_legendre_mp(count, prec);
        let one = Mp::one(prec);
        let mut s: Vec<Mp> = nodes.iter().map(|(u, _)| u.clone()).collect();
        s.extend(nodes.iter().map(|(v, _)| &one + &(v * v)));
        let pi = Mp::pi(prec);
        let mut weights = Vec::with_capacity(n);
        let mut h = Vec::with_capacity(n);
        let mut pi_pow = Vec::with_capacity(n);
        for l in 0..n {
            let m = n - l - 1;
            // c = π^{2l+2}·4^l / (2·(2l)!)
            let mut fact = Mp::one(prec);
            for i in 1..=(2 * l) as i64 {
                fact = fact.mul_i(i);
            }
            let pl = pi.powi(2 * l as i64 + 2);
            let c = (&pl * &Mp::from_i64(4, prec).powi(l as i64)) / fact.mul_i(2);
            let mut w: Vec<Mp> = nodes.iter().map(|(u, wt)| &c * &(wt * &rho_lo(u, l, m, prec))).collect();
            w.extend(nodes.iter().map(|(v, wt)| &c * &(wt * &v.mul_i(2)) * rho_hi(v, l, m, prec)));
            weights.push(w);
            h.push(skew_norm(l, n, prec));
            pi_pow.push(pl.recip());
        }
        let omega: Vec<Mp> = nodes.iter().map(|(y, _)| &one - &(y * y)).collect();
        let g_fac = nodes.iter().zip(&omega).map(|((y, w), om)| (y * w).mul_i(2) / om).collect();
        Self {
            prec,
            n,
            s,
            weights,
            h,
            pi_pow,
            g_fac,
            omega,
            inv_gamma_kappa: gamma_half(2 * n as i64 + 1, prec).recip(),
        }
    }

    /// Cached tables; node counts are rounded up to a multiple of 16.
    pub fn get(n: usize, prec: usize, count: usize) -> Arc<Tables> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize, usize), Arc<Tables>>>> = OnceLock::new();
        let count = count.div_ceil(16) * 16;
        let key = (n, prec, count);
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().expect("table cache").get(&key) {
            return t.clone();
        }
        let t = Arc::new(Tables::build(n, prec, count));
        let mut guard = cache.lock().expect("table cache");
        if guard.len() > 64 {
            guard.clear();
        }
        guard.entry(key).or_insert(t).clone()
    }
}

/// Node count sufficient for `prec` bits when the largest argument is `x_max`.
pub(crate) fn node_count(prec: usize, x_max: f64) -> usize {
    (prec as f64 / 3.0).ceil() as usize + (8.0 * x_max.max(0.0).sqrt()).ceil() as usize + 16
}

/// Exponentials e^{−x s_i} for every abscissa of the R-transform.
pub(crate) struct ExpRow {
    e: Vec<Mp>,
    se: Vec<Mp>,
}

impl ExpRow {
    pub fn new(t: &Tables, x: &Mp) -> Self {
        let e: Vec<Mp> = t.s.iter().map(|s| (-(x * s)).exp()).collect();
        let se = e.iter().zip(&t.s).map(|(e, s)| e * s).collect();
        Self { e, se }
    }
}

/// (R_l(x), R_l'(x)).
pub(crate) fn r_transform(t: &Tables, l: usize, row: &ExpRow) -> (Mp, Mp) {
    let mut r = Mp::zero(t.prec);
    let mut d = Mp::zero(t.prec);
    for ((w, e), se) in t.weights[l].iter().zip(&row.e).zip(&row.se) {
        r = r + w * e;
        d = d - w * se;
    }
    (r, d)
}

/// Even and odd members (real parts) of pair `l` at `x`.
pub(crate) fn pair_values(t: &Tables, l: usize, x: &Mp, row: &ExpRow) -> (Mp, Mp) {
    let (r, d) = r_transform(t, l, row);
    let mut pref = &t.h[l] * &t.pi_pow[l];
    if l % 2 == 0 {
        pref = -pref;
    }
    let even = &pref * &r;
    let odd = -(&pref * &(x * &(&r + &d)));
    (even, odd)
}

/// Reciprocal tables 1/j and 1/(κ + j) reused by every φ series.
pub(crate) struct PhiSeries {
    prec: usize,
    kappa2: i64,
    inv_j: Vec<Mp>,
    inv_kj: Vec<Mp>,
}

impl PhiSeries {
    pub fn new(n: usize, prec: usize) -> Self {
        let kappa2 = 2 * n as i64 + 1;
        let mut s = Self { prec, kappa2, inv_j: vec![Mp::zero(prec)], inv_kj: vec![] };
        s.extend(1);
        s
    }

    fn extend(&mut self, upto: usize) {
        while self.inv_kj.len() <= upto {
            let j = self.inv_kj.len() as i64;
            self.inv_kj.push(Mp::from_i64(2, self.prec).div_i(self.kappa2 + 2 * j));
            if j > 0 {
                self.inv_j.push(Mp::one(self.prec).div_i(j));
            }
        }
    }

    /// φ_x(r) = e^{−rx} r^κ/Γ(κ) Σ_j (rx)^j / (j!(κ+j)), κ = n + 1/2.
    pub fn phi(&mut self, t: &Tables, x: &Mp, r: &Mp) -> Mp {
        let prec = self.prec;
        let z = r * x;
        let zf = z.to_f64();
        let mut term = Mp::one(prec);
        let mut tot = self.inv_kj[0].clone();
        let mut j = 0usize;
        loop {
            j += 1;
            self.extend(j);
            term = &term * &z * &self.inv_j[j];
            let tt = &term * &self.inv_kj[j];
            tot = &tot + &tt;
            if j as f64 > zf && (tt.is_zero() || tt.log2_abs() < tot.log2_abs() - prec as f64 - 6.0) {
                break;
            }
        }
        let rk = r.powi(t.n as i64) * r.sqrt();
        (-z).exp() * rk * &t.inv_gamma_kappa * tot
    }
}

/// φ at r = 1 ± ω_i for every G node.
pub(crate) struct PhiRow {
    plus: Vec<Mp>,
    minus: Vec<Mp>,
}

impl PhiRow {
    pub fn new(t: &Tables, series: &mut PhiSeries, x: &Mp) -> Self {
        let one = Mp::one(t.prec);
        let plus = t.omega.iter().map(|om| series.phi(t, x, &(&one + om))).collect();
        let minus = t.omega.iter().map(|om| series.phi(t, x, &(&one - om))).collect();
        Self { plus, minus }
    }
}

/// Real bulk double integral G(x₁, x₂) from cached φ rows.
pub(crate) fn g_value(t: &Tables, a: &PhiRow, b: &PhiRow) -> Mp {
    let mut tot = Mp::zero(t.prec);
    for i in 0..t.omega.len() {
        let br = &a.plus[i] * &b.minus[i] - &a.minus[i] * &b.plus[i];
        tot = tot + &t.g_fac[i] * &br;
    }
    -(Mp::pi(t.prec).mul_i(4) * tot)
}
