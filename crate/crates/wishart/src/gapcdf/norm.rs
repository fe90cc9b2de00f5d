//! Normalisation constants of the skew-orthogonal system and of the gap
//! probability, in log-f64 and in multiprecision form.

use statrs::function::gamma::ln_gamma;

use super::mp::Mp;

/// Γ(k/2) for a positive integer `k`, exact up to the precision of √π.
pub(crate) fn gamma_half(k: i64, p: usize) -> Mp {
    assert!(k > 0, "gamma_half needs a positive argument");
    let mut g = if k % 2 == 0 { Mp::one(p) } else { Mp::pi(p).sqrt() };
    // Γ(z+1) = zΓ(z), stepping z by one from Γ(1) or Γ(1/2).
    let mut twice = if k % 2 == 0 { 2 } else { 1 };
    while twice < k {
        g = g.mul_i(twice).div_i(2);
        twice += 2;
    }
    g
}

/// One factor 2√π Γ(a/2) / Γ((2n−a+2)/2) of the product normaliser.
fn zr_factor(a: i64, n: i64, p: usize) -> Mp {
    let root_pi = Mp::pi(p).sqrt();
    (gamma_half(a, p) * root_pi).mul_i(2) / gamma_half(2 * n - a + 2, p)
}

/// ∏_{a=lo}^{hi} of the normaliser factors.
pub(crate) fn zr_range(lo: i64, hi: i64, n: i64, p: usize) -> Mp {
    let mut z = Mp::one(p);
    for a in lo..=hi {
        z = z * zr_factor(a, n, p);
    }
    z
}

/// Skew norm of the j-th pair in the gauge used by the kernel assembly.
pub(crate) fn skew_norm(j: usize, n: usize, p: usize) -> Mp {
    zr_range(2 * j as i64 + 1, 2 * j as i64 + 2, n as i64, p)
}

/// ln of the inverse partial normaliser 1/K̃_j = ∏_{a=1}^j 2^{2n−4a+5}π(2a)!/(2n−2a+1)!.
pub fn log_inv_ktilde(j: usize, n: usize) -> f64 {
    let n = n as f64;
    (1..=j)
        .map(|a| {
            let a = a as f64;
            (2.0 * n - 4.0 * a + 5.0) * std::f64::consts::LN_2 + std::f64::consts::PI.ln()
                + ln_gamma(2.0 * a + 1.0)
                - ln_gamma(2.0 * n - 2.0 * a + 2.0)
        })
        .sum()
}

/// ln h_j with h_j = K̃_j/K̃_{j+1} = 2^{2n−4j+1}π(2j+2)!/(2n−2j−1)!.
///
/// Requires `j < n`.
pub fn log_h_norm(j: usize, n: usize) -> f64 {
    assert!(j < n, "h_norm needs j < n");
    log_inv_ktilde(j + 1, n) - log_inv_ktilde(j, n)
}

/// Skew-orthogonality constant h_j of the pair (q̂_{2j}, q̂_{2j+1}).
pub fn h_norm(j: usize, n: usize) -> f64 {
    log_h_norm(j, n).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_half_values() {
        let p = 128;
        assert!((gamma_half(1, p).to_f64() - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half(2, p).to_f64(), 1.0);
        assert_eq!(gamma_half(10, p).to_f64(), 24.0);
        let g = gamma_half(7, p).to_f64();
        assert!((g - 15.0 / 8.0 * std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn h_closed_form() {
        assert!((h_norm(0, 2) - 32.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
        // h_1 at n = 3: 2^{3}·π·4!/3!
        assert!((h_norm(1, 3) / (8.0 * std::f64::consts::PI * 24.0 / 6.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_of_h_telescopes() {
        let n = 9;
        for j in 1..n {
            let s: f64 = (0..j).map(|i| log_h_norm(i, n)).sum();
            assert!((s - log_inv_ktilde(j, n)).abs() < 1e-10);
        }
    }

    #[test]
    fn skew_norm_relates_to_h_by_pair_factor() {
        // In the kernel gauge the pair norm differs from h_j by (2j+1)(2j+2).
        for n in [4usize, 7, 12] {
            for j in 0..n {
                let s = skew_norm(j, n, 192).to_f64();
                let h = h_norm(j, n) / ((2 * j + 1) * (2 * j + 2)) as f64;
                assert!((s / h - 1.0).abs() < 1e-12, "n={n} j={j} {s} {h}");
            }
        }
    }
}
