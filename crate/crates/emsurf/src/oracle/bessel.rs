//! Riccati–Bessel functions psi_n(x) = x j_n(x) and chi_n(x) = -x y_n(x)
//! together with their derivatives, for orders 0..=nmax.
//!
//! psi is computed by downward recurrence (upward is unstable for n > x) and
//! normalized against psi_0 = sin x; chi is computed by the stable upward
//! recurrence. The outgoing Riccati–Hankel function for the e^{+j omega t}
//! convention is zeta_n = psi_n + j chi_n.

/// Returns (psi, psi') for orders 0..=nmax at argument x > 0.
pub fn riccati_psi(nmax: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(x > 0.0 && x.is_finite(), "riccati_psi needs x > 0");
    // Downward recurrence for j_n with extra guard orders, then scale.
    let start = nmax + 16 + (x as usize);
    let mut jn = vec![0.0f64; start + 2];
    jn[start + 1] = 0.0;
    jn[start] = 1e-305;
    for n in (1..=start).rev() {
        jn[n - 1] = (2.0 * n as f64 + 1.0) / x * jn[n] - jn[n + 1];
        if jn[n - 1].abs() > 1e250 {
            let s = 1e-250;
            for v in jn.iter_mut().take(start + 2).skip(n - 1) {
                *v *= s;
            }
        }
    }
    let scale = (x.sin() / x) / jn[0];
    let mut psi = vec![0.0f64; nmax + 1];
    for n in 0..=nmax {
        psi[n] = x * jn[n] * scale;
    }
    let mut dpsi = vec![0.0f64; nmax + 1];
    dpsi[0] = x.cos();
    for n in 1..=nmax {
        dpsi[n] = psi[n - 1] - (n as f64 / x) * psi[n];
    }
    (psi, dpsi)
}

/// Returns (chi, chi') for orders 0..=nmax at argument x > 0.
pub fn riccati_chi(nmax: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(x > 0.0 && x.is_finite(), "riccati_chi needs x > 0");
    let mut chi = vec![0.0f64; nmax + 1];
    chi[0] = x.cos();
    if nmax >= 1 {
        chi[1] = x.cos() / x + x.sin();
    }
    for n in 1..nmax {
        chi[n + 1] = (2.0 * n as f64 + 1.0) / x * chi[n] - chi[n - 1];
    }
    let mut dchi = vec![0.0f64; nmax + 1];
    dchi[0] = -x.sin();
    for n in 1..=nmax {
        dchi[n] = chi[n - 1] - (n as f64 / x) * chi[n];
    }
    (chi, dchi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn low_orders_match_closed_forms() {
        for &x in &[0.3, 1.0, 4.7, 12.0] {
            let (psi, dpsi) = riccati_psi(2, x);
            assert_relative_eq!(psi[0], x.sin(), max_relative = 1e-12);
            assert_relative_eq!(psi[1], x.sin() / x - x.cos(), max_relative = 1e-11);
            assert_relative_eq!(
                psi[2],
                (3.0 / (x * x) - 1.0) * x.sin() - 3.0 / x * x.cos(),
                max_relative = 1e-10
            );
            assert_relative_eq!(dpsi[0], x.cos(), max_relative = 1e-12);
            let (chi, _) = riccati_chi(2, x);
            assert_relative_eq!(chi[0], x.cos(), max_relative = 1e-12);
            assert_relative_eq!(chi[1], x.cos() / x + x.sin(), max_relative = 1e-12);
        }
    }

    #[test]
    fn wronskian_is_unity() {
        // chi_n psi_n' - psi_n chi_n' = 1 for all n, x.
        for &x in &[0.5, 2.0, 9.3, 25.0] {
            let nmax = 20;
            let (psi, dpsi) = riccati_psi(nmax, x);
            let (chi, dchi) = riccati_chi(nmax, x);
            for n in 0..=nmax {
                let w = chi[n] * dpsi[n] - psi[n] * dchi[n];
                assert_relative_eq!(w, 1.0, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let x = 3.7;
        let h = 1e-6;
        let (p1, dp) = riccati_psi(8, x);
        let (pa, _) = riccati_psi(8, x - h);
        let (pb, _) = riccati_psi(8, x + h);
        for n in 0..=8 {
            let fd = (pb[n] - pa[n]) / (2.0 * h);
            assert_relative_eq!(dp[n], fd, max_relative = 1e-6);
        }
        assert!(p1[0].is_finite());
    }
}
