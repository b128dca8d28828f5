//! Modified Bessel function of the first kind, fractional order, in log
//! scale.
//!
//! `ln I_ν(z)` for `ν > −1`, `z ≥ 0`. Small and moderate arguments use the
//! ascending power series accumulated relative to its leading term; above
//! [`ASYMPTOTIC_SWITCH`] the Debye uniform expansion takes over. Both paths
//! stay finite where `I_ν(z)` itself overflows (`z ≳ 700`).

use statrs::function::gamma::ln_gamma;

/// Argument above which the uniform asymptotic expansion is used.
pub const ASYMPTOTIC_SWITCH: f64 = 50.0;

/// `ln I_ν(z)`. Returns `−∞` at `z = 0` for `ν > 0`, `0` for `ν = 0`.
pub fn ln_bessel_i(nu: f64, z: f64) -> f64 {
    debug_assert!(nu > -1.0, "order must exceed -1");
    if z < 0.0 || z.is_nan() {
        return f64::NAN;
    }
    if z == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if z > ASYMPTOTIC_SWITCH {
        ln_bessel_i_uniform(nu, z)
    } else {
        ln_bessel_i_series(nu, z)
    }
}

/// `I_ν(z)·e^{−z}`, bounded for all `z`.
pub fn bessel_i_scaled(nu: f64, z: f64) -> f64 {
    (ln_bessel_i(nu, z) - z).exp()
}

/// Ascending series `Σ (z/2)^{2k+ν} / (k! Γ(k+ν+1))`, summed relative to
/// the `k = 0` term. Stops when the term ratio drops below 1e−17 relative
/// to the running sum.
pub(crate) fn ln_bessel_i_series(nu: f64, z: f64) -> f64 {
    let lead = nu * (0.5 * z).ln() - ln_gamma(nu + 1.0);
    let q = 0.25 * z * z;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut k = 1.0_f64;
    loop {
        term *= q / (k * (k + nu));
        sum += term;
        // Past the peak of the terms the tail is bounded by a geometric series.
        if k + nu > 0.0 && term < 1e-17 * sum && q / ((k + 1.0) * (k + 1.0 + nu)) < 0.5 {
            break;
        }
        k += 1.0;
        if k > 10_000.0 {
            break;
        }
    }
    lead + sum.ln()
}

/// Debye expansion written in `τ = 1/√(ν² + z²)` and `t = ν τ`, so each
/// correction `u_k(t)/ν^k = τ^k P_k(t²)` stays finite as `ν → 0`.
pub(crate) fn ln_bessel_i_uniform(nu: f64, z: f64) -> f64 {
    let r = nu.hypot(z);
    let tau = 1.0 / r;
    let t = nu * tau;
    let t2 = t * t;
    // u_k(t) = t^k P_k(t²) (Abramowitz & Stegun 9.3.9).
    let p1 = (3.0 - 5.0 * t2) / 24.0;
    let p2 = (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0;
    let p3 = (30375.0 - 369603.0 * t2 + 765765.0 * t2 * t2 - 425425.0 * t2 * t2 * t2) / 414720.0;
    let p4 = (4465125.0 - 94121676.0 * t2 + 349922430.0 * t2.powi(2) - 446185740.0 * t2.powi(3)
        + 185910725.0 * t2.powi(4))
        / 39813120.0;
    let p5 = (1519035525.0 - 49286948607.0 * t2 + 284499769554.0 * t2.powi(2) - 614135872350.0 * t2.powi(3)
        + 566098157625.0 * t2.powi(4)
        - 188699385875.0 * t2.powi(5))
        / 6688604160.0;
    let p6 = (2757049477875.0 - 127577298354750.0 * t2 + 1050760774457901.0 * t2.powi(2)
        - 3369032068261860.0 * t2.powi(3)
        + 5104696716244125.0 * t2.powi(4)
        - 3685299006138750.0 * t2.powi(5)
        + 1023694168371875.0 * t2.powi(6))
        / 4815794995200.0;
    let series = 1.0
        + tau * (p1 + tau * (p2 + tau * (p3 + tau * (p4 + tau * (p5 + tau * p6)))));
    let eta_nu = if nu == 0.0 { r } else { r + nu * (z / (nu + r)).ln() };
    eta_nu - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * r.ln() + series.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Half-integer orders have elementary closed forms.
    fn ln_i_half(z: f64) -> f64 {
        0.5 * (2.0 / (std::f64::consts::PI * z)).ln() + z.sinh().ln()
    }
    fn ln_i_three_halves(z: f64) -> f64 {
        0.5 * (2.0 / (std::f64::consts::PI * z)).ln() + (z.cosh() - z.sinh() / z).ln()
    }

    #[test]
    fn matches_half_integer_closed_forms() {
        for &z in &[1e-3, 0.1, 1.0, 5.0, 20.0, 49.9, 50.1, 80.0, 300.0] {
            let exact = ln_i_half(z);
            let got = ln_bessel_i(0.5, z);
            assert!(((got - exact) / exact.abs().max(1.0)).abs() < 1e-12, "z={z}: {got} vs {exact}");
            if z < 0.1 {
                // cosh z − sinh z / z cancels catastrophically here.
                continue;
            }
            let exact = ln_i_three_halves(z);
            let got = ln_bessel_i(1.5, z);
            assert!(((got - exact) / exact.abs().max(1.0)).abs() < 1e-11, "z={z}: {got} vs {exact}");
        }
    }

    #[test]
    fn integer_order_reference_values() {
        // I_0(1), I_1(1), I_0(10) from standard tables.
        assert!((ln_bessel_i(0.0, 1.0).exp() - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((ln_bessel_i(1.0, 1.0).exp() - 0.565_159_103_992_485_0).abs() < 1e-14);
        assert!((ln_bessel_i(0.0, 10.0).exp() / 2_815.716_628_466_254_4 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn series_and_uniform_agree_at_switch() {
        for &nu in &[-0.5, 0.0, 0.3, 2.0, 3.93, 10.0, 40.0] {
            let s = ln_bessel_i_series(nu, ASYMPTOTIC_SWITCH);
            let u = ln_bessel_i_uniform(nu, ASYMPTOTIC_SWITCH);
            assert!((s - u).abs() < 1e-12 * s.abs(), "nu={nu}: {s} vs {u}");
        }
    }

    #[test]
    fn huge_arguments_do_not_overflow() {
        let v = ln_bessel_i(3.9, 5.0e4);
        assert!(v.is_finite());
        assert!((v - (5.0e4 - 0.5 * (2.0 * std::f64::consts::PI * 5.0e4).ln())).abs() < 1e-3);
    }
}
