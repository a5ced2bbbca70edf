//! Integral norms, volumes, level-set isoperimetric quotients and the
//! explicit constants of the local-assumption checker.
//!
//! Metric balls are represented by arclength bands {|s − s₀| ≤ r}: on a
//! warped product these are the natural computable domains, and all band
//! integrals reduce to 1D quadrature against the measure α(q) ψᵠ ds.

use serde::{Deserialize, Serialize};

use crate::curvature::{self, CurvatureState};
use crate::error::{Error, Result};
use crate::geometry::ProfileMetric;

/// Volume of the unit k-sphere, α(k) = 2 π^{(k+1)/2} / Γ((k+1)/2),
/// by the integer recursion α(k) = 2π/(k−1) · α(k−2).
pub fn sphere_volume(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI / (k as f64 - 1.0) * sphere_volume(k - 2),
    }
}

/// Volume of the unit Euclidean k-ball, w(k) = α(k−1)/k.
pub fn ball_volume(k: usize) -> f64 {
    assert!(k >= 1, "ball dimension must be positive");
    sphere_volume(k - 1) / k as f64
}

/// An arclength band over which to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Band {
    /// The whole profile domain.
    All,
    /// {s_lo ≤ s ≤ s_hi} in arclength from the first node.
    Interval { s_lo: f64, s_hi: f64 },
}

impl Band {
    /// Band centered at `s0` with radius `r`.
    pub fn centered(s0: f64, r: f64) -> Band {
        Band::Interval {
            s_lo: s0 - r,
            s_hi: s0 + r,
        }
    }

    fn clip(&self, total: f64) -> Result<(f64, f64)> {
        match *self {
            Band::All => Ok((0.0, total)),
            Band::Interval { s_lo, s_hi } => {
                if s_lo > s_hi {
                    return Err(Error::InvalidParameter(format!(
                        "band [{s_lo}, {s_hi}] is inverted"
                    )));
                }
                if s_hi < 0.0 || s_lo > total {
                    return Err(Error::InvalidParameter(format!(
                        "band [{s_lo}, {s_hi}] outside the arclength range [0, {total}]"
                    )));
                }
                Ok((s_lo.max(0.0), s_hi.min(total)))
            }
        }
    }
}

/// Trapezoid integral of `integrand(i)` dς over the clipped band, with
/// linear interpolation at the band ends.
fn band_integral(
    arcs: &[f64],
    integrand: &dyn Fn(usize) -> f64,
    s_lo: f64,
    s_hi: f64,
) -> f64 {
    if s_hi <= s_lo {
        return 0.0;
    }
    let n = arcs.len();
    let value_at = |s: f64| -> f64 {
        // Locate the cell and interpolate the integrand linearly.
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if arcs[mid] <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = (s - arcs[lo]) / (arcs[hi] - arcs[lo]);
        integrand(lo) + t * (integrand(hi) - integrand(lo))
    };

    let mut total = 0.0;
    let mut prev_s = s_lo;
    let mut prev_f = value_at(s_lo);
    for i in 0..n {
        if arcs[i] <= s_lo {
            continue;
        }
        if arcs[i] >= s_hi {
            break;
        }
        let f = integrand(i);
        total += 0.5 * (prev_f + f) * (arcs[i] - prev_s);
        prev_s = arcs[i];
        prev_f = f;
    }
    let end_f = value_at(s_hi);
    total += 0.5 * (prev_f + end_f) * (s_hi - prev_s);
    total
}

/// Riemannian volume of a band: α(q) ∫ ψᵠ ds.
pub fn band_volume(profile: &ProfileMetric, band: Band) -> Result<f64> {
    let arcs = profile.arclength();
    let (s_lo, s_hi) = band.clip(*arcs.last().unwrap())?;
    let q = profile.q;
    let psi = &profile.psi;
    let f = |i: usize| psi[i].powi(q as i32);
    Ok(sphere_volume(q) * band_integral(&arcs, &f, s_lo, s_hi))
}

/// L^p norm of a node field over a band, (∫ |f|^p dVol)^{1/p};
/// `p = f64::INFINITY` returns the sup over the band.
pub fn lp_norm(field: &[f64], p: f64, profile: &ProfileMetric, band: Band) -> Result<f64> {
    if field.len() != profile.len() {
        return Err(Error::GridMismatch(
            "field not sampled on the profile grid".into(),
        ));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter("need p >= 1".into()));
    }
    let arcs = profile.arclength();
    let (s_lo, s_hi) = band.clip(*arcs.last().unwrap())?;
    if p.is_infinite() {
        let mut max = 0.0_f64;
        for i in 0..field.len() {
            if arcs[i] >= s_lo && arcs[i] <= s_hi {
                max = max.max(field[i].abs());
            }
        }
        return Ok(max);
    }
    let q = profile.q;
    let psi = &profile.psi;
    let f = |i: usize| field[i].abs().powf(p) * psi[i].powi(q as i32);
    let integral = sphere_volume(q) * band_integral(&arcs, &f, s_lo, s_hi);
    Ok(integral.powf(1.0 / p))
}

/// One entry of a level-set isoperimetric scan.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IsoQuotient {
    pub b: f64,
    /// Vol(Ω_b)^{(d−1)/d}
    pub vol_power: f64,
    /// Vol(∂Ω_b) = α(q) ψ(origin + b)^q
    pub boundary: f64,
    pub quotient: f64,
}

/// Scan of Q(b) = Vol(Ω_b)^{(d−1)/d} / Vol(∂Ω_b) over level-set domains
/// Ω_b = {origin ≤ s ≤ origin + b}.
///
/// With `origin = 0` the domains are polar caps {s ≤ b} and the level
/// sphere at b is the entire boundary. Centering the origin on a neck
/// scans the collar domains of the §-style band computation; only the
/// outer level sphere is charged as boundary.
pub fn iso_quotient_scan(
    profile: &ProfileMetric,
    origin: f64,
    bs: &[f64],
) -> Result<(Vec<IsoQuotient>, f64)> {
    profile.validate()?;
    let arcs = profile.arclength();
    let total = *arcs.last().unwrap();
    if origin < 0.0 || origin > total {
        return Err(Error::InvalidParameter(format!(
            "scan origin {origin} outside [0, {total}]"
        )));
    }
    let d = profile.dim() as f64;
    let q = profile.q;
    let mut out = Vec::with_capacity(bs.len());
    let mut sup = 0.0_f64;
    for &b in bs {
        if !(b > 0.0) || origin + b > total + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "level b = {b} outside the domain from origin {origin}"
            )));
        }
        let psi_b = profile.psi_at_arclength(origin + b)?;
        if psi_b <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "boundary sphere degenerates at b = {b}"
            )));
        }
        let vol = band_volume(
            profile,
            Band::Interval {
                s_lo: origin,
                s_hi: origin + b,
            },
        )?;
        let vol_power = vol.powf((d - 1.0) / d);
        let boundary = sphere_volume(q) * psi_b.powi(q as i32);
        let quotient = vol_power / boundary;
        sup = sup.max(quotient);
        out.push(IsoQuotient {
            b,
            vol_power,
            boundary,
            quotient,
        });
    }
    Ok((out, sup))
}

/// Energy-gap constant
/// ϖ(n,η) = (7/8)·2^{−1−2/n}·(n−2)²/(n²(n−1)²)·α²(n−1)·α(n)^{2/n−2}·η^{2n+2}.
pub fn varpi(n: usize, eta: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParameter("varpi needs n >= 3".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter("varpi needs eta > 0".into()));
    }
    let nf = n as f64;
    let a_nm1 = sphere_volume(n - 1);
    let a_n = sphere_volume(n);
    Ok(0.875
        * 2.0_f64.powf(-1.0 - 2.0 / nf)
        * ((nf - 2.0) * (nf - 2.0)) / (nf * nf * (nf - 1.0) * (nf - 1.0))
        * a_nm1
        * a_nm1
        * a_n.powf(2.0 / nf - 2.0)
        * eta.powf(2.0 * nf + 2.0))
}

/// Isoperimetric constant (1−ε)·2^{1−1/n}·α(n−1)·α(n)^{1/n−1}·η^{n+1}
/// from the volume-ratio lower bound.
pub fn deane_iso_constant(n: usize, eta: f64, eps: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("need n >= 2".into()));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter("need eta > 0".into()));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter("need eps in [0, 1]".into()));
    }
    let nf = n as f64;
    Ok((1.0 - eps)
        * 2.0_f64.powf(1.0 - 1.0 / nf)
        * sphere_volume(n - 1)
        * sphere_volume(n).powf(1.0 / nf - 1.0)
        * eta.powf(nf + 1.0))
}

/// L² Sobolev constant from an isoperimetric constant:
/// A₀ = (2n−2)/(n−2) · C_s⁻¹.
pub fn sobolev_from_iso(n: usize, c_s: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParameter("need n >= 3".into()));
    }
    if !(c_s > 0.0) {
        return Err(Error::InvalidParameter("need C_s > 0".into()));
    }
    let nf = n as f64;
    Ok((2.0 * nf - 2.0) / (nf - 2.0) / c_s)
}

/// Outcome of the three-part local assumption check on a band ball.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub dim: usize,
    pub s0: f64,
    pub r: f64,
    pub tau: f64,
    pub eta: f64,
    pub p: f64,
    pub k_bound: f64,
    /// Vol B(s₀, τr) ≥ w(d)(ητr)^d
    pub volume_pass: bool,
    pub volume_margin: f64,
    pub volume_value: f64,
    pub volume_bound: f64,
    /// |Rm|_{d/2 [B(s₀, τr)]} ≤ ϖ(d, η)
    pub energy_pass: bool,
    pub energy_margin: f64,
    pub energy_value: f64,
    pub energy_bound: f64,
    /// |Ric|_{p [B(s₀, r)]} ≤ K r^{d/p − 2}
    pub ricci_pass: bool,
    pub ricci_margin: f64,
    pub ricci_value: f64,
    pub ricci_bound: f64,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.volume_pass && self.energy_pass && self.ricci_pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Evaluate the three local assumptions on the band ball about `s0`.
///
/// Margins are signed so that `margin >= 0` exactly when the assumption
/// passes: lower bounds report value − bound, upper bounds bound − value.
/// Bands are clipped at the domain ends; at a pole of a closed profile the
/// clipped band {s ≤ r} is the polar cap, which is the exact metric ball.
pub fn digamma_check(
    profile: &ProfileMetric,
    s0: f64,
    r: f64,
    tau: f64,
    p: f64,
    k_bound: f64,
    eta: f64,
) -> Result<AssumptionReport> {
    let d = profile.dim();
    if !(r > 0.0) || !(tau > 0.0 && tau <= 1.0) || !(eta > 0.0) {
        return Err(Error::InvalidParameter(
            "need r > 0, tau in (0,1], eta > 0".into(),
        ));
    }
    if !(p > d as f64 / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "need p > d/2 = {}",
            d as f64 / 2.0
        )));
    }
    let total = profile.total_arclength();
    if s0 < -1e-12 || s0 > total + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "ball center s0 = {s0} outside the domain [0, {total}]"
        )));
    }

    let state = curvature::full_state(profile)?;
    let df = d as f64;

    let vol = band_volume(profile, Band::centered(s0, tau * r))?;
    let vol_bound = ball_volume(d) * (eta * tau * r).powi(d as i32);

    let rm_norm = lp_norm(&state.rm_norm, df / 2.0, profile, Band::centered(s0, tau * r))?;
    let rm_bound = varpi(d, eta)?;

    let ric_field = state.ric_norm_field();
    let ric_norm = lp_norm(&ric_field, p, profile, Band::centered(s0, r))?;
    let ric_bound = k_bound * r.powf(df / p - 2.0);

    Ok(AssumptionReport {
        dim: d,
        s0,
        r,
        tau,
        eta,
        p,
        k_bound,
        volume_pass: vol >= vol_bound,
        volume_margin: vol - vol_bound,
        volume_value: vol,
        volume_bound: vol_bound,
        energy_pass: rm_norm <= rm_bound,
        energy_margin: rm_bound - rm_norm,
        energy_value: rm_norm,
        energy_bound: rm_bound,
        ricci_pass: ric_norm <= ric_bound,
        ricci_margin: ric_bound - ric_norm,
        ricci_value: ric_norm,
        ricci_bound: ric_bound,
    })
}

/// |Rm| L^{d/2} norm over a band — the energy that the gap constant bounds.
pub fn rm_band_norm(profile: &ProfileMetric, state: &CurvatureState, band: Band) -> Result<f64> {
    let d = profile.dim() as f64;
    lp_norm(&state.rm_norm, d / 2.0, profile, band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_dumbbell, build_round_sphere, DumbbellShape};
    use crate::oracles;
    use approx::assert_relative_eq;

    #[test]
    fn unit_sphere_volumes() {
        assert_relative_eq!(sphere_volume(1), 2.0 * std::f64::consts::PI);
        assert_relative_eq!(sphere_volume(3), 2.0 * std::f64::consts::PI.powi(2));
        assert_relative_eq!(
            sphere_volume(4),
            8.0 * std::f64::consts::PI.powi(2) / 3.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            ball_volume(4),
            std::f64::consts::PI.powi(2) / 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn round_sphere_total_volume() {
        // Radius-2 round 4-sphere: Vol = ρ⁴ α(4).
        let p = build_round_sphere(2.0, 3, 800).unwrap();
        let v = band_volume(&p, Band::All).unwrap();
        assert_relative_eq!(v, 16.0 * sphere_volume(4), max_relative = 1e-6);
    }

    #[test]
    fn dumbbell_band_volume_matches_antiderivative() {
        let g = 0.2;
        let p = build_dumbbell(g, 1.0, 3, &DumbbellShape::default(), 200_000).unwrap();
        let center = p.center_arclength();
        for b in [0.3, 0.7, 1.0] {
            let v = band_volume(
                &p,
                Band::Interval {
                    s_lo: center,
                    s_hi: center + b,
                },
            )
            .unwrap();
            let exact = sphere_volume(3) * oracles::band_warp_volume_exact(g, b).unwrap();
            assert_relative_eq!(v, exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn empty_band_has_zero_volume() {
        let p = build_round_sphere(1.0, 3, 100).unwrap();
        let v = band_volume(
            &p,
            Band::Interval {
                s_lo: 1.0,
                s_hi: 1.0,
            },
        )
        .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn constant_field_lp_norm() {
        let p = build_round_sphere(1.0, 3, 400).unwrap();
        let field = vec![2.5; p.len()];
        for pw in [1.0, 2.0, 3.5] {
            let n = lp_norm(&field, pw, &p, Band::All).unwrap();
            let vol = band_volume(&p, Band::All).unwrap();
            assert_relative_eq!(n, 2.5 * vol.powf(1.0 / pw), max_relative = 1e-9);
        }
        let inf = lp_norm(&field, f64::INFINITY, &p, Band::All).unwrap();
        assert_eq!(inf, 2.5);
    }

    #[test]
    fn rm_band_norm_matches_closed_form() {
        // Squared value = 24 · 2α(3) · ∫₀ᶜ G⁴ (G²+s²)^{−5/2} ds on the band.
        let g = 0.2;
        let c = 0.9;
        let p = build_dumbbell(g, 1.0, 3, &DumbbellShape::default(), 120_000).unwrap();
        let state = crate::curvature::full_state(&p).unwrap();
        let center = p.center_arclength();
        let norm = rm_band_norm(&p, &state, Band::centered(center, c)).unwrap();
        let exact_sq =
            24.0 * 2.0 * sphere_volume(3) * oracles::band_kn_integral_exact(g, c).unwrap();
        assert_relative_eq!(norm * norm, exact_sq, max_relative = 1e-6);
    }

    #[test]
    fn paper_band_inequality_chain_holds() {
        // 2α(3)∫₀ᶜ K_N² ψ³ ds ≤ 2^{7/2} α(3) ∫₀ᶜ G⁴/(G+s)⁵ ds on a (G, c) grid.
        for &g in &[0.05, 0.1, 0.2, 0.4, 0.6] {
            for &c in &[0.7, 0.8, 1.0, 1.2, 1.5] {
                if g >= c {
                    continue;
                }
                let n = 40_000;
                let h = c / n as f64;
                let lhs: f64 = 2.0
                    * sphere_volume(3)
                    * (0..n)
                        .map(|i| {
                            let s = (i as f64 + 0.5) * h;
                            let den = g * g + s * s;
                            (g * g / (den * den)).powi(2) * den.powf(1.5) * h
                        })
                        .sum::<f64>();
                let rhs = 2.0_f64.powf(3.5)
                    * sphere_volume(3)
                    * (1.0 - (g / (g + c)).powi(4))
                    / 4.0;
                assert!(lhs <= rhs, "chain fails at G={g}, c={c}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn varpi_matches_its_closed_form_at_4_1() {
        let v = varpi(4, 1.0).unwrap();
        let paper = 0.875 * std::f64::consts::PI / (64.0 * 3.0_f64.sqrt());
        assert!((v - paper).abs() < 1e-12, "varpi(4,1) = {v} vs {paper}");
    }

    #[test]
    fn varpi_eta_scaling() {
        let n = 5;
        let base = varpi(n, 1.0).unwrap();
        let v = varpi(n, 0.7).unwrap();
        assert_relative_eq!(v, 0.7_f64.powi(2 * n as i32 + 2) * base, max_relative = 1e-12);
        assert!(varpi(2, 1.0).is_err());
    }

    #[test]
    fn gap_ratio_exceeds_hundred_for_small_necks() {
        // lim |Rm|₂ ≈ 8π on the band; at G = 1e-3 the ratio to ϖ(4,1) is ~1e3.
        let g = 1e-3;
        let c = 1.0;
        let rm_sq =
            24.0 * 2.0 * sphere_volume(3) * oracles::band_kn_integral_exact(g, c).unwrap();
        let ratio = rm_sq.sqrt() / varpi(4, 1.0).unwrap();
        assert!(ratio > 100.0, "gap ratio {ratio}");
    }

    #[test]
    fn deane_constant_cases() {
        assert_eq!(deane_iso_constant(4, 1.0, 1.0).unwrap(), 0.0);
        // Monotone in eta.
        let a = deane_iso_constant(4, 0.5, 0.0).unwrap();
        let b = deane_iso_constant(4, 0.9, 0.0).unwrap();
        assert!(b > a);
        // n = 4, η = 1, ε = 0: 2^{3/4}·α(3)·α(4)^{−3/4}.
        let v = deane_iso_constant(4, 1.0, 0.0).unwrap();
        let direct = 2.0_f64.powf(0.75) * sphere_volume(3) * sphere_volume(4).powf(-0.75);
        assert_relative_eq!(v, direct, max_relative = 1e-13);
        assert!(deane_iso_constant(4, 1.0, 1.5).is_err());
    }

    #[test]
    fn sobolev_relation() {
        assert_relative_eq!(sobolev_from_iso(4, 1.0).unwrap(), 3.0);
        assert_relative_eq!(sobolev_from_iso(3, 2.0).unwrap(), 2.0);
        // A₀ · C_s is scale-invariant.
        for cs in [0.5, 1.0, 7.0] {
            assert_relative_eq!(
                sobolev_from_iso(5, cs).unwrap() * cs,
                8.0 / 3.0,
                max_relative = 1e-13
            );
        }
        assert!(sobolev_from_iso(2, 1.0).is_err());
    }

    #[test]
    fn small_cap_quotient_approaches_euclidean_limit() {
        let p = build_round_sphere(1.0, 3, 40_000).unwrap();
        let d = 4.0;
        let limit = ball_volume(4).powf((d - 1.0) / d) / sphere_volume(3);
        let (qs, _) = iso_quotient_scan(&p, 0.0, &[0.05, 0.1]).unwrap();
        for e in &qs {
            let rel = (e.quotient - limit).abs() / limit;
            assert!(rel < 1.5 * e.b * e.b, "Q({}) off by {rel}", e.b);
        }
    }

    #[test]
    fn hemisphere_quotient() {
        let p = build_round_sphere(1.0, 3, 20_000).unwrap();
        let half = p.center_arclength();
        let (qs, _) = iso_quotient_scan(&p, 0.0, &[half]).unwrap();
        let expected = (sphere_volume(4) / 2.0).powf(0.75) / sphere_volume(3);
        assert_relative_eq!(qs[0].quotient, expected, max_relative = 1e-5);
    }

    #[test]
    fn neck_collar_quotients_track_paper_shape() {
        // Q(b) against [(G+b)⁴ − G⁴]^{3/4} / (G³ + b³) stays within fixed
        // constants over the scan grid.
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for &g in &[0.2, 0.1, 0.05] {
            let p = build_dumbbell(g, 1.0, 3, &DumbbellShape::default(), 20_000).unwrap();
            let center = p.center_arclength();
            let bs: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
            let (qs, _) = iso_quotient_scan(&p, center, &bs).unwrap();
            for e in &qs {
                let shape = ((g + e.b).powi(4) - g.powi(4)).powf(0.75) / (g.powi(3) + e.b.powi(3));
                let ratio = e.quotient / shape;
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
        assert!(hi / lo < 3.0, "ratio spread [{lo}, {hi}]");
    }

    #[test]
    fn iso_scan_rejects_degenerate_boundary() {
        let p = build_round_sphere(1.0, 3, 1000).unwrap();
        let total = p.total_arclength();
        assert!(iso_quotient_scan(&p, 0.0, &[total]).is_err());
    }

    #[test]
    fn digamma_check_small_ball_on_unit_sphere_passes() {
        // Ball at the pole: the band {s <= tau*r} is the polar cap, whose
        // geometry is Euclidean to O(r²); all three assumptions pass.
        let p = build_round_sphere(1.0, 3, 40_000).unwrap();
        let report = digamma_check(&p, 0.0, 2.5e-3, 0.5, 3.0, 1.0, 0.5).unwrap();
        assert!(report.volume_pass, "volume margin {}", report.volume_margin);
        assert!(report.energy_pass, "energy margin {}", report.energy_margin);
        assert!(report.ricci_pass, "ricci margin {}", report.ricci_margin);
        assert!(report.all_pass());
        // Margins are consistent with the booleans by construction; spot-check signs.
        assert!(report.volume_margin >= 0.0);
    }

    #[test]
    fn digamma_ricci_assumption_fails_for_small_necks() {
        // Fixed K: the |Ric|_p bound degrades as the neck shrinks.
        let mut margins = Vec::new();
        for &g in &[0.2, 0.1, 0.05] {
            let p = build_dumbbell(g, 1.0, 3, &DumbbellShape::default(), 16_000).unwrap();
            let center = p.center_arclength();
            let report = digamma_check(&p, center, 0.9, 0.5, 3.0, 10.0, 0.5).unwrap();
            margins.push(report.ricci_margin);
        }
        assert!(margins[0] > margins[1] && margins[1] > margins[2]);
        assert!(margins[2] < 0.0, "smallest neck should fail: {margins:?}");
    }

    #[test]
    fn digamma_energy_assumption_fails_for_small_necks() {
        let p = build_dumbbell(0.01, 1.0, 3, &DumbbellShape::default(), 60_000).unwrap();
        let center = p.center_arclength();
        let report = digamma_check(&p, center, 0.9, 1.0, 3.0, 1e9, 1.0).unwrap();
        assert!(!report.energy_pass);
        assert!(report.energy_value > 100.0 * varpi(4, 1.0).unwrap());
    }

    #[test]
    fn ricci_norm_diverges_as_neck_shrinks() {
        for &p_exp in &[2.5, 3.0, 4.0] {
            let mut values = Vec::new();
            for &g in &[0.2, 0.1, 0.05, 0.025] {
                let prof = build_dumbbell(g, 1.0, 3, &DumbbellShape::default(), 30_000).unwrap();
                let state = crate::curvature::full_state(&prof).unwrap();
                let center = prof.center_arclength();
                let field = state.ric_norm_field();
                values.push(lp_norm(&field, p_exp, &prof, Band::centered(center, 1.0)).unwrap());
            }
            for w in values.windows(2) {
                assert!(w[1] > w[0], "p = {p_exp}: {values:?}");
            }
        }
    }

    #[test]
    fn rm_band_norm_is_cauchy_as_neck_shrinks() {
        let c = 1.0;
        let values: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&g| {
                (24.0 * 2.0 * sphere_volume(3) * oracles::band_kn_integral_exact(g, c).unwrap())
                    .sqrt()
            })
            .collect();
        let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(diffs[1] < diffs[0] && diffs[2] < diffs[1], "{diffs:?}");
    }

    #[test]
    fn quadrature_second_order_on_closed_form_fixture() {
        let g = 0.3;
        let errs: Vec<f64> = [400usize, 800]
            .iter()
            .map(|&m| {
                let p = build_dumbbell(g, 1.0, 3, &DumbbellShape::default(), m).unwrap();
                let center = p.center_arclength();
                let v = band_volume(
                    &p,
                    Band::Interval {
                        s_lo: center,
                        s_hi: center + 1.0,
                    },
                )
                .unwrap();
                let exact = sphere_volume(3) * oracles::band_warp_volume_exact(g, 1.0).unwrap();
                (v - exact).abs()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.9, "quadrature order {order}");
    }
}
