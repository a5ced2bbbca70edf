//! Pointwise curvature of a profile metric and its neck/bump structure.
//!
//! For `g = ds² + ψ² dSᵠ` the curvature operator is diagonal with two
//! eigenvalues: the normal sectional curvature `K_N = −ψ_ss/ψ` of planes
//! containing the profile direction and the tangential sectional curvature
//! `K_T = (1 − ψ_s²)/ψ²` of fiber planes. Everything else here (Ricci
//! eigenvalues, scalar curvature, |Rm|) is assembled from those two fields
//! and cross-checked in the tests against brute-force coordinate oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{even_extension, psi_extension, ProfileMetric, Topology};
use crate::stencil;

/// Interior fiber radii below this fraction of max ψ are treated as a
/// collapsed (singular) profile.
pub const SINGULAR_PSI_FRACTION: f64 = 1e-12;

/// Curvature fields of a profile, sampled on its grid.
///
/// Pole values (closed profiles) are quadratic extrapolations of the three
/// nearest interior values; both sectional curvatures tend to the same
/// finite limit there.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvatureState {
    pub q: usize,
    /// Normal sectional curvature −ψ_ss/ψ.
    pub k_n: Vec<f64>,
    /// Tangential sectional curvature (1 − ψ_s²)/ψ².
    pub k_t: Vec<f64>,
    /// Ricci eigenvalue in the profile direction, q·K_N.
    pub ric_ss: Vec<f64>,
    /// Ricci eigenvalue on the fiber, K_N + (q−1)·K_T.
    pub ric_fiber: Vec<f64>,
    /// Scalar curvature 2q·K_N + q(q−1)·K_T.
    pub scalar: Vec<f64>,
    /// Pointwise norm |Rm| = √(4[q K_N² + q(q−1)/2 K_T²]).
    pub rm_norm: Vec<f64>,
    /// Pinching indicator a = ψ²(K_N − K_T).
    pub a: Vec<f64>,
}

impl CurvatureState {
    /// Pointwise |Ric| from the two eigenvalues and their multiplicities.
    pub fn ric_norm_field(&self) -> Vec<f64> {
        let q = self.q as f64;
        self.ric_ss
            .iter()
            .zip(&self.ric_fiber)
            .map(|(&rs, &rf)| (rs * rs + q * rf * rf).sqrt())
            .collect()
    }

    pub fn rm_max(&self) -> f64 {
        self.rm_norm.iter().copied().fold(0.0, f64::max)
    }

    /// Columnar text export keyed to grid nodes.
    pub fn to_columnar_text(&self, profile: &ProfileMetric) -> String {
        let mut out = String::new();
        out.push_str("# x k_n k_t ric_ss ric_fiber scalar rm_norm a\n");
        for i in 0..self.k_n.len() {
            out.push_str(&format!(
                "{} {} {} {} {} {} {} {}\n",
                profile.grid[i],
                self.k_n[i],
                self.k_t[i],
                self.ric_ss[i],
                self.ric_fiber[i],
                self.scalar[i],
                self.rm_norm[i],
                self.a[i]
            ));
        }
        out
    }
}

/// K_N and K_T for raw field arrays; shared with the flow right-hand side.
///
/// Derivatives are taken in arclength through the gauge: ψ_s = ψ_x/φ with a
/// fourth-order stencil (so the (1 − ψ_s²)/ψ² ratio stays second-order
/// accurate up to the poles), and ψ_ss = ψ_xx/φ² − ψ_x φ_x/φ³ with the
/// three-point second-derivative stencil.
pub(crate) fn kn_kt_fields(
    grid: &[f64],
    phi: &[f64],
    psi: &[f64],
    topology: Topology,
    _q: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = stencil::uniform_spacing(grid)?;
    let n = grid.len();
    let psi_max = psi.iter().copied().fold(0.0, f64::max);
    let interior = match topology {
        Topology::ClosedSphere => 1..n - 1,
        Topology::Periodic => 0..n,
    };
    for i in interior.clone() {
        if psi[i] < SINGULAR_PSI_FRACTION * psi_max {
            return Err(Error::SingularProfile(format!(
                "interior psi at node {i} below {SINGULAR_PSI_FRACTION} of max psi"
            )));
        }
    }

    let psi_ext = psi_extension(topology);
    let even_ext = even_extension(topology);
    let psi_x = stencil::deriv1(psi, h, psi_ext);
    let psi_s: Vec<f64> = psi_x.iter().zip(phi).map(|(d, p)| d / p).collect();
    let psi_xx = stencil::deriv2(psi, h, psi_ext);
    let phi_x = stencil::deriv1_low(phi, h, even_ext);
    let psi_ss: Vec<f64> = (0..n)
        .map(|i| psi_xx[i] / (phi[i] * phi[i]) - psi_x[i] * phi_x[i] / phi[i].powi(3))
        .collect();

    let mut k_n = vec![0.0; n];
    let mut k_t = vec![0.0; n];
    for i in interior {
        k_n[i] = -psi_ss[i] / psi[i];
        k_t[i] = (1.0 - psi_s[i] * psi_s[i]) / (psi[i] * psi[i]);
    }
    if topology == Topology::ClosedSphere {
        k_n[0] = stencil::extrapolate_to_end(k_n[1], k_n[2], k_n[3]);
        k_t[0] = stencil::extrapolate_to_end(k_t[1], k_t[2], k_t[3]);
        k_n[n - 1] = stencil::extrapolate_to_end(k_n[n - 2], k_n[n - 3], k_n[n - 4]);
        k_t[n - 1] = stencil::extrapolate_to_end(k_t[n - 2], k_t[n - 3], k_t[n - 4]);
    }
    Ok((k_n, k_t))
}

/// Arclength first derivative of a field with the stated parity, used by
/// the monitors for cutoff and curvature diagnostics.
pub(crate) fn arclength_deriv(
    grid: &[f64],
    phi: &[f64],
    field: &[f64],
    topology: Topology,
    odd: bool,
) -> Result<Vec<f64>> {
    let h = stencil::uniform_spacing(grid)?;
    let ext = if odd {
        psi_extension(topology)
    } else {
        even_extension(topology)
    };
    let fx = stencil::deriv1(field, h, ext);
    Ok(fx.iter().zip(phi).map(|(d, p)| d / p).collect())
}

/// Sectional curvatures of a valid profile.
pub fn sectional_curvatures(profile: &ProfileMetric) -> Result<CurvatureState> {
    profile.validate()?;
    let (k_n, k_t) = kn_kt_fields(
        &profile.grid,
        &profile.phi,
        &profile.psi,
        profile.topology,
        profile.q,
    )?;
    let n = k_n.len();
    Ok(CurvatureState {
        q: profile.q,
        k_n,
        k_t,
        ric_ss: vec![0.0; n],
        ric_fiber: vec![0.0; n],
        scalar: vec![0.0; n],
        rm_norm: vec![0.0; n],
        a: vec![0.0; n],
    })
}

/// Fill the Ricci eigenvalues and scalar curvature.
pub fn ricci_and_scalar(state: &mut CurvatureState) {
    let q = state.q as f64;
    let n = state.k_n.len();
    for i in 0..n {
        state.ric_ss[i] = q * state.k_n[i];
        state.ric_fiber[i] = state.k_n[i] + (q - 1.0) * state.k_t[i];
        state.scalar[i] = 2.0 * q * state.k_n[i] + q * (q - 1.0) * state.k_t[i];
    }
}

/// Fill |Rm| = √(4[q K_N² + q(q−1)/2 K_T²]).
pub fn riemann_norm(state: &mut CurvatureState) {
    let q = state.q as f64;
    for i in 0..state.k_n.len() {
        let sq = 4.0
            * (q * state.k_n[i] * state.k_n[i]
                + 0.5 * q * (q - 1.0) * state.k_t[i] * state.k_t[i]);
        state.rm_norm[i] = sq.sqrt();
    }
}

/// Fill the pinching indicator a = ψ²(K_N − K_T).
pub fn a_profile(state: &mut CurvatureState, profile: &ProfileMetric) {
    for i in 0..state.k_n.len() {
        let psi2 = profile.psi[i] * profile.psi[i];
        state.a[i] = psi2 * (state.k_n[i] - state.k_t[i]);
    }
}

/// All curvature fields of a profile in one call.
pub fn full_state(profile: &ProfileMetric) -> Result<CurvatureState> {
    profile.validate()?;
    full_state_unchecked(profile)
}

/// Same as [`full_state`] without re-running profile validation; used by
/// the flow engine on states it already guards step by step.
pub(crate) fn full_state_unchecked(profile: &ProfileMetric) -> Result<CurvatureState> {
    let (k_n, k_t) = kn_kt_fields(
        &profile.grid,
        &profile.phi,
        &profile.psi,
        profile.topology,
        profile.q,
    )?;
    let n = k_n.len();
    let mut state = CurvatureState {
        q: profile.q,
        k_n,
        k_t,
        ric_ss: vec![0.0; n],
        ric_fiber: vec![0.0; n],
        scalar: vec![0.0; n],
        rm_norm: vec![0.0; n],
        a: vec![0.0; n],
    };
    ricci_and_scalar(&mut state);
    riemann_norm(&mut state);
    a_profile(&mut state, profile);
    Ok(state)
}

/// Interior extrema of the warping radius.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NeckReport {
    /// Interior local minima of ψ as (node index, ψ value).
    pub necks: Vec<(usize, f64)>,
    /// Interior local maxima of ψ as (node index, ψ value).
    pub bumps: Vec<(usize, f64)>,
    /// Smallest neck radius, if any neck exists.
    pub r_min: Option<f64>,
    /// Smallest bump radius, if any bump exists.
    pub r_max: Option<f64>,
}

/// Relative tolerance for treating neighboring ψ values as a plateau.
const PLATEAU_TOL: f64 = 1e-12;

/// Locate interior necks (local minima of ψ) and bumps (local maxima).
///
/// Runs of equal values count once, at the run's midpoint. Endpoints are
/// never extrema; for periodic profiles the seam is treated as interior.
pub fn neck_bump_analysis(profile: &ProfileMetric) -> Result<NeckReport> {
    profile.validate()?;
    let psi = &profile.psi;
    let n = psi.len();
    let scale = profile.psi_max().max(1e-300);
    let eq = |a: f64, b: f64| (a - b).abs() <= PLATEAU_TOL * scale;

    let value = |i: isize| -> f64 {
        match profile.topology {
            Topology::Periodic => {
                let m = (n - 1) as isize;
                psi[i.rem_euclid(m) as usize]
            }
            Topology::ClosedSphere => psi[i as usize],
        }
    };
    let range: Vec<usize> = match profile.topology {
        Topology::ClosedSphere => (1..n - 1).collect(),
        Topology::Periodic => (0..n - 1).collect(),
    };

    let mut necks = Vec::new();
    let mut bumps = Vec::new();
    let mut i_idx = 0usize;
    while i_idx < range.len() {
        let i = range[i_idx];
        // Extend a plateau starting at i.
        let mut j_idx = i_idx;
        while j_idx + 1 < range.len() && eq(psi[range[j_idx + 1]], psi[i]) {
            j_idx += 1;
        }
        let j = range[j_idx];
        let left = value(i as isize - 1);
        let right = value(j as isize + 1);
        let v = psi[i];
        let is_boundary_run = profile.topology == Topology::ClosedSphere
            && (i == 1 && eq(left, v) || j == n - 2 && eq(right, v));
        if !is_boundary_run && !eq(left, v) && !eq(right, v) {
            let mid = (i + j) / 2;
            if left > v && right > v {
                necks.push((mid, psi[mid]));
            } else if left < v && right < v {
                bumps.push((mid, psi[mid]));
            }
        }
        i_idx = j_idx + 1;
    }

    let r_min = necks
        .iter()
        .map(|&(_, v)| v)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    let r_max = bumps
        .iter()
        .map(|&(_, v)| v)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    Ok(NeckReport {
        necks,
        bumps,
        r_min,
        r_max,
    })
}
