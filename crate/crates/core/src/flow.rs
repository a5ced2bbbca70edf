//! Explicit time-stepping of Ricci flow and local Ricci flow on profile
//! metrics.
//!
//! In the fixed coordinate gauge the flow `∂g/∂t = −2χ²Ric` reduces to
//!
//! ```text
//! ∂ₜψ = −χ² ψ (K_N + (q−1) K_T)   (= χ² [ψ_ss − (q−1)(1 − ψ_s²)/ψ])
//! ∂ₜφ = −χ² q φ K_N               (= χ² q φ ψ_ss/ψ)
//! ```
//!
//! with χ ≡ 1 recovering global Ricci flow. Stepping is classical RK4 under
//! a parabolic CFL restriction; the poles stay pinned at ψ = 0 because the
//! right-hand side carries a factor of ψ there.

use serde::{Deserialize, Serialize};

use crate::curvature::{self, CurvatureState};
use crate::error::{Error, Result};
use crate::geometry::{CutoffProfile, ProfileMetric};
use crate::norms::{self, Band};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    Ricci,
    LocalRicci,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtPolicy {
    /// Fixed step, validated against the CFL ceiling every step.
    Fixed { dt: f64 },
    /// dt = λ · min_nodes (φΔx)² / (2 max(1, q)), recomputed every step.
    AdaptiveCfl { lambda: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ReachedTEnd,
    PinchDetected,
    CurvatureCap,
    NumericFailure,
}

#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub mode: FlowMode,
    /// Required for [`FlowMode::LocalRicci`].
    pub cutoff: Option<CutoffProfile>,
    pub dt: DtPolicy,
    pub t_end: f64,
    /// Record a snapshot every this many accepted steps (0 disables
    /// intermediate snapshots; the initial and final states are always kept).
    pub snapshot_stride: usize,
    /// Pinch detection threshold as a fraction of the initial interior ψ_min.
    pub pinch_fraction: f64,
    /// Stop when |Rm|_∞ exceeds this; `None` picks 10⁸/ψ_min(0)².
    pub curvature_cap: Option<f64>,
}

impl FlowConfig {
    pub fn ricci(dt: DtPolicy, t_end: f64) -> FlowConfig {
        FlowConfig {
            mode: FlowMode::Ricci,
            cutoff: None,
            dt,
            t_end,
            snapshot_stride: 0,
            pinch_fraction: 1e-3,
            curvature_cap: None,
        }
    }

    pub fn local_ricci(cutoff: CutoffProfile, dt: DtPolicy, t_end: f64) -> FlowConfig {
        FlowConfig {
            mode: FlowMode::LocalRicci,
            cutoff: Some(cutoff),
            dt,
            t_end,
            snapshot_stride: 0,
            pinch_fraction: 1e-3,
            curvature_cap: None,
        }
    }

    fn validate(&self, profile: &ProfileMetric) -> Result<()> {
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidParameter("t_end must be positive".into()));
        }
        if let DtPolicy::AdaptiveCfl { lambda } = self.dt {
            if !(lambda > 0.0 && lambda <= 0.5) {
                return Err(Error::InvalidParameter(
                    "CFL factor must lie in (0, 1/2]".into(),
                ));
            }
        }
        if let DtPolicy::Fixed { dt } = self.dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidParameter("dt must be positive".into()));
            }
        }
        if !(self.pinch_fraction > 0.0 && self.pinch_fraction < 1.0) {
            return Err(Error::InvalidParameter(
                "pinch fraction must lie in (0, 1)".into(),
            ));
        }
        match self.mode {
            FlowMode::LocalRicci => {
                let chi = self.cutoff.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("local flow requires a cutoff".into())
                })?;
                chi.compatible_with(profile)?;
            }
            FlowMode::Ricci => {}
        }
        Ok(())
    }
}

/// Per-step scalar monitors of a flow run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MonitorSeries {
    pub t: Vec<f64>,
    pub psi_min: Vec<f64>,
    pub rm_max: Vec<f64>,
    pub volume: Vec<f64>,
    /// ∫ |Rm|^{d/2} dVol
    pub energy: Vec<f64>,
    /// ∫ χ² |Rm|^{d/2+1} dVol
    pub energy2: Vec<f64>,
}

impl MonitorSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// RFC-4180-style CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,psi_min,rm_max,volume,energy,energy2\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.t[i],
                self.psi_min[i],
                self.rm_max[i],
                self.volume[i],
                self.energy[i],
                self.energy2[i]
            ));
        }
        out
    }
}

/// Time-ordered snapshots and monitors of one flow run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, ProfileMetric)>,
    pub series: MonitorSeries,
    pub stop_reason: StopReason,
    /// Message attached to a numeric failure, if any.
    pub failure: Option<String>,
    /// Time of the stop trigger (last accepted time).
    pub final_time: f64,
    /// dt in force when the run stopped; bounds the singular-time resolution.
    pub final_dt: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_profile(&self) -> &ProfileMetric {
        &self.snapshots.last().expect("trajectory has snapshots").1
    }

    pub fn initial_profile(&self) -> &ProfileMetric {
        &self.snapshots.first().expect("trajectory has snapshots").1
    }
}

/// CFL ceiling min_nodes (φΔx)²/(2 max(1, q)).
pub fn cfl_ceiling(profile: &ProfileMetric) -> Result<f64> {
    let h = profile.spacing()?;
    let denom = 2.0 * profile.q.max(1) as f64;
    let min_phi = profile.phi.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((min_phi * h) * (min_phi * h) / denom)
}

/// Nodes per pole whose rates use the tangential curvature in place of the
/// normal one. Both agree to O(dist²) at a smooth pole, and the tangential
/// path severs a stiff discrete feedback between the gauge ODE and the
/// radius stencils that otherwise grows a boundary-layer mode.
const POLE_REGULARIZATION: usize = 3;

/// Right-hand side of the reduced flow at the given field values.
fn flow_rhs(
    profile: &ProfileMetric,
    phi: &[f64],
    psi: &[f64],
    chi_sq: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut k_n, k_t) =
        curvature::kn_kt_fields(&profile.grid, phi, psi, profile.topology, profile.q)?;
    let n = psi.len();
    if profile.topology == crate::geometry::Topology::ClosedSphere {
        for i in 0..=POLE_REGULARIZATION {
            k_n[i] = k_t[i];
            k_n[n - 1 - i] = k_t[n - 1 - i];
        }
    }
    let q = profile.q as f64;
    let mut dpsi = vec![0.0; n];
    let mut dphi = vec![0.0; n];
    for i in 0..n {
        dpsi[i] = -chi_sq[i] * psi[i] * (k_n[i] + (q - 1.0) * k_t[i]);
        dphi[i] = -chi_sq[i] * q * phi[i] * k_n[i];
    }
    Ok((dpsi, dphi))
}

/// Strength of the fourth-difference filter applied to the gauge factor
/// after each step. The gauge evolves by a pointwise ODE with no diffusion
/// of its own, so grid-scale noise fed back through the ψ_ss cross term
/// near a pole would otherwise grow; the filter damps it while acting at
/// O(h⁴) on smooth fields. It is scaled by χ² so that regions the flow
/// does not touch stay bit-identical.
const GAUGE_FILTER: f64 = 0.2;

fn apply_gauge_filter(profile: &ProfileMetric, phi: &mut [f64], chi_sq: &[f64]) {
    use crate::geometry::even_extension;
    let ext = even_extension(profile.topology);
    let n = phi.len();
    let m = n as isize - 1;
    let sample = |f: &[f64], i: isize| -> f64 {
        match ext {
            crate::stencil::Extension::Periodic => f[i.rem_euclid(m) as usize],
            _ => {
                if i < 0 {
                    f[(-i) as usize]
                } else if i > m {
                    f[(2 * m - i) as usize]
                } else {
                    f[i as usize]
                }
            }
        }
    };
    let mut out = phi.to_vec();
    for i in 0..n {
        let ii = i as isize;
        let fm2 = sample(phi, ii - 2);
        let fm1 = sample(phi, ii - 1);
        let fp1 = sample(phi, ii + 1);
        let fp2 = sample(phi, ii + 2);
        // Mirror-symmetric grouping keeps even data even bit for bit.
        let d4 = (fm2 + fp2) - 4.0 * (fm1 + fp1) + 6.0 * phi[i];
        out[i] = phi[i] - GAUGE_FILTER * chi_sq[i] / 16.0 * d4;
    }
    phi.copy_from_slice(&out);
}

fn rk4_step(profile: &ProfileMetric, chi_sq: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = profile.len();
    let combine = |base: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, kv)| b + c * kv).collect()
    };

    let (k1_psi, k1_phi) = flow_rhs(profile, &profile.phi, &profile.psi, chi_sq)?;
    let psi2 = combine(&profile.psi, &k1_psi, 0.5 * dt);
    let phi2 = combine(&profile.phi, &k1_phi, 0.5 * dt);
    let (k2_psi, k2_phi) = flow_rhs(profile, &phi2, &psi2, chi_sq)?;
    let psi3 = combine(&profile.psi, &k2_psi, 0.5 * dt);
    let phi3 = combine(&profile.phi, &k2_phi, 0.5 * dt);
    let (k3_psi, k3_phi) = flow_rhs(profile, &phi3, &psi3, chi_sq)?;
    let psi4 = combine(&profile.psi, &k3_psi, dt);
    let phi4 = combine(&profile.phi, &k3_phi, dt);
    let (k4_psi, k4_phi) = flow_rhs(profile, &phi4, &psi4, chi_sq)?;

    let mut new_psi = vec![0.0; n];
    let mut new_phi = vec![0.0; n];
    for i in 0..n {
        new_psi[i] = profile.psi[i]
            + dt / 6.0 * (k1_psi[i] + 2.0 * k2_psi[i] + 2.0 * k3_psi[i] + k4_psi[i]);
        new_phi[i] = profile.phi[i]
            + dt / 6.0 * (k1_phi[i] + 2.0 * k2_phi[i] + 2.0 * k3_phi[i] + k4_phi[i]);
    }
    apply_gauge_filter(profile, &mut new_phi, chi_sq);
    Ok((new_psi, new_phi))
}

fn chi_squared(profile: &ProfileMetric, cutoff: Option<&CutoffProfile>) -> Result<Vec<f64>> {
    match cutoff {
        None => Ok(vec![1.0; profile.len()]),
        Some(chi) => {
            chi.compatible_with(profile)?;
            Ok(chi.chi.iter().map(|&c| c * c).collect())
        }
    }
}

/// One explicit RK4 step of size `dt`; `None` cutoff means global flow.
///
/// The step is rejected when `dt` exceeds half the parabolic CFL ceiling or
/// when it produces a nonpositive interior ψ or a NaN.
pub fn step(
    profile: &ProfileMetric,
    cutoff: Option<&CutoffProfile>,
    dt: f64,
) -> Result<ProfileMetric> {
    profile.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let ceiling = 0.5 * cfl_ceiling(profile)?;
    if dt > ceiling {
        return Err(Error::Numeric(format!(
            "step rejected: dt = {dt} exceeds the CFL ceiling {ceiling}"
        )));
    }
    let chi_sq = chi_squared(profile, cutoff)?;
    let (new_psi, new_phi) = rk4_step(profile, &chi_sq, dt)?;
    let mut out = profile.clone();
    out.psi = new_psi;
    out.phi = new_phi;
    check_state(&out)?;
    Ok(out)
}

fn check_state(profile: &ProfileMetric) -> Result<()> {
    for i in 0..profile.len() {
        if !profile.psi[i].is_finite() || !profile.phi[i].is_finite() {
            return Err(Error::Numeric(format!("non-finite state at node {i}")));
        }
    }
    for i in profile.interior() {
        if profile.psi[i] <= 0.0 {
            return Err(Error::Numeric(format!(
                "interior psi became nonpositive at node {i}"
            )));
        }
        if profile.phi[i] <= 0.0 {
            return Err(Error::Numeric(format!(
                "gauge factor became nonpositive at node {i}"
            )));
        }
    }
    Ok(())
}

/// Integrate the flow until `t_end` or a stop condition fires.
///
/// Monitors are recorded every accepted step; snapshots every
/// `snapshot_stride` steps. Near a developing pinch the step size halves
/// whenever ψ_min drops by more than 20% in a single step, so the reported
/// singular time is resolution-limited rather than scheme-limited.
pub fn run_flow(profile: &ProfileMetric, config: &FlowConfig) -> Result<Trajectory> {
    profile.validate()?;
    config.validate(profile)?;
    let cutoff = match config.mode {
        FlowMode::Ricci => None,
        FlowMode::LocalRicci => config.cutoff.as_ref(),
    };
    let chi_sq = chi_squared(profile, cutoff)?;

    let psi_min0 = profile.psi_min_interior();
    let pinch_threshold = config.pinch_fraction * psi_min0;
    let rm_cap = config.curvature_cap.unwrap_or(1e8 / (psi_min0 * psi_min0));

    let mut current = profile.clone();
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut series = MonitorSeries::default();
    let mut snapshots = vec![(0.0, profile.clone())];
    let mut stop_reason = None;
    let mut failure = None;

    let base_dt = |p: &ProfileMetric| -> Result<f64> {
        match config.dt {
            DtPolicy::Fixed { dt } => {
                let ceiling = 0.5 * cfl_ceiling(p)?;
                if dt > ceiling {
                    return Err(Error::Numeric(format!(
                        "fixed dt = {dt} exceeds the CFL ceiling {ceiling}"
                    )));
                }
                Ok(dt)
            }
            DtPolicy::AdaptiveCfl { lambda } => Ok(lambda * cfl_ceiling(p)?),
        }
    };

    let record = |series: &mut MonitorSeries, t: f64, p: &ProfileMetric, state: &CurvatureState| {
        let d = p.dim() as f64;
        series.t.push(t);
        series.psi_min.push(p.psi_min_interior());
        series.rm_max.push(state.rm_max());
        series
            .volume
            .push(norms::band_volume(p, Band::All).unwrap_or(f64::NAN));
        let energy_field: Vec<f64> = state.rm_norm.iter().map(|&r| r.powf(d / 2.0)).collect();
        series.energy.push(integral_with_measure(p, &energy_field));
        let energy2_field: Vec<f64> = state
            .rm_norm
            .iter()
            .zip(&chi_sq)
            .map(|(&r, &c2)| c2 * r.powf(d / 2.0 + 1.0))
            .collect();
        series.energy2.push(integral_with_measure(p, &energy2_field));
    };

    let state0 = curvature::full_state(&current)?;
    record(&mut series, 0.0, &current, &state0);
    let mut dt_in_force = base_dt(&current)?;

    while t < config.t_end && stop_reason.is_none() {
        let mut dt = base_dt(&current)?.min(config.t_end - t);
        let psi_min_before = current.psi_min_interior();
        let mut accepted = None;
        let mut halvings = 0;
        loop {
            match rk4_step(&current, &chi_sq, dt) {
                Ok((new_psi, new_phi)) => {
                    let mut candidate = current.clone();
                    candidate.psi = new_psi;
                    candidate.phi = new_phi;
                    if check_state(&candidate).is_err() {
                        if halvings >= 60 {
                            failure =
                                Some("state check failed at the minimum step size".to_string());
                            stop_reason = Some(StopReason::NumericFailure);
                            break;
                        }
                        dt *= 0.5;
                        halvings += 1;
                        continue;
                    }
                    let psi_min_after = candidate.psi_min_interior();
                    let above_threshold = psi_min_after > pinch_threshold;
                    if above_threshold && psi_min_after < 0.8 * psi_min_before && halvings < 60 {
                        dt *= 0.5;
                        halvings += 1;
                        continue;
                    }
                    accepted = Some(candidate);
                    break;
                }
                Err(Error::SingularProfile(_)) => {
                    // An RK4 stage collapsed the neck; resolve with a
                    // smaller step until the pinch threshold fires cleanly.
                    if halvings >= 60 {
                        stop_reason = Some(StopReason::PinchDetected);
                        break;
                    }
                    dt *= 0.5;
                    halvings += 1;
                }
                Err(e) => {
                    failure = Some(e.to_string());
                    stop_reason = Some(StopReason::NumericFailure);
                    break;
                }
            }
        }
        let Some(next) = accepted else {
            break;
        };
        dt_in_force = dt;
        t += dt;
        steps += 1;
        current = next;

        match curvature::full_state_unchecked(&current) {
            Ok(state) => {
                record(&mut series, t, &current, &state);
                if current.psi_min_interior() < pinch_threshold {
                    stop_reason = Some(StopReason::PinchDetected);
                } else if state.rm_max() > rm_cap {
                    stop_reason = Some(StopReason::CurvatureCap);
                }
            }
            Err(Error::SingularProfile(_)) => {
                stop_reason = Some(StopReason::PinchDetected);
                record_without_curvature(&mut series, t, &current);
            }
            Err(e) => {
                failure = Some(e.to_string());
                stop_reason = Some(StopReason::NumericFailure);
                record_without_curvature(&mut series, t, &current);
            }
        }

        if config.snapshot_stride > 0 && steps % config.snapshot_stride == 0 {
            snapshots.push((t, current.clone()));
        }
    }

    let stop_reason = stop_reason.unwrap_or(StopReason::ReachedTEnd);
    if snapshots.last().map(|(st, _)| *st) != Some(t) {
        snapshots.push((t, current));
    }
    Ok(Trajectory {
        snapshots,
        series,
        stop_reason,
        failure,
        final_time: t,
        final_dt: dt_in_force,
        steps,
    })
}

fn record_without_curvature(series: &mut MonitorSeries, t: f64, p: &ProfileMetric) {
    series.t.push(t);
    series.psi_min.push(p.psi_min_interior());
    series.rm_max.push(f64::NAN);
    series
        .volume
        .push(norms::band_volume(p, Band::All).unwrap_or(f64::NAN));
    series.energy.push(f64::NAN);
    series.energy2.push(f64::NAN);
}

/// α(q) ∫ f ψᵠ φ dx over the whole profile.
pub(crate) fn integral_with_measure(profile: &ProfileMetric, field: &[f64]) -> f64 {
    let q = profile.q as i32;
    let mut acc = 0.0;
    for i in 1..profile.len() {
        let dx = profile.grid[i] - profile.grid[i - 1];
        let fa = field[i - 1] * profile.psi[i - 1].powi(q) * profile.phi[i - 1];
        let fb = field[i] * profile.psi[i].powi(q) * profile.phi[i];
        acc += 0.5 * (fa + fb) * dx;
    }
    norms::sphere_volume(profile.q) * acc
}

/// Residual of the evolution of the orthonormal-frame curvature components.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualReport {
    /// (t, residual) per interior snapshot triple.
    pub per_snapshot: Vec<(f64, f64)>,
    pub max_residual: f64,
}

const POLE_MARGIN: usize = 4;

/// Compare centered time differences of K_N and K_T across consecutive
/// snapshots with the analytic rate obtained by the chain rule through
/// ∂ₜψ and ∂ₜφ; the gradient and Hessian of χ² enter through the spatial
/// derivatives of those rate fields.
///
/// The max is taken over nodes at least [`POLE_MARGIN`] cells away from the
/// poles, where the 0/0 pole limits would otherwise dominate the comparison.
pub fn curvature_evolution_residual(
    trajectory: &Trajectory,
    cutoff: Option<&CutoffProfile>,
    window: Option<std::ops::Range<usize>>,
) -> Result<ResidualReport> {
    let snaps = &trajectory.snapshots;
    if snaps.len() < 3 {
        return Err(Error::InvalidParameter(
            "need at least 3 consecutive snapshots".into(),
        ));
    }
    let range = window.unwrap_or(1..snaps.len() - 1);
    if range.start < 1 || range.end > snaps.len() - 1 || range.is_empty() {
        return Err(Error::InvalidParameter("bad snapshot window".into()));
    }
    let dt0 = snaps[1].0 - snaps[0].0;
    for w in snaps.windows(2) {
        let d = w[1].0 - w[0].0;
        if (d - dt0).abs() > 1e-9 * dt0 {
            return Err(Error::InvalidParameter(
                "snapshots are not uniformly spaced in time".into(),
            ));
        }
    }

    let mut per_snapshot = Vec::new();
    let mut max_residual = 0.0_f64;
    for k in range {
        let (_, prev) = &snaps[k - 1];
        let (tk, mid) = &snaps[k];
        let (_, next) = &snaps[k + 1];
        let res = residual_at(prev, mid, next, cutoff, dt0)?;
        max_residual = max_residual.max(res);
        per_snapshot.push((*tk, res));
    }
    Ok(ResidualReport {
        per_snapshot,
        max_residual,
    })
}

fn residual_at(
    prev: &ProfileMetric,
    mid: &ProfileMetric,
    next: &ProfileMetric,
    cutoff: Option<&CutoffProfile>,
    dt: f64,
) -> Result<f64> {
    use crate::geometry::{even_extension, psi_extension, Topology};
    use crate::stencil;

    let q = mid.q as f64;
    let h = mid.spacing()?;
    let topo = mid.topology;
    let n = mid.len();
    let chi_sq = chi_squared(mid, cutoff)?;

    let (k_n_prev, k_t_prev) =
        curvature::kn_kt_fields(&prev.grid, &prev.phi, &prev.psi, topo, prev.q)?;
    let (k_n_next, k_t_next) =
        curvature::kn_kt_fields(&next.grid, &next.phi, &next.psi, topo, next.q)?;
    let (k_n, k_t) = curvature::kn_kt_fields(&mid.grid, &mid.phi, &mid.psi, topo, mid.q)?;

    // Metric rates at the middle snapshot.
    let mut u = vec![0.0; n]; // ∂ₜψ
    let mut u_over_psi = vec![0.0; n];
    let mut v_over_phi = vec![0.0; n]; // ∂ₜφ/φ
    for i in 0..n {
        u_over_psi[i] = -chi_sq[i] * (k_n[i] + (q - 1.0) * k_t[i]);
        u[i] = mid.psi[i] * u_over_psi[i];
        v_over_phi[i] = -chi_sq[i] * q * k_n[i];
    }

    let psi_ext = psi_extension(topo);
    let even_ext = even_extension(topo);
    let psi_x = stencil::deriv1(&mid.psi, h, psi_ext);
    let psi_s: Vec<f64> = psi_x.iter().zip(&mid.phi).map(|(d, p)| d / p).collect();
    // ψ_ss from the same discretization that produced K_N.
    let psi_ss: Vec<f64> = (0..n).map(|i| -k_n[i] * mid.psi[i]).collect();

    let u_x = stencil::deriv1(&u, h, psi_ext);
    let u_s: Vec<f64> = u_x.iter().zip(&mid.phi).map(|(d, p)| d / p).collect();
    // ∂ₜ(ψ_s) = u_s − ψ_s (∂ₜφ/φ)
    let dt_psi_s: Vec<f64> = (0..n).map(|i| u_s[i] - psi_s[i] * v_over_phi[i]).collect();
    let dt_psi_s_x = stencil::deriv1_low(&dt_psi_s, h, even_ext);
    // ∂ₜ(ψ_ss) = (∂ₜψ_s)_s − ψ_ss (∂ₜφ/φ)
    let dt_psi_ss: Vec<f64> = (0..n)
        .map(|i| dt_psi_s_x[i] / mid.phi[i] - psi_ss[i] * v_over_phi[i])
        .collect();

    let nodes: Vec<usize> = match topo {
        Topology::ClosedSphere => (POLE_MARGIN..n - POLE_MARGIN).collect(),
        Topology::Periodic => (0..n - 1).collect(),
    };

    let mut max_res = 0.0_f64;
    for &i in &nodes {
        let dt_k_n = -dt_psi_ss[i] / mid.psi[i] - k_n[i] * u_over_psi[i];
        let dt_k_t = -2.0 * psi_s[i] * dt_psi_s[i] / (mid.psi[i] * mid.psi[i])
            - 2.0 * k_t[i] * u_over_psi[i];
        let num_k_n = (k_n_next[i] - k_n_prev[i]) / (2.0 * dt);
        let num_k_t = (k_t_next[i] - k_t_prev[i]) / (2.0 * dt);
        max_res = max_res.max((num_k_n - dt_k_n).abs());
        max_res = max_res.max((num_k_t - dt_k_t).abs());
    }
    Ok(max_res)
}

/// log convergence order from residuals at two resolutions differing by the
/// given refinement ratio.
pub fn residual_order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        build_cutoff, build_cylinder, build_dumbbell, build_round_sphere, CutoffProfile,
        DumbbellShape,
    };
    use crate::oracles;
    use approx::assert_relative_eq;

    #[test]
    fn shrinking_sphere_matches_exact_solution() {
        let p = build_round_sphere(1.0, 3, 400).unwrap();
        let config = FlowConfig::ricci(DtPolicy::AdaptiveCfl { lambda: 0.25 }, 0.1);
        let traj = run_flow(&p, &config).unwrap();
        assert_eq!(traj.stop_reason, StopReason::ReachedTEnd);
        let exact = oracles::exact_sphere_shrink(1.0, 3, 0.1).unwrap();
        let max_psi = traj.final_profile().psi_max();
        assert_relative_eq!(max_psi, exact, max_relative = 1e-4);
    }

    #[test]
    fn sphere_error_order_under_refinement() {
        let err = |m: usize| -> f64 {
            let p = build_round_sphere(1.0, 3, m).unwrap();
            let config = FlowConfig::ricci(DtPolicy::AdaptiveCfl { lambda: 0.25 }, 0.05);
            let traj = run_flow(&p, &config).unwrap();
            let exact = oracles::exact_sphere_shrink(1.0, 3, traj.final_time).unwrap();
            (traj.final_profile().psi_max() - exact).abs() / exact
        };
        let (e1, e2) = (err(100), err(200));
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "observed order {order} ({e1} -> {e2})");
    }

    #[test]
    fn zero_cutoff_freezes_the_metric_exactly() {
        let p = build_round_sphere(1.0, 3, 128).unwrap();
        let chi = CutoffProfile::constant(&p, 0.0).unwrap();
        let stepped = step(&p, Some(&chi), 1e-6).unwrap();
        assert_eq!(p.psi, stepped.psi);
        assert_eq!(p.phi, stepped.phi);
    }

    #[test]
    fn unit_cutoff_recovers_global_flow_bitwise() {
        let p = build_round_sphere(1.0, 3, 128).unwrap();
        let chi = CutoffProfile::constant(&p, 1.0).unwrap();
        let a = step(&p, None, 1e-6).unwrap();
        let b = step(&p, Some(&chi), 1e-6).unwrap();
        assert_eq!(a.psi, b.psi);
        assert_eq!(a.phi, b.phi);
    }

    #[test]
    fn cylinder_matches_homogeneous_ode() {
        let p = build_cylinder(1.0, 3, 4.0, 200).unwrap();
        let config = FlowConfig::ricci(DtPolicy::AdaptiveCfl { lambda: 0.25 }, 0.1);
        let traj = run_flow(&p, &config).unwrap();
        let exact = oracles::exact_cylinder_shrink(1.0, 3, traj.final_time).unwrap();
        for &v in &traj.final_profile().psi {
            assert_relative_eq!(v, exact, max_relative = 1e-4);
        }
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let p = build_round_sphere(1.0, 3, 100).unwrap();
        let too_big = cfl_ceiling(&p).unwrap();
        assert!(matches!(step(&p, None, too_big), Err(Error::Numeric(_))));
    }

    #[test]
    fn sphere_runs_to_near_extinction() {
        let p = build_round_sphere(1.0, 3, 100).unwrap();
        let t_ext = oracles::sphere_extinction_time(1.0, 3);
        let mut config = FlowConfig::ricci(DtPolicy::AdaptiveCfl { lambda: 0.25 }, 2.0 * t_ext);
        // Uniform shrinking: let the psi_min threshold do the detection.
        config.curvature_cap = Some(f64::INFINITY);
        let traj = run_flow(&p, &config).unwrap();
        assert_eq!(traj.stop_reason, StopReason::PinchDetected);
        assert!(traj.final_time < t_ext);
        assert!(traj.final_time > 0.9 * t_ext, "stopped at {}", traj.final_time);
    }

    #[test]
    fn local_flow_freezes_outside_the_support() {
        let p = build_dumbbell(0.3, 1.0, 3, &DumbbellShape::reference(), 400).unwrap();
        let center = p.center_arclength();
        let chi = build_cutoff(&p, center, 0.25, 2.0 / 3.0).unwrap();
        let config =
            FlowConfig::local_ricci(chi, DtPolicy::AdaptiveCfl { lambda: 0.25 }, 0.002);
        let traj = run_flow(&p, &config).unwrap();
        assert_eq!(traj.stop_reason, StopReason::ReachedTEnd);
        let arcs = p.arclength();
        let final_p = traj.final_profile();
        let mut frozen = 0;
        let mut moved = 0;
        for i in 0..p.len() {
            if (arcs[i] - center).abs() >= 2.0 / 3.0 {
                assert_eq!(p.psi[i], final_p.psi[i], "psi moved outside supp chi");
                assert_eq!(p.phi[i], final_p.phi[i], "phi moved outside supp chi");
                frozen += 1;
            } else if (arcs[i] - center).abs() <= 0.25 && p.psi[i] != final_p.psi[i] {
                moved += 1;
            }
        }
        assert!(frozen > 0);
        assert!(moved > 0, "interior of supp chi should actually evolve");
    }

    #[test]
    fn symmetric_data_stays_symmetric() {
        let p = build_round_sphere(1.0, 3, 200).unwrap();
        let config = FlowConfig::ricci(DtPolicy::AdaptiveCfl { lambda: 0.25 }, 0.05);
        let traj = run_flow(&p, &config).unwrap();
        let f = traj.final_profile();
        let n = f.len();
        for i in 0..n {
            let asym = (f.psi[i] - f.psi[n - 1 - i]).abs();
            assert!(asym < 1e-12, "asymmetry {asym} at node {i}");
        }
    }

    #[test]
    fn residual_vanishes_for_frozen_flow() {
        let p = build_round_sphere(1.0, 3, 100).unwrap();
        let chi = CutoffProfile::constant(&p, 0.0).unwrap();
        let mut config = FlowConfig::local_ricci(chi.clone(), DtPolicy::Fixed { dt: 1e-6 }, 5e-6);
        config.snapshot_stride = 1;
        let traj = run_flow(&p, &config).unwrap();
        let report = curvature_evolution_residual(&traj, Some(&chi), None).unwrap();
        assert_eq!(report.max_residual, 0.0);
    }

    #[test]
    fn residual_converges_on_round_sphere() {
        let res = |m: usize, dt: f64| -> f64 {
            let p = build_round_sphere(1.0, 3, m).unwrap();
            let mut config = FlowConfig::ricci(DtPolicy::Fixed { dt }, 20.0 * dt);
            config.snapshot_stride = 1;
            let traj = run_flow(&p, &config).unwrap();
            curvature_evolution_residual(&traj, None, Some(5..8))
                .unwrap()
                .max_residual
        };
        let coarse = res(100, 4e-5);
        let fine = res(200, 1e-5);
        // dt scales with h², so doubling m should cut the residual ~4x.
        let order = residual_order(coarse, fine, 2.0);
        assert!(order > 1.8, "order {order} ({coarse} -> {fine})");
    }

    #[test]
    fn residual_requires_three_snapshots() {
        let p = build_round_sphere(1.0, 3, 100).unwrap();
        let config = FlowConfig::ricci(DtPolicy::AdaptiveCfl { lambda: 0.25 }, 1e-4);
        let traj = run_flow(&p, &config).unwrap();
        assert!(curvature_evolution_residual(&traj, None, None).is_err());
    }

    #[test]
    fn trajectory_series_is_time_ordered() {
        let p = build_round_sphere(1.0, 3, 100).unwrap();
        let mut config = FlowConfig::ricci(DtPolicy::AdaptiveCfl { lambda: 0.25 }, 0.01);
        config.snapshot_stride = 10;
        let traj = run_flow(&p, &config).unwrap();
        assert!(traj.series.t.windows(2).all(|w| w[1] > w[0]));
        assert!(traj.snapshots.windows(2).all(|w| w[1].0 > w[0].0));
        let csv = traj.series.to_csv();
        assert!(csv.starts_with("t,psi_min,rm_max,volume,energy,energy2\n"));
    }
}
