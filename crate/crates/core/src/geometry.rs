//! Rotationally symmetric profile metrics, cutoff functions, and
//! coordinate-grid metric fields.
//!
//! A [`ProfileMetric`] samples the warped product `g = φ² dx² + ψ² dSᵠ` on a
//! fixed coordinate grid. The gauge factor φ converts coordinate increments
//! to arclength (`ds = φ dx`); keeping the grid fixed and letting the flow
//! move φ avoids re-meshing. All arclength quantities are recomputed from φ.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stencil::{self, Extension};

/// Relative tolerance on the pole-closing slope |ψ_s| = 1.
pub const CLOSING_SLOPE_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// ψ vanishes at both endpoints and the metric closes smoothly there.
    ClosedSphere,
    /// ψ > 0 everywhere; the last node is identified with the first.
    Periodic,
}

/// Warped-product metric `g = φ² dx² + ψ² dSᵠ` sampled on a 1D grid.
///
/// Total dimension is `q + 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileMetric {
    /// Fiber sphere dimension (q ≥ 2).
    pub q: usize,
    /// Strictly increasing coordinates x₀..x_M.
    pub grid: Vec<f64>,
    /// Coordinate-to-arclength factor, φ > 0.
    pub phi: Vec<f64>,
    /// Warping radius, ψ ≥ 0.
    pub psi: Vec<f64>,
    pub topology: Topology,
    /// Declares the profile even about the domain midpoint.
    pub symmetric: bool,
}

impl ProfileMetric {
    /// Total dimension of the manifold.
    pub fn dim(&self) -> usize {
        self.q + 1
    }

    /// Number of grid nodes.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Uniform grid spacing (errors on non-uniform grids).
    pub fn spacing(&self) -> Result<f64> {
        stencil::uniform_spacing(&self.grid)
    }

    /// Cumulative arclength s(x) = ∫ φ dx with s(x₀) = 0 (trapezoid rule).
    pub fn arclength(&self) -> Vec<f64> {
        arclength(self)
    }

    /// Arclength of the full domain.
    pub fn total_arclength(&self) -> f64 {
        *self.arclength().last().unwrap()
    }

    /// Midpoint of the domain in arclength; the neck of an even dumbbell.
    pub fn center_arclength(&self) -> f64 {
        0.5 * self.total_arclength()
    }

    /// Indices considered interior (poles excluded for closed profiles;
    /// every node for periodic ones, where node M duplicates node 0).
    pub fn interior(&self) -> std::ops::Range<usize> {
        match self.topology {
            Topology::ClosedSphere => 1..self.len() - 1,
            Topology::Periodic => 0..self.len() - 1,
        }
    }

    /// Smallest interior fiber radius.
    pub fn psi_min_interior(&self) -> f64 {
        self.interior()
            .map(|i| self.psi[i])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest fiber radius.
    pub fn psi_max(&self) -> f64 {
        self.psi.iter().copied().fold(0.0, f64::max)
    }

    /// Linear interpolation of ψ at a given arclength.
    pub fn psi_at_arclength(&self, s: f64) -> Result<f64> {
        let arcs = self.arclength();
        interp_linear(&arcs, &self.psi, s)
    }

    /// Check all structural invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n < 3 {
            return Err(Error::InvalidProfile("need at least 3 nodes".into()));
        }
        if self.phi.len() != n || self.psi.len() != n {
            return Err(Error::InvalidProfile("field lengths differ from grid".into()));
        }
        if self.q < 2 {
            return Err(Error::InvalidProfile("fiber dimension must be >= 2".into()));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidProfile("grid not strictly increasing".into()));
        }
        if self.phi.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidProfile("phi must be positive".into()));
        }
        if self.psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("psi not finite".into()));
        }
        match self.topology {
            Topology::ClosedSphere => {
                if self.psi[0] != 0.0 || self.psi[n - 1] != 0.0 {
                    return Err(Error::InvalidProfile(
                        "closed profile must have psi = 0 exactly at the endpoints".into(),
                    ));
                }
                if self.psi[1..n - 1].iter().any(|&v| v <= 0.0) {
                    return Err(Error::InvalidProfile(
                        "closed profile must have psi > 0 in the interior".into(),
                    ));
                }
                let (sl, sr) = self.closing_slopes()?;
                for (side, s) in [("left", sl), ("right", sr)] {
                    if (s.abs() - 1.0).abs() > CLOSING_SLOPE_TOL {
                        return Err(Error::InvalidProfile(format!(
                            "{side} pole closing slope |psi_s| = {} not within {CLOSING_SLOPE_TOL} of 1",
                            s.abs()
                        )));
                    }
                }
            }
            Topology::Periodic => {
                if self.psi.iter().any(|&v| v <= 0.0) {
                    return Err(Error::InvalidProfile(
                        "periodic profile must have psi > 0 everywhere".into(),
                    ));
                }
                if self.psi[0] != self.psi[n - 1] || self.phi[0] != self.phi[n - 1] {
                    return Err(Error::InvalidProfile(
                        "periodic profile must repeat its first node at the end".into(),
                    ));
                }
            }
        }
        if self.symmetric {
            let scale = self.psi_max().max(1e-300);
            for i in 0..n {
                let j = n - 1 - i;
                if (self.psi[i] - self.psi[j]).abs() > 1e-8 * scale
                    || (self.phi[i] - self.phi[j]).abs() > 1e-8 * self.phi[i].abs()
                {
                    return Err(Error::InvalidProfile(
                        "profile flagged symmetric is not even about the midpoint".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Arclength slope of ψ at both poles (closed profiles only).
    pub fn closing_slopes(&self) -> Result<(f64, f64)> {
        if self.topology != Topology::ClosedSphere {
            return Err(Error::InvalidParameter(
                "closing slopes are defined for closed profiles".into(),
            ));
        }
        let h = self.spacing()?;
        let n = self.len();
        // One-sided forms of the fourth-order stencil with odd-reflected ghosts.
        let left = (8.0 * self.psi[1] - self.psi[2]) / (6.0 * h) / self.phi[0];
        let right = -(8.0 * self.psi[n - 2] - self.psi[n - 3]) / (6.0 * h) / self.phi[n - 1];
        Ok((left, right))
    }

    /// Resample onto a finer uniform grid with `new_m + 1` nodes by linear
    /// interpolation. Endpoint values are preserved exactly.
    pub fn resample(&self, new_m: usize) -> Result<ProfileMetric> {
        if new_m < 2 {
            return Err(Error::InvalidParameter("resample needs >= 2 cells".into()));
        }
        let x0 = self.grid[0];
        let x1 = *self.grid.last().unwrap();
        let h = (x1 - x0) / new_m as f64;
        let grid: Vec<f64> = (0..=new_m).map(|i| x0 + i as f64 * h).collect();
        let phi: Vec<f64> = grid
            .iter()
            .map(|&x| interp_linear(&self.grid, &self.phi, x).unwrap())
            .collect();
        let mut psi: Vec<f64> = grid
            .iter()
            .map(|&x| interp_linear(&self.grid, &self.psi, x).unwrap())
            .collect();
        if self.topology == Topology::ClosedSphere {
            psi[0] = 0.0;
            psi[new_m] = 0.0;
        }
        let out = ProfileMetric {
            q: self.q,
            grid,
            phi,
            psi,
            topology: self.topology,
            symmetric: self.symmetric,
        };
        out.validate()?;
        Ok(out)
    }

    /// Serialize as a columnar text table (x, φ, ψ per row).
    pub fn to_columnar_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# profile v1\n");
        out.push_str(&format!("# q = {}\n", self.q));
        out.push_str(&format!(
            "# topology = {}\n",
            match self.topology {
                Topology::ClosedSphere => "closed_sphere",
                Topology::Periodic => "periodic",
            }
        ));
        out.push_str(&format!("# symmetric = {}\n", self.symmetric));
        out.push_str("# x phi psi\n");
        for i in 0..self.len() {
            out.push_str(&format!("{} {} {}\n", self.grid[i], self.phi[i], self.psi[i]));
        }
        out
    }

    /// Parse the columnar text format produced by [`to_columnar_text`].
    ///
    /// [`to_columnar_text`]: ProfileMetric::to_columnar_text
    pub fn from_columnar_text(text: &str) -> Result<ProfileMetric> {
        let mut q = None;
        let mut topology = None;
        let mut symmetric = false;
        let mut grid = Vec::new();
        let mut phi = Vec::new();
        let mut psi = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some((key, value)) = rest.split_once('=') {
                    match key.trim() {
                        "q" => {
                            q = Some(value.trim().parse::<usize>().map_err(|e| {
                                Error::Parse(format!("line {}: bad q: {e}", lineno + 1))
                            })?)
                        }
                        "topology" => {
                            topology = Some(match value.trim() {
                                "closed_sphere" => Topology::ClosedSphere,
                                "periodic" => Topology::Periodic,
                                other => {
                                    return Err(Error::Parse(format!(
                                        "line {}: unknown topology '{other}'",
                                        lineno + 1
                                    )))
                                }
                            })
                        }
                        "symmetric" => {
                            symmetric = value.trim() == "true";
                        }
                        _ => {}
                    }
                }
                continue;
            }
            let mut cols = line.split_whitespace();
            let mut next = |name: &str| -> Result<f64> {
                cols.next()
                    .ok_or_else(|| Error::Parse(format!("line {}: missing {name}", lineno + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: bad {name}: {e}", lineno + 1)))
            };
            grid.push(next("x")?);
            phi.push(next("phi")?);
            psi.push(next("psi")?);
        }
        let profile = ProfileMetric {
            q: q.ok_or_else(|| Error::Parse("missing '# q =' header".into()))?,
            grid,
            phi,
            psi,
            topology: topology.ok_or_else(|| Error::Parse("missing '# topology =' header".into()))?,
            symmetric,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<ProfileMetric> {
        let profile: ProfileMetric =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }
}

fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> Result<f64> {
    let n = xs.len();
    if x < xs[0] - 1e-12 || x > xs[n - 1] + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "interpolation point {x} outside [{}, {}]",
            xs[0],
            xs[n - 1]
        )));
    }
    let x = x.clamp(xs[0], xs[n - 1]);
    // Binary search for the cell containing x.
    let mut lo = 0usize;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if xs[mid] <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    Ok(ys[lo] + t * (ys[hi] - ys[lo]))
}

/// Cumulative arclength s(x) = ∫ φ dx, s(x₀) = 0, by the trapezoid rule.
pub fn arclength(profile: &ProfileMetric) -> Vec<f64> {
    let n = profile.len();
    let mut s = vec![0.0; n];
    for i in 1..n {
        let dx = profile.grid[i] - profile.grid[i - 1];
        s[i] = s[i - 1] + 0.5 * (profile.phi[i] + profile.phi[i - 1]) * dx;
    }
    s
}

/// Round sphere of radius ρ and total dimension q+1: ψ(s) = ρ cos(s/ρ) on
/// s ∈ [−πρ/2, πρ/2] in the arclength gauge φ ≡ 1.
pub fn build_round_sphere(rho: f64, q: usize, m: usize) -> Result<ProfileMetric> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    if q < 2 {
        return Err(Error::InvalidParameter("fiber dimension must be >= 2".into()));
    }
    if m < 16 {
        return Err(Error::InvalidParameter("grid size must be >= 16".into()));
    }
    let half = std::f64::consts::FRAC_PI_2 * rho;
    let h = 2.0 * half / m as f64;
    // Build the grid symmetric about zero so paired nodes mirror exactly.
    let grid: Vec<f64> = (0..=m).map(|i| (i as f64 - m as f64 / 2.0) * h).collect();
    let mut psi: Vec<f64> = grid.iter().map(|&s| rho * (s.abs() / rho).cos()).collect();
    psi[0] = 0.0;
    psi[m] = 0.0;
    let profile = ProfileMetric {
        q,
        grid,
        phi: vec![1.0; m + 1],
        psi,
        topology: Topology::ClosedSphere,
        symmetric: true,
    };
    profile.validate()?;
    Ok(profile)
}

/// Product cylinder ψ ≡ ρ on a periodic domain of the given length
/// (test fixture; φ ≡ 1).
pub fn build_cylinder(rho: f64, q: usize, length: f64, m: usize) -> Result<ProfileMetric> {
    if !(rho > 0.0) || !(length > 0.0) {
        return Err(Error::InvalidParameter(
            "radius and length must be positive".into(),
        ));
    }
    if q < 2 {
        return Err(Error::InvalidParameter("fiber dimension must be >= 2".into()));
    }
    if m < 16 {
        return Err(Error::InvalidParameter("grid size must be >= 16".into()));
    }
    let h = length / m as f64;
    let grid: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
    let profile = ProfileMetric {
        q,
        grid,
        phi: vec![1.0; m + 1],
        psi: vec![rho; m + 1],
        topology: Topology::Periodic,
        symmetric: true,
    };
    profile.validate()?;
    Ok(profile)
}

/// Shape parameters for the dumbbell builder.
///
/// `kappa` softens the neck band to `ψ = √(G² + κ s²)`; κ = 1 is the pure
/// band (scalar curvature vanishes on it for q = 3), κ slightly below 1
/// makes R strictly positive there. `cap_slope` is the slope at which the
/// polar cap curve leaves the band, `blend_width` the arclength over which
/// the two curves are blended.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DumbbellShape {
    pub kappa: f64,
    pub cap_slope: f64,
    pub blend_width: f64,
}

impl Default for DumbbellShape {
    fn default() -> Self {
        DumbbellShape {
            kappa: 1.0,
            cap_slope: 0.6,
            blend_width: 0.35,
        }
    }
}

impl DumbbellShape {
    /// Shape used by the repository's reference pinch scenarios: the neck is
    /// softened just enough that all four pinching hypotheses hold strictly.
    pub fn reference() -> Self {
        DumbbellShape {
            kappa: 0.9,
            cap_slope: 0.6,
            blend_width: 0.35,
        }
    }
}

/// Ninth-degree smootherstep: four vanishing derivatives at both ends.
fn smootherstep4(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let u5 = u * u * u * u * u;
        u5 * (70.0 * u * u * u * u - 315.0 * u * u * u + 540.0 * u * u - 420.0 * u + 126.0)
    }
}

/// Antiderivative of [`smootherstep4`] with F(0) = 0; F(1) = 1/2.
fn smootherstep4_integral(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        0.5 + (u - 1.0)
    } else {
        let u6 = u * u * u * u * u * u;
        u6 * (7.0 * u * u * u * u - 35.0 * u * u * u + 67.5 * u * u - 60.0 * u + 21.0)
    }
}

/// Even dumbbell: neck band `ψ = √(G² + κ s²)` for |s| ≤ c blended into
/// cosine cap lobes that close the sphere with |ψ_s| = 1 at the poles.
///
/// The builder only guarantees the geometry (one neck at s = 0, one bump per
/// side, monotone in between); whether a given instance satisfies the
/// pinching-theorem hypotheses is the monitor checker's job.
pub fn build_dumbbell(
    g_neck: f64,
    c: f64,
    q: usize,
    shape: &DumbbellShape,
    m: usize,
) -> Result<ProfileMetric> {
    if !(g_neck > 0.0 && c > g_neck) {
        return Err(Error::InvalidParameter(
            "need 0 < neck radius < band half-width".into(),
        ));
    }
    if q < 2 {
        return Err(Error::InvalidParameter("fiber dimension must be >= 2".into()));
    }
    if m < 64 {
        return Err(Error::InvalidParameter("grid size must be >= 64".into()));
    }
    if m % 2 != 0 {
        return Err(Error::InvalidParameter(
            "grid size must be even so a node sits on the neck".into(),
        ));
    }
    let kappa = shape.kappa;
    let m0 = shape.cap_slope;
    let w = shape.blend_width;
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidParameter("kappa must lie in (0, 1]".into()));
    }
    if !(m0 > 0.0 && m0 < 1.0) {
        return Err(Error::InvalidParameter("cap slope must lie in (0, 1)".into()));
    }
    if !(w > 0.0) {
        return Err(Error::InvalidParameter("blend width must be positive".into()));
    }

    // Band curve and its value at the junction.
    let band = |u: f64| (g_neck * g_neck + kappa * u * u).sqrt();
    let psi_c = band(c);
    // Cosine cap anchored at the junction with prescribed slope m0:
    // psi_B(u) = rho_b cos((u - s_b)/rho_b), matching value psi_c at u = c.
    let theta_c = m0.asin();
    let rho_b = psi_c / theta_c.cos();
    let s_b = c + rho_b * theta_c;
    let s_pole = s_b + std::f64::consts::FRAC_PI_2 * rho_b;
    if c + w >= s_b {
        return Err(Error::Construction(
            "blend window reaches past the bump; reduce blend_width or cap_slope".into(),
        ));
    }
    let cap = |u: f64| rho_b * ((u - s_b) / rho_b).cos();

    let h = 2.0 * s_pole / m as f64;
    let grid: Vec<f64> = (0..=m).map(|i| (i as f64 - m as f64 / 2.0) * h).collect();
    let mut psi: Vec<f64> = grid
        .iter()
        .map(|&s| {
            let u = s.abs();
            if u <= c {
                band(u)
            } else if u < c + w {
                let sigma = smootherstep4((u - c) / w);
                (1.0 - sigma) * band(u) + sigma * cap(u)
            } else {
                cap(u)
            }
        })
        .collect();
    psi[0] = 0.0;
    psi[m] = 0.0;

    // Reject parameter combinations that break the intended shape: the
    // profile must rise monotonically from the neck to the bump, keep
    // |psi_s| < 1 in the interior, and stay positive.
    let half = m / 2;
    for i in half..m {
        if psi[i] <= 0.0 && i != m {
            return Err(Error::Construction(format!(
                "blend produced nonpositive psi at s = {}",
                grid[i]
            )));
        }
        let slope = (psi[i + 1] - psi[i]) / h;
        if grid[i] < s_b - h && slope <= 0.0 {
            return Err(Error::Construction(format!(
                "blend not monotone before the bump at s = {}",
                grid[i]
            )));
        }
        if i + 1 < m && slope.abs() >= 1.0 {
            return Err(Error::Construction(format!(
                "interior |psi_s| = {} >= 1 at s = {}",
                slope.abs(),
                grid[i]
            )));
        }
    }

    let profile = ProfileMetric {
        q,
        grid,
        phi: vec![1.0; m + 1],
        psi,
        topology: Topology::ClosedSphere,
        symmetric: true,
    };
    profile.validate()?;

    // Exactly one interior neck.
    let necks = count_strict_minima(&profile.psi);
    if necks != 1 {
        return Err(Error::Construction(format!(
            "expected exactly one neck, found {necks}"
        )));
    }
    Ok(profile)
}

fn count_strict_minima(psi: &[f64]) -> usize {
    let n = psi.len();
    (1..n - 1)
        .filter(|&i| psi[i] < psi[i - 1] && psi[i] < psi[i + 1])
        .count()
}

/// Cutoff function of a local flow, sampled on the profile's grid.
///
/// χ ≡ 1 within arclength `r_in` of the center, χ ≡ 0 beyond `r_out`, with a
/// C⁴ ramp in between whose peak slope is 1.25/(r_out − r_in) — inside the
/// Lipschitz budget 4·(2/3 − 1/4)/(r_out − r_in) of the supported ramp.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub chi: Vec<f64>,
    /// Center in arclength from the first node.
    pub center: f64,
    pub r_in: f64,
    pub r_out: f64,
}

/// Fraction of the ramp spent accelerating at each edge.
const RAMP_EDGE: f64 = 0.2;

/// C⁴ unit ramp: T(0) = 0, T(1) = 1, peak slope 1/(1 − RAMP_EDGE).
fn ramp(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let e = RAMP_EDGE;
    // Integral of a trapezoidal slope profile with smootherstep edges.
    let area = |u: f64| -> f64 {
        if u <= e {
            e * smootherstep4_integral(u / e)
        } else if u <= 1.0 - e {
            e * 0.5 + (u - e)
        } else {
            e * 0.5 + (1.0 - 2.0 * e) + e * (0.5 - smootherstep4_integral((1.0 - u) / e))
        }
    };
    area(u) / (1.0 - e)
}

impl CutoffProfile {
    /// Constant cutoff (test fixture; value must lie in [0, 1]).
    pub fn constant(profile: &ProfileMetric, value: f64) -> Result<CutoffProfile> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidParameter("cutoff value must be in [0,1]".into()));
        }
        let total = profile.total_arclength();
        Ok(CutoffProfile {
            chi: vec![value; profile.len()],
            center: 0.5 * total,
            r_in: 0.5 * total,
            r_out: total,
        })
    }

    /// Largest |∇χ| over the grid, by centered differences in arclength.
    pub fn max_gradient(&self, profile: &ProfileMetric) -> Result<f64> {
        if self.chi.len() != profile.len() {
            return Err(Error::GridMismatch("cutoff not sampled on this grid".into()));
        }
        let s = profile.arclength();
        let mut max = 0.0_f64;
        for i in 1..self.chi.len() - 1 {
            let d = (self.chi[i + 1] - self.chi[i - 1]) / (s[i + 1] - s[i - 1]);
            max = max.max(d.abs());
        }
        Ok(max)
    }

    /// True when every node is within [0, 1] and the grid lengths agree.
    pub fn compatible_with(&self, profile: &ProfileMetric) -> Result<()> {
        if self.chi.len() != profile.len() {
            return Err(Error::GridMismatch(format!(
                "cutoff has {} nodes, profile {}",
                self.chi.len(),
                profile.len()
            )));
        }
        if self.chi.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidProfile("cutoff values must be in [0,1]".into()));
        }
        Ok(())
    }
}

/// Build a cutoff supported in the arclength ball of radius `r_out` about
/// `s0`, identically 1 within `r_in`.
pub fn build_cutoff(
    profile: &ProfileMetric,
    s0: f64,
    r_in: f64,
    r_out: f64,
) -> Result<CutoffProfile> {
    if !(r_in > 0.0 && r_in < r_out) {
        return Err(Error::InvalidParameter(
            "need 0 < r_in < r_out for the cutoff support".into(),
        ));
    }
    let s = profile.arclength();
    let total = *s.last().unwrap();
    if s0 < 0.0 || s0 > total {
        return Err(Error::InvalidParameter(format!(
            "cutoff center {s0} outside the profile's arclength range [0, {total}]"
        )));
    }
    match profile.topology {
        Topology::ClosedSphere => {
            if r_out > s0 || r_out > total - s0 {
                return Err(Error::InvalidParameter(format!(
                    "cutoff support radius {r_out} exceeds the distance from s0 = {s0} to the domain ends"
                )));
            }
        }
        Topology::Periodic => {
            if 2.0 * r_out > total {
                return Err(Error::InvalidParameter(
                    "cutoff support exceeds half the period".into(),
                ));
            }
        }
    }
    let width = r_out - r_in;
    let chi = s
        .iter()
        .map(|&si| {
            let dist = match profile.topology {
                Topology::ClosedSphere => (si - s0).abs(),
                Topology::Periodic => {
                    let d = (si - s0).abs();
                    d.min(total - d)
                }
            };
            if dist <= r_in {
                1.0
            } else if dist >= r_out {
                0.0
            } else {
                1.0 - ramp((dist - r_in) / width)
            }
        })
        .collect();
    Ok(CutoffProfile {
        chi,
        center: s0,
        r_in,
        r_out,
    })
}

/// Symmetric positive-definite matrix field on a coordinate grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoordinateMetricField {
    /// Coordinate dimension of each matrix.
    pub dim: usize,
    /// Node coordinates (arbitrary sample points in the box).
    pub nodes: Vec<Vec<f64>>,
    /// One SPD matrix per node.
    pub matrices: Vec<DMatrix<f64>>,
}

impl CoordinateMetricField {
    pub fn new(dim: usize, nodes: Vec<Vec<f64>>, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let field = CoordinateMetricField { dim, nodes, matrices };
        field.validate()?;
        Ok(field)
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.len() != self.matrices.len() {
            return Err(Error::InvalidProfile(
                "node and matrix counts differ".into(),
            ));
        }
        if self.matrices.is_empty() {
            return Err(Error::InvalidProfile("field has no nodes".into()));
        }
        for (k, g) in self.matrices.iter().enumerate() {
            if g.nrows() != self.dim || g.ncols() != self.dim {
                return Err(Error::InvalidProfile(format!(
                    "matrix at node {k} is {}x{}, expected {}x{}",
                    g.nrows(),
                    g.ncols(),
                    self.dim,
                    self.dim
                )));
            }
            let scale = g.amax().max(1e-300);
            for i in 0..self.dim {
                for j in 0..i {
                    if (g[(i, j)] - g[(j, i)]).abs() > 1e-10 * scale {
                        return Err(Error::InvalidProfile(format!(
                            "matrix at node {k} is not symmetric"
                        )));
                    }
                }
            }
            if g.clone().cholesky().is_none() {
                return Err(Error::InvalidProfile(format!(
                    "matrix at node {k} is not positive definite"
                )));
            }
        }
        Ok(())
    }

    /// Diagonal coordinate representation of a profile metric over its
    /// interior nodes: diag(φ², ψ², ..., ψ²) in an orthonormal fiber frame
    /// of the reference round sphere.
    pub fn from_profile(profile: &ProfileMetric) -> Result<CoordinateMetricField> {
        profile.validate()?;
        let d = profile.dim();
        let mut nodes = Vec::new();
        let mut matrices = Vec::new();
        for i in profile.interior() {
            let mut g = DMatrix::<f64>::zeros(d, d);
            g[(0, 0)] = profile.phi[i] * profile.phi[i];
            for k in 1..d {
                g[(k, k)] = profile.psi[i] * profile.psi[i];
            }
            nodes.push(vec![profile.grid[i]]);
            matrices.push(g);
        }
        CoordinateMetricField::new(d, nodes, matrices)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("field serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<CoordinateMetricField> {
        let field: CoordinateMetricField =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        field.validate()?;
        Ok(field)
    }

    /// Check two fields share the same node set.
    pub fn same_grid(&self, other: &CoordinateMetricField) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::GridMismatch("field dimensions differ".into()));
        }
        if self.nodes.len() != other.nodes.len() {
            return Err(Error::GridMismatch("node counts differ".into()));
        }
        for (a, b) in self.nodes.iter().zip(&other.nodes) {
            if a.len() != b.len()
                || a.iter()
                    .zip(b)
                    .any(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(1.0))
            {
                return Err(Error::GridMismatch("node coordinates differ".into()));
            }
        }
        Ok(())
    }
}

/// Extension kinds for the warped-product fields, shared with the stencil
/// helpers: ψ is odd about the poles, φ and even scalars are even.
pub(crate) fn psi_extension(topology: Topology) -> Extension {
    match topology {
        Topology::ClosedSphere => Extension::OddAtEnds,
        Topology::Periodic => Extension::Periodic,
    }
}

pub(crate) fn even_extension(topology: Topology) -> Extension {
    match topology {
        Topology::ClosedSphere => Extension::EvenAtEnds,
        Topology::Periodic => Extension::Periodic,
    }
}
