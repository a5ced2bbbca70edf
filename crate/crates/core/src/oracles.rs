//! Independent reference computations.
//!
//! Everything here is closed-form or brute-force arithmetic, implemented
//! without touching the discretized geometry, curvature or flow code it is
//! used to validate.

use crate::error::{Error, Result};

/// ∫₀ᶜ G⁴ (G² + s²)^{−5/2} ds via the antiderivative
/// s(2s² + 3G²) / (3 (G² + s²)^{3/2}).
pub fn band_kn_integral_exact(g_neck: f64, c: f64) -> Result<f64> {
    if !(g_neck > 0.0 && c > 0.0) {
        return Err(Error::InvalidParameter("need G > 0 and c > 0".into()));
    }
    let g2 = g_neck * g_neck;
    Ok(c * (2.0 * c * c + 3.0 * g2) / (3.0 * (g2 + c * c).powf(1.5)))
}

/// ∫₀ᶜ (G² + s²)^{3/2} ds via the antiderivative
/// [s(2s² + 5G²)√(G² + s²) + 3G⁴ asinh(s/G)] / 8.
pub fn band_warp_volume_exact(g_neck: f64, c: f64) -> Result<f64> {
    if !(g_neck > 0.0 && c >= 0.0) {
        return Err(Error::InvalidParameter("need G > 0 and c >= 0".into()));
    }
    let g2 = g_neck * g_neck;
    let root = (g2 + c * c).sqrt();
    Ok((c * (2.0 * c * c + 5.0 * g2) * root + 3.0 * g2 * g2 * (c / g_neck).asinh()) / 8.0)
}

/// Radius of the round (q+1)-sphere after flowing for time t:
/// ρ(t) = √(ρ₀² − 2qt).
pub fn exact_sphere_shrink(rho0: f64, q: usize, t: f64) -> Result<f64> {
    if !(rho0 > 0.0) || q < 2 {
        return Err(Error::InvalidParameter("need rho0 > 0 and q >= 2".into()));
    }
    let r2 = rho0 * rho0 - 2.0 * q as f64 * t;
    if r2 <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time {t} is past the extinction time {}",
            rho0 * rho0 / (2.0 * q as f64)
        )));
    }
    Ok(r2.sqrt())
}

/// Extinction time ρ₀²/(2q) of the shrinking round sphere.
pub fn sphere_extinction_time(rho0: f64, q: usize) -> f64 {
    rho0 * rho0 / (2.0 * q as f64)
}

/// Fiber radius of the homogeneous shrinking cylinder: ψ(t)² = ψ₀² − 2(q−1)t.
pub fn exact_cylinder_shrink(psi0: f64, q: usize, t: f64) -> Result<f64> {
    if !(psi0 > 0.0) || q < 2 {
        return Err(Error::InvalidParameter("need psi0 > 0 and q >= 2".into()));
    }
    let r2 = psi0 * psi0 - 2.0 * (q - 1) as f64 * t;
    if r2 <= 0.0 {
        return Err(Error::InvalidParameter("past cylinder extinction".into()));
    }
    Ok(r2.sqrt())
}

/// Brute-force Σ R_{ijkl}² over all (q+1)⁴ orthonormal-frame index tuples of
/// a doubly warped curvature operator with normal curvature `k_n` and
/// tangential curvature `k_t`.
///
/// Index 0 is the profile direction; the running integer multiplicities are
/// exact, so the only rounding is the final float combination.
pub fn riemann_index_sum(k_n: f64, k_t: f64, q: usize) -> f64 {
    let d = q + 1;
    let component = |i: usize, j: usize, k: usize, l: usize| -> f64 {
        // R(e_i, e_j, e_k, e_l) for the curvature operator with
        // R(∂s, e_a, e_a, ∂s) = k_n and R(e_a, e_b, e_b, e_a) = k_t.
        let sec = |a: usize, b: usize| -> f64 {
            if a == 0 || b == 0 {
                k_n
            } else {
                k_t
            }
        };
        if i == j || k == l {
            return 0.0;
        }
        if i == k && j == l {
            sec(i, j)
        } else if i == l && j == k {
            -sec(i, j)
        } else {
            0.0
        }
    };
    let mut n_kn: i64 = 0;
    let mut n_kt: i64 = 0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let r = component(i, j, k, l);
                    if r != 0.0 {
                        if i == 0 || j == 0 {
                            n_kn += 1;
                        } else {
                            n_kt += 1;
                        }
                    }
                }
            }
        }
    }
    n_kn as f64 * k_n * k_n + n_kt as f64 * k_t * k_t
}
