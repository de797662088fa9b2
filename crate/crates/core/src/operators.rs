//! Face-based discrete operators on the reference mesh at a fixed time.
//!
//! Diffusion is stored as symmetric face conductances (metric already pulled
//! back), advection as signed volume fluxes through faces. Everything is
//! applied matrix-free.

use thiserror::Error;

use crate::geometry::{EvolvingGeometry, Mat2};
use crate::mesh::ReferenceMesh;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("singular flow map: det D Phi = {det:e} at t = {t}, r = {r}, theta = {theta}")]
    SingularJacobian { t: f64, r: f64, theta: f64, det: f64 },
    #[error("pulled-back metric is not orthogonal at t = {t}, r = {r}, theta = {theta}")]
    NonOrthogonalMetric { t: f64, r: f64, theta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperators {
    pub t: f64,
    pub n_r: usize,
    pub n_theta: usize,
    /// Physical measure of each bulk cell.
    pub bulk_measure: Vec<f64>,
    /// Conductance of the face between `(i, k)` and `(i + 1, k)`, `i < n_r - 1`.
    pub radial_coef: Vec<f64>,
    /// Conductance of the face between `(i, k)` and `(i, k + 1)`.
    pub angular_coef: Vec<f64>,
    /// Volume flux of `J_Omega` through radial faces, positive outward.
    pub radial_flux: Vec<f64>,
    /// Volume flux of `J_Omega` through angular faces, positive toward `k + 1`.
    pub angular_flux: Vec<f64>,
    /// Physical length of each surface cell.
    pub surface_measure: Vec<f64>,
    /// Conductance of the surface face between `k` and `k + 1`.
    pub surface_coef: Vec<f64>,
    /// Tangential `J_Gamma` speed at the surface face between `k` and `k + 1`.
    pub surface_flux: Vec<f64>,
}

pub fn assemble_operators(
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
    t: f64,
) -> Result<DiscreteOperators, AssemblyError> {
    let (n_r, n_t) = (mesh.n_r(), mesh.n_theta());
    let (dr, dth) = (mesh.dr(), mesh.dtheta());

    let check = |r: f64, theta: f64| -> Result<crate::geometry::PolarMetric, AssemblyError> {
        let m = geom.polar_metric(t, r, theta);
        let det = geom.jacobian_det_polar(t, r);
        if !(det > 0.0) {
            return Err(AssemblyError::SingularJacobian { t, r, theta, det });
        }
        if m.g_rt.abs() > 1e-10 * (m.g_rr * m.g_tt).sqrt() {
            return Err(AssemblyError::NonOrthogonalMetric { t, r, theta });
        }
        Ok(m)
    };

    let bulk_measure = mesh.bulk_measures(geom, t);
    for i in 0..n_r {
        check(mesh.r_center(i), mesh.theta_center(0))?;
    }

    let mut radial_coef = Vec::with_capacity((n_r - 1) * n_t);
    let mut radial_flux = Vec::with_capacity((n_r - 1) * n_t);
    for i in 0..n_r - 1 {
        let r = mesh.r_face(i + 1);
        for k in 0..n_t {
            let th = mesh.theta_center(k);
            let m = check(r, th)?;
            radial_coef.push(m.g_tt / m.sqrt_g * dth / dr);
            radial_flux.push(radial_volume_flux(geom, t, r, th) * dth);
        }
    }

    let mut angular_coef = Vec::with_capacity(n_r * n_t);
    let mut angular_flux = Vec::with_capacity(n_r * n_t);
    for i in 0..n_r {
        let r = mesh.r_center(i);
        for k in 0..n_t {
            let th = mesh.theta_face(k);
            let m = check(r, th)?;
            angular_coef.push(m.g_rr / m.sqrt_g * dr / dth);
            angular_flux.push(angular_volume_flux(geom, t, r, th) * dr);
        }
    }

    let surface_measure = mesh.surface_measures(geom, t);
    let mut surface_coef = Vec::with_capacity(n_t);
    let mut surface_flux = Vec::with_capacity(n_t);
    for k in 0..n_t {
        let th = mesh.theta_face(k);
        let g = geom.surface_stretch(t, th);
        surface_coef.push(1.0 / (g * dth));
        surface_flux.push(geom.surface_relative_speed(t, th));
    }

    Ok(DiscreteOperators {
        t,
        n_r,
        n_theta: n_t,
        bulk_measure,
        radial_coef,
        angular_coef,
        radial_flux,
        angular_flux,
        surface_measure,
        surface_coef,
        surface_flux,
    })
}

/// `J_Omega . n` per unit reference angle through a constant-`r` face.
fn radial_volume_flux(geom: &EvolvingGeometry, t: f64, r: f64, theta: f64) -> f64 {
    let y = geom.flow_map_polar(t, r, theta);
    let v = geom.bulk_velocity(t, y);
    let vp = geom.parametrization_velocity(t, y);
    let j = [v[0] - vp[0], v[1] - vp[1]];
    let (_, ft) = geom.polar_frame(t, r, theta);
    j[0] * ft[1] - j[1] * ft[0]
}

/// `J_Omega . n` per unit reference radius through a constant-`theta` face.
fn angular_volume_flux(geom: &EvolvingGeometry, t: f64, r: f64, theta: f64) -> f64 {
    let y = geom.flow_map_polar(t, r, theta);
    let v = geom.bulk_velocity(t, y);
    let vp = geom.parametrization_velocity(t, y);
    let j = [v[0] - vp[0], v[1] - vp[1]];
    let (fr, _) = geom.polar_frame(t, r, theta);
    -j[0] * fr[1] + j[1] * fr[0]
}

impl DiscreteOperators {
    pub fn n_bulk(&self) -> usize {
        self.n_r * self.n_theta
    }

    #[inline]
    fn idx(&self, i: usize, k: usize) -> usize {
        i * self.n_theta + k
    }

    #[inline]
    fn next(&self, k: usize) -> usize {
        if k + 1 == self.n_theta {
            0
        } else {
            k + 1
        }
    }

    /// `out = K u` with `K` the (positive semidefinite) bulk stiffness.
    pub fn apply_bulk_stiffness(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n_r {
            for k in 0..self.n_theta {
                let c = self.idx(i, k);
                let e = self.idx(i, self.next(k));
                let f = self.angular_coef[c] * (u[c] - u[e]);
                out[c] += f;
                out[e] -= f;
                if i + 1 < self.n_r {
                    let n = self.idx(i + 1, k);
                    let f = self.radial_coef[c] * (u[c] - u[n]);
                    out[c] += f;
                    out[n] -= f;
                }
            }
        }
    }

    pub fn bulk_stiffness_diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_bulk()];
        for i in 0..self.n_r {
            for k in 0..self.n_theta {
                let c = self.idx(i, k);
                let e = self.idx(i, self.next(k));
                d[c] += self.angular_coef[c];
                d[e] += self.angular_coef[c];
                if i + 1 < self.n_r {
                    d[c] += self.radial_coef[c];
                    d[self.idx(i + 1, k)] += self.radial_coef[c];
                }
            }
        }
        d
    }

    /// `out = K_s w` with `K_s` the surface Laplace-Beltrami stiffness.
    pub fn apply_surface_stiffness(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..self.n_theta {
            let e = self.next(k);
            let f = self.surface_coef[k] * (w[k] - w[e]);
            out[k] += f;
            out[e] -= f;
        }
    }

    pub fn surface_stiffness_diag(&self) -> Vec<f64> {
        (0..self.n_theta)
            .map(|k| self.surface_coef[k] + self.surface_coef[(k + self.n_theta - 1) % self.n_theta])
            .collect()
    }

    /// Net upwind outflow of `u` from each bulk cell.
    pub fn apply_bulk_advection(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n_r {
            for k in 0..self.n_theta {
                let c = self.idx(i, k);
                let e = self.idx(i, self.next(k));
                let q = self.angular_flux[c];
                let f = if q > 0.0 { q * u[c] } else { q * u[e] };
                out[c] += f;
                out[e] -= f;
                if i + 1 < self.n_r {
                    let n = self.idx(i + 1, k);
                    let q = self.radial_flux[c];
                    let f = if q > 0.0 { q * u[c] } else { q * u[n] };
                    out[c] += f;
                    out[n] -= f;
                }
            }
        }
    }

    /// Net upwind outflow of a surface field.
    pub fn apply_surface_advection(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..self.n_theta {
            let e = self.next(k);
            let q = self.surface_flux[k];
            let f = if q > 0.0 { q * w[k] } else { q * w[e] };
            out[k] += f;
            out[e] -= f;
        }
    }

    /// Outflow coefficient (flux per unit concentration) of every bulk cell.
    pub fn bulk_outflow(&self) -> Vec<f64> {
        let mut o = vec![0.0; self.n_bulk()];
        for i in 0..self.n_r {
            for k in 0..self.n_theta {
                let c = self.idx(i, k);
                let e = self.idx(i, self.next(k));
                let q = self.angular_flux[c];
                if q > 0.0 {
                    o[c] += q;
                } else {
                    o[e] -= q;
                }
                if i + 1 < self.n_r {
                    let q = self.radial_flux[c];
                    if q > 0.0 {
                        o[c] += q;
                    } else {
                        o[self.idx(i + 1, k)] -= q;
                    }
                }
            }
        }
        o
    }

    pub fn surface_outflow(&self) -> Vec<f64> {
        let mut o = vec![0.0; self.n_theta];
        for k in 0..self.n_theta {
            let q = self.surface_flux[k];
            if q > 0.0 {
                o[k] += q;
            } else {
                o[self.next(k)] -= q;
            }
        }
        o
    }

    /// Upwind advection diagonal (used by the implicit Jacobian preconditioner).
    pub fn bulk_advection_diag(&self) -> Vec<f64> {
        self.bulk_outflow()
    }

    pub fn max_relative_speed(&self) -> f64 {
        self.radial_flux
            .iter()
            .chain(&self.angular_flux)
            .chain(&self.surface_flux)
            .fold(0.0, |a: f64, b| a.max(b.abs()))
    }
}

/// Tangential transport tensor `B(V_p) = (div_Gamma V_p) I - 2 D(V_p)` at the
/// surface point with reference angle `theta`.
pub fn transport_tensor(geom: &EvolvingGeometry, t: f64, theta: f64) -> Mat2 {
    let y = geom.flow_map_polar(t, geom.r_inner0(), theta);
    let tau = geom.tangent(y);
    let dv = geom.parametrization_velocity_arc_derivative(t, theta);
    let div = tau[0] * dv[0] + tau[1] * dv[1];
    let mut b = [[0.0; 2]; 2];
    for a in 0..2 {
        for c in 0..2 {
            // D = sym(d_s V (x) tau)
            let d = 0.5 * (dv[a] * tau[c] + tau[a] * dv[c]);
            b[a][c] = if a == c { div } else { 0.0 } - 2.0 * d;
        }
    }
    b
}
