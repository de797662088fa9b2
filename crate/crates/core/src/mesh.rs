//! Structured polar reference mesh on the annulus and the aligned periodic
//! grid on its inner circle.
//!
//! Bulk cells are indexed `i * n_theta + k` with `i = 0` the ring touching the
//! surface; surface cell `k` sits on the inner face of bulk cell `(0, k)`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::EvolvingGeometry;

pub const MIN_NR: usize = 4;
pub const MIN_NTHETA: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid resolution: {0}")]
    InvalidResolution(String),
    #[error("field length {got} does not match {expected} cells")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMesh {
    n_r: usize,
    n_theta: usize,
    r_inner: f64,
    r_outer: f64,
    dr: f64,
    dtheta: f64,
    ref_measures: Vec<f64>,
}

pub fn build_mesh(
    n_r: usize,
    n_theta: usize,
    r_inner0: f64,
    r_outer0: f64,
) -> Result<ReferenceMesh, MeshError> {
    ReferenceMesh::new(n_r, n_theta, r_inner0, r_outer0)
}

impl ReferenceMesh {
    pub fn new(n_r: usize, n_theta: usize, r_inner: f64, r_outer: f64) -> Result<Self, MeshError> {
        if n_r < MIN_NR {
            return Err(MeshError::InvalidResolution(format!(
                "n_r = {n_r} is below the minimum {MIN_NR}"
            )));
        }
        if n_theta < MIN_NTHETA {
            return Err(MeshError::InvalidResolution(format!(
                "n_theta = {n_theta} is below the minimum {MIN_NTHETA}"
            )));
        }
        if !(r_inner > 0.0 && r_outer > r_inner && r_outer.is_finite()) {
            return Err(MeshError::InvalidResolution(format!(
                "radii must satisfy 0 < r_inner < r_outer, got {r_inner} and {r_outer}"
            )));
        }
        let dr = (r_outer - r_inner) / n_r as f64;
        let dtheta = 2.0 * PI / n_theta as f64;
        let mut ref_measures = Vec::with_capacity(n_r * n_theta);
        for i in 0..n_r {
            let (a, b) = (r_inner + i as f64 * dr, r_inner + (i + 1) as f64 * dr);
            let area = 0.5 * dtheta * (b * b - a * a);
            ref_measures.extend(std::iter::repeat_n(area, n_theta));
        }
        Ok(ReferenceMesh {
            n_r,
            n_theta,
            r_inner,
            r_outer,
            dr,
            dtheta,
            ref_measures,
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }
    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }
    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }
    pub fn dr(&self) -> f64 {
        self.dr
    }
    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }
    pub fn n_bulk(&self) -> usize {
        self.n_r * self.n_theta
    }
    pub fn n_surface(&self) -> usize {
        self.n_theta
    }

    #[inline]
    pub fn bulk_index(&self, i: usize, k: usize) -> usize {
        i * self.n_theta + k
    }

    #[inline]
    pub fn next_k(&self, k: usize) -> usize {
        if k + 1 == self.n_theta {
            0
        } else {
            k + 1
        }
    }

    #[inline]
    pub fn prev_k(&self, k: usize) -> usize {
        if k == 0 {
            self.n_theta - 1
        } else {
            k - 1
        }
    }

    pub fn r_center(&self, i: usize) -> f64 {
        self.r_inner + (i as f64 + 0.5) * self.dr
    }

    /// Radius of the face below ring `i` (`i = n_r` is the outer wall).
    pub fn r_face(&self, i: usize) -> f64 {
        self.r_inner + i as f64 * self.dr
    }

    pub fn theta_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dtheta
    }

    /// Angle of the face between surface cells `k` and `k + 1`.
    pub fn theta_face(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.dtheta
    }

    pub fn reference_measures(&self) -> &[f64] {
        &self.ref_measures
    }

    /// Arc lengths of the reference inner faces, one per surface cell.
    pub fn surface_reference_lengths(&self) -> Vec<f64> {
        vec![self.r_inner * self.dtheta; self.n_theta]
    }

    /// Physical measure of every bulk cell at time `t` (midpoint Jacobian).
    pub fn bulk_measures(&self, geom: &EvolvingGeometry, t: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_bulk());
        for i in 0..self.n_r {
            let r = self.r_center(i);
            for k in 0..self.n_theta {
                let m = geom.polar_metric(t, r, self.theta_center(k));
                // sqrt_g = r * det D Phi, reference measure already carries r
                out.push(self.ref_measures[self.bulk_index(i, k)] * m.sqrt_g / r);
            }
        }
        out
    }

    /// Physical length of every surface cell at time `t`.
    pub fn surface_measures(&self, geom: &EvolvingGeometry, t: f64) -> Vec<f64> {
        (0..self.n_theta)
            .map(|k| geom.surface_stretch(t, self.theta_center(k)) * self.dtheta)
            .collect()
    }

    pub fn integrate_bulk(
        &self,
        geom: &EvolvingGeometry,
        t: f64,
        field: &[f64],
    ) -> Result<f64, MeshError> {
        if field.len() != self.n_bulk() {
            return Err(MeshError::LengthMismatch {
                expected: self.n_bulk(),
                got: field.len(),
            });
        }
        Ok(weighted_sum(&self.bulk_measures(geom, t), field))
    }

    pub fn integrate_surface(
        &self,
        geom: &EvolvingGeometry,
        t: f64,
        field: &[f64],
    ) -> Result<f64, MeshError> {
        if field.len() != self.n_surface() {
            return Err(MeshError::LengthMismatch {
                expected: self.n_surface(),
                got: field.len(),
            });
        }
        Ok(weighted_sum(&self.surface_measures(geom, t), field))
    }

    /// Evaluates `f(r, theta)` at every bulk cell center.
    pub fn bulk_field(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_bulk());
        for i in 0..self.n_r {
            let r = self.r_center(i);
            for k in 0..self.n_theta {
                out.push(f(r, self.theta_center(k)));
            }
        }
        out
    }

    /// Evaluates `f(theta)` at every surface cell center.
    pub fn surface_field(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_theta).map(|k| f(self.theta_center(k))).collect()
    }
}

/// Sum of `w[i] * f[i]` using pairwise reduction with a fixed topology.
pub fn weighted_sum(w: &[f64], f: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), f.len());
    fn rec(w: &[f64], f: &[f64]) -> f64 {
        if w.len() <= 64 {
            w.iter().zip(f).map(|(a, b)| a * b).sum()
        } else {
            let mid = w.len() / 2;
            rec(&w[..mid], &f[..mid]) + rec(&w[mid..], &f[mid..])
        }
    }
    rec(w, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, GeometryPreset};
    use approx::assert_abs_diff_eq;

    fn fixed() -> EvolvingGeometry {
        build_geometry(GeometryPreset::fixed(1.0, 2.0)).unwrap()
    }

    #[test]
    fn counts_and_area() {
        let m = build_mesh(4, 8, 1.0, 2.0).unwrap();
        assert_eq!(m.n_bulk(), 32);
        assert_eq!(m.n_surface(), 8);
        let total: f64 = m.reference_measures().iter().sum();
        assert_abs_diff_eq!(total, 3.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn inner_arcs_close_the_circle() {
        let m = build_mesh(64, 128, 1.0, 2.0).unwrap();
        let total: f64 = m.surface_reference_lengths().iter().sum();
        assert_abs_diff_eq!(total, 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn periodic_neighbours() {
        let m = build_mesh(4, 8, 1.0, 2.0).unwrap();
        assert_eq!(m.next_k(7), 0);
        assert_eq!(m.prev_k(0), 7);
        assert_eq!(m.next_k(3), 4);
    }

    #[test]
    fn rejects_coarse_or_disordered() {
        assert!(matches!(
            build_mesh(3, 8, 1.0, 2.0),
            Err(MeshError::InvalidResolution(_))
        ));
        assert!(build_mesh(4, 7, 1.0, 2.0).is_err());
        assert!(build_mesh(4, 8, 2.0, 1.0).is_err());
    }

    #[test]
    fn length_mismatch() {
        let m = build_mesh(4, 8, 1.0, 2.0).unwrap();
        let g = fixed();
        assert_eq!(
            m.integrate_bulk(&g, 0.0, &[1.0; 5]),
            Err(MeshError::LengthMismatch { expected: 32, got: 5 })
        );
        assert!(m.integrate_surface(&g, 0.0, &[1.0; 9]).is_err());
    }

    #[test]
    fn constant_integrals() {
        let m = build_mesh(8, 16, 1.0, 2.0).unwrap();
        let g = fixed();
        let area = m.integrate_bulk(&g, 0.0, &vec![1.0; m.n_bulk()]).unwrap();
        assert_abs_diff_eq!(area, 3.0 * PI, epsilon = 1e-12);
        let len = m.integrate_surface(&g, 0.0, &vec![1.0; 16]).unwrap();
        assert_abs_diff_eq!(len, 2.0 * PI, epsilon = 1e-12);
        let c = m.surface_field(f64::cos);
        assert_abs_diff_eq!(m.integrate_surface(&g, 0.0, &c).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_integral_time_independent() {
        let m = build_mesh(8, 16, 1.0, 2.0).unwrap();
        let g = build_geometry(GeometryPreset::rotation(1.0, 2.0, 1.0, 0.0)).unwrap();
        let ones = vec![1.0; m.n_bulk()];
        let a0 = m.integrate_bulk(&g, 0.0, &ones).unwrap();
        for t in [0.5, 2.0, 9.0] {
            assert_eq!(m.integrate_bulk(&g, t, &ones).unwrap(), a0);
        }
    }

    #[test]
    fn breathing_circumference() {
        let m = build_mesh(8, 32, 1.0, 2.0).unwrap();
        let g = build_geometry(GeometryPreset::breathing(1.0, 2.0, 0.1, 1.0, 0.2)).unwrap();
        let t = PI / 2.0;
        let len = m.integrate_surface(&g, t, &vec![1.0; 32]).unwrap();
        assert_abs_diff_eq!(len, 2.0 * PI * g.inner_radius(t), epsilon = 1e-12);
        let area = m.integrate_bulk(&g, t, &vec![1.0; m.n_bulk()]).unwrap();
        assert_abs_diff_eq!(area, g.closed_form_measures(t).area, epsilon = 1e-12);
    }

    #[test]
    fn radial_moment_converges_second_order() {
        let g = fixed();
        let exact = 14.0 * PI / 3.0;
        let errs: Vec<f64> = [(8, 16), (16, 32), (32, 64)]
            .iter()
            .map(|&(nr, nt)| {
                let m = build_mesh(nr, nt, 1.0, 2.0).unwrap();
                let f = m.bulk_field(|r, _| r);
                (m.integrate_bulk(&g, 0.0, &f).unwrap() - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate >= 1.9, "rate {rate}");
        }
    }

    #[test]
    fn rotation_shift_alignment() {
        let m = build_mesh(4, 16, 1.0, 2.0).unwrap();
        let g = build_geometry(GeometryPreset::rotation(1.0, 2.0, 1.0, 0.0)).unwrap();
        let f = m.surface_field(|th| 1.0 + 0.3 * th.sin() + 0.1 * (3.0 * th).cos());
        let shifted: Vec<f64> = (0..16).map(|k| f[m.prev_k(k)]).collect();
        let a = m.integrate_surface(&g, 0.0, &f).unwrap();
        let b = m.integrate_surface(&g, m.dtheta(), &shifted).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}
