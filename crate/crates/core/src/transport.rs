//! Discrete checks of the transport formulas for moving integrals.
//!
//! Test fields are prescribed in reference coordinates, where the material
//! derivative along `V_p` is the plain time derivative at a fixed reference
//! point.

use std::f64::consts::PI;

use crate::geometry::EvolvingGeometry;
use crate::mesh::{weighted_sum, ReferenceMesh};
use crate::operators::{assemble_operators, transport_tensor, AssemblyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportIdentity {
    /// `d/dt int_Omega u v`
    Bulk,
    /// `d/dt int_Gamma u v`
    Surface,
    /// `d/dt int_Gamma grad_Gamma u . grad_Gamma v`
    SurfaceGradient,
}

impl TransportIdentity {
    pub const ALL: [TransportIdentity; 3] = [Self::Bulk, Self::Surface, Self::SurfaceGradient];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bulk => "bulk",
            Self::Surface => "surface",
            Self::SurfaceGradient => "surface_gradient",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|w| w.name() == s)
    }
}

/// Smooth test field in reference coordinates,
/// `c + a cos(m theta + phase) cos(pi (r - r_i) / (r_o - r_i)) (1 + b sin(k t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestField {
    pub c: f64,
    pub a: f64,
    pub m: f64,
    pub phase: f64,
    pub b: f64,
    pub k: f64,
}

impl TestField {
    pub fn constant(c: f64) -> Self {
        TestField {
            c,
            a: 0.0,
            m: 0.0,
            phase: 0.0,
            b: 0.0,
            k: 0.0,
        }
    }

    pub fn trig(c: f64, a: f64, m: f64, phase: f64, b: f64, k: f64) -> Self {
        TestField { c, a, m, phase, b, k }
    }

    fn radial(&self, mesh: &ReferenceMesh, r: f64) -> f64 {
        (PI * (r - mesh.r_inner()) / (mesh.r_outer() - mesh.r_inner())).cos()
    }

    pub fn value(&self, mesh: &ReferenceMesh, t: f64, r: f64, theta: f64) -> f64 {
        self.c
            + self.a * (self.m * theta + self.phase).cos() * self.radial(mesh, r) * (1.0 + self.b * (self.k * t).sin())
    }

    /// Material derivative along the parametrization velocity.
    pub fn dot(&self, mesh: &ReferenceMesh, t: f64, r: f64, theta: f64) -> f64 {
        self.a * (self.m * theta + self.phase).cos() * self.radial(mesh, r) * self.b * self.k * (self.k * t).cos()
    }
}

/// Discrete moving integral at time `t`.
fn moving_integral(
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
    t: f64,
    u: &TestField,
    v: &TestField,
    which: TransportIdentity,
) -> Result<f64, AssemblyError> {
    let ri = mesh.r_inner();
    Ok(match which {
        TransportIdentity::Bulk => {
            let m = mesh.bulk_measures(geom, t);
            let f = mesh.bulk_field(|r, th| u.value(mesh, t, r, th) * v.value(mesh, t, r, th));
            weighted_sum(&m, &f)
        }
        TransportIdentity::Surface => {
            let m = mesh.surface_measures(geom, t);
            let f = mesh.surface_field(|th| u.value(mesh, t, ri, th) * v.value(mesh, t, ri, th));
            weighted_sum(&m, &f)
        }
        TransportIdentity::SurfaceGradient => {
            let ops = assemble_operators(geom, mesh, t)?;
            let uu = mesh.surface_field(|th| u.value(mesh, t, ri, th));
            let vv = mesh.surface_field(|th| v.value(mesh, t, ri, th));
            face_products(mesh, &uu, &vv, &ops.surface_coef)
        }
    })
}

/// `sum_k c_k (a_{k+1} - a_k)(b_{k+1} - b_k)`.
fn face_products(mesh: &ReferenceMesh, a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let terms: Vec<f64> = (0..mesh.n_theta())
        .map(|k| {
            let e = mesh.next_k(k);
            (a[e] - a[k]) * (b[e] - b[k])
        })
        .collect();
    weighted_sum(c, &terms)
}

/// Discrete right-hand side of the transport formula at time `t`.
fn transport_rhs(
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
    t: f64,
    u: &TestField,
    v: &TestField,
    which: TransportIdentity,
) -> Result<f64, AssemblyError> {
    let ri = mesh.r_inner();
    Ok(match which {
        TransportIdentity::Bulk => {
            let m = mesh.bulk_measures(geom, t);
            let f = mesh.bulk_field(|r, th| {
                let (uv, vv) = (u.value(mesh, t, r, th), v.value(mesh, t, r, th));
                let y = geom.flow_map_polar(t, r, th);
                u.dot(mesh, t, r, th) * vv
                    + uv * v.dot(mesh, t, r, th)
                    + uv * vv * geom.div_parametrization_velocity(t, y)
            });
            weighted_sum(&m, &f)
        }
        TransportIdentity::Surface => {
            let m = mesh.surface_measures(geom, t);
            let f = mesh.surface_field(|th| {
                let (uv, vv) = (u.value(mesh, t, ri, th), v.value(mesh, t, ri, th));
                u.dot(mesh, t, ri, th) * vv
                    + uv * v.dot(mesh, t, ri, th)
                    + uv * vv * geom.surface_div_parametrization_velocity(t, th)
            });
            weighted_sum(&m, &f)
        }
        TransportIdentity::SurfaceGradient => {
            let ops = assemble_operators(geom, mesh, t)?;
            let c = &ops.surface_coef;
            let field = |f: &TestField, dot: bool| {
                mesh.surface_field(|th| if dot { f.dot(mesh, t, ri, th) } else { f.value(mesh, t, ri, th) })
            };
            let (uu, ud) = (field(u, false), field(u, true));
            let (vv, vd) = (field(v, false), field(v, true));
            // tangential part of B(V_p) at each face
            let bc: Vec<f64> = (0..mesh.n_theta())
                .map(|k| {
                    let th = mesh.theta_face(k);
                    let y = geom.flow_map_polar(t, ri, th);
                    let tau = geom.tangent(y);
                    let b = transport_tensor(geom, t, th);
                    let bt = [
                        b[0][0] * tau[0] + b[0][1] * tau[1],
                        b[1][0] * tau[0] + b[1][1] * tau[1],
                    ];
                    c[k] * (tau[0] * bt[0] + tau[1] * bt[1])
                })
                .collect();
            face_products(mesh, &ud, &vv, c) + face_products(mesh, &uu, &vd, c) + face_products(mesh, &uu, &vv, &bc)
        }
    })
}

/// `|centered difference of the moving integral - discrete right-hand side|`.
pub fn transport_identity_residual(
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
    t: f64,
    dt: f64,
    u: &TestField,
    v: &TestField,
    which: TransportIdentity,
) -> Result<f64, AssemblyError> {
    let plus = moving_integral(geom, mesh, t + dt, u, v, which)?;
    let minus = moving_integral(geom, mesh, t - dt, u, v, which)?;
    let lhs = (plus - minus) / (2.0 * dt);
    Ok((lhs - transport_rhs(geom, mesh, t, u, v, which)?).abs())
}
