//! Conservative time stepping of the coupled bulk-surface system in reference
//! coordinates.
//!
//! Unknowns are physical concentrations attached to reference cells. Each
//! equation is discretized as the rate of change of the mass held by a moving
//! cell, so the dilation terms enter through the time-dependent cell measures
//! and both linear invariants are conserved by construction.
//!
//! Two steppers are provided:
//!
//! * [`Solver::step_imex`]: implicit diffusion, explicit upwind advection and
//!   an exact conservative backward-Euler solve of the local reaction at every
//!   surface cell (first-order splitting).
//! * [`Solver::step_implicit`]: fully coupled backward Euler solved by Newton.

use thiserror::Error;

use crate::linalg::{self, LinearSolveError};
use crate::mesh::ReferenceMesh;
use crate::model::{ModelParams, Nonlinearity};
use crate::operators::{assemble_operators, AssemblyError, DiscreteOperators};
use crate::geometry::EvolvingGeometry;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("time step {dt} exceeds the advective bound {dt_max}")]
    CflViolation { dt: f64, dt_max: f64 },
    #[error("linear solve for {field} failed: {source}")]
    LinearSolveFailure {
        field: &'static str,
        #[source]
        source: LinearSolveError,
    },
    #[error("Newton iteration diverged; residual history {history:?}")]
    NewtonDivergence { history: Vec<f64> },
    #[error("invalid time step {0}")]
    InvalidTimeStep(f64),
    #[error("state is not finite or has wrong dimensions")]
    InvalidState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    /// Bulk concentration per reference cell.
    pub u: Vec<f64>,
    /// Surface concentrations per surface cell.
    pub w: Vec<f64>,
    pub z: Vec<f64>,
}

impl State {
    pub fn new(t: f64, u: Vec<f64>, w: Vec<f64>, z: Vec<f64>) -> Self {
        State { t, u, w, z }
    }

    pub fn uniform(mesh: &ReferenceMesh, u: f64, w: f64, z: f64) -> Self {
        State {
            t: 0.0,
            u: vec![u; mesh.n_bulk()],
            w: vec![w; mesh.n_surface()],
            z: vec![z; mesh.n_surface()],
        }
    }

    pub fn is_valid_for(&self, mesh: &ReferenceMesh) -> bool {
        self.u.len() == mesh.n_bulk()
            && self.w.len() == mesh.n_surface()
            && self.z.len() == mesh.n_surface()
            && self.t.is_finite()
            && self.u.iter().chain(&self.w).chain(&self.z).all(|v| v.is_finite())
    }

    pub fn min_value(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.w)
            .chain(&self.z)
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

/// Manufactured forcing added to the three equations and to the Robin
/// condition `delta_Omega grad u . nu - u j = f1 + g`.
pub trait SourceTerms: Sync {
    /// Bulk source per unit physical area at reference point `(r, theta)`.
    fn bulk(&self, t: f64, r: f64, theta: f64) -> f64;
    fn boundary(&self, t: f64, theta: f64) -> f64;
    fn surface_w(&self, t: f64, theta: f64) -> f64;
    fn surface_z(&self, t: f64, theta: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub linear_tol: f64,
    pub max_linear_iter: usize,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            linear_tol: 1e-12,
            max_linear_iter: 20_000,
            newton_tol: 1e-11,
            max_newton: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub linear_iterations: usize,
    pub newton_iterations: usize,
}

pub struct Solver<'a> {
    pub geom: &'a EvolvingGeometry,
    pub mesh: &'a ReferenceMesh,
    pub params: ModelParams,
    pub spec: &'a Nonlinearity,
    pub options: SolverOptions,
    source: Option<&'a dyn SourceTerms>,
}

/// Largest explicit-advection step keeping the update monotone.
pub fn advective_time_step(ops: &DiscreteOperators) -> f64 {
    let bulk = ops
        .bulk_outflow()
        .iter()
        .zip(&ops.bulk_measure)
        .filter(|(o, _)| **o > 0.0)
        .map(|(o, m)| m / o)
        .fold(f64::INFINITY, f64::min);
    let surf = ops
        .surface_outflow()
        .iter()
        .zip(&ops.surface_measure)
        .filter(|(o, _)| **o > 0.0)
        .map(|(o, m)| m / o)
        .fold(f64::INFINITY, f64::min);
    bulk.min(surf)
}

/// Conservative backward-Euler solve of the mass-action exchange between
/// one bulk boundary cell (measure `m_b`) and one surface cell (length `s`).
///
/// Both `m_b u + s z` and `w + z` are preserved (shifted by the source terms);
/// the returned `z` is the unique root in the admissible interval, computed
/// without cancellation.
#[allow(clippy::too_many_arguments)]
pub fn react_mass_action(
    m_b: f64,
    s: f64,
    (u, w, z): (f64, f64, f64),
    dt: f64,
    params: &ModelParams,
    (g, fw, fz): (f64, f64, f64),
) -> (f64, f64, f64) {
    let c1 = m_b * u + s * z + dt * s * (g + fz);
    let c2 = w + z + dt * (fw + fz);
    let k = dt / (m_b * params.delta_k);
    let a = k * s;
    let b = 1.0 + dt / params.delta_k_prime + k * (c1 + s * c2);
    let c = z + dt * fz + k * c1 * c2;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let z1 = 2.0 * c / (b + disc.sqrt());
    // increment form keeps a vanishing reaction exactly stationary
    let dz = z1 - z;
    (
        u + s * (dt * (g + fz) - dz) / m_b,
        w + (dt * (fw + fz) - dz),
        z1,
    )
}

#[allow(clippy::too_many_arguments)]
fn react_general(
    spec: &Nonlinearity,
    params: &ModelParams,
    m_b: f64,
    s: f64,
    x0: [f64; 3],
    dt: f64,
    src: [f64; 3],
) -> Result<[f64; 3], SolverError> {
    let resid = |x: [f64; 3]| {
        let f = spec.eval(x[0], x[1], x[2], params);
        [
            m_b * (x[0] - x0[0]) - dt * s * (f[0] + src[0]),
            x[1] - x0[1] - dt * (f[1] + src[1]),
            x[2] - x0[2] - dt * (f[2] + src[2]),
        ]
    };
    let mut x = x0;
    let mut history = Vec::new();
    let scale = m_b * x0[0].abs() + x0[1].abs() + x0[2].abs() + 1e-300;
    for _ in 0..50 {
        let r = resid(x);
        let nr = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
        history.push(nr);
        if !nr.is_finite() {
            break;
        }
        if nr <= 1e-14 * scale {
            return Ok(x);
        }
        let mut jac = [[0.0; 3]; 3];
        for c in 0..3 {
            let h = 1e-7 * (1.0 + x[c].abs());
            let mut xp = x;
            xp[c] += h;
            let rp = resid(xp);
            for row in 0..3 {
                jac[row][c] = (rp[row] - r[row]) / h;
            }
        }
        let dx = solve3(jac, [-r[0], -r[1], -r[2]]).ok_or_else(|| SolverError::NewtonDivergence {
            history: history.clone(),
        })?;
        for c in 0..3 {
            x[c] += dx[c];
        }
    }
    Err(SolverError::NewtonDivergence { history })
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for c in 0..3 {
        let mut m = a;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        x[c] = det(m) / d;
    }
    Some(x)
}

impl<'a> Solver<'a> {
    pub fn new(
        geom: &'a EvolvingGeometry,
        mesh: &'a ReferenceMesh,
        params: ModelParams,
        spec: &'a Nonlinearity,
    ) -> Self {
        Solver {
            geom,
            mesh,
            params,
            spec,
            options: SolverOptions::default(),
            source: None,
        }
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_source(mut self, source: &'a dyn SourceTerms) -> Self {
        self.source = Some(source);
        self
    }

    pub fn assemble(&self, t: f64) -> Result<DiscreteOperators, SolverError> {
        Ok(assemble_operators(self.geom, self.mesh, t)?)
    }

    fn check_inputs(&self, state: &State, dt: f64) -> Result<(), SolverError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SolverError::InvalidTimeStep(dt));
        }
        if !state.is_valid_for(self.mesh) {
            return Err(SolverError::InvalidState);
        }
        Ok(())
    }

    fn bulk_source(&self, t: f64, ops: &DiscreteOperators) -> Option<Vec<f64>> {
        let src = self.source?;
        let mesh = self.mesh;
        let mut out = Vec::with_capacity(mesh.n_bulk());
        for i in 0..mesh.n_r() {
            let r = mesh.r_center(i);
            for k in 0..mesh.n_theta() {
                let c = mesh.bulk_index(i, k);
                out.push(ops.bulk_measure[c] * src.bulk(t, r, mesh.theta_center(k)));
            }
        }
        Some(out)
    }

    fn surface_sources(&self, t: f64) -> Vec<[f64; 3]> {
        match self.source {
            Some(src) => (0..self.mesh.n_theta())
                .map(|k| {
                    let th = self.mesh.theta_center(k);
                    [src.boundary(t, th), src.surface_w(t, th), src.surface_z(t, th)]
                })
                .collect(),
            None => vec![[0.0; 3]; self.mesh.n_theta()],
        }
    }

    /// Implicit diffusion with explicit upwind advection for one field:
    /// `(m1/dt + d K1) x = m0 x0 / dt - A0 x0 + src`.
    #[allow(clippy::too_many_arguments)]
    fn transport(
        &self,
        field: &'static str,
        x0: &[f64],
        m0: &[f64],
        m1: &[f64],
        diffusivity: f64,
        dt: f64,
        adv: impl Fn(&[f64], &mut [f64]),
        stiff: impl Fn(&[f64], &mut [f64]),
        stiff_diag: &[f64],
        src: Option<&[f64]>,
    ) -> Result<(Vec<f64>, usize), SolverError> {
        let n = x0.len();
        let mut a0 = vec![0.0; n];
        adv(x0, &mut a0);
        let mut rhs: Vec<f64> = (0..n).map(|i| m0[i] * x0[i] / dt - a0[i]).collect();
        if let Some(src) = src {
            for i in 0..n {
                rhs[i] += src[i];
            }
        }
        let diag: Vec<f64> = (0..n).map(|i| m1[i] / dt + diffusivity * stiff_diag[i]).collect();
        let apply = |x: &[f64], y: &mut [f64]| {
            stiff(x, y);
            for i in 0..n {
                y[i] = m1[i] / dt * x[i] + diffusivity * y[i];
            }
        };
        let mut x = x0.to_vec();
        let stats = linalg::pcg(
            apply,
            &diag,
            &rhs,
            &mut x,
            self.options.linear_tol,
            self.options.max_linear_iter,
        )
        .map_err(|source| SolverError::LinearSolveFailure { field, source })?;
        Ok((x, stats.iterations))
    }

    pub fn step_imex(&self, state: &State, dt: f64) -> Result<(State, StepReport), SolverError> {
        self.check_inputs(state, dt)?;
        let (t0, t1) = (state.t, state.t + dt);
        let old = self.assemble(t0)?;
        let new = self.assemble(t1)?;
        let dt_max = advective_time_step(&old);
        if dt > dt_max {
            return Err(SolverError::CflViolation { dt, dt_max });
        }
        let p = &self.params;
        let mut report = StepReport::default();

        let bulk_src = self.bulk_source(t1, &new);
        let bulk_diag = new.bulk_stiffness_diag();
        let (u, it) = self.transport(
            "u",
            &state.u,
            &old.bulk_measure,
            &new.bulk_measure,
            p.delta_omega,
            dt,
            |x, y| old.apply_bulk_advection(x, y),
            |x, y| new.apply_bulk_stiffness(x, y),
            &bulk_diag,
            bulk_src.as_deref(),
        )?;
        report.linear_iterations += it;

        let surf_diag = new.surface_stiffness_diag();
        let mut surface = Vec::with_capacity(2);
        for (name, x0, d) in [
            ("w", &state.w, p.delta_gamma),
            ("z", &state.z, p.delta_gamma_prime),
        ] {
            let (x, it) = self.transport(
                name,
                x0,
                &old.surface_measure,
                &new.surface_measure,
                d,
                dt,
                |x, y| old.apply_surface_advection(x, y),
                |x, y| new.apply_surface_stiffness(x, y),
                &surf_diag,
                None,
            )?;
            report.linear_iterations += it;
            surface.push(x);
        }
        let z = surface.pop().unwrap();
        let w = surface.pop().unwrap();
        let mut next = State { t: t1, u, w, z };

        let sources = self.surface_sources(t1);
        for k in 0..self.mesh.n_theta() {
            let c = self.mesh.bulk_index(0, k);
            let (m_b, s) = (new.bulk_measure[c], new.surface_measure[k]);
            let x = (next.u[c], next.w[k], next.z[k]);
            let [g, fw, fz] = sources[k];
            let (u1, w1, z1) = match self.spec {
                Nonlinearity::MassAction => react_mass_action(m_b, s, x, dt, p, (g, fw, fz)),
                spec => {
                    let r = react_general(spec, p, m_b, s, [x.0, x.1, x.2], dt, [g, fw, fz])?;
                    (r[0], r[1], r[2])
                }
            };
            next.u[c] = u1;
            next.w[k] = w1;
            next.z[k] = z1;
        }
        Ok((next, report))
    }

    /// Fully implicit backward-Euler step solved by Newton's method.
    ///
    /// `newton_iterations` counts residual evaluations, so a state that
    /// already solves the step reports one iteration.
    pub fn step_implicit(&self, state: &State, dt: f64) -> Result<(State, StepReport), SolverError> {
        self.check_inputs(state, dt)?;
        let (t0, t1) = (state.t, state.t + dt);
        let old = self.assemble(t0)?;
        let new = self.assemble(t1)?;
        let p = self.params;
        let mesh = self.mesh;
        let (nb, ns) = (mesh.n_bulk(), mesh.n_surface());
        let n = nb + 2 * ns;
        let bulk_src = self.bulk_source(t1, &new);
        let sources = self.surface_sources(t1);

        let mut base = vec![0.0; n];
        for c in 0..nb {
            base[c] = old.bulk_measure[c] * state.u[c];
        }
        for k in 0..ns {
            base[nb + k] = old.surface_measure[k] * state.w[k];
            base[nb + ns + k] = old.surface_measure[k] * state.z[k];
        }
        let scale = linalg::norm(&base).max(1e-300);

        // linear part L x = m1 x + dt (d K x + A x) - dt * sources
        let linear = |x: &[f64], y: &mut [f64]| {
            let (xu, xs) = x.split_at(nb);
            let (xw, xz) = xs.split_at(ns);
            let (yu, ys) = y.split_at_mut(nb);
            let (yw, yz) = ys.split_at_mut(ns);
            let mut tmp = vec![0.0; nb];
            new.apply_bulk_stiffness(xu, yu);
            new.apply_bulk_advection(xu, &mut tmp);
            for c in 0..nb {
                yu[c] = new.bulk_measure[c] * xu[c] + dt * (p.delta_omega * yu[c] + tmp[c]);
            }
            let mut tmp = vec![0.0; ns];
            for (xf, yf, d) in [(xw, yw, p.delta_gamma), (xz, yz, p.delta_gamma_prime)] {
                new.apply_surface_stiffness(xf, yf);
                new.apply_surface_advection(xf, &mut tmp);
                for k in 0..ns {
                    yf[k] = new.surface_measure[k] * xf[k] + dt * (d * yf[k] + tmp[k]);
                }
            }
        };

        let residual = |x: &[f64], r: &mut [f64]| {
            linear(x, r);
            for i in 0..n {
                r[i] -= base[i];
            }
            if let Some(src) = &bulk_src {
                for c in 0..nb {
                    r[c] -= dt * src[c];
                }
            }
            for k in 0..ns {
                let c = mesh.bulk_index(0, k);
                let s = new.surface_measure[k];
                let f = self.spec.eval(x[c], x[nb + k], x[nb + ns + k], &p);
                let [g, fw, fz] = sources[k];
                r[c] -= dt * s * (f[0] + g);
                r[nb + k] -= dt * s * (f[1] + fw);
                r[nb + ns + k] -= dt * s * (f[2] + fz);
            }
        };

        let mut x = Vec::with_capacity(n);
        x.extend_from_slice(&state.u);
        x.extend_from_slice(&state.w);
        x.extend_from_slice(&state.z);

        let lin_diag: Vec<f64> = {
            let kb = new.bulk_stiffness_diag();
            let ab = new.bulk_advection_diag();
            let ks = new.surface_stiffness_diag();
            let as_ = new.surface_outflow();
            let mut d = vec![0.0; n];
            for c in 0..nb {
                d[c] = new.bulk_measure[c] + dt * (p.delta_omega * kb[c] + ab[c]);
            }
            for k in 0..ns {
                d[nb + k] = new.surface_measure[k] + dt * (p.delta_gamma * ks[k] + as_[k]);
                d[nb + ns + k] =
                    new.surface_measure[k] + dt * (p.delta_gamma_prime * ks[k] + as_[k]);
            }
            d
        };

        let mut r = vec![0.0; n];
        let mut history = Vec::new();
        let mut report = StepReport::default();
        for iter in 1..=self.options.max_newton {
            residual(&x, &mut r);
            let rel = linalg::norm(&r) / scale;
            history.push(rel);
            if !rel.is_finite() {
                break;
            }
            if rel <= self.options.newton_tol {
                report.newton_iterations = iter;
                return Ok((
                    State {
                        t: t1,
                        u: x[..nb].to_vec(),
                        w: x[nb..nb + ns].to_vec(),
                        z: x[nb + ns..].to_vec(),
                    },
                    report,
                ));
            }
            // reaction partials at the current iterate
            let partials: Vec<[[f64; 3]; 3]> = (0..ns)
                .map(|k| {
                    let c = mesh.bulk_index(0, k);
                    reaction_jacobian(self.spec, &p, [x[c], x[nb + k], x[nb + ns + k]])
                })
                .collect();
            let jac = |v: &[f64], y: &mut [f64]| {
                linear(v, y);
                for k in 0..ns {
                    let c = mesh.bulk_index(0, k);
                    let s = new.surface_measure[k];
                    let dv = [v[c], v[nb + k], v[nb + ns + k]];
                    let pk = &partials[k];
                    for (row, idx) in [c, nb + k, nb + ns + k].into_iter().enumerate() {
                        let df = pk[row][0] * dv[0] + pk[row][1] * dv[1] + pk[row][2] * dv[2];
                        y[idx] -= dt * s * df;
                    }
                }
            };
            let mut diag = lin_diag.clone();
            for k in 0..ns {
                let c = mesh.bulk_index(0, k);
                let s = new.surface_measure[k];
                let pk = &partials[k];
                diag[c] -= dt * s * pk[0][0];
                diag[nb + k] -= dt * s * pk[1][1];
                diag[nb + ns + k] -= dt * s * pk[2][2];
            }
            for d in diag.iter_mut() {
                if d.abs() < 1e-300 {
                    *d = 1.0;
                }
            }
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let mut dx = vec![0.0; n];
            let stats = linalg::bicgstab(
                jac,
                &diag,
                &rhs,
                &mut dx,
                self.options.linear_tol,
                self.options.max_linear_iter,
            )
            .map_err(|source| SolverError::LinearSolveFailure {
                field: "newton",
                source,
            })?;
            report.linear_iterations += stats.iterations;
            for i in 0..n {
                x[i] += dx[i];
            }
        }
        Err(SolverError::NewtonDivergence { history })
    }

    /// Backward-Euler step of the scalar surface equation
    /// `d_t(s w) + d K w + A w = s f` with the given source.
    pub fn step_surface_scalar(
        &self,
        w: &[f64],
        t: f64,
        dt: f64,
        diffusivity: f64,
        source: impl Fn(f64) -> f64,
    ) -> Result<Vec<f64>, SolverError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SolverError::InvalidTimeStep(dt));
        }
        let old = self.assemble(t)?;
        let new = self.assemble(t + dt)?;
        let dt_max = advective_time_step(&old);
        if dt > dt_max {
            return Err(SolverError::CflViolation { dt, dt_max });
        }
        let src: Vec<f64> = (0..self.mesh.n_theta())
            .map(|k| new.surface_measure[k] * source(self.mesh.theta_center(k)))
            .collect();
        let diag = new.surface_stiffness_diag();
        self.transport(
            "w",
            w,
            &old.surface_measure,
            &new.surface_measure,
            diffusivity,
            dt,
            |x, y| old.apply_surface_advection(x, y),
            |x, y| new.apply_surface_stiffness(x, y),
            &diag,
            Some(&src),
        )
        .map(|(x, _)| x)
    }
}

/// Partial derivatives `d f_i / d (u, w, z)`.
fn reaction_jacobian(spec: &Nonlinearity, p: &ModelParams, x: [f64; 3]) -> [[f64; 3]; 3] {
    match spec {
        Nonlinearity::MassAction => {
            let dr = [-x[1] / p.delta_k, -x[0] / p.delta_k, 1.0 / p.delta_k_prime];
            [dr, dr, [-dr[0], -dr[1], -dr[2]]]
        }
        other => {
            let f0 = other.eval(x[0], x[1], x[2], p);
            let mut jac = [[0.0; 3]; 3];
            for c in 0..3 {
                let h = 1e-7 * (1.0 + x[c].abs());
                let mut xp = x;
                xp[c] += h;
                let f1 = other.eval(xp[0], xp[1], xp[2], p);
                for r in 0..3 {
                    jac[r][c] = (f1[r] - f0[r]) / h;
                }
            }
            jac
        }
    }
}

/// Convenience wrapper around [`Solver::step_imex`].
pub fn step_imex(
    state: &State,
    dt: f64,
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
    params: &ModelParams,
    spec: &Nonlinearity,
) -> Result<State, SolverError> {
    Solver::new(geom, mesh, *params, spec)
        .step_imex(state, dt)
        .map(|(s, _)| s)
}

/// Convenience wrapper around [`Solver::step_implicit`].
#[allow(clippy::too_many_arguments)]
pub fn step_implicit(
    state: &State,
    dt: f64,
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
    params: &ModelParams,
    spec: &Nonlinearity,
    newton_tol: f64,
    max_newton: usize,
) -> Result<State, SolverError> {
    let options = SolverOptions {
        newton_tol,
        max_newton,
        ..SolverOptions::default()
    };
    Solver::new(geom, mesh, *params, spec)
        .with_options(options)
        .step_implicit(state, dt)
        .map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, GeometryPreset};
    use crate::mesh::build_mesh;
    use approx::assert_abs_diff_eq;

    fn masses(solver: &Solver, s: &State) -> (f64, f64) {
        let ops = solver.assemble(s.t).unwrap();
        let bu = crate::mesh::weighted_sum(&ops.bulk_measure, &s.u);
        let sw = crate::mesh::weighted_sum(&ops.surface_measure, &s.w);
        let sz = crate::mesh::weighted_sum(&ops.surface_measure, &s.z);
        (bu + sz, sw + sz)
    }

    #[test]
    fn local_reaction_conserves_and_stays_positive() {
        let p = ModelParams {
            delta_k: 0.3,
            delta_k_prime: 2.0,
            ..ModelParams::default()
        };
        for &(u, w, z) in &[(2.0, 1.0, 0.0), (0.0, 0.0, 3.0), (5.0, 1e-9, 0.2), (0.0, 4.0, 0.0)] {
            for &dt in &[1e-4, 0.1, 100.0] {
                let (m_b, s) = (0.2, 0.7);
                let (u1, w1, z1) = react_mass_action(m_b, s, (u, w, z), dt, &p, (0.0, 0.0, 0.0));
                assert!(u1 >= -1e-15 && w1 >= -1e-15 && z1 >= -1e-15);
                assert_abs_diff_eq!(m_b * u1 + s * z1, m_b * u + s * z, epsilon = 1e-13);
                assert_abs_diff_eq!(w1 + z1, w + z, epsilon = 1e-13);
                // backward-Euler equation for z
                let r = u1 * w1 / p.delta_k - z1 / p.delta_k_prime;
                assert_abs_diff_eq!(z1 - z, dt * r, epsilon = 1e-10 * (1.0 + dt));
            }
        }
    }

    #[test]
    fn local_reaction_disabled() {
        let p = ModelParams {
            delta_k: f64::INFINITY,
            delta_k_prime: f64::INFINITY,
            ..ModelParams::default()
        };
        let out = react_mass_action(0.3, 0.5, (1.0, 2.0, 3.0), 1.0, &p, (0.0, 0.0, 0.0));
        assert_eq!(out, (1.0, 2.0, 3.0));
    }

    #[test]
    fn general_reaction_matches_closed_form_for_mass_action() {
        let p = ModelParams::default();
        let a = react_mass_action(0.4, 0.9, (2.0, 1.0, 0.5), 0.3, &p, (0.1, -0.2, 0.05));
        let b = react_general(
            &Nonlinearity::MassAction,
            &p,
            0.4,
            0.9,
            [2.0, 1.0, 0.5],
            0.3,
            [0.1, -0.2, 0.05],
        )
        .unwrap();
        assert_abs_diff_eq!(a.0, b[0], epsilon = 1e-12);
        assert_abs_diff_eq!(a.1, b[1], epsilon = 1e-12);
        assert_abs_diff_eq!(a.2, b[2], epsilon = 1e-12);
    }

    #[test]
    fn uniform_state_is_steady_without_reaction() {
        let mesh = build_mesh(8, 16, 1.0, 2.0).unwrap();
        let g = build_geometry(GeometryPreset::fixed(1.0, 2.0)).unwrap();
        let p = ModelParams {
            delta_k: f64::INFINITY,
            delta_k_prime: f64::INFINITY,
            ..ModelParams::default()
        };
        let spec = Nonlinearity::MassAction;
        let s0 = State::uniform(&mesh, 2.0, 1.5, 0.5);
        let s1 = step_imex(&s0, 0.1, &g, &mesh, &p, &spec).unwrap();
        let s2 = step_implicit(&s0, 0.1, &g, &mesh, &p, &spec, 1e-12, 10).unwrap();
        for s in [s1, s2] {
            for (a, b) in s.u.iter().zip(&s0.u) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-11);
            }
            for (a, b) in s.w.iter().zip(&s0.w).chain(s.z.iter().zip(&s0.z)) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn equilibrium_is_steady_and_newton_needs_one_iteration() {
        let mesh = build_mesh(6, 12, 1.0, 2.0).unwrap();
        let g = build_geometry(GeometryPreset::fixed(1.0, 2.0)).unwrap();
        let p = ModelParams::default();
        let spec = Nonlinearity::MassAction;
        let solver = Solver::new(&g, &mesh, p, &spec);
        let s0 = State::uniform(&mesh, 1.0, 1.0, 1.0);
        let (s1, _) = solver.step_imex(&s0, 0.5).unwrap();
        assert!(s1.u.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let (s2, rep) = solver.step_implicit(&s0, 10.0).unwrap();
        assert_eq!(rep.newton_iterations, 1);
        assert!(s2.z.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn steps_conserve_both_masses() {
        let mesh = build_mesh(8, 16, 1.0, 2.0).unwrap();
        let spec = Nonlinearity::MassAction;
        let p = ModelParams {
            delta_k: 0.5,
            delta_k_prime: 2.0,
            ..ModelParams::default()
        };
        for preset in [
            GeometryPreset::breathing(1.0, 2.0, 0.3, 2.0, 0.1),
            GeometryPreset::surface_wind(1.0, 2.0, 0.8, 0.0),
        ] {
            let g = build_geometry(preset).unwrap();
            let solver = Solver::new(&g, &mesh, p, &spec);
            let mut s = State {
                t: 0.0,
                u: mesh.bulk_field(|r, th| 1.0 + 0.5 * th.cos() * (2.0 - r)),
                w: mesh.surface_field(|th| 1.0 + 0.4 * th.sin()),
                z: mesh.surface_field(|th| 0.2 + 0.1 * (2.0 * th).cos()),
            };
            let (m1, m2) = masses(&solver, &s);
            for step in 0..20 {
                s = if step % 2 == 0 {
                    solver.step_imex(&s, 0.02).unwrap().0
                } else {
                    solver.step_implicit(&s, 0.02).unwrap().0
                };
                let (a, b) = masses(&solver, &s);
                assert!((a - m1).abs() <= 1e-10 * (1.0 + m1), "{a} vs {m1}");
                assert!((b - m2).abs() <= 1e-10 * (1.0 + m2), "{b} vs {m2}");
                assert!(s.min_value() >= -1e-12);
            }
        }
    }

    #[test]
    fn cfl_violation_is_reported() {
        let mesh = build_mesh(4, 64, 1.0, 2.0).unwrap();
        let g = build_geometry(GeometryPreset::surface_wind(1.0, 2.0, 5.0, 0.0)).unwrap();
        let spec = Nonlinearity::MassAction;
        let solver = Solver::new(&g, &mesh, ModelParams::default(), &spec);
        let s = State::uniform(&mesh, 1.0, 1.0, 1.0);
        let err = solver.step_imex(&s, 1.0).unwrap_err();
        assert!(matches!(err, SolverError::CflViolation { .. }));
        assert!(matches!(
            solver.step_imex(&s, -1.0),
            Err(SolverError::InvalidTimeStep(_))
        ));
    }

    #[test]
    fn nonpositive_surface_data_stays_nonpositive() {
        let mesh = build_mesh(4, 32, 1.0, 2.0).unwrap();
        let g = build_geometry(GeometryPreset::breathing(1.0, 2.0, 0.3, 1.0, 0.0)).unwrap();
        let spec = Nonlinearity::MassAction;
        let solver = Solver::new(&g, &mesh, ModelParams::default(), &spec);
        let mut w = mesh.surface_field(|th| -(th.sin().powi(2)));
        let mut t = 0.0;
        for _ in 0..200 {
            w = solver
                .step_surface_scalar(&w, t, 0.01, 0.7, |th| -0.5 * (1.0 + th.cos()))
                .unwrap();
            t += 0.01;
            assert!(w.iter().all(|&v| v <= 1e-12));
        }
    }
}
