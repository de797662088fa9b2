//! Analytic evolving annulus geometries.
//!
//! The reference domain is the annulus `r_inner0 < |x| < r_outer0` with the
//! inner circle playing the role of the surface. Every preset maps radius and
//! angle separately, so the pulled-back metric in polar reference coordinates
//! is diagonal.

use std::f64::consts::PI;

use thiserror::Error;

pub type Point = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid geometry preset: {0}")]
    InvalidPreset(String),
    #[error("point ({x}, {y}) lies outside the domain at t = {t}")]
    PointOutsideDomain { t: f64, x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    Fixed,
    Rotation,
    Breathing,
    SurfaceWind,
}

impl GeometryKind {
    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::Fixed => "fixed",
            GeometryKind::Rotation => "rotation",
            GeometryKind::Breathing => "breathing",
            GeometryKind::SurfaceWind => "surface_wind",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fixed" => Some(GeometryKind::Fixed),
            "rotation" => Some(GeometryKind::Rotation),
            "breathing" => Some(GeometryKind::Breathing),
            "surface_wind" | "surfacewind" | "wind" => Some(GeometryKind::SurfaceWind),
            _ => None,
        }
    }
}

/// Parameters of an analytic geometry family.
///
/// `delta` is the exponential decay rate of all velocities; `omega` is the
/// angular speed (rotation) or oscillation frequency (breathing).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryPreset {
    pub kind: GeometryKind,
    pub r_inner0: f64,
    pub r_outer0: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub delta: f64,
    pub wind_speed: f64,
}

impl GeometryPreset {
    pub fn fixed(r_inner0: f64, r_outer0: f64) -> Self {
        GeometryPreset {
            kind: GeometryKind::Fixed,
            r_inner0,
            r_outer0,
            amplitude: 0.0,
            omega: 0.0,
            delta: 0.0,
            wind_speed: 0.0,
        }
    }

    pub fn rotation(r_inner0: f64, r_outer0: f64, omega: f64, delta: f64) -> Self {
        GeometryPreset {
            kind: GeometryKind::Rotation,
            omega,
            delta,
            ..Self::fixed(r_inner0, r_outer0)
        }
    }

    pub fn breathing(r_inner0: f64, r_outer0: f64, amplitude: f64, omega: f64, delta: f64) -> Self {
        GeometryPreset {
            kind: GeometryKind::Breathing,
            amplitude,
            omega,
            delta,
            ..Self::fixed(r_inner0, r_outer0)
        }
    }

    pub fn surface_wind(r_inner0: f64, r_outer0: f64, wind_speed: f64, delta: f64) -> Self {
        GeometryPreset {
            kind: GeometryKind::SurfaceWind,
            wind_speed,
            delta,
            ..Self::fixed(r_inner0, r_outer0)
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [
            self.r_inner0,
            self.r_outer0,
            self.amplitude,
            self.omega,
            self.delta,
            self.wind_speed,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(GeometryError::InvalidPreset("non-finite parameter".into()));
        }
        if !(self.r_inner0 > 0.0 && self.r_outer0 > self.r_inner0) {
            return Err(GeometryError::InvalidPreset(format!(
                "radii must satisfy 0 < r_inner0 < r_outer0, got {} and {}",
                self.r_inner0, self.r_outer0
            )));
        }
        if self.delta < 0.0 {
            return Err(GeometryError::InvalidPreset(format!(
                "velocity decay rate must be nonnegative, got {}",
                self.delta
            )));
        }
        if self.kind == GeometryKind::Breathing {
            let limit = 1.0 - self.r_inner0 / self.r_outer0;
            if self.amplitude.abs() >= limit {
                return Err(GeometryError::InvalidPreset(format!(
                    "breathing amplitude {} collapses the annulus (|amplitude| must be < {})",
                    self.amplitude, limit
                )));
            }
        }
        Ok(())
    }
}

/// Velocities at a physical point, with `j` present only on the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Velocities {
    pub v_p: Point,
    pub v_omega: Point,
    pub v_gamma: Point,
    pub j_omega: Point,
    pub j_gamma: Point,
    pub j: Option<f64>,
}

/// Pulled-back metric of the polar reference coordinates `(r, theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarMetric {
    pub g_rr: f64,
    pub g_rt: f64,
    pub g_tt: f64,
    pub sqrt_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measures {
    pub area: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    /// Max of |(V_p - V_Gamma) . nu| over surface samples.
    pub max_normal_residual: f64,
    pub min_jacobian: f64,
    pub max_area_deviation: f64,
    pub max_length_deviation: f64,
    pub measures_preserved: bool,
    pub diffeomorphic: bool,
}

#[derive(Debug, Clone)]
pub struct EvolvingGeometry {
    preset: GeometryPreset,
}

pub fn build_geometry(preset: GeometryPreset) -> Result<EvolvingGeometry, GeometryError> {
    EvolvingGeometry::new(preset)
}

const MEASURE_NR: usize = 256;
const MEASURE_NTHETA: usize = 512;

impl EvolvingGeometry {
    pub fn new(preset: GeometryPreset) -> Result<Self, GeometryError> {
        preset.validate()?;
        Ok(EvolvingGeometry { preset })
    }

    pub fn preset(&self) -> &GeometryPreset {
        &self.preset
    }

    pub fn kind(&self) -> GeometryKind {
        self.preset.kind
    }

    pub fn r_inner0(&self) -> f64 {
        self.preset.r_inner0
    }

    pub fn r_outer0(&self) -> f64 {
        self.preset.r_outer0
    }

    fn decay(&self, t: f64) -> f64 {
        (-self.preset.delta * t).exp()
    }

    /// Rotation angle of the rigid-motion preset.
    pub fn rotation_angle(&self, t: f64) -> f64 {
        if self.preset.kind != GeometryKind::Rotation {
            return 0.0;
        }
        let p = &self.preset;
        if p.delta == 0.0 {
            p.omega * t
        } else {
            p.omega / p.delta * (1.0 - (-p.delta * t).exp())
        }
    }

    pub fn rotation_rate(&self, t: f64) -> f64 {
        if self.preset.kind != GeometryKind::Rotation {
            return 0.0;
        }
        self.preset.omega * self.decay(t)
    }

    /// Tangential wind speed on the surface (SurfaceWind preset only).
    pub fn wind(&self, t: f64) -> f64 {
        if self.preset.kind != GeometryKind::SurfaceWind {
            return 0.0;
        }
        self.preset.wind_speed * self.decay(t)
    }

    /// Physical radius of the inner boundary.
    pub fn inner_radius(&self, t: f64) -> f64 {
        let p = &self.preset;
        match p.kind {
            GeometryKind::Breathing => {
                p.r_inner0 * (1.0 + p.amplitude * (p.omega * t).sin() * self.decay(t))
            }
            _ => p.r_inner0,
        }
    }

    pub fn inner_radius_rate(&self, t: f64) -> f64 {
        let p = &self.preset;
        match p.kind {
            GeometryKind::Breathing => {
                p.r_inner0
                    * p.amplitude
                    * self.decay(t)
                    * (p.omega * (p.omega * t).cos() - p.delta * (p.omega * t).sin())
            }
            _ => 0.0,
        }
    }

    /// Physical radius `rho(r, t)` and `d rho / d r`.
    pub fn radial_map(&self, t: f64, r: f64) -> (f64, f64) {
        if self.preset.kind != GeometryKind::Breathing {
            return (r, 1.0);
        }
        let (ri0, ro) = (self.preset.r_inner0, self.preset.r_outer0);
        let ri = self.inner_radius(t);
        let slope = (ro - ri) / (ro - ri0);
        (ri + (r - ri0) * slope, slope)
    }

    /// `d rho / dt` at fixed reference radius.
    pub fn radial_map_rate(&self, t: f64, r: f64) -> f64 {
        if self.preset.kind != GeometryKind::Breathing {
            return 0.0;
        }
        let (ri0, ro) = (self.preset.r_inner0, self.preset.r_outer0);
        self.inner_radius_rate(t) * (1.0 - (r - ri0) / (ro - ri0))
    }

    /// Flow map `Phi_t` applied to a reference point.
    pub fn flow_map(&self, t: f64, x: Point) -> Point {
        let r = x[0].hypot(x[1]);
        let theta = x[1].atan2(x[0]) + self.rotation_angle(t);
        let (rho, _) = self.radial_map(t, r);
        [rho * theta.cos(), rho * theta.sin()]
    }

    /// Flow map in polar reference coordinates.
    pub fn flow_map_polar(&self, t: f64, r: f64, theta: f64) -> Point {
        let (rho, _) = self.radial_map(t, r);
        let phi = theta + self.rotation_angle(t);
        [rho * phi.cos(), rho * phi.sin()]
    }

    /// Cartesian Jacobian `D Phi_t(x)`.
    pub fn jacobian(&self, t: f64, x: Point) -> Mat2 {
        let r = x[0].hypot(x[1]);
        let theta = x[1].atan2(x[0]);
        let (fr, ft) = self.polar_frame(t, r, theta);
        // D Phi e_r = fr, D Phi e_theta = ft / r
        let (c, s) = (theta.cos(), theta.sin());
        let ftr = [ft[0] / r, ft[1] / r];
        // columns: D Phi e_x = c fr - s ftr, D Phi e_y = s fr + c ftr
        let col_x = [c * fr[0] - s * ftr[0], c * fr[1] - s * ftr[1]];
        let col_y = [s * fr[0] + c * ftr[0], s * fr[1] + c * ftr[1]];
        [[col_x[0], col_y[0]], [col_x[1], col_y[1]]]
    }

    pub fn jacobian_det(&self, t: f64, x: Point) -> f64 {
        let m = self.jacobian(t, x);
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Jacobian determinant in polar reference coordinates.
    pub fn jacobian_det_polar(&self, t: f64, r: f64) -> f64 {
        let (rho, drho) = self.radial_map(t, r);
        rho * drho / r
    }

    /// Tangent vectors `d y / d r` and `d y / d theta` of the pulled-back
    /// polar chart.
    pub fn polar_frame(&self, t: f64, r: f64, theta: f64) -> (Point, Point) {
        let (rho, drho) = self.radial_map(t, r);
        let phi = theta + self.rotation_angle(t);
        let (c, s) = (phi.cos(), phi.sin());
        ([drho * c, drho * s], [-rho * s, rho * c])
    }

    pub fn polar_metric(&self, t: f64, r: f64, theta: f64) -> PolarMetric {
        let (fr, ft) = self.polar_frame(t, r, theta);
        PolarMetric {
            g_rr: fr[0] * fr[0] + fr[1] * fr[1],
            g_rt: fr[0] * ft[0] + fr[1] * ft[1],
            g_tt: ft[0] * ft[0] + ft[1] * ft[1],
            sqrt_g: (fr[0] * ft[1] - fr[1] * ft[0]).abs(),
        }
    }

    /// Metric stretch `|d/dtheta Phi_t(gamma_0(theta))|` of the surface chart.
    pub fn surface_stretch(&self, t: f64, theta: f64) -> f64 {
        let (_, ft) = self.polar_frame(t, self.preset.r_inner0, theta);
        ft[0].hypot(ft[1])
    }

    /// Unit outward normal of the bulk on the surface; points into the hole.
    pub fn normal(&self, t: f64, y: Point) -> Point {
        let _ = t;
        let rho = y[0].hypot(y[1]);
        [-y[0] / rho, -y[1] / rho]
    }

    /// Unit tangent along the surface in the direction of increasing angle.
    pub fn tangent(&self, y: Point) -> Point {
        let rho = y[0].hypot(y[1]);
        [-y[1] / rho, y[0] / rho]
    }

    fn contains(&self, t: f64, y: Point) -> bool {
        let rho = y[0].hypot(y[1]);
        let ri = self.inner_radius(t);
        let ro = self.preset.r_outer0;
        rho >= ri * (1.0 - 1e-12) - 1e-12 && rho <= ro * (1.0 + 1e-12) + 1e-12
    }

    fn on_surface(&self, t: f64, y: Point) -> bool {
        let rho = y[0].hypot(y[1]);
        let ri = self.inner_radius(t);
        (rho - ri).abs() <= 1e-9 * ri.max(1.0)
    }

    pub fn parametrization_velocity(&self, t: f64, y: Point) -> Point {
        match self.preset.kind {
            GeometryKind::Fixed | GeometryKind::SurfaceWind => [0.0, 0.0],
            GeometryKind::Rotation => {
                let w = self.rotation_rate(t);
                [-w * y[1], w * y[0]]
            }
            GeometryKind::Breathing => {
                let rho = y[0].hypot(y[1]);
                let ri = self.inner_radius(t);
                let ro = self.preset.r_outer0;
                let speed = self.inner_radius_rate(t) * (ro - rho) / (ro - ri);
                [speed * y[0] / rho, speed * y[1] / rho]
            }
        }
    }

    pub fn bulk_velocity(&self, t: f64, y: Point) -> Point {
        match self.preset.kind {
            GeometryKind::SurfaceWind => [0.0, 0.0],
            _ => self.parametrization_velocity(t, y),
        }
    }

    /// Surface material velocity, extended off the surface for evaluation.
    pub fn surface_velocity(&self, t: f64, y: Point) -> Point {
        match self.preset.kind {
            GeometryKind::SurfaceWind => {
                let s = self.wind(t);
                let tau = self.tangent(y);
                [s * tau[0], s * tau[1]]
            }
            _ => self.parametrization_velocity(t, y),
        }
    }

    pub fn velocities_at(&self, t: f64, y: Point) -> Result<Velocities, GeometryError> {
        if !self.contains(t, y) {
            return Err(GeometryError::PointOutsideDomain { t, x: y[0], y: y[1] });
        }
        let v_p = self.parametrization_velocity(t, y);
        let v_omega = self.bulk_velocity(t, y);
        let v_gamma = self.surface_velocity(t, y);
        let j_omega = [v_omega[0] - v_p[0], v_omega[1] - v_p[1]];
        let j_gamma = [v_gamma[0] - v_p[0], v_gamma[1] - v_p[1]];
        let j = if self.on_surface(t, y) {
            let nu = self.normal(t, y);
            Some((v_omega[0] - v_gamma[0]) * nu[0] + (v_omega[1] - v_gamma[1]) * nu[1])
        } else {
            None
        };
        Ok(Velocities {
            v_p,
            v_omega,
            v_gamma,
            j_omega,
            j_gamma,
            j,
        })
    }

    /// Divergence of the parametrization velocity at a physical point.
    pub fn div_parametrization_velocity(&self, t: f64, y: Point) -> f64 {
        match self.preset.kind {
            GeometryKind::Breathing => {
                let rho = y[0].hypot(y[1]);
                let ri = self.inner_radius(t);
                let ro = self.preset.r_outer0;
                let k = self.inner_radius_rate(t) / (ro - ri);
                // (1/rho) d/drho (rho k (ro - rho))
                k * (ro - 2.0 * rho) / rho
            }
            _ => 0.0,
        }
    }

    /// Tangential divergence of the parametrization velocity on the surface.
    pub fn surface_div_parametrization_velocity(&self, t: f64, _theta: f64) -> f64 {
        match self.preset.kind {
            GeometryKind::Breathing => self.inner_radius_rate(t) / self.inner_radius(t),
            _ => 0.0,
        }
    }

    /// Arc-length derivative of `V_p` along the surface at reference angle
    /// `theta`.
    pub fn parametrization_velocity_arc_derivative(&self, t: f64, theta: f64) -> Point {
        let phi = theta + self.rotation_angle(t);
        let (c, s) = (phi.cos(), phi.sin());
        match self.preset.kind {
            GeometryKind::Fixed | GeometryKind::SurfaceWind => [0.0, 0.0],
            // V_p = w R e_phi, d_s e_phi = -e_rho / R
            GeometryKind::Rotation => {
                let w = self.rotation_rate(t);
                [-w * c, -w * s]
            }
            // V_p = R' e_rho, d_s e_rho = e_phi / R
            GeometryKind::Breathing => {
                let k = self.inner_radius_rate(t) / self.inner_radius(t);
                [-k * s, k * c]
            }
        }
    }

    /// Tangential component of `J_Gamma` on the surface.
    pub fn surface_relative_speed(&self, t: f64, theta: f64) -> f64 {
        let y = self.flow_map_polar(t, self.preset.r_inner0, theta);
        let v_p = self.parametrization_velocity(t, y);
        let v_g = self.surface_velocity(t, y);
        let tau = self.tangent(y);
        (v_g[0] - v_p[0]) * tau[0] + (v_g[1] - v_p[1]) * tau[1]
    }

    /// Bound on `|V_Omega| + |V_Gamma|` at time `t`.
    pub fn speed_bound(&self, t: f64) -> f64 {
        let p = &self.preset;
        match p.kind {
            GeometryKind::Fixed => 0.0,
            GeometryKind::Rotation => 2.0 * self.rotation_rate(t).abs() * p.r_outer0,
            GeometryKind::Breathing => 2.0 * self.inner_radius_rate(t).abs(),
            GeometryKind::SurfaceWind => self.wind(t).abs(),
        }
    }

    pub fn closed_form_measures(&self, t: f64) -> Measures {
        let ri = self.inner_radius(t);
        let ro = self.preset.r_outer0;
        Measures {
            area: PI * (ro * ro - ri * ri),
            length: 2.0 * PI * ri,
        }
    }

    /// Area and length by midpoint quadrature over a fine polar grid.
    pub fn measures(&self, t: f64) -> Measures {
        self.measures_with(t, MEASURE_NR, MEASURE_NTHETA)
    }

    pub fn measures_with(&self, t: f64, n_r: usize, n_theta: usize) -> Measures {
        let (ri0, ro) = (self.preset.r_inner0, self.preset.r_outer0);
        let dr = (ro - ri0) / n_r as f64;
        let dth = 2.0 * PI / n_theta as f64;
        let mut area = 0.0;
        for i in 0..n_r {
            let r = ri0 + (i as f64 + 0.5) * dr;
            let mut ring = 0.0;
            for k in 0..n_theta {
                let th = (k as f64 + 0.5) * dth;
                ring += self.polar_metric(t, r, th).sqrt_g;
            }
            area += ring * dr * dth;
        }
        let length = (0..n_theta)
            .map(|k| self.surface_stretch(t, (k as f64 + 0.5) * dth))
            .sum::<f64>()
            * dth;
        Measures { area, length }
    }

    /// Samples the kinematic compatibility condition, the Jacobian sign and
    /// the measure-preservation assumption over `t_grid`.
    pub fn check_kinematics(&self, t_grid: &[f64], tol: f64) -> CompatibilityReport {
        const NR: usize = 16;
        const NT: usize = 64;
        let m0 = self.measures(0.0);
        let (ri0, ro) = (self.preset.r_inner0, self.preset.r_outer0);
        let mut report = CompatibilityReport {
            max_normal_residual: 0.0,
            min_jacobian: f64::INFINITY,
            max_area_deviation: 0.0,
            max_length_deviation: 0.0,
            measures_preserved: true,
            diffeomorphic: true,
        };
        for &t in t_grid {
            for k in 0..NT {
                let th = 2.0 * PI * (k as f64 + 0.5) / NT as f64;
                let y = self.flow_map_polar(t, ri0, th);
                let nu = self.normal(t, y);
                let vp = self.parametrization_velocity(t, y);
                let vg = self.surface_velocity(t, y);
                let res = ((vp[0] - vg[0]) * nu[0] + (vp[1] - vg[1]) * nu[1]).abs();
                report.max_normal_residual = report.max_normal_residual.max(res);
                for i in 0..=NR {
                    let r = ri0 + (ro - ri0) * i as f64 / NR as f64;
                    report.min_jacobian = report.min_jacobian.min(self.jacobian_det_polar(t, r));
                }
            }
            let m = self.measures(t);
            report.max_area_deviation = report.max_area_deviation.max((m.area - m0.area).abs());
            report.max_length_deviation =
                report.max_length_deviation.max((m.length - m0.length).abs());
        }
        report.measures_preserved =
            report.max_area_deviation <= tol && report.max_length_deviation <= tol;
        report.diffeomorphic = report.min_jacobian > 0.0;
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn breathing() -> EvolvingGeometry {
        build_geometry(GeometryPreset::breathing(1.0, 2.0, 0.1, 1.0, 0.2)).unwrap()
    }

    /// Classical RK4 for `y' = V_p(t, y)`, independent of the closed-form map.
    fn integrate_flow(g: &EvolvingGeometry, x0: Point, t_end: f64, steps: usize) -> Point {
        let h = t_end / steps as f64;
        let mut y = x0;
        let mut t = 0.0;
        let f = |t: f64, y: Point| g.parametrization_velocity(t, y);
        for _ in 0..steps {
            let k1 = f(t, y);
            let k2 = f(t + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
            let k3 = f(t + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
            let k4 = f(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for d in 0..2 {
                y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
            t += h;
        }
        y
    }

    #[test]
    fn fixed_map_is_identity() {
        let g = build_geometry(GeometryPreset::fixed(1.0, 2.0)).unwrap();
        for t in [0.0, 0.7, 13.0] {
            let y = g.flow_map(t, [1.3, 0.0]);
            assert_eq!(y, [1.3, 0.0]);
        }
    }

    #[test]
    fn quarter_rotation() {
        let g = build_geometry(GeometryPreset::rotation(0.5, 2.0, 1.0, 0.0)).unwrap();
        let y = g.flow_map(PI / 2.0, [1.0, 0.0]);
        assert_abs_diff_eq!(y[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(y[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn breathing_radius_matches_closed_form_and_ode() {
        let g = breathing();
        let t = PI / 2.0;
        let expected = 1.0 + 0.1 * (-0.1 * PI).exp();
        assert_abs_diff_eq!(g.inner_radius(t), expected, epsilon = 1e-15);
        for &x0 in &[[1.0, 0.0], [0.0, 1.5], [-1.2, -1.2]] {
            let y = g.flow_map(t, x0);
            let y_ode = integrate_flow(&g, x0, t, 4000);
            assert_abs_diff_eq!(y[0], y_ode[0], epsilon = 1e-10);
            assert_abs_diff_eq!(y[1], y_ode[1], epsilon = 1e-10);
        }
    }

    #[test]
    fn rotation_matches_ode_with_decay() {
        let g = build_geometry(GeometryPreset::rotation(1.0, 2.0, 1.3, 0.5)).unwrap();
        let y = g.flow_map(2.0, [1.5, 0.2]);
        let y_ode = integrate_flow(&g, [1.5, 0.2], 2.0, 4000);
        assert_abs_diff_eq!(y[0], y_ode[0], epsilon = 1e-10);
        assert_abs_diff_eq!(y[1], y_ode[1], epsilon = 1e-10);
    }

    #[test]
    fn identity_at_time_zero() {
        for g in [
            breathing(),
            build_geometry(GeometryPreset::rotation(1.0, 2.0, 2.0, 0.1)).unwrap(),
        ] {
            let x = [1.2, -0.7];
            let y = g.flow_map(0.0, x);
            assert_abs_diff_eq!(y[0], x[0], epsilon = 1e-14);
            assert_abs_diff_eq!(y[1], x[1], epsilon = 1e-14);
            let m = g.jacobian(0.0, x);
            assert_abs_diff_eq!(m[0][0], 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(m[0][1], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(m[1][0], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(m[1][1], 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = breathing();
        let (t, x) = (0.9, [1.1, 0.6]);
        let m = g.jacobian(t, x);
        let h = 1e-6;
        for c in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            let (yp, ym) = (g.flow_map(t, xp), g.flow_map(t, xm));
            for rrow in 0..2 {
                assert_abs_diff_eq!(m[rrow][c], (yp[rrow] - ym[rrow]) / (2.0 * h), epsilon = 1e-8);
            }
        }
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let r = x[0].hypot(x[1]);
        assert_abs_diff_eq!(det, g.jacobian_det_polar(t, r), epsilon = 1e-12);
    }

    #[test]
    fn rejects_invalid_presets() {
        assert!(build_geometry(GeometryPreset::fixed(2.0, 1.0)).is_err());
        assert!(build_geometry(GeometryPreset::fixed(0.0, 1.0)).is_err());
        assert!(build_geometry(GeometryPreset::breathing(1.0, 2.0, 0.5, 1.0, 0.0)).is_err());
        assert!(build_geometry(GeometryPreset::breathing(1.0, 2.0, -0.6, 1.0, 0.0)).is_err());
        assert!(build_geometry(GeometryPreset::rotation(1.0, 2.0, 1.0, -0.1)).is_err());
        assert!(build_geometry(GeometryPreset::breathing(1.0, 2.0, 0.49, 1.0, 0.0)).is_ok());
    }

    #[test]
    fn fixed_velocities_vanish() {
        let g = build_geometry(GeometryPreset::fixed(1.0, 2.0)).unwrap();
        let v = g.velocities_at(1.0, [1.0, 0.0]).unwrap();
        assert_eq!(v.v_p, [0.0, 0.0]);
        assert_eq!(v.j_omega, [0.0, 0.0]);
        assert_eq!(v.j_gamma, [0.0, 0.0]);
        assert_eq!(v.j, Some(0.0));
        let interior = g.velocities_at(1.0, [1.5, 0.0]).unwrap();
        assert_eq!(interior.j, None);
    }

    #[test]
    fn surface_wind_is_tangential() {
        let g = build_geometry(GeometryPreset::surface_wind(1.0, 2.0, 0.5, 0.0)).unwrap();
        let y = [0.6, 0.8];
        let v = g.velocities_at(3.0, y).unwrap();
        assert_abs_diff_eq!(v.v_gamma[0].hypot(v.v_gamma[1]), 0.5, epsilon = 1e-15);
        assert_eq!(v.j_gamma, v.v_gamma);
        assert_abs_diff_eq!(v.j.unwrap(), 0.0, epsilon = 1e-15);
        let nu = g.normal(3.0, y);
        assert_abs_diff_eq!(v.v_gamma[0] * nu[0] + v.v_gamma[1] * nu[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn breathing_has_no_normal_slip() {
        let g = breathing();
        let t = 0.8;
        let ri = g.inner_radius(t);
        let y = [ri * 0.3f64.cos(), ri * 0.3f64.sin()];
        let v = g.velocities_at(t, y).unwrap();
        assert_eq!(v.j, Some(0.0));
        assert!(g.velocities_at(t, [0.1, 0.0]).is_err());
        assert!(g.velocities_at(t, [2.5, 0.0]).is_err());
    }

    #[test]
    fn fixed_and_rotation_measures() {
        let f = build_geometry(GeometryPreset::fixed(1.0, 2.0)).unwrap();
        let m = f.measures(0.0);
        assert_abs_diff_eq!(m.area, 3.0 * PI, epsilon = 1e-11);
        assert_abs_diff_eq!(m.length, 2.0 * PI, epsilon = 1e-12);
        let r = build_geometry(GeometryPreset::rotation(1.0, 2.0, 3.0, 0.0)).unwrap();
        let m0 = r.measures(0.0);
        for t in [0.3, 1.7, 11.0] {
            let mt = r.measures(t);
            assert_eq!(mt.area, m0.area);
            assert_eq!(mt.length, m0.length);
        }
    }

    #[test]
    fn breathing_measures_match_closed_form() {
        let g = breathing();
        let t = PI / 2.0;
        let ri = g.inner_radius(t);
        let closed = g.closed_form_measures(t);
        assert_abs_diff_eq!(closed.area, PI * (4.0 - ri * ri), epsilon = 1e-14);
        let coarse = g.measures_with(t, 8, 16);
        let fine = g.measures(t);
        // polar midpoint cells are exact for a radially affine map
        assert_abs_diff_eq!(coarse.area, closed.area, epsilon = 1e-12);
        assert_abs_diff_eq!(fine.area, closed.area, epsilon = 1e-11);
        assert_abs_diff_eq!(fine.length, 2.0 * PI * ri, epsilon = 1e-12);
    }

    #[test]
    fn kinematics_reports() {
        let grid: Vec<f64> = (0..20).map(|i| 0.25 * i as f64).collect();
        let fixed = build_geometry(GeometryPreset::fixed(1.0, 2.0)).unwrap();
        let rep = fixed.check_kinematics(&grid, 1e-10);
        assert_eq!(rep.max_normal_residual, 0.0);
        assert!(rep.measures_preserved && rep.diffeomorphic);

        let rot = build_geometry(GeometryPreset::rotation(1.0, 2.0, 1.0, 0.5)).unwrap();
        let rep = rot.check_kinematics(&grid, 1e-10);
        assert!(rep.max_normal_residual < 1e-14);
        assert!(rep.measures_preserved);

        let br = breathing();
        let rep = br.check_kinematics(&grid, 1e-10);
        assert!(!rep.measures_preserved);
        assert!(rep.diffeomorphic);
        // oracle: closed-form area deviation maximized over the same grid
        let a0 = br.closed_form_measures(0.0).area;
        let oracle = grid
            .iter()
            .map(|&t| (br.closed_form_measures(t).area - a0).abs())
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(rep.max_area_deviation, oracle, epsilon = 1e-10);
    }

    #[test]
    fn finite_difference_flow_order() {
        for g in [
            breathing(),
            build_geometry(GeometryPreset::rotation(1.0, 2.0, 1.0, 0.3)).unwrap(),
        ] {
            let (t, x) = (0.7, [1.3, 0.4]);
            let err = |h: f64| {
                let y0 = g.flow_map(t, x);
                let y1 = g.flow_map(t + h, x);
                let v = g.parametrization_velocity(t, y0);
                ((y1[0] - y0[0]) / h - v[0]).hypot((y1[1] - y0[1]) / h - v[1])
            };
            let (e1, e2) = (err(1e-3), err(1e-4));
            let order = (e1 / e2).log10();
            assert!(order >= 0.9, "order {order}");
        }
    }

    #[test]
    fn normal_is_unit_and_points_into_hole() {
        let g = breathing();
        for k in 0..16 {
            let th = k as f64 * 0.4;
            let t = 1.1;
            let y = g.flow_map_polar(t, 1.0, th);
            let nu = g.normal(t, y);
            assert_abs_diff_eq!(nu[0].hypot(nu[1]), 1.0, epsilon = 1e-12);
            let inward = [y[0] + 1e-3 * nu[0], y[1] + 1e-3 * nu[1]];
            assert!(inward[0].hypot(inward[1]) < g.inner_radius(t));
        }
    }

    #[test]
    fn surface_divergence_matches_length_rate() {
        let g = breathing();
        let t = 0.4;
        let h = 1e-5;
        let dl = (g.closed_form_measures(t + h).length - g.closed_form_measures(t - h).length)
            / (2.0 * h);
        let integral = g.surface_div_parametrization_velocity(t, 0.0) * g.closed_form_measures(t).length;
        assert_abs_diff_eq!(dl, integral, epsilon = 1e-8);
    }
}
