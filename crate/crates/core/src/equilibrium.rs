//! Spatially homogeneous equilibrium balancing the two conserved masses.

use thiserror::Error;

use crate::geometry::EvolvingGeometry;
use crate::mesh::{weighted_sum, ReferenceMesh};
use crate::model::ModelParams;
use crate::solver::State;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("masses and measures must be positive and finite (m1={m1}, m2={m2}, area={area}, length={length})")]
    NonpositiveMass {
        m1: f64,
        m2: f64,
        area: f64,
        length: f64,
    },
    #[error("no positive equilibrium for binding ratio {ratio}")]
    NoPositiveRoot { ratio: f64 },
}

/// Closure relation between `z_inf` and `u_inf * w_inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EquilibriumMode {
    /// `z = u w`, as written in the equilibrium system.
    PaperLiteral,
    /// `z = (delta_K' / delta_K) u w`, the zero set of the reaction rate.
    #[default]
    RateBalance,
}

impl EquilibriumMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "paper" | "paper_literal" => Some(Self::PaperLiteral),
            "rate" | "rate_balance" => Some(Self::RateBalance),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PaperLiteral => "paper_literal",
            Self::RateBalance => "rate_balance",
        }
    }

    /// Ratio `z / (u w)` imposed by the mode.
    pub fn ratio(self, params: &ModelParams) -> f64 {
        match self {
            Self::PaperLiteral => 1.0,
            Self::RateBalance => params.binding_ratio(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub u_inf: f64,
    pub w_inf: f64,
    pub z_inf: f64,
    pub m1: f64,
    pub m2: f64,
    pub area: f64,
    pub length: f64,
    pub ratio: f64,
    pub mode: EquilibriumMode,
}

impl Equilibrium {
    /// Relative residuals of the closure relation and the two mass balances.
    pub fn residuals(&self) -> [f64; 3] {
        let closure = self.z_inf - self.ratio * self.u_inf * self.w_inf;
        let b1 = self.u_inf * self.area + self.z_inf * self.length - self.m1;
        let b2 = (self.w_inf + self.z_inf) * self.length - self.m2;
        [
            closure.abs() / self.z_inf,
            b1.abs() / self.m1,
            b2.abs() / self.m2,
        ]
    }
}

/// `(M1, M2)` of a state at its own time.
pub fn conserved_masses(state: &State, geom: &EvolvingGeometry, mesh: &ReferenceMesh) -> (f64, f64) {
    let bulk = mesh.bulk_measures(geom, state.t);
    let surf = mesh.surface_measures(geom, state.t);
    let u = weighted_sum(&bulk, &state.u);
    let w = weighted_sum(&surf, &state.w);
    let z = weighted_sum(&surf, &state.z);
    (u + z, w + z)
}

/// Solve the equilibrium system for given masses and domain measures.
///
/// With `y = z |Gamma|` and `k` the closure ratio the system reduces to
/// `k y^2 - (k (m1 + m2) + |Omega|) y + k m1 m2 = 0`. The smaller root is the
/// admissible one and is evaluated through the product of the roots.
pub fn solve_equilibrium(
    m1: f64,
    m2: f64,
    area: f64,
    length: f64,
    params: &ModelParams,
    mode: EquilibriumMode,
) -> Result<Equilibrium, EquilibriumError> {
    let positive = |v: f64| v > 0.0 && v.is_finite();
    if !(positive(m1) && positive(m2) && positive(area) && positive(length)) {
        return Err(EquilibriumError::NonpositiveMass {
            m1,
            m2,
            area,
            length,
        });
    }
    let k = mode.ratio(params);
    if !positive(k) {
        return Err(EquilibriumError::NoPositiveRoot { ratio: k });
    }
    let b = k * (m1 + m2) + area;
    let c = k * m1 * m2;
    let disc = (b * b - 4.0 * k * c).max(0.0);
    let y = 2.0 * c / (b + disc.sqrt());
    let z = y / length;
    let u = (m1 - y) / area;
    let w = (m2 - y) / length;
    if !(positive(z) && positive(u) && positive(w)) {
        return Err(EquilibriumError::NoPositiveRoot { ratio: k });
    }
    Ok(Equilibrium {
        u_inf: u,
        w_inf: w,
        z_inf: z,
        m1,
        m2,
        area,
        length,
        ratio: k,
        mode,
    })
}

/// Equilibrium for the masses carried by `state`, with measures at `t = 0`.
pub fn equilibrium_of_state(
    state: &State,
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
    params: &ModelParams,
    mode: EquilibriumMode,
) -> Result<Equilibrium, EquilibriumError> {
    let (m1, m2) = conserved_masses(state, geom, mesh);
    let area = mesh.bulk_measures(geom, 0.0).iter().sum();
    let length = mesh.surface_measures(geom, 0.0).iter().sum();
    solve_equilibrium(m1, m2, area, length, params, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, GeometryPreset};
    use crate::mesh::build_mesh;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_example() {
        let eq = solve_equilibrium(2.0, 2.0, 1.0, 1.0, &ModelParams::default(), EquilibriumMode::PaperLiteral)
            .unwrap();
        assert_relative_eq!(eq.u_inf, 1.0, epsilon = 1e-14);
        assert_relative_eq!(eq.w_inf, 1.0, epsilon = 1e-14);
        assert_relative_eq!(eq.z_inf, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn quadratic_example() {
        let eq = solve_equilibrium(4.0, 2.0, 2.0, 1.0, &ModelParams::default(), EquilibriumMode::PaperLiteral)
            .unwrap();
        let s2 = 2f64.sqrt();
        assert_relative_eq!(eq.z_inf, 4.0 - 2.0 * s2, max_relative = 1e-13);
        assert_relative_eq!(eq.u_inf, s2, max_relative = 1e-13);
        assert_relative_eq!(eq.w_inf, 2.0 * s2 - 2.0, max_relative = 1e-13);
        // substitution
        assert!(eq.residuals().iter().all(|r| *r < 1e-14));
    }

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo).signum() == f(mid).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn rate_balance_example() {
        let params = ModelParams {
            delta_k: 1.0,
            delta_k_prime: 2.0,
            ..ModelParams::default()
        };
        let eq = solve_equilibrium(2.0, 2.0, 1.0, 1.0, &params, EquilibriumMode::RateBalance).unwrap();
        let oracle = bisect(|z| 2.0 * (2.0 - z) * (2.0 - z) - z, 0.0, 2.0);
        assert_relative_eq!(eq.z_inf, oracle, max_relative = 1e-12);
        assert_relative_eq!(eq.z_inf, 2.0 * eq.u_inf * eq.w_inf, max_relative = 1e-12);
    }

    #[test]
    fn modes_agree_for_equal_constants() {
        let params = ModelParams {
            delta_k: 0.7,
            delta_k_prime: 0.7,
            ..ModelParams::default()
        };
        let a = solve_equilibrium(3.0, 1.5, 2.0, 4.0, &params, EquilibriumMode::RateBalance).unwrap();
        let b = solve_equilibrium(3.0, 1.5, 2.0, 4.0, &params, EquilibriumMode::PaperLiteral).unwrap();
        assert_eq!((a.u_inf, a.w_inf, a.z_inf), (b.u_inf, b.w_inf, b.z_inf));
    }

    #[test]
    fn invalid_inputs() {
        let p = ModelParams::default();
        for (m1, m2, a, l) in [(0.0, 1.0, 1.0, 1.0), (1.0, -1.0, 1.0, 1.0), (1.0, 1.0, f64::NAN, 1.0)] {
            assert!(matches!(
                solve_equilibrium(m1, m2, a, l, &p, EquilibriumMode::RateBalance),
                Err(EquilibriumError::NonpositiveMass { .. })
            ));
        }
        let off = ModelParams {
            delta_k: f64::INFINITY,
            ..ModelParams::default()
        };
        assert!(matches!(
            solve_equilibrium(1.0, 1.0, 1.0, 1.0, &off, EquilibriumMode::RateBalance),
            Err(EquilibriumError::NoPositiveRoot { .. })
        ));
    }

    #[test]
    fn masses_of_simple_states() {
        let mesh = build_mesh(32, 64, 1.0, 2.0).unwrap();
        let g = build_geometry(GeometryPreset::fixed(1.0, 2.0)).unwrap();
        let s = State::uniform(&mesh, 1.0, 0.0, 1.0);
        let (m1, m2) = conserved_masses(&s, &g, &mesh);
        assert_relative_eq!(m1, 5.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(m2, 2.0 * PI, max_relative = 1e-12);
        let s = State::uniform(&mesh, 0.0, 0.0, 0.0);
        assert_eq!(conserved_masses(&s, &g, &mesh).1, 0.0);

        let mesh = build_mesh(8, 64, 1.0, 2.0).unwrap();
        let mut s = State::uniform(&mesh, 0.0, 0.0, 0.0);
        s.z = mesh.surface_field(|th| th.cos().powi(2));
        assert_relative_eq!(conserved_masses(&s, &g, &mesh).0, PI, max_relative = 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn random_tuples_solve_the_system(
            m1 in 1e-3f64..1e3, m2 in 1e-3f64..1e3,
            area in 1e-2f64..1e2, length in 1e-2f64..1e2,
            ratio in 0.1f64..10.0, literal in any::<bool>(),
        ) {
            let params = ModelParams { delta_k: 1.0, delta_k_prime: ratio, ..ModelParams::default() };
            let mode = if literal { EquilibriumMode::PaperLiteral } else { EquilibriumMode::RateBalance };
            let eq = solve_equilibrium(m1, m2, area, length, &params, mode).unwrap();
            for r in eq.residuals() {
                prop_assert!(r < 1e-10, "{:?}", eq.residuals());
            }
            // the rejected root (product of roots is m1 m2) leaves u or w negative
            let other = m1 * m2 / (eq.z_inf * length);
            prop_assert!(m1 - other < 0.0 || m2 - other < 0.0);
        }

        #[test]
        fn scaling_invariance(c in 1e-3f64..1e3, m1 in 0.1f64..10.0, m2 in 0.1f64..10.0) {
            let p = ModelParams::default();
            let a = solve_equilibrium(m1, m2, 3.0, 2.0, &p, EquilibriumMode::RateBalance).unwrap();
            let b = solve_equilibrium(c * m1, c * m2, c * 3.0, c * 2.0, &p, EquilibriumMode::RateBalance).unwrap();
            prop_assert!((a.u_inf - b.u_inf).abs() <= 1e-12 * a.u_inf);
            prop_assert!((a.w_inf - b.w_inf).abs() <= 1e-12 * a.w_inf);
            prop_assert!((a.z_inf - b.z_inf).abs() <= 1e-12 * a.z_inf);
        }
    }
}
