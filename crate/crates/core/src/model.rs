//! Physical parameters, reaction nonlinearities and sampled checks of the
//! structural assumptions (quasi-positivity, mass dissipation, growth bounds).

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("unknown nonlinearity `{0}`")]
    UnknownNonlinearity(String),
    #[error("invalid growth exponents: {0}")]
    InvalidExponents(String),
}

/// Diffusivities and binding constants.
///
/// An infinite binding constant switches the corresponding half of the
/// mass-action rate off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub delta_omega: f64,
    pub delta_gamma: f64,
    pub delta_gamma_prime: f64,
    pub delta_k: f64,
    pub delta_k_prime: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            delta_omega: 1.0,
            delta_gamma: 1.0,
            delta_gamma_prime: 1.0,
            delta_k: 1.0,
            delta_k_prime: 1.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let diffusivities = [
            ("delta_omega", self.delta_omega),
            ("delta_gamma", self.delta_gamma),
            ("delta_gamma_prime", self.delta_gamma_prime),
        ];
        for (name, value) in diffusivities {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        for (name, value) in [("delta_k", self.delta_k), ("delta_k_prime", self.delta_k_prime)] {
            if !(value > 0.0) || value.is_nan() {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Ratio `delta_k_prime / delta_k` fixing the rate-balance closure
    /// `z = ratio * u * w`.
    pub fn binding_ratio(&self) -> f64 {
        self.delta_k_prime / self.delta_k
    }

    pub fn reaction_disabled(&self) -> bool {
        self.delta_k.is_infinite() && self.delta_k_prime.is_infinite()
    }
}

/// `r(u, w, z) = z / delta_k' - u w / delta_k`.
#[inline]
pub fn mass_action_rate(u: f64, w: f64, z: f64, params: &ModelParams) -> f64 {
    z / params.delta_k_prime - u * w / params.delta_k
}

pub type ReactionFn = fn(f64, f64, f64) -> f64;

/// A user-registered reaction triple with its declared growth exponents.
#[derive(Clone)]
pub struct CustomNonlinearity {
    pub name: &'static str,
    pub f: [ReactionFn; 3],
    pub alpha: f64,
    pub beta: f64,
    pub poly_degree: i32,
}

impl fmt::Debug for CustomNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomNonlinearity")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("poly_degree", &self.poly_degree)
            .finish()
    }
}

impl PartialEq for CustomNonlinearity {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

/// Critical exponent `(d + 4) / (d + 2)` for a curve (`d = 1`).
pub const BETA_CRITICAL: f64 = 5.0 / 3.0;

impl CustomNonlinearity {
    pub fn new(
        name: &'static str,
        f: [ReactionFn; 3],
        alpha: f64,
        beta: f64,
        poly_degree: i32,
    ) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ModelError::InvalidExponents(format!("alpha = {alpha} must be finite and > 0")));
        }
        if !(beta < BETA_CRITICAL) || beta.is_nan() {
            return Err(ModelError::InvalidExponents(format!(
                "beta = {beta} must be below {BETA_CRITICAL}"
            )));
        }
        Ok(CustomNonlinearity {
            name,
            f,
            alpha,
            beta,
            poly_degree,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    MassAction,
    Custom(CustomNonlinearity),
}

fn saturating_rate(u: f64, w: f64, z: f64) -> f64 {
    z - u * w * w / (1.0 + w)
}

/// Names accepted after `custom:` in configuration files.
pub const CUSTOM_NAMES: &[&str] = &["saturating_binding", "constant_source"];

pub fn custom_nonlinearity(name: &str) -> Result<CustomNonlinearity, ModelError> {
    match name {
        // f1 = f2 = z - u w^2 / (1 + w), f3 = -f1
        "saturating_binding" => CustomNonlinearity::new(
            "saturating_binding",
            [saturating_rate, saturating_rate, |u, w, z| -saturating_rate(u, w, z)],
            1.0,
            1.0,
            2,
        ),
        // violates mass dissipation; used as a counterexample
        "constant_source" => CustomNonlinearity::new(
            "constant_source",
            [|_, _, _| 0.0, |_, _, _| 1.0, |_, _, _| 1.0],
            1.0,
            1.0,
            0,
        ),
        other => Err(ModelError::UnknownNonlinearity(other.to_string())),
    }
}

impl Nonlinearity {
    /// Parses `mass_action` or `custom:<name>`.
    pub fn parse(s: &str) -> Result<Self, ModelError> {
        match s {
            "mass_action" => Ok(Nonlinearity::MassAction),
            _ => match s.strip_prefix("custom:") {
                Some(name) => Ok(Nonlinearity::Custom(custom_nonlinearity(name)?)),
                None => Err(ModelError::UnknownNonlinearity(s.to_string())),
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            Nonlinearity::MassAction => "mass_action".into(),
            Nonlinearity::Custom(c) => format!("custom:{}", c.name),
        }
    }

    /// `(f1, f2, f3)` at a point.
    #[inline]
    pub fn eval(&self, u: f64, w: f64, z: f64, params: &ModelParams) -> [f64; 3] {
        match self {
            Nonlinearity::MassAction => {
                let r = mass_action_rate(u, w, z, params);
                [r, r, -r]
            }
            Nonlinearity::Custom(c) => [(c.f[0])(u, w, z), (c.f[1])(u, w, z), (c.f[2])(u, w, z)],
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Nonlinearity::MassAction => 2.0,
            Nonlinearity::Custom(c) => c.alpha,
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            Nonlinearity::MassAction => 1.0,
            Nonlinearity::Custom(c) => c.beta,
        }
    }

    pub fn poly_degree(&self) -> i32 {
        match self {
            Nonlinearity::MassAction => 2,
            Nonlinearity::Custom(c) => c.poly_degree,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    pub u: (f64, f64),
    pub w: (f64, f64),
    pub z: (f64, f64),
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox {
            u: (0.0, 10.0),
            w: (0.0, 10.0),
            z: (0.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionEntry {
    pub name: &'static str,
    pub passed: bool,
    /// Largest violation (signed so that > tol means failure), or the fitted
    /// constant for the growth checks.
    pub worst_value: f64,
    pub witness: Option<[f64; 3]>,
    pub fitted_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[derive(Default)]
struct Worst {
    value: f64,
    witness: Option<[f64; 3]>,
}

impl Worst {
    fn new() -> Self {
        Worst {
            value: f64::NEG_INFINITY,
            witness: None,
        }
    }
    fn update(&mut self, value: f64, at: [f64; 3]) {
        if value > self.value {
            self.value = value;
            self.witness = Some(at);
        }
    }
}

/// Evaluates the structural assumptions on a deterministic sample cloud.
///
/// Sign conditions are pass/fail with the worst witness; growth conditions
/// report the smallest constant consistent with the samples.
pub fn check_assumptions(
    spec: &Nonlinearity,
    params: &ModelParams,
    sample_box: SampleBox,
    n_samples: usize,
    rng_seed: u64,
    tol: f64,
) -> AssumptionReport {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
        if hi > lo {
            rng.gen_range(lo..=hi)
        } else {
            lo
        }
    };
    let (alpha, beta, deg) = (spec.alpha(), spec.beta(), spec.poly_degree());

    let mut a1 = Worst::new();
    let mut a2 = Worst::new();
    let mut a3_first = Worst::new();
    let mut a3_second = Worst::new();
    let mut c41 = Worst::new();
    let mut c4_f2 = Worst::new();
    let mut c4_f3 = Worst::new();
    let mut c5 = Worst::new();

    for _ in 0..n_samples.max(1) {
        let p = [
            draw(&mut rng, sample_box.u),
            draw(&mut rng, sample_box.w),
            draw(&mut rng, sample_box.z),
        ];
        let [u, w, z] = p;
        let f = spec.eval(u, w, z, params);

        // quasi-positivity on the three faces; negated so larger is worse
        let f1_face = spec.eval(0.0, w, z, params)[0];
        let f2_face = spec.eval(u, 0.0, z, params)[1];
        let f3_face = spec.eval(u, w, 0.0, params)[2];
        a1.update(-f1_face, [0.0, w, z]);
        a1.update(-f2_face, [u, 0.0, z]);
        a1.update(-f3_face, [u, w, 0.0]);

        a2.update(f[1] + f[2], p);
        a3_first.update(f[0] + f[1], p);
        a3_second.update(f[0] + f[2], p);

        let growth_a = w.powf(alpha) + z.powf(alpha) + 1.0;
        c41.update(f[0].max(0.0) / growth_a, p);
        let growth_b = w.powf(beta) + z.powf(beta) + 1.0;
        c4_f2.update(f[1].max(0.0) / growth_b, p);
        c4_f3.update(f[2].max(0.0) / growth_b, p);
        let poly = (1.0 + u + w + z).powi(deg);
        c5.update(f[1].abs().max(f[2].abs()) / poly, p);
    }

    let mut entries = Vec::with_capacity(6);
    entries.push(AssumptionEntry {
        name: "A1",
        passed: a1.value <= tol,
        worst_value: a1.value,
        witness: a1.witness,
        fitted_constant: None,
    });
    entries.push(AssumptionEntry {
        name: "A2",
        passed: a2.value <= tol,
        worst_value: a2.value,
        witness: a2.witness,
        fitted_constant: None,
    });
    // A3 holds if either of its two alternatives does
    let a3_best = if a3_first.value <= a3_second.value { &a3_first } else { &a3_second };
    entries.push(AssumptionEntry {
        name: "A3",
        passed: a3_best.value <= tol,
        worst_value: a3_best.value,
        witness: a3_best.witness,
        fitted_constant: None,
    });
    entries.push(AssumptionEntry {
        name: "A4_1",
        passed: c41.value.is_finite(),
        worst_value: c41.value,
        witness: c41.witness,
        fitted_constant: Some(c41.value),
    });
    let c4 = if c4_f2.value <= c4_f3.value { &c4_f2 } else { &c4_f3 };
    entries.push(AssumptionEntry {
        name: "A4",
        passed: c4.value.is_finite() && beta < BETA_CRITICAL,
        worst_value: c4.value,
        witness: c4.witness,
        fitted_constant: Some(c4.value),
    });
    entries.push(AssumptionEntry {
        name: "A5",
        passed: c5.value.is_finite(),
        worst_value: c5.value,
        witness: c5.witness,
        fitted_constant: Some(c5.value),
    });
    AssumptionReport { entries }
}
