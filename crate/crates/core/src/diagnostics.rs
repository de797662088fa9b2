//! Entropy, entropy dissipation, CKP bounds, decay fits, the sampled
//! entropy-dissipation probe and Poincare-type constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::equilibrium::{conserved_masses, Equilibrium};
use crate::geometry::EvolvingGeometry;
use crate::linalg;
use crate::mesh::{weighted_sum, ReferenceMesh};
use crate::model::ModelParams;
use crate::operators::{assemble_operators, AssemblyError, DiscreteOperators};
use crate::solver::State;

/// Default floor applied inside logarithms and denominators.
pub const DEFAULT_FLOOR: f64 = 1e-30;

/// Constant of the classical Csiszar-Kullback-Pinsker step in the proof.
pub const CKP_GAMMA: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("field {field} contains a non-finite value")]
    NonfiniteField { field: &'static str },
    #[error("state masses ({m1}, {m2}) differ from the equilibrium masses ({e1}, {e2})")]
    MassMismatch { m1: f64, m2: f64, e1: f64, e2: f64 },
    #[error("decay fit needs at least 5 points in the window, got {got}")]
    InsufficientData { got: usize },
    #[error("entropy {value} at t = {t} is not positive")]
    NonpositiveEntropy { t: f64, value: f64 },
    #[error("every probe sample was at equilibrium")]
    DegenerateSampler,
    #[error("eigenvalue estimation failed: {0}")]
    EigenFailure(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// Boltzmann integrand `s log(s / s_inf) - s + s_inf` with `0 log 0 = 0`.
pub fn boltzmann(s: f64, s_inf: f64) -> f64 {
    if s <= 0.0 {
        s_inf
    } else {
        s * (s / s_inf).ln() - s + s_inf
    }
}

fn check_finite(state: &State) -> Result<(), DiagnosticsError> {
    for (field, v) in [("u", &state.u), ("w", &state.w), ("z", &state.z)] {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(DiagnosticsError::NonfiniteField { field });
        }
    }
    Ok(())
}

fn entropy_with(state: &State, eq: &Equilibrium, bulk: &[f64], surf: &[f64]) -> f64 {
    let eu: Vec<f64> = state.u.iter().map(|&u| boltzmann(u, eq.u_inf)).collect();
    let ew: Vec<f64> = state.w.iter().map(|&w| boltzmann(w, eq.w_inf)).collect();
    let ez: Vec<f64> = state.z.iter().map(|&z| boltzmann(z, eq.z_inf)).collect();
    weighted_sum(bulk, &eu) + weighted_sum(surf, &ew) + weighted_sum(surf, &ez)
}

/// Relative entropy `E[u, w, z]` on the domain at `state.t`.
pub fn relative_entropy(
    state: &State,
    eq: &Equilibrium,
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
) -> Result<f64, DiagnosticsError> {
    check_finite(state)?;
    let bulk = mesh.bulk_measures(geom, state.t);
    let surf = mesh.surface_measures(geom, state.t);
    Ok(entropy_with(state, eq, &bulk, &surf))
}

/// `c (a - b)(log a - log b)`, the face contribution to `int |grad f|^2 / f`
/// with the logarithmic mean as face value.
#[inline]
fn fisher_face(c: f64, a: f64, b: f64, floor: f64) -> f64 {
    let (a, b) = (a.max(floor), b.max(floor));
    c * (a - b) * (a.ln() - b.ln())
}

fn bulk_fisher(ops: &DiscreteOperators, u: &[f64], floor: f64) -> f64 {
    let (n_r, n_t) = (ops.n_r, ops.n_theta);
    let mut terms = Vec::with_capacity(2 * u.len());
    for i in 0..n_r {
        for k in 0..n_t {
            let c = i * n_t + k;
            let e = i * n_t + (k + 1) % n_t;
            terms.push(fisher_face(ops.angular_coef[c], u[c], u[e], floor));
            if i + 1 < n_r {
                terms.push(fisher_face(ops.radial_coef[c], u[c], u[c + n_t], floor));
            }
        }
    }
    weighted_sum(&vec![1.0; terms.len()], &terms)
}

fn surface_fisher(ops: &DiscreteOperators, w: &[f64], floor: f64) -> f64 {
    let n = ops.n_theta;
    let terms: Vec<f64> = (0..n)
        .map(|k| fisher_face(ops.surface_coef[k], w[k], w[(k + 1) % n], floor))
        .collect();
    weighted_sum(&vec![1.0; n], &terms)
}

/// Entropy dissipation functional `D~`: the three Fisher informations with
/// weight one half and the reaction term `(z - u w) log(z / (u w))` on the
/// surface, with the innermost bulk ring as trace of `u`.
pub fn entropy_dissipation(
    state: &State,
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
    params: &ModelParams,
    floor_eps: f64,
) -> Result<f64, DiagnosticsError> {
    check_finite(state)?;
    let ops = assemble_operators(geom, mesh, state.t)?;
    Ok(dissipation_with(&ops, state, params, floor_eps))
}

fn dissipation_with(ops: &DiscreteOperators, state: &State, params: &ModelParams, floor: f64) -> f64 {
    let fisher = 0.5 * params.delta_omega * bulk_fisher(ops, &state.u, floor)
        + 0.5 * params.delta_gamma * surface_fisher(ops, &state.w, floor)
        + 0.5 * params.delta_gamma_prime * surface_fisher(ops, &state.z, floor);
    let reaction: Vec<f64> = (0..ops.n_theta)
        .map(|k| {
            let uw = (state.u[k] * state.w[k]).max(floor);
            let z = state.z[k].max(floor);
            (z - uw) * (z.ln() - uw.ln())
        })
        .collect();
    fisher + weighted_sum(&ops.surface_measure, &reaction)
}

/// The six constants of the CKP-type lemma and the resulting `C_CKP`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CkpConstants {
    /// `4 M^2 |.| / gamma^2` for the intra-field terms of `u`, `w`, `z`.
    pub intra: [f64; 3],
    /// `|.| (sqrt M + sqrt s_inf)^2` for the average-distance terms.
    pub average: [f64; 3],
    pub c_ckp: f64,
}

/// Constants assembled as in the proof, with `M` the available bound on
/// each spatial average: `M1 / |Omega|` for `u` and `M2 / |Gamma|` for `w`
/// and `z`. Each field satisfies
/// `||s - s_inf||^2 <= 2 max(intra, average) * (its share of E)`.
pub fn ckp_constants(eq: &Equilibrium) -> CkpConstants {
    let g2 = CKP_GAMMA * CKP_GAMMA;
    let mu = eq.m1 / eq.area;
    let mw = eq.m2 / eq.length;
    let intra = [
        4.0 * mu * mu * eq.area / g2,
        4.0 * mw * mw * eq.length / g2,
        4.0 * mw * mw * eq.length / g2,
    ];
    let average = [
        eq.area * (mu.sqrt() + eq.u_inf.sqrt()).powi(2),
        eq.length * (mw.sqrt() + eq.w_inf.sqrt()).powi(2),
        eq.length * (mw.sqrt() + eq.z_inf.sqrt()).powi(2),
    ];
    let c_ckp = (0..3)
        .map(|i| 1.0 / (2.0 * intra[i].max(average[i])))
        .fold(f64::INFINITY, f64::min);
    CkpConstants {
        intra,
        average,
        c_ckp,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CkpBound {
    pub lhs: f64,
    pub rhs: f64,
    pub c_ckp: f64,
}

impl CkpBound {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs >= self.rhs - slack
    }
}

/// Both sides of `E >= C_CKP (||u - u_inf||^2 + ||w - w_inf||^2 + ||z - z_inf||^2)`.
pub fn ckp_lower_bound(
    state: &State,
    eq: &Equilibrium,
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
) -> Result<CkpBound, DiagnosticsError> {
    check_finite(state)?;
    let (m1, m2) = conserved_masses(state, geom, mesh);
    if (m1 - eq.m1).abs() > 1e-6 * eq.m1 || (m2 - eq.m2).abs() > 1e-6 * eq.m2 {
        return Err(DiagnosticsError::MassMismatch {
            m1,
            m2,
            e1: eq.m1,
            e2: eq.m2,
        });
    }
    let lhs = relative_entropy(state, eq, geom, mesh)?;
    let [lu, lw, lz] = l1_distances(state, eq, geom, mesh);
    let c_ckp = ckp_constants(eq).c_ckp;
    Ok(CkpBound {
        lhs,
        rhs: c_ckp * (lu * lu + lw * lw + lz * lz),
        c_ckp,
    })
}

/// `L1` distances of the three fields to the equilibrium at `state.t`.
pub fn l1_distances(
    state: &State,
    eq: &Equilibrium,
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
) -> [f64; 3] {
    let bulk = mesh.bulk_measures(geom, state.t);
    let surf = mesh.surface_measures(geom, state.t);
    let dist = |m: &[f64], v: &[f64], s: f64| {
        let d: Vec<f64> = v.iter().map(|x| (x - s).abs()).collect();
        weighted_sum(m, &d)
    };
    [
        dist(&bulk, &state.u, eq.u_inf),
        dist(&surf, &state.w, eq.w_inf),
        dist(&surf, &state.z, eq.z_inf),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub m1: f64,
    pub m2: f64,
    pub entropy: f64,
    pub dissipation: f64,
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub l1: [f64; 3],
    pub area_omega: f64,
    pub length_gamma: f64,
}

pub const CSV_HEADER: &str = "t,m1,m2,entropy,dissipation,min_u,min_w,min_z,max_u,max_w,max_z,l1_u,l1_w,l1_z,area_omega,length_gamma";

impl DiagnosticsRecord {
    pub fn csv_row(&self) -> String {
        let vals = [
            self.t,
            self.m1,
            self.m2,
            self.entropy,
            self.dissipation,
            self.min[0],
            self.min[1],
            self.min[2],
            self.max[0],
            self.max[1],
            self.max[2],
            self.l1[0],
            self.l1[1],
            self.l1[2],
            self.area_omega,
            self.length_gamma,
        ];
        vals.iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub fn diagnostics_record(
    state: &State,
    eq: &Equilibrium,
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
    params: &ModelParams,
    floor_eps: f64,
) -> Result<DiagnosticsRecord, DiagnosticsError> {
    check_finite(state)?;
    let ops = assemble_operators(geom, mesh, state.t)?;
    let (bulk, surf) = (&ops.bulk_measure, &ops.surface_measure);
    let u = weighted_sum(bulk, &state.u);
    let w = weighted_sum(surf, &state.w);
    let z = weighted_sum(surf, &state.z);
    let range = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    };
    let (ru, rw, rz) = (range(&state.u), range(&state.w), range(&state.z));
    Ok(DiagnosticsRecord {
        t: state.t,
        m1: u + z,
        m2: w + z,
        entropy: entropy_with(state, eq, bulk, surf),
        dissipation: dissipation_with(&ops, state, params, floor_eps),
        min: [ru.0, rw.0, rz.0],
        max: [ru.1, rw.1, rz.1],
        l1: l1_distances(state, eq, geom, mesh),
        area_omega: bulk.iter().sum(),
        length_gamma: surf.iter().sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub mu: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Least-squares fit of `log E = c - mu t` over samples with `t` in `window`.
pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit, DiagnosticsError> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .collect();
    if pts.len() < 5 {
        return Err(DiagnosticsError::InsufficientData { got: pts.len() });
    }
    if let Some(&(t, value)) = pts.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(DiagnosticsError::NonpositiveEntropy { t, value });
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(t, e) in &pts {
        let (dx, dy) = (t - tm, e.ln() - ym);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        mu: -slope,
        r_squared,
        window: (pts[0].0, pts[pts.len() - 1].0),
        n_points: pts.len(),
    })
}

/// Decay fit over the samples whose entropy lies in `[e_lo, e_hi]`.
pub fn fit_decay_rate_in_band(
    series: &[(f64, f64)],
    e_lo: f64,
    e_hi: f64,
) -> Result<DecayFit, DiagnosticsError> {
    let band: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(_, e)| *e >= e_lo && *e <= e_hi)
        .collect();
    match (band.first(), band.last()) {
        (Some(a), Some(b)) => fit_decay_rate(&band, (a.0, b.0)),
        _ => Err(DiagnosticsError::InsufficientData { got: 0 }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    /// Time at which the domain is evaluated.
    pub t: f64,
    /// Cell values are drawn as `s_inf * exp(x)` with `x` uniform in
    /// `[-log_spread, log_spread]` before smoothing and projection.
    pub log_spread: f64,
    pub floor_eps: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            t: 0.0,
            log_spread: 1.0,
            floor_eps: DEFAULT_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    pub index: u64,
    pub entropy: f64,
    pub dissipation: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub lambda_probe: f64,
    pub worst: ProbeSample,
    pub n_used: usize,
    pub n_skipped: usize,
}

/// One explicit diffusion sweep `x - tau M^-1 K x` with `tau` small enough
/// to be a convex average, so positivity is kept.
fn smooth(x: &mut [f64], measure: &[f64], diag: &[f64], apply: impl Fn(&[f64], &mut [f64])) {
    let tau = 0.5
        * measure
            .iter()
            .zip(diag)
            .map(|(m, d)| m / d)
            .fold(f64::INFINITY, f64::min);
    let mut kx = vec![0.0; x.len()];
    apply(x, &mut kx);
    for i in 0..x.len() {
        x[i] -= tau * kx[i] / measure[i];
    }
}

/// Positive `alpha`, `beta` with `alpha Iu + alpha beta Iz = m1` and
/// `beta Iw + alpha beta Iz = m2`.
fn projection_factors(iu: f64, iw: f64, iz: f64, m1: f64, m2: f64) -> (f64, f64) {
    // iu iz a^2 + (iu iw + iz (m2 - m1)) a - m1 iw = 0, roots of opposite sign
    let a = iu * iz;
    let b = iu * iw + iz * (m2 - m1);
    let c = m1 * iw;
    let disc = (b * b + 4.0 * a * c).sqrt();
    let alpha = if b >= 0.0 {
        2.0 * c / (b + disc)
    } else {
        (disc - b) / (2.0 * a)
    };
    (alpha, m2 / (iw + alpha * iz))
}

fn probe_sample(
    index: u64,
    seed: u64,
    eq: &Equilibrium,
    ops: &DiscreteOperators,
    params: &ModelParams,
    opts: &ProbeOptions,
) -> ProbeSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let s = opts.log_spread;
    let mut draw = |n: usize, base: f64| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let x: f64 = if s > 0.0 { rng.gen_range(-s..=s) } else { 0.0 };
                base * x.exp()
            })
            .collect()
    };
    let (nb, ns) = (ops.n_bulk(), ops.n_theta);
    let mut u = draw(nb, eq.u_inf);
    let mut w = draw(ns, eq.w_inf);
    let mut z = draw(ns, eq.z_inf);
    smooth(&mut u, &ops.bulk_measure, &ops.bulk_stiffness_diag(), |x, y| {
        ops.apply_bulk_stiffness(x, y)
    });
    let sdiag = ops.surface_stiffness_diag();
    for f in [&mut w, &mut z] {
        smooth(f, &ops.surface_measure, &sdiag, |x, y| ops.apply_surface_stiffness(x, y));
    }
    let iu = weighted_sum(&ops.bulk_measure, &u);
    let iw = weighted_sum(&ops.surface_measure, &w);
    let iz = weighted_sum(&ops.surface_measure, &z);
    let (m1, m2) = (eq.u_inf * eq.area + eq.z_inf * eq.length, (eq.w_inf + eq.z_inf) * eq.length);
    let (alpha, beta) = projection_factors(iu, iw, iz, m1, m2);
    u.iter_mut().for_each(|v| *v *= alpha);
    w.iter_mut().for_each(|v| *v *= beta);
    z.iter_mut().for_each(|v| *v *= alpha * beta);
    let state = State {
        t: ops.t,
        u,
        w,
        z,
    };
    let entropy = entropy_with(&state, eq, &ops.bulk_measure, &ops.surface_measure);
    let dissipation = dissipation_with(ops, &state, params, opts.floor_eps);
    ProbeSample {
        index,
        entropy,
        dissipation,
        ratio: dissipation / entropy,
    }
}

/// Sampled lower bound for `D~ / E` over conservative positive states.
///
/// Sample `i` uses the ChaCha8 stream `i` of `rng_seed`, so the result does
/// not depend on the number of worker threads.
pub fn probe_functional_inequality(
    eq: &Equilibrium,
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
    params: &ModelParams,
    n_samples: usize,
    rng_seed: u64,
    opts: &ProbeOptions,
) -> Result<ProbeResult, DiagnosticsError> {
    let ops = assemble_operators(geom, mesh, opts.t)?;
    let run = |i: u64| probe_sample(i, rng_seed, eq, &ops, params, opts);
    #[cfg(feature = "parallel")]
    let samples: Vec<ProbeSample> = {
        use rayon::prelude::*;
        (0..n_samples as u64).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let samples: Vec<ProbeSample> = (0..n_samples as u64).map(run).collect();

    let mut worst: Option<ProbeSample> = None;
    let mut n_used = 0;
    for s in &samples {
        if !(s.entropy >= 1e-12) {
            continue;
        }
        n_used += 1;
        if worst.is_none_or(|w| s.ratio < w.ratio) {
            worst = Some(*s);
        }
    }
    let worst = worst.ok_or(DiagnosticsError::DegenerateSampler)?;
    Ok(ProbeResult {
        lambda_probe: worst.ratio,
        worst,
        n_used,
        n_skipped: samples.len() - n_used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InequalityConstants {
    pub c_lsi_omega: Option<f64>,
    pub c_lsi_gamma: Option<f64>,
    /// Smallest nonzero eigenvalue of the trace quotient
    /// `int_Omega |grad f|^2 / int_Gamma |f - mean_Gamma f|^2`.
    pub c_trpw: f64,
    /// Smallest nonzero eigenvalue of `-Laplace_Gamma`.
    pub c_pw: f64,
    pub c_ckp: Option<f64>,
    pub lambda_probe: Option<f64>,
}

fn remove_weighted_mean(x: &mut [f64], weights: &[f64]) {
    let mean = weighted_sum(weights, x) / weights.iter().sum::<f64>();
    x.iter_mut().for_each(|v| *v -= mean);
}

/// Shifted inverse iteration for the smallest nonzero eigenvalue of
/// `S x = l M x` with `S` semidefinite, kernel the constants and
/// `M = diag(m)`. `solve` maps `y` to `x` with `(S + shift M) x = y`;
/// constants are deflated by `M`-orthogonal projection every sweep.
fn smallest_nonzero_eigenvalue(
    m: &[f64],
    shift: f64,
    solve: impl Fn(&[f64]) -> Result<Vec<f64>, DiagnosticsError>,
) -> Result<f64, DiagnosticsError> {
    let n = m.len();
    // deterministic start with components in every low mode
    let mut g: Vec<f64> = (0..n)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
            th.cos() + 0.3 * th.sin() + 0.1 * (2.0 * th).cos()
        })
        .collect();
    remove_weighted_mean(&mut g, m);
    let mut lambda = f64::NAN;
    for _ in 0..500 {
        let y: Vec<f64> = g.iter().zip(m).map(|(a, b)| a * b).collect();
        let mut x = solve(&y)?;
        remove_weighted_mean(&mut x, m);
        let mx: Vec<f64> = x.iter().zip(m).map(|(a, b)| a * b).collect();
        let num = linalg::dot(&mx, &g);
        let den = linalg::dot(&mx, &x);
        if !(den > 0.0) {
            return Err(DiagnosticsError::EigenFailure("degenerate iterate".into()));
        }
        let next = num / den - shift;
        let norm = den.sqrt();
        g = x.into_iter().map(|v| v / norm).collect();
        if (next - lambda).abs() <= 1e-12 * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Err(DiagnosticsError::EigenFailure(format!(
        "inverse iteration did not settle (last estimate {lambda})"
    )))
}

/// Surface Poincare constant and the bulk trace-Poincare constant at `t`.
pub fn estimate_poincare_constants(
    mesh: &ReferenceMesh,
    geom: &EvolvingGeometry,
    t: f64,
) -> Result<InequalityConstants, DiagnosticsError> {
    let ops = assemble_operators(geom, mesh, t)?;
    let eig = |e: linalg::LinearSolveError| DiagnosticsError::EigenFailure(e.to_string());
    let m = &ops.surface_measure;
    let length: f64 = m.iter().sum();
    let shift = 0.5 * (2.0 * std::f64::consts::PI / length).powi(2);

    let sdiag: Vec<f64> = ops
        .surface_stiffness_diag()
        .iter()
        .zip(m)
        .map(|(d, mk)| d + shift * mk)
        .collect();
    let c_pw = smallest_nonzero_eigenvalue(m, shift, |y| {
        let mut x = vec![0.0; y.len()];
        linalg::pcg(
            |a, b| {
                ops.apply_surface_stiffness(a, b);
                for k in 0..a.len() {
                    b[k] += shift * m[k] * a[k];
                }
            },
            &sdiag,
            y,
            &mut x,
            1e-11,
            50_000,
        )
        .map_err(eig)?;
        Ok(x)
    })?;

    // Schur complement onto the innermost ring via solves with the bulk
    // operator, shifted on that ring only
    let ns = m.len();
    let mut bdiag = ops.bulk_stiffness_diag();
    for k in 0..ns {
        bdiag[k] += shift * m[k];
    }
    let nb = ops.n_bulk();
    let c_trpw = smallest_nonzero_eigenvalue(m, shift, |y| {
        let mut rhs = vec![0.0; nb];
        rhs[..ns].copy_from_slice(y);
        let mut x = vec![0.0; nb];
        linalg::pcg(
            |a, b| {
                ops.apply_bulk_stiffness(a, b);
                for k in 0..ns {
                    b[k] += shift * m[k] * a[k];
                }
            },
            &bdiag,
            &rhs,
            &mut x,
            1e-11,
            50_000,
        )
        .map_err(eig)?;
        Ok(x[..ns].to_vec())
    })?;

    Ok(InequalityConstants {
        c_trpw,
        c_pw,
        ..InequalityConstants::default()
    })
}
