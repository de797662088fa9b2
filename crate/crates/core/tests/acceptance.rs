//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use bulksurf::diagnostics::{
    ckp_lower_bound, diagnostics_record, estimate_poincare_constants, fit_decay_rate_in_band,
    probe_functional_inequality, relative_entropy, ProbeOptions, DEFAULT_FLOOR,
};
use bulksurf::equilibrium::{
    conserved_masses, equilibrium_of_state, solve_equilibrium, Equilibrium, EquilibriumMode,
};
use bulksurf::geometry::{build_geometry, EvolvingGeometry, GeometryPreset};
use bulksurf::mesh::{build_mesh, ReferenceMesh};
use bulksurf::mms::{observed_order, refinement_study};
use bulksurf::model::{ModelParams, Nonlinearity};
use bulksurf::simulation::perturbed_equilibrium;
use bulksurf::solver::{Solver, SolverOptions, State};
use bulksurf::transport::{transport_identity_residual, TestField, TransportIdentity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

const R_IN: f64 = 1.0;
const R_OUT: f64 = 2.0;

fn presets() -> [(&'static str, GeometryPreset); 4] {
    [
        ("fixed", GeometryPreset::fixed(R_IN, R_OUT)),
        ("rotation", GeometryPreset::rotation(R_IN, R_OUT, 1.0, 0.5)),
        ("breathing", GeometryPreset::breathing(R_IN, R_OUT, 0.2, 1.0, 0.1)),
        ("surface_wind", GeometryPreset::surface_wind(R_IN, R_OUT, 0.5, 0.1)),
    ]
}

fn initial(
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
    params: &ModelParams,
    amplitude: f64,
    mode: u32,
) -> (State, Equilibrium) {
    let base = State::uniform(mesh, 1.0, 1.0, 1.0);
    let eq = equilibrium_of_state(&base, geom, mesh, params, EquilibriumMode::RateBalance).unwrap();
    let s = perturbed_equilibrium(mesh, &eq, amplitude, mode);
    let eq = equilibrium_of_state(&s, geom, mesh, params, EquilibriumMode::RateBalance).unwrap();
    (s, eq)
}

struct LongRun {
    name: &'static str,
    drift1: f64,
    drift2: f64,
    min_value: f64,
}

/// 2000 IMEX steps from perturbed-equilibrium data on a 64 x 128 mesh.
fn long_runs() -> Vec<LongRun> {
    let params = ModelParams {
        delta_k: 0.5,
        delta_k_prime: 2.0,
        ..ModelParams::default()
    };
    let spec = Nonlinearity::MassAction;
    std::thread::scope(|scope| {
        let handles: Vec<_> = presets()
            .into_iter()
            .map(|(name, preset)| {
                let spec = &spec;
                scope.spawn(move || {
                    let geom = build_geometry(preset).unwrap();
                    let mesh = build_mesh(64, 128, R_IN, R_OUT).unwrap();
                    let (mut s, _) = initial(&geom, &mesh, &params, 0.5, 2);
                    let solver = Solver::new(&geom, &mesh, params, spec);
                    let (m1, m2) = conserved_masses(&s, &geom, &mesh);
                    let (mut d1, mut d2, mut lo) = (0.0f64, 0.0f64, s.min_value());
                    for _ in 0..2000 {
                        s = solver.step_imex(&s, 0.005).unwrap().0;
                        let (a, b) = conserved_masses(&s, &geom, &mesh);
                        d1 = d1.max((a - m1).abs() / m1);
                        d2 = d2.max((b - m2).abs() / m2);
                        lo = lo.min(s.min_value());
                    }
                    LongRun {
                        name,
                        drift1: d1,
                        drift2: d2,
                        min_value: lo,
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

fn criterion_1(runs: &[LongRun]) -> Outcome {
    let worst = runs
        .iter()
        .map(|r| r.drift1.max(r.drift2))
        .fold(0.0, f64::max);
    let detail = runs
        .iter()
        .map(|r| format!("{} {:.1e}/{:.1e}", r.name, r.drift1, r.drift2))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(worst <= 1e-9, format!("max relative drift {worst:.2e} ({detail})"))
}

fn criterion_2(runs: &[LongRun]) -> Outcome {
    let lo = runs.iter().map(|r| r.min_value).fold(f64::INFINITY, f64::min);
    // comparison principle for the scalar surface equation
    let geom = build_geometry(GeometryPreset::breathing(R_IN, R_OUT, 0.3, 1.0, 0.0)).unwrap();
    let mesh = build_mesh(8, 128, R_IN, R_OUT).unwrap();
    let spec = Nonlinearity::MassAction;
    let solver = Solver::new(&geom, &mesh, ModelParams::default(), &spec);
    let mut w = mesh.surface_field(|th| -(1.0 + (3.0 * th).sin()) * 0.5);
    let mut hi = f64::NEG_INFINITY;
    for n in 0..2000 {
        let t = 0.005 * n as f64;
        w = solver
            .step_surface_scalar(&w, t, 0.005, 0.7, |th| -(th.cos() * (t + 1.0)).powi(2))
            .unwrap();
        hi = w.iter().fold(hi, |a, &b| a.max(b));
    }
    outcome(
        lo >= -1e-12 && hi <= 1e-12,
        format!("min over runs {lo:.3e}; max of nonpositive surface problem {hi:.3e}"),
    )
}

struct FixedRun {
    max_err: f64,
    modes_gap: f64,
    worst_increase: f64,
}

fn fixed_run() -> FixedRun {
    let params = ModelParams::default();
    let geom = build_geometry(GeometryPreset::fixed(R_IN, R_OUT)).unwrap();
    let mesh = build_mesh(64, 128, R_IN, R_OUT).unwrap();
    let spec = Nonlinearity::MassAction;
    let solver = Solver::new(&geom, &mesh, params, &spec);
    let (mut s, eq) = initial(&geom, &mesh, &params, 0.1, 2);
    let mut e_prev = relative_entropy(&s, &eq, &geom, &mesh).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for n in 1..=2000 {
        s = solver.step_imex(&s, 0.01).unwrap().0;
        if n % 10 == 0 {
            let e = relative_entropy(&s, &eq, &geom, &mesh).unwrap();
            worst = worst.max((e - e_prev) / (1.0 + e_prev));
            e_prev = e;
        }
    }
    let (m1, m2) = conserved_masses(&s, &geom, &mesh);
    let (area, length) = (3.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI);
    let rb = solve_equilibrium(m1, m2, area, length, &params, EquilibriumMode::RateBalance).unwrap();
    let pl = solve_equilibrium(m1, m2, area, length, &params, EquilibriumMode::PaperLiteral).unwrap();
    let dev = |v: &[f64], c: f64| v.iter().map(|x| (x - c).abs()).fold(0.0, f64::max);
    FixedRun {
        max_err: dev(&s.u, rb.u_inf).max(dev(&s.w, rb.w_inf)).max(dev(&s.z, rb.z_inf)),
        modes_gap: (rb.u_inf - pl.u_inf)
            .abs()
            .max((rb.w_inf - pl.w_inf).abs())
            .max((rb.z_inf - pl.z_inf).abs()),
        worst_increase: worst,
    }
}

fn criterion_3(r: &FixedRun) -> Outcome {
    outcome(
        r.max_err <= 1e-5 && r.modes_gap <= 1e-12,
        format!("max-norm distance at T=20 {:.2e}; mode gap {:.1e}", r.max_err, r.modes_gap),
    )
}

fn criterion_4(r: &FixedRun) -> Outcome {
    outcome(
        r.worst_increase <= 1e-8,
        format!("largest relative entropy increase between outputs {:.2e}", r.worst_increase),
    )
}

fn criterion_5() -> Outcome {
    let params = ModelParams::default();
    let spec = Nonlinearity::MassAction;
    let cases = [
        ("rotation", GeometryPreset::rotation(R_IN, R_OUT, 1.0, 0.5)),
        ("surface_wind", GeometryPreset::surface_wind(R_IN, R_OUT, 0.5, 0.5)),
    ];
    let results: Vec<(String, bool)> = std::thread::scope(|scope| {
        let handles: Vec<_> = cases
            .into_iter()
            .map(|(name, preset)| {
                let spec = &spec;
                let params = &params;
                scope.spawn(move || {
                    let geom = build_geometry(preset).unwrap();
                    let mesh = build_mesh(64, 128, R_IN, R_OUT).unwrap();
                    let solver = Solver::new(&geom, &mesh, *params, spec);
                    let (mut s, eq) = initial(&geom, &mesh, params, 0.5, 1);
                    let mut series = vec![(0.0, relative_entropy(&s, &eq, &geom, &mesh).unwrap())];
                    for n in 1..=2000 {
                        s = solver.step_imex(&s, 0.01).unwrap().0;
                        if n % 10 == 0 {
                            series.push((s.t, relative_entropy(&s, &eq, &geom, &mesh).unwrap()));
                        }
                    }
                    let rec = diagnostics_record(&s, &eq, &geom, &mesh, params, DEFAULT_FLOOR).unwrap();
                    let l1 = rec.l1.iter().fold(0.0f64, |a, &b| a.max(b));
                    match fit_decay_rate_in_band(&series, 1e-8, 1e-2) {
                        Ok(fit) => (
                            format!(
                                "{name}: mu {:.3} r2 {:.4} on [{:.1}, {:.1}], L1 {:.1e}",
                                fit.mu, fit.r_squared, fit.window.0, fit.window.1, l1
                            ),
                            fit.mu > 0.0 && fit.r_squared >= 0.99 && l1 <= 1e-3,
                        ),
                        Err(e) => (format!("{name}: fit failed ({e})"), false),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    outcome(
        results.iter().all(|r| r.1),
        results.iter().map(|r| r.0.clone()).collect::<Vec<_>>().join("; "),
    )
}

fn default_setup() -> (EvolvingGeometry, ReferenceMesh, Equilibrium, ModelParams) {
    let params = ModelParams::default();
    let geom = build_geometry(GeometryPreset::fixed(R_IN, R_OUT)).unwrap();
    let mesh = build_mesh(32, 64, R_IN, R_OUT).unwrap();
    let (_, eq) = initial(&geom, &mesh, &params, 0.0, 1);
    (geom, mesh, eq, params)
}

fn criterion_6() -> Outcome {
    let (geom, mesh, eq, params) = default_setup();
    let opts = ProbeOptions::default();
    let a = probe_functional_inequality(&eq, &geom, &mesh, &params, 10_000, 1, &opts).unwrap();
    let b = probe_functional_inequality(&eq, &geom, &mesh, &params, 10_000, 2, &opts).unwrap();
    let rel = (a.lambda_probe - b.lambda_probe).abs() / a.lambda_probe.max(b.lambda_probe);
    outcome(
        a.lambda_probe > 0.0 && b.lambda_probe > 0.0 && rel <= 0.25,
        format!(
            "lambda_probe {:.4} (seed 1), {:.4} (seed 2), relative gap {:.1}%",
            a.lambda_probe,
            b.lambda_probe,
            100.0 * rel
        ),
    )
}

/// Random positive state with the masses of `eq`, drawn cell-wise
/// log-uniform and rescaled multiplicatively onto both conservation laws.
fn random_conservative_state(
    rng: &mut ChaCha8Rng,
    eq: &Equilibrium,
    geom: &EvolvingGeometry,
    mesh: &ReferenceMesh,
) -> State {
    let spread: f64 = rng.gen_range(0.01..3.0);
    let mut draw = |n: usize, c: f64| -> Vec<f64> {
        (0..n).map(|_| c * rng.gen_range(-spread..spread).exp()).collect()
    };
    let mut s = State {
        t: 0.0,
        u: draw(mesh.n_bulk(), eq.u_inf),
        w: draw(mesh.n_surface(), eq.w_inf),
        z: draw(mesh.n_surface(), eq.z_inf),
    };
    let bulk = mesh.bulk_measures(geom, 0.0);
    let surf = mesh.surface_measures(geom, 0.0);
    let int = |m: &[f64], v: &[f64]| m.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let (iu, iw, iz) = (int(&bulk, &s.u), int(&surf, &s.w), int(&surf, &s.z));
    // alpha, beta with alpha iu + alpha beta iz = m1, beta iw + alpha beta iz = m2, by bisection
    let beta_of = |a: f64| eq.m2 / (iw + a * iz);
    let g = |a: f64| a * iu + a * beta_of(a) * iz - eq.m1;
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    let a = 0.5 * (lo + hi);
    let b = beta_of(a);
    s.u.iter_mut().for_each(|v| *v *= a);
    s.w.iter_mut().for_each(|v| *v *= b);
    s.z.iter_mut().for_each(|v| *v *= a * b);
    s
}

fn criterion_7() -> Outcome {
    let (geom, mesh, eq, _) = default_setup();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0;
    let mut min_ratio = f64::INFINITY;
    for _ in 0..1000 {
        let s = random_conservative_state(&mut rng, &eq, &geom, &mesh);
        let b = ckp_lower_bound(&s, &eq, &geom, &mesh).unwrap();
        if !b.holds(1e-10) {
            violations += 1;
        }
        if b.rhs > 0.0 {
            min_ratio = min_ratio.min(b.lhs / b.rhs);
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in 1000 states; smallest lhs/rhs {min_ratio:.3}"),
    )
}

fn criterion_8() -> Outcome {
    let c1 = {
        let g = build_geometry(GeometryPreset::fixed(1.0, 2.0)).unwrap();
        estimate_poincare_constants(&build_mesh(4, 256, 1.0, 2.0).unwrap(), &g, 0.0).unwrap().c_pw
    };
    let c2 = {
        let g = build_geometry(GeometryPreset::fixed(2.0, 3.0)).unwrap();
        estimate_poincare_constants(&build_mesh(4, 256, 2.0, 3.0).unwrap(), &g, 0.0).unwrap().c_pw
    };
    outcome(
        (c1 - 1.0).abs() <= 0.01 && (c2 / 0.25 - 1.0).abs() <= 0.01,
        format!("c_pw unit circle {c1:.6}, radius 2 {c2:.6}"),
    )
}

/// Classical RK4 on the homogeneous reduction
/// `|Omega| u' = -|Gamma| r`, `w' = -r`, `z' = r`.
fn homogeneous_oracle(x0: [f64; 3], t_end: f64, area: f64, length: f64) -> [f64; 3] {
    let rhs = |x: [f64; 3]| {
        let r = x[0] * x[1] - x[2];
        [-length * r / area, -r, r]
    };
    let n = 20_000;
    let h = t_end / n as f64;
    let mut x = x0;
    for _ in 0..n {
        let k1 = rhs(x);
        let k2 = rhs([0, 1, 2].map(|i| x[i] + 0.5 * h * k1[i]));
        let k3 = rhs([0, 1, 2].map(|i| x[i] + 0.5 * h * k2[i]));
        let k4 = rhs([0, 1, 2].map(|i| x[i] + h * k3[i]));
        x = [0, 1, 2].map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    x
}

fn criterion_9() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, preset) in [
        ("fixed", GeometryPreset::fixed(R_IN, R_OUT)),
        ("rotation", GeometryPreset::rotation(R_IN, R_OUT, 1.0, 0.5)),
    ] {
        let errs = refinement_study("sinusoidal", &preset, 8, 16, 3, 0.02, 0.5).unwrap();
        let h: Vec<f64> = errs.iter().map(|e| e.h).collect();
        let ob = observed_order(&h, &errs.iter().map(|e| e.bulk_l2).collect::<Vec<_>>());
        let os = observed_order(&h, &errs.iter().map(|e| e.surface_l2).collect::<Vec<_>>());
        pass &= ob >= 1.8 && os >= 1.8;
        notes.push(format!("{name} spatial order bulk {ob:.2} surface {os:.2}"));
    }

    // temporal order: fast bulk diffusion makes the PDE follow the
    // spatially homogeneous reduction
    let params = ModelParams {
        delta_omega: 1e6,
        ..ModelParams::default()
    };
    let geom = build_geometry(GeometryPreset::fixed(R_IN, R_OUT)).unwrap();
    let mesh = build_mesh(4, 8, R_IN, R_OUT).unwrap();
    let spec = Nonlinearity::MassAction;
    // the stiff bulk solve cannot reach the default relative tolerance
    let solver = Solver::new(&geom, &mesh, params, &spec).with_options(SolverOptions {
        linear_tol: 1e-10,
        ..SolverOptions::default()
    });
    let (area, length) = (3.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI);
    let t_end = 1.0;
    let exact = homogeneous_oracle([2.0, 1.0, 0.0], t_end, area, length);
    let mut dts = Vec::new();
    let mut errs = Vec::new();
    for n in [20usize, 40, 80, 160] {
        let dt = t_end / n as f64;
        let mut s = State::uniform(&mesh, 2.0, 1.0, 0.0);
        for _ in 0..n {
            s = solver.step_imex(&s, dt).unwrap().0;
        }
        let mean_u = s.u.iter().zip(mesh.bulk_measures(&geom, s.t)).map(|(a, m)| a * m).sum::<f64>() / area;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let err = (mean_u - exact[0])
            .abs()
            .max((mean(&s.w) - exact[1]).abs())
            .max((mean(&s.z) - exact[2]).abs());
        dts.push(dt);
        errs.push(err);
    }
    let ot = observed_order(&dts, &errs);
    pass &= ot >= 0.9;
    notes.push(format!("temporal order {ot:.2} (errors {:.1e}..{:.1e})", errs[0], errs[3]));
    outcome(pass, notes.join("; "))
}

fn criterion_10() -> Outcome {
    let geom = build_geometry(GeometryPreset::breathing(R_IN, R_OUT, 0.3, 2.0, 0.1)).unwrap();
    let u = TestField::trig(2.0, 0.5, 2.0, 0.3, 0.4, 1.5);
    let v = TestField::trig(1.0, 0.3, 2.0, -0.2, 0.6, 0.8);
    let mut notes = Vec::new();
    let mut pass = true;
    for which in TransportIdentity::ALL {
        let mut h = Vec::new();
        let mut res = Vec::new();
        for n in [16usize, 32, 64, 128] {
            let mesh = build_mesh(n / 2, n, R_IN, R_OUT).unwrap();
            let dt = 0.4 / n as f64;
            res.push(transport_identity_residual(&geom, &mesh, 0.7, dt, &u, &v, which).unwrap());
            h.push(1.0 / n as f64);
        }
        let order = observed_order(&h, &res);
        pass &= order >= 0.9;
        notes.push(format!("{} order {order:.2} (final {:.1e})", which.name(), res[3]));
    }
    // constant fields reduce the surface identity to d|Gamma|/dt
    let one = TestField::constant(1.0);
    let mesh = build_mesh(32, 64, R_IN, R_OUT).unwrap();
    let r = transport_identity_residual(&geom, &mesh, 0.7, 1e-3, &one, &one, TransportIdentity::Surface).unwrap();
    notes.push(format!("length-rate residual {r:.1e}"));
    pass &= r <= 1e-5;
    outcome(pass, notes.join("; "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut all = true;
    let mut report = |id: usize, name: &str, o: Outcome| {
        all &= o.pass;
        println!(
            "criterion {id:2} {name:<28} {} | {} [{:.0?}]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed()
        );
    };
    let runs = long_runs();
    report(1, "conservation", criterion_1(&runs));
    report(2, "positivity/comparison", criterion_2(&runs));
    let fixed = fixed_run();
    report(3, "equilibrium", criterion_3(&fixed));
    report(4, "entropy monotonicity", criterion_4(&fixed));
    report(5, "exponential convergence", criterion_5());
    report(6, "functional inequality", criterion_6());
    report(7, "CKP bound", criterion_7());
    report(8, "Poincare constant", criterion_8());
    report(9, "discretization order", criterion_9());
    report(10, "transport identities", criterion_10());
    if all {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
