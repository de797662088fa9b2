//! `bulksurf` command-line driver.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bulksurf::config::{parse_config_in, RunConfig};
use bulksurf::diagnostics::{
    ckp_constants, estimate_poincare_constants, fit_decay_rate_in_band, probe_functional_inequality,
    ProbeOptions, CSV_HEADER,
};
use bulksurf::equilibrium::{equilibrium_of_state, solve_equilibrium, EquilibriumMode};
use bulksurf::geometry::{build_geometry, GeometryKind, GeometryPreset};
use bulksurf::mesh::build_mesh;
use bulksurf::mms::{observed_order, refinement_study, MMS_CASES};
use bulksurf::model::{check_assumptions, ModelParams, Nonlinearity, SampleBox};
use bulksurf::simulation::{run_with, setup, RunEvent};
use bulksurf::transport::{transport_identity_residual, TestField, TransportIdentity};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bulksurf", version, about = "Bulk-surface reaction-diffusion on evolving annuli")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configuration and write diagnostics, snapshots and a report.
    Run {
        config: PathBuf,
        /// Overrides `output.directory`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Manufactured-solution refinement study.
    Mms {
        #[arg(long, default_value = "sinusoidal")]
        case: String,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// `fixed` or `rotation`.
        #[arg(long, default_value = "fixed")]
        geometry: String,
        #[arg(long, default_value_t = 8)]
        n_r: usize,
        #[arg(long, default_value_t = 16)]
        n_theta: usize,
        /// Time step on the coarsest level; divided by 4 per level.
        #[arg(long, default_value_t = 0.02)]
        dt: f64,
        #[arg(long, default_value_t = 0.5)]
        t_end: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Equilibrium for given masses and domain measures.
    Equilibrium {
        #[arg(long)]
        m1: f64,
        #[arg(long)]
        m2: f64,
        #[arg(long)]
        area: f64,
        #[arg(long)]
        length: f64,
        /// `paper` or `rate`.
        #[arg(long, default_value = "rate")]
        mode: String,
        #[arg(long, default_value_t = 1.0)]
        delta_k: f64,
        #[arg(long, default_value_t = 1.0)]
        delta_k_prime: f64,
    },
    /// Sampled lower bound of the dissipation-to-entropy ratio.
    Probe {
        /// Configuration providing geometry, mesh, masses and probe settings.
        config: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the structural assumptions of a nonlinearity on a sample box.
    CheckAssumptions {
        #[arg(long, default_value = "mass_action")]
        nonlinearity: String,
        #[arg(long, default_value_t = 10.0)]
        max_value: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Poincare-type constants of the configured mesh and the CKP constant.
    Eig {
        config: Option<PathBuf>,
        /// Evaluation times, comma separated; the spread over them is reported.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        t: Vec<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Residuals of the transport formulas under (dt, h) refinement.
    TransportCheck {
        /// `fixed`, `rotation`, `breathing` or `surface_wind`.
        #[arg(long, default_value = "breathing")]
        geometry: String,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = 0.7)]
        t: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io(p, e))?;
            parse_config_in(&text, p.parent()).map_err(|e| usage(format!("{}: {e}", p.display())))
        }
    }
}

fn preset_named(kind: &str) -> Result<GeometryPreset, CliError> {
    Ok(match GeometryKind::parse(kind) {
        Some(GeometryKind::Fixed) => GeometryPreset::fixed(1.0, 2.0),
        Some(GeometryKind::Rotation) => GeometryPreset::rotation(1.0, 2.0, 1.0, 0.5),
        Some(GeometryKind::Breathing) => GeometryPreset::breathing(1.0, 2.0, 0.3, 2.0, 0.1),
        Some(GeometryKind::SurfaceWind) => GeometryPreset::surface_wind(1.0, 2.0, 0.5, 0.5),
        None => return Err(usage(format!("unknown geometry '{kind}'"))),
    })
}

fn write_report(dir: Option<&Path>, text: &str) -> Result<(), CliError> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let path = dir.join("report.txt");
        fs::write(&path, text).map_err(|e| io(&path, e))?;
    }
    Ok(())
}

fn cmd_run(config_path: &Path, output: Option<PathBuf>) -> Result<String, CliError> {
    let mut config = load_config(Some(config_path))?;
    if let Some(dir) = output {
        config.output_dir = dir;
    }
    // input errors are reported before any file is touched
    let (_, mesh, _) = setup(&config).map_err(usage)?;
    let dir = config.output_dir.clone();
    let prefix = config.output_prefix.clone();
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
    if config.snapshots {
        fs::create_dir_all(&snap_dir).map_err(|e| io(&snap_dir, e))?;
    }
    let csv_path = dir.join(format!("{prefix}diagnostics.csv"));
    let mut csv = BufWriter::new(File::create(&csv_path).map_err(|e| io(&csv_path, e))?);
    writeln!(csv, "{CSV_HEADER}").map_err(|e| io(&csv_path, e))?;
    let result = run_with(&config, &mut |event| match event {
        RunEvent::Record(rec) => {
            writeln!(csv, "{}", rec.csv_row())?;
            csv.flush()
        }
        RunEvent::Snapshot(snap) => {
            for field in ["u", "w", "z"] {
                let path = snap_dir.join(format!("{prefix}{field}_{}.txt", snap.step));
                fs::write(path, snap.field_text(field, &mesh))?;
            }
            Ok(())
        }
    });
    csv.flush().map_err(|e| io(&csv_path, e))?;
    let out = result.map_err(numerical)?;

    let first = &out.records[0];
    let last = out.records.last().expect("at least the initial record");
    let eq = &out.equilibrium;
    let series: Vec<(f64, f64)> = out.records.iter().map(|r| (r.t, r.entropy)).collect();
    let mut report = String::new();
    let _ = writeln!(report, "config: {}", config_path.display());
    let _ = writeln!(
        report,
        "geometry: {}  mesh: {} x {}  stepper: {:?}  nonlinearity: {}",
        config.geometry.kind.name(),
        config.n_r,
        config.n_theta,
        config.stepper,
        config.nonlinearity.name()
    );
    let _ = writeln!(report, "steps: {}  t_end: {}", out.steps, last.t);
    let _ = writeln!(
        report,
        "equilibrium ({}): u={} w={} z={}",
        eq.mode.name(),
        eq.u_inf,
        eq.w_inf,
        eq.z_inf
    );
    let _ = writeln!(
        report,
        "mass drift: m1 {:.3e}  m2 {:.3e}",
        (last.m1 - first.m1).abs() / first.m1,
        (last.m2 - first.m2).abs() / first.m2
    );
    let _ = writeln!(report, "entropy: initial {:.6e}  final {:.6e}", first.entropy, last.entropy);
    let _ = writeln!(report, "minimum value (u, w, z): {:?}", last.min);
    match fit_decay_rate_in_band(&series, 1e-8, 1e-2) {
        Ok(fit) => {
            let _ = writeln!(
                report,
                "decay fit on [{}, {}]: mu {:.6} r2 {:.6} ({} points)",
                fit.window.0, fit.window.1, fit.mu, fit.r_squared, fit.n_points
            );
        }
        Err(e) => {
            let _ = writeln!(report, "decay fit: {e}");
        }
    }
    let report_path = dir.join(format!("{prefix}report.txt"));
    fs::write(&report_path, &report).map_err(|e| io(&report_path, e))?;

    Ok(format!(
        "run: {} steps to t={} records={} entropy {:.3e} -> {:.3e} output={}",
        out.steps,
        last.t,
        out.records.len(),
        first.entropy,
        last.entropy,
        dir.display()
    ))
}

#[allow(clippy::too_many_arguments)]
fn cmd_mms(
    case: &str,
    levels: usize,
    geometry: &str,
    n_r: usize,
    n_theta: usize,
    dt: f64,
    t_end: f64,
    output: Option<&Path>,
) -> Result<String, CliError> {
    if !MMS_CASES.contains(&case) {
        return Err(usage(format!("unknown case '{case}' (known: {})", MMS_CASES.join(", "))));
    }
    if levels < 2 {
        return Err(usage("--levels must be at least 2"));
    }
    let preset = preset_named(geometry)?;
    let errs = refinement_study(case, &preset, n_r, n_theta, levels, dt, t_end).map_err(numerical)?;
    let mut table = String::from("n_r,n_theta,h,bulk_l2,surface_l2\n");
    for e in &errs {
        let row = format!("{},{},{:.6e},{:.6e},{:.6e}", e.n_r, e.n_theta, e.h, e.bulk_l2, e.surface_l2);
        println!("{row}");
        table.push_str(&row);
        table.push('\n');
    }
    let h: Vec<f64> = errs.iter().map(|e| e.h).collect();
    let bulk: Vec<f64> = errs.iter().map(|e| e.bulk_l2).collect();
    let surf: Vec<f64> = errs.iter().map(|e| e.surface_l2).collect();
    let (ob, os) = (observed_order(&h, &bulk), observed_order(&h, &surf));
    let summary = format!("mms: case={case} geometry={geometry} levels={levels} order bulk={ob:.3} surface={os:.3}");
    table.push_str(&summary);
    table.push('\n');
    write_report(output, &table)?;
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn cmd_equilibrium(
    m1: f64,
    m2: f64,
    area: f64,
    length: f64,
    mode: &str,
    delta_k: f64,
    delta_k_prime: f64,
) -> Result<String, CliError> {
    let mode = EquilibriumMode::parse(mode).ok_or_else(|| usage(format!("unknown mode '{mode}'")))?;
    let params = ModelParams {
        delta_k,
        delta_k_prime,
        ..ModelParams::default()
    };
    params.validate().map_err(usage)?;
    let eq = solve_equilibrium(m1, m2, area, length, &params, mode).map_err(numerical)?;
    let [r1, r2, r3] = eq.residuals();
    Ok(format!(
        "u={} w={} z={} residuals={:.3e},{:.3e},{:.3e}",
        eq.u_inf, eq.w_inf, eq.z_inf, r1, r2, r3
    ))
}

fn cmd_probe(
    config: Option<&Path>,
    samples: Option<usize>,
    seed: Option<u64>,
    output: Option<&Path>,
) -> Result<String, CliError> {
    let config = load_config(config)?;
    let (geom, mesh, state) = setup(&config).map_err(usage)?;
    let eq = equilibrium_of_state(&state, &geom, &mesh, &config.params, config.equilibrium_mode).map_err(numerical)?;
    let n = samples.unwrap_or(config.probe_samples);
    let seed = seed.unwrap_or(config.probe_seed);
    let opts = ProbeOptions {
        floor_eps: config.floor_eps,
        ..ProbeOptions::default()
    };
    let res = probe_functional_inequality(&eq, &geom, &mesh, &config.params, n, seed, &opts).map_err(numerical)?;
    let summary = format!(
        "probe: lambda={:.6e} samples={} skipped={} seed={} worst_index={}",
        res.lambda_probe, res.n_used, res.n_skipped, seed, res.worst.index
    );
    write_report(
        output,
        &format!(
            "{summary}\nworst sample: entropy {:.6e} dissipation {:.6e}\n",
            res.worst.entropy, res.worst.dissipation
        ),
    )?;
    Ok(summary)
}

fn cmd_check_assumptions(
    name: &str,
    max_value: f64,
    samples: usize,
    seed: u64,
    tol: f64,
    output: Option<&Path>,
) -> Result<(String, bool), CliError> {
    let spec = Nonlinearity::parse(name).map_err(usage)?;
    if !(max_value > 0.0) || samples == 0 {
        return Err(usage("--max-value must be positive and --samples nonzero"));
    }
    let b = (0.0, max_value);
    let report = check_assumptions(&spec, &ModelParams::default(), SampleBox { u: b, w: b, z: b }, samples, seed, tol);
    let mut text = String::new();
    for e in &report.entries {
        let _ = writeln!(
            text,
            "{:<24} {} worst={:.3e}{}{}",
            e.name,
            if e.passed { "pass" } else { "FAIL" },
            e.worst_value,
            e.fitted_constant.map(|c| format!(" constant={c:.3e}")).unwrap_or_default(),
            e.witness.map(|w| format!(" at {w:?}")).unwrap_or_default()
        );
    }
    print!("{text}");
    write_report(output, &text)?;
    let failed = report.entries.iter().filter(|e| !e.passed).count();
    Ok((
        format!(
            "check-assumptions: {} {}/{} passed",
            spec.name(),
            report.entries.len() - failed,
            report.entries.len()
        ),
        failed == 0,
    ))
}

fn cmd_eig(config: Option<&Path>, times: &[f64], output: Option<&Path>) -> Result<String, CliError> {
    let config = load_config(config)?;
    let (geom, mesh, state) = setup(&config).map_err(usage)?;
    let eq = equilibrium_of_state(&state, &geom, &mesh, &config.params, config.equilibrium_mode).map_err(numerical)?;
    let ckp = ckp_constants(&eq);
    let mut text = String::from("t,c_pw,c_trpw\n");
    let (mut pw, mut trpw) = (Vec::new(), Vec::new());
    for &t in times {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(usage(format!("evaluation time must be nonnegative, got {t}")));
        }
        let c = estimate_poincare_constants(&mesh, &geom, t).map_err(numerical)?;
        let _ = writeln!(text, "{t},{:.8e},{:.8e}", c.c_pw, c.c_trpw);
        pw.push(c.c_pw);
        trpw.push(c.c_trpw);
    }
    let range = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if v.len() == 1 {
            format!("{lo:.8e}")
        } else {
            format!("{lo:.8e}..{hi:.8e}")
        }
    };
    if times.len() > 1 {
        print!("{text}");
    }
    let summary = format!(
        "eig: c_pw={} c_trpw={} c_ckp={:.8e} times={}",
        range(&pw),
        range(&trpw),
        ckp.c_ckp,
        times.len()
    );
    write_report(output, &format!("{text}{summary}\n"))?;
    Ok(summary)
}

fn cmd_transport_check(geometry: &str, levels: usize, t: f64, output: Option<&Path>) -> Result<String, CliError> {
    if levels < 2 {
        return Err(usage("--levels must be at least 2"));
    }
    let geom = build_geometry(preset_named(geometry)?).map_err(usage)?;
    let u = TestField::trig(2.0, 0.5, 2.0, 0.3, 0.4, 1.5);
    let v = TestField::trig(1.0, 0.3, 2.0, -0.2, 0.6, 0.8);
    let mut text = String::from("identity,n_theta,dt,residual\n");
    let mut orders = Vec::new();
    for which in TransportIdentity::ALL {
        let (mut h, mut res) = (Vec::new(), Vec::new());
        for l in 0..levels {
            let n = 16usize << l;
            let mesh = build_mesh(n / 2, n, 1.0, 2.0).map_err(usage)?;
            let dt = 0.4 / n as f64;
            let r = transport_identity_residual(&geom, &mesh, t, dt, &u, &v, which).map_err(numerical)?;
            let _ = writeln!(text, "{},{n},{dt:.6e},{r:.6e}", which.name());
            h.push(1.0 / n as f64);
            res.push(r);
        }
        orders.push(format!("{}={:.3}", which.name(), observed_order(&h, &res)));
    }
    print!("{text}");
    let summary = format!("transport-check: geometry={geometry} order {}", orders.join(" "));
    write_report(output, &format!("{text}{summary}\n"))?;
    Ok(summary)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("BULKSURF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| usage(format!("BULKSURF_THREADS must be a nonnegative integer, got '{v}'")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(usage)?;
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(String, bool), CliError> {
    configure_threads()?;
    let ok = |s: String| (s, true);
    match command {
        Command::Run { config, output } => cmd_run(&config, output).map(ok),
        Command::Mms {
            case,
            levels,
            geometry,
            n_r,
            n_theta,
            dt,
            t_end,
            output,
        } => cmd_mms(&case, levels, &geometry, n_r, n_theta, dt, t_end, output.as_deref()).map(ok),
        Command::Equilibrium {
            m1,
            m2,
            area,
            length,
            mode,
            delta_k,
            delta_k_prime,
        } => cmd_equilibrium(m1, m2, area, length, &mode, delta_k, delta_k_prime).map(ok),
        Command::Probe {
            config,
            samples,
            seed,
            output,
        } => cmd_probe(config.as_deref(), samples, seed, output.as_deref()).map(ok),
        Command::CheckAssumptions {
            nonlinearity,
            max_value,
            samples,
            seed,
            tol,
            output,
        } => cmd_check_assumptions(&nonlinearity, max_value, samples, seed, tol, output.as_deref()),
        Command::Eig { config, t, output } => cmd_eig(config.as_deref(), &t, output.as_deref()).map(ok),
        Command::TransportCheck {
            geometry,
            levels,
            t,
            output,
        } => cmd_transport_check(&geometry, levels, t, output.as_deref()).map(ok),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok((summary, true)) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Ok((summary, false)) => {
            println!("{summary}");
            ExitCode::from(2)
        }
        Err(e) => {
            let msg = match &e {
                CliError::Usage(m) => format!("usage error: {m}"),
                CliError::Numerical(m) => format!("numerical failure: {m}"),
            };
            eprintln!("bulksurf: {msg}");
            ExitCode::from(e.code())
        }
    }
}
