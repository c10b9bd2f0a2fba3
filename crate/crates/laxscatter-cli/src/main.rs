//! Batch front-end: read a config, run a pipeline, emit JSON reports and
//! plot-ready CSV artifacts.
//!
//! Exit codes: 0 success, 2 tolerance failure, 1 input error.

use clap::{Parser, Subcommand};
use laxscatter::conserved::{coercivity_middle_integral, coercivity_ratio};
use laxscatter::evolve::{evolve_qdnls, EvolutionConfig, TrajectoryRecord};
use laxscatter::field::{make_grid, GridSpec, SampledField};
use laxscatter::fredholm::{det_pipeline, logdet2_series, verify_equality};
use laxscatter::greens::{
    fd_oracle, functional_derivative_logdet, functional_derivative_t, greens_diagonal_jost,
    greens_diagonal_operator, greens_jump_check, pair_with_direction, Functional, GreensEvaluator,
};
use laxscatter::jost::{jost_asymptotics_check, solve_jost_set};
use laxscatter::lax::{build_qdnls_spec, LaxSpec, SpecFile};
use laxscatter::report::{
    build_full_report, energy_suite, equality_suite, general_equality_suite, norms_summary,
    qdnls_suite, report_to_json,
};
use laxscatter::scattering::transmission_both;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "laxscatter", about = "Jost solutions, transmission coefficients and renormalized Fredholm determinants for N x N Lax operators", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Grid points (power of two).
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Grid half-width L.
    #[arg(long, global = true)]
    grid_l: Option<f64>,
    /// Spectral parameters (repeatable).
    #[arg(long, global = true, num_args = 1.., value_delimiter = ',')]
    k: Option<Vec<f64>>,
    /// Sobolev regularities (repeatable).
    #[arg(long, global = true, num_args = 1.., value_delimiter = ',')]
    s: Option<Vec<f64>>,
    /// Acceptance tolerance for the command's primary check.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory for JSON/CSV artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized specs.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Lax spec JSON file (otherwise a built-in suite member is used).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Solve the Jost set and dump the solutions.
    Jost,
    /// Transmission coefficient by both routes over a k-sweep.
    Transmission,
    /// Renormalized determinant report per k.
    Det2,
    /// Equality of log det_2 and log T^{-1} over the suite.
    VerifyEquality,
    /// Green's function jump condition and diagonal construction.
    Greens,
    /// Functional derivatives against the finite-difference oracle.
    Gradcheck,
    /// Conserved energies and coercivity.
    Energy,
    /// qdNLS time evolution with invariant monitoring.
    Evolve,
    /// Modulation and Sobolev norm checks.
    Norms,
    /// Everything above in one deterministic JSON report.
    FullReport,
}

/// File-backed configuration; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    grid_n: Option<usize>,
    grid_l: Option<f64>,
    k: Option<Vec<f64>>,
    s: Option<Vec<f64>>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    spec: Option<PathBuf>,
}

#[derive(Debug)]
struct RunConfig {
    grid: GridSpec,
    ks: Vec<f64>,
    svals: Vec<f64>,
    tol: Option<f64>,
    out: PathBuf,
    seed: u64,
    spec_path: Option<PathBuf>,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, String> {
    let file: FileConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("config {}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let n = cli.grid_n.or(file.grid_n).unwrap_or(1024);
    let l = cli.grid_l.or(file.grid_l).unwrap_or(16.0);
    let grid = make_grid(l, n).map_err(|e| e.to_string())?;
    Ok(RunConfig {
        grid,
        ks: cli
            .k
            .clone()
            .or(file.k)
            .unwrap_or_else(|| vec![2.0, 4.0, 8.0]),
        svals: cli
            .s
            .clone()
            .or(file.s)
            .unwrap_or_else(|| vec![-0.1, -0.25, -0.4]),
        tol: cli.tol.or(file.tol),
        out: cli
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("out")),
        seed: cli.seed.or(file.seed).unwrap_or(42),
        spec_path: cli.spec.clone().or(file.spec),
    })
}

fn load_spec(cfg: &RunConfig, k: f64) -> Result<LaxSpec, String> {
    match &cfg.spec_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("spec {}: {e}", path.display()))?;
            let sf: SpecFile =
                serde_json::from_str(&text).map_err(|e| format!("spec {}: {e}", path.display()))?;
            let base = path.parent().unwrap_or(Path::new("."));
            sf.into_spec(cfg.grid, base).map_err(|e| e.to_string())
        }
        None => {
            let (_, q, r) = qdnls_suite(cfg.grid).swap_remove(1);
            build_qdnls_spec(q, r, k).map_err(|e| e.to_string())
        }
    }
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<(), String> {
    std::fs::create_dir_all(out).map_err(|e| e.to_string())?;
    let path = out.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    std::fs::write(&path, text).map_err(|e| e.to_string())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_text(out: &Path, name: &str, text: &str) -> Result<(), String> {
    std::fs::create_dir_all(out).map_err(|e| e.to_string())?;
    let path = out.join(name);
    std::fs::write(&path, text).map_err(|e| e.to_string())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, String> {
    let cfg = resolve_config(cli)?;
    match cli.command {
        Command::Jost => cmd_jost(&cfg),
        Command::Transmission => cmd_transmission(&cfg),
        Command::Det2 => cmd_det2(&cfg),
        Command::VerifyEquality => cmd_verify_equality(&cfg),
        Command::Greens => cmd_greens(&cfg),
        Command::Gradcheck => cmd_gradcheck(&cfg),
        Command::Energy => cmd_energy(&cfg),
        Command::Evolve => cmd_evolve(&cfg),
        Command::Norms => cmd_norms(&cfg),
        Command::FullReport => cmd_full_report(&cfg),
    }
}

fn dump_jost_csv(out: &Path, name: &str, grid: GridSpec, sol: &laxscatter::jost::JostSolution) -> Result<(), String> {
    let mut text = String::from("x");
    for c in 0..sol.dim {
        write!(text, ",re{0},im{0}", c + 1).unwrap();
    }
    text.push('\n');
    for node in 0..grid.n_points {
        write!(text, "{:.16e}", grid.x(node)).unwrap();
        for v in sol.at(node) {
            write!(text, ",{:.16e},{:.16e}", v.re, v.im).unwrap();
        }
        text.push('\n');
    }
    write_text(out, name, &text)
}

#[derive(Serialize)]
struct JostReport {
    schema: &'static str,
    k: f64,
    split_index: usize,
    volterra_cross_error: Option<f64>,
    edge_deviations: Vec<f64>,
    sup_bounds: Vec<f64>,
}

fn cmd_jost(cfg: &RunConfig) -> Result<bool, String> {
    let k = cfg.ks[0];
    let spec = load_spec(cfg, k)?;
    let set = solve_jost_set(&spec).map_err(|e| e.to_string())?;
    let mut edge = Vec::new();
    let mut sup = Vec::new();
    for (j, sol) in set.solutions.iter().enumerate() {
        let rep = jost_asymptotics_check(sol, &spec);
        edge.push(rep.edge_deviation);
        sup.push(rep.sup_bound);
        dump_jost_csv(&cfg.out, &format!("jost_{}.csv", j + 1), cfg.grid, sol)?;
    }
    let report = JostReport {
        schema: laxscatter::report::SCHEMA,
        k,
        split_index: set.split_index,
        volterra_cross_error: set.volterra_cross_error,
        edge_deviations: edge,
        sup_bounds: sup,
    };
    write_json(&cfg.out, "jost.json", &report)?;
    let tol = cfg.tol.unwrap_or(1e-8);
    Ok(report
        .volterra_cross_error
        .map(|e| e < tol)
        .unwrap_or(true)
        && report.edge_deviations.iter().all(|&d| d < 1e-8))
}

#[derive(Serialize)]
struct TransmissionRow {
    k: f64,
    t_inv: (f64, f64),
    method: String,
    x_span: f64,
}

fn cmd_transmission(cfg: &RunConfig) -> Result<bool, String> {
    let mut rows = Vec::new();
    let mut ok = true;
    let tol = cfg.tol.unwrap_or(1e-9);
    let mut csv = String::from("k,re_t_inv,im_t_inv,method,x_span\n");
    for &k in &cfg.ks {
        let spec = load_spec(cfg, k)?;
        let pair = transmission_both(&spec).map_err(|e| e.to_string())?;
        ok &= pair.agreement < tol;
        for (res, name) in [(&pair.wronskian, "wronskian"), (&pair.limit, "limit")] {
            writeln!(
                csv,
                "{:.16e},{:.16e},{:.16e},{},{:.16e}",
                k, res.t_inv.re, res.t_inv.im, name, res.x_independence_span
            )
            .unwrap();
            rows.push(TransmissionRow {
                k,
                t_inv: (res.t_inv.re, res.t_inv.im),
                method: name.to_string(),
                x_span: res.x_independence_span,
            });
        }
    }
    write_text(&cfg.out, "transmission.csv", &csv)?;
    write_json(&cfg.out, "transmission.json", &rows)?;
    Ok(ok)
}

#[derive(Serialize)]
struct ScatteringReport {
    schema: &'static str,
    k: f64,
    t_inv: (f64, f64),
    log_det2_series: (f64, f64),
    log_det2_matrix: (f64, f64),
    traces: Vec<(f64, f64)>,
    tail_bound: f64,
    hs_norm: f64,
    deviations: Vec<f64>,
}

fn cmd_det2(cfg: &RunConfig) -> Result<bool, String> {
    let tol = cfg.tol.unwrap_or(1e-6);
    let mut ok = true;
    let mut reports = Vec::new();
    for &k in &cfg.ks {
        let spec = load_spec(cfg, k)?;
        let rep = verify_equality(&spec).map_err(|e| e.to_string())?;
        let pair = transmission_both(&spec).map_err(|e| e.to_string())?;
        ok &= rep.deviation < tol;
        reports.push(ScatteringReport {
            schema: laxscatter::report::SCHEMA,
            k,
            t_inv: (pair.wronskian.t_inv.re, pair.wronskian.t_inv.im),
            log_det2_series: (rep.log_det2_series.re, rep.log_det2_series.im),
            log_det2_matrix: (rep.log_det2_matrix.re, rep.log_det2_matrix.im),
            traces: rep.traces.iter().map(|t| (t.re, t.im)).collect(),
            tail_bound: rep.series_tail_bound,
            hs_norm: rep.hs_norm,
            deviations: vec![rep.deviation, rep.series_vs_matrix],
        });
    }
    write_json(&cfg.out, "det2.json", &reports)?;
    Ok(ok)
}

fn cmd_verify_equality(cfg: &RunConfig) -> Result<bool, String> {
    let tol = cfg.tol.unwrap_or(1e-6);
    if cfg.spec_path.is_some() {
        let mut ok = true;
        let mut entries = Vec::new();
        for &k in &cfg.ks {
            let spec = load_spec(cfg, k)?;
            let spec = spec.with_k(k).map_err(|e| e.to_string())?;
            let rep = verify_equality(&spec).map_err(|e| e.to_string())?;
            ok &= rep.deviation < tol;
            entries.push((k, rep.deviation, rep.hs_norm));
        }
        write_json(&cfg.out, "verify_equality.json", &entries)?;
        return Ok(ok);
    }
    let entries = equality_suite(cfg.grid, &cfg.ks).map_err(|e| e.to_string())?;
    let general =
        general_equality_suite(cfg.grid, cfg.seed, 5, 2.0).map_err(|e| e.to_string())?;
    let ok = entries.iter().all(|e| e.deviation < tol)
        && general.iter().all(|e| e.deviation < tol);
    write_json(&cfg.out, "verify_equality.json", &(entries, general))?;
    Ok(ok)
}

#[derive(Serialize)]
struct GreensReport {
    jump_residuals: Vec<(f64, f64)>,
    dual_gtilde_max: f64,
    series_vs_solve: f64,
}

fn cmd_greens(cfg: &RunConfig) -> Result<bool, String> {
    let k = cfg.ks[0];
    let spec = load_spec(cfg, k)?;
    let jost = solve_jost_set(&spec).map_err(|e| e.to_string())?;
    let ev = GreensEvaluator::new(&jost, &spec).map_err(|e| e.to_string())?;
    let (lo, hi) = spec
        .support_window()
        .unwrap_or((cfg.grid.n_points / 3, 2 * cfg.grid.n_points / 3));
    let mut jumps = Vec::new();
    for i in 0..16 {
        let y = lo + (hi - lo) * i / 15;
        jumps.push((cfg.grid.x(y), greens_jump_check(&ev, y)));
    }
    let (gj, _) = greens_diagonal_jost(&spec).map_err(|e| e.to_string())?;
    let gop = greens_diagonal_operator(&spec).map_err(|e| e.to_string())?;
    let mut dual = 0.0f64;
    for node in gj.window.0..=gj.window.1 {
        for e in 0..spec.dim() * spec.dim() {
            dual = dual.max((gj.at(node)[e] - gop.at(node)[e]).norm());
        }
    }
    // g~ dump: x then dim^2 interleaved re/im entries
    let mut csv = String::from("x");
    for i in 0..spec.dim() {
        for j in 0..spec.dim() {
            write!(csv, ",re{0}{1},im{0}{1}", i + 1, j + 1).unwrap();
        }
    }
    csv.push('\n');
    for node in gop.window.0..=gop.window.1 {
        write!(csv, "{:.16e}", cfg.grid.x(node)).unwrap();
        for v in gop.at(node) {
            write!(csv, ",{:.16e},{:.16e}", v.re, v.im).unwrap();
        }
        csv.push('\n');
    }
    write_text(&cfg.out, "gtilde.csv", &csv)?;
    let report = GreensReport {
        jump_residuals: jumps,
        dual_gtilde_max: dual,
        series_vs_solve: gop.series_vs_solve,
    };
    write_json(&cfg.out, "greens.json", &report)?;
    let tol = cfg.tol.unwrap_or(1e-7);
    Ok(report.jump_residuals.iter().all(|&(_, r)| r < tol) && dual < tol)
}

#[derive(Serialize)]
struct GradcheckReport {
    component: usize,
    functional: String,
    fd_value: (f64, f64),
    pairing: (f64, f64),
    relative_error: f64,
}

fn cmd_gradcheck(cfg: &RunConfig) -> Result<bool, String> {
    let k = cfg.ks[0];
    let spec = load_spec(cfg, k)?;
    let v = laxscatter::field::standard_potential(
        laxscatter::field::PotentialKind::Bump,
        num_complex::Complex64::new(1.0, 0.0),
        1.5,
        0.2,
        cfg.grid,
    )
    .map_err(|e| e.to_string())?;
    let tol = cfg.tol.unwrap_or(1e-5);
    let mut ok = true;
    let mut rows = Vec::new();
    for component in 0..spec.potential.n_components {
        for (functional, name) in [
            (Functional::LogTInv, "log_t_inv"),
            (Functional::LogDet2, "log_det2"),
        ] {
            let field = match functional {
                Functional::LogTInv => functional_derivative_t(&spec, component),
                Functional::LogDet2 => functional_derivative_logdet(&spec, component),
            }
            .map_err(|e| e.to_string())?;
            let pairing = pair_with_direction(&field, &v).map_err(|e| e.to_string())?;
            let fd = fd_oracle(functional, &spec, &v, component).map_err(|e| e.to_string())?;
            let rel = (fd - pairing).norm() / fd.norm().max(1e-300);
            ok &= rel < tol;
            rows.push(GradcheckReport {
                component,
                functional: name.to_string(),
                fd_value: (fd.re, fd.im),
                pairing: (pairing.re, pairing.im),
                relative_error: rel,
            });
        }
    }
    write_json(&cfg.out, "gradcheck.json", &rows)?;
    Ok(ok)
}

#[derive(Serialize)]
struct EnergyReport {
    s: f64,
    k0: f64,
    es: f64,
    es2: f64,
    tail_fraction: f64,
    norm_ratio: f64,
    drift: f64,
    norm_ratio_series: Vec<f64>,
    coercivity_ratios: Vec<(f64, f64)>,
    coercivity_spot: f64,
}

fn cmd_energy(cfg: &RunConfig) -> Result<bool, String> {
    let k0 = 2.0;
    let entries = energy_suite(cfg.grid, &cfg.svals, k0).map_err(|e| e.to_string())?;
    let spot = coercivity_middle_integral(-0.25, 1.0, 0.0).map_err(|e| e.to_string())?;
    let mut ok = (spot - 2.0).abs() < cfg.tol.unwrap_or(1e-8);
    let mut reports = Vec::new();
    for e in &entries {
        let mut ratios = Vec::new();
        for &xi in &[0.0, 1.0, 10.0, 100.0] {
            let r = coercivity_ratio(e.s, 1.0, xi).map_err(|err| err.to_string())?;
            ratios.push((xi, r.ratio));
            ok &= (0.1..10.0).contains(&r.ratio);
        }
        ok &= e.tail_deviation < 0.5;
        ok &= (0.1..10.0).contains(&e.norm_ratio);
        ok &= e.drift < 1e-4;
        reports.push(EnergyReport {
            s: e.s,
            k0: e.k0,
            es: e.e_s,
            es2: e.e_s2,
            tail_fraction: e.tail_fraction,
            norm_ratio: e.norm_ratio,
            drift: e.drift,
            norm_ratio_series: e.norm_ratio_series.clone(),
            coercivity_ratios: ratios,
            coercivity_spot: spot,
        });
    }
    write_json(&cfg.out, "energy.json", &reports)?;
    Ok(ok)
}

#[derive(Serialize)]
struct EvolveManifest {
    times: Vec<f64>,
    mass: Vec<f64>,
    hamiltonian: Vec<f64>,
    cfl_satisfied: bool,
    mass_drift: f64,
    hamiltonian_drift: f64,
}

fn cmd_evolve(cfg: &RunConfig) -> Result<bool, String> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| e.to_string())?;
    let window = laxscatter::field::plateau_window(cfg.grid, 4.0, 6.5);
    let g0 = laxscatter::field::standard_potential(
        laxscatter::field::PotentialKind::Gaussian,
        num_complex::Complex64::new(0.08, 0.03),
        1.0,
        0.0,
        cfg.grid,
    )
    .map_err(|e| e.to_string())?;
    let q0 = laxscatter::field::pointwise_mul(&g0, &window).map_err(|e| e.to_string())?;
    let mut config = EvolutionConfig::new(1e-3, 1.0).map_err(|e| e.to_string())?;
    config.snapshot_stride = 125;
    let traj = evolve_qdnls(&q0, &config).map_err(|e| e.to_string())?;
    for (i, (t, f)) in traj.snapshots.iter().enumerate() {
        f.to_csv(&cfg.out.join(format!("snapshot_{i:03}_t{t:.3}.csv")))
            .map_err(|e| e.to_string())?;
    }
    let manifest = EvolveManifest {
        times: traj.snapshots.iter().map(|(t, _)| *t).collect(),
        mass: traj.mass_series.clone(),
        hamiltonian: traj.hamiltonian_series.clone(),
        cfl_satisfied: traj.cfl_satisfied,
        mass_drift: TrajectoryRecord::max_relative_drift(&traj.mass_series),
        hamiltonian_drift: TrajectoryRecord::max_relative_drift(&traj.hamiltonian_series),
    };
    write_json(&cfg.out, "trajectory.json", &manifest)?;
    let tol = cfg.tol.unwrap_or(1e-7);
    Ok(manifest.mass_drift < tol && manifest.hamiltonian_drift < 10.0 * tol)
}

fn cmd_norms(cfg: &RunConfig) -> Result<bool, String> {
    let summary = norms_summary(cfg.grid).map_err(|e| e.to_string())?;
    write_json(&cfg.out, "norms.json", &summary)?;
    Ok(summary.partition_residual < 1e-12
        && summary.m22_vs_l2 < 1e-10
        && summary.m2p_monotone
        && (summary.resolvent_exponent + 0.5).abs() < 0.25)
}

fn cmd_full_report(cfg: &RunConfig) -> Result<bool, String> {
    let report =
        build_full_report(cfg.seed, cfg.grid.half_width, cfg.grid.n_points).map_err(|e| e.to_string())?;
    let json = report_to_json(&report).map_err(|e| e.to_string())?;
    write_text(&cfg.out, "full_report.json", &json)?;
    let tol = cfg.tol.unwrap_or(1e-6);
    let ok = report.equality.iter().all(|e| e.deviation < tol)
        && report.general_equality.iter().all(|e| e.deviation < tol)
        && report.greens.jump_max_residual < 1e-7
        && report.conservation.t_inv_drift < 1e-5;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("tolerance check failed");
            ExitCode::from(2)
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
