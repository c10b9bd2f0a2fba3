//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test --release -p laxscatter --test acceptance` (the
//! default `cargo test --workspace` profile is also optimized).

use laxscatter::conserved::{coercivity_middle_integral, coercivity_ratio};
use laxscatter::evolve::{evolve_qdnls, EvolutionConfig};
use laxscatter::field::{
    make_grid, plateau_window, pointwise_mul, standard_potential, GridSpec, PotentialKind,
    SampledField,
};
use laxscatter::fredholm::det_pipeline;
use laxscatter::greens::{
    fd_oracle, functional_derivative_logdet, functional_derivative_t, greens_jump_check,
    pair_with_direction, Functional, GreensEvaluator,
};
use laxscatter::jost::{solve_jost_march, solve_jost_set, solve_left_jost_volterra, Side};
use laxscatter::lax::{build_qdnls_spec, random_general_spec};
use laxscatter::report::{
    build_full_report, equality_suite, general_equality_suite, qdnls_suite, report_to_json,
    trace_suite,
};
use laxscatter::scattering::conservation_probe;
use num_complex::Complex64 as C64;
use std::time::Instant;

fn grid() -> GridSpec {
    make_grid(16.0, 1024).unwrap()
}

struct Criterion {
    number: usize,
    name: &'static str,
}

impl Criterion {
    fn report(&self, pass: bool, detail: &str) {
        let status = if pass { "PASS" } else { "FAIL" };
        println!("ACCEPTANCE {:2}: {status} - {} ({detail})", self.number, self.name);
        assert!(pass, "criterion {} failed: {detail}", self.number);
    }
}

#[test]
fn criterion_01_equality_theorem_qdnls() {
    let c = Criterion {
        number: 1,
        name: "qdNLS equality |log det2 + log T| < 1e-6, k in {2,4,8}, < 60 s",
    };
    let start = Instant::now();
    let entries = equality_suite(grid(), &[2.0, 4.0, 8.0]).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(entries.len() >= 30);
    let worst = entries
        .iter()
        .map(|e| e.deviation)
        .fold(0.0f64, f64::max);
    let all_small = entries.iter().all(|e| e.hs_norm < 0.5);
    c.report(
        worst < 1e-6 && elapsed < 60.0 && all_small,
        &format!(
            "{} runs, max deviation {worst:.3e}, runtime {elapsed:.1} s",
            entries.len()
        ),
    );
}

#[test]
fn criterion_02_equality_theorem_general() {
    let c = Criterion {
        number: 2,
        name: "general NxN equality on seeded 2x2 and 4x4 specs < 1e-6",
    };
    let entries = general_equality_suite(grid(), 20260810, 5, 2.0).unwrap();
    assert_eq!(entries.len(), 10);
    let worst = entries.iter().map(|e| e.deviation).fold(0.0f64, f64::max);
    c.report(
        worst < 1e-6,
        &format!("5 specs per dimension, max deviation {worst:.3e}"),
    );
}

#[test]
fn criterion_03_closed_form_traces() {
    let c = Criterion {
        number: 3,
        name: "trace_power vs closed-form traces (l = 2, 3, 4) < 1e-6 relative",
    };
    let entries = trace_suite(grid(), &[2.0, 4.0]).unwrap();
    let worst = entries
        .iter()
        .map(|e| e.t2_rel.max(e.t3_rel).max(e.t4_rel))
        .fold(0.0f64, f64::max);
    c.report(
        worst < 1e-6,
        &format!("{} suite entries, worst relative {worst:.3e}", entries.len()),
    );
}

#[test]
fn criterion_04_greens_jump_condition() {
    let c = Criterion {
        number: 4,
        name: "Green's function jump residual < 1e-7 at 16 interior points",
    };
    let g = grid();
    let mut worst = 0.0f64;
    let mut count = 0usize;

    let mut run = |spec: &laxscatter::lax::LaxSpec| {
        let jost = solve_jost_set(spec).unwrap();
        let ev = GreensEvaluator::new(&jost, spec).unwrap();
        let (lo, hi) = spec.support_window().unwrap();
        for i in 0..16 {
            let y = lo + (hi - lo) * i / 15;
            worst = worst.max(greens_jump_check(&ev, y));
            count += 1;
        }
    };

    let q = standard_potential(PotentialKind::Bump, C64::new(0.10, 0.04), 3.0, -0.5, g).unwrap();
    let r = standard_potential(PotentialKind::Bump, C64::new(0.08, 0.0), 2.5, 0.6, g).unwrap();
    run(&build_qdnls_spec(q, r, 2.0).unwrap());

    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    run(&random_general_spec(&mut rng, 4, g, 2.0).unwrap());

    c.report(
        worst < 1e-7 && count >= 32,
        &format!("{count} interior points, worst residual {worst:.3e}"),
    );
}

#[test]
fn criterion_05_functional_derivatives() {
    let c = Criterion {
        number: 5,
        name: "functional derivatives vs FD oracle < 1e-5 relative",
    };
    let g = grid();
    let q = standard_potential(PotentialKind::Bump, C64::new(0.10, 0.04), 3.0, -0.5, g).unwrap();
    let r = standard_potential(PotentialKind::Bump, C64::new(0.08, 0.0), 2.5, 0.6, g).unwrap();
    let spec = build_qdnls_spec(q, r, 2.0).unwrap();
    let directions = [
        standard_potential(PotentialKind::Bump, C64::new(1.0, 0.0), 1.5, 0.2, g).unwrap(),
        standard_potential(PotentialKind::Bump, C64::new(0.4, 0.8), 2.2, -0.9, g).unwrap(),
    ];
    let mut worst = 0.0f64;
    for component in 0..2 {
        let dt_field = functional_derivative_t(&spec, component).unwrap();
        let dd_field = functional_derivative_logdet(&spec, component).unwrap();
        for v in &directions {
            let fd_t = fd_oracle(Functional::LogTInv, &spec, v, component).unwrap();
            let fd_d = fd_oracle(Functional::LogDet2, &spec, v, component).unwrap();
            let pt = pair_with_direction(&dt_field, v).unwrap();
            let pd = pair_with_direction(&dd_field, v).unwrap();
            worst = worst.max((fd_t - pt).norm() / fd_t.norm());
            worst = worst.max((fd_d - pd).norm() / fd_d.norm());
        }
    }
    c.report(
        worst < 1e-5,
        &format!("2 components x 2 functionals x 2 directions, worst relative {worst:.3e}"),
    );
}

#[test]
fn criterion_06_transmission_conservation() {
    let c = Criterion {
        number: 6,
        name: "T^{-1}(k) drift < 1e-5 along the flow at dt = 1e-4, dt^4 convergence",
    };
    let g = grid();
    let window = plateau_window(g, 4.0, 6.5);
    let k = 2.0;

    // small-data run at dt = 1e-4 over t in [0, 1]
    let g0 = standard_potential(PotentialKind::Gaussian, C64::new(0.08, 0.03), 1.0, 0.0, g)
        .unwrap();
    let q0 = pointwise_mul(&g0, &window).unwrap();
    let mut cfg = EvolutionConfig::new(1e-4, 1.0).unwrap();
    cfg.snapshot_stride = 2500;
    let traj = evolve_qdnls(&q0, &cfg).unwrap();
    let probe = conservation_probe(&traj.snapshots, k).unwrap();

    // dt^4 convergence of the drift, on a larger-amplitude datum so the
    // drift sits far above the probe noise
    let g1 = standard_potential(PotentialKind::Gaussian, C64::new(0.45, 0.1), 1.0, 0.0, g)
        .unwrap();
    let q1 = pointwise_mul(&g1, &window).unwrap();
    let drift_at = |dt: f64| -> f64 {
        let mut cfg = EvolutionConfig::new(dt, 1.0).unwrap();
        cfg.snapshot_stride = (1.0 / dt) as usize;
        let traj = evolve_qdnls(&q1, &cfg).unwrap();
        conservation_probe(&traj.snapshots, k).unwrap().max_relative_drift
    };
    let d1 = drift_at(1.0 / 64.0);
    let d2 = drift_at(1.0 / 128.0);
    let d3 = drift_at(1.0 / 256.0);
    let r12 = d1 / d2;
    let r23 = d2 / d3;
    let order_ok = (8.0..40.0).contains(&r12) && (8.0..40.0).contains(&r23);
    c.report(
        probe.max_relative_drift < 1e-5 && order_ok,
        &format!(
            "drift {:.3e} at dt=1e-4; drift ratios under halving: {r12:.1}, {r23:.1}",
            probe.max_relative_drift
        ),
    );
}

#[test]
fn criterion_07_energy_coercivity() {
    let c = Criterion {
        number: 7,
        name: "energy coercivity bands and E_s drift < 1e-4",
    };
    let entries =
        laxscatter::report::energy_suite(grid(), &[-0.1, -0.25, -0.4], 2.0).unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for e in &entries {
        ok &= e.tail_deviation < 0.5;
        ok &= (0.1..10.0).contains(&e.norm_ratio);
        ok &= e.drift < 1e-4;
        detail.push_str(&format!(
            "s={}: tail {:.2}, ratio {:.2}, drift {:.1e}; ",
            e.s, e.tail_deviation, e.norm_ratio, e.drift
        ));
    }
    c.report(ok, detail.trim_end_matches("; "));
}

#[test]
fn criterion_08_dual_method_jost() {
    let c = Criterion {
        number: 8,
        name: "Volterra vs marching < 1e-8; contraction ~ k^{-1/2} within factor 3",
    };
    let g = grid();
    // dual-method agreement inside the smallness window
    let q = standard_potential(PotentialKind::Bump, C64::new(0.05, 0.0), 4.0, 0.0, g).unwrap();
    let spec = build_qdnls_spec(q.clone(), q, 4.0).unwrap();
    let volt = solve_left_jost_volterra(&spec).unwrap();
    let march = solve_jost_march(&spec, Side::Left, 0).unwrap();
    let sup = volt.sup_diff(&march);

    // contraction-factor scaling over k in {2, 4, 8, 16}
    let qc = standard_potential(PotentialKind::Bump, C64::new(0.035, 0.0), 4.0, 0.0, g).unwrap();
    let mut scaled = Vec::new();
    for k in [2.0, 4.0, 8.0, 16.0] {
        let spec = build_qdnls_spec(qc.clone(), qc.clone(), k).unwrap();
        let sol = solve_left_jost_volterra(&spec).unwrap();
        scaled.push(sol.contraction.unwrap() * k.sqrt());
    }
    let spread = scaled.iter().cloned().fold(0.0f64, f64::max)
        / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    c.report(
        sup < 1e-8 && spread < 3.0,
        &format!("sup difference {sup:.3e}, scaled-contraction spread {spread:.2}"),
    );
}

#[test]
fn criterion_09_coercivity_ratio() {
    let c = Criterion {
        number: 9,
        name: "coercive k-integral: closed-form spot check and bounded ratio",
    };
    let spot = coercivity_middle_integral(-0.25, 1.0, 0.0).unwrap();
    let mut ok = (spot - 2.0).abs() < 1e-8;
    let mut worst_lo = f64::INFINITY;
    let mut worst_hi = 0.0f64;
    for s in [-0.1, -0.25, -0.4] {
        for xi in [0.0, 0.5, 1.0, 5.0, 20.0, 100.0] {
            let r = coercivity_ratio(s, 1.0, xi).unwrap().ratio;
            worst_lo = worst_lo.min(r);
            worst_hi = worst_hi.max(r);
            ok &= (0.1..10.0).contains(&r);
        }
    }
    c.report(
        ok,
        &format!("spot value {spot:.12} (= 2), ratio range [{worst_lo:.2}, {worst_hi:.2}]"),
    );
}

#[test]
fn criterion_10_deterministic_reports() {
    let c = Criterion {
        number: 10,
        name: "full-report runs with a fixed seed are byte-identical",
    };
    let a = report_to_json(&build_full_report(42, 16.0, 1024).unwrap()).unwrap();
    let b = report_to_json(&build_full_report(42, 16.0, 1024).unwrap()).unwrap();
    c.report(
        a == b,
        &format!("two runs, {} bytes each, identical = {}", a.len(), a == b),
    );
}

#[test]
fn suite_members_satisfy_preconditions() {
    // not a numbered criterion: the suite itself must sit inside the gates
    for (name, q, r) in qdnls_suite(grid()) {
        let spec = build_qdnls_spec(q, r, 2.0).unwrap();
        let pipe = det_pipeline(&spec).unwrap();
        assert!(pipe.hs_norm() < 0.5, "{name} breaks the smallness gate");
        spec.require_compact_support(2.0)
            .unwrap_or_else(|_| panic!("{name} support touches the edge"));
    }
}
