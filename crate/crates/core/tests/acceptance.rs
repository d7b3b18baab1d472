//! Acceptance criteria. Run with `cargo test -p popdyn-core --test acceptance`;
//! prints one PASS/FAIL line per criterion and fails if any criterion fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use popdyn_core::config::{self, ScenarioConfig};
use popdyn_core::equilibrium::{nash_affine, nash_distance, nash_for_mechanism};
use popdyn_core::mechanism::{AnticipatoryPdm, MemorylessGame, PayoffMechanism};
use popdyn_core::passivity::{contractive_check, log_grid, ni_check, potential_check};
use popdyn_core::rules::RevisionProtocol;
use popdyn_core::sampling;
use popdyn_core::simplex::{self, best_response_selection, distance_to_best_response, DEFAULT_TIE_TOL};
use popdyn_core::{batch, simulate, EdimSpec, RunRecord};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

const TOLL_RULES: [&str; 3] = ["smith", "bnn", "hybrid1"];

fn toll_config(rule: &str, alpha: f64, step: f64) -> ScenarioConfig {
    let mut cfg = config::builtin(&format!("braess-toll-{rule}")).unwrap();
    cfg.dynamics.alpha = alpha;
    cfg.step = step;
    cfg.record_stride = (1.0 / step).round() as usize;
    cfg
}

fn toll_matrix(step: f64) -> Vec<(String, RunRecord)> {
    let configs: Vec<ScenarioConfig> = [0.0, 1.0]
        .iter()
        .flat_map(|&a| TOLL_RULES.iter().map(move |r| toll_config(r, a, step)))
        .collect();
    let scenarios: Vec<_> = configs.iter().map(|c| c.build().unwrap()).collect();
    let labels: Vec<String> = configs
        .iter()
        .map(|c| format!("{}/alpha={}", c.dynamics.rule_name(), c.dynamics.alpha))
        .collect();
    labels
        .into_iter()
        .zip(batch(&scenarios))
        .map(|(l, r)| (l, r.unwrap()))
        .collect()
}

trait RuleName {
    fn rule_name(&self) -> String;
}

impl RuleName for config::DynamicsConfig {
    fn rule_name(&self) -> String {
        match &self.rule {
            Some(config::RuleConfig::Named(n)) => n.clone(),
            _ => "custom".into(),
        }
    }
}

/// Closed form of the tolled equilibrium: by symmetry x1 = x3 = a, and
/// equating the outer and middle route costs with the toll x2 * b / mu gives
/// a = c / (2 + 2c) with c = 1 + b / mu.
fn toll_equilibrium(b: f64, mu: f64) -> [f64; 3] {
    let c = 1.0 + b / mu;
    let a = c / (2.0 + 2.0 * c);
    [a, 1.0 - 2.0 * a, a]
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let scn = config::builtin("braess-notoll-smith").unwrap().build().unwrap();
    let t = Instant::now();
    let r = simulate(&scn).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let dx = inf_dist(r.final_x(), &[0.25, 0.5, 0.25]);
    let dp = r.summary.final_p.iter().map(|p| (p + 8.5).abs()).fold(0.0, f64::max);
    outcome(
        dx < 1e-3 && dp < 1e-2 && secs < 5.0,
        format!("|x-x*|inf={dx:.2e} |p+8.5|inf={dp:.2e} runtime={secs:.2}s"),
    )
}

fn criteria_2_to_4(runs: &[(String, RunRecord)], secs: f64) -> [Outcome; 3] {
    let xs = toll_equilibrium(1.0, 0.01);
    let set = nash_for_mechanism(&PayoffMechanism::braess_toll(1.0, 0.01).unwrap()).unwrap();
    let agree = set.points.len() == 1 && simplex::euclidean(&set.points[0], &xs) < 1e-9;

    let mut c2 = agree && secs < 60.0;
    let mut c3 = true;
    let mut c4 = true;
    let (mut d2, mut d3, mut d4) = (Vec::new(), Vec::new(), Vec::new());
    for (label, r) in runs {
        let s = &r.summary;
        let d = simplex::euclidean(r.final_x(), &xs);
        c2 &= d < 0.02 && s.final_rho < 1e-4;
        d2.push(format!("{label}: d={d:.1e} rho={:.1e}", s.final_rho));

        let smooth = s.scenario.alpha == 0.0;
        let dne = s.final_d_ne.unwrap_or(f64::INFINITY);
        c3 &= s.final_d_br < 0.02 && (!smooth || dne < 0.02);
        d3.push(format!("{label}: d_br={:.1e} d_ne={dne:.1e}", s.final_d_br));

        let half = r.times.iter().position(|&t| t >= 750.0).unwrap();
        let growth = s.rho_integral - r.rho_integral[half];
        c4 &= growth < 1e-2;
        d4.push(format!("{label}: {growth:.1e}"));
    }
    d2.push(format!("x*=({:.6}, {:.6}, {:.6}) nash_affine agrees={agree} runtime={secs:.1}s", xs[0], xs[1], xs[2]));
    [
        outcome(c2, d2.join("; ")),
        outcome(c3, d3.join("; ")),
        outcome(c4, format!("rho_integral(1500)-rho_integral(750): {}", d4.join("; "))),
    ]
}

/// Random (x, p) pairs, a quarter with x supported on the argmax face and
/// a quarter with integer payoffs (exact ties, x not on the face).
fn criterion_5() -> Outcome {
    let specs: Vec<(String, EdimSpec)> = TOLL_RULES
        .iter()
        .flat_map(|r| {
            [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)].into_iter().map(move |(a, b)| {
                let spec = EdimSpec::new(a, b, RevisionProtocol::by_name(r)).unwrap();
                (format!("{r}({a},{b})"), spec)
            })
        })
        .collect();
    let mut rng = sampling::rng(2024);
    let samples = 100_000;
    let (mut id_bad, mut neg_bad, mut iff_bad) = (0usize, 0usize, 0usize);
    let mut max_id_err: f64 = 0.0;
    let mut first_bad = String::new();
    for k in 0..samples {
        let n = rng.random_range(2..=5);
        let (x, p) = match k % 4 {
            0 | 1 => (sampling::uniform_simplex(&mut rng, n), sampling::uniform_box(&mut rng, n, -10.0, 10.0)),
            2 => {
                let p: Vec<f64> = (0..n).map(|_| rng.random_range(-3..=3) as f64).collect();
                (sampling::uniform_simplex(&mut rng, n), p)
            }
            _ => {
                let p: Vec<f64> = (0..n).map(|_| rng.random_range(-3..=3) as f64).collect();
                let face = simplex::argmax_face(&p, DEFAULT_TIE_TOL);
                let w = sampling::uniform_simplex(&mut rng, face.len());
                let mut x = vec![0.0; n];
                for (wi, &i) in w.iter().zip(&face.indices) {
                    x[i] = *wi;
                }
                (x, p)
            }
        };
        // The selection is returned as the displacement x_hat - x.
        let step = best_response_selection(&x, &p, DEFAULT_TIE_TOL);
        let pmax = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lhs = simplex::dot(&p, &step);
        let err = (lhs - (pmax - simplex::dot(&p, &x))).abs();
        max_id_err = max_id_err.max(err);
        if err > 1e-12 {
            id_bad += 1;
        }
        let d = distance_to_best_response(&x, &p, DEFAULT_TIE_TOL);
        for (name, spec) in &specs {
            let rho = spec.correlation(&x, &p);
            if rho < 0.0 {
                neg_bad += 1;
            }
            if (rho < 1e-10) != (d < 1e-8) {
                iff_bad += 1;
                if first_bad.is_empty() {
                    first_bad = format!(" first: {name} x={x:?} p={p:?} rho={rho:e} d={d:e}");
                }
            }
        }
    }
    outcome(
        id_bad == 0 && neg_bad == 0 && iff_bad == 0,
        format!(
            "{samples} samples x {} specs: identity failures={id_bad} (max err {max_id_err:.1e}), rho<0: {neg_bad}, iff failures: {iff_bad}{first_bad}",
            specs.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let grid = log_grid(1e-3, 1e6, 400);
    let cases: [(f64, f64, Vec<f64>); 3] = [
        (-1.0, 1.0, vec![1.0, 1.0, 1.0]),
        (1.0, 2.0, vec![-1.0, -1.0, -1.0]),
        (-0.5, 0.5, vec![1.0, 2.0, 3.0]),
    ];
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut all_pass = true;
    for (k, lambda, diag) in &cases {
        let a = DMatrix::from_diagonal(&DVector::from_vec(diag.clone()));
        let pdm = AnticipatoryPdm::new(MemorylessGame::zero(3), *lambda, a, DVector::zeros(3), *k).unwrap();
        let report = ni_check(&pdm.perturbation(), &grid).unwrap();
        all_pass &= report.passed;
        for (w, eig) in report.omegas.iter().zip(&report.eigenvalues) {
            let scale = -2.0 * k * lambda * lambda * w / (w * w + lambda * lambda);
            let mut want: Vec<f64> = diag.iter().map(|e| scale * e).collect();
            want.sort_by(f64::total_cmp);
            for (a, b) in eig.iter().zip(&want) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst < 1e-8 && secs < 1.0 && all_pass,
        format!("max |numeric-analytic|={worst:.1e} over 3x400 frequencies, all NI={all_pass}, runtime={secs:.3}s"),
    )
}

fn criterion_7() -> Outcome {
    let games = [
        ("braess", MemorylessGame::braess()),
        ("toll_sensor", MemorylessGame::toll_sensor(3, 1, -1.0).unwrap()),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, g) in &games {
        let pot = potential_check(g, 1000, 7);
        let con = contractive_check(g, 10_000, 7);
        pass &= pot.passed && pot.max_asymmetry < 1e-6 && con.passed && con.max_value <= 1e-9 && con.pairs == 10_000;
        detail.push(format!(
            "{name}: asymmetry={:.1e} monotonicity max={:.1e}",
            pot.max_asymmetry, con.max_value
        ));
    }
    outcome(pass, detail.join("; "))
}

fn criterion_8() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    let no_toll = PayoffMechanism::braess_no_toll();
    let (a, b) = no_toll.stationary_affine();
    let set = nash_affine(&a, &b).unwrap();
    let unique = set.points.len() == 1 && set.faces.is_empty();
    let err = set.points.first().map_or(f64::INFINITY, |p| inf_dist(p, &[0.25, 0.5, 0.25]));
    pass &= unique && err < 1e-9;
    detail.push(format!("no-toll NE count={} err={err:.1e}", set.points.len()));

    for (name, mech) in [("no-toll", no_toll), ("toll", PayoffMechanism::braess_toll(1.0, 0.01).unwrap())] {
        let (a, b) = mech.stationary_affine();
        let set = nash_affine(&a, &b).unwrap();
        let res = 1000usize;
        let (mut hits, mut worst) = (0usize, 0.0f64);
        for i in 0..=res {
            for j in 0..=res - i {
                let x = [i as f64 / res as f64, j as f64 / res as f64, (res - i - j) as f64 / res as f64];
                let p = &a * DVector::from_column_slice(&x) + &b;
                let pmax = p.max();
                let rho: f64 = (0..3).map(|k| x[k] * (pmax - p[k])).sum();
                if rho < 1e-6 {
                    hits += 1;
                    worst = worst.max(nash_distance(&x, &set).unwrap());
                }
            }
        }
        pass &= worst <= 2e-3;
        detail.push(format!("{name} grid: {hits} points with rho<1e-6, max distance {worst:.1e}"));
    }
    outcome(pass, detail.join("; "))
}

fn criterion_9(base: &[(String, RunRecord)], fine: &[(String, RunRecord)]) -> Outcome {
    let mut worst_x: f64 = 0.0;
    let mut worst_min: f64 = 0.0;
    let mut detail = Vec::new();
    for ((label, a), (_, b)) in base.iter().zip(fine) {
        let dx = inf_dist(a.final_x(), b.final_x());
        let (sa, sb) = (&a.summary, &b.summary);
        let dm = [
            (sa.ccw_running_min - sb.ccw_running_min).abs(),
            (sa.edim_delta_running_min - sb.edim_delta_running_min).abs(),
            (sa.pdm_antipassive_running_min - sb.pdm_antipassive_running_min).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        worst_x = worst_x.max(dx);
        worst_min = worst_min.max(dm);
        detail.push(format!("{label}: dx={dx:.1e} dmin={dm:.1e}"));
    }
    outcome(
        worst_x < 1e-3 && worst_min < 1e-3,
        format!("h=5e-4 vs 1e-3: {}", detail.join("; ")),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut same = true;
    let mut names = Vec::new();
    for name in config::BUILTIN_NAMES {
        let mut cfg = config::builtin(name).unwrap();
        // Shortened horizons keep this quick; determinism does not depend on length.
        cfg.horizon = cfg.horizon.min(100.0);
        let scn = cfg.build().unwrap();
        let a = simulate(&scn).unwrap();
        let b = simulate(&scn).unwrap();
        a.write_to(&dir.path().join("a"), name).unwrap();
        b.write_to(&dir.path().join("b"), name).unwrap();
        for ext in ["csv", "json"] {
            let fa = std::fs::read(dir.path().join("a").join(format!("{name}.{ext}"))).unwrap();
            let fb = std::fs::read(dir.path().join("b").join(format!("{name}.{ext}"))).unwrap();
            same &= fa == fb && !fa.is_empty();
        }
        let parallel = batch(std::slice::from_ref(&scn)).pop().unwrap().unwrap();
        same &= parallel.to_csv() == a.to_csv() && parallel.summary_json() == a.summary_json();
        names.push(name);
    }
    outcome(same, format!("byte-identical CSV/JSON across repeats and batch for {}", names.join(", ")))
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "no-toll equilibrium", criterion_1()));

    let t = Instant::now();
    let runs = toll_matrix(1e-3);
    let secs = t.elapsed().as_secs_f64();
    let [c2, c3, c4] = criteria_2_to_4(&runs, secs);
    results.push((2, "toll experiment matrix", c2));
    results.push((3, "best-response and Nash distance", c3));
    results.push((4, "bounded correlation integral", c4));
    results.push((5, "correlation identities", criterion_5()));
    results.push((6, "NI analytic vs numeric", criterion_6()));
    results.push((7, "potential and contractive gates", criterion_7()));
    results.push((8, "support enumeration", criterion_8()));
    let fine = toll_matrix(5e-4);
    results.push((9, "discretization robustness", criterion_9(&runs, &fine)));
    results.push((10, "determinism", criterion_10()));

    let mut failed = 0;
    for (k, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {k:>2} [{tag}] {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
