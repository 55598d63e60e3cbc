//! Acceptance suite: one PASS/FAIL line per criterion, each checked at its
//! stated tolerance and runtime budget. Exits non-zero if any criterion fails.

use rand::seq::SliceRandom;
use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use walkforget::accountant::{
    calibrate_ddp_sigma, ddp_account, group_privacy, rdp_to_dp, DdpPrivacyInputs, RdpCurve,
};
use walkforget::capacity::{ddp_capacity, rrdu_capacity, CapacityInputs};
use walkforget::config::RunConfig;
use walkforget::eval::{alignment_bias_sweep, median, run_point, BiasRow, Method, Metrics};
use walkforget::linalg;
use walkforget::network::{first_observation_param, route_rrdu, sample_first_observation};
use walkforget::objective::{closed_form_optimum, global_grad, grad_local, ObjectiveKind};
use walkforget::optimizer::StepRule;
use walkforget::protocols::{
    run_finetune, run_net_sgd, run_rrdu, run_rrdu_with_sigma, rrdu_sigma, RrduKernel,
};
use walkforget::rng::{Rng, SeedTree};
use walkforget::tasks::build_task;
use walkforget::types::{ClientDataset, ClientId, Example, Graph, Mode, ModelState, Subset};

type Check = Result<Verdict, String>;

struct Verdict {
    pass: bool,
    detail: String,
    info: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, detail: String) -> Self {
        Verdict { pass, detail, info: Vec::new() }
    }

    fn with_info(mut self, line: String) -> Self {
        self.info.push(line);
        self
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn uniform_in_ball(rng: &mut Rng, d: usize, radius: f64) -> ModelState {
    let mut x = rng.gaussian_vec(d, 1.0);
    let r = radius * rng.unit().powf(1.0 / d as f64) / linalg::norm(&x);
    linalg::scale(r, &mut x);
    ModelState::new(x).unwrap()
}

fn mean_grad(obj: &walkforget::objective::Objective, theta: &[f64], examples: &[&Example]) -> Vec<f64> {
    let mut g = vec![0.0; theta.len()];
    for z in examples {
        linalg::axpy(1.0 / examples.len() as f64, &obj.grad(theta, z), &mut g);
    }
    g
}

fn c1_alignment_identity() -> Check {
    let mut rng = SeedTree::new(1).stream("acceptance/identity", 0);
    let mut worst = 0.0f64;
    for kind in [ObjectiveKind::Quadratic, ObjectiveKind::Logistic] {
        for _ in 0..100 {
            let n = 2 + rng.below(200);
            let m = 1 + rng.below(n - 1);
            let d = 1 + rng.below(20);
            let examples: Vec<Example> = (0..n)
                .map(|_| Example {
                    features: rng.gaussian_vec(d, 3.0),
                    label: if rng.bernoulli(0.5) { 1.0 } else { 0.0 },
                })
                .collect();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let data = ClientDataset::with_forget(examples, idx[..m].to_vec()).map_err(err)?;
            let obj = match kind {
                ObjectiveKind::Quadratic => walkforget::objective::Objective::quadratic(100.0, 10.0),
                ObjectiveKind::Logistic => walkforget::objective::Objective::regularized_logistic(100.0, 0.1, 10.0),
            };
            let theta = ModelState::new(rng.gaussian_vec(d, 2.0)).map_err(err)?;
            let full = grad_local(&obj, &data, &theta, Subset::Full).map_err(err)?;
            let forget: Vec<&Example> = idx[..m].iter().map(|&i| data.example(i)).collect();
            let kept: Vec<&Example> = idx[m..].iter().map(|&i| data.example(i)).collect();
            let g_f = mean_grad(&obj, theta.params(), &forget);
            let g_r = mean_grad(&obj, theta.params(), &kept);
            let (nf, mf) = (n as f64, m as f64);
            let resid: Vec<f64> = (0..d).map(|k| full[k] - (nf - mf) / nf * g_r[k] - mf / nf * g_f[k]).collect();
            worst = worst.max(linalg::max_abs(&resid));
        }
    }
    Ok(Verdict::new(worst <= 1e-10, format!("max residual {worst:.3e} <= 1e-10 over 200 pairs")))
}

fn c2_retraining_direction() -> Check {
    let n = 10;
    let cfg = RunConfig {
        task: ObjectiveKind::Quadratic,
        lipschitz: 4.0,
        radius: None,
        batch_size: None,
        mode: Mode::Exact,
        p: 1.0 / n as f64,
        sigma: Some(0.0),
        step: StepRule::Constant(0.1),
        seed: 2,
        ..Default::default()
    };
    let task = build_task(&cfg).map_err(err)?;
    let graph = Graph::complete(n).map_err(err)?;
    let seeds = SeedTree::new(cfg.seed).child("acceptance/mc");
    let mut worst = 0.0f64;
    for point in 0..5u64 {
        let theta = uniform_in_ball(&mut seeds.stream("theta", point), cfg.dim, 2.0);
        let kernel = RrduKernel::new(&cfg, &task, &theta, 0.0).map_err(err)?;
        let eta = kernel.schedule.eta(1);
        let mut rng = seeds.stream("route", point);
        let mut mean = vec![0.0; cfg.dim];
        let draws = 100_000;
        for _ in 0..draws {
            let v = route_rrdu(kernel.u, cfg.p, &graph, &mut rng).map_err(err)?;
            let next = kernel.hop(&theta, v, 1).map_err(err)?;
            linalg::axpy(1.0 / (eta * draws as f64), &linalg::sub(next.params(), theta.params()), &mut mean);
        }
        let target = global_grad(&task.objective, &task.datasets, &theta, true).map_err(err)?;
        linalg::axpy(1.0, &target, &mut mean);
        worst = worst.max(linalg::norm(&mean) / linalg::norm(&target));
    }
    Ok(Verdict::new(worst <= 0.01, format!("max relative error {worst:.4} <= 0.01 at 5 points, 1e5 draws")))
}

fn bias_line(label: &str, rows: &[BiasRow]) -> String {
    let cells: Vec<String> = rows.iter().map(|r| format!("m={}: {:.4}/{:.4}", r.m, r.max_bias, r.bound)).collect();
    format!("{label} (max bias / bound): {}", cells.join(", "))
}

fn c3_bias_envelope() -> Check {
    let ms = [1, 5, 20, 50, 100];
    let cfg = RunConfig::default();
    let task = build_task(&cfg).map_err(err)?;
    let rows = alignment_bias_sweep(&cfg, &task, &ms, 10).map_err(err)?;
    let pass = rows.iter().all(|r| r.max_bias <= r.bound);
    let quad_cfg = RunConfig { task: ObjectiveKind::Quadratic, lipschitz: 4.0, radius: Some(2.0), ..Default::default() };
    let quad_task = build_task(&quad_cfg).map_err(err)?;
    let quad = alignment_bias_sweep(&quad_cfg, &quad_task, &ms, 10).map_err(err)?;
    Ok(Verdict::new(pass, bias_line("logistic task, n_u=200, 10 points", &rows))
        .with_info(bias_line("quadratic task, n_u=200, 10 points", &quad)))
}

fn c4_ddp_goldens() -> Check {
    let sigma = calibrate_ddp_sigma(1.0, 1e-5, 1.0).map_err(err)?;
    let e_sigma = (sigma - (8.0 * 125_000f64.ln()).sqrt()).abs();
    let conv = rdp_to_dp(&RdpCurve::new(vec![(2.0, 0.5)]).map_err(err)?, 1e-5).map_err(err)?.epsilon;
    let group = group_privacy(0.1, 0.0, 4, 1e-5).map_err(err)?.epsilon;
    let pass = e_sigma <= 1e-9 && (conv - 12.0129).abs() <= 1e-4 && (group - 0.9597).abs() <= 1e-4;
    Ok(Verdict::new(
        pass,
        format!("sigma {sigma:.10} (err {e_sigma:.1e}), conversion {conv:.6}, group {group:.6}"),
    ))
}

fn c5_noise_scaling() -> Check {
    let sigmas: Vec<f64> = [1usize, 10, 100]
        .iter()
        .map(|&m| {
            let cfg = RunConfig { forget_size: m, ..Default::default() };
            rrdu_sigma(&cfg, cfg.lipschitz)
        })
        .collect::<walkforget::Result<_>>()
        .map_err(err)?;
    let same = sigmas.iter().all(|s| s.to_bits() == sigmas[0].to_bits());
    let ddp = |m: usize| {
        ddp_account(&DdpPrivacyInputs {
            epsilon: 1.0,
            delta: 1e-5,
            lipschitz: 1.0,
            rounds: 200,
            num_clients: 10,
            group_size: m,
            c_amp: 1.0,
        })
        .map(|r| r.sigma)
    };
    let ratio = ddp(2).map_err(err)? / ddp(1).map_err(err)?;
    Ok(Verdict::new(
        same && (ratio - 2.0).abs() <= 1e-9,
        format!("RR-DU sigma {:.6} for m in {{1,10,100}} (identical: {same}), DDP ratio m=2/m=1 = {ratio:.12}", sigmas[0]),
    ))
}

fn c6_geometric_mixing() -> Check {
    let (p, n) = (0.1, 10);
    let q = first_observation_param(p, n).map_err(err)?;
    let graph = Graph::complete(n).map_err(err)?;
    let mut rng = SeedTree::new(6).stream("acceptance/delay", 0);
    let trials = 100_000;
    let mut total = 0u64;
    for _ in 0..trials {
        total += sample_first_observation(ClientId(1), ClientId(2), p, &graph, &mut rng).map_err(err)?;
    }
    let mean = total as f64 / trials as f64;
    let rel = (mean * q - 1.0).abs();
    Ok(Verdict::new(rel <= 0.02, format!("mean delay {mean:.4} vs 1/q = {:.4} (relative {rel:.4} <= 0.02)", 1.0 / q)))
}

fn excess_risk_scan(base: &RunConfig) -> walkforget::Result<Vec<f64>> {
    [100usize, 400, 1600]
        .iter()
        .map(|&t_u| {
            let post = (0..5)
                .map(|seed| {
                    let rows = run_point(&RunConfig { seed, unlearn_rounds: t_u, ..base.clone() }, Method::Rrdu)?;
                    Ok(rows[1].metrics.excess_risk.unwrap_or(f64::NAN))
                })
                .collect::<walkforget::Result<Vec<f64>>>()?;
            Ok(median(&post))
        })
        .collect()
}

fn c7_convex_convergence() -> Check {
    let quad = |n: usize, seed: u64| RunConfig {
        task: ObjectiveKind::Quadratic,
        num_clients: 4,
        dim: 3,
        samples_per_client: n,
        forget_size: 4,
        test_size: 10,
        spread: 0.3,
        heterogeneity: 0.0,
        lipschitz: 4.0,
        radius: Some(2.0),
        batch_size: None,
        sigma: Some(0.0),
        step: StepRule::Constant(0.1),
        rounds: 500,
        seed,
        ..Default::default()
    };
    let dist = |cfg: &RunConfig| -> walkforget::Result<f64> {
        let task = build_task(cfg)?;
        let theta = run_net_sgd(cfg, &task, false)?.model;
        let star = closed_form_optimum(&task.objective, &task.datasets, false, &task.region)?;
        Ok(linalg::dist(theta.params(), star.params()))
    };
    let dists = (0..5).map(|s| dist(&quad(20_000, s))).collect::<walkforget::Result<Vec<_>>>().map_err(err)?;
    let worst = dists.iter().cloned().fold(0.0, f64::max);
    let small = (0..5).map(|s| dist(&quad(200, s))).collect::<walkforget::Result<Vec<_>>>().map_err(err)?;

    let scan_cfg = |trust: f64| RunConfig {
        task: ObjectiveKind::Quadratic,
        lipschitz: 4.0,
        radius: Some(2.0),
        step: StepRule::Decaying,
        mode: Mode::Exact,
        trust_radius: Some(trust),
        ..Default::default()
    };
    let risk = excess_risk_scan(&scan_cfg(0.5)).map_err(err)?;
    let monotone = risk.windows(2).all(|w| w[1] < w[0]);
    let wide = excess_risk_scan(&scan_cfg(2.0)).map_err(err)?;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(" > ");
    Ok(Verdict::new(
        worst <= 1e-3 && monotone,
        format!(
            "Net-SGD max |theta_500 - theta*| {worst:.2e} <= 1e-3 over 5 seeds; RR-DU excess risk (T_u=100,400,1600, trust radius 0.5) {}",
            fmt(&risk)
        ),
    )
    .with_info(format!(
        "Net-SGD with 200 examples per client: max distance {:.2e} (constant-step floor)",
        small.iter().cloned().fold(0.0, f64::max)
    ))
    .with_info(format!("excess risk scan with trust radius 2.0: {}", fmt(&wide))))
}

fn logistic_operating_point() -> RunConfig {
    RunConfig {
        spread: 3.0,
        forget_shift: 15.0,
        lipschitz: 2.0,
        radius: Some(20.0),
        mu: 0.05,
        step: StepRule::Constant(5.0),
        trust_radius: Some(7.0),
        ..Default::default()
    }
}

fn medians(runs: &[Metrics]) -> (f64, f64) {
    let clean: Vec<f64> = runs.iter().map(|m| m.clean_accuracy.unwrap_or(f64::NAN)).collect();
    let forget: Vec<f64> = runs.iter().map(|m| m.forget_accuracy.unwrap_or(f64::NAN)).collect();
    (median(&clean), median(&forget))
}

fn c8_unlearning_efficacy() -> Check {
    let base = logistic_operating_point();
    let (mut pre, mut post, mut cert, mut ddp) = (vec![], vec![], vec![], vec![]);
    for seed in 0..5 {
        let cfg = RunConfig { seed, ..base.clone() };
        let rows = run_point(&cfg, Method::Rrdu).map_err(err)?;
        pre.push(rows[0].metrics);
        post.push(rows[1].metrics);
        cert.push(rows[2].metrics);
        ddp.push(run_point(&cfg, Method::Ddp).map_err(err)?[1].metrics);
    }
    let (pre, post, cert, ddp) = (medians(&pre), medians(&post), medians(&cert), medians(&ddp));
    let pass = (post.1 - cert.1).abs() <= 0.05 && (post.0 - cert.0).abs() <= 0.03 && ddp.0 <= post.0;
    Ok(Verdict::new(
        pass,
        format!(
            "clean/forget medians: pre {:.3}/{:.3}, RR-DU {:.3}/{:.3}, certifier {:.3}/{:.3}, DDP clean {:.3}",
            pre.0, pre.1, post.0, post.1, cert.0, cert.1, ddp.0
        ),
    ))
}

fn c9_p_sweep() -> Check {
    let base = logistic_operating_point();
    let task = build_task(&base).map_err(err)?;
    let theta0 = run_net_sgd(&base, &task, false).map_err(err)?.model;
    let ft = run_finetune(&base, &task, &theta0, true).map_err(err)?;
    let p0 = run_rrdu_with_sigma(&RunConfig { p: 0.0, ..base.clone() }, &task, &theta0, &theta0, 0.0, true).map_err(err)?;
    let identical = ft == p0;

    let sweep = |cfg: &RunConfig| -> walkforget::Result<(f64, f64)> {
        let mut runs = Vec::new();
        for seed in 0..5 {
            let cfg = RunConfig { seed, ..cfg.clone() };
            let task = build_task(&cfg)?;
            let theta0 = run_net_sgd(&cfg, &task, false)?.model;
            let r = run_rrdu(&cfg, &task, &theta0, &theta0, false)?;
            runs.push(walkforget::eval::evaluate(&r.model, &task, cfg.unlearning_client, &theta0)?);
        }
        Ok(medians(&runs))
    };
    let p1 = sweep(&RunConfig { p: 1.0, sigma: Some(0.0), trust_radius: None, ..base.clone() }).map_err(err)?;
    let p1_cal = sweep(&RunConfig { p: 1.0, ..base.clone() }).map_err(err)?;
    let pass = identical && p1.1 < 0.05 && p1.0 < 0.6;
    Ok(Verdict::new(
        pass,
        format!(
            "p=0 run identical to fine-tuning: {identical}; p=1 (sigma=0) clean {:.3} < 0.6, forget {:.3} < 0.05",
            p1.0, p1.1
        ),
    )
    .with_info(format!("p=1 at calibrated sigma, trust radius 7: clean {:.3}, forget {:.3}", p1_cal.0, p1_cal.1)))
}

fn c10_capacity() -> Check {
    let base = CapacityInputs::default();
    let cap = |f: &dyn Fn(&mut CapacityInputs)| {
        let mut x = base;
        f(&mut x);
        ddp_capacity(&x)
    };
    let mut failures = Vec::new();
    let scan = |name: &str, values: Vec<f64>, increasing: bool, failures: &mut Vec<String>| {
        let ok = values.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
        if !ok {
            failures.push(name.to_string());
        }
    };
    let eps = [0.1, 0.5, 1.0, 2.0, 8.0].iter().map(|&e| cap(&|x| x.epsilon = e)).collect::<walkforget::Result<Vec<_>>>().map_err(err)?;
    scan("epsilon", eps, true, &mut failures);
    let dims = [1usize, 10, 100, 1000].iter().map(|&d| cap(&|x| x.dim = d)).collect::<walkforget::Result<Vec<_>>>().map_err(err)?;
    scan("d", dims, false, &mut failures);
    let ns = (3usize..=200).map(|n| cap(&|x| x.num_clients = n)).collect::<walkforget::Result<Vec<_>>>().map_err(err)?;
    scan("N", ns, true, &mut failures);
    let s_ratio = cap(&|x| x.s = 4).map_err(err)? / cap(&|x| x.s = 1).map_err(err)?;
    if s_ratio != 2.0 {
        failures.push(format!("sqrt(s) ratio {s_ratio}"));
    }
    let boundary = rrdu_capacity(0.5, 0.5, 200, 1.0, 2.0).map_err(err)?.m_star;
    if boundary != 0 {
        failures.push(format!("m*(gamma = A) = {boundary}"));
    }
    for k in 1..=10usize {
        let m = rrdu_capacity(0.6, 0.1, 200 * k, 1.0, 2.0).map_err(err)?.m_star;
        if m != 50 * k {
            failures.push(format!("m*(n_u = {}) = {m}", 200 * k));
        }
    }
    Ok(Verdict::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("monotone in epsilon, d, N (3..200); sqrt(s) ratio {s_ratio}; m*(gamma=A) = 0; m* = n_u/4 for n_u = 200..2000")
        } else {
            format!("failed: {}", failures.join(", "))
        },
    ))
}

fn read_tree(dir: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        files.insert(name, std::fs::read(&path)?);
    }
    Ok(files)
}

fn c11_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(err)?;
    let op = [
        "spread=3", "forget_shift=15", "lipschitz=2", "radius=20", "mu=0.05", "eta=5", "trust_radius=7",
    ];
    let mut compared = 0;
    for (label, method, sets) in [
        ("default-rrdu", "rrdu", &[][..]),
        ("default-ddp", "ddp", &[][..]),
        ("default-finetune", "finetune", &[][..]),
        ("logistic-point-rrdu", "rrdu", &op[..]),
    ] {
        let mut trees = Vec::new();
        for run in ["a", "b"] {
            let out = tmp.path().join(format!("{label}-{run}"));
            let mut cmd = Command::new(env!("CARGO_BIN_EXE_walkforget"));
            cmd.args(["unlearn", "--seed", "11", "--method", method, "--out"]).arg(&out);
            for s in sets {
                cmd.args(["--set", s]);
            }
            let o = cmd.output().map_err(err)?;
            if !o.status.success() {
                return Err(format!("{label}: {}", String::from_utf8_lossy(&o.stderr).trim()));
            }
            trees.push(read_tree(&out).map_err(err)?);
        }
        if trees[0] != trees[1] {
            return Ok(Verdict::new(false, format!("{label}: output directories differ")));
        }
        compared += trees[0].len();
    }
    Ok(Verdict::new(true, format!("4 repeated unlearn invocations, {compared} files byte-identical")))
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Check); 11] = [
        (1, "gradient-alignment identity", Duration::from_secs(1), c1_alignment_identity),
        (2, "retraining-direction recovery", Duration::from_secs(10), c2_retraining_direction),
        (3, "lightweight bias envelope", Duration::from_secs(30), c3_bias_envelope),
        (4, "DDP calibration goldens", Duration::from_secs(1), c4_ddp_goldens),
        (5, "RR-DU vs DDP noise scaling in m", Duration::from_secs(1), c5_noise_scaling),
        (6, "geometric mixing", Duration::from_secs(5), c6_geometric_mixing),
        (7, "convex convergence", Duration::from_secs(120), c7_convex_convergence),
        (8, "desk-scale unlearning efficacy", Duration::from_secs(300), c8_unlearning_efficacy),
        (9, "p-sweep", Duration::from_secs(300), c9_p_sweep),
        (10, "capacity calculator properties", Duration::from_secs(1), c10_capacity),
        (11, "determinism", Duration::from_secs(600), c11_determinism),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let (pass, detail, info) = match outcome {
            Ok(v) => (v.pass && in_time, v.detail, v.info),
            Err(e) => (false, format!("error: {e}"), Vec::new()),
        };
        if !pass {
            failed += 1;
        }
        let timing = format!("{:.2}s of {}s{}", elapsed.as_secs_f64(), budget.as_secs(), if in_time { "" } else { ", over budget" });
        println!("criterion {id:>2} {}: {name}: {detail} [{timing}]", if pass { "PASS" } else { "FAIL" });
        for line in info {
            println!("              info: {line}");
        }
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
