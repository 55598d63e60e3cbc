//! End-to-end runners: token Net-SGD training, the decentralized-DP
//! baseline, RR-DU unlearning, and the retrain certifier.
//!
//! Randomness is drawn from labeled substreams `(phase, purpose, round)`, so
//! two runs over different data (for example the certifier on `D ∖ D_f`)
//! still share routing and noise draws round by round.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::accountant::{self, AccountantReport, DdpPrivacyInputs, DeltaSplit, RrduPrivacyInputs};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::linalg;
use crate::network::{self, Message, ParamsHash, Transcript};
use crate::objective::{corrective_gradient, global_loss, loss_local};
use crate::optimizer::{
    averaged_gradient_over, effective_variance_bound, noisy_projected_step, project, Direction, Schedule, StepRule,
    StepSpec,
};
use crate::rng::SeedTree;
use crate::tasks::Task;
use crate::types::{Ball, ClientDataset, ClientId, FeasibleRegion, Graph, Mode, ModelState, Subset};

/// One row of the optional per-round trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub round: usize,
    pub client: ClientId,
    pub retained_loss: f64,
    /// `None` when the unlearning client holds no forget set.
    pub forget_loss: Option<f64>,
    pub param_norm: f64,
    pub at_u: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub model: ModelState,
    pub transcript: Transcript,
    pub report: Option<AccountantReport>,
    pub trace: Option<Vec<TraceRow>>,
    /// Noise scale actually used (0 for noiseless protocols).
    pub sigma: f64,
}

impl RunResult {
    /// Writes `model.bin`, `transcript.csv`, `accountant.json` and, when
    /// present, `trace.csv` into `dir` (which must exist).
    pub fn save(&self, dir: &Path, prefix: &str) -> Result<()> {
        crate::io::write_model(&dir.join(format!("{prefix}model.bin")), &self.model)?;
        self.transcript.save(&dir.join(format!("{prefix}transcript.csv")))?;
        let report = serde_json::to_string_pretty(&self.report)?;
        std::fs::write(dir.join(format!("{prefix}accountant.json")), report + "\n")?;
        if let Some(trace) = &self.trace {
            let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{prefix}trace.csv")))?);
            writeln!(w, "round,client,retained_loss,forget_loss,param_norm,at_u")?;
            for r in trace {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    r.round,
                    r.client,
                    fmt_f64(r.retained_loss),
                    r.forget_loss.map(fmt_f64).unwrap_or_default(),
                    fmt_f64(r.param_norm),
                    u8::from(r.at_u)
                )?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

fn trace_row(task: &Task, u: ClientId, theta: &ModelState, round: usize, client: ClientId) -> Result<TraceRow> {
    let data_u = &task.datasets[u.index()];
    let forget_loss = if data_u.forget_len() > 0 {
        Some(loss_local(&task.objective, data_u, theta, Subset::Forget)?)
    } else {
        None
    };
    Ok(TraceRow {
        round,
        client,
        retained_loss: global_loss(&task.objective, &task.datasets, theta, true)?,
        forget_loss,
        param_norm: linalg::norm(theta.params()),
        at_u: client == u,
    })
}

fn check_task(cfg: &RunConfig, task: &Task) -> Result<()> {
    if task.datasets.len() != cfg.num_clients {
        return Err(Error::InvalidArgument(format!(
            "config has N = {} but the task has {} clients",
            cfg.num_clients,
            task.datasets.len()
        )));
    }
    if task.dim() != cfg.dim {
        return Err(Error::InvalidArgument(format!("config has d = {} but the task has d = {}", cfg.dim, task.dim())));
    }
    Ok(())
}

fn local_gradient(
    task: &Task,
    data: &ClientDataset,
    theta: &[f64],
    s: usize,
    cfg: &RunConfig,
    clip: Option<f64>,
    rng: &mut crate::rng::Rng,
) -> Result<Vec<f64>> {
    let idx = data.indices(Subset::Full);
    averaged_gradient_over(&task.objective, data, &idx, theta, s, cfg.batch(), clip, rng)
}

/// Token random-walk SGD from `θ = 0` for `cfg.rounds` hops along graph
/// edges, starting at a uniformly drawn client.
pub fn run_net_sgd(cfg: &RunConfig, task: &Task, trace: bool) -> Result<RunResult> {
    run_net_sgd_from(cfg, task, ModelState::zeros(cfg.dim), trace)
}

pub fn run_net_sgd_from(cfg: &RunConfig, task: &Task, theta0: ModelState, trace: bool) -> Result<RunResult> {
    check_task(cfg, task)?;
    let graph = Graph::complete(cfg.num_clients)?;
    let seeds = SeedTree::new(cfg.seed).child("train");
    let schedule = Schedule::resolve(cfg.step, task.objective.lipschitz, task.region.diameter(), task.objective.lipschitz);
    let region = if cfg.project_training { task.region.clone() } else { FeasibleRegion::FullSpace };
    let u = cfg.unlearning_client;

    let mut theta = theta0;
    let mut transcript = Transcript::with_capacity(cfg.rounds);
    let mut rows = trace.then(Vec::new);
    let mut current = network::route_any(&graph, &mut seeds.stream("start", 0));
    for t in 1..=cfg.rounds {
        let g = local_gradient(
            task,
            &task.datasets[current.index()],
            theta.params(),
            1,
            cfg,
            None,
            &mut seeds.stream("batch", t as u64),
        )?;
        let spec = StepSpec { eta: schedule.eta(t), sigma: 0.0, direction: Direction::Descent, region: &region };
        theta = ModelState::new(noisy_projected_step(theta.params(), &g, &spec, &mut seeds.stream("noise", t as u64)))?;
        let next = network::route_uniform(current, &graph, &mut seeds.stream("route", t as u64))?;
        transcript.push(Message {
            round: t,
            sender: current,
            receiver: next,
            at_u: current == u,
            params_hash: ParamsHash::of(theta.params()),
        });
        if let Some(rows) = rows.as_mut() {
            rows.push(trace_row(task, u, &theta, t, current)?);
        }
        current = next;
    }
    Ok(RunResult { model: theta, transcript, report: None, trace: rows, sigma: 0.0 })
}

/// Decentralized-DP baseline: every hop draws the active client uniformly
/// from `V` and takes a noisy step projected onto `Θ`. The noise protects
/// any group of `cfg.forget_size` records (at least one).
pub fn run_ddp_netdp(cfg: &RunConfig, task: &Task, rounds: usize, trace: bool) -> Result<RunResult> {
    check_task(cfg, task)?;
    if !matches!(task.region, FeasibleRegion::Ball(_)) {
        return Err(Error::InvalidArgument("DDP baseline needs a bounded feasible set (radius)".into()));
    }
    let graph = Graph::complete(cfg.num_clients)?;
    let seeds = SeedTree::new(cfg.seed).child("ddp");
    let report = accountant::ddp_account(&DdpPrivacyInputs {
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        lipschitz: task.objective.lipschitz,
        rounds,
        num_clients: cfg.num_clients,
        group_size: cfg.forget_size.max(1),
        c_amp: cfg.c_amp,
    })?;
    let sigma = report.sigma;
    let l = task.objective.lipschitz;
    let g_bound = effective_variance_bound(l, 1.0, 1, cfg.dim, sigma)?.sqrt();
    let schedule = Schedule::resolve(cfg.step, l, task.region.diameter(), g_bound);
    let u = cfg.unlearning_client;

    let mut theta = ModelState::zeros(cfg.dim);
    let mut transcript = Transcript::with_capacity(rounds);
    let mut rows = trace.then(Vec::new);
    let mut current = network::route_any(&graph, &mut seeds.stream("start", 0));
    for t in 1..=rounds {
        let g = local_gradient(
            task,
            &task.datasets[current.index()],
            theta.params(),
            1,
            cfg,
            None,
            &mut seeds.stream("batch", t as u64),
        )?;
        let spec = StepSpec { eta: schedule.eta(t), sigma, direction: Direction::Descent, region: &task.region };
        theta = ModelState::new(noisy_projected_step(theta.params(), &g, &spec, &mut seeds.stream("noise", t as u64)))?;
        let next = network::route_any(&graph, &mut seeds.stream("route", t as u64));
        transcript.push(Message {
            round: t,
            sender: current,
            receiver: next,
            at_u: current == u,
            params_hash: ParamsHash::of(theta.params()),
        });
        if let Some(rows) = rows.as_mut() {
            rows.push(trace_row(task, u, &theta, t, current)?);
        }
        current = next;
    }
    Ok(RunResult { model: theta, transcript, report: Some(report), trace: rows, sigma })
}

/// Single-machine DP-SGD with per-example clipping on the pooled data. Kept
/// for experiment parity only; it carries no network certificate.
pub fn run_dpsgd_central(cfg: &RunConfig, task: &Task, rounds: usize) -> Result<RunResult> {
    check_task(cfg, task)?;
    let clip = cfg.clip.unwrap_or(task.objective.lipschitz);
    let pooled = ClientDataset::new(task.datasets.iter().flat_map(|d| d.examples().iter().cloned()).collect());
    let seeds = SeedTree::new(cfg.seed).child("dpsgd");
    let batch = match cfg.batch_size {
        Some(b) => b,
        None => pooled.len(),
    };
    let sigma = accountant::calibrate_ddp_sigma(cfg.epsilon / cfg.forget_size.max(1) as f64, cfg.delta, clip)? / batch as f64;
    let schedule = Schedule::resolve(cfg.step, clip, task.region.diameter(), clip);
    let mut theta = ModelState::zeros(cfg.dim);
    for t in 1..=rounds {
        let g = local_gradient(task, &pooled, theta.params(), 1, cfg, Some(clip), &mut seeds.stream("batch", t as u64))?;
        let spec = StepSpec { eta: schedule.eta(t), sigma, direction: Direction::Descent, region: &task.region };
        theta = ModelState::new(noisy_projected_step(theta.params(), &g, &spec, &mut seeds.stream("noise", t as u64)))?;
    }
    Ok(RunResult { model: theta, transcript: Transcript::new(), report: None, trace: None, sigma })
}

/// Resolved state of an RR-DU run: everything one hop needs.
#[derive(Debug, Clone)]
pub struct RrduKernel<'a> {
    pub task: &'a Task,
    pub u: ClientId,
    pub mode: Mode,
    pub p: f64,
    pub s: usize,
    pub sigma: f64,
    /// `Θ`, target of the noiseless steps.
    pub region: FeasibleRegion,
    /// `Θ ∩ B(θ_ref, ϱ)`, target of the corrective steps.
    pub corrective_region: FeasibleRegion,
    pub schedule: Schedule,
    cfg: &'a RunConfig,
    graph: Graph,
    seeds: SeedTree,
}

impl<'a> RrduKernel<'a> {
    pub fn new(cfg: &'a RunConfig, task: &'a Task, theta_ref: &ModelState, sigma: f64) -> Result<Self> {
        check_task(cfg, task)?;
        let u = cfg.unlearning_client;
        let region = task.region.clone();
        let corrective_region = match cfg.trust_radius {
            Some(r) => region.intersect(Ball::new(theta_ref.params().to_vec(), r)?)?,
            None => region.clone(),
        };
        let l = task.objective.lipschitz;
        let g_bound = effective_variance_bound(l, cfg.p, cfg.s, cfg.dim, sigma)?.sqrt();
        let r_dom = match corrective_region.diameter() {
            d if d.is_finite() => d,
            _ => region.diameter(),
        };
        let schedule = Schedule::resolve(cfg.step, l, r_dom, g_bound);
        Ok(RrduKernel {
            task,
            u,
            mode: cfg.mode,
            p: cfg.p,
            s: cfg.s,
            sigma,
            region,
            corrective_region,
            schedule,
            cfg,
            graph: Graph::complete(cfg.num_clients)?,
            seeds: SeedTree::new(cfg.seed).child("unlearn"),
        })
    }

    pub fn route(&self, t: usize) -> Result<ClientId> {
        network::route_rrdu(self.u, self.p, &self.graph, &mut self.seeds.stream("route", t as u64))
    }

    /// Update performed by client `v` at hop `t`.
    pub fn hop(&self, theta: &ModelState, v: ClientId, t: usize) -> Result<ModelState> {
        let eta = self.schedule.eta(t);
        let data = &self.task.datasets[v.index()];
        let next = if v == self.u {
            let g = corrective_gradient(
                &self.task.objective,
                data,
                theta,
                self.mode,
                self.cfg.forget_batch(),
                &mut self.seeds.stream("forget", t as u64),
            )?;
            let spec = StepSpec {
                eta,
                sigma: self.sigma,
                direction: Direction::Ascent,
                region: &self.corrective_region,
            };
            noisy_projected_step(theta.params(), &g, &spec, &mut self.seeds.stream("noise", t as u64))
        } else {
            let g = local_gradient(
                self.task,
                data,
                theta.params(),
                self.s,
                self.cfg,
                None,
                &mut self.seeds.stream("batch", t as u64),
            )?;
            let spec = StepSpec { eta, sigma: 0.0, direction: Direction::Descent, region: &self.region };
            noisy_projected_step(theta.params(), &g, &spec, &mut self.seeds.stream("noise", t as u64))
        };
        ModelState::new(next)
    }
}

/// Noise scale for RR-DU: the configured override, or the certified
/// calibration for `(ε, δ)`.
pub fn rrdu_sigma(cfg: &RunConfig, lipschitz: f64) -> Result<f64> {
    match cfg.sigma {
        Some(s) => Ok(s),
        None => Ok(accountant::calibrate_rrdu_sigma(
            cfg.epsilon,
            cfg.delta,
            lipschitz,
            cfg.p,
            cfg.unlearn_rounds,
            cfg.num_clients,
            cfg.c_cal,
            cfg.c_amp,
        )?
        .sigma),
    }
}

/// RR-DU for `cfg.unlearn_rounds` hops from `θ₀` with trust center `θ_ref`.
pub fn run_rrdu(cfg: &RunConfig, task: &Task, theta0: &ModelState, theta_ref: &ModelState, trace: bool) -> Result<RunResult> {
    let sigma = rrdu_sigma(cfg, task.objective.lipschitz)?;
    run_rrdu_with_sigma(cfg, task, theta0, theta_ref, sigma, trace)
}

pub fn run_rrdu_with_sigma(
    cfg: &RunConfig,
    task: &Task,
    theta0: &ModelState,
    theta_ref: &ModelState,
    sigma: f64,
    trace: bool,
) -> Result<RunResult> {
    let kernel = RrduKernel::new(cfg, task, theta_ref, sigma)?;
    let u = kernel.u;
    let data_u = &task.datasets[u.index()];
    match cfg.mode {
        Mode::Exact if data_u.forget_len() == data_u.len() => {
            return Err(Error::EmptySubset("retained set is empty (m = n_u)"))
        }
        Mode::Lightweight if data_u.forget_len() == 0 && cfg.p > 0.0 => {
            return Err(Error::EmptySubset("forget set is empty (m = 0)"))
        }
        _ => {}
    }
    // A noiseless run with visits to `u` is still a valid run; it just has no certificate.
    let report = match accountant::rrdu_view_epsilon(&RrduPrivacyInputs {
        lipschitz: task.objective.lipschitz,
        sigma,
        p: cfg.p,
        t_u: cfg.unlearn_rounds,
        num_clients: cfg.num_clients,
        delta: cfg.delta,
        c_amp: cfg.c_amp,
        split: DeltaSplit::default(),
    }) {
        Ok(r) => Some(r),
        Err(Error::InfinitePrivacyLoss(_)) => None,
        Err(e) => return Err(e),
    };

    let mut theta = ModelState::new(project(theta0.params(), &task.region))?;
    let mut transcript = Transcript::with_capacity(cfg.unlearn_rounds);
    let mut rows = trace.then(Vec::new);
    if cfg.unlearn_rounds > 0 {
        let mut current = kernel.route(0)?;
        for t in 1..=cfg.unlearn_rounds {
            theta = kernel.hop(&theta, current, t)?;
            let next = kernel.route(t)?;
            transcript.push(Message {
                round: t,
                sender: current,
                receiver: next,
                at_u: current == u,
                params_hash: ParamsHash::of(theta.params()),
            });
            if let Some(rows) = rows.as_mut() {
                rows.push(trace_row(task, u, &theta, t, current)?);
            }
            current = next;
        }
    }
    Ok(RunResult { model: theta, transcript, report, trace: rows, sigma })
}

/// Fine-tuning baseline: the RR-DU runner with `p = 0`, so the token never
/// reaches `u` and no noise is drawn.
pub fn run_finetune(cfg: &RunConfig, task: &Task, theta0: &ModelState, trace: bool) -> Result<RunResult> {
    let cfg = RunConfig { p: 0.0, ..cfg.clone() };
    run_rrdu_with_sigma(&cfg, task, theta0, theta0, 0.0, trace)
}

/// Certifier output: the model retrained without `D_f` and its RR-DU
/// continuation with an empty deletion.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifierResult {
    pub retrained: RunResult,
    pub unlearned: RunResult,
}

/// Net-SGD on `D ∖ D_f` followed by EXACT-mode RR-DU with an empty forget
/// set and noise scale `sigma`, reusing the original run's random streams.
pub fn run_retrain_certifier(cfg: &RunConfig, task: &Task, sigma: f64, trace: bool) -> Result<CertifierResult> {
    let data_u = &task.datasets[cfg.unlearning_client.index()];
    if data_u.forget_len() == data_u.len() {
        return Err(Error::EmptySubset("retained set is empty (m = n_u)"));
    }
    let clean = task.without_forget();
    let retrained = run_net_sgd(cfg, &clean, trace)?;
    let exact = RunConfig { mode: Mode::Exact, ..cfg.clone() };
    let unlearned = run_rrdu_with_sigma(&exact, &clean, &retrained.model, &retrained.model, sigma, trace)?;
    Ok(CertifierResult { retrained, unlearned })
}

/// Stepsize rule in force for a config, for reporting.
pub fn describe_step(rule: StepRule) -> String {
    match rule {
        StepRule::Constant(eta) => format!("constant {}", fmt_f64(eta)),
        StepRule::Decaying => "min(1/L, R_dom/(G*sqrt(t)))".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{closed_form_optimum, global_grad, ObjectiveKind};
    use crate::tasks::build_task;

    fn quad_cfg() -> RunConfig {
        RunConfig {
            task: ObjectiveKind::Quadratic,
            num_clients: 4,
            dim: 3,
            samples_per_client: 20,
            forget_size: 4,
            test_size: 10,
            spread: 0.3,
            heterogeneity: 0.0,
            forget_shift: 0.0,
            lipschitz: 4.0,
            radius: Some(2.0),
            batch_size: None,
            step: StepRule::Constant(0.1),
            mode: Mode::Exact,
            ..Default::default()
        }
    }

    #[test]
    fn zero_rounds_keep_initial_model() {
        let cfg = RunConfig { rounds: 0, unlearn_rounds: 0, ..quad_cfg() };
        let task = build_task(&cfg).unwrap();
        let r = run_net_sgd(&cfg, &task, false).unwrap();
        assert_eq!(r.model, ModelState::zeros(3));
        assert!(r.transcript.is_empty());
        let theta0 = ModelState::new(vec![0.1, 0.2, 0.3]).unwrap();
        let r = run_rrdu(&cfg, &task, &theta0, &theta0, false).unwrap();
        assert_eq!(r.model, theta0);
        assert_eq!(r.report.unwrap().guarantee.epsilon, 0.0);
    }

    #[test]
    fn net_sgd_transcript_is_a_walk() {
        let cfg = RunConfig { rounds: 300, ..quad_cfg() };
        let task = build_task(&cfg).unwrap();
        let r = run_net_sgd(&cfg, &task, true).unwrap();
        let msgs = r.transcript.messages();
        assert_eq!(msgs.len(), 300);
        assert_eq!(r.trace.as_ref().unwrap().len(), 300);
        for w in msgs.windows(2) {
            assert_eq!(w[0].receiver, w[1].sender);
            assert_ne!(w[0].sender, w[0].receiver);
        }
    }

    #[test]
    fn rrdu_single_hop_mean_matches_mixture() {
        // Exhaustive expectation over the routing law, any p, both modes.
        let base = quad_cfg();
        let task = build_task(&base).unwrap();
        let theta = ModelState::new(vec![0.5, -0.4, 0.2]).unwrap();
        let n = base.num_clients as f64;
        for mode in [Mode::Exact, Mode::Lightweight] {
            for p in [0.0, 0.1, 0.25, 0.7, 1.0] {
                let cfg = RunConfig { p, mode, sigma: Some(0.0), radius: None, ..base.clone() };
                let task = Task { region: FeasibleRegion::FullSpace, ..task.clone() };
                let k = RrduKernel::new(&cfg, &task, &theta, 0.0).unwrap();
                let mut mean = vec![0.0; 3];
                for v in 1..=cfg.num_clients {
                    let v = ClientId(v);
                    let w = if v == k.u { p } else { (1.0 - p) / (n - 1.0) };
                    let next = k.hop(&theta, v, 1).unwrap();
                    linalg::axpy(w / 0.1, &linalg::sub(next.params(), theta.params()), &mut mean);
                }
                let obj = &task.objective;
                let mut g_not_u = vec![0.0; 3];
                for v in 1..cfg.num_clients {
                    let g = crate::objective::grad_local(obj, &task.datasets[v], &theta, Subset::Full).unwrap();
                    linalg::axpy(1.0 / (n - 1.0), &g, &mut g_not_u);
                }
                let mut rng = crate::rng::Rng::from_seed(0);
                let gu = corrective_gradient(obj, &task.datasets[0], &theta, mode, crate::objective::ForgetBatch::Full, &mut rng).unwrap();
                let expect: Vec<f64> = (0..3).map(|k| -(1.0 - p) * g_not_u[k] + p * gu[k]).collect();
                assert!(linalg::dist(&mean, &expect) < 1e-12);
            }
        }
        // p = 1/N with EXACT recovers the retraining gradient.
        let cfg = RunConfig { p: 1.0 / n, radius: None, ..base.clone() };
        let task = Task { region: FeasibleRegion::FullSpace, ..task };
        let k = RrduKernel::new(&cfg, &task, &theta, 0.0).unwrap();
        let mut mean = vec![0.0; 3];
        for v in 1..=cfg.num_clients {
            let next = k.hop(&theta, ClientId(v), 1).unwrap();
            linalg::axpy(1.0 / n / 0.1, &linalg::sub(next.params(), theta.params()), &mut mean);
        }
        let g = global_grad(&task.objective, &task.datasets, &theta, true).unwrap();
        assert!(mean.iter().zip(&g).all(|(a, b)| (a + b).abs() < 1e-12));
    }

    #[test]
    fn finetune_is_rrdu_at_p_zero() {
        let cfg = RunConfig { unlearn_rounds: 50, ..quad_cfg() };
        let task = build_task(&cfg).unwrap();
        let theta0 = run_net_sgd(&cfg, &task, false).unwrap().model;
        let a = run_finetune(&cfg, &task, &theta0, false).unwrap();
        let b = run_rrdu_with_sigma(&RunConfig { p: 0.0, ..cfg.clone() }, &task, &theta0, &theta0, 0.0, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.transcript.sensitive_hops(), 0);
    }

    #[test]
    fn certifier_reaches_retained_optimum() {
        let cfg = RunConfig { rounds: 2000, unlearn_rounds: 0, forget_shift: 1.0, ..quad_cfg() };
        let task = build_task(&cfg).unwrap();
        let c = run_retrain_certifier(&cfg, &task, 0.0, false).unwrap();
        let opt = closed_form_optimum(&task.objective, &task.datasets, true, &task.region).unwrap();
        let full = closed_form_optimum(&task.objective, &task.datasets, false, &task.region).unwrap();
        let d = linalg::dist(c.unlearned.model.params(), opt.params());
        assert!(d < linalg::dist(full.params(), opt.params()));
        let again = run_retrain_certifier(&cfg, &task, 0.0, false).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn ddp_iterates_stay_in_ball() {
        let cfg = RunConfig { rounds: 200, sigma: None, ..quad_cfg() };
        let task = build_task(&cfg).unwrap();
        let r = run_ddp_netdp(&cfg, &task, 200, true).unwrap();
        let report = r.report.unwrap();
        assert!(report.sigma > 0.0);
        for row in r.trace.unwrap() {
            assert!(row.param_norm <= 2.0 + 1e-9);
        }
    }
}
