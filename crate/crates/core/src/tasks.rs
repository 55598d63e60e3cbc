//! Synthetic federated tasks: a quadratic mean-estimation problem with an
//! exact optimum, and a trigger-poisoned logistic classification problem.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::linalg;
use crate::objective::{Objective, ObjectiveKind};
use crate::rng::{Rng, SeedTree};
use crate::types::{ClientDataset, Example, FeasibleRegion};

/// Everything a protocol run needs besides its config.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub objective: Objective,
    pub datasets: Vec<ClientDataset>,
    pub test: Vec<Example>,
    /// `Θ`
    pub region: FeasibleRegion,
}

impl Task {
    pub fn dim(&self) -> usize {
        self.datasets.iter().find_map(|d| d.dim()).unwrap_or(0)
    }

    /// Copy with the forget sets removed from every client.
    pub fn without_forget(&self) -> Task {
        Task {
            datasets: self.datasets.iter().map(ClientDataset::without_forget).collect(),
            ..self.clone()
        }
    }
}

/// Index of the logistic trigger coordinate.
pub const TRIGGER: usize = 1;

pub fn feasible_region(cfg: &RunConfig) -> Result<FeasibleRegion> {
    match cfg.radius {
        Some(r) => FeasibleRegion::ball(vec![0.0; cfg.dim], r),
        None => Ok(FeasibleRegion::FullSpace),
    }
}

/// Generates the task described by `cfg`, deterministically in `cfg.seed`.
pub fn build_task(cfg: &RunConfig) -> Result<Task> {
    let seeds = SeedTree::new(cfg.seed).child("data");
    match cfg.task {
        ObjectiveKind::Quadratic => quadratic_task(cfg, &seeds),
        ObjectiveKind::Logistic => logistic_task(cfg, &seeds),
    }
}

fn rescale(datasets: &mut [Vec<Example>], test: &mut [Example], target: f64) {
    let max = datasets
        .iter()
        .flatten()
        .chain(test.iter())
        .map(|e| linalg::norm(&e.features))
        .fold(0.0, f64::max);
    if max > 0.0 {
        let k = target / max;
        for e in datasets.iter_mut().flatten().chain(test.iter_mut()) {
            linalg::scale(k, &mut e.features);
        }
    }
}

fn finish(
    cfg: &RunConfig,
    objective: Objective,
    raw: Vec<Vec<Example>>,
    test: Vec<Example>,
) -> Result<Task> {
    let u = cfg.unlearning_client.index();
    let datasets = raw
        .into_iter()
        .enumerate()
        .map(|(v, ex)| {
            let forget = if v == u { (0..cfg.forget_size).collect() } else { Vec::new() };
            ClientDataset::with_forget(ex, forget)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Task {
        objective,
        datasets,
        test,
        region: feasible_region(cfg)?,
    })
}

/// Points `x = c + o_v + spread·ξ` with client offsets `o_v` of scale
/// `heterogeneity`; forget points are displaced by `forget_shift` in every
/// coordinate. All features are then scaled to norm at most `L − R` (or
/// `L/2` without a feasible ball), so `‖θ − x‖ ≤ L` on `Θ`.
fn quadratic_task(cfg: &RunConfig, seeds: &SeedTree) -> Result<Task> {
    let d = cfg.dim;
    let data_radius = match cfg.radius {
        Some(r) => cfg.lipschitz - r,
        None => cfg.lipschitz / 2.0,
    };
    if !(data_radius > 0.0) {
        return Err(Error::InvalidArgument("quadratic task needs radius < lipschitz".into()));
    }
    let center = seeds.stream("center", 0).gaussian_vec(d, 1.0);
    let u = cfg.unlearning_client.index();
    let mut raw = Vec::with_capacity(cfg.num_clients);
    for v in 0..cfg.num_clients {
        let mut rng = seeds.stream("client", v as u64);
        let offset = rng.gaussian_vec(d, cfg.heterogeneity);
        let mut ex = Vec::with_capacity(cfg.samples_per_client);
        for i in 0..cfg.samples_per_client {
            let noise = rng.gaussian_vec(d, cfg.spread);
            let mut x: Vec<f64> = (0..d).map(|k| center[k] + offset[k] + noise[k]).collect();
            if v == u && i < cfg.forget_size {
                x.iter_mut().for_each(|xk| *xk += cfg.forget_shift);
            }
            ex.push(Example { features: x, label: 0.0 });
        }
        raw.push(ex);
    }
    let mut rng = seeds.stream("test", 0);
    let mut test: Vec<Example> = (0..cfg.test_size)
        .map(|_| {
            let noise = rng.gaussian_vec(d, cfg.spread);
            Example {
                features: (0..d).map(|k| center[k] + noise[k]).collect(),
                label: 0.0,
            }
        })
        .collect();
    rescale(&mut raw, &mut test, data_radius);
    let iterate_radius = cfg.radius.unwrap_or(data_radius);
    finish(cfg, Objective::quadratic(data_radius, iterate_radius), raw, test)
}

fn logistic_point(rng: &mut Rng, direction: &[f64], separation: f64) -> Example {
    let d = direction.len() + 2;
    let label = if rng.bernoulli(0.5) { 1.0 } else { 0.0 };
    let sign = if label > 0.5 { 1.0 } else { -1.0 };
    let mut x = Vec::with_capacity(d);
    x.push(1.0);
    x.push(rng.standard_normal());
    for w in direction {
        x.push(sign * 0.5 * separation * w + rng.standard_normal());
    }
    Example { features: x, label }
}

/// Balanced two-class Gaussian data, `x = (1, t, ±(spread/2)·w + ξ)`, with a
/// bias coordinate and a trigger coordinate `t ~ N(0,1)`. The forget set is
/// poisoned: its trigger is set to `forget_shift` and its label to 1. All
/// features are scaled to norm at most `L − μR`, so with the `(μ/2)‖θ‖²`
/// term the per-example gradient stays within `L` on `Θ = B(0, R)`.
fn logistic_task(cfg: &RunConfig, seeds: &SeedTree) -> Result<Task> {
    if cfg.dim < 3 {
        return Err(Error::InvalidArgument("logistic task needs dim >= 3".into()));
    }
    let reg_bound = match cfg.radius {
        Some(r) => cfg.mu * r,
        None if cfg.mu == 0.0 => 0.0,
        None => return Err(Error::InvalidArgument("regularized logistic task needs a bounded radius".into())),
    };
    let feature_bound = cfg.lipschitz - reg_bound;
    if !(feature_bound > 0.0) {
        return Err(Error::InvalidArgument("logistic task needs mu * radius < lipschitz".into()));
    }
    let mut direction = seeds.stream("direction", 0).gaussian_vec(cfg.dim - 2, 1.0);
    let n = linalg::norm(&direction);
    linalg::scale(1.0 / n, &mut direction);
    let u = cfg.unlearning_client.index();
    let mut raw = Vec::with_capacity(cfg.num_clients);
    for v in 0..cfg.num_clients {
        let mut rng = seeds.stream("client", v as u64);
        let mut ex: Vec<Example> = (0..cfg.samples_per_client)
            .map(|_| logistic_point(&mut rng, &direction, cfg.spread))
            .collect();
        if v == u {
            for e in ex.iter_mut().take(cfg.forget_size) {
                e.features[TRIGGER] = cfg.forget_shift;
                e.label = 1.0;
            }
        }
        raw.push(ex);
    }
    let mut rng = seeds.stream("test", 0);
    let mut test: Vec<Example> = (0..cfg.test_size)
        .map(|_| logistic_point(&mut rng, &direction, cfg.spread))
        .collect();
    rescale(&mut raw, &mut test, feature_bound);
    let objective = Objective::regularized_logistic(feature_bound, cfg.mu, cfg.radius.unwrap_or(0.0));
    finish(cfg, objective, raw, test)
}
