//! Per-hop update kernel: projections, minibatch gradients, noisy steps and
//! stepsize schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::objective::Objective;
use crate::rng::Rng;
use crate::types::{Ball, ClientDataset, FeasibleRegion};

fn project_ball(x: &[f64], ball: &Ball) -> Vec<f64> {
    let dist = linalg::dist(x, &ball.center);
    if dist <= ball.radius {
        return x.to_vec();
    }
    let t = ball.radius / dist;
    x.iter()
        .zip(&ball.center)
        .map(|(xi, ci)| ci + t * (xi - ci))
        .collect()
}

/// Closest point of `a ∩ b` to `x`, assuming both balls meet.
fn project_lens(x: &[f64], a: &Ball, b: &Ball) -> Vec<f64> {
    let tol = 1e-12;
    if a.contains(x, tol) && b.contains(x, tol) {
        return x.to_vec();
    }
    let pa = project_ball(x, a);
    if b.contains(&pa, tol) {
        return pa;
    }
    let pb = project_ball(x, b);
    if a.contains(&pb, tol) {
        return pb;
    }
    // Both single-ball projections fall outside the other ball, so the
    // answer lies on the circle where the two spheres meet.
    let axis = linalg::sub(&b.center, &a.center);
    let gap = linalg::norm(&axis);
    let n: Vec<f64> = axis.iter().map(|v| v / gap).collect();
    let along = (gap * gap + a.radius * a.radius - b.radius * b.radius) / (2.0 * gap);
    let half = (a.radius * a.radius - along * along).max(0.0).sqrt();
    let mut circle_center = a.center.clone();
    linalg::axpy(along, &n, &mut circle_center);
    let mut w = linalg::sub(x, &circle_center);
    let proj = linalg::dot(&w, &n);
    linalg::axpy(-proj, &n, &mut w);
    let wn = linalg::norm(&w);
    if wn == 0.0 {
        // x sits on the axis: every circle point is equidistant; pick one
        // deterministic direction orthogonal to the axis.
        let k = n
            .iter()
            .enumerate()
            .min_by(|p, q| p.1.abs().total_cmp(&q.1.abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let mut e = vec![0.0; x.len()];
        e[k] = 1.0;
        let c = linalg::dot(&e, &n);
        linalg::axpy(-c, &n, &mut e);
        let en = linalg::norm(&e);
        linalg::axpy(half / en, &e, &mut circle_center);
        return circle_center;
    }
    linalg::axpy(half / wn, &w, &mut circle_center);
    circle_center
}

/// Euclidean projection onto `region`.
pub fn project(x: &[f64], region: &FeasibleRegion) -> Vec<f64> {
    match region {
        FeasibleRegion::FullSpace => x.to_vec(),
        FeasibleRegion::Ball(b) => project_ball(x, b),
        FeasibleRegion::Intersection(a, b) => project_lens(x, a, b),
    }
}

/// Scales `g` down to norm `c` if it exceeds it.
pub fn clip(g: &mut [f64], c: f64) {
    let n = linalg::norm(g);
    if n > c && n > 0.0 {
        linalg::scale(c / n, g);
    }
}

/// Minibatch size per gradient draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BatchSize {
    /// Every example once, no sampling.
    Full,
    /// `b` examples drawn uniformly with replacement.
    Sampled(usize),
}

/// `(1/s) Σ_i ∇ℓ(θ; B_i)` over `s` i.i.d. minibatches drawn from `idx`.
/// With `BatchSize::Full` every draw is the exact gradient and `rng` is
/// untouched.
pub fn averaged_gradient_over(
    obj: &Objective,
    data: &ClientDataset,
    idx: &[usize],
    theta: &[f64],
    s: usize,
    batch: BatchSize,
    clip_at: Option<f64>,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if s == 0 {
        return Err(Error::InvalidArgument("averaging factor s must be >= 1".into()));
    }
    if idx.is_empty() {
        return Err(Error::EmptySubset("local dataset is empty"));
    }
    if let Some(c) = clip_at {
        // Per-example clipping, used only by the central DP-SGD baseline.
        let b = match batch {
            BatchSize::Full => idx.len(),
            BatchSize::Sampled(b) => b,
        };
        let mut out = vec![0.0; theta.len()];
        let w = 1.0 / (b * s) as f64;
        for _ in 0..s {
            for j in 0..b {
                let i = match batch {
                    BatchSize::Full => idx[j],
                    BatchSize::Sampled(_) => idx[rng.below(idx.len())],
                };
                let mut g = obj.grad(theta, data.example(i));
                clip(&mut g, c);
                linalg::axpy(w, &g, &mut out);
            }
        }
        return Ok(out);
    }
    match batch {
        BatchSize::Full => Ok(obj.mean_grad(theta, data, idx)),
        BatchSize::Sampled(0) => Err(Error::InvalidArgument("batch size must be >= 1".into())),
        BatchSize::Sampled(b) => {
            let mut out = vec![0.0; theta.len()];
            let w = 1.0 / (b * s) as f64;
            for _ in 0..s * b {
                let i = idx[rng.below(idx.len())];
                obj.add_grad(theta, data.example(i), w, &mut out);
            }
            Ok(out)
        }
    }
}

/// Averaged minibatch gradient over the whole local dataset.
pub fn averaged_gradient(
    obj: &Objective,
    data: &ClientDataset,
    theta: &[f64],
    s: usize,
    batch: BatchSize,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let idx: Vec<usize> = (0..data.len()).collect();
    averaged_gradient_over(obj, data, &idx, theta, s, batch, None, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Descent,
    Ascent,
}

/// Parameters of a single projected step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSpec<'a> {
    pub eta: f64,
    pub sigma: f64,
    pub direction: Direction,
    pub region: &'a FeasibleRegion,
}

/// `Π(θ ∓ η(g + Z))` with `Z ~ N(0, σ²I)`; no noise is drawn when `σ = 0`.
pub fn noisy_projected_step(theta: &[f64], g: &[f64], spec: &StepSpec<'_>, rng: &mut Rng) -> Vec<f64> {
    debug_assert!(spec.eta > 0.0);
    let sign = match spec.direction {
        Direction::Descent => -1.0,
        Direction::Ascent => 1.0,
    };
    let mut dir = g.to_vec();
    if spec.sigma > 0.0 {
        for v in dir.iter_mut() {
            *v += spec.sigma * rng.standard_normal();
        }
    }
    let mut next = theta.to_vec();
    linalg::axpy(sign * spec.eta, &dir, &mut next);
    let out = project(&next, spec.region);
    // Non-expansiveness bounds the move whenever θ already lies in the region.
    debug_assert!(
        !spec.region.contains(theta, 0.0)
            || linalg::dist(&out, theta) <= spec.eta * linalg::norm(&dir) + 1e-9
    );
    out
}

/// `G² = L² + (p/s)·d·σ²`
pub fn effective_variance_bound(l: f64, p: f64, s: usize, d: usize, sigma: f64) -> Result<f64> {
    if s == 0 {
        return Err(Error::InvalidArgument("averaging factor s must be >= 1".into()));
    }
    Ok(l * l + p / s as f64 * d as f64 * sigma * sigma)
}

/// Stepsize rule as configured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    Constant(f64),
    /// `η_t = min{1/L, R_dom/(G√t)}`, constants resolved per protocol.
    Decaying,
}

/// Fully resolved schedule, indexed by the 1-based hop within a phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant(f64),
    Decaying { lipschitz: f64, r_dom: f64, g: f64 },
}

impl Schedule {
    pub fn resolve(rule: StepRule, lipschitz: f64, r_dom: f64, g: f64) -> Schedule {
        match rule {
            StepRule::Constant(eta) => Schedule::Constant(eta),
            StepRule::Decaying => Schedule::Decaying { lipschitz, r_dom, g },
        }
    }

    pub fn eta(&self, t: usize) -> f64 {
        match *self {
            Schedule::Constant(eta) => eta,
            Schedule::Decaying { lipschitz, r_dom, g } => {
                let t = t.max(1) as f64;
                (1.0 / lipschitz).min(r_dom / (g * t.sqrt()))
            }
        }
    }
}
