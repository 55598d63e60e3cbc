//! Convex per-example losses with exact gradients, and the per-client loss
//! arithmetic around a forget set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::{ClientDataset, ClientId, Example, FeasibleRegion, Mode, ModelState, Subset};
use crate::optimizer::project;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    /// `ℓ(θ; z) = ½‖θ − x‖²`, label ignored.
    Quadratic,
    /// `ℓ(θ; z) = ln(1 + exp(−y θᵀx))` with `y ∈ {−1, +1}` mapped from labels `{0, 1}`.
    Logistic,
}

impl std::fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ObjectiveKind::Quadratic => "quadratic",
            ObjectiveKind::Logistic => "logistic",
        })
    }
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quadratic" => Ok(ObjectiveKind::Quadratic),
            "logistic" => Ok(ObjectiveKind::Logistic),
            other => Err(Error::InvalidArgument(format!("unknown task '{other}'"))),
        }
    }
}

/// A per-example loss together with its declared constants.
///
/// `lipschitz` bounds every per-example gradient norm over the feasible
/// region the objective was built for; `mu` is the strong-convexity modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub lipschitz: f64,
    pub mu: f64,
}

impl Objective {
    /// Quadratic loss. With data inside `B(0, data_radius)` and iterates inside
    /// `B(0, region_radius)` every gradient `θ − x` has norm at most the sum.
    pub fn quadratic(data_radius: f64, region_radius: f64) -> Self {
        Objective {
            kind: ObjectiveKind::Quadratic,
            lipschitz: data_radius + region_radius,
            mu: 1.0,
        }
    }

    /// Logistic loss for features with norm at most `feature_bound`.
    /// `|σ(·)| ≤ 1` gives `‖∇ℓ‖ ≤ ‖x‖`.
    pub fn logistic(feature_bound: f64) -> Self {
        Self::regularized_logistic(feature_bound, 0.0, 0.0)
    }

    /// Logistic loss plus `(μ/2)‖θ‖²`, for features with norm at most
    /// `feature_bound` and iterates in `B(0, region_radius)`.
    pub fn regularized_logistic(feature_bound: f64, mu: f64, region_radius: f64) -> Self {
        Objective {
            kind: ObjectiveKind::Logistic,
            lipschitz: feature_bound + mu * region_radius,
            mu,
        }
    }

    pub fn loss(&self, theta: &[f64], z: &Example) -> f64 {
        match self.kind {
            ObjectiveKind::Quadratic => 0.5 * linalg::dist(theta, &z.features).powi(2),
            ObjectiveKind::Logistic => {
                let margin = signed_label(z.label) * linalg::dot(theta, &z.features);
                softplus(-margin) + 0.5 * self.mu * linalg::dot(theta, theta)
            }
        }
    }

    /// Adds `weight · ∇ℓ(θ; z)` into `out`.
    pub fn add_grad(&self, theta: &[f64], z: &Example, weight: f64, out: &mut [f64]) {
        match self.kind {
            ObjectiveKind::Quadratic => {
                for ((o, t), x) in out.iter_mut().zip(theta).zip(&z.features) {
                    *o += weight * (t - x);
                }
            }
            ObjectiveKind::Logistic => {
                let y = signed_label(z.label);
                let margin = y * linalg::dot(theta, &z.features);
                // d/dθ ln(1 + e^{−yθᵀx}) = −y·x·σ(−yθᵀx)
                let coef = -y * sigmoid(-margin);
                linalg::axpy(weight * coef, &z.features, out);
                if self.mu != 0.0 {
                    linalg::axpy(weight * self.mu, theta, out);
                }
            }
        }
    }

    pub fn grad(&self, theta: &[f64], z: &Example) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        self.add_grad(theta, z, 1.0, &mut g);
        g
    }

    /// Predicted label in `{0, 1}`. Only meaningful for the logistic kind.
    pub fn predict(&self, theta: &[f64], x: &[f64]) -> f64 {
        if linalg::dot(theta, x) >= 0.0 {
            1.0
        } else {
            0.0
        }
    }

    /// Mean loss over the given example indices.
    pub fn mean_loss(&self, theta: &[f64], data: &ClientDataset, idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        idx.iter().map(|&i| self.loss(theta, data.example(i))).sum::<f64>() / idx.len() as f64
    }

    /// Mean gradient over the given example indices (repeats allowed).
    pub fn mean_grad(&self, theta: &[f64], data: &ClientDataset, idx: &[usize]) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        let w = 1.0 / idx.len() as f64;
        for &i in idx {
            self.add_grad(theta, data.example(i), w, &mut g);
        }
        g
    }
}

#[inline]
fn signed_label(label: f64) -> f64 {
    if label > 0.5 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn subset_name(subset: Subset) -> &'static str {
    match subset {
        Subset::Full => "full dataset is empty",
        Subset::Retained => "retained set is empty (m = n_u)",
        Subset::Forget => "forget set is empty (m = 0)",
    }
}

/// Exact average gradient over a subset of the client's data.
pub fn grad_local(obj: &Objective, data: &ClientDataset, theta: &ModelState, subset: Subset) -> Result<Vec<f64>> {
    if data.subset_len(subset) == 0 {
        return Err(Error::EmptySubset(subset_name(subset)));
    }
    Ok(obj.mean_grad(theta.params(), data, &data.indices(subset)))
}

/// Average loss over a subset; errors on an empty subset.
pub fn loss_local(obj: &Objective, data: &ClientDataset, theta: &ModelState, subset: Subset) -> Result<f64> {
    if data.subset_len(subset) == 0 {
        return Err(Error::EmptySubset(subset_name(subset)));
    }
    Ok(obj.mean_loss(theta.params(), data, &data.indices(subset)))
}

/// The three local gradients around a forget set and the residual of their
/// mixture identity.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub full: Vec<f64>,
    pub retained: Vec<f64>,
    pub forget: Vec<f64>,
    /// `∇ℓ_u − ((n_u−m)/n_u)∇ℓ_{u∖f} − (m/n_u)∇ℓ_f`, zero up to rounding.
    pub residual: Vec<f64>,
}

pub fn decompose_gradient(obj: &Objective, data: &ClientDataset, theta: &ModelState) -> Result<GradientReport> {
    let (n, m) = (data.len(), data.forget_len());
    if m == 0 || m == n {
        return Err(Error::Precondition(format!(
            "decomposition needs 0 < m < n_u, got m = {m}, n_u = {n}"
        )));
    }
    let full = grad_local(obj, data, theta, Subset::Full)?;
    let retained = grad_local(obj, data, theta, Subset::Retained)?;
    let forget = grad_local(obj, data, theta, Subset::Forget)?;
    let (wr, wf) = ((n - m) as f64 / n as f64, m as f64 / n as f64);
    let residual = full
        .iter()
        .zip(&retained)
        .zip(&forget)
        .map(|((a, r), f)| a - wr * r - wf * f)
        .collect();
    Ok(GradientReport {
        full,
        retained,
        forget,
        residual,
    })
}

/// `∇L(θ) = (1/N) Σ_v ∇ℓ_v(θ)`, optionally with the forget set removed at
/// every client (only the unlearning client has one in practice).
pub fn global_grad(obj: &Objective, datasets: &[ClientDataset], theta: &ModelState, exclude_forget: bool) -> Result<Vec<f64>> {
    let subset = if exclude_forget { Subset::Retained } else { Subset::Full };
    let mut g = vec![0.0; theta.dim()];
    let w = 1.0 / datasets.len() as f64;
    for data in datasets {
        linalg::axpy(w, &grad_local(obj, data, theta, subset)?, &mut g);
    }
    Ok(g)
}

/// `L(θ) = (1/N) Σ_v ℓ_v(θ)`, optionally on retained data.
pub fn global_loss(obj: &Objective, datasets: &[ClientDataset], theta: &ModelState, exclude_forget: bool) -> Result<f64> {
    let subset = if exclude_forget { Subset::Retained } else { Subset::Full };
    let mut total = 0.0;
    for data in datasets {
        total += loss_local(obj, data, theta, subset)?;
    }
    Ok(total / datasets.len() as f64)
}

/// Renormalisation term `∇L_{∖f} − ∇L + (1/N)[∇ℓ_u − ∇ℓ_{u∖f}]`. Forget sets at
/// clients other than `u` are ignored.
pub fn delta_norm(obj: &Objective, datasets: &[ClientDataset], u: ClientId, theta: &ModelState) -> Result<Vec<f64>> {
    let n = datasets.len() as f64;
    let full = global_grad(obj, datasets, theta, false)?;
    let data_u = &datasets[u.index()];
    let gu = grad_local(obj, data_u, theta, Subset::Full)?;
    let gu_ret = grad_local(obj, data_u, theta, Subset::Retained)?;
    let mut ret = vec![0.0; theta.dim()];
    for (v, data) in datasets.iter().enumerate() {
        let g = if v == u.index() { gu_ret.clone() } else { grad_local(obj, data, theta, Subset::Full)? };
        linalg::axpy(1.0 / n, &g, &mut ret);
    }
    Ok((0..ret.len())
        .map(|k| ret[k] - full[k] + (gu[k] - gu_ret[k]) / n)
        .collect())
}

/// How the lightweight corrective step samples the forget set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForgetBatch {
    /// The whole forget set, no sampling.
    Full,
    /// `b` indices drawn uniformly with replacement.
    Sampled(usize),
}

/// Corrective direction `g_u` at the unlearning client.
///
/// EXACT returns `−∇ℓ_{u∖f}`; with an empty forget set this is `−∇ℓ_u`.
/// LIGHTWEIGHT returns `(m/n_u)` times a forget-set minibatch gradient.
pub fn corrective_gradient(
    obj: &Objective,
    data: &ClientDataset,
    theta: &ModelState,
    mode: Mode,
    batch: ForgetBatch,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let (n, m) = (data.len(), data.forget_len());
    match mode {
        Mode::Exact => {
            let mut g = grad_local(obj, data, theta, Subset::Retained)?;
            linalg::scale(-1.0, &mut g);
            Ok(g)
        }
        Mode::Lightweight => {
            if m == 0 {
                return Err(Error::EmptySubset(subset_name(Subset::Forget)));
            }
            let forget = data.forget_indices();
            let mut g = match batch {
                ForgetBatch::Full => obj.mean_grad(theta.params(), data, forget),
                ForgetBatch::Sampled(b) => {
                    if b == 0 {
                        return Err(Error::InvalidArgument("forget batch size must be >= 1".into()));
                    }
                    let idx: Vec<usize> = (0..b).map(|_| forget[rng.below(m)]).collect();
                    obj.mean_grad(theta.params(), data, &idx)
                }
            };
            linalg::scale(m as f64 / n as f64, &mut g);
            Ok(g)
        }
    }
}

/// Exact minimiser of the user-averaged quadratic risk, projected onto
/// `region` (exact for a ball, since the risk is isotropic).
pub fn closed_form_optimum(
    obj: &Objective,
    datasets: &[ClientDataset],
    exclude_forget: bool,
    region: &FeasibleRegion,
) -> Result<ModelState> {
    if obj.kind != ObjectiveKind::Quadratic {
        return Err(Error::UnsupportedObjective("closed-form optimum requires the quadratic objective"));
    }
    let d = datasets
        .iter()
        .find_map(|c| c.dim())
        .ok_or(Error::EmptySubset("no client holds data"))?;
    let subset = if exclude_forget { Subset::Retained } else { Subset::Full };
    let mut opt = vec![0.0; d];
    let w = 1.0 / datasets.len() as f64;
    for data in datasets {
        let idx = data.indices(subset);
        if idx.is_empty() {
            return Err(Error::EmptySubset(subset_name(subset)));
        }
        let wi = w / idx.len() as f64;
        for &i in idx.iter() {
            linalg::axpy(wi, &data.example(i).features, &mut opt);
        }
    }
    ModelState::new(project(&opt, region))
}
