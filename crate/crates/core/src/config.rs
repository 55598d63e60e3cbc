//! Run configuration, its validation, and the flat `key = value` file format.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::objective::ObjectiveKind;
use crate::optimizer::StepRule;
use crate::types::{ClientId, Mode};

/// Every knob of a run. Optional fields print as `none` / `auto` / `full`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub task: ObjectiveKind,
    /// `N`
    pub num_clients: usize,
    /// `d`
    pub dim: usize,
    /// `n_u`, identical for every client.
    pub samples_per_client: usize,
    /// `m`, size of the forget set at the unlearning client.
    pub forget_size: usize,
    pub test_size: usize,
    /// Client-mean spread (quadratic) or class separation (logistic).
    pub spread: f64,
    /// Quadratic only: scale of per-client mean offsets.
    pub heterogeneity: f64,
    /// Quadratic: displacement of forget points. Logistic: trigger value
    /// planted on the poisoned forget points.
    pub forget_shift: f64,
    /// `T`
    pub rounds: usize,
    /// `T_u`
    pub unlearn_rounds: usize,
    pub p: f64,
    pub s: usize,
    /// `None` means full-batch gradients.
    pub batch_size: Option<usize>,
    /// `None` means the whole forget set in LIGHTWEIGHT mode.
    pub forget_batch: Option<usize>,
    pub step: StepRule,
    /// `None` calibrates from `(ε, δ)`.
    pub sigma: Option<f64>,
    pub epsilon: f64,
    pub delta: f64,
    /// `L`
    pub lipschitz: f64,
    pub mu: f64,
    pub gamma: f64,
    pub unlearning_client: ClientId,
    pub mode: Mode,
    pub seed: u64,
    /// Radius `R` of `Θ = B(0, R)`; `None` is the full space.
    pub radius: Option<f64>,
    /// Trust-region radius `ϱ` around `θ_ref`; `None` disables it.
    pub trust_radius: Option<f64>,
    /// Whether Net-SGD training projects onto `Θ`.
    pub project_training: bool,
    pub c_amp: f64,
    pub c_cal: f64,
    pub c_bias: f64,
    /// Per-example clipping, central DP-SGD baseline only.
    pub clip: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: ObjectiveKind::Logistic,
            num_clients: 10,
            dim: 10,
            samples_per_client: 200,
            forget_size: 20,
            test_size: 2000,
            spread: 1.0,
            heterogeneity: 1.0,
            forget_shift: 1.0,
            rounds: 200,
            unlearn_rounds: 200,
            p: 0.1,
            s: 4,
            batch_size: Some(16),
            forget_batch: None,
            step: StepRule::Constant(0.1),
            sigma: None,
            epsilon: 1.0,
            delta: 1e-5,
            lipschitz: 1.0,
            mu: 0.0,
            gamma: 0.5,
            unlearning_client: ClientId(1),
            mode: Mode::Lightweight,
            seed: 0,
            radius: Some(10.0),
            trust_radius: None,
            project_training: true,
            c_amp: 1.0,
            c_cal: 1.0,
            c_bias: 2.0,
            clip: None,
        }
    }
}

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    v.parse::<f64>().map_err(|_| format!("'{v}' is not a number"))
}

fn parse_usize(v: &str) -> std::result::Result<usize, String> {
    v.parse::<usize>().map_err(|_| format!("'{v}' is not a non-negative integer"))
}

fn parse_opt<T>(v: &str, none: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Option<T>, String> {
    if v.eq_ignore_ascii_case(none) {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("'{v}' is not a boolean")),
    }
}

fn opt_str<T: ToString>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map(T::to_string).unwrap_or_else(|| none.to_string())
}

impl RunConfig {
    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key {
            "task" => self.task = v.parse().map_err(|e: Error| e.to_string())?,
            "num_clients" => self.num_clients = parse_usize(v)?,
            "dim" => self.dim = parse_usize(v)?,
            "samples_per_client" => self.samples_per_client = parse_usize(v)?,
            "forget_size" => self.forget_size = parse_usize(v)?,
            "test_size" => self.test_size = parse_usize(v)?,
            "spread" => self.spread = parse_f64(v)?,
            "heterogeneity" => self.heterogeneity = parse_f64(v)?,
            "forget_shift" => self.forget_shift = parse_f64(v)?,
            "rounds" => self.rounds = parse_usize(v)?,
            "unlearn_rounds" => self.unlearn_rounds = parse_usize(v)?,
            "p" => self.p = parse_f64(v)?,
            "s" => self.s = parse_usize(v)?,
            "batch_size" => self.batch_size = parse_opt(v, "full", parse_usize)?,
            "forget_batch" => self.forget_batch = parse_opt(v, "full", parse_usize)?,
            "eta" => {
                self.step = if v.eq_ignore_ascii_case("decaying") {
                    StepRule::Decaying
                } else {
                    StepRule::Constant(parse_f64(v)?)
                }
            }
            "sigma" => self.sigma = parse_opt(v, "auto", parse_f64)?,
            "epsilon" => self.epsilon = parse_f64(v)?,
            "delta" => self.delta = parse_f64(v)?,
            "lipschitz" => self.lipschitz = parse_f64(v)?,
            "mu" => self.mu = parse_f64(v)?,
            "gamma" => self.gamma = parse_f64(v)?,
            "unlearning_client" => self.unlearning_client = ClientId(parse_usize(v)?),
            "mode" => self.mode = v.parse().map_err(|e: Error| e.to_string())?,
            "seed" => self.seed = v.parse::<u64>().map_err(|_| format!("'{v}' is not a 64-bit seed"))?,
            "radius" => self.radius = parse_opt(v, "none", parse_f64)?,
            "trust_radius" => self.trust_radius = parse_opt(v, "none", parse_f64)?,
            "project_training" => self.project_training = parse_bool(v)?,
            "c_amp" => self.c_amp = parse_f64(v)?,
            "c_cal" => self.c_cal = parse_f64(v)?,
            "c_bias" => self.c_bias = parse_f64(v)?,
            "clip" => self.clip = parse_opt(v, "none", parse_f64)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// All fields as `(key, value)` in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("task", self.task.to_string()),
            ("num_clients", self.num_clients.to_string()),
            ("dim", self.dim.to_string()),
            ("samples_per_client", self.samples_per_client.to_string()),
            ("forget_size", self.forget_size.to_string()),
            ("test_size", self.test_size.to_string()),
            ("spread", self.spread.to_string()),
            ("heterogeneity", self.heterogeneity.to_string()),
            ("forget_shift", self.forget_shift.to_string()),
            ("rounds", self.rounds.to_string()),
            ("unlearn_rounds", self.unlearn_rounds.to_string()),
            ("p", self.p.to_string()),
            ("s", self.s.to_string()),
            ("batch_size", opt_str(&self.batch_size, "full")),
            ("forget_batch", opt_str(&self.forget_batch, "full")),
            (
                "eta",
                match self.step {
                    StepRule::Constant(e) => e.to_string(),
                    StepRule::Decaying => "decaying".into(),
                },
            ),
            ("sigma", opt_str(&self.sigma, "auto")),
            ("epsilon", self.epsilon.to_string()),
            ("delta", self.delta.to_string()),
            ("lipschitz", self.lipschitz.to_string()),
            ("mu", self.mu.to_string()),
            ("gamma", self.gamma.to_string()),
            ("unlearning_client", self.unlearning_client.to_string()),
            ("mode", self.mode.to_string()),
            ("seed", self.seed.to_string()),
            ("radius", opt_str(&self.radius, "none")),
            ("trust_radius", opt_str(&self.trust_radius, "none")),
            ("project_training", self.project_training.to_string()),
            ("c_amp", self.c_amp.to_string()),
            ("c_cal", self.c_cal.to_string()),
            ("c_bias", self.c_bias.to_string()),
            ("clip", opt_str(&self.clip, "none")),
        ]
    }

    /// Parses the flat format on top of the defaults. Unknown and repeated
    /// keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                line: k + 1,
                msg: "expected key = value".into(),
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::ConfigParse { line: k + 1, msg: format!("duplicate key '{key}'") });
            }
            cfg.set(key, value).map_err(|msg| Error::ConfigParse { line: k + 1, msg })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn forget_batch(&self) -> crate::objective::ForgetBatch {
        match self.forget_batch {
            None => crate::objective::ForgetBatch::Full,
            Some(b) => crate::objective::ForgetBatch::Sampled(b),
        }
    }

    pub fn batch(&self) -> crate::optimizer::BatchSize {
        match self.batch_size {
            None => crate::optimizer::BatchSize::Full,
            Some(b) => crate::optimizer::BatchSize::Sampled(b),
        }
    }
}

/// Returns the config unchanged if every constraint holds, otherwise every
/// violated constraint.
pub fn validate_config(cfg: RunConfig) -> Result<RunConfig> {
    let mut bad: Vec<String> = Vec::new();
    let mut need = |ok: bool, msg: &str| {
        if !ok {
            bad.push(msg.to_string());
        }
    };
    let finite_pos = |x: f64| x.is_finite() && x > 0.0;
    let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;

    need(cfg.num_clients >= 2, "num_clients must be >= 2");
    need(cfg.dim >= 1, "dim must be >= 1");
    need(cfg.samples_per_client >= 1, "samples_per_client must be >= 1");
    need(cfg.test_size >= 1, "test_size must be >= 1");
    need(cfg.p.is_finite() && (0.0..=1.0).contains(&cfg.p), "p must lie in [0,1]");
    need(cfg.s >= 1, "s must be >= 1");
    need(cfg.batch_size != Some(0), "batch_size must be >= 1 or full");
    need(cfg.forget_batch != Some(0), "forget_batch must be >= 1 or full");
    if let StepRule::Constant(eta) = cfg.step {
        need(finite_pos(eta), "eta must be finite and > 0");
    }
    if let Some(sigma) = cfg.sigma {
        need(finite_nonneg(sigma), "sigma must be finite and >= 0");
    }
    need(finite_pos(cfg.epsilon), "epsilon must be finite and > 0");
    need(cfg.delta > 0.0 && cfg.delta < 1.0, "delta must lie in (0,1)");
    need(finite_pos(cfg.lipschitz), "lipschitz must be finite and > 0");
    need(finite_nonneg(cfg.mu), "mu must be finite and >= 0");
    if cfg.task == ObjectiveKind::Logistic && cfg.mu > 0.0 {
        match cfg.radius {
            Some(r) => need(cfg.mu * r < cfg.lipschitz, "regularized logistic task needs mu * radius < lipschitz"),
            None => need(false, "regularized logistic task (mu > 0) needs a finite radius"),
        }
    }
    need(finite_pos(cfg.gamma), "gamma must be finite and > 0");
    need(
        (1..=cfg.num_clients).contains(&cfg.unlearning_client.0),
        "unlearning_client must lie in [1..N]",
    );
    need(cfg.forget_size <= cfg.samples_per_client, "forget_size must not exceed samples_per_client");
    if cfg.mode == Mode::Exact {
        need(
            cfg.forget_size < cfg.samples_per_client,
            "retained set empty: EXACT mode needs forget_size < samples_per_client",
        );
    }
    if cfg.mode == Mode::Lightweight {
        need(cfg.forget_size >= 1, "forget set empty: LIGHTWEIGHT mode needs forget_size >= 1");
    }
    if let Some(r) = cfg.radius {
        need(finite_pos(r), "radius must be finite and > 0");
        if cfg.task == ObjectiveKind::Quadratic {
            need(r < cfg.lipschitz, "quadratic task needs radius < lipschitz (data radius is L - R)");
        }
    }
    if let Some(r) = cfg.trust_radius {
        need(finite_nonneg(r), "trust_radius must be finite and >= 0");
    }
    if let Some(c) = cfg.clip {
        need(finite_pos(c), "clip must be finite and > 0");
    }
    need(finite_nonneg(cfg.spread), "spread must be finite and >= 0");
    need(finite_nonneg(cfg.heterogeneity), "heterogeneity must be finite and >= 0");
    need(cfg.forget_shift.is_finite(), "forget_shift must be finite");
    need(finite_pos(cfg.c_amp), "c_amp must be finite and > 0");
    need(finite_pos(cfg.c_cal), "c_cal must be finite and > 0");
    need(finite_pos(cfg.c_bias), "c_bias must be finite and > 0");

    if bad.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::InvalidConfig(bad))
    }
}
