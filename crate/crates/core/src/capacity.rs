//! Deletion-capacity calculators and utility-bound evaluators.
//!
//! All values are scaling values: hidden constants are explicit knobs that
//! default to 1, and logs are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityInputs {
    pub epsilon: f64,
    pub delta: f64,
    pub num_clients: usize,
    pub dim: usize,
    /// `T` for the DDP baseline, `T_u` for RR-DU.
    pub horizon: usize,
    /// `R` for the DDP baseline, `R_cert` for RR-DU.
    pub radius: f64,
    pub lipschitz: f64,
    pub mu: f64,
    pub s: usize,
    pub p: f64,
    pub n_u: usize,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_bias: f64,
    pub c_ddp: f64,
}

impl Default for CapacityInputs {
    fn default() -> Self {
        CapacityInputs {
            epsilon: 1.0,
            delta: 1e-5,
            num_clients: 10,
            dim: 10,
            horizon: 100,
            radius: 1.0,
            lipschitz: 1.0,
            mu: 0.0,
            s: 1,
            p: 0.1,
            n_u: 200,
            gamma: 0.5,
            c1: 1.0,
            c2: 1.0,
            c_bias: 1.0,
            c_ddp: 1.0,
        }
    }
}

impl CapacityInputs {
    /// `√(d·ln(1/δ)·ln N/(sN))`, shared by every privacy term.
    fn privacy_root(&self) -> f64 {
        let n = self.num_clients as f64;
        (self.dim as f64 * (1.0 / self.delta).ln() * n.ln() / (self.s as f64 * n)).sqrt()
    }

    fn check(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.epsilon > 0.0) {
            bad.push("epsilon must be > 0".to_string());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            bad.push("delta must lie in (0,1)".to_string());
        }
        if self.num_clients < 2 {
            bad.push("N must be >= 2".to_string());
        }
        if self.s == 0 {
            bad.push("s must be >= 1".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

/// DDP deletion capacity `c·(ε/(RL(2+ln T)))·√(sN/(d ln(1/δ) ln N))`.
/// `s = 1` is the plain token baseline.
pub fn ddp_capacity(inp: &CapacityInputs) -> Result<f64> {
    inp.check()?;
    if inp.num_clients < 3 {
        return Err(Error::InvalidArgument("DDP capacity needs N >= 3".into()));
    }
    if inp.horizon == 0 {
        return Err(Error::InvalidArgument("T must be >= 1".into()));
    }
    let n = inp.num_clients as f64;
    let lead = inp.epsilon / (inp.radius * inp.lipschitz * (2.0 + (inp.horizon as f64).ln()));
    let root = (inp.s as f64 * n / (inp.dim as f64 * (1.0 / inp.delta).ln() * n.ln())).sqrt();
    Ok(inp.c_ddp * lead * root)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveClass {
    Convex,
    StronglyConvex,
    SmoothNonconvex,
}

impl std::str::FromStr for ObjectiveClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convex" => Ok(ObjectiveClass::Convex),
            "strongly-convex" => Ok(ObjectiveClass::StronglyConvex),
            "smooth-nonconvex" | "nonconvex" => Ok(ObjectiveClass::SmoothNonconvex),
            other => Err(Error::InvalidArgument(format!("unknown objective class '{other}'"))),
        }
    }
}

/// Optimization and privacy terms of the RR-DU utility bound, kept
/// separate; they combine additively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityTerms {
    pub optimization: f64,
    pub privacy: f64,
}

pub fn utility_bound(inp: &CapacityInputs, class: ObjectiveClass) -> Result<UtilityTerms> {
    inp.check()?;
    let st = inp.s as f64 * inp.horizon as f64;
    let priv_core = inp.p * inp.privacy_root() / inp.epsilon;
    let l = inp.lipschitz;
    let (opt, privacy) = match class {
        ObjectiveClass::Convex => (inp.radius * l / st.sqrt(), inp.radius * l * priv_core),
        ObjectiveClass::StronglyConvex => {
            if !(inp.mu > 0.0) {
                return Err(Error::InvalidArgument("strongly convex bound needs mu > 0".into()));
            }
            (l * l / (inp.mu * st), l * l / inp.mu * priv_core)
        }
        ObjectiveClass::SmoothNonconvex => (l * l / st.sqrt(), l * l * priv_core),
    };
    Ok(UtilityTerms {
        optimization: inp.c1 * opt,
        privacy: inp.c2 * privacy,
    })
}

/// Non-bias term `A`: the convex utility bound without the alignment bias.
pub fn nonbias_term_a(inp: &CapacityInputs) -> Result<f64> {
    let t = utility_bound(inp, ObjectiveClass::Convex)?;
    Ok(t.optimization + t.privacy)
}

/// Which side of `γ = A` the RR-DU capacity falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    VarianceLimited,
    BiasLimited,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::VarianceLimited => "variance-limited",
            Regime::BiasLimited => "bias-limited",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RrduCapacity {
    pub m_star: usize,
    pub regime: Regime,
}

/// `⌊(γ−A)·n_u/(C_bias·L)⌋` clamped to `[0, n_u]` when `γ > A`, else 0.
pub fn rrdu_capacity(gamma: f64, a: f64, n_u: usize, l: f64, c_bias: f64) -> Result<RrduCapacity> {
    if !(gamma > 0.0) || n_u == 0 || !(l > 0.0) || !(c_bias > 0.0) {
        return Err(Error::InvalidArgument(
            "rrdu capacity needs gamma > 0, n_u >= 1, L > 0, C_bias > 0".into(),
        ));
    }
    if gamma <= a {
        return Ok(RrduCapacity { m_star: 0, regime: Regime::VarianceLimited });
    }
    let raw = (gamma - a) * n_u as f64 / (c_bias * l);
    // Tolerate rounding just below an integer boundary.
    let m = (raw + 1e-9 * raw.max(1.0)).floor().max(0.0) as usize;
    Ok(RrduCapacity {
        m_star: m.min(n_u),
        regime: Regime::BiasLimited,
    })
}

/// One row of a capacity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityRow {
    pub inputs: CapacityInputs,
    pub a: f64,
    pub optimization_term: f64,
    pub privacy_term: f64,
    pub ddp_capacity: Option<f64>,
    pub m_star: usize,
    pub regime: Regime,
}

pub fn capacity_row(inp: &CapacityInputs) -> Result<CapacityRow> {
    let t = utility_bound(inp, ObjectiveClass::Convex)?;
    let a = t.optimization + t.privacy;
    let cap = rrdu_capacity(inp.gamma, a, inp.n_u, inp.lipschitz, inp.c_bias)?;
    Ok(CapacityRow {
        inputs: *inp,
        a,
        optimization_term: t.optimization,
        privacy_term: t.privacy,
        ddp_capacity: ddp_capacity(inp).ok(),
        m_star: cap.m_star,
        regime: cap.regime,
    })
}

pub const CSV_HEADER: &str = "epsilon,delta,N,d,horizon,radius,L,mu,s,p,n_u,gamma,c1,c2,c_bias,A,optimization_term,privacy_term,ddp_capacity,m_star,regime";

impl CapacityRow {
    pub fn to_csv(&self) -> String {
        let i = &self.inputs;
        let f = crate::io::fmt_f64;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            f(i.epsilon),
            f(i.delta),
            i.num_clients,
            i.dim,
            i.horizon,
            f(i.radius),
            f(i.lipschitz),
            f(i.mu),
            i.s,
            f(i.p),
            i.n_u,
            f(i.gamma),
            f(i.c1),
            f(i.c2),
            f(i.c_bias),
            f(self.a),
            f(self.optimization_term),
            f(self.privacy_term),
            self.ddp_capacity.map(f).unwrap_or_default(),
            self.m_star,
            self.regime
        )
    }
}
