//! Rényi-DP accounting: per-mechanism bounds, composition over sensitive
//! visits, conversion to (ε, δ), group privacy and noise calibration.

use serde::Serialize;

use crate::error::{Error, Result};

/// Orders at which every RDP curve is evaluated.
pub const ALPHA_GRID: [f64; 12] = [1.25, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0];

/// Map from Rényi order to divergence bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdpCurve {
    points: Vec<(f64, f64)>,
}

impl RdpCurve {
    /// Curve from explicit `(α, ε(α))` pairs. Orders must exceed 1, and
    /// bounds must be non-negative (infinite allowed).
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, e) in &points {
            if !(a > 1.0) || !a.is_finite() {
                return Err(Error::InvalidArgument(format!("Renyi order must be finite and > 1, got {a}")));
            }
            if !(e >= 0.0) {
                return Err(Error::InvalidArgument(format!("RDP bound must be >= 0, got {e} at order {a}")));
            }
        }
        points.sort_by(|x, y| x.0.total_cmp(&y.0));
        Ok(RdpCurve { points })
    }

    /// Evaluates `f` on [`ALPHA_GRID`].
    pub fn on_grid(f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(ALPHA_GRID.iter().map(|&a| (a, f(a))).collect())
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Pointwise sum (composition).
    pub fn compose(&self, other: &RdpCurve) -> Result<Self> {
        if self.points.len() != other.points.len()
            || self.points.iter().zip(&other.points).any(|(a, b)| a.0 != b.0)
        {
            return Err(Error::InvalidArgument("composed curves must share their orders".into()));
        }
        Ok(RdpCurve {
            points: self.points.iter().zip(&other.points).map(|(a, b)| (a.0, a.1 + b.1)).collect(),
        })
    }

    /// `k`-fold self-composition.
    pub fn scale(&self, k: f64) -> Self {
        RdpCurve {
            points: self.points.iter().map(|&(a, e)| (a, e * k)).collect(),
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[0].1 <= w[1].1)
    }
}

/// `(ε, δ)` pair; `alpha` records the minimising order when the guarantee
/// came from an RDP conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DpGuarantee {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: Option<f64>,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0,1), got {delta}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidArgument(format!("Renyi order must be > 1, got {alpha}")));
    }
    Ok(())
}

/// Per-step RDP of projected noisy SGD at step `t` of `n`:
/// `2αL²/(σ²(n+1−t))`.
pub fn pnsgd_step_rdp(alpha: f64, l: f64, sigma: f64, n: usize, t: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if sigma == 0.0 {
        return Err(Error::InfinitePrivacyLoss("noiseless step"));
    }
    if t == 0 || t > n {
        return Err(Error::InvalidArgument(format!("step index {t} outside 1..={n}")));
    }
    Ok(2.0 * alpha * l * l / (sigma * sigma * (n + 1 - t) as f64))
}

/// View-level RDP of token SGD with Gaussian noise over `visits` sensitive
/// steps: `C·α·L²·visits·ln N/(σ²N)`.
pub fn view_rdp_token(alpha: f64, l: f64, sigma: f64, visits: f64, n: usize, c_amp: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(Error::InvalidArgument("need N >= 2".into()));
    }
    if visits == 0.0 {
        return Ok(0.0);
    }
    if sigma == 0.0 {
        return Err(Error::InfinitePrivacyLoss("noiseless sensitive step"));
    }
    let n = n as f64;
    Ok(c_amp * alpha * l * l * visits * n.ln() / (sigma * sigma * n))
}

/// `(1+c)·Σ wᵢ Dᵢ`, valid only when every `Dᵢ ≤ c/(α−1)`.
pub fn weak_convexity_mixture(alpha: f64, c: f64, divergences: &[f64], weights: &[f64]) -> Result<f64> {
    check_alpha(alpha)?;
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidArgument(format!("c must lie in (0,1], got {c}")));
    }
    if divergences.len() != weights.len() || divergences.is_empty() {
        return Err(Error::InvalidArgument("need one weight per component".into()));
    }
    if weights.iter().any(|&w| w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("weights must be a probability vector".into()));
    }
    let cap = c / (alpha - 1.0);
    if let Some(&d) = divergences.iter().find(|&&d| d > cap) {
        return Err(Error::Precondition(format!(
            "component divergence {d} exceeds c/(alpha-1) = {cap}"
        )));
    }
    Ok((1.0 + c) * divergences.iter().zip(weights).map(|(d, w)| d * w).sum::<f64>())
}

/// `min_α ε(α) + ln(1/δ)/(α−1)`.
pub fn rdp_to_dp(curve: &RdpCurve, delta: f64) -> Result<DpGuarantee> {
    check_delta(delta)?;
    let log_term = (1.0 / delta).ln();
    curve
        .points()
        .iter()
        .filter(|(_, e)| e.is_finite())
        .map(|&(a, e)| (a, e + log_term / (a - 1.0)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(a, epsilon)| DpGuarantee { epsilon, delta, alpha: Some(a) })
        .ok_or(Error::InfinitePrivacyLoss("no finite order on the RDP curve"))
}

/// High-probability bound on the number of visits to `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitiveVisitCount {
    pub horizon: usize,
    pub p: f64,
    pub beta: f64,
    /// `M̄_u`: `P[M_u > M̄_u] ≤ delta_slack`.
    pub bound: usize,
    pub delta_slack: f64,
}

fn ceil_tol(x: f64) -> usize {
    (x - 1e-9 * x.max(1.0)).ceil().max(0.0) as usize
}

/// Chernoff bound `M̄_u = ⌈(1+β)pT_u⌉` with `β = √(3 ln(1/δ_slack)/(pT_u))`,
/// capped at `T_u` since `M_u ≤ T_u` always.
pub fn sensitive_visit_bound(t_u: usize, p: f64, delta_slack: f64) -> Result<SensitiveVisitCount> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("p must lie in (0,1], got {p}")));
    }
    if t_u == 0 {
        return Err(Error::InvalidArgument("p*T_u must be positive".into()));
    }
    check_delta(delta_slack)?;
    let mean = p * t_u as f64;
    let beta = (3.0 * (1.0 / delta_slack).ln() / mean).sqrt();
    let bound = ceil_tol((1.0 + beta) * mean).min(t_u);
    Ok(SensitiveVisitCount {
        horizon: t_u,
        p,
        beta,
        bound,
        delta_slack,
    })
}

/// How the RR-DU failure probability is divided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaSplit {
    pub chernoff: f64,
    pub gaussian_tail: f64,
    pub conversion: f64,
}

impl Default for DeltaSplit {
    fn default() -> Self {
        DeltaSplit {
            chernoff: 0.25,
            gaussian_tail: 0.25,
            conversion: 0.5,
        }
    }
}

impl DeltaSplit {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.chernoff, self.gaussian_tail, self.conversion];
        if parts.iter().any(|&x| !(x > 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("delta split must be positive and sum to 1".into()));
        }
        Ok(())
    }
}

/// Inputs of the RR-DU view accountant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RrduPrivacyInputs {
    pub lipschitz: f64,
    pub sigma: f64,
    pub p: f64,
    pub t_u: usize,
    pub num_clients: usize,
    pub delta: f64,
    pub c_amp: f64,
    pub split: DeltaSplit,
}

/// Budget actually spent, per component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaBudget {
    pub chernoff: f64,
    pub gaussian_tail: f64,
    pub conversion: f64,
    pub total: f64,
}

/// Structured accountant record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccountantReport {
    pub mechanism: &'static str,
    pub sigma: f64,
    pub inputs: serde_json::Value,
    pub visits: Option<SensitiveVisitCount>,
    pub curve: Option<RdpCurve>,
    pub guarantee: DpGuarantee,
    pub delta_budget: DeltaBudget,
    pub note: String,
}

/// `(ε, δ)` of any single view after `T_u` RR-DU hops. Only visits to `u`
/// are sensitive; their count is bounded by Chernoff and each contributes
/// the per-visit token RDP.
pub fn rrdu_view_epsilon(inp: &RrduPrivacyInputs) -> Result<AccountantReport> {
    check_delta(inp.delta)?;
    inp.split.validate()?;
    if inp.num_clients < 2 {
        return Err(Error::InvalidArgument("need N >= 2".into()));
    }
    let budget = DeltaBudget {
        chernoff: inp.split.chernoff * inp.delta,
        gaussian_tail: inp.split.gaussian_tail * inp.delta,
        conversion: inp.split.conversion * inp.delta,
        total: inp.delta,
    };
    let inputs = serde_json::to_value(inp)?;
    if inp.p == 0.0 || inp.t_u == 0 {
        return Ok(AccountantReport {
            mechanism: "rrdu",
            sigma: inp.sigma,
            inputs,
            visits: None,
            curve: None,
            guarantee: DpGuarantee { epsilon: 0.0, delta: inp.delta, alpha: None },
            delta_budget: budget,
            note: "no sensitive visits".into(),
        });
    }
    if inp.sigma == 0.0 {
        return Err(Error::InfinitePrivacyLoss("sigma = 0 with visits to the unlearning client"));
    }
    let visits = sensitive_visit_bound(inp.t_u, inp.p, budget.chernoff)?;
    let curve = RdpCurve::on_grid(|a| {
        visits.bound as f64
            * view_rdp_token(a, inp.lipschitz, inp.sigma, 1.0, inp.num_clients, inp.c_amp).unwrap_or(f64::INFINITY)
    })?;
    let converted = rdp_to_dp(&curve, budget.conversion)?;
    Ok(AccountantReport {
        mechanism: "rrdu",
        sigma: inp.sigma,
        inputs,
        visits: Some(visits),
        curve: Some(curve),
        guarantee: DpGuarantee { delta: inp.delta, ..converted },
        delta_budget: budget,
        note: "per-visit Gaussian tail folded into the conversion".into(),
    })
}

/// Gaussian-mechanism scale `√(8L² ln(1.25/δ))/ε`.
pub fn calibrate_ddp_sigma(epsilon: f64, delta: f64, l: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
    }
    check_delta(delta)?;
    Ok((8.0 * l * l * (1.25 / delta).ln()).sqrt() / epsilon)
}

pub const DDP_FORMULA: &str = "sigma = sqrt(8 * L^2 * ln(1.25/delta)) / epsilon";
pub const RRDU_FORMULA: &str =
    "sigma = c_cal * (L/epsilon) * sqrt(p * T_u * ln(1/delta) * ln(N) / N), doubled until the view accountant certifies epsilon";

/// Certified RR-DU noise scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub base_sigma: f64,
    pub sigma: f64,
    pub escalations: u32,
    pub target_epsilon: f64,
    pub report: AccountantReport,
}

pub const MAX_ESCALATIONS: u32 = 3;

/// Closed-form scale `c_cal·(L/ε)·√(pT_u ln(1/δ) ln N/N)`, then doubled (up
/// to 8×) until [`rrdu_view_epsilon`] certifies the target.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_rrdu_sigma(
    epsilon: f64,
    delta: f64,
    l: f64,
    p: f64,
    t_u: usize,
    n: usize,
    c_cal: f64,
    c_amp: f64,
) -> Result<Calibration> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
    }
    check_delta(delta)?;
    if n < 2 {
        return Err(Error::InvalidArgument("need N >= 2".into()));
    }
    let nf = n as f64;
    let base = c_cal * (l / epsilon) * (p * t_u as f64 * (1.0 / delta).ln() * nf.ln() / nf).sqrt();
    let mut inp = RrduPrivacyInputs {
        lipschitz: l,
        sigma: base,
        p,
        t_u,
        num_clients: n,
        delta,
        c_amp,
        split: DeltaSplit::default(),
    };
    let mut achieved = f64::INFINITY;
    for k in 0..=MAX_ESCALATIONS {
        inp.sigma = base * f64::from(1u32 << k);
        let report = rrdu_view_epsilon(&inp)?;
        achieved = report.guarantee.epsilon;
        if achieved <= epsilon {
            return Ok(Calibration {
                base_sigma: base,
                sigma: inp.sigma,
                escalations: k,
                target_epsilon: epsilon,
                report,
            });
        }
    }
    Err(Error::CalibrationFailed {
        target: epsilon,
        achieved,
        escalations: MAX_ESCALATIONS,
    })
}

/// `(√(2m ln(1/δ̃))·ε₀, m·δ₀ + δ̃)`; `m = 1` returns `(ε₀, δ₀)` unchanged.
pub fn group_privacy(eps0: f64, delta0: f64, m: usize, delta_tilde: f64) -> Result<DpGuarantee> {
    if m == 0 {
        return Err(Error::InvalidArgument("group size must be >= 1".into()));
    }
    if m == 1 {
        return Ok(DpGuarantee { epsilon: eps0, delta: delta0, alpha: None });
    }
    check_delta(delta_tilde)?;
    let mf = m as f64;
    Ok(DpGuarantee {
        epsilon: (2.0 * mf * (1.0 / delta_tilde).ln()).sqrt() * eps0,
        delta: mf * delta0 + delta_tilde,
        alpha: None,
    })
}

/// Inputs of the decentralized-DP baseline accountant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DdpPrivacyInputs {
    pub epsilon: f64,
    pub delta: f64,
    pub lipschitz: f64,
    pub rounds: usize,
    pub num_clients: usize,
    pub group_size: usize,
    pub c_amp: f64,
}

/// Noise for the DDP baseline at edit distance `m` and its accounting.
///
/// The per-record target is `ε₀ = ε/m` at fixed `δ`, so the scale is
/// `m·σ₁`. The report also carries the view-level RDP over each client's
/// expected `T/N` visits and the group-privacy transform of `(ε₀, δ/m)`.
pub fn ddp_account(inp: &DdpPrivacyInputs) -> Result<AccountantReport> {
    check_delta(inp.delta)?;
    if inp.group_size == 0 {
        return Err(Error::InvalidArgument("group size must be >= 1".into()));
    }
    if inp.num_clients < 2 {
        return Err(Error::InvalidArgument("need N >= 2".into()));
    }
    let m = inp.group_size as f64;
    let eps0 = inp.epsilon / m;
    let sigma = calibrate_ddp_sigma(eps0, inp.delta, inp.lipschitz)?;
    let visits = inp.rounds as f64 / inp.num_clients as f64;
    let curve = RdpCurve::on_grid(|a| {
        view_rdp_token(a, inp.lipschitz, sigma, visits, inp.num_clients, inp.c_amp).unwrap_or(f64::INFINITY)
    })?;
    let view = if visits == 0.0 {
        DpGuarantee { epsilon: 0.0, delta: inp.delta, alpha: None }
    } else {
        rdp_to_dp(&curve, inp.delta)?
    };
    let group = group_privacy(eps0, inp.delta / m, inp.group_size, inp.delta / 2.0)?;
    let mut inputs = serde_json::to_value(inp)?;
    inputs["per_record_epsilon"] = serde_json::json!(eps0);
    inputs["group_epsilon"] = serde_json::json!(group.epsilon);
    inputs["group_delta"] = serde_json::json!(group.delta);
    inputs["formula"] = serde_json::json!(DDP_FORMULA);
    Ok(AccountantReport {
        mechanism: "ddp",
        sigma,
        inputs,
        visits: None,
        curve: Some(curve),
        guarantee: view,
        delta_budget: DeltaBudget {
            chernoff: 0.0,
            gaussian_tail: 0.0,
            conversion: inp.delta,
            total: inp.delta,
        },
        note: "sigma calibrated at per-record epsilon/m (simple split)".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pnsgd_examples() {
        assert!((pnsgd_step_rdp(2.0, 1.0, 1.0, 10, 1).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(pnsgd_step_rdp(3.0, 2.0, 1.0, 10, 10).unwrap(), 24.0);
        let a = pnsgd_step_rdp(2.0, 1.0, 1.0, 5, 2).unwrap();
        let b = pnsgd_step_rdp(2.0, 1.0, 2.0, 5, 2).unwrap();
        assert!((a / b - 4.0).abs() < 1e-12);
        assert!(matches!(pnsgd_step_rdp(2.0, 1.0, 0.0, 5, 2), Err(Error::InfinitePrivacyLoss(_))));
        assert!(pnsgd_step_rdp(2.0, 1.0, 1.0, 5, 6).is_err());
    }

    #[test]
    fn view_rdp_examples() {
        let v = view_rdp_token(2.0, 1.0, 1.0, 10.0, 10, 1.0).unwrap();
        assert!((v - 2.0 * 10f64.ln()).abs() < 1e-12);
        assert_eq!(view_rdp_token(2.0, 1.0, 1.0, 0.0, 10, 1.0).unwrap(), 0.0);
        let w = view_rdp_token(4.0, 1.0, 1.0, 30.0, 10, 1.0).unwrap();
        assert!((w / v - 6.0).abs() < 1e-12);
    }

    #[test]
    fn weak_convexity_examples() {
        let r = weak_convexity_mixture(2.0, 1.0, &[0.1, 0.3], &[0.5, 0.5]).unwrap();
        assert!((r - 0.4).abs() < 1e-15);
        assert!((weak_convexity_mixture(3.0, 0.5, &[0.2], &[1.0]).unwrap() - 0.3).abs() < 1e-15);
        assert!((weak_convexity_mixture(3.0, 0.5, &[0.2, 0.2, 0.2], &[0.2, 0.3, 0.5]).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(
            weak_convexity_mixture(3.0, 0.5, &[0.3], &[1.0]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn conversion_examples() {
        let c = RdpCurve::new(vec![(2.0, 0.5)]).unwrap();
        let g = rdp_to_dp(&c, 1e-5).unwrap();
        assert!((g.epsilon - (0.5 + 1e5f64.ln())).abs() < 1e-12);
        assert!((g.epsilon - 12.0129).abs() < 1e-4);
        let c = RdpCurve::new(vec![(101.0, 1.0)]).unwrap();
        assert!((rdp_to_dp(&c, (-100f64).exp()).unwrap().epsilon - 2.0).abs() < 1e-12);
        let c = RdpCurve::new(vec![(2.0, 0.5), (8.0, 0.9)]).unwrap();
        assert!((rdp_to_dp(&c, 1.0 - 1e-15).unwrap().epsilon - 0.5).abs() < 1e-12);
        let inf = RdpCurve::new(vec![(2.0, f64::INFINITY)]).unwrap();
        assert!(rdp_to_dp(&inf, 1e-5).is_err());
    }

    #[test]
    fn chernoff_examples() {
        let v = sensitive_visit_bound(100, 0.1, 1e-5 / 4.0).unwrap();
        assert!((v.beta - 1.9672).abs() < 1e-4);
        assert_eq!(v.bound, 30);
        // β → 0 as δ_slack → 1, so the bound falls to ⌈pT_u⌉ once pT_u is off the integers.
        let near_one = sensitive_visit_bound(95, 0.1, 1.0 - 1e-12).unwrap();
        assert!(near_one.beta < 1e-6);
        assert_eq!(near_one.bound, 10);
        let w = sensitive_visit_bound(200, 0.1, 1e-5 / 4.0).unwrap();
        assert!(w.beta < v.beta);
        assert!(sensitive_visit_bound(0, 0.1, 0.5).is_err());
        assert!(sensitive_visit_bound(10, 0.0, 0.5).is_err());
        assert_eq!(sensitive_visit_bound(50, 1.0, 1e-5).unwrap().bound, 50);
    }

    fn rrdu_inputs(sigma: f64, p: f64, t_u: usize, n: usize) -> RrduPrivacyInputs {
        RrduPrivacyInputs {
            lipschitz: 1.0,
            sigma,
            p,
            t_u,
            num_clients: n,
            delta: 1e-5,
            c_amp: 1.0,
            split: DeltaSplit::default(),
        }
    }

    #[test]
    fn rrdu_view_edges() {
        assert_eq!(rrdu_view_epsilon(&rrdu_inputs(0.0, 0.0, 100, 10)).unwrap().guarantee.epsilon, 0.0);
        assert!(rrdu_view_epsilon(&rrdu_inputs(0.0, 0.1, 100, 10)).is_err());
        // Huge noise: only the conversion floor at the largest order remains.
        let g = rrdu_view_epsilon(&rrdu_inputs(1e9, 0.1, 100, 10)).unwrap().guarantee;
        let floor = (2.0 / 1e-5f64).ln() / 255.0;
        assert!((g.epsilon - floor).abs() < 1e-9);
    }

    #[test]
    fn rrdu_full_routing_is_t_u_compositions() {
        let r = rrdu_view_epsilon(&rrdu_inputs(20.0, 1.0, 64, 10)).unwrap();
        assert_eq!(r.visits.unwrap().bound, 64);
        let direct = RdpCurve::on_grid(|a| view_rdp_token(a, 1.0, 20.0, 64.0, 10, 1.0).unwrap()).unwrap();
        let e = rdp_to_dp(&direct, 0.5e-5).unwrap().epsilon;
        assert!((r.guarantee.epsilon - e).abs() / e < 0.05);
    }

    #[test]
    fn ddp_calibration_examples() {
        let s = calibrate_ddp_sigma(1.0, 1e-5, 1.0).unwrap();
        assert!((s - (8.0 * 125000f64.ln()).sqrt()).abs() < 1e-12);
        assert!((s - 9.6896).abs() < 1e-4);
        assert!((calibrate_ddp_sigma(2.0, 1e-5, 1.0).unwrap() - s / 2.0).abs() < 1e-12);
        assert_eq!(calibrate_ddp_sigma(1.0, 1e-5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rrdu_calibration() {
        let c = calibrate_rrdu_sigma(1.0, 1e-5, 1.0, 0.1, 100, 10, 1.0, 1.0).unwrap();
        assert!((c.base_sigma - 5.1487).abs() < 1e-4);
        assert!(c.report.guarantee.epsilon <= 1.0);
        assert_eq!(c.sigma, c.base_sigma * f64::from(1u32 << c.escalations));
        let zero = calibrate_rrdu_sigma(1.0, 1e-5, 1.0, 0.0, 100, 10, 1.0, 1.0).unwrap();
        assert_eq!((zero.sigma, zero.report.guarantee.epsilon), (0.0, 0.0));
        let mut prev = f64::INFINITY;
        for n in 3..=100 {
            let b = calibrate_rrdu_sigma(1.0, 1e-5, 1.0, 0.1, 100, n, 1.0, 1.0).unwrap().base_sigma;
            assert!(b < prev);
            prev = b;
        }
        // A tiny constant cannot be rescued by three doublings.
        assert!(matches!(
            calibrate_rrdu_sigma(1.0, 1e-5, 1.0, 0.1, 100, 10, 1e-3, 1.0),
            Err(Error::CalibrationFailed { .. })
        ));
    }

    #[test]
    fn group_privacy_examples() {
        let g = group_privacy(0.1, 1e-6, 4, 1e-5).unwrap();
        assert!((g.epsilon - (8.0 * 1e5f64.ln()).sqrt() * 0.1).abs() < 1e-12);
        assert!((g.epsilon - 0.9597).abs() < 1e-4);
        assert!((g.delta - (4e-6 + 1e-5)).abs() < 1e-18);
        let one = group_privacy(0.3, 1e-6, 1, 1e-300).unwrap();
        assert_eq!((one.epsilon, one.delta), (0.3, 1e-6));
        let a = group_privacy(0.1, 0.0, 2, 1e-5).unwrap().epsilon;
        let b = group_privacy(0.1, 0.0, 8, 1e-5).unwrap().epsilon;
        assert!((b / a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ddp_noise_linear_in_group_size() {
        let base = DdpPrivacyInputs {
            epsilon: 1.0,
            delta: 1e-5,
            lipschitz: 1.0,
            rounds: 100,
            num_clients: 10,
            group_size: 1,
            c_amp: 1.0,
        };
        let s1 = ddp_account(&base).unwrap().sigma;
        let s2 = ddp_account(&DdpPrivacyInputs { group_size: 2, ..base }).unwrap().sigma;
        assert!((s2 / s1 - 2.0).abs() < 1e-9);
    }
}
