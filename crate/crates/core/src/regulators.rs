//! Regulators placed after elimination: per-flow regulator (PFR) delay and
//! reordering penalties, interleaved regulator (IR) instability, and the
//! elimination-ordering-regulation pipeline that costs nothing.

use serde::{Deserialize, Serialize};

use crate::minplus::{h_dev, Bound, ConcaveCurve, TokenBucket};
use crate::rational::Rational;
use crate::topology::{DelayInterval, PathDelayBounds};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReasonCode {
    /// Interleaved regulator fed by eliminators without reordering in between.
    IrAfterPefNoPof,
    /// Some service rate is below the rate of the traffic it must carry.
    RateOverload,
    /// No available result bounds this configuration.
    UnprovenConfiguration,
}

impl ReasonCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReasonCode::IrAfterPefNoPof => "IR_AFTER_PEF_NO_POF",
            ReasonCode::RateOverload => "RATE_OVERLOAD",
            ReasonCode::UnprovenConfiguration => "UNPROVEN_CONFIGURATION",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VerdictKind {
    Bounded { interval: DelayInterval },
    Unbounded { reason: ReasonCode },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegulatorVerdict {
    #[serde(flatten)]
    pub kind: VerdictKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rto_bound: Option<Rational>,
    /// Smallest aggregate size for which an unbounded trajectory is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min: Option<u64>,
    /// True when the aggregate is large enough for the known construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instability_proven: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl RegulatorVerdict {
    pub fn bounded(interval: DelayInterval) -> Self {
        RegulatorVerdict {
            kind: VerdictKind::Bounded { interval },
            rto_bound: None,
            q_min: None,
            instability_proven: None,
            detail: None,
        }
    }

    pub fn unbounded(reason: ReasonCode, detail: impl Into<String>) -> Self {
        RegulatorVerdict {
            kind: VerdictKind::Unbounded { reason },
            rto_bound: None,
            q_min: None,
            instability_proven: None,
            detail: Some(detail.into()),
        }
    }

    pub fn interval(&self) -> Option<&DelayInterval> {
        match &self.kind {
            VerdictKind::Bounded { interval } => Some(interval),
            VerdictKind::Unbounded { .. } => None,
        }
    }

    pub fn reason(&self) -> Option<ReasonCode> {
        match &self.kind {
            VerdictKind::Bounded { .. } => None,
            VerdictKind::Unbounded { reason } => Some(*reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegulatorError {
    #[error("shaping curve {sigma} is not an arrival curve of the flow at the reference ({alpha} exceeds it)")]
    ShapingBelowArrival { sigma: String, alpha: String },
    #[error("shaping burst must be positive")]
    ZeroBurst,
}

/// Checks that `sigma` bounds the traffic observed at the reference.
pub fn check_shaping(sigma: &ConcaveCurve, alpha_ref: &ConcaveCurve) -> Result<(), RegulatorError> {
    if alpha_ref.le(sigma) {
        Ok(())
    } else {
        Err(RegulatorError::ShapingBelowArrival { sigma: sigma.to_string(), alpha: alpha_ref.to_string() })
    }
}

/// Delay through an upstream system with bounds `[d, D]` followed by a
/// token-bucket PFR: `[d, 2D − d]`.
pub fn pfr_after_pef_bounds(_shaping: &TokenBucket, upstream: &PathDelayBounds) -> PathDelayBounds {
    PathDelayBounds::new(upstream.lower.clone(), &upstream.upper + upstream.jitter())
}

/// PFR with a general concave shaping curve: the regulator serves its input
/// with `sigma` as a service curve.
pub fn pfr_general_bounds(sigma: &ConcaveCurve, alpha_in: &ConcaveCurve, upstream: &PathDelayBounds) -> DelayInterval {
    let extra = h_dev(alpha_in, &sigma.clone().into());
    DelayInterval::new(upstream.lower.clone(), extra.plus_finite(&upstream.upper))
}

/// RTO at the output of a PFR placed after a PEF: `λ_PEF + D − d`.
pub fn pfr_after_pef_rto(pef_rto: &Rational, upstream: &PathDelayBounds) -> Rational {
    pef_rto + upstream.jitter()
}

/// `⌊2r·|d₂ − D₁|⁺ / b + 2⌋ + 1`, with branches ordered so that `D₁ ≤ D₂`.
pub fn ir_q_min(
    shaping: &TokenBucket,
    branch1: &PathDelayBounds,
    branch2: &PathDelayBounds,
) -> Result<u64, RegulatorError> {
    if !shaping.burst.is_positive() {
        return Err(RegulatorError::ZeroBurst);
    }
    let (b1, b2) = if branch1.upper <= branch2.upper { (branch1, branch2) } else { (branch2, branch1) };
    let gap = (&b2.lower - &b1.upper).positive_part();
    let two = Rational::from_integer(2);
    let v = &two * &shaping.rate * gap / &shaping.burst + two;
    Ok(v.floor_u64().expect("nonnegative and small") + 1)
}

/// What the analyzer knows about an interleaved regulator fed by PEFs.
#[derive(Clone, Debug)]
pub struct IrContext {
    /// One shaping curve per flow of the aggregate.
    pub shaping: Vec<ConcaveCurve>,
    /// Smallest `L_min` across the aggregate.
    pub l_min: Rational,
    /// Delay bounds of each distinct reference→vertex path shared by all flows.
    pub shared_branches: Vec<PathDelayBounds>,
    /// Bounds over all paths, used when the aggregate is a single flow.
    pub upstream: PathDelayBounds,
    /// Arrival curve of the single flow at the regulator input, for the
    /// general-shaping fallback.
    pub alpha_in: Option<ConcaveCurve>,
}

/// Verdict for an interleaved regulator placed after PEFs with no POF in
/// between. Never claims a finite bound for two or more flows.
pub fn ir_after_pef_verdict(ctx: &IrContext) -> RegulatorVerdict {
    if ctx.shaping.len() == 1 {
        let sigma = &ctx.shaping[0];
        return match sigma.as_token_bucket() {
            Some(tb) => RegulatorVerdict::bounded(pfr_after_pef_bounds(tb, &ctx.upstream).to_interval()),
            None => {
                let alpha = ctx.alpha_in.as_ref().expect("single-flow fallback needs the input curve");
                RegulatorVerdict::bounded(pfr_general_bounds(sigma, alpha, &ctx.upstream))
            }
        };
    }
    let first = &ctx.shaping[0];
    let homogeneous = ctx.shaping.iter().all(|s| s == first);
    let Some(tb) = first.as_token_bucket().filter(|_| homogeneous) else {
        return RegulatorVerdict::unbounded(
            ReasonCode::UnprovenConfiguration,
            "interleaved regulation after elimination with shaping curves that are not one common token bucket",
        );
    };
    let q = ctx.shaping.len() as u64;
    let mut q_min: Option<u64> = None;
    for (i, a) in ctx.shared_branches.iter().enumerate() {
        for b in &ctx.shared_branches[i + 1..] {
            if a != b {
                let v = ir_q_min(tb, a, b).expect("positive burst checked below");
                q_min = Some(q_min.map_or(v, |m| m.min(v)));
            }
        }
    }
    let conditions = tb.burst.is_positive() && tb.burst >= ctx.l_min && q_min.is_some();
    let mut verdict = if conditions {
        RegulatorVerdict::unbounded(
            ReasonCode::IrAfterPefNoPof,
            "interleaved regulator after elimination without reordering: adversarial inputs can grow its delay without bound",
        )
    } else {
        RegulatorVerdict::unbounded(
            ReasonCode::UnprovenConfiguration,
            "interleaved regulator after elimination without reordering; no finite bound is known",
        )
    };
    if conditions {
        verdict.q_min = q_min;
        verdict.instability_proven = q_min.map(|m| q >= m);
    }
    verdict
}

/// PEFs, then a POF, then a regulator with the same reference: the regulator
/// adds nothing to the POF's bounds `[d, D]` (lossless) or `[d, D + T]`.
pub fn preof_for_free_bounds(upstream: &PathDelayBounds, timeout: Option<&Rational>, lossless: bool) -> DelayInterval {
    if lossless {
        return upstream.to_interval();
    }
    match timeout {
        Some(t) => DelayInterval::finite(upstream.lower.clone(), &upstream.upper + t),
        None => DelayInterval::new(upstream.lower.clone(), Bound::Unbounded),
    }
}
