//! Bounds around packet elimination: output arrival curves of PEFs and POFs
//! and reordering (RTO/RBO) bounds.

use serde::{Deserialize, Serialize};

use crate::minplus::{Bound, ConcaveCurve};
use crate::rational::Rational;
use crate::topology::PathDelayBounds;

/// Reordering late-time offset and byte offset bounds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReorderingBounds {
    pub rto: Bound,
    pub rbo: Bound,
}

/// `α ⊘ δ_{D−d}`: arrival curve at the output of a system with delay in
/// `[d, D]`, which may lose packets and need not be FIFO.
pub fn lossy_jitter_output_curve(alpha: &ConcaveCurve, delays: &PathDelayBounds) -> ConcaveCurve {
    alpha.deconvolve_delay(&delays.jitter()).expect("jitter of valid bounds is nonnegative")
}

/// Output curve of a PEF: the input curve convolved with every ancestor curve
/// shifted by the ancestor-to-PEF jitter. No ancestors gives the input curve.
pub fn pef_output_curve(alpha_in: &ConcaveCurve, ancestors: &[(ConcaveCurve, PathDelayBounds)]) -> ConcaveCurve {
    ancestors
        .iter()
        .fold(alpha_in.clone(), |acc, (alpha_a, delays)| acc.convolve(&lossy_jitter_output_curve(alpha_a, delays)))
}

/// Output curve of a PEF merging `N` parallel branches from one splitting
/// point whose arrival curve is `alpha`.
pub fn pef_output_curve_parallel(alpha: &ConcaveCurve, branches: &[PathDelayBounds]) -> Option<ConcaveCurve> {
    let min_d = branches.iter().map(|b| b.lower.clone()).min()?;
    let max_d = branches.iter().map(|b| b.upper.clone()).max()?;
    let summed =
        ConcaveCurve::sum(branches.iter().map(|b| lossy_jitter_output_curve(alpha, b)).collect::<Vec<_>>().iter());
    let whole = lossy_jitter_output_curve(alpha, &PathDelayBounds::new(min_d, max_d));
    Some(summed.convolve(&whole))
}

/// RTO bound at a PEF output relative to the order at an ancestor:
/// `|D − d − α↓(2·L_min)|⁺`.
pub fn pef_rto_bound(alpha_at_ancestor: &ConcaveCurve, delays: &PathDelayBounds, l_min: &Rational) -> Rational {
    let two_packets = l_min * Rational::from_integer(2);
    match alpha_at_ancestor.lower_pseudo_inverse(&two_packets) {
        Bound::Finite(spacing) => (delays.jitter() - spacing).positive_part(),
        // Two packets can never be sent: nothing can be reordered.
        Bound::Unbounded => Rational::zero(),
    }
}

/// RBO bound from an RTO bound: `α(RTO)`, 0 when the RTO is 0.
pub fn rbo_from_rto(alpha_local: &ConcaveCurve, rto: &Bound) -> Bound {
    match rto {
        Bound::Finite(t) => Bound::Finite(alpha_local.eval(t).expect("RTO bounds are nonnegative")),
        Bound::Unbounded => Bound::Unbounded,
    }
}

pub fn reordering_bounds(
    alpha_at_ancestor: &ConcaveCurve,
    alpha_local: &ConcaveCurve,
    delays: &PathDelayBounds,
    l_min: &Rational,
) -> ReorderingBounds {
    let rto = Bound::Finite(pef_rto_bound(alpha_at_ancestor, delays, l_min));
    let rbo = rbo_from_rto(alpha_local, &rto);
    ReorderingBounds { rto, rbo }
}

/// Output curve of a POF with reference curve `alpha_ref`. A lossy system
/// adds the timeout to the jitter; an infinite timeout then has no finite
/// curve.
pub fn pof_output_curve(
    alpha_ref: &ConcaveCurve,
    delays: &PathDelayBounds,
    timeout: Option<&Rational>,
    lossless: bool,
) -> Option<ConcaveCurve> {
    if lossless {
        return Some(lossy_jitter_output_curve(alpha_ref, delays));
    }
    let t = timeout?;
    Some(alpha_ref.deconvolve_delay(&(delays.jitter() + t)).expect("nonnegative shift"))
}
