//! Min-plus algebra over concave piecewise-linear curves.
//!
//! A [`ConcaveCurve`] is the minimum of finitely many token buckets
//! `γ_{r,b}(t) = r·t + b` for `t > 0`, with value 0 at `t = 0`. Every curve is
//! kept in canonical form: segments sorted by strictly decreasing rate and
//! strictly increasing burst, each active on an interval of positive length.
//! With that form, equality of curves is equality of segment lists.
//!
//! Service curves are either rate-latency `β_{R,T}(t) = R·(t − T)⁺` or a
//! concave curve used as a service curve (regulators offer their shaping
//! curve as service).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

/// A quantity that may be infinite. Infinite delays and backlogs are a
/// legitimate analysis outcome, not an error.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    Finite(Rational),
    Unbounded,
}

impl Bound {
    pub fn zero() -> Self {
        Bound::Finite(Rational::zero())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Bound::Finite(_))
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Bound::Finite(v) => Some(v),
            Bound::Unbounded => None,
        }
    }

    pub fn plus(&self, other: &Bound) -> Bound {
        match (self, other) {
            (Bound::Finite(a), Bound::Finite(b)) => Bound::Finite(a + b),
            _ => Bound::Unbounded,
        }
    }

    pub fn plus_finite(&self, other: &Rational) -> Bound {
        match self {
            Bound::Finite(a) => Bound::Finite(a + other),
            Bound::Unbounded => Bound::Unbounded,
        }
    }
}

impl From<Rational> for Bound {
    fn from(v: Rational) -> Self {
        Bound::Finite(v)
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{v}"),
            Bound::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Value(Rational),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) if s == "unbounded" => Ok(Bound::Unbounded),
            Raw::Text(s) => s.parse().map(Bound::Finite).map_err(serde::de::Error::custom),
            Raw::Value(v) => Ok(Bound::Finite(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CurveError {
    #[error("a curve needs at least one segment")]
    Empty,
    #[error("negative rate {0}")]
    NegativeRate(Rational),
    #[error("negative burst {0}")]
    NegativeBurst(Rational),
    #[error("rate-latency service needs a positive rate, got {0}")]
    NonPositiveServiceRate(Rational),
    #[error("negative latency {0}")]
    NegativeLatency(Rational),
    #[error("negative time {0}")]
    NegativeTime(Rational),
    #[error("negative delay {0}")]
    NegativeDelay(Rational),
}

/// `γ_{r,b}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenBucket {
    pub rate: Rational,
    pub burst: Rational,
}

impl TokenBucket {
    pub fn new(rate: Rational, burst: Rational) -> Result<Self, CurveError> {
        if rate.is_negative() {
            return Err(CurveError::NegativeRate(rate));
        }
        if burst.is_negative() {
            return Err(CurveError::NegativeBurst(burst));
        }
        Ok(TokenBucket { rate, burst })
    }

    /// `r·dt + b`, the right-limit value used for closed windows.
    pub fn line(&self, dt: &Rational) -> Rational {
        &self.rate * dt + &self.burst
    }
}

/// Minimum of token buckets, held in canonical form.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawCurve", into = "RawCurve")]
pub struct ConcaveCurve {
    segments: Vec<TokenBucket>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurve {
    segments: Vec<TokenBucket>,
}

impl TryFrom<RawCurve> for ConcaveCurve {
    type Error = CurveError;
    fn try_from(raw: RawCurve) -> Result<Self, CurveError> {
        for s in &raw.segments {
            TokenBucket::new(s.rate.clone(), s.burst.clone())?;
        }
        ConcaveCurve::from_segments(raw.segments)
    }
}

impl From<ConcaveCurve> for RawCurve {
    fn from(c: ConcaveCurve) -> Self {
        RawCurve { segments: c.segments }
    }
}

impl fmt::Debug for ConcaveCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ConcaveCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.segments.iter().map(|s| format!("γ[{},{}]", s.rate, s.burst)).collect();
        if parts.len() == 1 {
            f.write_str(&parts[0])
        } else {
            write!(f, "min({})", parts.join(", "))
        }
    }
}

/// Time at which line `hi` (higher rate) and line `lo` cross.
fn crossing(hi: &TokenBucket, lo: &TokenBucket) -> Rational {
    (&lo.burst - &hi.burst) / (&hi.rate - &lo.rate)
}

fn normalize(mut segs: Vec<TokenBucket>) -> Vec<TokenBucket> {
    segs.sort_by(|a, b| b.rate.cmp(&a.rate).then(a.burst.cmp(&b.burst)));
    segs.dedup_by(|later, earlier| later.rate == earlier.rate);
    let mut env: Vec<TokenBucket> = Vec::with_capacity(segs.len());
    for seg in segs {
        while env.last().is_some_and(|top| top.burst >= seg.burst) {
            env.pop();
        }
        while env.len() >= 2 {
            let n = env.len();
            if crossing(&env[n - 2], &env[n - 1]) >= crossing(&env[n - 1], &seg) {
                env.pop();
            } else {
                break;
            }
        }
        env.push(seg);
    }
    env
}

impl ConcaveCurve {
    pub fn from_segments(segments: Vec<TokenBucket>) -> Result<Self, CurveError> {
        if segments.is_empty() {
            return Err(CurveError::Empty);
        }
        Ok(ConcaveCurve { segments: normalize(segments) })
    }

    /// `γ_{r,b}`. Panics on negative parameters.
    pub fn token_bucket(rate: Rational, burst: Rational) -> Self {
        let tb = TokenBucket::new(rate, burst).expect("token bucket parameters must be nonnegative");
        ConcaveCurve { segments: vec![tb] }
    }

    pub fn zero() -> Self {
        ConcaveCurve::token_bucket(Rational::zero(), Rational::zero())
    }

    pub fn segments(&self) -> &[TokenBucket] {
        &self.segments
    }

    pub fn is_zero(&self) -> bool {
        self.segments.len() == 1 && self.segments[0].rate.is_zero() && self.segments[0].burst.is_zero()
    }

    /// The single token bucket, if the curve is one.
    pub fn as_token_bucket(&self) -> Option<&TokenBucket> {
        (self.segments.len() == 1).then(|| &self.segments[0])
    }

    /// Value at `0⁺`.
    pub fn burst(&self) -> &Rational {
        &self.segments[0].burst
    }

    /// Long-term rate.
    pub fn rate(&self) -> &Rational {
        &self.segments[self.segments.len() - 1].rate
    }

    /// Times where the active segment changes, increasing.
    pub fn breakpoints(&self) -> Vec<Rational> {
        self.segments.windows(2).map(|w| crossing(&w[0], &w[1])).collect()
    }

    pub fn eval(&self, t: &Rational) -> Result<Rational, CurveError> {
        if t.is_negative() {
            return Err(CurveError::NegativeTime(t.clone()));
        }
        if t.is_zero() {
            return Ok(Rational::zero());
        }
        Ok(self.eval_closed(t))
    }

    /// Right-limit value `α(dt⁺)`: the most data a compliant flow can put in a
    /// closed window of length `dt`, including `dt = 0`.
    pub fn eval_closed(&self, dt: &Rational) -> Rational {
        self.segments.iter().map(|s| s.line(dt)).min().expect("canonical curves are nonempty")
    }

    pub fn add(&self, other: &ConcaveCurve) -> ConcaveCurve {
        let mut sums = Vec::with_capacity(self.segments.len() * other.segments.len());
        for a in &self.segments {
            for b in &other.segments {
                sums.push(TokenBucket { rate: &a.rate + &b.rate, burst: &a.burst + &b.burst });
            }
        }
        ConcaveCurve { segments: normalize(sums) }
    }

    pub fn sum<'a>(curves: impl IntoIterator<Item = &'a ConcaveCurve>) -> ConcaveCurve {
        curves.into_iter().fold(ConcaveCurve::zero(), |acc, c| acc.add(c))
    }

    /// Min-plus convolution; for concave curves through the origin this is the
    /// pointwise minimum.
    pub fn convolve(&self, other: &ConcaveCurve) -> ConcaveCurve {
        let mut all = self.segments.clone();
        all.extend(other.segments.iter().cloned());
        ConcaveCurve { segments: normalize(all) }
    }

    /// `α ⊘ δ_D`, i.e. `t ↦ α(t + D)`.
    pub fn deconvolve_delay(&self, delay: &Rational) -> Result<ConcaveCurve, CurveError> {
        if delay.is_negative() {
            return Err(CurveError::NegativeDelay(delay.clone()));
        }
        let shifted = self
            .segments
            .iter()
            .map(|s| TokenBucket { rate: s.rate.clone(), burst: &s.burst + &s.rate * delay })
            .collect();
        Ok(ConcaveCurve { segments: normalize(shifted) })
    }

    /// `inf{t ≥ 0 : α(t) ≥ y}`; unbounded when `y` exceeds the supremum.
    pub fn lower_pseudo_inverse(&self, y: &Rational) -> Bound {
        if !y.is_positive() {
            return Bound::zero();
        }
        let mut t = Rational::zero();
        for s in &self.segments {
            if s.burst < *y {
                if s.rate.is_zero() {
                    return Bound::Unbounded;
                }
                t = t.max((y - &s.burst) / &s.rate);
            }
        }
        Bound::Finite(t)
    }

    /// Pointwise `self ≤ other` on `t > 0`.
    pub fn le(&self, other: &ConcaveCurve) -> bool {
        if self.rate() > other.rate() {
            return false;
        }
        let mut points = vec![Rational::zero()];
        points.extend(self.breakpoints());
        points.extend(other.breakpoints());
        points.iter().all(|t| self.eval_closed(t) <= other.eval_closed(t))
    }
}

/// `β_{R,T}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawRateLatency", into = "RawRateLatency")]
pub struct RateLatency {
    rate: Rational,
    latency: Rational,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRateLatency {
    rate: Rational,
    latency: Rational,
}

impl TryFrom<RawRateLatency> for RateLatency {
    type Error = CurveError;
    fn try_from(raw: RawRateLatency) -> Result<Self, CurveError> {
        RateLatency::new(raw.rate, raw.latency)
    }
}

impl From<RateLatency> for RawRateLatency {
    fn from(r: RateLatency) -> Self {
        RawRateLatency { rate: r.rate, latency: r.latency }
    }
}

impl RateLatency {
    pub fn new(rate: Rational, latency: Rational) -> Result<Self, CurveError> {
        if !rate.is_positive() {
            return Err(CurveError::NonPositiveServiceRate(rate));
        }
        if latency.is_negative() {
            return Err(CurveError::NegativeLatency(latency));
        }
        Ok(RateLatency { rate, latency })
    }

    pub fn rate(&self) -> &Rational {
        &self.rate
    }

    pub fn latency(&self) -> &Rational {
        &self.latency
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServiceCurve {
    RateLatency(RateLatency),
    Concave(ConcaveCurve),
}

impl ServiceCurve {
    pub fn rate(&self) -> &Rational {
        match self {
            ServiceCurve::RateLatency(rl) => &rl.rate,
            ServiceCurve::Concave(c) => c.rate(),
        }
    }

    fn eval_closed(&self, t: &Rational) -> Rational {
        match self {
            ServiceCurve::RateLatency(rl) => &rl.rate * (t - &rl.latency).positive_part(),
            ServiceCurve::Concave(c) => c.eval_closed(t),
        }
    }

    /// Right-limit of the lower pseudo-inverse at `y`. A nonzero arrival
    /// curve is positive on `t > 0`, so demand `y = 0` at `t = 0⁺` still
    /// waits out the latency.
    fn pseudo_inverse_right(&self, y: &Rational) -> Bound {
        match self {
            ServiceCurve::RateLatency(rl) => Bound::Finite(&rl.latency + y / &rl.rate),
            ServiceCurve::Concave(c) => c.lower_pseudo_inverse(y),
        }
    }

    /// Breakpoint times and the service value there.
    fn breakpoints(&self) -> Vec<(Rational, Rational)> {
        match self {
            ServiceCurve::RateLatency(rl) => vec![(rl.latency.clone(), Rational::zero())],
            ServiceCurve::Concave(c) => c
                .breakpoints()
                .into_iter()
                .map(|t| {
                    let v = c.eval_closed(&t);
                    (t, v)
                })
                .collect(),
        }
    }

    /// Largest value the service ever reaches, when finite.
    fn supremum(&self) -> Option<Rational> {
        match self {
            ServiceCurve::Concave(c) if c.rate().is_zero() => Some(c.segments()[c.segments().len() - 1].burst.clone()),
            _ => None,
        }
    }
}

impl From<RateLatency> for ServiceCurve {
    fn from(rl: RateLatency) -> Self {
        ServiceCurve::RateLatency(rl)
    }
}

impl From<ConcaveCurve> for ServiceCurve {
    fn from(c: ConcaveCurve) -> Self {
        ServiceCurve::Concave(c)
    }
}

fn arrival_supremum(alpha: &ConcaveCurve) -> Option<&Rational> {
    alpha.rate().is_zero().then(|| &alpha.segments()[alpha.segments().len() - 1].burst)
}

/// Maximal horizontal deviation between `alpha` and `beta`: the delay bound of
/// a FIFO server offering `beta` to traffic constrained by `alpha`.
pub fn h_dev(alpha: &ConcaveCurve, beta: &ServiceCurve) -> Bound {
    if alpha.is_zero() {
        return Bound::zero();
    }
    if alpha.rate() > beta.rate() {
        return Bound::Unbounded;
    }
    if let Some(sup_beta) = beta.supremum() {
        match arrival_supremum(alpha) {
            Some(sup_alpha) if *sup_alpha <= sup_beta => {}
            _ => return Bound::Unbounded,
        }
    }
    let mut candidates = vec![Rational::zero()];
    candidates.extend(alpha.breakpoints());
    for (_, level) in beta.breakpoints() {
        if let Bound::Finite(t) = alpha.lower_pseudo_inverse(&level) {
            candidates.push(t);
        }
    }
    let mut worst = Rational::zero();
    for t in &candidates {
        match beta.pseudo_inverse_right(&alpha.eval_closed(t)) {
            Bound::Finite(s) => worst = worst.max(s - t),
            Bound::Unbounded => return Bound::Unbounded,
        }
    }
    Bound::Finite(worst)
}

/// Maximal vertical deviation: the backlog bound.
pub fn v_dev(alpha: &ConcaveCurve, beta: &ServiceCurve) -> Bound {
    if alpha.rate() > beta.rate() {
        return Bound::Unbounded;
    }
    let mut candidates = vec![Rational::zero()];
    candidates.extend(alpha.breakpoints());
    candidates.extend(beta.breakpoints().into_iter().map(|(t, _)| t));
    let worst = candidates.iter().map(|t| alpha.eval_closed(t) - beta.eval_closed(t)).max().expect("nonempty");
    Bound::Finite(worst.positive_part())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};
    use proptest::prelude::*;

    fn tb(r: i64, b: i64) -> ConcaveCurve {
        ConcaveCurve::token_bucket(qi(r), qi(b))
    }

    fn curve(parts: &[(i64, i64)]) -> ConcaveCurve {
        ConcaveCurve::from_segments(parts.iter().map(|&(r, b)| TokenBucket::new(qi(r), qi(b)).unwrap()).collect())
            .unwrap()
    }

    fn rl(r: i64, t: i64) -> ServiceCurve {
        RateLatency::new(qi(r), qi(t)).unwrap().into()
    }

    fn grid(until: i64, steps_per_unit: i64) -> Vec<Rational> {
        (0..=until * steps_per_unit).map(|k| q(k, steps_per_unit)).collect()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(tb(1, 1).eval(&qi(3)).unwrap(), qi(4));
        assert_eq!(curve(&[(2, 4), (1, 8)]).eval(&qi(4)).unwrap(), qi(12));
        assert_eq!(curve(&[(2, 4), (1, 8)]).eval(&qi(0)).unwrap(), qi(0));
        assert!(tb(1, 1).eval(&qi(-1)).is_err());
    }

    #[test]
    fn add_examples() {
        assert_eq!(tb(1, 2).add(&tb(1, 2)), tb(2, 4));
        let a = curve(&[(2, 4), (1, 8)]);
        assert_eq!(a.add(&ConcaveCurve::zero()), a);
        let s = a.add(&tb(1, 1));
        assert_eq!(s.eval(&qi(4)).unwrap(), qi(17));
        for t in grid(12, 4).iter().skip(1) {
            assert_eq!(s.eval(t).unwrap(), a.eval(t).unwrap() + tb(1, 1).eval(t).unwrap());
        }
    }

    #[test]
    fn convolve_examples() {
        assert_eq!(tb(2, 4).convolve(&tb(1, 8)), curve(&[(2, 4), (1, 8)]));
        let a = curve(&[(3, 1), (1, 6)]);
        assert_eq!(a.convolve(&a), a);
        assert_eq!(tb(1, 1).convolve(&tb(2, 5)), tb(1, 1));
    }

    #[test]
    fn deconvolve_examples() {
        assert_eq!(tb(1, 1).deconvolve_delay(&qi(7)).unwrap(), tb(1, 8));
        let a = curve(&[(2, 4), (1, 8)]);
        assert_eq!(a.deconvolve_delay(&qi(0)).unwrap(), a);
        assert_eq!(a.deconvolve_delay(&qi(2)).unwrap(), curve(&[(2, 8), (1, 10)]));
        assert!(a.deconvolve_delay(&qi(-1)).is_err());
    }

    #[test]
    fn pseudo_inverse_examples() {
        assert_eq!(tb(1, 1).lower_pseudo_inverse(&qi(2)), Bound::Finite(qi(1)));
        assert_eq!(curve(&[(2, 4), (1, 8)]).lower_pseudo_inverse(&qi(0)), Bound::zero());
        assert_eq!(curve(&[(2, 4), (1, 8)]).lower_pseudo_inverse(&qi(12)), Bound::Finite(qi(4)));
        assert_eq!(tb(0, 3).lower_pseudo_inverse(&qi(4)), Bound::Unbounded);
        assert_eq!(tb(0, 3).lower_pseudo_inverse(&qi(3)), Bound::zero());
    }

    #[test]
    fn h_dev_examples() {
        assert_eq!(h_dev(&tb(1, 8), &tb(1, 1).into()), Bound::Finite(qi(7)));
        assert_eq!(h_dev(&tb(1, 1), &tb(1, 1).into()), Bound::zero());
        assert_eq!(h_dev(&curve(&[(2, 4), (1, 8)]), &rl(4, 1)), Bound::Finite(qi(2)));
        assert_eq!(h_dev(&tb(2, 1), &rl(1, 0)), Bound::Unbounded);
        assert_eq!(h_dev(&ConcaveCurve::zero(), &rl(1, 5)), Bound::zero());
    }

    #[test]
    fn v_dev_examples() {
        assert_eq!(v_dev(&tb(1, 8), &rl(1, 0)), Bound::Finite(qi(8)));
        assert_eq!(v_dev(&tb(1, 1), &tb(1, 1).into()), Bound::zero());
        assert_eq!(v_dev(&tb(2, 4), &rl(2, 1)), Bound::Finite(qi(6)));
        assert_eq!(v_dev(&tb(3, 4), &rl(2, 1)), Bound::Unbounded);
    }

    #[test]
    fn normalization_drops_segments_touching_at_a_point() {
        // γ(3/2, 6) meets the envelope of γ(2,4) and γ(1,8) only at t = 4.
        let c = ConcaveCurve::from_segments(vec![
            TokenBucket::new(qi(2), qi(4)).unwrap(),
            TokenBucket::new(qi(1), qi(8)).unwrap(),
            TokenBucket::new(q(3, 2), qi(6)).unwrap(),
        ])
        .unwrap();
        assert_eq!(c, curve(&[(2, 4), (1, 8)]));
        assert_eq!(c.breakpoints(), vec![qi(4)]);
    }

    #[test]
    fn json_round_trip() {
        let c = curve(&[(2, 4), (1, 8)]);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(text, r#"{"segments":[{"rate":"2","burst":"4"},{"rate":"1","burst":"8"}]}"#);
        let back: ConcaveCurve = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let s: ServiceCurve = serde_json::from_str(r#"{"rate":"4","latency":"1/2"}"#).unwrap();
        assert_eq!(s, RateLatency::new(qi(4), q(1, 2)).unwrap().into());
        assert!(serde_json::from_str::<ConcaveCurve>(r#"{"segments":[]}"#).is_err());
        assert!(serde_json::from_str::<ConcaveCurve>(r#"{"segments":[{"rate":"-1","burst":"1"}]}"#).is_err());
    }

    fn arb_curve() -> impl Strategy<Value = ConcaveCurve> {
        prop::collection::vec((0i64..12, 1i64..4, 0i64..20, 1i64..4), 1..5).prop_map(|parts| {
            ConcaveCurve::from_segments(
                parts.into_iter().map(|(r, rd, b, bd)| TokenBucket::new(q(r, rd), q(b, bd)).unwrap()).collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(c in arb_curve()) {
            let again = ConcaveCurve::from_segments(c.segments().to_vec()).unwrap();
            prop_assert_eq!(again, c);
        }

        #[test]
        fn canonical_form_is_strictly_monotone(c in arb_curve()) {
            for w in c.segments().windows(2) {
                prop_assert!(w[0].rate > w[1].rate);
                prop_assert!(w[0].burst < w[1].burst);
            }
            let bps = c.breakpoints();
            for w in bps.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
        }

        #[test]
        fn add_and_convolve_commute_and_associate(a in arb_curve(), b in arb_curve(), c in arb_curve()) {
            prop_assert_eq!(a.add(&b), b.add(&a));
            prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
            prop_assert_eq!(a.convolve(&b), b.convolve(&a));
            prop_assert_eq!(a.convolve(&b).convolve(&c), a.convolve(&b.convolve(&c)));
        }

        #[test]
        fn add_is_pointwise(a in arb_curve(), b in arb_curve()) {
            let s = a.add(&b);
            for t in grid(10, 3) {
                prop_assert_eq!(s.eval(&t).unwrap(), a.eval(&t).unwrap() + b.eval(&t).unwrap());
            }
        }

        #[test]
        fn h_dev_is_sound_and_tight(a in arb_curve(), r in 1i64..30, lat in 0i64..4) {
            let beta = rl(r, lat);
            match h_dev(&a, &beta) {
                Bound::Finite(h) => {
                    let mut ts = grid(60, 4);
                    ts.extend(a.breakpoints());
                    ts.push(q(1, 10_000));
                    for t in &ts {
                        prop_assert!(a.eval_closed(t) <= beta.eval_closed(&(t + &h)));
                    }
                    if h.is_positive() {
                        let shorter = &h - q(1, 100);
                        prop_assert!(ts.iter().any(|t| a.eval_closed(t) > beta.eval_closed(&(t + &shorter))));
                    }
                }
                Bound::Unbounded => prop_assert!(a.rate() > &qi(r)),
            }
        }

        #[test]
        fn v_dev_is_sound_and_attained(a in arb_curve(), r in 1i64..30, lat in 0i64..4) {
            let beta = rl(r, lat);
            if let Bound::Finite(v) = v_dev(&a, &beta) {
                let mut ts = grid(60, 4);
                ts.extend(a.breakpoints());
                ts.push(qi(lat));
                let gaps: Vec<Rational> = ts.iter().map(|t| a.eval_closed(t) - beta.eval_closed(t)).collect();
                prop_assert!(gaps.iter().all(|g| *g <= v));
                prop_assert!(v.is_zero() || gaps.contains(&v));
            }
        }
    }
}
