//! Trust scoring, per-sensor Merkle tokens and the CSP-side evaluator.
//!
//! Scores are weighted sums of three factors on a 0–100 scale:
//! `TS = F1·SF1 + F2·SF2 + F3·SF3`. Everything numeric is generic over
//! [`Scalar`]; the crate root exports `f64` and `f32` aliases.

mod merkle;
mod record;

pub use merkle::{init_token, merkle_root, TrustMerkleTree, TrustToken, TOKEN_LEN};
pub use record::{
    csp_evaluate, csp_record_event, Decision, EntityTrustRecord, TrustEvaluator, TrustPolicy,
};

use std::fmt::{Debug, Display};

use num_traits::Float;
use thiserror::Error;

/// Floating-point type usable for trust arithmetic.
pub trait Scalar: Float + Debug + Display + Default + Send + Sync + 'static {}

impl<T: Float + Debug + Display + Default + Send + Sync + 'static> Scalar for T {}

fn lit<T: Scalar>(v: f64) -> T {
    T::from(v).expect("literal representable in every float type")
}

pub fn max_score<T: Scalar>() -> T {
    lit(100.0)
}

fn clamp<T: Scalar>(v: T) -> T {
    v.max(T::zero()).min(max_score())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrustError {
    #[error("device id is empty")]
    EmptyDeviceId,
    #[error("epoch {requested} does not advance past {current}")]
    NonMonotonicEpoch { current: u64, requested: u64 },
    #[error("scoring weights must be nonnegative and sum to 1")]
    InvalidWeights,
    #[error("event severity must lie in (0, 1]")]
    InvalidSeverity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Factor {
    Auth,
    Activity,
    UserReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustFactors<T> {
    pub f1_auth: T,
    pub f2_activity: T,
    pub f3_user_report: T,
}

impl<T: Scalar> TrustFactors<T> {
    /// Clamps each factor into [0, 100].
    pub fn new(f1_auth: T, f2_activity: T, f3_user_report: T) -> Self {
        Self {
            f1_auth: clamp(f1_auth),
            f2_activity: clamp(f2_activity),
            f3_user_report: clamp(f3_user_report),
        }
    }

    pub fn full() -> Self {
        Self::new(max_score(), max_score(), max_score())
    }

    pub fn get(&self, factor: Factor) -> T {
        match factor {
            Factor::Auth => self.f1_auth,
            Factor::Activity => self.f2_activity,
            Factor::UserReport => self.f3_user_report,
        }
    }

    fn get_mut(&mut self, factor: Factor) -> &mut T {
        match factor {
            Factor::Auth => &mut self.f1_auth,
            Factor::Activity => &mut self.f2_activity,
            Factor::UserReport => &mut self.f3_user_report,
        }
    }
}

impl<T: Scalar> Default for TrustFactors<T> {
    fn default() -> Self {
        Self::full()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringWeights<T> {
    sf1: T,
    sf2: T,
    sf3: T,
}

impl<T: Scalar> ScoringWeights<T> {
    pub fn new(sf1: T, sf2: T, sf3: T) -> Result<Self, TrustError> {
        let sum = sf1 + sf2 + sf3;
        let nonneg = [sf1, sf2, sf3].iter().all(|w| *w >= T::zero());
        if !nonneg || (sum - T::one()).abs() > lit(1e-6) {
            return Err(TrustError::InvalidWeights);
        }
        Ok(Self { sf1, sf2, sf3 })
    }

    pub fn sf1(&self) -> T {
        self.sf1
    }

    pub fn sf2(&self) -> T {
        self.sf2
    }

    pub fn sf3(&self) -> T {
        self.sf3
    }
}

impl<T: Scalar> Default for ScoringWeights<T> {
    fn default() -> Self {
        Self {
            sf1: lit(0.4),
            sf2: lit(0.4),
            sf3: lit(0.2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustScore<T> {
    pub value: T,
    pub epoch: u64,
}

/// Unclamped weighted sum.
pub fn weighted_sum<T: Scalar>(factors: &TrustFactors<T>, weights: &ScoringWeights<T>) -> T {
    factors.f1_auth * weights.sf1
        + factors.f2_activity * weights.sf2
        + factors.f3_user_report * weights.sf3
}

pub fn compute_score<T: Scalar>(factors: &TrustFactors<T>, weights: &ScoringWeights<T>) -> T {
    clamp(weighted_sum(factors, weights))
}

/// Inclusive: a score equal to the threshold is trusted.
pub fn is_trusted<T: Scalar>(score: T, threshold: T) -> bool {
    score >= threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    // Sensor-side, raised by the WNC.
    AuthFailure,
    UnauthorizedMessage,
    Inactivity,
    UserReport,
    // User/WNC-side, raised by the CSP.
    SignatureFailure,
    HmacFailure,
    MalformedRequest,
    ReportedAbuse,
}

impl EventKind {
    pub fn factor(self) -> Factor {
        match self {
            Self::AuthFailure
            | Self::UnauthorizedMessage
            | Self::SignatureFailure
            | Self::HmacFailure => Factor::Auth,
            Self::Inactivity | Self::MalformedRequest => Factor::Activity,
            Self::UserReport | Self::ReportedAbuse => Factor::UserReport,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::AuthFailure => "AuthFailure",
            Self::UnauthorizedMessage => "UnauthorizedMessage",
            Self::Inactivity => "Inactivity",
            Self::UserReport => "UserReport",
            Self::SignatureFailure => "SignatureFailure",
            Self::HmacFailure => "HmacFailure",
            Self::MalformedRequest => "MalformedRequest",
            Self::ReportedAbuse => "ReportedAbuse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustEvent<T> {
    pub kind: EventKind,
    pub severity: T,
    pub tick: u64,
}

impl<T: Scalar> TrustEvent<T> {
    pub fn new(kind: EventKind, tick: u64) -> Self {
        Self {
            kind,
            severity: T::one(),
            tick,
        }
    }

    pub fn with_severity(kind: EventKind, severity: T, tick: u64) -> Result<Self, TrustError> {
        if !(severity > T::zero() && severity <= T::one()) {
            return Err(TrustError::InvalidSeverity);
        }
        Ok(Self {
            kind,
            severity,
            tick,
        })
    }
}

/// Base decrement per factor, scaled by event severity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySchedule<T> {
    pub auth: T,
    pub activity: T,
    pub report: T,
}

impl<T: Scalar> PenaltySchedule<T> {
    pub fn amount(&self, event: &TrustEvent<T>) -> T {
        let base = match event.kind.factor() {
            Factor::Auth => self.auth,
            Factor::Activity => self.activity,
            Factor::UserReport => self.report,
        };
        base * event.severity
    }
}

impl<T: Scalar> Default for PenaltySchedule<T> {
    fn default() -> Self {
        Self {
            auth: lit(25.0),
            activity: lit(20.0),
            report: lit(50.0),
        }
    }
}

pub fn apply_penalty<T: Scalar>(
    factors: &TrustFactors<T>,
    event: &TrustEvent<T>,
    schedule: &PenaltySchedule<T>,
) -> TrustFactors<T> {
    let mut out = *factors;
    let slot = out.get_mut(event.kind.factor());
    *slot = clamp(*slot - schedule.amount(event));
    out
}

/// One line of the trust ledger dump.
pub fn ledger_line<T: Scalar>(
    entity: &str,
    factors: &TrustFactors<T>,
    score: T,
    epoch: u64,
    root: Option<&crate::crypto::HashDigest>,
) -> String {
    let root = root.map_or_else(|| "-".to_string(), |r| r.to_hex()[..16].to_string());
    format!(
        "{entity} f1={:.2} f2={:.2} f3={:.2} score={:.2} epoch={epoch} root={root}",
        factors.f1_auth, factors.f2_activity, factors.f3_user_report, score
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_examples() {
        let w = ScoringWeights::<f64>::default();
        assert_eq!(compute_score(&TrustFactors::full(), &w), 100.0);
        assert_eq!(compute_score(&TrustFactors::new(0.0, 0.0, 0.0), &w), 0.0);
        assert_eq!(
            compute_score(&TrustFactors::new(100.0, 100.0, 0.0), &w),
            80.0
        );
        assert_eq!(
            compute_score(&TrustFactors::<f32>::full(), &ScoringWeights::default()),
            100.0
        );
    }

    #[test]
    fn factors_clamp_and_weights_validate() {
        let f = TrustFactors::new(-5.0, 150.0, 50.0);
        assert_eq!(
            (f.f1_auth, f.f2_activity, f.f3_user_report),
            (0.0, 100.0, 50.0)
        );
        assert_eq!(
            ScoringWeights::new(0.5, 0.5, 0.5),
            Err(TrustError::InvalidWeights)
        );
        assert_eq!(
            ScoringWeights::new(1.2, -0.1, -0.1),
            Err(TrustError::InvalidWeights)
        );
        assert!(ScoringWeights::new(0.2f64, 0.3, 0.5).is_ok());
    }

    #[test]
    fn penalties_hit_one_factor_and_clamp() {
        let s = PenaltySchedule::default();
        let w = ScoringWeights::default();
        let f = apply_penalty(
            &TrustFactors::full(),
            &TrustEvent::new(EventKind::AuthFailure, 0),
            &s,
        );
        assert_eq!(
            (f.f1_auth, f.f2_activity, f.f3_user_report),
            (75.0, 100.0, 100.0)
        );
        assert_eq!(compute_score(&f, &w), 90.0);

        let zero = TrustFactors::new(0.0, 100.0, 100.0);
        let again = apply_penalty(
            &zero,
            &TrustEvent::new(EventKind::UnauthorizedMessage, 0),
            &s,
        );
        assert_eq!(again, zero);

        let report = TrustEvent::with_severity(EventKind::UserReport, 0.5, 3).unwrap();
        assert_eq!(
            apply_penalty(&TrustFactors::full(), &report, &s).f3_user_report,
            75.0
        );
        assert_eq!(
            TrustEvent::<f64>::with_severity(EventKind::UserReport, 0.0, 0),
            Err(TrustError::InvalidSeverity)
        );
    }

    #[test]
    fn threshold_is_inclusive() {
        assert!(is_trusted(50.0, 50.0));
        assert!(!is_trusted(49.9, 50.0));
        assert!(is_trusted(100.0, 50.0));
    }

    #[test]
    fn every_kind_maps_to_one_factor() {
        use EventKind::*;
        let kinds = [
            AuthFailure,
            UnauthorizedMessage,
            Inactivity,
            UserReport,
            SignatureFailure,
            HmacFailure,
            MalformedRequest,
            ReportedAbuse,
        ];
        let s = PenaltySchedule::<f64>::default();
        for k in kinds {
            let f = apply_penalty(&TrustFactors::full(), &TrustEvent::new(k, 0), &s);
            let changed = [Factor::Auth, Factor::Activity, Factor::UserReport]
                .into_iter()
                .filter(|x| f.get(*x) != 100.0)
                .collect::<Vec<_>>();
            assert_eq!(changed, vec![k.factor()], "{}", k.name());
        }
    }

    #[test]
    fn ledger_line_format() {
        let f = TrustFactors::new(75.0, 100.0, 100.0);
        assert_eq!(
            ledger_line("w1", &f, 90.0, 2, None),
            "w1 f1=75.00 f2=100.00 f3=100.00 score=90.00 epoch=2 root=-"
        );
    }
}
