//! CSP-side trust records for users and WNCs.

use super::{
    apply_penalty, compute_score, is_trusted, ledger_line, max_score, PenaltySchedule, Scalar,
    ScoringWeights, TrustEvent, TrustFactors,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Grant,
    Deny,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityTrustRecord<T> {
    pub id: String,
    pub factors: TrustFactors<T>,
    pub score: T,
    pub events: Vec<TrustEvent<T>>,
}

impl<T: Scalar> EntityTrustRecord<T> {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            factors: TrustFactors::full(),
            score: max_score(),
            events: Vec::new(),
        }
    }

    pub fn ledger_line(&self) -> String {
        ledger_line(
            &self.id,
            &self.factors,
            self.score,
            self.events.len() as u64,
            None,
        )
    }
}

/// Decides access from a record; swap implementations to change policy.
pub trait TrustEvaluator<T> {
    fn record(&self, record: &mut EntityTrustRecord<T>, event: TrustEvent<T>);
    fn evaluate(&self, record: &EntityTrustRecord<T>) -> Decision;
}

/// Weighted factor score against an inclusive threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustPolicy<T> {
    pub weights: ScoringWeights<T>,
    pub schedule: PenaltySchedule<T>,
    pub threshold: T,
}

impl<T: Scalar> Default for TrustPolicy<T> {
    fn default() -> Self {
        Self {
            weights: ScoringWeights::default(),
            schedule: PenaltySchedule::default(),
            threshold: T::from(50.0).unwrap(),
        }
    }
}

impl<T: Scalar> TrustEvaluator<T> for TrustPolicy<T> {
    fn record(&self, record: &mut EntityTrustRecord<T>, event: TrustEvent<T>) {
        record.factors = apply_penalty(&record.factors, &event, &self.schedule);
        record.score = compute_score(&record.factors, &self.weights);
        record.events.push(event);
    }

    fn evaluate(&self, record: &EntityTrustRecord<T>) -> Decision {
        if is_trusted(record.score, self.threshold) {
            Decision::Grant
        } else {
            Decision::Deny
        }
    }
}

pub fn csp_record_event<T, E: TrustEvaluator<T> + ?Sized>(
    evaluator: &E,
    record: &mut EntityTrustRecord<T>,
    event: TrustEvent<T>,
) {
    evaluator.record(record, event);
}

pub fn csp_evaluate<T, E: TrustEvaluator<T> + ?Sized>(
    evaluator: &E,
    record: &EntityTrustRecord<T>,
) -> Decision {
    evaluator.evaluate(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trust::EventKind;

    #[test]
    fn fresh_grant_penalised_deny_boundary_grant() {
        let policy = TrustPolicy::<f64>::default();
        let mut rec = EntityTrustRecord::new("alice");
        assert_eq!(csp_evaluate(&policy, &rec), Decision::Grant);

        // F1 to 0 and F2 to 80: 0 + 32 + 20 = 52, still granted.
        for t in 0..4 {
            csp_record_event(
                &policy,
                &mut rec,
                TrustEvent::new(EventKind::SignatureFailure, t),
            );
        }
        csp_record_event(
            &policy,
            &mut rec,
            TrustEvent::new(EventKind::MalformedRequest, 4),
        );
        assert_eq!(rec.score, 52.0);
        assert_eq!(csp_evaluate(&policy, &rec), Decision::Grant);
        csp_record_event(
            &policy,
            &mut rec,
            TrustEvent::new(EventKind::MalformedRequest, 5),
        );
        assert_eq!(rec.score, 44.0);
        assert_eq!(csp_evaluate(&policy, &rec), Decision::Deny);
        assert_eq!(rec.events.len(), 6);
    }

    #[test]
    fn exactly_at_threshold_is_granted() {
        let policy = TrustPolicy {
            threshold: 90.0,
            ..TrustPolicy::default()
        };
        let mut rec = EntityTrustRecord::new("wnc");
        csp_record_event(
            &policy,
            &mut rec,
            TrustEvent::new(EventKind::HmacFailure, 0),
        );
        assert_eq!(rec.score, 90.0);
        assert_eq!(csp_evaluate(&policy, &rec), Decision::Grant);
    }

    struct DenyAll;

    impl TrustEvaluator<f64> for DenyAll {
        fn record(&self, _: &mut EntityTrustRecord<f64>, _: TrustEvent<f64>) {}
        fn evaluate(&self, _: &EntityTrustRecord<f64>) -> Decision {
            Decision::Deny
        }
    }

    #[test]
    fn evaluator_is_pluggable() {
        let boxed: Box<dyn TrustEvaluator<f64>> = Box::new(DenyAll);
        let rec = EntityTrustRecord::new("bob");
        assert_eq!(csp_evaluate(boxed.as_ref(), &rec), Decision::Deny);
    }
}
