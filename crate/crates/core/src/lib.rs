pub mod abe;
pub mod crypto;
pub mod group;
pub mod ibbe;
pub mod metrics;
pub mod protocol;
pub mod trust;
pub mod wire;

pub type TrustFactors = trust::TrustFactors<f64>;
pub type TrustFactorsF32 = trust::TrustFactors<f32>;
pub type ScoringWeights = trust::ScoringWeights<f64>;
pub type ScoringWeightsF32 = trust::ScoringWeights<f32>;
pub type TrustScore = trust::TrustScore<f64>;
pub type TrustScoreF32 = trust::TrustScore<f32>;
pub type TrustEvent = trust::TrustEvent<f64>;
pub type TrustEventF32 = trust::TrustEvent<f32>;
pub type PenaltySchedule = trust::PenaltySchedule<f64>;
pub type PenaltyScheduleF32 = trust::PenaltySchedule<f32>;
pub type TrustPolicy = trust::TrustPolicy<f64>;
pub type TrustPolicyF32 = trust::TrustPolicy<f32>;
pub type EntityTrustRecord = trust::EntityTrustRecord<f64>;
pub type EntityTrustRecordF32 = trust::EntityTrustRecord<f32>;
