use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClaimLabel2, VeracityLabel3};

/// Deterministic sub-claim to claim aggregation, an alternative to letting
/// the claim-level model aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationRule {
    /// T iff every sub-claim is T.
    Conjunctive,
    /// Majority of the non-U labels.
    Majority,
    /// F if any sub-claim is F, else T if any is T.
    AnyFalse,
}

impl AggregationRule {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregationRule::Conjunctive => "conjunctive",
            AggregationRule::Majority => "majority",
            AggregationRule::AnyFalse => "any_false",
        }
    }
}

impl std::str::FromStr for AggregationRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conjunctive" => Ok(Self::Conjunctive),
            "majority" => Ok(Self::Majority),
            "any_false" | "any-false" => Ok(Self::AnyFalse),
            _ => Err(format!("unknown aggregation rule {s:?} (conjunctive, majority, any_false)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("no sub-claim labels to aggregate")]
    Empty,
    #[error("every sub-claim label is U")]
    AllUnverified,
    #[error("T and F are tied")]
    Tie,
}

pub fn rule_aggregate(predictions: &[VeracityLabel3], rule: AggregationRule) -> Result<ClaimLabel2, AggregateError> {
    use VeracityLabel3::*;
    if predictions.is_empty() {
        return Err(AggregateError::Empty);
    }
    let t = predictions.iter().filter(|&&l| l == T).count();
    let f = predictions.iter().filter(|&&l| l == F).count();
    match rule {
        AggregationRule::Conjunctive => Ok(if t == predictions.len() { ClaimLabel2::T } else { ClaimLabel2::F }),
        AggregationRule::AnyFalse if f > 0 => Ok(ClaimLabel2::F),
        AggregationRule::AnyFalse if t > 0 => Ok(ClaimLabel2::T),
        AggregationRule::AnyFalse => Err(AggregateError::AllUnverified),
        AggregationRule::Majority if t + f == 0 => Err(AggregateError::AllUnverified),
        AggregationRule::Majority => match t.cmp(&f) {
            std::cmp::Ordering::Greater => Ok(ClaimLabel2::T),
            std::cmp::Ordering::Less => Ok(ClaimLabel2::F),
            std::cmp::Ordering::Equal => Err(AggregateError::Tie),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use AggregationRule::*;
    use VeracityLabel3::*;

    #[test]
    fn examples() {
        assert_eq!(rule_aggregate(&[T, T, T], Conjunctive), Ok(ClaimLabel2::T));
        assert_eq!(rule_aggregate(&[T, U], Conjunctive), Ok(ClaimLabel2::F));
        assert_eq!(rule_aggregate(&[T, F, U], AnyFalse), Ok(ClaimLabel2::F));
        assert_eq!(rule_aggregate(&[T, U], AnyFalse), Ok(ClaimLabel2::T));
        assert_eq!(rule_aggregate(&[U, U], AnyFalse), Err(AggregateError::AllUnverified));
        assert_eq!(rule_aggregate(&[T, F], Majority), Err(AggregateError::Tie));
        assert_eq!(rule_aggregate(&[T, F, F, U, U, U], Majority), Ok(ClaimLabel2::F));
        assert_eq!(rule_aggregate(&[U], Majority), Err(AggregateError::AllUnverified));
        assert_eq!(rule_aggregate(&[], Conjunctive), Err(AggregateError::Empty));
    }

    #[test]
    fn parse_names() {
        for r in [Conjunctive, Majority, AnyFalse] {
            assert_eq!(r.as_str().parse::<AggregationRule>(), Ok(r));
        }
        assert!("all".parse::<AggregationRule>().is_err());
    }
}
