//! Classification metrics and the sub-claim error profile.
//!
//! Macro-F1 drops classes that occur neither in gold nor in predictions,
//! instead of scoring them 0. Bootstrap resamples of small test sets often
//! lose a class entirely, and scoring it 0 would make resampled deltas jump
//! between two modes. Absolute values therefore differ from the "score
//! absent classes 0" convention whenever a class is missing.

use std::fmt::Debug;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClaimLabel2, VeracityLabel3};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("gold has {gold} labels but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("no items to score")]
    Empty,
    #[error("label {0} is not in the class set")]
    OutOfSet(String),
    #[error("no gold-verifiable (T/F) items; conditional rates are undefined")]
    NoVerifiableGold,
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
}

fn check_lengths<L>(gold: &[L], pred: &[L]) -> Result<(), MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// `counts[g][p]` = number of items with gold class `classes[g]` predicted as
/// `classes[p]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix<L> {
    pub classes: Vec<L>,
    pub counts: Vec<Vec<u64>>,
}

impl<L: Copy + PartialEq> ConfusionMatrix<L> {
    fn index(&self, label: L) -> Option<usize> {
        self.classes.iter().position(|&c| c == label)
    }

    pub fn get(&self, gold: L, pred: L) -> u64 {
        match (self.index(gold), self.index(pred)) {
            (Some(g), Some(p)) => self.counts[g][p],
            _ => 0,
        }
    }

    pub fn gold_count(&self, label: L) -> u64 {
        self.index(label).map_or(0, |g| self.counts[g].iter().sum())
    }

    pub fn pred_count(&self, label: L) -> u64 {
        self.index(label).map_or(0, |p| self.counts.iter().map(|row| row[p]).sum())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion_matrix<L: Copy + PartialEq + Debug>(
    gold: &[L],
    pred: &[L],
    class_set: &[L],
) -> Result<ConfusionMatrix<L>, MetricError> {
    check_lengths(gold, pred)?;
    let index = |l: L| {
        class_set
            .iter()
            .position(|&c| c == l)
            .ok_or_else(|| MetricError::OutOfSet(format!("{l:?}")))
    };
    let mut counts = vec![vec![0u64; class_set.len()]; class_set.len()];
    for (&g, &p) in gold.iter().zip(pred) {
        counts[index(g)?][index(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: class_set.to_vec(),
        counts,
    })
}

/// Unweighted mean of per-class F1 over `class_set`, skipping classes absent
/// from both gold and predictions.
pub fn macro_f1<L: Copy + PartialEq + Debug>(gold: &[L], pred: &[L], class_set: &[L]) -> Result<f64, MetricError> {
    let cm = confusion_matrix(gold, pred, class_set)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for &c in class_set {
        let (g, p) = (cm.gold_count(c), cm.pred_count(c));
        if g == 0 && p == 0 {
            continue;
        }
        // 2PR/(P+R) = 2tp/(g+p); both zero cases give 0
        let tp = cm.get(c, c);
        sum += 2.0 * tp as f64 / (g + p) as f64;
        n += 1;
    }
    Ok(sum / n as f64)
}

/// Mean recall over the classes present in gold.
pub fn balanced_accuracy<L: Copy + Ord + Debug>(gold: &[L], pred: &[L]) -> Result<f64, MetricError> {
    check_lengths(gold, pred)?;
    let mut classes: Vec<L> = gold.to_vec();
    classes.sort();
    classes.dedup();
    let mut sum = 0.0;
    for &c in &classes {
        let support = gold.iter().filter(|&&g| g == c).count();
        let hit = gold.iter().zip(pred).filter(|(&g, &p)| g == c && p == c).count();
        sum += hit as f64 / support as f64;
    }
    Ok(sum / classes.len() as f64)
}

pub fn accuracy<L: PartialEq>(gold: &[L], pred: &[L]) -> Result<f64, MetricError> {
    check_lengths(gold, pred)?;
    let hit = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    Ok(hit as f64 / gold.len() as f64)
}

/// Claim-level scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MacroF1,
    BalancedAccuracy,
    Accuracy,
}

impl Metric {
    pub fn compute(self, gold: &[ClaimLabel2], pred: &[ClaimLabel2]) -> Result<f64, MetricError> {
        match self {
            Metric::MacroF1 => macro_f1(gold, pred, &[ClaimLabel2::T, ClaimLabel2::F]),
            Metric::BalancedAccuracy => balanced_accuracy(gold, pred),
            Metric::Accuracy => accuracy(gold, pred),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::MacroF1 => "macro_f1",
            Metric::BalancedAccuracy => "balanced_accuracy",
            Metric::Accuracy => "accuracy",
        }
    }
}

/// Sub-claim prediction profile. Percentages are over all items; the `_v`
/// rates and `cov_ver` are over gold-verifiable (T/F) items. `None` marks a
/// rate whose denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub n: usize,
    pub pct_t: f64,
    pub pct_f: f64,
    pub pct_u: f64,
    /// Recall of F.
    pub r_f: Option<f64>,
    /// Precision of F.
    pub p_f: Option<f64>,
    /// Share of gold-verifiable items predicted T or F.
    pub cov_ver: f64,
    /// Accuracy on gold-verifiable items, abstentions counted wrong.
    pub acc_v_strict: f64,
    /// Accuracy on gold-verifiable items the predictor committed on.
    pub acc_v_commit: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn error_profile(gold: &[VeracityLabel3], pred: &[VeracityLabel3]) -> Result<ErrorProfile, MetricError> {
    use VeracityLabel3::*;
    check_lengths(gold, pred)?;
    let n = gold.len();
    let count = |l| pred.iter().filter(|&&p| p == l).count();
    let (nt, nf) = (count(T), count(F));
    let nu = n - nt - nf;

    let gold_f = gold.iter().filter(|&&g| g == F).count();
    let tp_f = gold.iter().zip(pred).filter(|(&g, &p)| g == F && p == F).count();

    let verifiable: Vec<(VeracityLabel3, VeracityLabel3)> =
        gold.iter().zip(pred).filter(|(g, _)| g.is_verifiable()).map(|(&g, &p)| (g, p)).collect();
    if verifiable.is_empty() {
        return Err(MetricError::NoVerifiableGold);
    }
    let committed = verifiable.iter().filter(|(_, p)| p.is_verifiable()).count();
    let correct = verifiable.iter().filter(|(g, p)| g == p).count();

    let cov_ver = committed as f64 / verifiable.len() as f64;
    let acc_v_commit = ratio(correct, committed);
    // strict is defined through the product so the identity holds bit-for-bit
    let acc_v_strict = acc_v_commit.map_or(0.0, |c| c * cov_ver);

    let pct = |k: usize| 100.0 * k as f64 / n as f64;
    Ok(ErrorProfile {
        n,
        pct_t: pct(nt),
        pct_f: pct(nf),
        pct_u: pct(nu),
        r_f: ratio(tp_f, gold_f),
        p_f: ratio(tp_f, nf),
        cov_ver,
        acc_v_strict,
        acc_v_commit,
    })
}

/// Arithmetic mean and sample standard deviation (n − 1 denominator).
pub fn seed_mean_std(values: &[f64]) -> Result<(f64, f64), MetricError> {
    if values.len() < 2 {
        return Err(MetricError::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClaimLabel2 as C;
    use VeracityLabel3::*;

    const TF: [C; 2] = [C::T, C::F];

    #[test]
    fn macro_f1_examples() {
        assert_eq!(macro_f1(&[C::T, C::T, C::F, C::F], &[C::T, C::T, C::F, C::F], &TF).unwrap(), 1.0);
        assert_eq!(macro_f1(&[C::T, C::F], &[C::F, C::T], &TF).unwrap(), 0.0);
        let v = macro_f1(&[C::T, C::T, C::F], &[C::T, C::F, C::F], &TF).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn macro_f1_drops_absent_classes() {
        // U never appears: mean over T and F only
        assert_eq!(macro_f1(&[T, F], &[T, F], &VeracityLabel3::ALL).unwrap(), 1.0);
        // U predicted but never gold: kept with F1 0
        let v = macro_f1(&[T, T], &[T, U], &VeracityLabel3::ALL).unwrap();
        assert!((v - (2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert_eq!(
            macro_f1(&[C::T], &[C::T, C::F], &TF),
            Err(MetricError::LengthMismatch { gold: 1, pred: 2 })
        );
        assert_eq!(accuracy::<C>(&[], &[]), Err(MetricError::Empty));
        assert!(matches!(macro_f1(&[U], &[T], &[T, F]), Err(MetricError::OutOfSet(_))));
    }

    #[test]
    fn balanced_accuracy_examples() {
        assert_eq!(balanced_accuracy(&[C::T, C::F], &[C::T, C::F]).unwrap(), 1.0);
        let v = balanced_accuracy(&[C::T, C::T, C::T, C::F], &[C::T, C::T, C::F, C::F]).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(balanced_accuracy(&[C::T, C::F], &[C::T, C::T]).unwrap(), 0.5);
    }

    #[test]
    fn confusion_examples() {
        let cm = confusion_matrix(&[C::T], &[C::F], &TF).unwrap();
        assert_eq!(cm.counts, vec![vec![0, 1], vec![0, 0]]);
        let gold = [T, T, T, F, F, F, U, U, U];
        let pred = [T, F, U, F, F, T, U, U, T];
        let cm = confusion_matrix(&gold, &pred, &VeracityLabel3::ALL).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1, 1], vec![1, 2, 0], vec![1, 0, 2]]);
        for l in VeracityLabel3::ALL {
            assert_eq!(cm.gold_count(l), 3);
        }
        assert_eq!(cm.total(), 9);
    }

    #[test]
    fn profile_worked_example() {
        let p = error_profile(&[T, F, U, T, F], &[T, U, U, F, F]).unwrap();
        assert_eq!(p.pct_u, 40.0);
        assert_eq!(p.pct_f, 40.0);
        assert_eq!(p.pct_t, 20.0);
        assert_eq!(p.r_f, Some(0.5));
        assert_eq!(p.p_f, Some(0.5));
        assert_eq!(p.cov_ver, 0.75);
        assert!((p.acc_v_strict - 0.5).abs() < 1e-15);
        assert!((p.acc_v_commit.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn profile_all_abstain() {
        let p = error_profile(&[T, F, U], &[U, U, U]).unwrap();
        assert_eq!(p.cov_ver, 0.0);
        assert_eq!(p.acc_v_strict, 0.0);
        assert_eq!(p.acc_v_commit, None);
        assert_eq!(p.p_f, None);
        assert_eq!(p.r_f, Some(0.0));
    }

    #[test]
    fn profile_needs_verifiable_gold() {
        assert_eq!(error_profile(&[U, U], &[T, F]), Err(MetricError::NoVerifiableGold));
    }

    #[test]
    fn mean_std() {
        assert_eq!(seed_mean_std(&[0.5, 0.5, 0.5]).unwrap(), (0.5, 0.0));
        let (m, s) = seed_mean_std(&[0.0, 1.0]).unwrap();
        assert_eq!(m, 0.5);
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((seed_mean_std(&[0.56, 0.57, 0.565]).unwrap().0 - 0.565).abs() < 1e-12);
        assert_eq!(seed_mean_std(&[1.0]), Err(MetricError::TooFewValues { needed: 2, got: 1 }));
    }
}
