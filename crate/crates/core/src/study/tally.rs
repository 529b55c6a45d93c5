//! Vote counting and goodness-of-fit summary.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::arrange::{ScorerRole, Strategy, VariantKey};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::study::Ballot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantCount {
    pub scorer: ScorerRole,
    pub strategy: Strategy,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyResult {
    /// Always the four variants, in [`VariantKey::ALL`] order.
    pub counts: Vec<VariantCount>,
    pub total: u64,
}

impl TallyResult {
    pub fn from_counts(counts: [u64; 4]) -> Self {
        TallyResult {
            counts: VariantKey::ALL
                .iter()
                .zip(counts)
                .map(|(k, count)| VariantCount {
                    scorer: k.scorer,
                    strategy: k.strategy,
                    count,
                })
                .collect(),
            total: counts.iter().sum(),
        }
    }

    pub fn count(&self, key: VariantKey) -> u64 {
        self.counts
            .iter()
            .find(|c| c.scorer == key.scorer && c.strategy == key.strategy)
            .map_or(0, |c| c.count)
    }

    pub fn by_scorer(&self, role: ScorerRole) -> u64 {
        self.counts
            .iter()
            .filter(|c| c.scorer == role)
            .map(|c| c.count)
            .sum()
    }

    pub fn by_strategy(&self, strategy: Strategy) -> u64 {
        self.counts
            .iter()
            .filter(|c| c.strategy == strategy)
            .map(|c| c.count)
            .sum()
    }
}

/// Counts ballots per variant. All ballots must share one study.
pub fn tally(ballots: &[Ballot]) -> Result<TallyResult> {
    let mut counts = [0u64; 4];
    if let Some(first) = ballots.first() {
        for b in ballots {
            if b.study_id != first.study_id {
                return Err(Error::MixedStudy(
                    first.study_id.clone(),
                    b.study_id.clone(),
                ));
            }
            let k = VariantKey::ALL
                .iter()
                .position(|k| *k == b.resolved_variant)
                .expect("ALL lists every variant");
            counts[k] += 1;
        }
    }
    Ok(TallyResult::from_counts(counts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Proportion<T> {
    pub scorer: ScorerRole,
    pub strategy: Strategy,
    pub proportion: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Summary<T> {
    pub proportions: Vec<Proportion<T>>,
    pub aesthetic: u64,
    pub content: u64,
    pub center: u64,
    pub sequential: u64,
    /// Goodness of fit against equal preference, 3 degrees of freedom.
    pub chi_square: T,
    pub degrees_of_freedom: u32,
    pub p_value: T,
}

pub fn summarize<T: Scalar>(t: &TallyResult) -> Result<Summary<T>> {
    if t.total == 0 {
        return Err(Error::EmptyTally);
    }
    let total = T::from_u64(t.total).expect("count fits scalar");
    let expected = total / T::lit(4.0);
    let squared_dev = t.counts.iter().fold(T::zero(), |acc, c| {
        let d = T::from_u64(c.count).expect("count fits scalar") - expected;
        acc + d * d
    });
    let chi_square = squared_dev / expected;
    let dist = ChiSquared::new(3.0).expect("3 degrees of freedom");
    let p_value = T::lit(dist.sf(chi_square.to_f64().unwrap_or(f64::INFINITY)));
    Ok(Summary {
        proportions: t
            .counts
            .iter()
            .map(|c| Proportion {
                scorer: c.scorer,
                strategy: c.strategy,
                proportion: T::from_u64(c.count).expect("count fits scalar") / total,
            })
            .collect(),
        aesthetic: t.by_scorer(ScorerRole::Aesthetic),
        content: t.by_scorer(ScorerRole::Content),
        center: t.by_strategy(Strategy::CenterPriority),
        sequential: t.by_strategy(Strategy::Sequential),
        chi_square,
        degrees_of_freedom: 3,
        p_value,
    })
}
