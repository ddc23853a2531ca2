use crate::error::{Error, Result};

pub const DEFAULT_TRIM: f64 = 0.1;
pub const DEFAULT_Q: f64 = 0.1;

/// How a list of K per-fold values is collapsed into one number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AggRule {
    Median,
    /// The max(1, ⌈qK⌉)-th smallest value, q ∈ [0, 0.5].
    Quantile(f64),
    Mean,
    /// Mean after dropping ⌊trim·K⌋ values from each end, trim ∈ [0, 0.5).
    TruncatedMean(f64),
}

impl AggRule {
    pub fn quantile(q: f64) -> Result<Self> {
        let rule = AggRule::Quantile(q);
        rule.validate()?;
        Ok(rule)
    }

    pub fn truncated_mean(trim: f64) -> Result<Self> {
        let rule = AggRule::TruncatedMean(trim);
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AggRule::Quantile(q) if !(0.0..=0.5).contains(&q) => {
                Err(Error::InvalidParameter(format!("quantile level must lie in [0, 0.5], got {q}")))
            }
            AggRule::TruncatedMean(t) if !(0.0..0.5).contains(&t) => {
                Err(Error::InvalidParameter(format!("trim fraction must lie in [0, 0.5), got {t}")))
            }
            _ => Ok(()),
        }
    }
}

/// 1-based rank of the q-th lower quantile among k values. The small
/// tolerance keeps products like 0.2·15 = 3.0000000000000004 from rounding
/// up to the next rank.
pub fn quantile_rank(q: f64, k: usize) -> usize {
    ((q * k as f64 - 1e-9).ceil().max(1.0) as usize).min(k)
}

pub fn aggregate(values: &[f64], rule: AggRule) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("nothing to aggregate"));
    }
    rule.validate()?;
    Ok(aggregate_unchecked(values, rule))
}

/// `aggregate` without validation; callers guarantee a nonempty list and a
/// valid rule.
pub(crate) fn aggregate_unchecked(values: &[f64], rule: AggRule) -> f64 {
    let k = values.len();
    match rule {
        AggRule::Mean => values.iter().sum::<f64>() / k as f64,
        _ => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            match rule {
                AggRule::Median => {
                    if k % 2 == 1 {
                        sorted[k / 2]
                    } else {
                        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
                    }
                }
                AggRule::Quantile(q) => sorted[quantile_rank(q, k) - 1],
                AggRule::TruncatedMean(trim) => {
                    let cut = (trim * k as f64).floor() as usize;
                    let kept = &sorted[cut..k - cut];
                    kept.iter().sum::<f64>() / kept.len() as f64
                }
                AggRule::Mean => unreachable!(),
            }
        }
    }
}

/// Pointwise aggregate of K equally long tables.
pub(crate) fn aggregate_tables(tables: &[Vec<f64>], rule: AggRule) -> Vec<f64> {
    let len = tables[0].len();
    let mut column = vec![0.0; tables.len()];
    (0..len)
        .map(|i| {
            for (c, t) in column.iter_mut().zip(tables) {
                *c = t[i];
            }
            aggregate_unchecked(&column, rule)
        })
        .collect()
}

/// The 1 − q lower confidence bound: 𝒬_q of the per-fold values.
pub fn value_lower_bound(fold_values: &[f64], q: f64) -> Result<f64> {
    aggregate(fold_values, AggRule::quantile(q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn median_of_odd_list() {
        assert_eq!(aggregate(&[5.5, 1.5, 3.5], AggRule::Median).unwrap(), 3.5);
    }

    #[test]
    fn median_of_even_list_averages_center() {
        assert_eq!(aggregate(&[4.0, 1.0, 3.0, 2.0], AggRule::Median).unwrap(), 2.5);
    }

    #[test]
    fn low_quantiles_pick_minimum() {
        let v: Vec<f64> = (0..10).map(|i| (i * 7 % 10) as f64).collect();
        assert_eq!(aggregate(&v, AggRule::Quantile(0.1)).unwrap(), 0.0);
        assert_eq!(aggregate(&v, AggRule::Quantile(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn quantile_rank_is_fp_safe() {
        assert_eq!(quantile_rank(0.2, 15), 3);
        assert_eq!(quantile_rank(0.1, 10), 1);
        assert_eq!(quantile_rank(0.5, 5), 3);
        assert_eq!(quantile_rank(0.1, 5), 1);
        assert_eq!(quantile_rank(0.3, 10), 3);
    }

    #[test]
    fn truncated_mean_trims_each_side() {
        let v = [100.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, -100.0];
        assert_eq!(aggregate(&v, AggRule::TruncatedMean(0.1)).unwrap(), 4.5);
        assert_eq!(aggregate(&v, AggRule::TruncatedMean(0.0)).unwrap(), 3.6);
    }

    #[test]
    fn lower_bound_examples() {
        assert_eq!(value_lower_bound(&[1.0, 2.0, 3.0], 0.5).unwrap(), 2.0);
        assert_eq!(value_lower_bound(&[3.0, 1.0, 2.0], 0.0).unwrap(), 1.0);
        assert!(value_lower_bound(&[], 0.1).is_err());
    }

    #[test]
    fn rejects_bad_rules() {
        assert!(aggregate(&[1.0], AggRule::Quantile(0.6)).is_err());
        assert!(aggregate(&[1.0], AggRule::TruncatedMean(0.5)).is_err());
        assert!(aggregate(&[], AggRule::Median).is_err());
    }

    fn rules() -> impl Strategy<Value = AggRule> {
        prop_oneof![
            Just(AggRule::Median),
            Just(AggRule::Mean),
            (0.0..=0.5f64).prop_map(AggRule::Quantile),
            (0.0..0.49f64).prop_map(AggRule::TruncatedMean),
        ]
    }

    proptest! {
        #[test]
        fn order_statistic_rules_ignore_input_order(mut v in prop::collection::vec(-1e3..1e3f64, 1..30), q in 0.0..=0.5f64) {
            let a = aggregate(&v, AggRule::Quantile(q)).unwrap();
            v.reverse();
            prop_assert_eq!(a, aggregate(&v, AggRule::Quantile(q)).unwrap());
        }

        #[test]
        fn aggregate_lies_within_range(v in prop::collection::vec(-1e3..1e3f64, 1..30), rule in rules()) {
            let x = aggregate(&v, rule).unwrap();
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(x >= lo - 1e-9 && x <= hi + 1e-9);
        }
    }
}
