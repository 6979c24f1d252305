use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{ReleaseNoteSentence, ReviewSentence};

pub const DEFAULT_BIN_WIDTH: i64 = 20;

/// Days from the review to the release note. Negative when the review was
/// posted after the release.
pub fn time_interval(released_at: NaiveDate, posted_at: NaiveDate) -> i64 {
    (released_at - posted_at).num_days()
}

/// Dates of note and review sentences, for resolving pair intervals.
#[derive(Debug, Clone, Default)]
pub struct SentenceDates {
    notes: HashMap<String, NaiveDate>,
    reviews: HashMap<String, NaiveDate>,
}

impl SentenceDates {
    pub fn new<'a>(
        notes: impl IntoIterator<Item = &'a ReleaseNoteSentence>,
        reviews: impl IntoIterator<Item = &'a ReviewSentence>,
    ) -> Self {
        SentenceDates {
            notes: notes.into_iter().map(|n| (n.sentence_id.clone(), n.released_at)).collect(),
            reviews: reviews.into_iter().map(|r| (r.sentence_id.clone(), r.posted_at)).collect(),
        }
    }

    pub fn interval(&self, rn_sentence_id: &str, ur_sentence_id: &str) -> Result<i64> {
        let rn = self
            .notes
            .get(rn_sentence_id)
            .ok_or_else(|| Error::MissingDate(rn_sentence_id.to_string()))?;
        let ur = self
            .reviews
            .get(ur_sentence_id)
            .ok_or_else(|| Error::MissingDate(ur_sentence_id.to_string()))?;
        Ok(time_interval(*rn, *ur))
    }
}

/// Returns `(t_before_avg, t_after_avg)`: the mean of `-d` over negative
/// deltas and the mean of `d` over positive ones, each 0 when there are none.
/// Same-day pairs count toward neither.
pub fn interval_averages(deltas: &[i64]) -> (f64, f64) {
    let mean = |xs: Vec<i64>| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<i64>() as f64 / xs.len() as f64
        }
    };
    let before = mean(deltas.iter().filter(|&&d| d < 0).map(|d| -d).collect());
    let after = mean(deltas.iter().filter(|&&d| d > 0).copied().collect());
    (before, after)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bin {
    pub start: i64,
    pub count: usize,
}

/// Counts in bins `[k*w, (k+1)*w)` from the lowest to the highest occupied
/// bin, including empty bins in between.
pub fn interval_histogram(deltas: &[i64], bin_width: i64) -> Result<Vec<Bin>> {
    if bin_width < 1 {
        return Err(Error::InvalidConfig("bin width must be at least 1".into()));
    }
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for d in deltas {
        *counts.entry(d.div_euclid(bin_width)).or_default() += 1;
    }
    let (Some(&lo), Some(&hi)) = (counts.keys().next(), counts.keys().next_back()) else {
        return Ok(Vec::new());
    };
    Ok((lo..=hi)
        .map(|k| Bin {
            start: k * bin_width,
            count: counts.get(&k).copied().unwrap_or(0),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub deltas: Vec<i64>,
    pub t_before_avg: f64,
    pub t_after_avg: f64,
    pub histogram: Vec<Bin>,
}

impl IntervalStats {
    pub fn from_deltas(deltas: Vec<i64>, bin_width: i64) -> Result<Self> {
        let (t_before_avg, t_after_avg) = interval_averages(&deltas);
        let histogram = interval_histogram(&deltas, bin_width)?;
        Ok(IntervalStats {
            deltas,
            t_before_avg,
            t_after_avg,
            histogram,
        })
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn interval_fixtures() {
        assert_eq!(time_interval(d("2019-03-10"), d("2019-03-01")), 9);
        assert_eq!(time_interval(d("2018-01-01"), d("2019-01-01")), -365);
        assert_eq!(time_interval(d("2020-02-29"), d("2020-02-29")), 0);
    }

    #[test]
    fn averages() {
        assert_eq!(interval_averages(&[-10, -20, 30]), (15.0, 30.0));
        assert_eq!(interval_averages(&[1, 2, 3]).0, 0.0);
        assert_eq!(interval_averages(&[0, 0]), (0.0, 0.0));
        assert_eq!(interval_averages(&[0, -4, 6]), (4.0, 6.0));
    }

    #[test]
    fn histogram_fixtures() {
        let h = interval_histogram(&[-5, -1, 3], 20).unwrap();
        assert_eq!(h, vec![Bin { start: -20, count: 2 }, Bin { start: 0, count: 1 }]);
        assert!(interval_histogram(&[], 20).unwrap().is_empty());
        assert_eq!(interval_histogram(&[1398], 20).unwrap(), vec![Bin { start: 1380, count: 1 }]);
        assert_eq!(interval_histogram(&[-20, 19, 20], 20).unwrap().len(), 3);
        assert_eq!(interval_histogram(&[0, 45], 20).unwrap()[1], Bin { start: 20, count: 0 });
        assert!(interval_histogram(&[1], 0).is_err());
    }

    #[test]
    fn missing_dates() {
        let dates = SentenceDates::default();
        assert!(matches!(dates.interval("n#0", "r#0"), Err(Error::MissingDate(_))));
    }

    proptest! {
        #[test]
        fn histogram_conserves_counts(deltas in prop::collection::vec(-2000i64..2000, 0..200), w in 1i64..50) {
            let h = interval_histogram(&deltas, w).unwrap();
            prop_assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), deltas.len());
            for pair in h.windows(2) {
                prop_assert_eq!(pair[1].start - pair[0].start, w);
            }
        }

        #[test]
        fn interval_antisymmetry(a in 0i64..20000, b in 0i64..20000) {
            let base = d("1990-01-01");
            let (x, y) = (base + chrono::Days::new(a as u64), base + chrono::Days::new(b as u64));
            prop_assert_eq!(time_interval(x, y), -time_interval(y, x));
        }

        #[test]
        fn averages_are_non_negative(deltas in prop::collection::vec(-2000i64..2000, 0..100)) {
            let (b, a) = interval_averages(&deltas);
            prop_assert!(b >= 0.0 && a >= 0.0);
        }
    }
}
