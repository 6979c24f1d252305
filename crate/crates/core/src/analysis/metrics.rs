use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::labels::{ConsensusLabel, PairLabel, Relevance, Role};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitCount {
    pub relevant: usize,
    pub total: usize,
}

impl HitCount {
    pub fn from_labels(labels: &[ConsensusLabel]) -> Self {
        HitCount {
            relevant: labels.iter().filter(|l| l.relevance == Relevance::Relevant).count(),
            total: labels.len(),
        }
    }

    pub fn ratio(&self) -> Result<f64> {
        if self.total == 0 {
            return Err(Error::UndefinedMetric("hit ratio"));
        }
        Ok(self.relevant as f64 / self.total as f64)
    }
}

/// Share of consensus-labeled pairs judged relevant.
pub fn hit_ratio(labels: &[ConsensusLabel]) -> Result<f64> {
    HitCount::from_labels(labels).ratio()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleShare {
    pub role: Role,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleDistribution {
    /// Relevant pairs carrying a role; the percentage denominator.
    pub relevant_with_role: usize,
    pub relevant_without_role: usize,
    pub shares: Vec<RoleShare>,
}

/// Count and percentage of each role among relevant pairs, in the
/// canonical role order.
pub fn role_distribution(labels: &[ConsensusLabel]) -> RoleDistribution {
    let mut counts: BTreeMap<Role, usize> = BTreeMap::new();
    let mut without = 0;
    for l in labels.iter().filter(|l| l.relevance == Relevance::Relevant) {
        match l.role {
            Some(r) => *counts.entry(r).or_default() += 1,
            None => without += 1,
        }
    }
    role_distribution_from_counts(&counts, without)
}

pub fn role_distribution_from_counts(counts: &BTreeMap<Role, usize>, without_role: usize) -> RoleDistribution {
    let denom: usize = counts.values().sum();
    let shares = Role::ALL
        .iter()
        .map(|&role| {
            let count = counts.get(&role).copied().unwrap_or(0);
            let percent = if denom == 0 { 0.0 } else { 100.0 * count as f64 / denom as f64 };
            RoleShare { role, count, percent }
        })
        .collect();
    RoleDistribution {
        relevant_with_role: denom,
        relevant_without_role: without_role,
        shares,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub percent_agreement: f64,
    pub cohen_kappa: f64,
    pub disagreements: Vec<String>,
}

/// Relevance-level agreement between two annotators over the same pairs.
pub fn agreement(a: &[PairLabel], b: &[PairLabel]) -> Result<Agreement> {
    let index = |ls: &[PairLabel]| -> Result<BTreeMap<String, Relevance>> {
        let mut m = BTreeMap::new();
        for l in ls {
            if m.insert(l.pair_id.clone(), l.relevance).is_some() {
                return Err(Error::DuplicateId(l.pair_id.clone()));
            }
        }
        Ok(m)
    };
    let (a, b) = (index(a)?, index(b)?);
    if a.keys().collect::<BTreeSet<_>>() != b.keys().collect::<BTreeSet<_>>() {
        return Err(Error::IdSetMismatch);
    }
    if a.is_empty() {
        return Err(Error::UndefinedMetric("agreement"));
    }
    let n = a.len() as f64;
    let mut agree = 0usize;
    let (mut a_rel, mut b_rel) = (0usize, 0usize);
    let mut disagreements = Vec::new();
    for (id, ra) in &a {
        let rb = b[id];
        if *ra == rb {
            agree += 1;
        } else {
            disagreements.push(id.clone());
        }
        a_rel += (*ra == Relevance::Relevant) as usize;
        b_rel += (rb == Relevance::Relevant) as usize;
    }
    let po = agree as f64 / n;
    let (pa, pb) = (a_rel as f64 / n, b_rel as f64 / n);
    let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
    // Both annotators used one category throughout: chance agreement is
    // total, and so is the observed agreement.
    let kappa = if (1.0 - pe).abs() < f64::EPSILON { 1.0 } else { (po - pe) / (1.0 - pe) };
    Ok(Agreement {
        percent_agreement: po,
        cohen_kappa: kappa,
        disagreements,
    })
}
