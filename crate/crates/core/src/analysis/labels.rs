use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ADJUDICATOR: &str = "adjudicator";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relevance {
    Relevant,
    Irrelevant,
}

/// What the reviewer is doing relative to the release note.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    FeatureRequester,
    BugReporter,
    Complainer,
    Praiser,
    QualityIssueRaiser,
    Dispraiser,
    SubsequentFeatureRequester,
    Questioner,
}

impl Role {
    pub const ALL: [Role; 8] = [
        Role::FeatureRequester,
        Role::BugReporter,
        Role::Complainer,
        Role::Praiser,
        Role::QualityIssueRaiser,
        Role::Dispraiser,
        Role::SubsequentFeatureRequester,
        Role::Questioner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::FeatureRequester => "feature_requester",
            Role::BugReporter => "bug_reporter",
            Role::Complainer => "complainer",
            Role::Praiser => "praiser",
            Role::QualityIssueRaiser => "quality_issue_raiser",
            Role::Dispraiser => "dispraiser",
            Role::SubsequentFeatureRequester => "subsequent_feature_requester",
            Role::Questioner => "questioner",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown role `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLabel {
    pub pair_id: String,
    pub annotator: String,
    pub relevance: Relevance,
    pub role: Option<Role>,
    pub labeled_at: DateTime<Utc>,
}

impl PairLabel {
    pub fn validate(&self) -> Result<()> {
        if self.role.is_some() && self.relevance != Relevance::Relevant {
            return Err(Error::InvalidInput("a role requires relevance `relevant`".into()));
        }
        if self.pair_id.is_empty() || self.annotator.is_empty() {
            return Err(Error::InvalidInput("pair_id and annotator must be non-empty".into()));
        }
        Ok(())
    }
}

/// Reject invalid labels and repeated (pair, annotator) keys.
pub fn validate_labels(labels: &[PairLabel]) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        l.validate()?;
        if !seen.insert((l.pair_id.as_str(), l.annotator.as_str())) {
            return Err(Error::DuplicateId(format!("{}/{}", l.pair_id, l.annotator)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusLabel {
    pub pair_id: String,
    pub relevance: Relevance,
    pub role: Option<Role>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consensus {
    pub labels: Vec<ConsensusLabel>,
    /// Pairs where the annotators disagree or only one has labeled.
    pub unresolved: Vec<String>,
}

/// One label per pair: the adjudicator's if present, otherwise the shared
/// decision of at least two annotators who agree on relevance and role.
pub fn consensus(labels: &[PairLabel]) -> Consensus {
    let mut by_pair: BTreeMap<&str, Vec<&PairLabel>> = BTreeMap::new();
    for l in labels {
        by_pair.entry(l.pair_id.as_str()).or_default().push(l);
    }
    let mut out = Consensus::default();
    for (pair_id, ls) in by_pair {
        let decision = if let Some(adj) = ls.iter().find(|l| l.annotator == ADJUDICATOR) {
            Some((adj.relevance, adj.role))
        } else {
            let first = (ls[0].relevance, ls[0].role);
            (ls.len() >= 2 && ls.iter().all(|l| (l.relevance, l.role) == first)).then_some(first)
        };
        match decision {
            Some((relevance, role)) => out.labels.push(ConsensusLabel {
                pair_id: pair_id.to_string(),
                relevance,
                role,
            }),
            None => out.unresolved.push(pair_id.to_string()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn label(pair: &str, who: &str, rel: Relevance, role: Option<Role>) -> PairLabel {
        PairLabel {
            pair_id: pair.into(),
            annotator: who.into(),
            relevance: rel,
            role,
            labeled_at: DateTime::from_timestamp(1_700_000_000, 0).unwrap(),
        }
    }

    #[test]
    fn role_strings() {
        assert_eq!(Role::ALL.len(), 8);
        for r in Role::ALL {
            assert_eq!(r.as_str().parse::<Role>().unwrap(), r);
            assert_eq!(serde_json::to_string(&r).unwrap(), format!("\"{}\"", r.as_str()));
        }
        assert!("FEATURE_REQUESTER".parse::<Role>().is_err());
    }

    #[test]
    fn label_json_shape() {
        let l = label("p1", "a1", Relevance::Relevant, Some(Role::BugReporter));
        let json = serde_json::to_value(&l).unwrap();
        assert_eq!(json["relevance"], "relevant");
        assert_eq!(json["role"], "bug_reporter");
        assert_eq!(json["labeled_at"], "2023-11-14T22:13:20Z");
        let back: PairLabel = serde_json::from_value(json).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn role_requires_relevant() {
        let l = label("p1", "a1", Relevance::Irrelevant, Some(Role::Praiser));
        assert!(l.validate().is_err());
        let dup = vec![
            label("p1", "a1", Relevance::Relevant, None),
            label("p1", "a1", Relevance::Irrelevant, None),
        ];
        assert!(matches!(validate_labels(&dup), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn consensus_rules() {
        use Relevance::*;
        let labels = vec![
            label("agree", "a", Relevant, Some(Role::Praiser)),
            label("agree", "b", Relevant, Some(Role::Praiser)),
            label("split", "a", Relevant, None),
            label("split", "b", Irrelevant, None),
            label("judged", "a", Relevant, None),
            label("judged", "b", Irrelevant, None),
            label("judged", ADJUDICATOR, Irrelevant, None),
            label("single", "a", Relevant, None),
        ];
        let c = consensus(&labels);
        assert_eq!(c.unresolved, vec!["single".to_string(), "split".to_string()]);
        assert_eq!(c.labels.len(), 2);
        assert_eq!(c.labels[0].pair_id, "agree");
        assert_eq!(c.labels[0].role, Some(Role::Praiser));
        assert_eq!(c.labels[1].relevance, Irrelevant);
    }
}
