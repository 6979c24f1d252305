//! Semi-supervised multinomial Naive Bayes trained with EM, used to drop
//! review sentences that carry nothing actionable for developers.
//!
//! Parameters are MAP estimates under a symmetric Dirichlet prior, which
//! gives additive (Laplace) smoothing with `smoothing_alpha` on both class
//! priors and word likelihoods:
//!
//! ```text
//! prior[c]    = (alpha + N_c) / (alpha * C + N)
//! theta[c][w] = (alpha + n_cw) / (alpha * V + n_c)
//! ```
//!
//! where labeled documents contribute hard counts and unlabeled documents
//! contribute their current class posteriors. The objective traced across
//! iterations is the log posterior (up to a constant): the smoothing prior
//! terms, the joint log-likelihood of labeled documents and the marginal
//! log-likelihood of unlabeled documents. EM never decreases it.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::preprocess::{Normalizer, ReviewSentence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "informative")]
    Informative,
    #[serde(rename = "non-informative")]
    NonInformative,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Informative, Label::NonInformative];

    fn index(self) -> usize {
        match self {
            Label::Informative => 0,
            Label::NonInformative => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Label::Informative => "informative",
            Label::NonInformative => "non-informative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDoc {
    pub tokens: Vec<String>,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmnbConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub smoothing_alpha: f64,
}

impl Default for EmnbConfig {
    fn default() -> Self {
        EmnbConfig {
            max_iter: 50,
            tol: 1e-4,
            smoothing_alpha: 1.0,
        }
    }
}

/// Trained classifier. Class index 0 is informative, 1 non-informative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmnbModel {
    /// Lemma at each feature index.
    pub vocabulary: Vec<String>,
    pub classes: [Label; 2],
    pub class_priors: [f64; 2],
    pub word_likelihoods: [Vec<f64>; 2],
    pub em_iterations_run: usize,
    pub log_likelihood_trace: Vec<f64>,
    pub config: EmnbConfig,
    #[serde(skip)]
    index: HashMap<String, usize>,
    #[serde(skip)]
    log_priors: [f64; 2],
    #[serde(skip)]
    log_likelihoods: [Vec<f64>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub label: Label,
    /// Posterior probability of `label`.
    pub posterior: f64,
    /// Posterior of the informative class.
    pub p_informative: f64,
}

/// Sparse bag of words: (feature index, count).
type Bag = Vec<(usize, f64)>;

struct Params {
    priors: [f64; 2],
    likelihoods: [Vec<f64>; 2],
}

impl Params {
    fn logs(&self) -> ([f64; 2], [Vec<f64>; 2]) {
        (
            self.priors.map(f64::ln),
            [
                self.likelihoods[0].iter().map(|p| p.ln()).collect(),
                self.likelihoods[1].iter().map(|p| p.ln()).collect(),
            ],
        )
    }
}

fn bag(tokens: &[String], index: &HashMap<String, usize>) -> Bag {
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for t in tokens {
        if let Some(&i) = index.get(t) {
            *counts.entry(i).or_default() += 1.0;
        }
    }
    let mut b: Bag = counts.into_iter().collect();
    b.sort_by_key(|&(i, _)| i);
    b
}

fn joint_log(bag: &Bag, log_priors: &[f64; 2], log_lik: &[Vec<f64>; 2]) -> [f64; 2] {
    [0, 1].map(|c| log_priors[c] + bag.iter().map(|&(w, n)| n * log_lik[c][w]).sum::<f64>())
}

fn log_sum_exp(x: [f64; 2]) -> f64 {
    let m = x[0].max(x[1]);
    m + ((x[0] - m).exp() + (x[1] - m).exp()).ln()
}

fn posteriors(joint: [f64; 2]) -> [f64; 2] {
    let z = log_sum_exp(joint);
    let p0 = (joint[0] - z).exp();
    [p0, 1.0 - p0]
}

/// M-step over weighted documents.
fn estimate(docs: &[(&Bag, [f64; 2])], vocab: usize, alpha: f64) -> Params {
    let mut class_mass = [0.0; 2];
    let mut word_counts = [vec![0.0; vocab], vec![0.0; vocab]];
    for (bag, weights) in docs {
        for c in 0..2 {
            if weights[c] == 0.0 {
                continue;
            }
            class_mass[c] += weights[c];
            for &(w, n) in bag.iter() {
                word_counts[c][w] += weights[c] * n;
            }
        }
    }
    let total: f64 = class_mass.iter().sum();
    let priors = [0, 1].map(|c| (alpha + class_mass[c]) / (2.0 * alpha + total));
    let likelihoods = [0, 1].map(|c| {
        let n_c: f64 = word_counts[c].iter().sum();
        let denom = alpha * vocab as f64 + n_c;
        word_counts[c].iter().map(|n| (alpha + n) / denom).collect()
    });
    Params {
        priors,
        likelihoods,
    }
}

fn objective(labeled: &[(Bag, Label)], unlabeled: &[Bag], params: &Params, alpha: f64) -> f64 {
    let (lp, ll) = params.logs();
    let prior_term = alpha * (lp[0] + lp[1] + ll[0].iter().sum::<f64>() + ll[1].iter().sum::<f64>());
    let lab: f64 = labeled
        .iter()
        .map(|(b, y)| joint_log(b, &lp, &ll)[y.index()])
        .sum();
    let unl: f64 = unlabeled.iter().map(|b| log_sum_exp(joint_log(b, &lp, &ll))).sum();
    prior_term + lab + unl
}

/// Fit on labeled documents, then refine with EM over unlabeled ones.
pub fn train_emnb(labeled: &[LabeledDoc], unlabeled: &[Vec<String>], config: EmnbConfig) -> Result<EmnbModel> {
    if config.smoothing_alpha.is_nan() || config.smoothing_alpha <= 0.0 {
        return Err(Error::InvalidConfig("smoothing_alpha must be > 0".into()));
    }
    for class in Label::ALL {
        if !labeled.iter().any(|d| d.label == class) {
            return Err(Error::MissingClass(class.name()));
        }
    }
    let vocabulary: Vec<String> = labeled
        .iter()
        .flat_map(|d| d.tokens.iter())
        .chain(unlabeled.iter().flatten())
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocabulary.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let index: HashMap<String, usize> = vocabulary.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let v = vocabulary.len();
    let alpha = config.smoothing_alpha;

    let lab: Vec<(Bag, Label)> = labeled.iter().map(|d| (bag(&d.tokens, &index), d.label)).collect();
    let unl: Vec<Bag> = unlabeled.iter().map(|t| bag(t, &index)).collect();
    let hard: Vec<(&Bag, [f64; 2])> = lab
        .iter()
        .map(|(b, y)| {
            let mut w = [0.0; 2];
            w[y.index()] = 1.0;
            (b, w)
        })
        .collect();

    let mut params = estimate(&hard, v, alpha);
    let mut trace = vec![objective(&lab, &unl, &params, alpha)];
    let mut iterations = 0;
    if !unl.is_empty() {
        for it in 1..=config.max_iter {
            let (lp, ll) = params.logs();
            let mut weighted = hard.clone();
            weighted.extend(unl.iter().map(|b| (b, posteriors(joint_log(b, &lp, &ll)))));
            params = estimate(&weighted, v, alpha);
            let obj = objective(&lab, &unl, &params, alpha);
            let gain = obj - trace[trace.len() - 1];
            trace.push(obj);
            iterations = it;
            if gain < config.tol {
                break;
            }
        }
    }

    Ok(EmnbModel::from_parts(
        vocabulary,
        params.priors,
        params.likelihoods,
        iterations,
        trace,
        config,
    ))
}

impl EmnbModel {
    fn from_parts(
        vocabulary: Vec<String>,
        class_priors: [f64; 2],
        word_likelihoods: [Vec<f64>; 2],
        em_iterations_run: usize,
        log_likelihood_trace: Vec<f64>,
        config: EmnbConfig,
    ) -> Self {
        let mut m = EmnbModel {
            vocabulary,
            classes: Label::ALL,
            class_priors,
            word_likelihoods,
            em_iterations_run,
            log_likelihood_trace,
            config,
            index: HashMap::new(),
            log_priors: [0.0; 2],
            log_likelihoods: [Vec::new(), Vec::new()],
        };
        m.rebuild();
        m
    }

    fn rebuild(&mut self) {
        self.index = self.vocabulary.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let p = Params {
            priors: self.class_priors,
            likelihoods: self.word_likelihoods.clone(),
        };
        (self.log_priors, self.log_likelihoods) = p.logs();
    }

    pub fn classify(&self, tokens: &[String]) -> Classification {
        let b = bag(tokens, &self.index);
        let post = posteriors(joint_log(&b, &self.log_priors, &self.log_likelihoods));
        let label = if post[0] >= post[1] {
            Label::Informative
        } else {
            Label::NonInformative
        };
        Classification {
            label,
            posterior: post[label.index()],
            p_informative: post[0],
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut m: EmnbModel = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e))?;
        let v = m.vocabulary.len();
        if m.word_likelihoods.iter().any(|l| l.len() != v) {
            return Err(Error::InvalidInput("likelihood arrays do not match vocabulary".into()));
        }
        m.rebuild();
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write_bytes_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn classify(model: &EmnbModel, tokens: &[String]) -> Classification {
    model.classify(tokens)
}

/// Set the informative flag on every sentence and return the informative
/// subset.
pub fn filter_corpus(model: &EmnbModel, sentences: &mut [ReviewSentence]) -> Vec<ReviewSentence> {
    use rayon::prelude::*;
    sentences.par_iter_mut().for_each(|s| {
        let c = model.classify(&s.lemmas());
        s.informative = Some(c.label == Label::Informative);
    });
    sentences
        .iter()
        .filter(|s| s.informative == Some(true))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedLabel {
    pub text: String,
    pub label: Label,
}

pub const STARTER_SEED_LABELS: &str = include_str!("../data/seed_labels.jsonl");

/// Read seed labels and normalize them. Lines whose text normalizes to
/// nothing are dropped; the second value counts them.
pub fn read_seed_labels(reader: impl BufRead, path: &Path, normalizer: &Normalizer) -> Result<(Vec<LabeledDoc>, usize)> {
    let mut docs = Vec::new();
    let mut empty = 0;
    for (line, rec) in jsonl::parse_lines::<SeedLabel, _>(reader, path)? {
        let rec = rec.map_err(|m| Error::parse(line, m))?;
        let tokens: Vec<String> = normalizer.normalize(&rec.text).into_iter().map(|t| t.lemma).collect();
        if tokens.is_empty() {
            empty += 1;
            continue;
        }
        docs.push(LabeledDoc {
            tokens,
            label: rec.label,
        });
    }
    Ok((docs, empty))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn doc(words: &str, label: Label) -> LabeledDoc {
        LabeledDoc {
            tokens: words.split_whitespace().map(String::from).collect(),
            label,
        }
    }

    fn toks(words: &str) -> Vec<String> {
        words.split_whitespace().map(String::from).collect()
    }

    const A: Label = Label::Informative;
    const B: Label = Label::NonInformative;

    #[test]
    fn tiny_corpus_posterior_is_two_thirds() {
        // P(bug|A) = 2/6, P(bug|B) = 1/6, equal priors
        let m = train_emnb(&[doc("bug crash", A), doc("love great", B)], &[], EmnbConfig::default()).unwrap();
        let c = m.classify(&toks("bug"));
        assert_eq!(c.label, A);
        assert!((c.posterior - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_and_oov_docs_fall_back_to_prior() {
        let m = train_emnb(
            &[doc("bug crash", A), doc("bug", A), doc("love great", B)],
            &[],
            EmnbConfig::default(),
        )
        .unwrap();
        // prior A = (1 + 2) / (2 + 3)
        for t in [toks(""), toks("zzz qqq")] {
            let c = m.classify(&t);
            assert_eq!(c.label, A);
            assert!((c.posterior - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn labeled_doc_is_recovered() {
        let m = train_emnb(&[doc("bug crash", A), doc("love great", B)], &[], EmnbConfig::default()).unwrap();
        assert_eq!(m.classify(&toks("bug crash")).label, A);
        assert_eq!(m.classify(&toks("love great")).label, B);
    }

    #[test]
    fn em_pushes_crash_crash_to_a() {
        let labeled = [doc("bug crash", A), doc("love great", B)];
        let unlabeled: Vec<Vec<String>> = ["crash bug bug", "crash crash freeze", "freeze bug", "love love", "great nice", "nice love great"]
            .iter()
            .map(|s| toks(s))
            .collect();
        let m = train_emnb(&labeled, &unlabeled, EmnbConfig::default()).unwrap();
        let p = m.classify(&toks("crash crash")).p_informative;
        // hand-rolled EM reference in the acceptance suite pins this exactly
        assert!(p >= 0.9, "{p}");
    }

    #[test]
    fn max_iter_zero_is_labeled_init() {
        let labeled = [doc("bug crash", A), doc("love great", B)];
        let unlabeled = vec![toks("bug bug"), toks("great")];
        let cfg = EmnbConfig { max_iter: 0, ..Default::default() };
        let m = train_emnb(&labeled, &unlabeled, cfg).unwrap();
        let init = train_emnb(&labeled, &[], EmnbConfig::default()).unwrap();
        assert_eq!(m.em_iterations_run, 0);
        // same vocabulary here since unlabeled words are all seen in labeled docs
        assert_eq!(m.class_priors, init.class_priors);
        assert_eq!(m.word_likelihoods, init.word_likelihoods);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            train_emnb(&[doc("bug", A)], &[], EmnbConfig::default()),
            Err(Error::MissingClass("non-informative"))
        ));
        assert!(matches!(
            train_emnb(&[doc("", A), doc("", B)], &[], EmnbConfig::default()),
            Err(Error::EmptyVocabulary)
        ));
        let cfg = EmnbConfig { smoothing_alpha: 0.0, ..Default::default() };
        assert!(matches!(train_emnb(&[doc("a", A), doc("b", B)], &[], cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn filter_flags_every_sentence() {
        let m = train_emnb(&[doc("crash", A), doc("love", B)], &[], EmnbConfig::default()).unwrap();
        let n = Normalizer::bundled();
        let review = crate::corpus::UserReview {
            review_id: "r".into(),
            app_id: "a".into(),
            posted_at: "2020-01-01".parse().unwrap(),
            rating: None,
            title: None,
            body: "It will crash. Love it.".into(),
        };
        let mut s = crate::preprocess::split_review_sentences(&review, &n);
        let kept = filter_corpus(&m, &mut s);
        assert_eq!(s[0].informative, Some(true));
        assert_eq!(s[1].informative, Some(false));
        assert_eq!(kept.len(), 1);
        assert!(filter_corpus(&m, &mut []).is_empty());
    }

    #[test]
    fn json_round_trip() {
        let m = train_emnb(&[doc("bug crash", A), doc("love great", B)], &[toks("bug love")], EmnbConfig::default()).unwrap();
        let back = EmnbModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back.classify(&toks("crash")), m.classify(&toks("crash")));
        assert_eq!(back.vocabulary, m.vocabulary);
    }

    #[test]
    fn starter_seed_set_loads() {
        let n = Normalizer::bundled();
        let (docs, _) = read_seed_labels(STARTER_SEED_LABELS.as_bytes(), Path::new("seed"), &n).unwrap();
        assert!(docs.len() >= 190);
        assert!(docs.iter().any(|d| d.label == A) && docs.iter().any(|d| d.label == B));
    }

    fn arb_doc() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(proptest::sample::select(vec!["bug", "crash", "love", "great", "fix", "nice"]), 0..6)
            .prop_map(|v| v.into_iter().map(String::from).collect())
    }

    proptest! {
        #[test]
        fn normalized_distributions(unl in proptest::collection::vec(arb_doc(), 0..10)) {
            let m = train_emnb(&[doc("bug crash", A), doc("love great", B)], &unl, EmnbConfig::default()).unwrap();
            prop_assert!((m.class_priors.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for l in &m.word_likelihoods {
                prop_assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            for w in m.log_likelihood_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-6);
            }
        }

        #[test]
        fn bag_of_words(d in arb_doc()) {
            let m = train_emnb(&[doc("bug crash fix", A), doc("love great nice", B)], &[], EmnbConfig::default()).unwrap();
            let mut rev = d.clone();
            rev.reverse();
            let a = m.classify(&d);
            let b = m.classify(&rev);
            prop_assert!((a.p_informative - b.p_informative).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.posterior));
        }
    }
}
