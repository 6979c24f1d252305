use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use rayon::prelude::*;
use revnote::analysis::{
    consensus, role_distribution, validate_labels, ConsensusLabel, HitCount, IntervalStats, PairLabel, Relevance,
    SentenceDates,
};
use revnote::corpus::{app_eligibility_report, Corpus};
use revnote::embedding::{
    encode_sentences, import_external_vectors, train_skipgram, write_vec1, PosWeights, VectorStore,
    WordEmbeddingModel, EXTERNAL_BACKEND, SKIPGRAM_BACKEND,
};
use revnote::filter::{filter_corpus, read_seed_labels, train_emnb, EmnbModel, STARTER_SEED_LABELS};
use revnote::jsonl;
use revnote::matcher::{pair_records, run_match, summarize, Backend, MatchSummary, PairRecord};
use revnote::postag::PosLexicon;
use revnote::preprocess::{
    dedup_note_sentences, preprocess_note, preprocess_review, sort_note_sentences, split_note_sentences,
    Normalizer, ReleaseNoteSentence, ReviewSentence,
};
use serde::Serialize;
use serde_json::json;

use crate::cli::{
    Cli, Command, EligibilityArgs, EmbedImportArgs, EmbedTrainArgs, ExportArgs, FilterTrainArgs, IngestArgs,
    LabelReportArgs, MatchArgs, PairScope, ReportCommand, ServeArgs, Table, TemporalArgs,
};
use crate::config::{validate_backends, PipelineConfig};
use crate::layout::DataDir;
use crate::server::{self, AppState};
use crate::user_error;

pub const ALL_APPS: &str = "all";

pub struct Context {
    pub config: PipelineConfig,
    pub data: DataDir,
}

impl Context {
    fn normalizer(&self) -> Normalizer<'static> {
        Normalizer::new(PosLexicon::bundled(), self.config.normalizer.clone())
    }
}

/// Merge the config file with global flags.
pub fn resolve(cli: &Cli) -> anyhow::Result<Context> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(dir) = &cli.data_dir {
        config.data_dir = dir.clone();
    }
    config.validate()?;
    let data = DataDir::new(config.data_dir.clone());
    Ok(Context { config, data })
}

pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let ctx = resolve(&cli)?;
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, &a, out),
        Command::Preprocess => preprocess(&ctx, out),
        Command::FilterTrain(a) => filter_train(&ctx, &a, out),
        Command::FilterApply => filter_apply(&ctx, out),
        Command::EmbedTrain(a) => embed_train(&ctx, &a, out),
        Command::EmbedImport(a) => embed_import(&ctx, &a, out),
        Command::Match(a) => match_pairs(&ctx, &a, out),
        Command::Report(ReportCommand::HitRatio(a)) => report_hit_ratio(&ctx, &a, out),
        Command::Report(ReportCommand::Roles(a)) => report_roles(&ctx, &a, out),
        Command::Report(ReportCommand::Temporal(a)) => report_temporal(&ctx, &a, out),
        Command::Report(ReportCommand::Eligibility(a)) => report_eligibility(&ctx, &a, out),
        Command::Serve(a) => serve(&ctx, &a),
        Command::Export(a) => export(&ctx, &a, out),
    }
}

fn print_json(out: &mut dyn Write, value: &impl Serialize) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn ingest(ctx: &Context, args: &IngestArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if args.apps.is_none() && args.notes.is_none() && args.reviews.is_none() {
        return Err(user_error("nothing to ingest: pass --apps, --notes or --reviews"));
    }
    let mut corpus = Corpus::open(ctx.data.root())?;
    let mut summary = BTreeMap::new();
    if let Some(p) = &args.apps {
        summary.insert("apps", corpus.ingest_apps(p)?);
    }
    let app = args.app.as_deref().unwrap_or_default();
    if let Some(p) = &args.notes {
        summary.insert("notes", corpus.ingest_release_notes(p, app)?);
    }
    if let Some(p) = &args.reviews {
        summary.insert("reviews", corpus.ingest_reviews(p, app)?);
    }
    print_json(out, &summary)
}

#[derive(Debug, Default, Serialize)]
struct PreprocessStats {
    notes: usize,
    note_sentences: usize,
    note_sentences_kept: usize,
    reviews: usize,
    review_sentences: usize,
}

fn preprocess(ctx: &Context, out: &mut dyn Write) -> anyhow::Result<()> {
    let corpus = Corpus::open(ctx.data.root())?;
    let lexicon = PosLexicon::bundled();
    let normalizer = ctx.normalizer();
    let mut stats: BTreeMap<String, PreprocessStats> = BTreeMap::new();
    let mut note_sentences = Vec::new();
    for app in corpus.app_ids() {
        let mut sentences: Vec<ReleaseNoteSentence> = corpus
            .notes_of(&app)
            .flat_map(|n| preprocess_note(n, &normalizer, lexicon))
            .collect();
        sort_note_sentences(&mut sentences);
        let sentences = dedup_note_sentences(sentences);
        let s = stats.entry(app.clone()).or_default();
        s.notes = corpus.notes_of(&app).count();
        s.note_sentences = sentences.len();
        s.note_sentences_kept = sentences.iter().filter(|x| x.kept).count();
        note_sentences.extend(sentences);
    }
    let review_sentences: Vec<ReviewSentence> = corpus
        .reviews()
        .par_iter()
        .flat_map_iter(|r| preprocess_review(r, &normalizer, lexicon))
        .collect();
    for r in corpus.reviews() {
        stats.entry(r.app_id.clone()).or_default().reviews += 1;
    }
    for s in &review_sentences {
        stats.entry(s.app_id.clone()).or_default().review_sentences += 1;
    }
    jsonl::write_atomic(&ctx.data.note_sentences(), &note_sentences)?;
    jsonl::write_atomic(&ctx.data.review_sentences(), &review_sentences)?;
    print_json(out, &stats)
}

fn filter_train(ctx: &Context, args: &FilterTrainArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let sentences = ctx.data.load_review_sentences()?;
    let normalizer = ctx.normalizer();
    let (labeled, empty) = match &args.seeds {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening seed labels {}", p.display()))?;
            read_seed_labels(BufReader::new(f), p, &normalizer)?
        }
        None => read_seed_labels(STARTER_SEED_LABELS.as_bytes(), Path::new("bundled seed labels"), &normalizer)?,
    };
    let unlabeled: Vec<Vec<String>> = sentences
        .iter()
        .map(ReviewSentence::lemmas)
        .filter(|l| !l.is_empty())
        .collect();
    let mut config = ctx.config.emnb;
    if let Some(m) = args.max_iter {
        config.max_iter = m;
    }
    let model = train_emnb(&labeled, &unlabeled, config)?;
    model.save(&ctx.data.filter_model())?;
    print_json(
        out,
        &json!({
            "labeled": labeled.len(),
            "seed_lines_without_tokens": empty,
            "unlabeled": unlabeled.len(),
            "vocabulary": model.vocabulary.len(),
            "em_iterations": model.em_iterations_run,
            "final_log_posterior": model.log_likelihood_trace.last(),
            "model": ctx.data.filter_model(),
        }),
    )
}

fn filter_apply(ctx: &Context, out: &mut dyn Write) -> anyhow::Result<()> {
    let path = ctx.data.filter_model();
    if !path.exists() {
        return Err(user_error(format!(
            "filter model missing: {} not found (run `revnote filter-train` first)",
            path.display()
        )));
    }
    let model = EmnbModel::load(&path)?;
    let mut sentences = ctx.data.load_review_sentences()?;
    filter_corpus(&model, &mut sentences);
    jsonl::write_atomic(&ctx.data.review_sentences(), &sentences)?;
    let mut stats: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for s in &sentences {
        let e = stats.entry(s.app_id.as_str()).or_default();
        e.0 += 1;
        e.1 += (s.informative == Some(true)) as usize;
    }
    let stats: BTreeMap<_, _> = stats
        .into_iter()
        .map(|(app, (total, informative))| (app, json!({ "sentences": total, "informative": informative })))
        .collect();
    print_json(out, &stats)
}

fn embed_train(ctx: &Context, args: &EmbedTrainArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let sentences = ctx.data.load_review_sentences()?;
    require_filtered(&sentences)?;
    let corpus: Vec<Vec<String>> = sentences
        .iter()
        .filter(|s| s.informative == Some(true))
        .map(ReviewSentence::lemmas)
        .collect();
    let mut config = ctx.config.skipgram.clone();
    config.dim = args.dim.unwrap_or(config.dim);
    config.window = args.window.unwrap_or(config.window);
    config.epochs = args.epochs.unwrap_or(config.epochs);
    config.min_count = args.min_count.unwrap_or(config.min_count);
    config.seed = args.seed.unwrap_or(config.seed);
    config.workers = args.workers.unwrap_or(config.workers);
    config.validate()?;
    let model = train_skipgram(&corpus, &config)?;
    let path = ctx.data.skipgram_model();
    model.save(&path)?;
    print_json(
        out,
        &json!({
            "model_id": model.model_id,
            "vocabulary": model.len(),
            "dim": model.dim(),
            "training_sentences": corpus.len(),
            "model": path,
        }),
    )
}

fn embed_import(ctx: &Context, args: &EmbedImportArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let notes = ctx.data.load_note_sentences()?;
    let reviews = ctx.data.load_review_sentences()?;
    let note_ids: HashSet<String> = notes.iter().map(|s| s.sentence_id.clone()).collect();
    let review_ids: HashSet<String> = reviews.iter().map(|s| s.sentence_id.clone()).collect();
    let known: HashSet<String> = note_ids.union(&review_ids).cloned().collect();
    let store = import_external_vectors(&args.file, Some(&known))?;
    if let Some(id) = store.ids().iter().find(|id| note_ids.contains(*id) && review_ids.contains(*id)) {
        return Err(user_error(format!(
            "vector id `{id}` names both a note sentence and a review sentence"
        )));
    }
    let mut buf = Vec::new();
    write_vec1(&store, &mut buf)?;
    let path = ctx.data.external_vectors();
    jsonl::write_bytes_atomic(&path, &buf)?;
    let covered = |ids: &HashSet<String>| store.ids().iter().filter(|id| ids.contains(*id)).count();
    print_json(
        out,
        &json!({
            "vectors": store.len(),
            "dim": store.dim(),
            "note_sentences": { "covered": covered(&note_ids), "total": note_ids.len() },
            "review_sentences": { "covered": covered(&review_ids), "total": review_ids.len() },
            "stored": path,
        }),
    )
}

fn require_filtered(reviews: &[ReviewSentence]) -> anyhow::Result<()> {
    if !reviews.is_empty() && reviews.iter().all(|r| r.informative.is_none()) {
        return Err(user_error(
            "review sentences are not filtered (run `revnote filter-apply` first)",
        ));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MatchOutput {
    n: usize,
    backends: Vec<String>,
    apps: BTreeMap<String, MatchSummary>,
    skipped_apps: BTreeMap<String, String>,
    pairs: usize,
}

fn match_pairs(ctx: &Context, args: &MatchArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let n = args.n.unwrap_or(ctx.config.top_n);
    if n < 1 {
        return Err(user_error("--n must be at least 1"));
    }
    let backend_ids = args.backends.clone().unwrap_or_else(|| ctx.config.backends.clone());
    validate_backends(&backend_ids)?;
    let weights = match &args.pos_weights {
        Some(w) => PosWeights::new(w[0], w[1], w[2])?,
        None => ctx.config.pos_weights,
    };

    let skipgram = if backend_ids.iter().any(|b| b == SKIPGRAM_BACKEND) {
        let path = ctx.data.skipgram_model();
        if !path.exists() {
            return Err(user_error(format!(
                "model missing: {} not found (run `revnote embed-train` first)",
                path.display()
            )));
        }
        Some(WordEmbeddingModel::load(&path)?)
    } else {
        None
    };
    let external = if backend_ids.iter().any(|b| b == EXTERNAL_BACKEND) {
        let path = ctx.data.external_vectors();
        if !path.exists() {
            return Err(user_error(format!(
                "model missing: no external vectors at {} (run `revnote embed-import` first)",
                path.display()
            )));
        }
        Some(import_external_vectors(&path, None)?)
    } else {
        None
    };

    let notes = ctx.data.load_note_sentences()?;
    let reviews = ctx.data.load_review_sentences()?;
    require_filtered(&reviews)?;
    let apps: Vec<String> = if args.app == ALL_APPS {
        notes.iter().map(|s| s.app_id.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    } else {
        if !notes.iter().any(|s| s.app_id == args.app) && !reviews.iter().any(|s| s.app_id == args.app) {
            return Err(revnote::Error::UnknownApp(args.app.clone()).into());
        }
        vec![args.app.clone()]
    };

    let mut output = MatchOutput {
        n,
        backends: backend_ids.clone(),
        apps: BTreeMap::new(),
        skipped_apps: BTreeMap::new(),
        pairs: 0,
    };
    let mut records: Vec<PairRecord> = Vec::new();
    for app in &apps {
        let app_notes: Vec<&ReleaseNoteSentence> = notes.iter().filter(|s| s.app_id == *app && s.kept).collect();
        let app_reviews: Vec<ReviewSentence> = reviews
            .iter()
            .filter(|s| s.app_id == *app && s.informative == Some(true))
            .cloned()
            .collect();
        let missing = if app_notes.is_empty() {
            Some("no note sentences")
        } else if app_reviews.is_empty() {
            Some("no informative review sentences")
        } else {
            None
        };
        if let Some(reason) = missing {
            if args.app != ALL_APPS {
                return Err(user_error(format!("app `{app}`: {reason}")));
            }
            output.skipped_apps.insert(app.clone(), reason.to_string());
            continue;
        }
        let mut backends = Vec::new();
        for id in &backend_ids {
            let backend = match id.as_str() {
                SKIPGRAM_BACKEND => {
                    let model = skipgram.as_ref().expect("loaded above");
                    Backend {
                        notes: encode_sentences(
                            model,
                            app_notes.iter().map(|s| (s.sentence_id.as_str(), &s.tokens[..])),
                            &weights,
                        )?,
                        reviews: encode_sentences(
                            model,
                            app_reviews.iter().map(|s| (s.sentence_id.as_str(), &s.tokens[..])),
                            &weights,
                        )?,
                    }
                }
                _ => {
                    let store: &VectorStore = external.as_ref().expect("loaded above");
                    let note_ids: HashSet<&str> = app_notes.iter().map(|s| s.sentence_id.as_str()).collect();
                    let review_ids: HashSet<&str> = app_reviews.iter().map(|s| s.sentence_id.as_str()).collect();
                    Backend {
                        notes: store.subset(&note_ids),
                        reviews: store.subset(&review_ids),
                    }
                }
            };
            backends.push(backend);
        }
        let reports = run_match(app, &app_notes, &app_reviews, &backends, n)?;
        records.extend(pair_records(&reports));
        output.apps.insert(app.clone(), summarize(&reports));
    }
    output.pairs = records.len();
    jsonl::write_atomic(&ctx.data.pairs(), &records)?;
    let mut summary = serde_json::to_vec_pretty(&output)?;
    summary.push(b'\n');
    jsonl::write_bytes_atomic(&ctx.data.match_summary(), &summary)?;
    print_json(out, &output)
}

/// Pairs joined with the app of their note sentence.
struct PairIndex {
    records: HashMap<String, PairRecord>,
    app_of_note: HashMap<String, String>,
}

impl PairIndex {
    fn load(data: &DataDir) -> anyhow::Result<Self> {
        let records = data.load_pairs()?.into_iter().map(|r| (r.pair_id.clone(), r)).collect();
        let app_of_note = data
            .load_note_sentences()?
            .into_iter()
            .map(|s| (s.sentence_id, s.app_id))
            .collect();
        Ok(PairIndex { records, app_of_note })
    }

    fn app(&self, record: &PairRecord) -> Option<&str> {
        self.app_of_note.get(&record.rn_sentence_id).map(String::as_str)
    }

    fn in_scope(&self, record: &PairRecord, app: &str) -> bool {
        app == ALL_APPS || self.app(record) == Some(app)
    }
}

fn load_consensus(ctx: &Context, path: &Option<PathBuf>) -> anyhow::Result<(Vec<ConsensusLabel>, usize)> {
    let path = path.clone().unwrap_or_else(|| ctx.data.labels());
    let labels: Vec<PairLabel> = server::read_labels(&path)?;
    validate_labels(&labels)?;
    let c = consensus(&labels);
    Ok((c.labels, c.unresolved.len()))
}

fn hit_json(c: HitCount) -> serde_json::Value {
    json!({ "relevant": c.relevant, "total": c.total, "hit_ratio": c.ratio().ok() })
}

fn report_hit_ratio(ctx: &Context, args: &LabelReportArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let (labels, unresolved) = load_consensus(ctx, &args.labels)?;
    let index = PairIndex::load(&ctx.data)?;
    // app -> list -> counts, with "all" collecting every app
    let mut counts: BTreeMap<String, BTreeMap<String, HitCount>> = BTreeMap::new();
    let mut unknown = 0;
    for l in &labels {
        let Some(record) = index.records.get(&l.pair_id) else {
            unknown += 1;
            continue;
        };
        if !index.in_scope(record, &args.app) {
            continue;
        }
        let app = index.app(record).unwrap_or("unknown").to_string();
        let mut lists: Vec<String> = record.ranks.keys().cloned().collect();
        if record.in_intersection {
            lists.push("intersection".into());
        }
        for key in [app, ALL_APPS.to_string()] {
            for list in &lists {
                let c = counts
                    .entry(key.clone())
                    .or_default()
                    .entry(list.clone())
                    .or_insert(HitCount { relevant: 0, total: 0 });
                c.total += 1;
                c.relevant += (l.relevance == Relevance::Relevant) as usize;
            }
        }
    }
    let body: BTreeMap<String, BTreeMap<String, serde_json::Value>> = counts
        .into_iter()
        .map(|(app, lists)| (app, lists.into_iter().map(|(k, c)| (k, hit_json(c))).collect()))
        .collect();
    print_json(
        out,
        &json!({ "hit_ratio": body, "unresolved_pairs": unresolved, "labels_for_unknown_pairs": unknown }),
    )
}

fn report_roles(ctx: &Context, args: &LabelReportArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let (labels, _) = load_consensus(ctx, &args.labels)?;
    let index = PairIndex::load(&ctx.data)?;
    let selected: Vec<ConsensusLabel> = labels
        .into_iter()
        .filter(|l| index.records.get(&l.pair_id).is_some_and(|r| index.in_scope(r, &args.app)))
        .collect();
    print_json(out, &role_distribution(&selected))
}

fn report_temporal(ctx: &Context, args: &TemporalArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let index = PairIndex::load(&ctx.data)?;
    let mut records: Vec<&PairRecord> = index.records.values().filter(|r| index.in_scope(r, &args.app)).collect();
    records.sort_by(|a, b| (&a.rn_sentence_id, &a.ur_sentence_id).cmp(&(&b.rn_sentence_id, &b.ur_sentence_id)));
    match args.pairs {
        PairScope::All => {}
        PairScope::Intersection => records.retain(|r| r.in_intersection),
        PairScope::Relevant => {
            let (labels, _) = load_consensus(ctx, &args.labels)?;
            let relevant: HashSet<String> = labels
                .into_iter()
                .filter(|l| l.relevance == Relevance::Relevant)
                .map(|l| l.pair_id)
                .collect();
            records.retain(|r| relevant.contains(&r.pair_id));
        }
    }
    let notes = ctx.data.load_note_sentences()?;
    let reviews = ctx.data.load_review_sentences()?;
    let dates = SentenceDates::new(&notes, &reviews);
    let deltas = records
        .iter()
        .map(|r| dates.interval(&r.rn_sentence_id, &r.ur_sentence_id))
        .collect::<revnote::Result<Vec<i64>>>()?;
    let stats = IntervalStats::from_deltas(deltas, args.bin_width)?;

    let mut csv = String::from("bin_start,bin_end,count\n");
    for b in &stats.histogram {
        csv.push_str(&format!("{},{},{}\n", b.start, b.start + args.bin_width, b.count));
    }
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| ctx.data.reports().join(format!("temporal_{}.csv", args.app)));
    jsonl::write_bytes_atomic(&path, csv.as_bytes())?;
    print_json(
        out,
        &json!({
            "pairs": stats.deltas.len(),
            "t_before_avg": stats.t_before_avg,
            "t_after_avg": stats.t_after_avg,
            "min_days": stats.deltas.iter().min(),
            "max_days": stats.deltas.iter().max(),
            "bin_width": args.bin_width,
            "histogram_csv": path,
        }),
    )
}

fn report_eligibility(ctx: &Context, args: &EligibilityArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let corpus = Corpus::open(ctx.data.root())?;
    let normalizer = ctx.normalizer();
    let apps = if args.app == ALL_APPS {
        corpus.app_ids()
    } else {
        vec![args.app.clone()]
    };
    let mut reports = Vec::new();
    for app in &apps {
        let sentences: Vec<ReleaseNoteSentence> = corpus
            .notes_of(app)
            .flat_map(|n| split_note_sentences(n, &normalizer))
            .collect();
        reports.push(app_eligibility_report(
            &corpus,
            app,
            &sentences,
            &ctx.config.eligibility,
            args.as_of,
        )?);
    }
    print_json(out, &reports)
}

fn serve(ctx: &Context, args: &ServeArgs) -> anyhow::Result<()> {
    let token = args.token.clone().or_else(|| ctx.config.api_token.clone());
    let state = AppState::load(&ctx.data, token)?;
    let addr = SocketAddr::new(args.bind, args.port.unwrap_or(ctx.config.port));
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(server::serve(state, addr))
}

fn export(ctx: &Context, args: &ExportArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    let copy = |path: PathBuf, producer: &str| -> anyhow::Result<Vec<u8>> {
        if !path.exists() {
            return Err(user_error(format!(
                "{} not found (run `revnote {producer}` first)",
                path.display()
            )));
        }
        Ok(std::fs::read(&path)?)
    };
    match args.table {
        Table::Apps | Table::Notes | Table::Reviews => {
            let corpus = Corpus::open(ctx.data.root())?;
            match args.table {
                Table::Apps => corpus.export_apps(&mut buf)?,
                Table::Notes => corpus.export_notes(&mut buf)?,
                _ => corpus.export_reviews(&mut buf)?,
            }
        }
        Table::NoteSentences => buf = copy(ctx.data.note_sentences(), "preprocess")?,
        Table::ReviewSentences => buf = copy(ctx.data.review_sentences(), "preprocess")?,
        Table::Pairs => buf = copy(ctx.data.pairs(), "match")?,
        Table::Labels => {
            for l in server::read_labels(&ctx.data.labels())? {
                buf.extend_from_slice(jsonl::to_line(&l).as_bytes());
            }
        }
    }
    match &args.out {
        Some(path) => jsonl::write_bytes_atomic(path, &buf)?,
        None => out.write_all(&buf)?,
    }
    Ok(())
}
