use std::fmt::Write as _;
use std::path::PathBuf;

use riskminer_core::corpus::{read_corpus, read_financial_records, Corpus, CorpusFormat, FinancialRecord, RecordBounds};
use riskminer_core::eval::{self, DataSplit, Fold, MetricsReport, ParamConfig, ParamValue, Sampler, SplitRatios};
use riskminer_core::features::{
    bow, build_vocabulary, fit_idf, tfidf_batch, train_word2vec, EmbeddingModel, SparseMatrix, TfidfModel, Vocabulary,
    Word2VecConfig, Word2VecMode,
};
use riskminer_core::finance::{self, AnalysisRow, ScreenConfig};
use riskminer_core::models::{ModelKind, OptimizerConfig, OptimizerKind, SvmMode, TrainedModel};
use riskminer_core::pipeline::{
    compare_models, evaluate_model, predict_model, report_table3, table3_csv, train_model, ComparisonConfig, Dataset,
    Evaluation, ModelSettings, Provenance,
};
use riskminer_core::preprocess::{preprocess_corpus, read_tokenized, write_tokenized, PreprocessConfig, StopwordSet, TokenizedDocument};
use riskminer_core::synth::{risk_corpus, RiskCorpusConfig};
use riskminer_core::textfmt::{self, Header, Meta};
use riskminer_core::topics::{extract_keywords, fit_lda, topic_report, LdaConfig};
use riskminer_core::Execution;

use crate::error::{CliError, CliResult};
use crate::io::{self, Input, InputKind, Inputs, Outputs};
use crate::params::Params;
use crate::{Command, Common};

pub const METRICS_FORMAT: &str = "riskminer-metrics";
pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const CV_FORMAT: &str = "riskminer-cv";
pub const CV_SCHEMA_VERSION: u32 = 1;

/// Everything a subcommand needs: classified inputs, resolved parameters,
/// the seed and the output directory.
struct Ctx {
    inputs: Inputs,
    params: Params,
    seed: u64,
    out: Outputs,
    aux: Vec<(String, String)>,
}

impl Ctx {
    fn new(common: &Common, keys: &[&str], flags: &[(&str, Option<&str>)]) -> CliResult<Self> {
        let config_text = match &common.config {
            Some(p) => Some((
                p.display().to_string(),
                std::fs::read_to_string(p).map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?,
            )),
            None => None,
        };
        let params = Params::resolve(keys, config_text.as_ref().map(|(n, t)| (n.as_str(), t.as_str())), flags)?;
        let seed = match common.seed {
            Some(s) => s,
            None => params.get_or("seed", 0u64)?,
        };
        let inputs = Inputs::read(&common.inputs)?;
        let out = Outputs::new(&common.out)?;
        Ok(Ctx { inputs, params, seed, out, aux: Vec::new() })
    }

    /// Reads a file named by a parameter and records its digest.
    fn read_aux(&mut self, path: &str) -> CliResult<String> {
        let bytes = std::fs::read(path).map_err(|e| CliError::data(format!("cannot read {path}: {e}")))?;
        self.aux.push(("input".into(), format!("{path} sha256={}", hex::encode(<sha2::Sha256 as sha2::Digest>::digest(&bytes)))));
        String::from_utf8(bytes).map_err(|_| CliError::data(format!("{path} is not valid UTF-8")))
    }

    fn meta(&self) -> Meta {
        let mut m = io::meta(self.seed, &self.inputs, self.params.entries());
        m.extend(self.aux.iter().cloned());
        m
    }

    fn exec(&self) -> CliResult<Execution> {
        match self.params.raw("exec").unwrap_or("parallel") {
            "parallel" => Ok(Execution::Parallel),
            "sequential" => Ok(Execution::Sequential),
            other => Err(CliError::usage(format!("exec must be parallel or sequential, got {other:?}"))),
        }
    }

    fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        self.out.write(name, contents)
    }

    fn finish(self) -> Vec<PathBuf> {
        self.out.written
    }
}

pub fn run(cmd: &Command) -> CliResult<Vec<PathBuf>> {
    macro_rules! ctx {
        ($a:expr) => {
            Ctx::new(&$a.common, &$a.keys(), &$a.flags())?
        };
    }
    match cmd {
        Command::Ingest(a) => ingest(ctx!(a)),
        Command::Preprocess(a) => preprocess(ctx!(a)),
        Command::Featurize(a) => featurize(ctx!(a)),
        Command::Split(a) => split(ctx!(a)),
        Command::Embed(a) => embed(ctx!(a)),
        Command::Topics(a) => topics(ctx!(a)),
        Command::Keywords(a) => keywords(ctx!(a)),
        Command::Train(a) => train(ctx!(a)),
        Command::Predict(a) => predict(ctx!(a)),
        Command::Evaluate(a) => evaluate(ctx!(a)),
        Command::Cv(a) => cv(ctx!(a)),
        Command::Search(a) => search(ctx!(a)),
        Command::Finance(a) => finance_cmd(ctx!(a)),
        Command::Report(a) => report(ctx!(a)),
        Command::Generate(a) => generate(ctx!(a)),
    }
}

fn parse_bool(p: &Params, key: &str, default: bool) -> CliResult<bool> {
    match p.raw(key) {
        None => Ok(default),
        Some("true" | "yes" | "1") => Ok(true),
        Some("false" | "no" | "0") => Ok(false),
        Some(other) => Err(CliError::usage(format!("{key} must be true or false, got {other:?}"))),
    }
}

fn load_corpus_input(input: &Input, format: Option<CorpusFormat>) -> CliResult<Corpus> {
    let format = format.unwrap_or(if input.kind == InputKind::CorpusCsv { CorpusFormat::Csv } else { CorpusFormat::Jsonl });
    read_corpus(input.text.as_bytes(), format).map_err(|e| CliError::data(format!("{}: {e}", input.path.display())))
}

fn load_tokens(input: &Input) -> CliResult<Vec<TokenizedDocument>> {
    read_tokenized(input.text.as_bytes()).map_err(|e| CliError::data(format!("{}: {e}", input.path.display())))
}

fn load_split(ctx: &Ctx, n_docs: usize) -> CliResult<Option<DataSplit>> {
    let Some(input) = ctx.inputs.optional(&[InputKind::Split])? else { return Ok(None) };
    let (split, _) = DataSplit::from_text(&input.text).map_err(|e| CliError::data(format!("{}: {e}", input.path.display())))?;
    if split.len() != n_docs {
        return Err(CliError::data(format!("split covers {} documents but the corpus has {n_docs}", split.len())));
    }
    Ok(Some(split))
}

fn load_tfidf(input: &Input) -> CliResult<TfidfModel> {
    Ok(TfidfModel::from_text(&input.text).map_err(|e| CliError::data(format!("{}: {e}", input.path.display())))?.0)
}

fn load_model(input: &Input) -> CliResult<(TrainedModel, Meta)> {
    TrainedModel::from_text(&input.text).map_err(|e| CliError::data(format!("{}: {e}", input.path.display())))
}

fn meta_value<'m>(meta: &'m Meta, key: &str) -> Option<&'m str> {
    meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn tokens_text(docs: &[TokenizedDocument], meta: &Meta) -> String {
    let mut buf = io::preamble("tokens", meta).into_bytes();
    write_tokenized(docs, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("tokens are UTF-8")
}

fn ingest(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Corpus, InputKind::CorpusCsv])?;
    let format: Option<CorpusFormat> = ctx.params.get("format")?;
    let input = ctx.inputs.require(&[InputKind::Corpus, InputKind::CorpusCsv])?;
    let corpus = load_corpus_input(input, format)?;
    let report = riskminer_core::corpus::validate_corpus(&corpus);
    let meta = ctx.meta();
    let mut buf = io::preamble("corpus", &meta).into_bytes();
    corpus.write_jsonl(&mut buf)?;
    ctx.write("corpus.jsonl", &String::from_utf8(buf).expect("corpus is UTF-8"))?;
    ctx.write("validation.txt", &format!("{}{report}", io::preamble("validation", &meta)))?;
    Ok(ctx.finish())
}

fn preprocess(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Corpus, InputKind::CorpusCsv])?;
    let mut cfg = PreprocessConfig::default();
    if let Some(path) = ctx.params.raw("stopwords").map(str::to_string) {
        cfg.stopwords = if path == "none" { StopwordSet::empty() } else { StopwordSet::parse(&ctx.read_aux(&path)?) };
    }
    cfg.stemming = parse_bool(&ctx.params, "stem", true)?;
    cfg.lowercase = parse_bool(&ctx.params, "lowercase", true)?;
    cfg.strip_markup = parse_bool(&ctx.params, "strip_markup", true)?;
    let exec = ctx.exec()?;
    let corpus = load_corpus_input(ctx.inputs.require(&[InputKind::Corpus, InputKind::CorpusCsv])?, None)?;
    let docs = preprocess_corpus(&corpus, &cfg, exec)?;
    let text = tokens_text(&docs, &ctx.meta());
    ctx.write("tokens.jsonl", &text)?;
    Ok(ctx.finish())
}

fn vocabulary(p: &Params, docs: &[&[String]]) -> CliResult<Vocabulary> {
    let min_df = p.get_or("min_df", 1usize)?;
    let max_df = p.get_or("max_df", 1.0f64)?;
    if !(max_df > 0.0 && max_df <= 1.0) {
        return Err(CliError::usage(format!("max_df must be in (0, 1], got {max_df}")));
    }
    Ok(build_vocabulary(docs, min_df, max_df)?)
}

fn featurize(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Tokens, InputKind::Split])?;
    let exec = ctx.exec()?;
    let docs = load_tokens(ctx.inputs.require(&[InputKind::Tokens])?)?;
    let split = load_split(&ctx, docs.len())?;
    let fit_rows: Vec<usize> = match &split {
        Some(s) => s.train.clone(),
        None => (0..docs.len()).collect(),
    };
    let fit_docs: Vec<&[String]> = fit_rows.iter().map(|&i| docs[i].tokens.as_slice()).collect();
    let model = fit_idf(&vocabulary(&ctx.params, &fit_docs)?);
    let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
    let labels: Vec<Option<String>> = docs.iter().map(|d| d.label.clone()).collect();
    let token_lists: Vec<&[String]> = docs.iter().map(|d| d.tokens.as_slice()).collect();
    let v = model.vocab().len();
    let weights = SparseMatrix::new(ids.clone(), labels.clone(), tfidf_batch(&token_lists, &model, exec), v)?;
    let counts = SparseMatrix::new(ids, labels, exec.map_slice(&token_lists, |t| bow(t, model.vocab())), v)?;
    let meta = ctx.meta();
    ctx.write("tfidf_model.txt", &model.to_text(&meta))?;
    ctx.write("tfidf.txt", &weights.to_text(&meta))?;
    ctx.write("bow.txt", &counts.to_text(&meta))?;
    Ok(ctx.finish())
}

fn split(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Tokens, InputKind::Corpus, InputKind::CorpusCsv])?;
    let input = ctx.inputs.require(&[InputKind::Tokens, InputKind::Corpus, InputKind::CorpusCsv])?;
    let labels: Vec<Option<String>> = if input.kind == InputKind::Tokens {
        load_tokens(input)?.into_iter().map(|d| d.label).collect()
    } else {
        load_corpus_input(input, None)?.iter().map(|d| d.label.clone()).collect()
    };
    let d = SplitRatios::default();
    let ratios = SplitRatios {
        train: ctx.params.get_or("train", d.train)?,
        val: ctx.params.get_or("val", d.val)?,
        test: ctx.params.get_or("test", d.test)?,
    };
    let stratify = parse_bool(&ctx.params, "stratify", true)?;
    let ids: Option<Vec<usize>> = if stratify {
        let mut names: Vec<&str> = labels.iter().flatten().map(String::as_str).collect();
        names.sort_unstable();
        names.dedup();
        labels
            .iter()
            .map(|l| l.as_deref().map(|l| names.binary_search(&l).expect("label collected above")))
            .collect::<Option<Vec<usize>>>()
            .map(Some)
            .ok_or_else(|| CliError::data("stratified split needs every document labelled (use --stratify false)"))?
    } else {
        None
    };
    let s = eval::split(labels.len(), ratios, ctx.seed, ids.as_deref())?;
    let text = s.to_text(&ctx.meta());
    ctx.write("split.txt", &text)?;
    Ok(ctx.finish())
}

fn embed(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Tokens])?;
    let docs = load_tokens(ctx.inputs.require(&[InputKind::Tokens])?)?;
    let d = Word2VecConfig::default();
    let cfg = Word2VecConfig {
        mode: ctx.params.get_or::<Word2VecMode>("mode", d.mode)?,
        dim: ctx.params.get_or("dim", d.dim)?,
        window: ctx.params.get_or("window", d.window)?,
        negatives: ctx.params.get_or("negatives", d.negatives)?,
        epochs: ctx.params.get_or("epochs", d.epochs)?,
        learning_rate: ctx.params.get_or("lr", d.learning_rate)?,
        seed: ctx.seed,
    };
    let sentences: Vec<&[String]> = docs.iter().map(|d| d.tokens.as_slice()).collect();
    let model = train_word2vec(&sentences, &cfg)?;
    let text = model.to_text(&ctx.meta());
    ctx.write("embedding.txt", &text)?;
    Ok(ctx.finish())
}

fn topics(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Tokens])?;
    let docs = load_tokens(ctx.inputs.require(&[InputKind::Tokens])?)?;
    let k = ctx.params.get_or("k", 5usize)?;
    let mut cfg = LdaConfig::new(k, ctx.params.get_or("iterations", 500usize)?, ctx.seed);
    cfg.alpha = ctx.params.get_or("alpha", cfg.alpha)?;
    cfg.beta = ctx.params.get_or("beta", cfg.beta)?;
    let top = ctx.params.get_or("top", 10usize)?;
    let token_lists: Vec<&[String]> = docs.iter().map(|d| d.tokens.as_slice()).collect();
    let vocab = vocabulary(&ctx.params, &token_lists)?;
    let rows = token_lists.iter().map(|t| bow(t, &vocab)).collect();
    let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
    let matrix = SparseMatrix::new(ids.clone(), docs.iter().map(|d| d.label.clone()).collect(), rows, vocab.len())?;
    let model = fit_lda(&matrix, &vocab, &cfg)?;
    let meta = ctx.meta();
    let report = format!("{}{}", io::preamble("topics", &meta), topic_report(&model, top, &[]));
    let mut theta = io::preamble("doc_topics", &meta);
    theta.push_str("id");
    for t in 0..model.k() {
        write!(theta, ",topic_{t}").unwrap();
    }
    theta.push('\n');
    for (id, row) in ids.iter().zip(&model.theta) {
        theta.push_str(id);
        for p in row {
            write!(theta, ",{p}").unwrap();
        }
        theta.push('\n');
    }
    ctx.write("topics.txt", &report)?;
    ctx.write("doc_topics.csv", &theta)?;
    Ok(ctx.finish())
}

fn keywords(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Tokens, InputKind::Tfidf])?;
    let docs = load_tokens(ctx.inputs.require(&[InputKind::Tokens])?)?;
    let top = ctx.params.get_or("top", 5usize)?;
    let model = match ctx.inputs.optional(&[InputKind::Tfidf])? {
        Some(input) => load_tfidf(input)?,
        None => {
            let lists: Vec<&[String]> = docs.iter().map(|d| d.tokens.as_slice()).collect();
            fit_idf(&vocabulary(&ctx.params, &lists)?)
        }
    };
    let mut s = io::preamble("keywords", &ctx.meta());
    s.push_str("id\tlabel\tkeywords\n");
    for d in &docs {
        let kw: Vec<String> = extract_keywords(&d.tokens, &model, top).into_iter().map(|(t, w)| format!("{t}:{w}")).collect();
        writeln!(s, "{}\t{}\t{}", d.doc_id, d.label.as_deref().unwrap_or("-"), kw.join(" ")).unwrap();
    }
    ctx.write("keywords.tsv", &s)?;
    Ok(ctx.finish())
}

fn model_kind(p: &Params) -> CliResult<ModelKind> {
    p.get::<ModelKind>("model")?.ok_or_else(|| CliError::usage("--model is required (nb, svm, forest, rnn or lstm)"))
}

/// Hyperparameters from resolved parameters on top of the defaults.
fn model_settings(p: &Params, seed: u64) -> CliResult<ModelSettings> {
    let mut s = ModelSettings::with_seed(seed);
    s.nb_alpha = p.get_or("nb_alpha", s.nb_alpha)?;
    s.svm.lambda = p.get_or("svm_lambda", s.svm.lambda)?;
    s.svm.epochs = p.get_or("svm_epochs", s.svm.epochs)?;
    s.svm.mode = p.get_or::<SvmMode>("svm_mode", s.svm.mode)?;
    s.forest.n_trees = p.get_or("trees", s.forest.n_trees)?;
    s.forest.mtry = p.get("mtry")?.or(s.forest.mtry);
    s.forest.min_leaf = p.get_or("min_leaf", s.forest.min_leaf)?;
    s.forest.max_depth = p.get("max_depth")?.or(s.forest.max_depth);
    let r = &mut s.recurrent;
    r.hidden = p.get_or("hidden", r.hidden)?;
    r.embed_dim = p.get_or("embed_dim", r.embed_dim)?;
    r.epochs = p.get_or("epochs", r.epochs)?;
    r.batch_size = p.get_or("batch_size", r.batch_size)?;
    let lr = p.get_or("lr", r.optimizer.learning_rate)?;
    r.optimizer = match p.get::<OptimizerKind>("optimizer")? {
        Some(OptimizerKind::Sgd) => OptimizerConfig::sgd(lr),
        Some(OptimizerKind::RmsProp) => OptimizerConfig::rmsprop(lr),
        Some(OptimizerKind::Adam) => OptimizerConfig::adam(lr),
        None => OptimizerConfig { learning_rate: lr, ..r.optimizer },
    };
    r.l2 = p.get_or("l2", r.l2)?;
    r.clip_norm = match p.raw("clip_norm") {
        Some("none") => None,
        Some(_) => p.get("clip_norm")?,
        None => r.clip_norm,
    };
    r.max_len = p.get_or("max_len", r.max_len)?;
    Ok(s)
}

/// Embedding rows in dataset-vocabulary order; tokens the embedding lacks start at zero.
fn embedding_table(emb: &EmbeddingModel, data: &Dataset) -> Vec<f64> {
    let mut table = vec![0.0; data.vocab_size() * emb.dim()];
    for (i, tok) in data.vocab_tokens.iter().enumerate() {
        if let Some(v) = emb.vector(tok) {
            table[i * emb.dim()..(i + 1) * emb.dim()].copy_from_slice(v);
        }
    }
    table
}

/// Tokens, TF-IDF model, optional split and optional embedding shared by
/// the training-side subcommands.
struct Prepared {
    data: Dataset,
    split: Option<DataSplit>,
    dataset_name: String,
}

fn prepare(ctx: &Ctx, exec: Execution) -> CliResult<Prepared> {
    let tokens = ctx.inputs.require(&[InputKind::Tokens])?;
    let docs = load_tokens(tokens)?;
    let model = load_tfidf(ctx.inputs.require(&[InputKind::Tfidf])?)?;
    let split = load_split(ctx, docs.len())?;
    Ok(Prepared { data: Dataset::build(&docs, &model, exec), split, dataset_name: tokens.name() })
}

fn training_rows(prep: &Prepared) -> Vec<usize> {
    match &prep.split {
        Some(s) => s.train.clone(),
        None => (0..prep.data.len()).collect(),
    }
}

fn settings_for(ctx: &Ctx, params: &Params, data: &Dataset) -> CliResult<ModelSettings> {
    let mut settings = model_settings(params, ctx.seed)?;
    if let Some(input) = ctx.inputs.optional(&[InputKind::Embedding])? {
        let (emb, _) = EmbeddingModel::from_text(&input.text).map_err(|e| CliError::data(format!("{}: {e}", input.path.display())))?;
        if params.raw("embed_dim").is_some() && settings.recurrent.embed_dim != emb.dim() {
            return Err(CliError::usage(format!("embed_dim {} conflicts with the {}-dimensional embedding input", settings.recurrent.embed_dim, emb.dim())));
        }
        settings.recurrent.embed_dim = emb.dim();
        settings.embedding_init = Some(embedding_table(&emb, data));
    }
    Ok(settings)
}

fn train(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Tokens, InputKind::Tfidf, InputKind::Split, InputKind::Embedding])?;
    let exec = ctx.exec()?;
    let kind = model_kind(&ctx.params)?;
    let prep = prepare(&ctx, exec)?;
    let settings = settings_for(&ctx, &ctx.params, &prep.data)?;
    let model = train_model(kind, &prep.data, &training_rows(&prep), &settings, exec)?;
    let text = model.to_text(&ctx.meta());
    ctx.write(&format!("model_{}.txt", kind.as_str()), &text)?;
    Ok(ctx.finish())
}

fn predict(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Tokens, InputKind::Tfidf, InputKind::Model])?;
    let prep = prepare(&ctx, Execution::Parallel)?;
    let (model, _) = load_model(ctx.inputs.require(&[InputKind::Model])?)?;
    let all: Vec<usize> = (0..prep.data.len()).collect();
    let preds = predict_model(&model, &prep.data, &all)?;
    let mut s = io::preamble("predictions", &ctx.meta());
    s.push_str("id,predicted");
    for c in model.classes() {
        write!(s, ",score_{c}").unwrap();
    }
    s.push('\n');
    for (id, p) in prep.data.ids.iter().zip(&preds) {
        write!(s, "{id},{}", p.label).unwrap();
        for x in &p.scores {
            write!(s, ",{x}").unwrap();
        }
        s.push('\n');
    }
    ctx.write(&format!("predictions_{}.csv", model.kind().as_str()), &s)?;
    Ok(ctx.finish())
}

fn subset_rows(prep: &Prepared, name: Option<&str>) -> CliResult<(String, Vec<usize>)> {
    let all = || (0..prep.data.len()).collect::<Vec<usize>>();
    let pick = |s: &DataSplit, n: &str| match n {
        "train" => Ok(s.train.clone()),
        "val" => Ok(s.val.clone()),
        "test" => Ok(s.test.clone()),
        "all" => Ok(all()),
        other => Err(CliError::usage(format!("subset must be train, val, test or all, got {other:?}"))),
    };
    match (&prep.split, name) {
        (Some(s), None) => Ok(("test".into(), s.test.clone())),
        (Some(s), Some(n)) => Ok((n.into(), pick(s, n)?)),
        (None, None | Some("all")) => Ok(("all".into(), all())),
        (None, Some(n)) => Err(CliError::usage(format!("subset {n:?} needs a split input"))),
    }
}

/// Header-only spaces are not allowed in artifact header values.
fn header_safe(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join("_")
}

fn metrics_text(kind: ModelKind, dataset: &str, subset: &str, documents: usize, train_seed: &str, ev: &Evaluation, meta: &Meta) -> String {
    let mut s = Header::new(METRICS_FORMAT, METRICS_SCHEMA_VERSION)
        .field("model", kind.as_str())
        .field("dataset", header_safe(dataset))
        .field("subset", subset)
        .field("documents", documents)
        .field("train_seed", header_safe(train_seed))
        .with_meta(meta)
        .render();
    s.push_str(&ev.metrics.to_kv());
    if let Some(auc) = ev.macro_auc {
        writeln!(s, "macro_auc={auc}").unwrap();
    }
    s
}

fn evaluate(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Tokens, InputKind::Tfidf, InputKind::Model, InputKind::Split])?;
    let prep = prepare(&ctx, Execution::Parallel)?;
    let (model, model_meta) = load_model(ctx.inputs.require(&[InputKind::Model])?)?;
    let train_seed = meta_value(&model_meta, "seed").unwrap_or("unknown").to_string();
    let (subset, rows) = subset_rows(&prep, ctx.params.raw("subset"))?;
    let ev = evaluate_model(&model, &prep.data, &rows)?;
    let kind = model.kind().as_str();
    let meta = ctx.meta();
    let kv = metrics_text(model.kind(), &prep.dataset_name, &subset, prep.data.len(), &train_seed, &ev, &meta);
    let mut report = io::preamble("evaluation", &meta);
    writeln!(report, "model: {}\nsubset: {subset} ({} documents)\n", model.kind().display_name(), rows.len()).unwrap();
    write!(report, "{}\nconfusion (rows = truth, columns = prediction)\n{}", ev.metrics, ev.confusion.to_table()).unwrap();
    if let Some(auc) = ev.macro_auc {
        writeln!(report, "\nmacro one-vs-rest AUC: {auc:.4}").unwrap();
    }
    ctx.write(&format!("metrics_{kind}.kv"), &kv)?;
    ctx.write(&format!("report_{kind}.txt"), &report)?;
    for (class, curve) in model.classes().iter().zip(&ev.roc) {
        if let Some(curve) = curve {
            let text = format!("{}# class={class}\n# auc={}\n{}", io::preamble("roc", &meta), curve.auc, curve.to_csv());
            ctx.write(&format!("roc_{kind}_{}.csv", header_safe(class)), &text)?;
        }
    }
    Ok(ctx.finish())
}

fn metric_value(metric: &str, ev: &Evaluation) -> f64 {
    match metric {
        "accuracy" => ev.metrics.accuracy,
        _ => ev.metrics.macro_f1,
    }
}

fn metric_name(p: &Params) -> CliResult<String> {
    match p.raw("metric").unwrap_or("macro_f1") {
        m @ ("accuracy" | "macro_f1") => Ok(m.to_string()),
        other => Err(CliError::usage(format!("metric must be accuracy or macro_f1, got {other:?}"))),
    }
}

/// Stratified folds over the training rows, as dataset indices.
fn cv_folds(prep: &Prepared, k: usize, seed: u64) -> CliResult<Vec<Fold>> {
    let rows = training_rows(prep);
    let labels = prep.data.labels_for(&rows)?;
    let folds = eval::stratified_kfold(labels.ids(), k, seed)?;
    Ok(eval::folds_to_pairs(&folds)
        .into_iter()
        .map(|f| Fold { train: f.train.iter().map(|&i| rows[i]).collect(), test: f.test.iter().map(|&i| rows[i]).collect() })
        .collect())
}

fn score_fold(kind: ModelKind, prep: &Prepared, settings: &ModelSettings, fold: &Fold, metric: &str, exec: Execution) -> CliResult<f64> {
    let model = train_model(kind, &prep.data, &fold.train, settings, exec)?;
    Ok(metric_value(metric, &evaluate_model(&model, &prep.data, &fold.test)?))
}

fn cv(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Tokens, InputKind::Tfidf, InputKind::Split, InputKind::Embedding])?;
    let exec = ctx.exec()?;
    let kind = model_kind(&ctx.params)?;
    let k = ctx.params.get_or("folds", 5usize)?;
    let metric = metric_name(&ctx.params)?;
    let prep = prepare(&ctx, exec)?;
    let settings = settings_for(&ctx, &ctx.params, &prep.data)?;
    let folds = cv_folds(&prep, k, ctx.seed)?;
    let scores = folds.iter().map(|f| score_fold(kind, &prep, &settings, f, &metric, exec)).collect::<CliResult<Vec<f64>>>()?;
    let mean = scores.iter().sum::<f64>() / k as f64;
    let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / k as f64).sqrt();
    let mut s = Header::new(CV_FORMAT, CV_SCHEMA_VERSION)
        .field("model", kind.as_str())
        .field("folds", k)
        .field("metric", &metric)
        .with_meta(&ctx.meta())
        .render();
    for (i, (f, score)) in folds.iter().zip(&scores).enumerate() {
        writeln!(s, "fold {i} train={} test={} score={score}", f.train.len(), f.test.len()).unwrap();
    }
    writeln!(s, "mean {mean}\nstd {sd}").unwrap();
    ctx.write(&format!("cv_{}.txt", kind.as_str()), &s)?;
    Ok(ctx.finish())
}

fn split_spec(spec: &str) -> CliResult<Vec<(String, String)>> {
    spec.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, v) = p.split_once('=').ok_or_else(|| CliError::usage(format!("search term {p:?} is not name=values")))?;
            let k = k.trim().replace('-', "_");
            if !crate::ModelFlags::KEYS.contains(&k.as_str()) || k == "exec" {
                return Err(CliError::usage(format!("{k:?} is not a searchable hyperparameter")));
            }
            Ok((k, v.trim().to_string()))
        })
        .collect()
}

fn grid_space(spec: &str) -> CliResult<Vec<(String, Vec<ParamValue>)>> {
    Ok(split_spec(spec)?.into_iter().map(|(k, v)| (k, v.split(',').map(|x| ParamValue::parse(x.trim())).collect())).collect())
}

fn random_space(spec: &str) -> CliResult<Vec<(String, Sampler)>> {
    split_spec(spec)?
        .into_iter()
        .map(|(k, v)| {
            let bad = || CliError::usage(format!("cannot parse sampler {v:?} for {k}"));
            let (kind, rest) = v.split_once(':').ok_or_else(bad)?;
            let bounds = |r: &str| -> CliResult<(f64, f64)> {
                let (a, b) = r.split_once(':').ok_or_else(bad)?;
                Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
            };
            let sampler = match kind {
                "choice" => Sampler::Choice(rest.split(',').map(|x| ParamValue::parse(x.trim())).collect()),
                "int" => {
                    let (a, b) = rest.split_once(':').ok_or_else(bad)?;
                    Sampler::IntUniform { low: a.trim().parse().map_err(|_| bad())?, high: b.trim().parse().map_err(|_| bad())? }
                }
                "uniform" => {
                    let (low, high) = bounds(rest)?;
                    Sampler::FloatUniform { low, high }
                }
                "log" => {
                    let (low, high) = bounds(rest)?;
                    Sampler::LogUniform { low, high }
                }
                _ => return Err(bad()),
            };
            Ok((k, sampler))
        })
        .collect()
}

fn search(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Tokens, InputKind::Tfidf, InputKind::Split, InputKind::Embedding])?;
    let exec = ctx.exec()?;
    let kind = model_kind(&ctx.params)?;
    let k = ctx.params.get_or("folds", 3usize)?;
    let metric = metric_name(&ctx.params)?;
    let prep = prepare(&ctx, exec)?;
    let folds = cv_folds(&prep, k, ctx.seed)?;
    let base = ctx.params.clone();
    let evaluate = |config: &ParamConfig, fold: &Fold| -> CliResult<f64> {
        let mut p = base.clone();
        for (name, value) in config {
            p.set(name, value.to_string());
        }
        let settings = settings_for(&ctx, &p, &prep.data)?;
        score_fold(kind, &prep, &settings, fold, &metric, Execution::Sequential)
    };
    let result = match (ctx.params.raw("grid"), ctx.params.raw("random")) {
        (Some(g), None) => eval::grid_search(&grid_space(g)?, &folds, evaluate, exec)?,
        (None, Some(r)) => {
            let draws = ctx.params.get_or("draws", 10usize)?;
            eval::random_search(&random_space(r)?, draws, ctx.seed, &folds, evaluate, exec)?
        }
        _ => return Err(CliError::usage("give exactly one of --grid or --random")),
    };
    let meta = ctx.meta();
    let best = result.best_row();
    let mut table = io::preamble("search", &meta);
    writeln!(table, "# metric={metric}\n# folds={k}").unwrap();
    table.push_str(&result.to_table());
    let mut conf = io::preamble("best_config", &meta);
    writeln!(conf, "# mean_{metric}={}\nmodel={}", best.mean_score, kind.as_str()).unwrap();
    for (name, value) in &best.config {
        writeln!(conf, "{name}={value}").unwrap();
    }
    ctx.write(&format!("search_{}.tsv", kind.as_str()), &table)?;
    ctx.write(&format!("best_{}.conf", kind.as_str()), &conf)?;
    Ok(ctx.finish())
}

fn load_records(input: &Input) -> CliResult<Vec<FinancialRecord>> {
    read_financial_records(input.text.as_bytes(), RecordBounds::default()).map_err(|e| CliError::data(format!("{}: {e}", input.path.display())))
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn finance_cmd(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Financial])?;
    let files = ctx.inputs.all(&[InputKind::Financial]);
    let (current, previous) = match files.as_slice() {
        [c] => (load_records(c)?, None),
        [c, p] => (load_records(c)?, Some(load_records(p)?)),
        _ => return Err(CliError::usage("finance takes the current period's records and optionally the previous period's")),
    };
    let d = ScreenConfig::default();
    let cfg = ScreenConfig {
        liquidity_floor: ctx.params.get_or("liquidity_floor", d.liquidity_floor)?,
        debt_ceiling: ctx.params.get_or("debt_ceiling", d.debt_ceiling)?,
    };
    let reports = finance::screen(&current, &cfg)?;
    let meta = ctx.meta();
    let mut csv_buf = io::preamble("screen", &meta).into_bytes();
    finance::write_screen_csv(&reports, &mut csv_buf)?;
    ctx.write("screen.txt", &format!("{}{}", io::preamble("screen", &meta), finance::screen_table(&reports)))?;
    ctx.write("screen.csv", &String::from_utf8(csv_buf).expect("csv is UTF-8"))?;
    if let Some(previous) = previous {
        let trends = finance::trend_report(&previous, &current)?;
        let mut t = io::preamble("trends", &meta);
        t.push_str("company,net_profit_yoy_pct,asset_growth_pct\n");
        for r in &trends {
            writeln!(t, "{},{},{}", r.company, r.net_profit_yoy, r.asset_growth).unwrap();
        }
        let rows: Vec<AnalysisRow> = trends
            .iter()
            .map(|tr| {
                let rec = current.iter().find(|r| r.company == tr.company).expect("trend rows come from current records");
                AnalysisRow {
                    company: tr.company.clone(),
                    risk_theme: rec.risk_assessment.clone(),
                    liquidity_ratio: rec.liquidity_ratio,
                    debt_ratio: rec.debt_ratio,
                    net_profit_yoy: Some(round2(tr.net_profit_yoy)),
                    asset_growth: Some(round2(tr.asset_growth)),
                }
            })
            .collect();
        let mut a = io::preamble("analysis", &meta).into_bytes();
        finance::write_analysis_csv(&rows, &mut a)?;
        ctx.write("trends.csv", &t)?;
        ctx.write("analysis.csv", &String::from_utf8(a).expect("csv is UTF-8"))?;
    }
    Ok(ctx.finish())
}

struct MetricsFile {
    kind: ModelKind,
    dataset: String,
    subset: String,
    documents: usize,
    seed: String,
    report: MetricsReport,
}

fn parse_metrics(input: &Input) -> CliResult<MetricsFile> {
    let ctx_err = |e: String| CliError::data(format!("{}: {e}", input.path.display()));
    let doc = textfmt::Document::parse(&input.text, METRICS_FORMAT, METRICS_SCHEMA_VERSION).map_err(|e| ctx_err(e.to_string()))?;
    let h = &doc.header;
    let get = |k: &str| h.require::<String>(k).map_err(|e| ctx_err(e.to_string()));
    let kind: ModelKind = get("model")?.parse().map_err(ctx_err)?;
    let documents: usize = h.require("documents").map_err(|e| ctx_err(e.to_string()))?;
    let seed = get("train_seed")?;
    let mut values = std::collections::HashMap::new();
    for line in input.text.lines().skip(1).filter(|l| !l.starts_with('#')) {
        if let Some((k, v)) = line.split_once('=') {
            values.insert(k.to_string(), v.to_string());
        }
    }
    let num = |k: &str| -> CliResult<f64> {
        values.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| ctx_err(format!("missing or bad {k}")))
    };
    let report = MetricsReport {
        accuracy: num("accuracy")?,
        macro_precision: num("macro_precision")?,
        macro_recall: num("macro_recall")?,
        macro_f1: num("macro_f1")?,
        per_class: Vec::new(),
        undefined_precision: Vec::new(),
        undefined_recall: Vec::new(),
        total: num("samples")? as u64,
    };
    Ok(MetricsFile { kind, dataset: get("dataset")?, subset: get("subset")?, documents, seed, report })
}

fn report(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[InputKind::Metrics, InputKind::Corpus, InputKind::CorpusCsv])?;
    let metrics_inputs = ctx.inputs.all(&[InputKind::Metrics]);
    let corpus_input = ctx.inputs.optional(&[InputKind::Corpus, InputKind::CorpusCsv])?;
    let (rows, provenance): (Vec<(ModelKind, MetricsReport)>, Provenance) = match (corpus_input, metrics_inputs.is_empty()) {
        (Some(input), true) => {
            let corpus = load_corpus_input(input, None)?;
            let mut cfg = ComparisonConfig::new(ctx.seed);
            cfg.exec = ctx.exec()?;
            cfg.settings = model_settings(&ctx.params, ctx.seed)?;
            cfg.min_df = ctx.params.get_or("min_df", cfg.min_df)?;
            cfg.max_df_ratio = ctx.params.get_or("max_df", cfg.max_df_ratio)?;
            cfg.ratios = SplitRatios {
                train: ctx.params.get_or("train", cfg.ratios.train)?,
                val: ctx.params.get_or("val", cfg.ratios.val)?,
                test: ctx.params.get_or("test", cfg.ratios.test)?,
            };
            if let Some(list) = ctx.params.raw("models") {
                cfg.kinds = list.split(',').map(|s| s.trim().parse::<ModelKind>().map_err(CliError::usage)).collect::<CliResult<_>>()?;
            }
            let cmp = compare_models(&corpus, &input.name(), &cfg)?;
            (cmp.results.into_iter().map(|(k, e)| (k, e.metrics)).collect(), cmp.provenance)
        }
        (None, false) => {
            let mut files = metrics_inputs.iter().map(|i| parse_metrics(i)).collect::<CliResult<Vec<_>>>()?;
            files.sort_by_key(|f| ModelKind::ALL.iter().position(|k| *k == f.kind));
            let first = &files[0];
            for f in &files[1..] {
                if (&f.dataset, &f.subset, f.documents, &f.seed) != (&first.dataset, &first.subset, first.documents, &first.seed) {
                    return Err(CliError::data("metrics files come from different datasets, subsets or seeds"));
                }
            }
            for w in files.windows(2) {
                if w[0].kind == w[1].kind {
                    return Err(CliError::data(format!("two metrics files for model {}", w[0].kind.as_str())));
                }
            }
            let provenance = Provenance {
                dataset: first.dataset.clone(),
                split: format!("{} subset, {} of {} documents", first.subset, first.report.total, first.documents),
                seed: first.seed.parse().unwrap_or(ctx.seed),
            };
            (files.into_iter().map(|f| (f.kind, f.report)).collect(), provenance)
        }
        _ => return Err(CliError::usage("report takes either metrics files or one corpus")),
    };
    let refs: Vec<(ModelKind, &MetricsReport)> = rows.iter().map(|(k, m)| (*k, m)).collect();
    let meta = ctx.meta();
    let table = format!("{}{}", io::preamble("comparison", &meta), report_table3(&refs, &provenance)?);
    let csv = format!("{}{}", io::preamble("comparison", &meta), table3_csv(&refs)?);
    ctx.write("table3.txt", &table)?;
    ctx.write("table3.csv", &csv)?;
    Ok(ctx.finish())
}

fn generate(mut ctx: Ctx) -> CliResult<Vec<PathBuf>> {
    ctx.inputs.check_only(&[])?;
    let d = RiskCorpusConfig::default();
    let cfg = RiskCorpusConfig {
        n_docs: ctx.params.get_or("docs", d.n_docs)?,
        min_len: ctx.params.get_or("min_len", d.min_len)?,
        max_len: ctx.params.get_or("max_len", d.max_len)?,
        own_keyword: ctx.params.get_or("own_keyword", d.own_keyword)?,
        other_keyword: ctx.params.get_or("other_keyword", d.other_keyword)?,
        stopword: ctx.params.get_or("stopword", d.stopword)?,
        seed: ctx.seed,
    };
    let probs = [cfg.own_keyword, cfg.other_keyword, cfg.stopword];
    if cfg.n_docs == 0 || cfg.min_len == 0 || cfg.min_len > cfg.max_len || probs.iter().any(|p| !(0.0..=1.0).contains(p)) || probs.iter().sum::<f64>() > 1.0 {
        return Err(CliError::usage("need docs >= 1, 1 <= min_len <= max_len and word probabilities in [0, 1] summing to at most 1"));
    }
    let corpus = risk_corpus(&cfg);
    let mut buf = io::preamble("corpus", &ctx.meta()).into_bytes();
    corpus.write_jsonl(&mut buf)?;
    ctx.write("corpus.jsonl", &String::from_utf8(buf).expect("corpus is UTF-8"))?;
    Ok(ctx.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_specs_parse() {
        let g = grid_space("lr=0.01,0.003; hidden=16,32").unwrap();
        assert_eq!(g[0].0, "lr");
        assert_eq!(g[1].1, vec![ParamValue::Int(16), ParamValue::Int(32)]);
        let r = random_space("lr=log:0.001:0.1;trees=int:5:50;optimizer=choice:adam,rmsprop").unwrap();
        assert_eq!(r[1].1, Sampler::IntUniform { low: 5, high: 50 });
        assert!(grid_space("window=3").is_err());
        assert!(random_space("lr=beta:1:2").is_err());
    }

    #[test]
    fn model_settings_apply_overrides() {
        let p = Params::resolve(
            &["lr", "optimizer", "clip_norm", "trees", "mtry"],
            None,
            &[("lr", Some("0.05")), ("optimizer", Some("rmsprop")), ("clip_norm", Some("none")), ("trees", Some("7")), ("mtry", Some("3"))],
        )
        .unwrap();
        let s = model_settings(&p, 9).unwrap();
        assert_eq!(s.recurrent.optimizer.kind, OptimizerKind::RmsProp);
        assert_eq!(s.recurrent.optimizer.learning_rate, 0.05);
        assert_eq!(s.recurrent.clip_norm, None);
        assert_eq!((s.forest.n_trees, s.forest.mtry, s.forest.seed), (7, Some(3), 9));
    }
}
