//! `riskminer`: staged command-line front end for financial-text risk analysis.

mod commands;
mod error;
mod io;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "riskminer", version, about = "Financial-text risk detection: preprocessing, features, topics, classifiers and ratio screening")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Input files; each file's kind is recognized from its content.
    #[arg(long = "in", value_name = "PATH", num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Seed for every random stream; also recorded in each artifact.
    #[arg(long)]
    pub seed: Option<u64>,
    /// key=value file of stage parameters; flags win on conflict.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

/// Declares a stage's flags. Every flag is an optional string that can also
/// come from the config file under the same name (dashes or underscores).
macro_rules! stage {
    ($(#[$m:meta])* $name:ident [$($group:ident: $gty:ty),*] { $($(#[$fm:meta])* $field:ident),* $(,)? }) => {
        $(#[$m])*
        #[derive(Args, Debug, Clone)]
        pub struct $name {
            #[command(flatten)]
            pub common: Common,
            $(
                #[command(flatten)]
                pub $group: $gty,
            )*
            $(
                $(#[$fm])*
                #[arg(long)]
                pub $field: Option<String>,
            )*
        }

        impl $name {
            pub fn keys(&self) -> Vec<&'static str> {
                #[allow(unused_mut)]
                let mut k = vec!["seed" $(, stringify!($field))*];
                $(k.extend(<$gty>::KEYS);)*
                k
            }

            pub fn flags(&self) -> Vec<(&'static str, Option<&str>)> {
                #[allow(unused_mut)]
                let mut f: Vec<(&'static str, Option<&str>)> = vec![$((stringify!($field), self.$field.as_deref())),*];
                $(f.extend(self.$group.flags());)*
                f
            }
        }
    };
}

/// Model hyperparameters shared by train, cv, search and report.
#[derive(Args, Debug, Clone)]
pub struct ModelFlags {
    /// Naive Bayes Laplace smoothing.
    #[arg(long)]
    pub nb_alpha: Option<String>,
    /// SVM regularization strength.
    #[arg(long)]
    pub svm_lambda: Option<String>,
    #[arg(long)]
    pub svm_epochs: Option<String>,
    /// pegasos or full-batch.
    #[arg(long)]
    pub svm_mode: Option<String>,
    /// Number of trees in the forest.
    #[arg(long)]
    pub trees: Option<String>,
    #[arg(long)]
    pub mtry: Option<String>,
    #[arg(long)]
    pub min_leaf: Option<String>,
    #[arg(long)]
    pub max_depth: Option<String>,
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub embed_dim: Option<String>,
    /// Recurrent training epochs.
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    /// sgd, adam or rmsprop.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    /// L2 penalty on recurrent weight blocks.
    #[arg(long)]
    pub l2: Option<String>,
    /// Gradient-norm cap, or "none".
    #[arg(long)]
    pub clip_norm: Option<String>,
    /// Sequences are truncated to this many tokens.
    #[arg(long)]
    pub max_len: Option<String>,
    /// parallel or sequential.
    #[arg(long)]
    pub exec: Option<String>,
}

impl ModelFlags {
    pub const KEYS: &'static [&'static str] = &[
        "nb_alpha", "svm_lambda", "svm_epochs", "svm_mode", "trees", "mtry", "min_leaf", "max_depth", "hidden",
        "embed_dim", "epochs", "batch_size", "optimizer", "lr", "l2", "clip_norm", "max_len", "exec",
    ];

    pub fn flags(&self) -> Vec<(&'static str, Option<&str>)> {
        let v = [
            &self.nb_alpha, &self.svm_lambda, &self.svm_epochs, &self.svm_mode, &self.trees, &self.mtry, &self.min_leaf,
            &self.max_depth, &self.hidden, &self.embed_dim, &self.epochs, &self.batch_size, &self.optimizer, &self.lr,
            &self.l2, &self.clip_norm, &self.max_len, &self.exec,
        ];
        Self::KEYS.iter().copied().zip(v.into_iter().map(Option::as_deref)).collect()
    }
}

stage!(
    /// Load and validate a corpus (jsonl or csv).
    IngestArgs [] {
        /// jsonl or csv; detected from content when omitted.
        format,
    }
);

stage!(
    /// Clean, segment, normalize, remove stopwords and stem.
    PreprocessArgs [] {
        /// Stopword list file, or "none".
        stopwords,
        /// true or false.
        stem,
        lowercase,
        strip_markup,
        exec,
    }
);

stage!(
    /// Build the vocabulary and TF-IDF model (fitted on the training part when a split is given).
    FeaturizeArgs [] {
        min_df,
        max_df,
        exec,
    }
);

stage!(
    /// Shuffle documents into train/validation/test parts.
    SplitArgs [] {
        train,
        val,
        test,
        /// Keep class proportions in every part (default true).
        stratify,
    }
);

stage!(
    /// Train word embeddings with negative sampling.
    EmbedArgs [] {
        /// skipgram or cbow.
        mode,
        dim,
        window,
        negatives,
        epochs,
        lr,
    }
);

stage!(
    /// Fit an LDA topic model by collapsed Gibbs sampling.
    TopicsArgs [] {
        k,
        iterations,
        alpha,
        beta,
        /// Terms listed per topic.
        top,
        min_df,
        max_df,
    }
);

stage!(
    /// Rank each document's terms by TF-IDF weight.
    KeywordsArgs [] {
        top,
        min_df,
        max_df,
    }
);

stage!(
    /// Train one classifier on the training part.
    TrainArgs [model_flags: ModelFlags] {
        /// nb, svm, forest, rnn or lstm.
        model,
    }
);

stage!(
    /// Predict labels and class scores for every document.
    PredictArgs [] {}
);

stage!(
    /// Confusion matrix, macro metrics and ROC curves on one subset.
    EvaluateArgs [] {
        /// test, val, train or all (default test with a split, else all).
        subset,
    }
);

stage!(
    /// Stratified k-fold cross-validation on the training part.
    CvArgs [model_flags: ModelFlags] {
        model,
        folds,
        /// accuracy or macro_f1.
        metric,
    }
);

stage!(
    /// Grid or random hyperparameter search scored by cross-validation.
    SearchArgs [model_flags: ModelFlags] {
        model,
        folds,
        metric,
        /// e.g. "lr=0.01,0.003;hidden=16,32".
        grid,
        /// e.g. "lr=log:0.001:0.1;hidden=int:8:64;optimizer=choice:adam,rmsprop".
        random,
        /// Number of random draws.
        draws,
    }
);

stage!(
    /// Liquidity/debt screening and period-over-period trends.
    FinanceArgs [] {
        liquidity_floor,
        debt_ceiling,
    }
);

stage!(
    /// Model comparison table from metrics files, or end to end from a corpus.
    ReportArgs [model_flags: ModelFlags] {
        /// Comma-separated model kinds (corpus mode).
        models,
        train,
        val,
        test,
        min_df,
        max_df,
    }
);

stage!(
    /// Write a synthetic labelled risk corpus.
    GenerateArgs [] {
        docs,
        min_len,
        max_len,
        own_keyword,
        other_keyword,
        stopword,
    }
);

#[derive(Subcommand, Debug)]
pub enum Command {
    Ingest(IngestArgs),
    Preprocess(PreprocessArgs),
    Featurize(FeaturizeArgs),
    Split(SplitArgs),
    Embed(EmbedArgs),
    Topics(TopicsArgs),
    Keywords(KeywordsArgs),
    Train(TrainArgs),
    Predict(PredictArgs),
    Evaluate(EvaluateArgs),
    Cv(CvArgs),
    Search(SearchArgs),
    Finance(FinanceArgs),
    Report(ReportArgs),
    Generate(GenerateArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli.command) {
        Ok(written) => {
            for p in written {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = match e {
                CliError::Usage(_) => "usage error",
                CliError::Data(_) => "data error",
                CliError::Internal(_) => "internal error",
            };
            eprintln!("riskminer: {kind}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn stage_keys_cover_flags() {
        let cli = Cli::try_parse_from(["riskminer", "train", "--in", "a", "--out", "o", "--model", "nb", "--lr", "0.1"]).unwrap();
        let Command::Train(args) = cli.command else { panic!("expected train") };
        let keys = args.keys();
        for (k, _) in args.flags() {
            assert!(keys.contains(&k), "{k}");
        }
        assert!(args.flags().contains(&("lr", Some("0.1"))));
    }

    #[test]
    fn unknown_flag_is_rejected() {
        let e = Cli::try_parse_from(["riskminer", "ingest", "--in", "a", "--out", "o", "--bogus", "1"]).unwrap_err();
        assert!(e.use_stderr());
    }
}
