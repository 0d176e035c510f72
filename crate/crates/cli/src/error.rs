use riskminer_core::corpus::CorpusError;
use riskminer_core::eval::EvalError;
use riskminer_core::features::FeatureError;
use riskminer_core::finance::FinanceError;
use riskminer_core::models::ModelError;
use riskminer_core::pipeline::PipelineError;
use riskminer_core::preprocess::PreprocessError;
use riskminer_core::textfmt::FormatError;
use riskminer_core::topics::TopicError;
use thiserror::Error;

/// Every failure the tool reports, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::MissingLexicon => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<TopicError> for CliError {
    fn from(e: TopicError) -> Self {
        match e {
            TopicError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::BadRatios(_) | EvalError::BadK { .. } | EvalError::InvalidSampler { .. } | EvalError::EmptySpace => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<FinanceError> for CliError {
    fn from(e: FinanceError) -> Self {
        match e {
            FinanceError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Preprocess(e) => e.into(),
            PipelineError::Feature(e) => e.into(),
            PipelineError::Model(e) => e.into(),
            PipelineError::Eval(e) => e.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_category() {
        assert_eq!(CliError::usage("x").exit_code(), 1);
        assert_eq!(CliError::from(CorpusError::DuplicateId("a".into())).exit_code(), 2);
        assert_eq!(CliError::from(ModelError::InvalidConfig("bad".into())).exit_code(), 1);
        assert_eq!(CliError::from(EvalError::BadK { k: 1, n: 3 }).exit_code(), 1);
        assert_eq!(CliError::Internal("disk".into()).exit_code(), 3);
    }

    #[test]
    fn duplicate_id_message_names_the_id() {
        let e = CliError::from(CorpusError::DuplicateId("doc-7".into()));
        assert!(e.to_string().contains("doc-7"));
    }
}
