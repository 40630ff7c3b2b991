use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A configuration value failed validation; `field` is its path.
    #[error("{field}: {message}")]
    Config { field: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] ridgeline::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        CliError::Config { field: field.to_string(), message: message.into() }
    }

    fn is_validation(&self) -> bool {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => true,
            CliError::Core(e) => core_is_validation(e),
        }
    }

    /// 2 for invalid input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            2
        } else {
            1
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let kind = if self.is_validation() { "validation" } else { "runtime" };
        let mut value = json!({ "status": "error", "kind": kind, "message": self.to_string() });
        match self {
            CliError::Config { field, .. } => value["field"] = json!(field),
            CliError::Core(e) => {
                if let Some(name) = unknown_landmark(e) {
                    value["landmark"] = json!(name);
                }
            }
            CliError::Usage(_) => {}
        }
        value
    }
}

fn core_is_validation(e: &ridgeline::Error) -> bool {
    use ridgeline::Error as E;
    matches!(e.root(), E::InvalidArgument(_) | E::UnknownLandmark(_) | E::Parse { .. } | E::Json(_))
}

fn unknown_landmark(e: &ridgeline::Error) -> Option<&str> {
    match e.root() {
        ridgeline::Error::UnknownLandmark(name) => Some(name),
        _ => None,
    }
}
