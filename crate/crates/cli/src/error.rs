use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<oncovir::Error> for CliError {
    fn from(e: oncovir::Error) -> Self {
        use oncovir::Error as E;
        match e {
            E::InvalidParameter { .. }
            | E::InvalidSchedule(_)
            | E::InvalidInput(_)
            | E::Domain { .. } => CliError::Config(e.to_string()),
            E::StepUnderflow { .. } | E::NonFinite { .. } | E::ContinuationFailed { .. } => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}
