use ammfg_core::ErrorKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ammfg_core::Error),
    #[error("fixed point did not converge in {iterations} iterations (residual {residual})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Admissibility => 3,
                ErrorKind::Numerical => 4,
            },
            CliError::NonConvergence { .. } => 5,
            CliError::Io(_) => 6,
        }
    }

    /// Short machine-readable tag printed with the message.
    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "admissibility",
            4 => "numerical",
            5 => "non-convergence",
            _ => "io",
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
