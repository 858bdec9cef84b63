use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    Core(priorglasso::Error),
    Config(String),
    Usage(String),
    MissingInput(PathBuf),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Config(_) => "invalid_config",
            CliError::Usage(_) => "usage",
            CliError::MissingInput(_) => "missing_input",
            CliError::Io { .. } => "io",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::MissingInput(p) => write!(f, "input path does not exist: {}", p.display()),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<priorglasso::Error> for CliError {
    fn from(e: priorglasso::Error) -> Self {
        CliError::Core(e)
    }
}
