use henon_mme::henon_model::HenonError;
use henon_mme::measure_stats::StatsError;
use henon_mme::orbit_search::OrbitError;
use henon_mme::shift_core::ShiftError;
use henon_mme::symbolic_words::WordsError;

#[derive(Debug)]
pub enum CliError {
    /// bad flags, config or input files
    Usage(String),
    /// the analysis itself failed
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Analysis(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Analysis(m) => write!(f, "analysis failed: {m}"),
        }
    }
}

impl From<ShiftError> for CliError {
    fn from(e: ShiftError) -> Self {
        match e {
            ShiftError::EmptyGraph
            | ShiftError::DuplicateVertex(_)
            | ShiftError::UnknownVertex(_)
            | ShiftError::InvalidCylinder(_)
            | ShiftError::HorizonTooShort(_)
            | ShiftError::InvalidInput(_) => CliError::Usage(e.to_string()),
            _ => CliError::Analysis(e.to_string()),
        }
    }
}

impl From<WordsError> for CliError {
    fn from(e: WordsError) -> Self {
        match e {
            WordsError::MissingSpelling(_) => CliError::Analysis(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<HenonError> for CliError {
    fn from(e: HenonError) -> Self {
        match e {
            HenonError::InvalidInput(_) => CliError::Usage(e.to_string()),
            _ => CliError::Analysis(e.to_string()),
        }
    }
}

impl From<OrbitError> for CliError {
    fn from(e: OrbitError) -> Self {
        match e {
            OrbitError::InvalidInput(_) => CliError::Usage(e.to_string()),
            _ => CliError::Analysis(e.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::InvalidInput(_) => CliError::Usage(e.to_string()),
            _ => CliError::Analysis(e.to_string()),
        }
    }
}
