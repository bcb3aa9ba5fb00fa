use thiserror::Error;

#[derive(Debug, Error)]
pub enum CspError {
    #[error("invalid coverage spec: {0}")]
    InvalidSpec(String),
    #[error("city index {index} out of range for instance with {n} cities")]
    CityOutOfRange { index: usize, n: usize },
    #[error("city {0} appears more than once in tour")]
    DuplicateCity(usize),
    #[error("tour is empty")]
    EmptyTour,
    #[error("instance has {n} cities, exact solver is limited to {max_n}")]
    TooLarge { n: usize, max_n: usize },
    #[error("instance must have at least one city")]
    NoCities,
    #[error("malformed instance document: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
