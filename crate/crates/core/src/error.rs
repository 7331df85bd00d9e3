use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite velocity at particle {particle} (t = {time:.6e} s)")]
    NonFiniteVelocity { particle: usize, time: f64 },

    #[error("non-positive density {density:e} at particle {particle} (t = {time:.6e} s)")]
    NonPositiveDensity {
        particle: usize,
        density: f64,
        time: f64,
    },

    #[error("non-finite state at particle {particle} (t = {time:.6e} s)")]
    NonFiniteState { particle: usize, time: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
