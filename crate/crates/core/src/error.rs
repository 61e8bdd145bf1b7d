use crate::angular::AngularError;
use crate::ode::OdeError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Angular(#[from] AngularError),
    #[error(transparent)]
    Integration(#[from] OdeError),
    #[error("no polarizability for {level} with |m_j| = {abs_two_m}/2")]
    MissingPolarizability { level: String, abs_two_m: u32 },
    #[error("channel {0} has no non-negative resonance field")]
    NoResonance(u32),
    #[error("field inversion out of range at t = {t} us: {detail}")]
    OutOfRange { t: f64, detail: String },
    #[error("invalid detuning profile: {0}")]
    InvalidProfile(String),
    #[error("invalid catalog: {0}")]
    Catalog(String),
    #[error("channel {id}: stored angular factor {stored} but recomputed {recomputed}")]
    CatalogMismatch { id: u32, stored: f64, recomputed: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
