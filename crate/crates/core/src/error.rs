use thiserror::Error;

use crate::lattice::LatticeKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid site for {kind:?}: {reason}")]
    InvalidSite { kind: LatticeKind, reason: String },

    #[error("D^2 = {d2} is not attainable on {kind:?}")]
    NotAttainable { kind: LatticeKind, d2: u64 },

    #[error("unsupported case {case} for D^2 = {d2} on {kind:?}")]
    Unsupported {
        kind: LatticeKind,
        d2: u64,
        case: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("torus is not commensurate: {0}")]
    Commensurability(String),

    #[error("budget exceeded: {what} needs {needed}, budget is {budget}")]
    Budget {
        what: String,
        needed: usize,
        budget: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
