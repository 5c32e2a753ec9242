use thiserror::Error;

/// Errors raised by the certification library.
#[derive(Debug, Error)]
pub enum CertError {
    /// An input violated a documented pre-condition.
    #[error("input contract violated: {0}")]
    Contract(String),

    /// A parameter lies outside the mathematical domain of the operation.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// The kernel lacks a capability the operation requires
    /// (e.g. an explicit transition matrix).
    #[error("kernel capability missing: {0}")]
    Capability(String),

    /// The requested combination of rate family and plan falls outside the
    /// scope of the theorem backing the operation.
    #[error("out of scope: {0}")]
    Scope(String),

    /// A sampler produced a state outside the kernel's declared state space.
    #[error("sampled state left the state space: {0}")]
    OutOfSpace(String),

    /// A tabulated estimate was queried outside its grid.
    #[error("query outside tabulated grid: {0}")]
    OutOfGrid(String),
}

pub type Result<T> = std::result::Result<T, CertError>;
