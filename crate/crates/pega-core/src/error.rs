use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A value does not fit the plaintext ring at the requested scale.
    #[error("fixed-point overflow: |{value}| * 2^{scale} does not fit below N/2")]
    Overflow { value: String, scale: u32 },

    /// Reciprocal of zero requested, locally or by a protocol peer.
    #[error("division by zero")]
    DivisionByZero,

    /// Ciphertext or partial decryption failed the ring checks.
    #[error("malformed ciphertext: {0}")]
    MalformedCiphertext(String),

    /// Homomorphic addition of ciphertexts with different scale tags.
    #[error("scale mismatch: {left} vs {right}")]
    ScaleMismatch { left: u32, right: u32 },

    /// The peer hung up or the transport failed.
    #[error("channel closed: {0}")]
    ChannelClosed(String),

    /// A received frame does not decode as the expected message.
    #[error("bad frame: {0}")]
    BadFrame(String),

    /// The modulus cannot absorb the blinding required by the requested
    /// comparison bound.
    #[error("modulus too small for comparison bound (need {needed_bits} bits below N/2)")]
    ModulusTooSmall { needed_bits: u32 },

    /// All fitness mass vanished; selection probabilities are undefined.
    #[error("degenerate population: fitness sum is zero")]
    DegeneratePopulation,

    /// TSPLIB input could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// TSPLIB input uses a weight type or format outside the supported set.
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    /// A tour crossed a pair marked unreachable (zero entry).
    #[error("unreachable edge between cities {i} and {j}")]
    UnreachableEdge { i: u32, j: u32 },

    /// I/O error wrapper for file-backed interfaces.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Container or key file failed validation.
    #[error("invalid file: {0}")]
    InvalidFile(String),

    /// Run parameters outside their documented ranges.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, Error>;
