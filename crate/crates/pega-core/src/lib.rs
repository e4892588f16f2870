//! Privacy-preserving genetic algorithm engine for the traveling salesman
//! problem, built on a (2,2)-threshold Paillier cryptosystem and a pair of
//! non-colluding servers.
//!
//! The crate is organised around the data flow of an outsourced solve:
//!
//! * [`fixedpoint`] — signed fixed-point encoding of rationals into the
//!   plaintext ring `Z_N`.
//! * [`thpc`] — threshold Paillier: key generation, encryption, full and
//!   split decryption, additive / scalar homomorphisms, wire encoding.
//! * [`channel`] — metered two-party transport (in-process and TCP) between
//!   the twin servers.
//! * [`protocols`] — the secure two-party building blocks: division,
//!   comparison, selection probabilities, fitness-proportionate selection,
//!   argmin and tournament compositions.
//! * [`tsp`] — TSPLIB ingestion, cost matrices, city pseudonymization and
//!   instance encryption.
//! * [`ga`] — the plaintext reference genetic algorithm whose operators and
//!   random streams the encrypted engine mirrors exactly.
//! * [`pega`] — the encrypted evolutionary engine orchestrating the user and
//!   both servers.
//! * [`stats`] — summary statistics and the rank-sum significance test used
//!   by the experiment tooling.

pub mod channel;
pub mod error;
pub mod fixedpoint;
pub mod ga;
pub mod pega;
pub mod protocols;
pub mod rng;
pub mod stats;
pub mod thpc;
pub mod tsp;

pub use error::{Error, Result};
