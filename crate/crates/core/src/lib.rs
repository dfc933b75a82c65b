//! Synthetic anti-money-laundering transaction graphs and the tooling around
//! them: topology and transaction simulation, typology injection, rule-based
//! monitoring, GCN and importance-sampled GCN training, incremental inference,
//! and a reordered difference-coded graph store.
//!
//! Hot loops run on rayon when the `parallel` feature is enabled (default) and
//! sequentially otherwise, with identical results.

pub mod deltainfer;
pub mod dense;
pub mod error;
pub mod fastsamp;
pub mod gcnkit;
pub mod gstore;
pub mod kv;
pub mod money;
pub mod par;
pub mod seed;
pub mod sentinel;
pub mod simnet;
pub mod txflow;
pub mod typology;

pub use error::{Error, Result};
pub use money::Cents;
