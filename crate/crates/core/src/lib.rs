//! Concurrent-failure recovery for minimum-storage regenerating codes.
//!
//! The crate is layered bottom-up:
//!
//! * [`gf`]: GF(2^8) arithmetic and dense linear algebra;
//! * [`codes`]: systematic Reed-Solomon and product-matrix MSR codes with the
//!   single-failure `enc`/`rec` building blocks;
//! * [`recovery`]: conventional, single-failure and concurrent recovery with
//!   virtual symbols, good/bad pattern classification and escalation;
//! * [`analysis`]: closed-form bandwidth bounds, bad-pattern census and the
//!   Markov reliability model;
//! * [`cluster`]: an in-process storage cluster with rotated placement, a
//!   pipelined relayer and byte-exact traffic accounting;
//! * [`cli`]: the `corectl` command-line front end.

pub mod codes;
pub mod gf;
pub mod recovery;
pub mod analysis;
pub mod cluster;
pub mod cli;
