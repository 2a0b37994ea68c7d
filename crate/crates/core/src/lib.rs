//! Equation-planted Ising benchmarks.
//!
//! Random `r`-regular `k`-XORSAT systems are generated and certified with
//! GF(2) linear algebra, compiled clause by clause into two-body integer
//! Ising models through small gadgets, and then attacked with parallel
//! tempering. Because the source system is linear, ground-state energy and
//! degeneracy of every compiled instance are known exactly.
//!
//! Module map:
//!
//! * [`gf2`]: packed bit matrices, row reduction, affine solution sets.
//! * [`xorsat`]: regular system generation, planting, cost, analysis.
//! * [`gadget`]: two-body parity gadgets, brute-force search and verification.
//! * [`ising`]: compilation to Ising instances, energies, text format.
//! * [`pt`]: parallel tempering with optional Houdayer cluster moves.
//! * [`analysis`]: order statistics, exponential fits, chi-squared tests, Hamming profiles.
//! * [`bench`]: reproducible batch pipelines used by the command-line tool.

pub mod analysis;
pub mod bench;
pub mod gadget;
pub mod gf2;
pub mod ising;
pub mod pt;
pub mod seed;
pub mod xorsat;
