//! Mutation-driven test-case generation for finite-state reactive models.
//!
//! The pipeline: parse a `.rm` model into an AST ([`lang`]), elaborate it into a
//! symbolic transition system ([`sts`]), enumerate syntactic mutations and build
//! conditional mutants ([`mutate`]), decide potential/definite killability and
//! extract killing tests ([`kill`]), cross-check killability through bounded
//! hyperproperty evaluation ([`hyper`]), and make non-determinism controllable
//! via a fresh input ([`determinize`]).

pub mod corpus;
pub mod determinize;
pub mod domain;
pub mod hyper;
pub mod kill;
pub mod lang;
pub mod mutate;
pub mod pred;
pub mod report;
pub mod sts;

pub use domain::{Value, Valuation, VarDomain};
pub use kill::{KillStatus, KillVerdict, Test};
pub use lang::ModelAst;
pub use mutate::{ConditionalMutant, Mutation, MutationOperator};
pub use pred::Pred;
pub use sts::{Sts, TracePrefix};
