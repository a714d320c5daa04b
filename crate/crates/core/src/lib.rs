//! Learning syntactic program transformations from before/after examples.
//!
//! Programs are generic labeled trees ([`tree`]). Example pairs are diffed
//! ([`edit_distance`]), split into clustered edit components
//! ([`extraction`]) and generalized into rewrite rules of the transformation
//! language ([`dsl`]) by [`synthesis`]; [`ranking`] picks the program most
//! likely to carry over to unseen inputs, and [`harness`] applies it under
//! a test oracle.

pub mod cli;
pub mod dsl;
pub mod edit_distance;
pub mod extraction;
pub mod harness;
pub mod ranking;
pub mod synthesis;
pub mod tree;
