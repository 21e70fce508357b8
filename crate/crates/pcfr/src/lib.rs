//! PCF with a real ground type: a reference interpreter, forward and
//! reverse automatic differentiation as source-to-source transformations,
//! a finite-difference oracle, and an empirical laboratory for locating
//! and explaining the (measure-zero) set of points where AD fails.

pub mod ad;
pub mod corpus;
pub mod eval;
pub mod gen;
pub mod lab;
pub mod oracle;
pub mod parser;
pub mod pretty;
pub mod registry;
pub mod syntax;
pub mod typecheck;
