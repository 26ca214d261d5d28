//! The process-network surface language: syntax trees, parser, static
//! checks, a flattened instruction form, and the reference interpreter.

pub mod ast;
pub mod compile;
pub mod flat;
pub mod interp;
pub mod parser;
pub mod validate;

pub use ast::{LocalDecl, NetworkDecl, ProcessDecl, Stmt, Ty};
pub use compile::{compile, CompileError, CompiledSystem};
pub use interp::{run_reference, run_reference_with_order, RefResult, RefStatus};
pub use parser::{parse_network, pretty, ParseError};
pub use validate::{validate_network, Diagnostic};
