//! Diagnostics: ledger, norms, weak form, convergence and consistency checks.
pub mod consistency;
pub mod convergence;
pub mod ledger;
pub mod norms;
pub mod rows;
pub mod weak;
