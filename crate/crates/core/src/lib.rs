//! Partial evaluation for a small flowchart language.

pub mod bta;
pub mod gen;
pub mod guest;
pub mod interp;
pub mod lang;
pub mod mix;
pub mod mix_object;
pub mod projections;
pub mod report;
pub mod value;
pub mod verify;
