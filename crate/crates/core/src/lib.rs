//! Finite models of orbifold atlases: groups and bimodules, chart layers,
//! abstract atlases, the groupoid of fractions, finite groupoid models and
//! Morita comparison.

pub mod bimodule;
pub mod exec;
pub mod group;
pub mod report;
pub mod satake;
pub mod uf;
pub mod atlas;
pub mod groupoid_model;
pub mod catalog;
pub mod fractions;
pub mod equivalence;
pub mod document;
pub mod laws;
pub mod commands;
