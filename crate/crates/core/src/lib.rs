//! Fair resource substitution on directed task networks.
//!
//! An [`network::Instance`] holds a directed multigraph whose arcs carry an
//! initial resource assignment. Reassigning arcs to compatible resources can
//! reduce the per-node, per-resource imbalance between inflow and outflow.
//! The crate computes such reassignments under efficiency and fairness
//! objectives, shrinks the decision space with a learned scorer and
//! betweenness-driven candidate limits, and summarizes trade-offs in a
//! Pareto portfolio.

pub mod betweenness;
pub mod candidates;
pub mod compat;
pub mod fixtures;
pub mod generator;
pub mod models;
pub mod network;
pub mod portfolio;
pub mod scorer;
pub mod solver;
