//! Simulation and property-verification laboratory for random circle maps
//! `f_w(x) = alpha * xi(x + w0) + a  (mod 1)` driven by i.i.d. uniform noise
//! on `[-eps, eps]`.
//!
//! The crate is organised along the pipeline of the underlying construction:
//! map geometry ([`map`]), deterministic noise paths ([`noise`]), orbit
//! iteration and large-deviation probes ([`orbit`]), hyperbolic / sparse time
//! detection ([`times`]), monotone branch tracking and the expansion event
//! ([`branch`]), Young times ([`young`]), the pathwise return-time partition
//! ([`tower`]) and Ulam transfer-operator machinery ([`measure`]).

pub mod branch;
pub mod dd;
pub mod map;
pub mod measure;
pub mod noise;
pub mod oracles;
pub mod orbit;
pub mod times;
pub mod tower;
pub mod young;
