//! Finite scenario-tree markets with proportional transaction costs.
//!
//! The library models a discrete-time market carrying bid-ask spreads
//! through per-node solvency cones, and exposes the cone geometry, the
//! consistent-price-system machinery, no-arbitrage-of-second-kind (NA2)
//! checks, superhedging duality and the one-period closure-failure
//! laboratory as linear programs over a dense simplex kernel (float or
//! exact rational arithmetic).

pub mod arbitrage;
pub mod cone;
pub mod fatou;
pub mod lp;
pub mod market;
pub mod pricing;
pub mod report;
pub mod superhedge;
