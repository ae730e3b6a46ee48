//! Structural capacity analysis for chemical reaction networks.

pub mod child_selection;
pub mod kinetics;
pub mod linalg;
pub mod net;
pub mod poly;
pub mod report;
pub mod symbolic;
