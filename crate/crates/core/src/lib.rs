//! Planning toolkit for multi-robot construction of block structures: decomposition into
//! substructures, build ordering, MILP planning per substructure, parallel stages, and a
//! grid-world simulator to check the resulting schedules.

pub mod decompose;
pub mod milp;
pub mod ordering;
pub mod parallel;
pub mod reachability;
pub mod simulate;
pub mod world;
