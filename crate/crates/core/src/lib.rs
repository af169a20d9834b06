//! Flat affine counter systems with finite monoids: reachability and
//! model checking of linear-time properties by reduction to integer
//! linear programming over iterated path schemas.

pub mod corpus;
pub mod cycleanalysis;
pub mod exactmat;
pub mod format;
pub mod ilp;
pub mod logic;
pub mod oracle;
pub mod qbfgen;
pub mod schema;
pub mod solver;
pub mod system;
