pub mod bdd;
pub mod benders;
pub mod cli;
pub mod formulation;
pub mod greedy;
pub mod io;
pub mod localbranching;
pub mod milp;
pub mod model;
pub mod oracle;
pub mod par;
pub mod preprocess;
pub mod stats;
