pub mod constraints;
pub mod corpus;
pub mod diffusion;
pub mod domain;
pub mod edgesim;
pub mod evaluation;
pub mod interface;
pub mod numerics;
