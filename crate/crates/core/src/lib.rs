pub mod catalog;
pub mod forms;
pub mod graph;
pub mod leaves;
pub mod orbifold;
pub mod report;
pub mod scalar;
pub mod scenario;
pub mod surgery;
pub mod svg;
