pub mod clouds;
pub mod demo;
pub mod error;
pub mod experiment;
pub mod report;
pub mod single;
