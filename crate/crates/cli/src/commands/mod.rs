pub mod analyze;
pub mod evaluate;
pub mod generate;
pub mod train;
