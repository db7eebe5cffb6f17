pub mod clob;
pub mod cpmm;
pub mod lmsr;
pub mod seed;
