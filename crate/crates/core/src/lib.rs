//! A 162-item randomness test battery, p-value matrices over many sequences,
//! and tools for measuring and pruning statistical dependence between items.

pub mod bitseq;
pub mod depscope;
pub mod genrand;
pub mod minset;
pub mod pmatrix;
pub mod special;
pub mod sts162;
