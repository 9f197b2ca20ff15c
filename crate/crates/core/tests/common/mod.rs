#![allow(dead_code)]

pub mod check;
pub mod oracle;
pub mod scenarios;
