#![allow(dead_code)]

pub mod gesture_oracle;
pub mod programs;
