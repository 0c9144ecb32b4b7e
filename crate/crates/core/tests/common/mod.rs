#![allow(dead_code)]

pub mod markov;
