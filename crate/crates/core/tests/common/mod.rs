#![allow(dead_code)]

pub mod tai;
