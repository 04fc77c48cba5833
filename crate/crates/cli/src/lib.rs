//! File formats, the experiment harness and the command-line front end for `gramdp`.

pub mod cli;
pub mod harness;
pub mod io;
