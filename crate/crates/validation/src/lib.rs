//! Home of the `acceptance` test binary, which checks the whole pipeline
//! against reference values and runtime budgets. Run it with
//! `cargo test -p nplasmon-validation --test acceptance`.
