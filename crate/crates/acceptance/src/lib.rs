//! Holds the acceptance suite in `tests/acceptance.rs`, which prints one
//! pass/fail line per criterion. Run it alone with
//! `cargo test -p mixbo-acceptance --test acceptance`; pass criterion numbers
//! after `--` to run a subset.
