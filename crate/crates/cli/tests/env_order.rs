//! Runs in its own process because it changes the environment.

use std::path::PathBuf;

use serde_json::Value;

fn order_of(args: &[&str]) -> Value {
    let out = crjet::run(std::iter::once("crjet").chain(args.iter().copied()));
    assert_eq!(out.code, 0, "{}", out.stderr);
    serde_json::from_str::<Value>(&out.stdout).unwrap()["result"]["order"].clone()
}

#[test]
fn environment_overrides_only_the_default_order() {
    let file = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("inputs/heisenberg2.crj").display().to_string();
    assert_eq!(order_of(&["analyze", &file, "--json"]), 6);
    std::env::set_var(crjet::commands::ORDER_ENV, "9");
    assert_eq!(order_of(&["analyze", &file, "--json"]), 9);
    assert_eq!(order_of(&["analyze", &file, "--json", "--order", "7"]), 7);
    std::env::set_var(crjet::commands::ORDER_ENV, "nine");
    let out = crjet::run(["crjet", "analyze", &file]);
    assert_eq!(out.code, crjet::EXIT_ERROR);
    std::env::remove_var(crjet::commands::ORDER_ENV);
}
