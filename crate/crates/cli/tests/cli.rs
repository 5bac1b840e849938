//! End-to-end checks of the cascade binary: exit codes, the run command
//! across backends, and the dump commands.

use std::path::PathBuf;
use std::process::{Command, Output};

fn cascade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cascade-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const ADD_BUNDLE: &str = "Demo>>add: a with: b\n\t^ a + b\n\nDemo>>loop: n\n\t| s |\n\ts := 0.\n\t1 to: n do: [ :i | s := s + i ].\n\t^ s\n";

#[test]
fn run_prints_the_result() {
    let file = fixture("add.slang", ADD_BUNDLE);
    let out = cascade(&["run", file.to_str().unwrap(), "add:with:", "2", "3", "--backend=ir"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "5");
}

#[test]
fn backends_print_identical_values() {
    let file = fixture("loop.slang", ADD_BUNDLE);
    let mut results = Vec::new();
    for backend in ["native", "ir", "ast"] {
        let out = cascade(&[
            "run",
            file.to_str().unwrap(),
            "loop:",
            "10",
            &format!("--backend={backend}"),
        ]);
        assert!(out.status.success(), "{backend}: {}", String::from_utf8_lossy(&out.stderr));
        results.push(String::from_utf8_lossy(&out.stdout).trim().to_string());
    }
    assert_eq!(results[0], "55");
    assert!(results.iter().all(|r| r == &results[0]), "{results:?}");
}

#[test]
fn unknown_subcommand_exits_one_with_synopsis() {
    let out = cascade(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage: cascade"));
}

#[test]
fn missing_file_is_a_user_error() {
    let out = cascade(&["run", "/no/such/file.slang", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_lists_methods() {
    let file = fixture("parse.slang", ADD_BUNDLE);
    let out = cascade(&["parse", file.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Demo>>add:with:"));
    assert!(text.contains("2 method(s)"));
}

#[test]
fn dump_ir_has_stable_format() {
    let file = fixture("ir.slang", ADD_BUNDLE);
    let out = cascade(&["dump-ir", file.to_str().unwrap(), "add:with:"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("L0:"), "{text}");
    assert!(text.contains("= add %"), "{text}");
    assert!(text.contains("ret %"), "{text}");

    let ssa = cascade(&["dump-ir", file.to_str().unwrap(), "loop:", "--ssa"]);
    let ssa_text = String::from_utf8_lossy(&ssa.stdout);
    assert!(ssa_text.contains("phi ["), "{ssa_text}");
}

#[test]
fn dump_asm_lists_mnemonics() {
    let file = fixture("asm.slang", ADD_BUNDLE);
    let out = cascade(&["dump-asm", file.to_str().unwrap(), "add:with:"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("push rbp"), "{text}");
    assert!(text.contains("mov rbp, rsp"), "{text}");
    assert!(text.contains("ret"), "{text}");
    // identical invocation yields an identical listing
    let again = cascade(&["dump-asm", file.to_str().unwrap(), "add:with:"]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn dump_reachable_lists_closure() {
    let bundle = "A>>top\n\t^ self helper + 1\n\nA>>helper\n\t^ self callVMFunction: #primitiveNew withArguments: {}\n";
    let file = fixture("reach.slang", bundle);
    let out = cascade(&["dump-reachable", file.to_str().unwrap(), "top"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("#top"));
    assert!(text.contains("#helper"));
    assert!(text.contains("@primitiveNew"));
}

#[test]
fn swap_demo_swaps_in_process() {
    let out = cascade(&["swap-demo"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("greeting -> 1"));
    assert!(text.contains("greeting -> 2"));
    assert!(text.contains("artifact bytes unchanged: true"));
}

#[test]
fn bench_emits_stable_csv_schema() {
    let out = cascade(&[
        "bench",
        "basicnew",
        "--points",
        "5",
        "--runs",
        "2",
        "--configs",
        "unmodified,compiled-plain",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("config,point,mean_ms,stddev_ms,relative\n"), "{text}");

    let bad = cascade(&["bench", "basicnew", "--points", "0", "--runs", "2"]);
    assert_eq!(bad.status.code(), Some(1), "zero-object points rejected");
}

#[test]
fn run_rejects_wrong_arity() {
    let file = fixture("arity.slang", ADD_BUNDLE);
    let out = cascade(&["run", file.to_str().unwrap(), "add:with:", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn division_failure_maps_to_user_error() {
    let file = fixture("div.slang", "Demo>>div: a by: b\n\t^ a // b\n");
    let out = cascade(&["run", file.to_str().unwrap(), "div:by:", "1", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("primitive failure"));
}
