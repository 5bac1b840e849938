//! Command-line driver: parse and dump pipeline stages, run methods
//! through any backend, demonstrate live primitive replacement and drive
//! the benchmark harness.

use cascade_core::frontend::{self, SourceMethod};
use cascade_core::harness::{self, BenchConfig, Experiment, InstrConfig};
use cascade_core::ir::IrForm;
use cascade_core::plugins::{self, PluginMode};
use cascade_core::runtime::{Backend, Vm, VmConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const SYNOPSIS: &str = "\
usage: cascade <command> [args]

commands:
  parse FILE                     parse a .slang file and print its methods
  dump-reachable FILE SELECTOR   methods, templates and VM functions the
                                 selector's nativization will cover
  dump-ir FILE SELECTOR [--ssa]  lowered IR (three-address code, or SSA)
  dump-asm FILE SELECTOR         native listing, one mnemonic per line
  run FILE SELECTOR [ARGS..]     run a method; --backend=native|ir|ast
                                 (ARGS are signed integers; default backend
                                 native)
  swap-demo                      compile, edit and hot-swap a primitive
                                 without restarting the process
  bench basicnew|fileplugin      the instrumentation benchmarks
        [--points 100,200,..] [--runs N] [--iterations N]
        [--configs a,b,..] [--csv PATH] [--json] [--host-root DIR]

exit status: 0 success, 1 usage or input error, 2 internal error";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            if !msg.is_empty() {
                eprintln!("cascade: {msg}");
            }
            eprintln!("{SYNOPSIS}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("cascade: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("cascade: internal error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Usage(String),
    Input(String),
    Internal(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn dispatch(args: &[String]) -> Result<(), CliError> {
    let Some(command) = args.first() else {
        return Err(CliError::Usage(String::new()));
    };
    let rest = &args[1..];
    match command.as_str() {
        "parse" => cmd_parse(rest),
        "dump-reachable" => cmd_dump_reachable(rest),
        "dump-ir" => cmd_dump_ir(rest),
        "dump-asm" => cmd_dump_asm(rest),
        "run" => cmd_run(rest),
        "swap-demo" => cmd_swap_demo(),
        "bench" => cmd_bench(rest),
        other => Err(CliError::Usage(format!("unknown command '{other}'"))),
    }
}

fn default_class(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(|s| {
            let mut name: String =
                s.chars().filter(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
            if name.is_empty() || name.starts_with(|c: char| c.is_ascii_digit()) {
                name = format!("C{name}");
            }
            name
        })
        .unwrap_or_else(|| "Main".to_string())
}

fn load_file(path_arg: &str) -> Result<(Vm, Vec<String>), CliError> {
    let path = PathBuf::from(path_arg);
    let text =
        std::fs::read_to_string(&path).map_err(|e| CliError::Input(format!("{path_arg}: {e}")))?;
    let mut vm = Vm::new(VmConfig { sink_memory: false, ..VmConfig::default() });
    let selectors = vm
        .load_bundle(&text, &default_class(&path))
        .map_err(|e| CliError::Input(format!("{path_arg}: {e}")))?;
    Ok((vm, selectors))
}

fn cmd_parse(args: &[String]) -> Result<(), CliError> {
    let [file] = args else {
        return Err(CliError::Usage("parse takes exactly one file".into()));
    };
    let path = PathBuf::from(file);
    let text = std::fs::read_to_string(&path)?;
    let methods = frontend::parse_bundle(&text, &default_class(&path))
        .map_err(|e| CliError::Input(format!("{file}: {e}")))?;
    for src in &methods {
        let purified = frontend::purify(&src.source)
            .map_err(|e| CliError::Input(format!("{}: {e}", src.selector)))?;
        let parsed = frontend::parse_method(&SourceMethod::new(
            &src.class_name,
            &src.selector,
            &purified,
        ))
        .map_err(|e| CliError::Input(format!("{}: {e}", src.selector)))?;
        println!("{}>>{}", src.class_name, parsed.selector);
        print!("{}", frontend::print_method(&parsed));
        println!();
    }
    println!("{} method(s)", methods.len());
    Ok(())
}

fn cmd_dump_reachable(args: &[String]) -> Result<(), CliError> {
    let [file, selector] = args else {
        return Err(CliError::Usage("dump-reachable takes FILE SELECTOR".into()));
    };
    let (vm, _) = load_file(file)?;
    let set = cascade_core::reachable_methods(selector, &vm.method_table)
        .map_err(|e| CliError::Input(e.to_string()))?;
    println!("methods:");
    for s in &set.selectors {
        println!("  #{s}");
    }
    if !set.templates_used.is_empty() {
        println!("templates:");
        for t in &set.templates_used {
            println!("  {t}");
        }
    }
    if !set.vm_functions_used.is_empty() {
        println!("vm functions:");
        for f in &set.vm_functions_used {
            println!("  @{f}");
        }
    }
    Ok(())
}

fn lowered(vm: &mut Vm, selector: &str, ssa: bool) -> Result<cascade_core::IrFunction, CliError> {
    let method = vm
        .method_table
        .method(selector)
        .cloned()
        .ok_or_else(|| CliError::Input(format!("no method #{selector} in the file")))?;
    let table = vm.method_table.clone();
    let f = cascade_core::ir::lower::lower(&method, &table, &mut vm.lower_env)
        .map_err(|e| CliError::Input(e.to_string()))?;
    Ok(if ssa { cascade_core::to_ssa(&f) } else { f })
}

fn cmd_dump_ir(args: &[String]) -> Result<(), CliError> {
    let (flags, positional): (Vec<&String>, Vec<&String>) =
        args.iter().partition(|a| a.starts_with("--"));
    let [file, selector] = positional.as_slice() else {
        return Err(CliError::Usage("dump-ir takes FILE SELECTOR [--ssa]".into()));
    };
    let mut ssa = false;
    for flag in flags {
        match flag.as_str() {
            "--ssa" => ssa = true,
            other => return Err(CliError::Usage(format!("unknown flag '{other}'"))),
        }
    }
    let (mut vm, _) = load_file(file)?;
    let f = lowered(&mut vm, selector, ssa)?;
    debug_assert_eq!(f.form, if ssa { IrForm::Ssa } else { IrForm::Tac });
    print!("{}", f.dump());
    Ok(())
}

fn cmd_dump_asm(args: &[String]) -> Result<(), CliError> {
    let [file, selector] = args else {
        return Err(CliError::Usage("dump-asm takes FILE SELECTOR".into()));
    };
    let (mut vm, _) = load_file(file)?;
    let source = vm
        .method_source(selector)
        .ok_or_else(|| CliError::Input(format!("no method #{selector} in the file")))?;
    let compiled =
        vm.compile_primitive(selector, &source).map_err(|e| CliError::Input(e.to_string()))?;
    print!("{}", compiled.artifact.dump_listing());
    Ok(())
}

fn cmd_run(args: &[String]) -> Result<(), CliError> {
    let mut backend = Backend::Native;
    let mut positional = Vec::new();
    for arg in args {
        match arg.strip_prefix("--backend=") {
            Some("native") => backend = Backend::Native,
            Some("ir") => backend = Backend::IrSsa,
            Some("ast") => backend = Backend::Ast,
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "unknown backend '{other}' (native, ir or ast)"
                )))
            }
            None => positional.push(arg.clone()),
        }
    }
    if positional.len() < 2 {
        return Err(CliError::Usage("run takes FILE SELECTOR [ARGS..]".into()));
    }
    let file = &positional[0];
    let selector = &positional[1];
    let mut words = Vec::new();
    for raw in &positional[2..] {
        let value: i64 = raw
            .parse()
            .map_err(|_| CliError::Usage(format!("argument '{raw}' is not an integer")))?;
        words.push(value as u64);
    }
    let (mut vm, _) = load_file(file)?;
    let expected = cascade_core::frontend::selector_arity(selector);
    if words.len() != expected {
        return Err(CliError::Input(format!(
            "#{selector} takes {expected} argument(s), {} given",
            words.len()
        )));
    }
    match vm.run_method(selector, 0, &words, backend) {
        Ok(word) => {
            println!("{}", word as i64);
            Ok(())
        }
        Err(cascade_core::RuntimeError::PrimitiveFailed { .. }) => {
            Err(CliError::Input(format!("#{selector} signalled primitive failure")))
        }
        Err(e @ cascade_core::RuntimeError::Eval(_)) => Err(CliError::Input(e.to_string())),
        Err(e @ cascade_core::RuntimeError::UnknownMethod(_)) => {
            Err(CliError::Input(e.to_string()))
        }
        Err(e) => Err(CliError::Internal(e.to_string())),
    }
}

fn cmd_swap_demo() -> Result<(), CliError> {
    let mut vm = Vm::new(VmConfig { sink_memory: false, ..VmConfig::default() });
    let mut plugin = plugins::Plugin::new("demo", "Object", PluginMode::Lazy);
    plugin.add_method(SourceMethod::new("Object", "greeting", "greeting\n\t^ 1\n"));
    plugin.add_method(SourceMethod::new("Object", "scale:", "scale: x\n\t^ x * 10\n"));
    let report = plugins::nativize_plugin(&mut vm, &mut plugin);
    if !report.errors.is_empty() {
        return Err(CliError::Internal(format!("{:?}", report.errors)));
    }
    println!("process {}", std::process::id());
    let receiver = vm.class_oop("Object").unwrap();
    let before = vm
        .call_primitive("greeting", receiver, &[])
        .map_err(|e| CliError::Internal(e.to_string()))?;
    println!(
        "greeting -> {} (compilations: {})",
        before.raw() as i64,
        vm.compile_count("greeting")
    );
    let receiver = vm.class_oop("Object").unwrap();
    let scaled = vm
        .call_primitive("scale:", receiver, &[cascade_core::Oop(4)])
        .map_err(|e| CliError::Internal(e.to_string()))?;
    println!("sibling scale: 4 -> {}", scaled.raw() as i64);
    let sibling = vm.artifact_bytes("scale:");

    plugin
        .edit_method("greeting", "greeting\n\t^ 2\n")
        .map_err(|e| CliError::Internal(e.to_string()))?;
    plugins::mark_dirty(&mut vm, &mut plugin, "greeting")
        .map_err(|e| CliError::Internal(e.to_string()))?;
    println!("edited #greeting and marked it dirty");

    let receiver = vm.class_oop("Object").unwrap();
    let after = vm
        .call_primitive("greeting", receiver, &[])
        .map_err(|e| CliError::Internal(e.to_string()))?;
    println!(
        "greeting -> {} (compilations: {})",
        after.raw() as i64,
        vm.compile_count("greeting")
    );
    let receiver = vm.class_oop("Object").unwrap();
    let scaled = vm
        .call_primitive("scale:", receiver, &[cascade_core::Oop(4)])
        .map_err(|e| CliError::Internal(e.to_string()))?;
    println!(
        "sibling scale: 4 -> {} (artifact bytes unchanged: {})",
        scaled.raw() as i64,
        vm.artifact_bytes("scale:") == sibling
    );
    println!("swap complete, same process {}", std::process::id());
    Ok(())
}

fn cmd_bench(args: &[String]) -> Result<(), CliError> {
    let Some(experiment) = args.first() else {
        return Err(CliError::Usage("bench takes basicnew or fileplugin".into()));
    };
    let mut cfg = match experiment.as_str() {
        "basicnew" => BenchConfig::basicnew(),
        "fileplugin" => BenchConfig::fileplugin(),
        other => return Err(CliError::Usage(format!("unknown experiment '{other}'"))),
    };
    let mut csv_path: Option<String> = None;
    let mut json = false;
    let mut iter = args[1..].iter();
    while let Some(arg) = iter.next() {
        let mut take = |name: &str| -> Result<String, CliError> {
            iter.next()
                .cloned()
                .ok_or_else(|| CliError::Usage(format!("{name} needs a value")))
        };
        match arg.as_str() {
            "--points" => {
                cfg.points = take("--points")?
                    .split(',')
                    .map(|p| p.trim().parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| CliError::Usage("bad --points list".into()))?;
            }
            "--runs" => {
                cfg.runs =
                    take("--runs")?.parse().map_err(|_| CliError::Usage("bad --runs".into()))?;
            }
            "--iterations" => {
                cfg.iterations = take("--iterations")?
                    .parse()
                    .map_err(|_| CliError::Usage("bad --iterations".into()))?;
            }
            "--configs" => {
                cfg.configs = take("--configs")?
                    .split(',')
                    .map(|label| {
                        InstrConfig::from_label(label.trim())
                            .ok_or_else(|| CliError::Usage(format!("unknown config '{label}'")))
                    })
                    .collect::<Result<_, _>>()?;
            }
            "--csv" => csv_path = Some(take("--csv")?),
            "--json" => json = true,
            "--host-root" => cfg.host_root = Some(PathBuf::from(take("--host-root")?)),
            other => return Err(CliError::Usage(format!("unknown flag '{other}'"))),
        }
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let rows = match cfg.experiment {
        Experiment::BasicNew => harness::bench_basicnew(&cfg),
        Experiment::FilePlugin => harness::bench_fileplugin(&cfg),
    }
    .map_err(|e| CliError::Internal(e.to_string()))?;

    let emit = |out: &mut dyn std::io::Write| -> std::io::Result<()> {
        if json {
            harness::write_json(&rows, out)
        } else {
            harness::write_csv(&rows, out)
        }
    };
    match csv_path.as_deref() {
        None | Some("-") => emit(&mut std::io::stdout())?,
        Some(path) => {
            let mut file = std::fs::File::create(path)?;
            emit(&mut file)?;
        }
    }
    Ok(())
}
