//! Benchmark harness for the two instrumentation experiments: object
//! creation under different basicNew instrumentations, and the static
//! versus dynamically compiled file plugin.
//!
//! Measurement discipline: a monotonic clock read in nanoseconds and
//! reported in milliseconds; one warm-up run excluded from statistics; for
//! compiled configurations the very first (compilation-bearing) call is
//! reported separately as `first_call_ms` and excluded from steady-state
//! means.

use crate::frontend::SourceMethod;
use crate::plugins::{self, PluginMode};
use crate::runtime::{HostFs, Oop, Vm, VmConfig};
use std::fmt;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    BasicNew,
    FilePlugin,
}

/// Instrumentation configurations for the basicNew experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstrConfig {
    /// The VM's own allocation path, no dispatch.
    Unmodified,
    /// AST-interpreted instrumented basicNew, no recursion guard.
    ReflectiveUnsafe,
    /// AST-interpreted instrumented basicNew behind the stack-scanning
    /// recursion guard.
    ReflectiveSafe,
    /// Natively compiled instrumented basicNew (prints through a VM call).
    CompiledInstrumented,
    /// Natively compiled plain basicNew wrapper.
    CompiledPlain,
}

impl InstrConfig {
    pub const ALL: [InstrConfig; 5] = [
        InstrConfig::Unmodified,
        InstrConfig::ReflectiveUnsafe,
        InstrConfig::ReflectiveSafe,
        InstrConfig::CompiledInstrumented,
        InstrConfig::CompiledPlain,
    ];

    pub fn label(self) -> &'static str {
        match self {
            InstrConfig::Unmodified => "unmodified",
            InstrConfig::ReflectiveUnsafe => "reflective-unsafe",
            InstrConfig::ReflectiveSafe => "reflective-safe",
            InstrConfig::CompiledInstrumented => "compiled-instrumented",
            InstrConfig::CompiledPlain => "compiled-plain",
        }
    }

    pub fn from_label(label: &str) -> Option<InstrConfig> {
        Self::ALL.into_iter().find(|c| c.label() == label)
    }

    fn is_compiled(self) -> bool {
        matches!(self, InstrConfig::CompiledInstrumented | InstrConfig::CompiledPlain)
    }
}

impl fmt::Display for InstrConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub experiment: Experiment,
    /// Inner iterations per point (ops per run = point * iterations).
    pub iterations: usize,
    /// Object / directory counts.
    pub points: Vec<usize>,
    pub runs: usize,
    pub configs: Vec<InstrConfig>,
    /// Run the file-plugin experiment against this host directory instead
    /// of the in-memory filesystem.
    pub host_root: Option<PathBuf>,
}

impl BenchConfig {
    pub fn basicnew() -> BenchConfig {
        BenchConfig {
            experiment: Experiment::BasicNew,
            iterations: 1,
            points: (1..=10).map(|i| i * 100).collect(),
            runs: 50,
            configs: InstrConfig::ALL.to_vec(),
            host_root: None,
        }
    }

    pub fn fileplugin() -> BenchConfig {
        BenchConfig {
            experiment: Experiment::FilePlugin,
            iterations: 1,
            points: (1..=10).map(|i| i * 100).collect(),
            runs: 50,
            configs: Vec::new(),
            host_root: None,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.runs < 2 {
            return Err(BenchError::Config("runs must be at least 2".into()));
        }
        if self.points.is_empty() {
            return Err(BenchError::Config("at least one point is required".into()));
        }
        if self.iterations == 0 {
            return Err(BenchError::Config("iterations must be at least 1".into()));
        }
        if self.experiment == Experiment::BasicNew && self.points.iter().any(|&p| p == 0) {
            return Err(BenchError::Config("zero-object points are rejected".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error)]
pub enum BenchError {
    #[error("bad benchmark configuration: {0}")]
    Config(String),
    #[error("benchmark setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub config: String,
    pub point: usize,
    pub mean_ms: f64,
    pub stddev_ms: f64,
    /// mean / mean(unmodified at the same point), when available.
    pub relative: Option<f64>,
    /// Wall time of the very first call (bears compilation for compiled
    /// configurations). Reported separately from the steady-state mean.
    pub first_call_ms: Option<f64>,
}

pub const CSV_HEADER: &str = "config,point,mean_ms,stddev_ms,relative";

pub fn write_csv<W: std::io::Write + ?Sized>(rows: &[BenchRow], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        let relative = row.relative.map_or(String::new(), |r| format!("{r:.4}"));
        writeln!(
            out,
            "{},{},{:.6},{:.6},{}",
            row.config, row.point, row.mean_ms, row.stddev_ms, relative
        )?;
    }
    Ok(())
}

pub fn write_json<W: std::io::Write + ?Sized>(rows: &[BenchRow], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "[")?;
    for (i, row) in rows.iter().enumerate() {
        let relative = row.relative.map_or("null".to_string(), |r| format!("{r:.6}"));
        let first = row.first_call_ms.map_or("null".to_string(), |f| format!("{f:.6}"));
        let comma = if i + 1 == rows.len() { "" } else { "," };
        writeln!(
            out,
            "  {{\"config\":\"{}\",\"point\":{},\"mean_ms\":{:.6},\"stddev_ms\":{:.6},\"relative\":{},\"first_call_ms\":{}}}{}",
            row.config, row.point, row.mean_ms, row.stddev_ms, relative, first, comma
        )?;
    }
    writeln!(out, "]")
}

fn mean_stddev(samples_ms: &[f64]) -> (f64, f64) {
    let n = samples_ms.len() as f64;
    let mean = samples_ms.iter().sum::<f64>() / n;
    let variance = samples_ms.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    (mean, variance.sqrt())
}

fn time_ms(f: impl FnOnce()) -> f64 {
    let start = Instant::now();
    f();
    start.elapsed().as_nanos() as f64 / 1.0e6
}

// ── instrumented basicNew sources ───────────────────────────────────────

/// Plain compiled wrapper: delegate straight to the allocation function.
pub const BASICNEW_PLAIN: &str = "basicNew\n\
\t<primitive>\n\
\t^ self callVMFunction: #primitiveNew withArguments: {}\n";

/// Compiled instrumentation: print the word in argument slot 0, then
/// allocate. The print goes through one VM call; nothing here can recurse
/// into the dispatcher.
pub const BASICNEW_INSTRUMENTED: &str = "basicNew\n\
\t<primitive>\n\
\t| oop |\n\
\toop := self stackAt: 0.\n\
\tself callVMFunction: #printOop withArguments: {oop}.\n\
\t^ self callVMFunction: #primitiveNew withArguments: {}\n";

/// Reflective instrumentation without a guard: the hex digits of the
/// printed word are produced by an interpreted loop. Termination relies on
/// the print path not allocating; see the recursion-demo variants for the
/// case where it does.
pub const BASICNEW_REFLECTIVE_UNSAFE: &str = "basicNew\n\
\t| oop i d |\n\
\toop := self stackAt: 0.\n\
\ti := 0.\n\
\t[ i < 16 ] whileTrue: [\n\
\t\td := (oop bitShift: 0 - ((15 - i) * 4)) bitAnd: 15.\n\
\t\tself callVMFunction: #emitHexDigit withArguments: {d}.\n\
\t\ti := i + 1 ].\n\
\t^ self unmodifiedBasicNew\n";

/// Reflective instrumentation with the recursion guard: an interpreted
/// scan over the reified activation stack, looking for a prior activation
/// below the top, before anything else runs.
pub const BASICNEW_REFLECTIVE_SAFE: &str = "basicNew\n\
\t| oop i d n found |\n\
\tn := self stackDepth.\n\
\tfound := 0.\n\
\ti := 0.\n\
\t[ i < (n - 1) ] whileTrue: [\n\
\t\t((self stackSelectorAt: i) = #basicNew) ifTrue: [ found := 1 ].\n\
\t\ti := i + 1 ].\n\
\tfound = 1 ifTrue: [ ^ self unmodifiedBasicNew ].\n\
\toop := self stackAt: 0.\n\
\ti := 0.\n\
\t[ i < 16 ] whileTrue: [\n\
\t\td := (oop bitShift: 0 - ((15 - i) * 4)) bitAnd: 15.\n\
\t\tself callVMFunction: #emitHexDigit withArguments: {d}.\n\
\t\ti := i + 1 ].\n\
\t^ self unmodifiedBasicNew\n";

/// Recursion-demo variant whose print path allocates a buffer, so an
/// unguarded run re-enters basicNew forever.
pub const BASICNEW_DEMO_UNSAFE: &str = "basicNew\n\
\t| buf |\n\
\tbuf := ByteBuffer basicNew.\n\
\t^ self unmodifiedBasicNew\n";

/// Guarded variant of the allocating demo: the nested activation escapes
/// to the unmodified primitive, breaking the loop.
pub const BASICNEW_DEMO_SAFE: &str = "basicNew\n\
\t| buf |\n\
\t(self guardContains: #basicNew) ifTrue: [ ^ self unmodifiedBasicNew ].\n\
\tbuf := ByteBuffer basicNew.\n\
\t^ self unmodifiedBasicNew\n";

fn source(selector: &str, text: &str) -> SourceMethod {
    SourceMethod::new("Bench", selector, text)
}

/// Depth of the synthetic application stack beneath every measured call.
/// A recursion guard's cost is linear in stack depth, and a depth-one
/// stack (nothing but the primitive itself) would understate it; every
/// configuration runs above the same context chain.
pub const BENCH_CONTEXT_DEPTH: usize = 8;

/// Build a VM with the given basicNew configuration installed.
pub fn vm_for_config(config: InstrConfig) -> Result<Vm, BenchError> {
    let mut vm = Vm::new(VmConfig::default());
    let setup = |r: Result<(), crate::runtime::RuntimeError>| {
        r.map_err(|e| BenchError::Setup(e.to_string()))
    };
    match config {
        InstrConfig::Unmodified => {}
        InstrConfig::CompiledPlain => {
            setup(vm.install_primitive("basicNew", source("basicNew", BASICNEW_PLAIN)))?
        }
        InstrConfig::CompiledInstrumented => setup(
            vm.install_primitive("basicNew", source("basicNew", BASICNEW_INSTRUMENTED)),
        )?,
        InstrConfig::ReflectiveUnsafe => setup(
            vm.install_reflective("basicNew", &source("basicNew", BASICNEW_REFLECTIVE_UNSAFE)),
        )?,
        InstrConfig::ReflectiveSafe => setup(
            vm.install_reflective("basicNew", &source("basicNew", BASICNEW_REFLECTIVE_SAFE)),
        )?,
    }
    for i in 0..BENCH_CONTEXT_DEPTH {
        vm.push_context(&format!("benchDriver{i}"));
    }
    Ok(vm)
}

/// One basicNew operation under `config`.
fn basicnew_op(vm: &mut Vm, config: InstrConfig) -> Result<(), BenchError> {
    if config == InstrConfig::Unmodified {
        let class = vm.class_desc("Point").expect("bootstrap class");
        vm.allocate(class.id, class.element_count)
            .map_err(|e| BenchError::Setup(e.to_string()))?;
        return Ok(());
    }
    // the class object may move between calls; re-read it from its global
    let class = Oop(vm.global_word("Point").expect("bootstrap class"));
    vm.call_primitive("basicNew", class, &[class])
        .map(|_| ())
        .map_err(|e| BenchError::Setup(e.to_string()))
}

/// The basicNew instrumentation benchmark. Emits one row per
/// (configuration, point). Runs are interleaved round-robin across the
/// configurations so slow ambient drift lands on all of them alike.
pub fn bench_basicnew(cfg: &BenchConfig) -> Result<Vec<BenchRow>, BenchError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut unmodified_means: Vec<(usize, f64)> = Vec::new();

    let mut vms = Vec::with_capacity(cfg.configs.len());
    let mut first_calls = Vec::with_capacity(cfg.configs.len());
    for &config in &cfg.configs {
        let mut vm = vm_for_config(config)?;
        let mut first_call_ms = None;
        if config != InstrConfig::Unmodified {
            // the very first call bears compilation for compiled configs
            let ms = time_ms(|| {
                let _ = basicnew_op(&mut vm, config);
            });
            if config.is_compiled() {
                first_call_ms = Some(ms);
            }
        }
        vms.push(vm);
        first_calls.push(first_call_ms);
    }

    for &point in &cfg.points {
        let ops = point * cfg.iterations;
        let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.runs); cfg.configs.len()];
        // run 0 is the warm-up round, excluded from statistics
        for run in 0..=cfg.runs {
            for (i, &config) in cfg.configs.iter().enumerate() {
                let vm = &mut vms[i];
                // start every run from a freshly collected heap so no
                // timed run pays for a collection another run provoked
                vm.collect();
                let start = Instant::now();
                for _ in 0..ops {
                    basicnew_op(vm, config)?;
                }
                let elapsed = start.elapsed().as_nanos() as f64 / 1.0e6;
                vm.take_output();
                if run > 0 {
                    samples[i].push(elapsed);
                }
            }
        }
        for (i, &config) in cfg.configs.iter().enumerate() {
            let (mean_ms, stddev_ms) = mean_stddev(&samples[i]);
            if config == InstrConfig::Unmodified {
                unmodified_means.push((point, mean_ms));
            }
            rows.push(BenchRow {
                config: config.label().to_string(),
                point,
                mean_ms,
                stddev_ms,
                relative: None,
                first_call_ms: first_calls[i],
            });
        }
    }
    for row in &mut rows {
        if let Some(&(_, base)) = unmodified_means.iter().find(|(point, _)| *point == row.point) {
            if base > 0.0 {
                row.relative = Some(row.mean_ms / base);
            }
        }
    }
    Ok(rows)
}

// ── file plugin benchmark ───────────────────────────────────────────────

fn fileplugin_vm(cfg: &BenchConfig) -> Result<Vm, BenchError> {
    let mut vm = Vm::new(VmConfig::default());
    vm.define_class("FilePlugin", 0, crate::runtime::ObjFormat::Slots)
        .map_err(|e| BenchError::Setup(e.to_string()))?;
    if let Some(root) = &cfg.host_root {
        // a root that cannot be created surfaces later as per-row error
        // notes rather than aborting the whole sweep
        let _ = std::fs::create_dir_all(root);
        vm.fs = Box::new(HostFs::new(root.clone()));
    }
    let mut plugin = plugins::file_plugin(PluginMode::Lazy);
    let report = plugins::nativize_plugin(&mut vm, &mut plugin);
    if !report.errors.is_empty() {
        return Err(BenchError::Setup(format!("{:?}", report.errors)));
    }
    Ok(vm)
}

/// One timed file-plugin run: `ops` directories under a fresh namespace.
fn fileplugin_run(
    vm: &mut Vm,
    config: &str,
    namespace: usize,
    ops: usize,
) -> Result<f64, String> {
    let base = format!("/p{namespace}");
    vm.byte_object("ByteArray", base.as_bytes())
        .map_err(|e| e.to_string())
        .and_then(|oop| run_fileplugin_op(vm, "direct", oop).map_err(|e| e.to_string()))
        .map_err(|e| format!("cannot create namespace {base}: {e}"))?;
    let mut oops = Vec::with_capacity(ops);
    for i in 0..ops {
        let path = format!("{base}/d{i}");
        let oop = vm.byte_object("ByteArray", path.as_bytes()).map_err(|e| e.to_string())?;
        oops.push(vm.pin_handle(oop));
    }
    let start = Instant::now();
    for &handle in &oops {
        let oop = vm.handle(handle);
        run_fileplugin_op(vm, config, oop)
            .map_err(|e| format!("directory creation failed under {base}: {e}"))?;
    }
    Ok(start.elapsed().as_nanos() as f64 / 1.0e6)
}

/// Static-versus-dynamic comparison for directory creation. The `direct`
/// configuration calls the VM function straight from the host; the
/// `compiled` configuration goes through the compiled plugin primitive.
/// Runs are interleaved pairwise so filesystem drift (journal flushes,
/// dentry cache growth) lands on both configurations alike.
pub fn bench_fileplugin(cfg: &BenchConfig) -> Result<Vec<BenchRow>, BenchError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut namespace = 0usize;
    let mut direct_vm = fileplugin_vm(cfg)?;
    let mut compiled_vm = fileplugin_vm(cfg)?;

    // the first compiled call bears compilation
    let first_call_ms = {
        namespace += 1;
        let oop = compiled_vm
            .byte_object("ByteArray", format!("/warm{namespace}").as_bytes())
            .map_err(|e| BenchError::Setup(e.to_string()))?;
        time_ms(|| {
            let _ = run_fileplugin_op(&mut compiled_vm, "compiled", oop);
        })
    };

    for &point in &cfg.points {
        let ops = point * cfg.iterations;
        let mut direct_samples = Vec::with_capacity(cfg.runs);
        let mut compiled_samples = Vec::with_capacity(cfg.runs);
        let mut io_error = None;
        // run 0 is the warm-up pair, excluded from statistics
        for run in 0..=cfg.runs {
            namespace += 1;
            let direct = fileplugin_run(&mut direct_vm, "direct", namespace * 2, ops);
            let compiled = fileplugin_run(&mut compiled_vm, "compiled", namespace * 2 + 1, ops);
            match (direct, compiled) {
                (Ok(d), Ok(c)) => {
                    if run > 0 {
                        direct_samples.push(d);
                        compiled_samples.push(c);
                    }
                }
                (Err(e), _) | (_, Err(e)) => {
                    io_error = Some(e);
                    break;
                }
            }
        }
        if let Some(note) = io_error {
            eprintln!("# bench_fileplugin point={point}: {note}");
            continue;
        }
        let (direct_mean, direct_stddev) = mean_stddev(&direct_samples);
        let (compiled_mean, compiled_stddev) = mean_stddev(&compiled_samples);
        rows.push(BenchRow {
            config: "direct".to_string(),
            point,
            mean_ms: direct_mean,
            stddev_ms: direct_stddev,
            relative: Some(1.0),
            first_call_ms: None,
        });
        rows.push(BenchRow {
            config: "compiled".to_string(),
            point,
            mean_ms: compiled_mean,
            stddev_ms: compiled_stddev,
            relative: (direct_mean > 0.0).then(|| compiled_mean / direct_mean),
            first_call_ms: Some(first_call_ms),
        });
    }
    Ok(rows)
}

fn run_fileplugin_op(vm: &mut Vm, config: &str, path: Oop) -> Result<(), BenchError> {
    if config == "direct" {
        let word = vm.create_directory_direct(path.raw());
        if word == crate::codegen::PRIMITIVE_FAILURE_WORD {
            return Err(BenchError::Setup("createDirectory failed".into()));
        }
        Ok(())
    } else {
        plugins::file_plugin_create_directory(vm, path)
            .map(|_| ())
            .map_err(|e| BenchError::Setup(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut cfg = BenchConfig::basicnew();
        cfg.runs = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = BenchConfig::basicnew();
        cfg.points = vec![];
        assert!(cfg.validate().is_err());
        let mut cfg = BenchConfig::basicnew();
        cfg.points = vec![0];
        assert!(cfg.validate().is_err(), "zero-object points rejected");
        let mut cfg = BenchConfig::fileplugin();
        cfg.points = vec![0];
        assert!(cfg.validate().is_ok(), "zero-directory point is legal here");
    }

    #[test]
    fn csv_header_is_stable() {
        let rows = vec![BenchRow {
            config: "unmodified".into(),
            point: 100,
            mean_ms: 0.123456,
            stddev_ms: 0.001,
            relative: Some(1.0),
            first_call_ms: None,
        }];
        let mut out = Vec::new();
        write_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("config,point,mean_ms,stddev_ms,relative\n"));
        assert!(text.contains("unmodified,100,"));
    }

    #[test]
    fn json_rows_mirror_csv_fields() {
        let rows = vec![BenchRow {
            config: "compiled-plain".into(),
            point: 10,
            mean_ms: 1.0,
            stddev_ms: 0.1,
            relative: None,
            first_call_ms: Some(3.5),
        }];
        let mut out = Vec::new();
        write_json(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("\"config\":\"compiled-plain\""));
        assert!(text.contains("\"first_call_ms\":3.5"));
        assert!(text.contains("\"relative\":null"));
    }

    #[test]
    fn tiny_basicnew_sweep_produces_rows() {
        let cfg = BenchConfig {
            experiment: Experiment::BasicNew,
            iterations: 1,
            points: vec![5],
            runs: 2,
            configs: vec![InstrConfig::Unmodified, InstrConfig::CompiledPlain],
            host_root: None,
        };
        let rows = bench_basicnew(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        let compiled = rows.iter().find(|r| r.config == "compiled-plain").unwrap();
        assert!(compiled.relative.is_some());
        assert!(compiled.first_call_ms.is_some());
    }

    #[test]
    fn unwritable_root_yields_error_notes_not_rows() {
        let cfg = BenchConfig {
            experiment: Experiment::FilePlugin,
            iterations: 1,
            points: vec![2],
            runs: 2,
            configs: vec![],
            host_root: Some(std::path::PathBuf::from("/proc/no-such-root/bench")),
        };
        let rows = bench_fileplugin(&cfg).unwrap();
        assert!(rows.is_empty(), "failed points are missing rows: {rows:?}");
    }

    #[test]
    fn tiny_fileplugin_sweep_produces_rows() {
        let cfg = BenchConfig {
            experiment: Experiment::FilePlugin,
            iterations: 1,
            points: vec![0, 3],
            runs: 2,
            configs: vec![],
            host_root: None,
        };
        let rows = bench_fileplugin(&cfg).unwrap();
        // 2 configs x 2 points, zero-directory rows still emitted
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().any(|r| r.point == 0));
    }
}
