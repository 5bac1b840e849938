//! Plugins: named groups of primitives compiled and installed as a unit,
//! with per-selector dirty marking for live recompilation, plus the demo
//! file plugin.

use crate::frontend::SourceMethod;
use crate::runtime::{Oop, RuntimeError, Vm};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PluginError {
    #[error("plugin has no method #{0}")]
    UnknownSelector(String),
    #[error("bad plugin manifest: {0}")]
    Manifest(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PluginMode {
    #[default]
    Lazy,
    Eager,
}

#[derive(Debug, Clone)]
pub struct InstallEvent {
    pub selector: String,
    pub timestamp_ms: u128,
    pub compile_count: u64,
}

#[derive(Debug, Clone)]
pub struct Plugin {
    pub name: String,
    pub target_class: String,
    pub mode: PluginMode,
    methods: BTreeMap<String, SourceMethod>,
    dirty: BTreeSet<String>,
    installed: BTreeSet<String>,
    pub install_log: Vec<InstallEvent>,
}

impl Plugin {
    pub fn new(name: &str, target_class: &str, mode: PluginMode) -> Plugin {
        Plugin {
            name: name.to_string(),
            target_class: target_class.to_string(),
            mode,
            methods: BTreeMap::new(),
            dirty: BTreeSet::new(),
            installed: BTreeSet::new(),
            install_log: Vec::new(),
        }
    }

    pub fn add_method(&mut self, method: SourceMethod) {
        self.methods.insert(method.selector.clone(), method);
    }

    pub fn selectors(&self) -> impl Iterator<Item = &String> {
        self.methods.keys()
    }

    pub fn method(&self, selector: &str) -> Option<&SourceMethod> {
        self.methods.get(selector)
    }

    pub fn installed_selectors(&self) -> &BTreeSet<String> {
        &self.installed
    }

    pub fn edit_method(&mut self, selector: &str, new_source: &str) -> Result<(), PluginError> {
        let method = self
            .methods
            .get_mut(selector)
            .ok_or_else(|| PluginError::UnknownSelector(selector.to_string()))?;
        method.source = new_source.to_string();
        Ok(())
    }

    /// Load a plugin bundle: a directory of `.slang` files plus a
    /// `manifest.txt` of `key=value` lines (name, class, mode).
    pub fn from_bundle_dir(dir: &Path) -> Result<Plugin, PluginError> {
        let manifest_path = dir.join("manifest.txt");
        let manifest = std::fs::read_to_string(&manifest_path)
            .map_err(|e| PluginError::Io(format!("{}: {e}", manifest_path.display())))?;
        let mut name = None;
        let mut class = None;
        let mut mode = PluginMode::Lazy;
        for (idx, line) in manifest.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| PluginError::Manifest(format!("line {}: expected key=value", idx + 1)))?;
            match key.trim() {
                "name" => name = Some(value.trim().to_string()),
                "class" => class = Some(value.trim().to_string()),
                "mode" => {
                    mode = match value.trim() {
                        "lazy" => PluginMode::Lazy,
                        "eager" => PluginMode::Eager,
                        other => {
                            return Err(PluginError::Manifest(format!("unknown mode '{other}'")))
                        }
                    }
                }
                other => return Err(PluginError::Manifest(format!("unknown key '{other}'"))),
            }
        }
        let name = name.ok_or_else(|| PluginError::Manifest("missing name".into()))?;
        let class = class.ok_or_else(|| PluginError::Manifest("missing class".into()))?;
        let mut plugin = Plugin::new(&name, &class, mode);

        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| PluginError::Io(e.to_string()))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "slang"))
            .collect();
        entries.sort();
        for path in entries {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| PluginError::Io(format!("{}: {e}", path.display())))?;
            let methods = crate::frontend::parse_bundle(&text, &class)
                .map_err(|e| PluginError::Manifest(format!("{}: {e}", path.display())))?;
            for method in methods {
                plugin.add_method(method);
            }
        }
        Ok(plugin)
    }
}

#[derive(Debug)]
pub struct InstallReport {
    pub installed: Vec<String>,
    pub errors: Vec<(String, String)>,
    pub compiled_eagerly: usize,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Install every plugin method as a primitive slot on the VM. In eager
/// mode each method compiles now; in lazy mode compilation happens on the
/// first call. Per-method failures are collected; healthy siblings stay
/// installed.
pub fn nativize_plugin(vm: &mut Vm, plugin: &mut Plugin) -> InstallReport {
    let mut report =
        InstallReport { installed: Vec::new(), errors: Vec::new(), compiled_eagerly: 0 };
    let selectors: Vec<String> = plugin.methods.keys().cloned().collect();
    for selector in selectors {
        let source = plugin.methods[&selector].clone();
        let result: Result<(), RuntimeError> = (|| {
            vm.register_library_method(&source)?;
            vm.install_primitive(&selector, source.clone())?;
            if plugin.mode == PluginMode::Eager {
                vm.ensure_slot_compiled(&selector)?;
            }
            Ok(())
        })();
        match result {
            Ok(()) => {
                plugin.installed.insert(selector.clone());
                if plugin.mode == PluginMode::Eager {
                    report.compiled_eagerly += 1;
                }
                plugin.install_log.push(InstallEvent {
                    selector: selector.clone(),
                    timestamp_ms: now_ms(),
                    compile_count: vm.compile_count(&selector),
                });
                report.installed.push(selector);
            }
            Err(e) => {
                vm.remove_primitive(&selector);
                report.errors.push((selector, e.to_string()));
            }
        }
    }
    report
}

/// Flag one selector for recompilation from its (possibly edited) source
/// at its next call. Other selectors are untouched.
pub fn mark_dirty(vm: &mut Vm, plugin: &mut Plugin, selector: &str) -> Result<(), PluginError> {
    let source = plugin
        .methods
        .get(selector)
        .cloned()
        .ok_or_else(|| PluginError::UnknownSelector(selector.to_string()))?;
    plugin.dirty.insert(selector.to_string());
    vm.update_primitive_source(selector, source)
        .and_then(|()| vm.mark_slot_dirty(selector))
        .map_err(|e| PluginError::Manifest(e.to_string()))?;
    Ok(())
}

/// The demo file plugin: directory creation plus a read/write pair, all
/// delegating to VM functions behind the filesystem seam.
pub fn file_plugin(mode: PluginMode) -> Plugin {
    let mut plugin = Plugin::new("fileplugin", "FilePlugin", mode);
    plugin.add_method(SourceMethod::new(
        "FilePlugin",
        "createDirectory:",
        "createDirectory: path\n\t<primitive>\n\t^ self callVMFunction: #createDirectory withArguments: {path}\n",
    ));
    plugin.add_method(SourceMethod::new(
        "FilePlugin",
        "writeFile:with:",
        "writeFile: path with: data\n\t<primitive>\n\t^ self callVMFunction: #fileWrite withArguments: {path. data}\n",
    ));
    plugin.add_method(SourceMethod::new(
        "FilePlugin",
        "readFile:",
        "readFile: path\n\t<primitive>\n\t^ self callVMFunction: #fileRead withArguments: {path}\n",
    ));
    plugin
}

/// `createDirectory` through the compiled plugin; the receiver is the
/// plugin's target class object.
pub fn file_plugin_create_directory(vm: &mut Vm, path_oop: Oop) -> Result<Oop, RuntimeError> {
    let receiver = vm
        .class_oop("FilePlugin")
        .or_else(|| vm.class_oop("Object"))
        .expect("bootstrap classes exist");
    vm.call_primitive("createDirectory:", receiver, &[path_oop])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::VmConfig;

    fn demo_plugin() -> Plugin {
        let mut plugin = Plugin::new("demo", "Object", PluginMode::Eager);
        plugin.add_method(SourceMethod::new("Object", "answer", "answer\n\t^ 41\n"));
        plugin.add_method(SourceMethod::new("Object", "twice:", "twice: x\n\t^ x * 2\n"));
        plugin.add_method(SourceMethod::new("Object", "thrice:", "thrice: x\n\t^ x * 3\n"));
        plugin
    }

    #[test]
    fn eager_mode_compiles_every_method() {
        let mut vm = Vm::new(VmConfig::default());
        let mut plugin = demo_plugin();
        let report = nativize_plugin(&mut vm, &mut plugin);
        assert!(report.errors.is_empty(), "{:?}", report.errors);
        assert_eq!(report.compiled_eagerly, 3);
        for selector in ["answer", "twice:", "thrice:"] {
            assert_eq!(vm.compile_count(selector), 1, "{selector}");
        }
    }

    #[test]
    fn lazy_mode_defers_compilation_until_first_call() {
        let mut vm = Vm::new(VmConfig::default());
        let mut plugin = demo_plugin();
        plugin.mode = PluginMode::Lazy;
        let report = nativize_plugin(&mut vm, &mut plugin);
        assert!(report.errors.is_empty());
        assert_eq!(vm.compile_count("answer"), 0);
        let receiver = vm.class_oop("Object").unwrap();
        let out = vm.call_primitive("answer", receiver, &[]).unwrap();
        assert_eq!(out.raw(), 41);
        assert_eq!(vm.compile_count("answer"), 1);
        assert_eq!(vm.compile_count("twice:"), 0, "uncalled sibling stays source");
    }

    #[test]
    fn broken_method_reported_siblings_installed() {
        let mut vm = Vm::new(VmConfig::default());
        let mut plugin = demo_plugin();
        plugin.add_method(SourceMethod::new(
            "Object",
            "broken",
            "broken\n\t^ self noSuchThing\n",
        ));
        let report = nativize_plugin(&mut vm, &mut plugin);
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].0, "broken");
        assert_eq!(report.installed.len(), 3);
        assert!(vm.has_slot("answer"));
        assert!(!vm.has_slot("broken"));
    }

    #[test]
    fn dirty_flag_triggers_exactly_one_recompilation() {
        let mut vm = Vm::new(VmConfig::default());
        let mut plugin = demo_plugin();
        plugin.mode = PluginMode::Lazy;
        nativize_plugin(&mut vm, &mut plugin);
        let receiver = vm.class_oop("Object").unwrap();
        for _ in 0..10 {
            vm.call_primitive("answer", receiver, &[]).unwrap();
        }
        assert_eq!(vm.compile_count("answer"), 1);

        plugin.edit_method("answer", "answer\n\t^ 42\n").unwrap();
        mark_dirty(&mut vm, &mut plugin, "answer").unwrap();
        mark_dirty(&mut vm, &mut plugin, "answer").unwrap(); // flag, not counter
        let out = vm.call_primitive("answer", receiver, &[]).unwrap();
        assert_eq!(out.raw(), 42, "edited behavior observable");
        assert_eq!(vm.compile_count("answer"), 2);
        vm.call_primitive("answer", receiver, &[]).unwrap();
        assert_eq!(vm.compile_count("answer"), 2);
    }

    #[test]
    fn mark_dirty_unknown_selector() {
        let mut vm = Vm::new(VmConfig::default());
        let mut plugin = demo_plugin();
        nativize_plugin(&mut vm, &mut plugin);
        assert!(matches!(
            mark_dirty(&mut vm, &mut plugin, "nope"),
            Err(PluginError::UnknownSelector(_))
        ));
    }

    #[test]
    fn recompiling_one_selector_leaves_sibling_artifacts_byte_identical() {
        let mut vm = Vm::new(VmConfig::default());
        let mut plugin = demo_plugin();
        let report = nativize_plugin(&mut vm, &mut plugin);
        assert!(report.errors.is_empty());
        let twice_before = vm.artifact_bytes("twice:").unwrap();
        let thrice_before = vm.artifact_bytes("thrice:").unwrap();

        plugin.edit_method("answer", "answer\n\t^ 4141\n").unwrap();
        mark_dirty(&mut vm, &mut plugin, "answer").unwrap();
        let receiver = vm.class_oop("Object").unwrap();
        assert_eq!(vm.call_primitive("answer", receiver, &[]).unwrap().raw(), 4141);

        assert_eq!(vm.artifact_bytes("twice:").unwrap(), twice_before);
        assert_eq!(vm.artifact_bytes("thrice:").unwrap(), thrice_before);
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = std::env::temp_dir().join(format!("cascade-plugin-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("manifest.txt"), "name=demo\nclass=Object\nmode=eager\n").unwrap();
        std::fs::write(dir.join("methods.slang"), "Object>>answer\n\t^ 7\n").unwrap();
        let plugin = Plugin::from_bundle_dir(&dir).unwrap();
        assert_eq!(plugin.name, "demo");
        assert_eq!(plugin.mode, PluginMode::Eager);
        assert!(plugin.method("answer").is_some());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
