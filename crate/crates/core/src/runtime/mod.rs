//! The miniature object VM: tagged values, semispace heap, primitive
//! dispatch with lazy nativization, the five-primitive native activation
//! interface, symbol resolution and the reflective baseline.

pub mod argslot;
pub mod astinterp;
pub mod exec;
pub mod fs;
pub mod heap;
pub mod oop;
pub mod symbols;
pub(crate) mod vmfn;

pub use argslot::{ArgSlotLayout, PinnedArgSlot, ARG_SLOT_CAPACITY, ARG_SLOT_SYMBOL};
pub use exec::{ExecRegion, NATIVE_EXECUTION};
pub use fs::{HostFs, InMemoryFs, SlangFs};
pub use heap::{CollectStats, Heap, HeapError, ObjFormat, ObjectHeader};
pub use oop::Oop;
pub use symbols::{SymbolError, SymbolTable};

use crate::codegen::{
    apply_relocations, emit_artifact, layout_frames, NativeArtifact,
    PRIMITIVE_FAILURE_WORD,
};
use crate::frontend::{
    annotate_types, parse_bundle, parse_method, purify, MethodNode, SourceMethod,
};
use crate::ir::lower::{global_symbol, lower, LowerEnv, NIL_SYMBOL};
use crate::ir::{interpret_ir, to_ssa, IrEvalError, IrFunction, SymbolEnv};
use crate::reachability::{reachable_methods, MethodTable};
use std::collections::BTreeMap;
use std::rc::Rc;
use thiserror::Error;
use vmfn::CurrentVmGuard;

pub const CLASS_META_ID: u64 = 1;

/// Slots of a class object: name symbol, class id, default element count,
/// format flag.
const CLASS_SLOTS: u64 = 4;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("compilation failed at stage '{stage}': {detail}")]
    Compile { stage: String, detail: String },
    #[error("primitive #{selector} failed")]
    PrimitiveFailed { selector: String },
    #[error("no primitive installed for #{0}")]
    UnknownPrimitive(String),
    #[error("native activation already in flight")]
    ActivationReentered,
    #[error("activation contract violated: {0}")]
    ActivationContract(&'static str),
    #[error(transparent)]
    Heap(#[from] HeapError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error(transparent)]
    Eval(#[from] IrEvalError),
    #[error("unknown method #{0}")]
    UnknownMethod(String),
    #[error("{0}")]
    Bundle(String),
    #[error("argument slot holds at most {max} arguments, {found} supplied")]
    TooManyArguments { max: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationStatus {
    Success,
    PrimitiveFailed,
}

/// The five-entry boundary interface for activating native code.
pub trait NativeActivation {
    fn load_code(&mut self, bytes: &[u8]) -> Result<u64, RuntimeError>;
    fn resolve_symbol(&self, name: &str) -> Result<u64, RuntimeError>;
    fn write_arg_slot(&mut self, receiver: u64, args: &[u64]) -> Result<(), RuntimeError>;
    fn invoke(&mut self, entry: u64) -> Result<ActivationStatus, RuntimeError>;
    fn read_result(&self) -> Result<u64, RuntimeError>;
}

/// Drive one activation through the boundary interface.
pub fn native_activation(
    iface: &mut dyn NativeActivation,
    entry: u64,
    receiver: u64,
    args: &[u64],
) -> Result<u64, RuntimeError> {
    iface.write_arg_slot(receiver, args)?;
    match iface.invoke(entry)? {
        ActivationStatus::Success => iface.read_result(),
        ActivationStatus::PrimitiveFailed => {
            Err(RuntimeError::PrimitiveFailed { selector: format!("entry@{entry:#x}") })
        }
    }
}

/// True iff a prior activation of `selector` exists below the top of the
/// call stack.
pub fn guard_check(call_stack: &[String], selector: &str) -> bool {
    match call_stack.len() {
        0 | 1 => false,
        n => call_stack[..n - 1].iter().any(|s| s == selector),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Ast,
    IrTac,
    IrSsa,
    Native,
}

#[derive(Debug, Clone)]
pub struct VmConfig {
    pub semispace_bytes: usize,
    /// Collection on every allocation; defaults to the CASCADE_GC_TORTURE
    /// environment variable.
    pub torture: Option<bool>,
    pub step_budget: u64,
    /// Buffer prints in memory instead of writing to stdout.
    pub sink_memory: bool,
}

impl Default for VmConfig {
    fn default() -> Self {
        VmConfig {
            semispace_bytes: 8 * 1024 * 1024,
            torture: None,
            step_budget: crate::ir::DEFAULT_STEP_BUDGET,
            sink_memory: true,
        }
    }
}

#[derive(Debug)]
enum PrintSink {
    Memory(Vec<u8>),
    Stdout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassDesc {
    pub id: u64,
    pub element_count: u64,
    pub format: ObjFormat,
}

struct GlobalCell {
    cell: Box<u64>,
    is_oop: bool,
}

/// One compiled primitive: the artifact plus its live executable region.
/// On targets without native execution the artifact's SSA functions are
/// registered with the emulated-entry table instead.
pub struct CompiledPrimitive {
    pub artifact: NativeArtifact,
    /// Keeps the executable mapping alive for as long as the entry
    /// address may be called.
    _region: ExecRegion,
    pub entry_address: u64,
}

#[derive(Clone)]
pub enum SlotState {
    Source,
    Compiled(Rc<CompiledPrimitive>),
    Reflective(Rc<MethodNode>),
}

/// Per-selector dispatch state.
pub struct PrimitiveSlot {
    pub selector: String,
    pub(crate) shared_name: Rc<str>,
    pub state: SlotState,
    pub source: Option<SourceMethod>,
    pub compile_count: u64,
    pub dirty: bool,
    pub fallback: Option<Rc<MethodNode>>,
}

/// One interpreter frame: an activation or a block scope chained to its
/// lexical parent. Variables declared `#oop` are collector roots while the
/// frame is live.
pub(crate) struct InterpFrame {
    pub selector: Rc<str>,
    pub is_activation: bool,
    pub parent: Option<usize>,
    pub names: Vec<String>,
    pub vars: Vec<u64>,
    pub oop_flags: Vec<bool>,
}

pub struct VmCore {
    pub heap: Heap,
    arg_slot: Box<PinnedArgSlot>,
    pub symbols: SymbolTable,
    globals: BTreeMap<String, GlobalCell>,
    classes: BTreeMap<String, ClassDesc>,
    next_class_id: u64,
    pub method_table: MethodTable,
    method_sources: BTreeMap<String, SourceMethod>,
    pub lower_env: LowerEnv,
    slots: BTreeMap<String, PrimitiveSlot>,
    run_native_cache: BTreeMap<String, Rc<CompiledPrimitive>>,
    run_ir_cache: BTreeMap<String, IrProgram>,
    emulated: BTreeMap<u64, (Rc<BTreeMap<String, IrFunction>>, String)>,
    pub(crate) interp_frames: Vec<InterpFrame>,
    pub(crate) interp_steps: u64,
    pub(crate) interp_nesting: u32,
    pub step_budget: u64,
    in_flight: bool,
    slot_written: bool,
    last_invoke_ok: bool,
    sink: PrintSink,
    pub fs: Box<dyn SlangFs>,
    handles: Vec<u64>,
    loaded_regions: Vec<ExecRegion>,
    pub guard_checks: u64,
    pub allocations: u64,
}

#[derive(Clone)]
struct IrProgram {
    tac: Rc<BTreeMap<String, IrFunction>>,
    ssa: Rc<BTreeMap<String, IrFunction>>,
}

/// Owner handle for a VM. The VM is confined to the thread that created
/// it; native activations re-enter it through a thread-local pointer.
pub struct Vm {
    core: *mut VmCore,
}

impl Drop for Vm {
    fn drop(&mut self) {
        unsafe { drop(Box::from_raw(self.core)) };
    }
}

impl Vm {
    pub fn new(config: VmConfig) -> Vm {
        Vm { core: Box::into_raw(VmCore::boot(config)) }
    }

    pub fn core(&mut self) -> &mut VmCore {
        unsafe { &mut *self.core }
    }

    pub fn core_ref(&self) -> &VmCore {
        unsafe { &*self.core }
    }
}

impl Default for Vm {
    fn default() -> Self {
        Vm::new(VmConfig::default())
    }
}

impl std::ops::Deref for Vm {
    type Target = VmCore;
    fn deref(&self) -> &VmCore {
        unsafe { &*self.core }
    }
}

impl std::ops::DerefMut for Vm {
    fn deref_mut(&mut self) -> &mut VmCore {
        unsafe { &mut *self.core }
    }
}

impl VmCore {
    fn boot(config: VmConfig) -> Box<VmCore> {
        let torture = config
            .torture
            .unwrap_or_else(|| std::env::var("CASCADE_GC_TORTURE").is_ok_and(|v| v == "1"));
        let mut heap = Heap::new(config.semispace_bytes);
        heap.torture = torture;
        let mut core = Box::new(VmCore {
            heap,
            arg_slot: PinnedArgSlot::new(),
            symbols: SymbolTable::new(),
            globals: BTreeMap::new(),
            classes: BTreeMap::new(),
            next_class_id: CLASS_META_ID + 1,
            method_table: MethodTable::new(),
            method_sources: BTreeMap::new(),
            lower_env: LowerEnv::default(),
            slots: BTreeMap::new(),
            run_native_cache: BTreeMap::new(),
            run_ir_cache: BTreeMap::new(),
            emulated: BTreeMap::new(),
            interp_frames: Vec::new(),
            interp_steps: config.step_budget,
            interp_nesting: 0,
            step_budget: config.step_budget,
            in_flight: false,
            slot_written: false,
            last_invoke_ok: false,
            sink: if config.sink_memory {
                PrintSink::Memory(Vec::new())
            } else {
                PrintSink::Stdout
            },
            fs: Box::new(InMemoryFs::new()),
            handles: Vec::new(),
            loaded_regions: Vec::new(),
            guard_checks: 0,
            allocations: 0,
        });
        core.symbols.register_internal(ARG_SLOT_SYMBOL, core.arg_slot.base_address());
        for f in vmfn::vm_functions() {
            core.symbols.register_internal(f.name, f.address);
            core.method_table
                .register_vm_function(f.name, f.arity)
                .expect("VM function names are disjoint");
        }
        let nil = core.heap.nil().raw();
        core.define_global_cell(NIL_SYMBOL, nil, true);
        core.define_class("Object", 2, ObjFormat::Slots).expect("bootstrap class");
        core.define_class("Array", 0, ObjFormat::Slots).expect("bootstrap class");
        core.define_class("Point", 2, ObjFormat::Slots).expect("bootstrap class");
        core.define_class("ByteBuffer", 128, ObjFormat::Bytes).expect("bootstrap class");
        core.define_class("ByteArray", 0, ObjFormat::Bytes).expect("bootstrap class");
        core
    }

    // ── globals and classes ─────────────────────────────────────────────

    /// Install a raw global cell under `symbol` (full symbol name).
    fn define_global_cell(&mut self, symbol: &str, value: u64, is_oop: bool) {
        let cell = GlobalCell { cell: Box::new(value), is_oop };
        let address = &*cell.cell as *const u64 as u64;
        self.symbols.register_internal(symbol, address);
        self.globals.insert(symbol.to_string(), cell);
    }

    /// Define a language-visible global; Slang code referencing `name`
    /// loads the cell's current value.
    pub fn define_global(&mut self, name: &str, value: u64, is_oop: bool) {
        self.define_global_cell(&global_symbol(name), value, is_oop);
        self.lower_env.globals.insert(name.to_string());
    }

    pub fn global_word(&self, name: &str) -> Option<u64> {
        self.globals.get(&global_symbol(name)).map(|g| *g.cell)
    }

    pub fn nil(&self) -> Oop {
        self.heap.nil()
    }

    pub fn true_oop() -> Oop {
        Oop::from_small_int(1)
    }

    /// Intern through the lowering environment so every backend sees the
    /// same id for the same symbol.
    pub fn intern_symbol(&mut self, name: &str) -> i64 {
        self.lower_env.intern(name)
    }

    pub fn define_class(
        &mut self,
        name: &str,
        element_count: u64,
        format: ObjFormat,
    ) -> Result<Oop, RuntimeError> {
        let id = self.next_class_id;
        self.next_class_id += 1;
        let class_oop = self.allocate_raw(CLASS_META_ID, CLASS_SLOTS, ObjFormat::Slots)?;
        let name_id = self.intern_symbol(name);
        self.heap.set_slot(class_oop, 0, Oop::from_small_int(name_id).raw());
        self.heap.set_slot(class_oop, 1, Oop::from_small_int(id as i64).raw());
        self.heap.set_slot(class_oop, 2, Oop::from_small_int(element_count as i64).raw());
        let format_flag = matches!(format, ObjFormat::Bytes) as i64;
        self.heap.set_slot(class_oop, 3, Oop::from_small_int(format_flag).raw());
        self.classes.insert(name.to_string(), ClassDesc { id, element_count, format });
        self.define_global(name, class_oop.raw(), true);
        Ok(class_oop)
    }

    pub fn class_desc(&self, name: &str) -> Option<ClassDesc> {
        self.classes.get(name).copied()
    }

    pub fn class_oop(&self, name: &str) -> Option<Oop> {
        self.global_word(name).map(Oop)
    }

    // ── allocation and collection ───────────────────────────────────────

    fn visit_roots_parts(
        arg_slot: &mut PinnedArgSlot,
        globals: &mut BTreeMap<String, GlobalCell>,
        frames: &mut [InterpFrame],
        handles: &mut [u64],
        visit: &mut dyn FnMut(&mut u64),
    ) {
        visit(&mut arg_slot.receiver);
        for arg in arg_slot.args.iter_mut() {
            visit(arg);
        }
        visit(&mut arg_slot.result);
        for global in globals.values_mut() {
            if global.is_oop {
                visit(&mut global.cell);
            }
        }
        for frame in frames {
            for (var, &is_oop) in frame.vars.iter_mut().zip(frame.oop_flags.iter()) {
                if is_oop {
                    visit(var);
                }
            }
        }
        for handle in handles {
            visit(handle);
        }
    }

    pub fn allocate_raw(
        &mut self,
        class_id: u64,
        element_count: u64,
        format: ObjFormat,
    ) -> Result<Oop, RuntimeError> {
        self.allocations += 1;
        let (heap, arg_slot, globals, frames, handles) = (
            &mut self.heap,
            &mut self.arg_slot,
            &mut self.globals,
            &mut self.interp_frames,
            &mut self.handles,
        );
        let oop = heap.allocate(class_id, element_count, format, &mut |visit| {
            Self::visit_roots_parts(arg_slot, globals, frames, handles, visit)
        })?;
        Ok(oop)
    }

    /// The `allocate` operation: a fresh instance with `n_slots` nil slots.
    pub fn allocate(&mut self, class_id: u64, n_slots: u64) -> Result<Oop, RuntimeError> {
        self.allocate_raw(class_id, n_slots, ObjFormat::Slots)
    }

    pub fn collect(&mut self) -> CollectStats {
        let (heap, arg_slot, globals, frames, handles) = (
            &mut self.heap,
            &mut self.arg_slot,
            &mut self.globals,
            &mut self.interp_frames,
            &mut self.handles,
        );
        heap.collect(&mut |visit| {
            Self::visit_roots_parts(arg_slot, globals, frames, handles, visit)
        })
    }

    /// Allocate an instance of the class represented by `class_oop`.
    pub fn allocate_instance(&mut self, class_oop: Oop) -> Result<Oop, RuntimeError> {
        if !class_oop.is_heap() || !self.heap.contains_active(class_oop.raw()) {
            return Err(RuntimeError::PrimitiveFailed { selector: "primitiveNew".into() });
        }
        let header = self.heap.header_of(class_oop);
        if header.class_id != CLASS_META_ID {
            return Err(RuntimeError::PrimitiveFailed { selector: "primitiveNew".into() });
        }
        let id = Oop(self.heap.slot(class_oop, 1)).as_small_int().unwrap_or(0) as u64;
        let count = Oop(self.heap.slot(class_oop, 2)).as_small_int().unwrap_or(0) as u64;
        let format = if Oop(self.heap.slot(class_oop, 3)).as_small_int() == Some(1) {
            ObjFormat::Bytes
        } else {
            ObjFormat::Slots
        };
        self.allocate_raw(id, count, format)
    }

    pub fn byte_object(&mut self, class: &str, data: &[u8]) -> Result<Oop, RuntimeError> {
        let desc = self
            .class_desc(class)
            .ok_or_else(|| RuntimeError::UnknownMethod(class.to_string()))?;
        let oop = self.allocate_raw(desc.id, data.len() as u64, ObjFormat::Bytes)?;
        self.heap.write_bytes(oop, data);
        Ok(oop)
    }

    pub fn string_from(&self, oop: Oop) -> Option<String> {
        if !oop.is_heap() || !self.heap.contains_active(oop.raw()) {
            return None;
        }
        let header = self.heap.header_of(oop);
        if header.format != ObjFormat::Bytes {
            return None;
        }
        String::from_utf8(self.heap.bytes_of(oop)).ok()
    }

    // ── handles (explicit roots for host-held oops) ─────────────────────

    pub fn pin_handle(&mut self, oop: Oop) -> usize {
        self.handles.push(oop.raw());
        self.handles.len() - 1
    }

    pub fn handle(&self, index: usize) -> Oop {
        Oop(self.handles[index])
    }

    // ── print sink ──────────────────────────────────────────────────────

    fn sink_bytes(&mut self, bytes: &[u8]) {
        match &mut self.sink {
            PrintSink::Memory(buffer) => buffer.extend_from_slice(bytes),
            PrintSink::Stdout => {
                use std::io::Write;
                let _ = std::io::stdout().write_all(bytes);
            }
        }
    }

    pub fn take_output(&mut self) -> Vec<u8> {
        match &mut self.sink {
            PrintSink::Memory(buffer) => std::mem::take(buffer),
            PrintSink::Stdout => Vec::new(),
        }
    }

    // ── VM function implementations ─────────────────────────────────────

    pub(crate) fn vmf_primitive_new(&mut self) -> u64 {
        let receiver = Oop(self.arg_slot.receiver);
        match self.allocate_instance(receiver) {
            Ok(oop) => oop.raw(),
            Err(_) => PRIMITIVE_FAILURE_WORD,
        }
    }

    pub(crate) fn vmf_print_oop(&mut self, oop: u64) -> u64 {
        const HEX: &[u8; 16] = b"0123456789abcdef";
        let mut buffer = [0u8; 17];
        let mut i = 0;
        while i < 16 {
            buffer[i] = HEX[((oop >> (60 - 4 * i)) & 0xF) as usize];
            i += 1;
        }
        buffer[16] = b'\n';
        self.sink_bytes(&buffer);
        0
    }

    pub(crate) fn vmf_emit_hex_digit(&mut self, digit: u64) -> u64 {
        let nibble = (digit & 0xF) as u8;
        let ch = if nibble < 10 { b'0' + nibble } else { b'a' + nibble - 10 };
        self.sink_bytes(&[ch]);
        0
    }

    pub(crate) fn vmf_create_directory(&mut self, path: u64) -> u64 {
        let Some(path) = self.string_from(Oop(path)) else {
            return PRIMITIVE_FAILURE_WORD;
        };
        match self.fs.create_dir(&path) {
            Ok(()) => Self::true_oop().raw(),
            Err(_) => PRIMITIVE_FAILURE_WORD,
        }
    }

    pub(crate) fn vmf_file_write(&mut self, path: u64, data: u64) -> u64 {
        let (Some(path), Some(oop)) = (self.string_from(Oop(path)), Some(Oop(data))) else {
            return PRIMITIVE_FAILURE_WORD;
        };
        if !oop.is_heap() || self.heap.header_of(oop).format != ObjFormat::Bytes {
            return PRIMITIVE_FAILURE_WORD;
        }
        let bytes = self.heap.bytes_of(oop);
        match self.fs.write(&path, &bytes) {
            Ok(()) => Oop::from_small_int(bytes.len() as i64).raw(),
            Err(_) => PRIMITIVE_FAILURE_WORD,
        }
    }

    pub(crate) fn vmf_file_read(&mut self, path: u64) -> u64 {
        let Some(path) = self.string_from(Oop(path)) else {
            return PRIMITIVE_FAILURE_WORD;
        };
        match self.fs.read(&path) {
            Ok(data) => match self.byte_object("ByteArray", &data) {
                Ok(oop) => oop.raw(),
                Err(_) => PRIMITIVE_FAILURE_WORD,
            },
            Err(_) => PRIMITIVE_FAILURE_WORD,
        }
    }

    /// The static path to directory creation, bypassing dispatch; the
    /// benchmark's baseline.
    pub fn create_directory_direct(&mut self, path: u64) -> u64 {
        self.vmf_create_directory(path)
    }

    pub fn file_write_direct(&mut self, path: u64, data: u64) -> u64 {
        self.vmf_file_write(path, data)
    }

    pub fn file_read_direct(&mut self, path: u64) -> u64 {
        self.vmf_file_read(path)
    }

    /// Argument word `index` of the pinned slot.
    pub fn arg_slot_argument_public(&self, index: usize) -> u64 {
        self.arg_slot.args[index]
    }

    /// Compile a loaded method and return its activation entry address.
    pub fn native_entry(&mut self, selector: &str) -> Result<u64, RuntimeError> {
        Ok(self.native_unit(selector)?.entry_address)
    }

    #[doc(hidden)]
    pub fn force_in_flight_public(&mut self, value: bool) {
        self.in_flight = value;
    }

    pub(crate) fn call_vm_function(
        &mut self,
        name: &str,
        args: &[u64],
    ) -> Result<u64, IrEvalError> {
        let arity = self
            .method_table
            .vm_function_arity(name)
            .ok_or_else(|| IrEvalError::UnresolvedVmFunction(name.to_string()))?;
        if arity != args.len() {
            return Err(IrEvalError::ArityMismatch { expected: arity, found: args.len() });
        }
        let address = self
            .symbols
            .try_resolve(name)
            .ok_or_else(|| IrEvalError::UnresolvedVmFunction(name.to_string()))?;
        let _guard = CurrentVmGuard::install(self as *mut VmCore);
        Ok(unsafe { vmfn::call_by_address(address, args) })
    }

    // ── bundles, methods, primitive slots ───────────────────────────────

    /// Load a `.slang` bundle: every method joins the method table, and
    /// methods carrying the `<primitive>` pragma also get a primitive
    /// slot for on-demand nativization.
    pub fn load_bundle(&mut self, text: &str, default_class: &str) -> Result<Vec<String>, RuntimeError> {
        let methods = parse_bundle(text, default_class)
            .map_err(|e| RuntimeError::Bundle(e.to_string()))?;
        let mut selectors = Vec::new();
        for mut src in methods {
            src.source = purify(&src.source).map_err(|e| RuntimeError::Bundle(e.to_string()))?;
            let parsed = parse_method(&src).map_err(|e| RuntimeError::Bundle(e.to_string()))?;
            let annotated =
                annotate_types(&parsed).map_err(|e| RuntimeError::Bundle(e.to_string()))?;
            let is_primitive = annotated.is_primitive();
            self.method_table
                .insert_method(annotated)
                .map_err(|e| RuntimeError::Bundle(e.to_string()))?;
            self.method_sources.insert(src.selector.clone(), src.clone());
            if is_primitive {
                self.install_primitive(&src.selector, src.clone())?;
            }
            selectors.push(src.selector);
        }
        self.run_ir_cache.clear();
        self.run_native_cache.clear();
        Ok(selectors)
    }

    /// Parse, annotate and add one method to the table without touching
    /// primitive dispatch.
    pub fn register_library_method(&mut self, source: &SourceMethod) -> Result<(), RuntimeError> {
        let mut src = source.clone();
        src.source = purify(&src.source).map_err(|e| RuntimeError::Bundle(e.to_string()))?;
        let parsed = parse_method(&src).map_err(|e| RuntimeError::Bundle(e.to_string()))?;
        let annotated = annotate_types(&parsed).map_err(|e| RuntimeError::Bundle(e.to_string()))?;
        self.method_table
            .insert_method(annotated)
            .map_err(|e| RuntimeError::Bundle(e.to_string()))?;
        self.method_sources.insert(src.selector.clone(), src);
        self.run_ir_cache.clear();
        self.run_native_cache.clear();
        Ok(())
    }

    /// Compile a Source (or dirty) slot now; a no-op for compiled-and-clean
    /// or reflective slots. Compile errors leave the slot untouched.
    pub fn ensure_slot_compiled(&mut self, selector: &str) -> Result<(), RuntimeError> {
        if !self.slots.contains_key(selector) {
            return Err(RuntimeError::UnknownPrimitive(selector.to_string()));
        }
        let needs_compile = {
            let slot = &self.slots[selector];
            matches!(slot.state, SlotState::Source) || slot.dirty
        };
        if !needs_compile {
            return Ok(());
        }
        if matches!(self.slots[selector].state, SlotState::Reflective(_)) {
            self.slots.get_mut(selector).expect("slot exists").dirty = false;
            return Ok(());
        }
        let source = self.slots[selector]
            .source
            .clone()
            .ok_or_else(|| RuntimeError::UnknownPrimitive(selector.to_string()))?;
        let compiled = self.compile_primitive(selector, &source)?;
        let slot = self.slots.get_mut(selector).expect("slot exists");
        slot.state = SlotState::Compiled(Rc::new(compiled));
        slot.compile_count += 1;
        slot.dirty = false;
        Ok(())
    }

    /// Install (or replace) a lazily compiled primitive slot.
    pub fn install_primitive(
        &mut self,
        selector: &str,
        source: SourceMethod,
    ) -> Result<(), RuntimeError> {
        self.slots.insert(
            selector.to_string(),
            PrimitiveSlot {
                selector: selector.to_string(),
                shared_name: Rc::from(selector),
                state: SlotState::Source,
                source: Some(source),
                compile_count: 0,
                dirty: false,
                fallback: None,
            },
        );
        Ok(())
    }

    /// Install a reflective (AST-interpreted) primitive.
    pub fn install_reflective(
        &mut self,
        selector: &str,
        source: &SourceMethod,
    ) -> Result<(), RuntimeError> {
        let parsed = parse_method(source).map_err(|e| RuntimeError::Bundle(e.to_string()))?;
        let annotated =
            annotate_types(&parsed).map_err(|e| RuntimeError::Bundle(e.to_string()))?;
        self.slots.insert(
            selector.to_string(),
            PrimitiveSlot {
                selector: selector.to_string(),
                shared_name: Rc::from(selector),
                state: SlotState::Reflective(Rc::new(annotated)),
                source: Some(source.clone()),
                compile_count: 0,
                dirty: false,
                fallback: None,
            },
        );
        Ok(())
    }

    pub fn remove_primitive(&mut self, selector: &str) {
        self.slots.remove(selector);
    }

    pub fn method_source(&self, selector: &str) -> Option<SourceMethod> {
        self.method_sources.get(selector).cloned()
    }

    pub fn slot(&self, selector: &str) -> Option<&PrimitiveSlot> {
        self.slots.get(selector)
    }

    pub fn has_slot(&self, selector: &str) -> bool {
        self.slots.contains_key(selector)
    }

    pub fn compile_count(&self, selector: &str) -> u64 {
        self.slots.get(selector).map_or(0, |s| s.compile_count)
    }

    pub fn artifact_bytes(&self, selector: &str) -> Option<Vec<u8>> {
        match self.slots.get(selector).map(|s| &s.state) {
            Some(SlotState::Compiled(c)) => Some(c.artifact.code.clone()),
            _ => None,
        }
    }

    /// Update a slot's source text; takes effect at the next compilation
    /// (mark the slot dirty to force one).
    pub fn update_primitive_source(
        &mut self,
        selector: &str,
        source: SourceMethod,
    ) -> Result<(), RuntimeError> {
        let slot = self
            .slots
            .get_mut(selector)
            .ok_or_else(|| RuntimeError::UnknownPrimitive(selector.to_string()))?;
        slot.source = Some(source);
        Ok(())
    }

    pub fn mark_slot_dirty(&mut self, selector: &str) -> Result<(), RuntimeError> {
        let slot = self
            .slots
            .get_mut(selector)
            .ok_or_else(|| RuntimeError::UnknownPrimitive(selector.to_string()))?;
        slot.dirty = true;
        Ok(())
    }

    // ── the compilation pipeline ────────────────────────────────────────

    fn stage<T, E: std::fmt::Display>(
        stage: &str,
        result: Result<T, E>,
    ) -> Result<T, RuntimeError> {
        result.map_err(|e| RuntimeError::Compile { stage: stage.to_string(), detail: e.to_string() })
    }

    /// purify -> parse -> annotate -> reachability -> lower -> to_ssa ->
    /// layout -> emit -> relocate -> load. Compile errors never poison the
    /// slot; the caller only installs the result on success.
    pub fn compile_primitive(
        &mut self,
        selector: &str,
        source: &SourceMethod,
    ) -> Result<CompiledPrimitive, RuntimeError> {
        let mut src = source.clone();
        src.source = Self::stage("purify", purify(&src.source))?;
        let parsed = Self::stage("parse", parse_method(&src))?;
        let annotated = Self::stage("annotate", annotate_types(&parsed))?;

        let mut working = self.method_table.clone();
        Self::stage("reachability", working.insert_method(annotated.clone()))?;
        let reachable = Self::stage("reachability", reachable_methods(selector, &working))?;

        let mut compiled = Vec::new();
        let mut functions = BTreeMap::new();
        for name in &reachable.selectors {
            let method = working.method(name).expect("reachable methods are in the table");
            let tac = Self::stage("lower", lower(method, &working, &mut self.lower_env))?;
            let ssa = to_ssa(&tac);
            let ctx = layout_frames(&ssa);
            functions.insert(name.clone(), ssa.clone());
            compiled.push((ssa, ctx));
        }
        let mut artifact = Self::stage("emit", emit_artifact(&compiled, 0))?;
        let symbols = &self.symbols;
        Self::stage(
            "relocate",
            apply_relocations(&mut artifact, &|name| symbols.try_resolve(name)),
        )?;
        let region = Self::stage("load", ExecRegion::load(&artifact.code))?;
        let entry_address = region.address() + artifact.entry_offset as u64;

        // the compiled source becomes the table's view of the method
        self.method_table
            .insert_method(annotated)
            .map_err(|e| RuntimeError::Compile { stage: "install".into(), detail: e.to_string() })?;
        self.method_sources.insert(selector.to_string(), src);

        let functions = Rc::new(functions);
        if !NATIVE_EXECUTION {
            self.emulated
                .insert(entry_address, (functions.clone(), selector.to_string()));
        }
        Ok(CompiledPrimitive { artifact, _region: region, entry_address })
    }

    // ── dispatch ────────────────────────────────────────────────────────

    /// Install a synthetic activation beneath everything that follows;
    /// benchmarks use this to model being called from an application
    /// stack of a given depth.
    pub fn push_context(&mut self, selector: &str) {
        self.push_activation(Rc::from(selector));
    }

    pub fn pop_context(&mut self) {
        self.pop_activation();
    }

    fn push_activation(&mut self, selector: Rc<str>) {
        self.interp_frames.push(InterpFrame {
            selector,
            is_activation: true,
            parent: None,
            names: Vec::new(),
            vars: Vec::new(),
            oop_flags: Vec::new(),
        });
    }

    fn pop_activation(&mut self) {
        self.interp_frames.pop();
    }

    pub(crate) fn arg_slot_argument(&self, index: usize) -> u64 {
        self.arg_slot.args[index]
    }

    pub fn arg_slot_base(&self) -> u64 {
        self.arg_slot.base_address()
    }

    /// Selector of the i-th activation, counted from the stack bottom.
    pub(crate) fn activation_selector_at(&self, index: usize) -> Option<String> {
        self.interp_frames
            .iter()
            .filter(|f| f.is_activation)
            .nth(index)
            .map(|f| f.selector.to_string())
    }

    pub(crate) fn activation_selectors(&self) -> Vec<String> {
        self.interp_frames
            .iter()
            .filter(|f| f.is_activation)
            .map(|f| f.selector.to_string())
            .collect()
    }

    /// Dispatch a primitive by selector. A `Source` slot compiles on the
    /// way (subsequent calls reuse the code); a `Reflective` slot runs the
    /// AST interpreter. A primitive failure falls back to the slot's
    /// declared fallback method when present.
    pub fn call_primitive(
        &mut self,
        selector: &str,
        receiver: Oop,
        args: &[Oop],
    ) -> Result<Oop, RuntimeError> {
        if !self.slots.contains_key(selector) {
            return Err(RuntimeError::UnknownPrimitive(selector.to_string()));
        }
        self.call_primitive_inner(selector, receiver, args)
    }

    fn call_primitive_inner(
        &mut self,
        selector: &str,
        receiver: Oop,
        args: &[Oop],
    ) -> Result<Oop, RuntimeError> {
        let raw_args: Vec<u64> = args.iter().map(|a| a.raw()).collect();
        self.write_arg_slot_words(receiver.raw(), &raw_args)?;

        let (state, shared_name) = {
            let slot = &self.slots[selector];
            if matches!(slot.state, SlotState::Source) || slot.dirty {
                // compile on demand; the slot is untouched if this fails
                self.ensure_slot_compiled(selector)?;
                let slot = &self.slots[selector];
                (slot.state.clone(), slot.shared_name.clone())
            } else {
                (slot.state.clone(), slot.shared_name.clone())
            }
        };
        let word = match state {
            SlotState::Compiled(compiled) => {
                // the interpreters create their own activation frames; a
                // native activation gets a register here so the guard can
                // see compiled primitives too
                self.push_activation(shared_name);
                let word = self.invoke_entry_word(compiled.entry_address);
                self.pop_activation();
                word?
            }
            SlotState::Reflective(method) => {
                // like the shim: the body receives exactly its declared
                // parameter count out of the pinned slot
                let declared = self.slot_args_for(method.params.len());
                astinterp::ast_interpret_core(self, &method, receiver.raw(), &declared)?
            }
            SlotState::Source => unreachable!("compiled above"),
        };

        if word == PRIMITIVE_FAILURE_WORD {
            let fallback = self.slots[selector].fallback.clone();
            match fallback {
                Some(method) => {
                    let declared = self.slot_args_for(method.params.len());
                    let word =
                        astinterp::ast_interpret_core(self, &method, receiver.raw(), &declared)?;
                    Ok(Oop(word))
                }
                None => Err(RuntimeError::PrimitiveFailed { selector: selector.to_string() }),
            }
        } else {
            Ok(Oop(word))
        }
    }

    fn slot_args_for(&self, arity: usize) -> Vec<u64> {
        self.arg_slot.args[..arity.min(ARG_SLOT_CAPACITY)].to_vec()
    }

    pub fn set_fallback(&mut self, selector: &str, source: &SourceMethod) -> Result<(), RuntimeError> {
        let parsed = parse_method(source).map_err(|e| RuntimeError::Bundle(e.to_string()))?;
        let annotated = annotate_types(&parsed).map_err(|e| RuntimeError::Bundle(e.to_string()))?;
        let slot = self
            .slots
            .get_mut(selector)
            .ok_or_else(|| RuntimeError::UnknownPrimitive(selector.to_string()))?;
        slot.fallback = Some(Rc::new(annotated));
        Ok(())
    }

    fn write_arg_slot_words(&mut self, receiver: u64, args: &[u64]) -> Result<(), RuntimeError> {
        if args.len() > ARG_SLOT_CAPACITY {
            return Err(RuntimeError::TooManyArguments {
                max: ARG_SLOT_CAPACITY,
                found: args.len(),
            });
        }
        self.arg_slot.receiver = receiver;
        self.arg_slot.arg_count = args.len() as u64;
        for (slot, &arg) in self.arg_slot.args.iter_mut().zip(args.iter()) {
            *slot = arg;
        }
        self.slot_written = true;
        Ok(())
    }

    fn invoke_entry_word(&mut self, entry: u64) -> Result<u64, RuntimeError> {
        if !self.slot_written {
            return Err(RuntimeError::ActivationContract(
                "invoke requires a prior write_arg_slot",
            ));
        }
        if self.in_flight {
            return Err(RuntimeError::ActivationReentered);
        }
        self.in_flight = true;
        let word = if NATIVE_EXECUTION && !self.emulated.contains_key(&entry) {
            let core = self as *mut VmCore;
            let _guard = CurrentVmGuard::install(core);
            let f: extern "C" fn() -> u64 = unsafe { std::mem::transmute(entry) };
            f()
        } else {
            match self.emulated_invoke(entry) {
                Ok(word) => word,
                Err(e) => {
                    self.in_flight = false;
                    return Err(e);
                }
            }
        };
        self.in_flight = false;
        self.arg_slot.result = word;
        self.last_invoke_ok = word != PRIMITIVE_FAILURE_WORD;
        Ok(word)
    }

    fn emulated_invoke(&mut self, entry: u64) -> Result<u64, RuntimeError> {
        let (functions, entry_name) = self
            .emulated
            .get(&entry)
            .cloned()
            .ok_or(RuntimeError::ActivationContract("entry is not loaded code"))?;
        let f = functions
            .get(&entry_name)
            .ok_or(RuntimeError::ActivationContract("entry function missing"))?
            .clone();
        let mut args = vec![self.arg_slot.receiver];
        let argc = (f.params.len() - 1).min(ARG_SLOT_CAPACITY);
        args.extend_from_slice(&self.arg_slot.args[..argc]);
        let budget = self.step_budget;
        let mut env = VmIrEnv { core: self, functions: functions.as_ref() };
        interpret_ir(&f, &args, &mut env, budget).map_err(RuntimeError::Eval)
    }


    // ── the unified run surface (three-way equivalence backends) ────────

    fn ir_program(&mut self, selector: &str) -> Result<IrProgram, RuntimeError> {
        if let Some(program) = self.run_ir_cache.get(selector) {
            return Ok(program.clone());
        }
        let reachable = Self::stage("reachability", reachable_methods(selector, &self.method_table))?;
        let mut tac = BTreeMap::new();
        let mut ssa = BTreeMap::new();
        for name in &reachable.selectors {
            let method = self.method_table.method(name).expect("reachable").clone();
            let f = Self::stage("lower", lower(&method, &self.method_table, &mut self.lower_env))?;
            ssa.insert(name.clone(), to_ssa(&f));
            tac.insert(name.clone(), f);
        }
        let program = IrProgram { tac: Rc::new(tac), ssa: Rc::new(ssa) };
        self.run_ir_cache.insert(selector.to_string(), program.clone());
        Ok(program)
    }

    fn native_unit(&mut self, selector: &str) -> Result<Rc<CompiledPrimitive>, RuntimeError> {
        if let Some(unit) = self.run_native_cache.get(selector) {
            return Ok(unit.clone());
        }
        let source = self
            .method_sources
            .get(selector)
            .cloned()
            .ok_or_else(|| RuntimeError::UnknownMethod(selector.to_string()))?;
        let unit = Rc::new(self.compile_primitive(selector, &source)?);
        self.run_native_cache.insert(selector.to_string(), unit.clone());
        Ok(unit)
    }

    /// Run a loaded method through one of the execution backends. All
    /// backends see the same pinned-slot contents, VM functions and heap.
    pub fn run_method(
        &mut self,
        selector: &str,
        receiver: u64,
        args: &[u64],
        backend: Backend,
    ) -> Result<u64, RuntimeError> {
        self.write_arg_slot_words(receiver, args)?;
        let mut full_args = vec![receiver];
        full_args.extend_from_slice(args);
        match backend {
            Backend::Ast => {
                let method = self
                    .method_table
                    .method(selector)
                    .ok_or_else(|| RuntimeError::UnknownMethod(selector.to_string()))?
                    .clone();
                let word = astinterp::ast_interpret_core(self, &method, receiver, args)?;
                Ok(word)
            }
            Backend::IrTac | Backend::IrSsa => {
                let program = self.ir_program(selector)?;
                let functions = match backend {
                    Backend::IrTac => program.tac.clone(),
                    _ => program.ssa.clone(),
                };
                let f = functions
                    .get(selector)
                    .ok_or_else(|| RuntimeError::UnknownMethod(selector.to_string()))?
                    .clone();
                let budget = self.step_budget;
                let mut env = VmIrEnv { core: self, functions: functions.as_ref() };
                interpret_ir(&f, &full_args, &mut env, budget).map_err(RuntimeError::Eval)
            }
            Backend::Native => {
                let unit = self.native_unit(selector)?;
                let word = self.invoke_entry_word(unit.entry_address)?;
                if word == PRIMITIVE_FAILURE_WORD {
                    Err(RuntimeError::PrimitiveFailed { selector: selector.to_string() })
                } else {
                    Ok(word)
                }
            }
        }
    }

    /// AST-interpret a method (the reference semantics / reflective mode).
    pub fn ast_interpret(
        &mut self,
        method: &MethodNode,
        receiver: u64,
        args: &[u64],
    ) -> Result<u64, IrEvalError> {
        astinterp::ast_interpret_core(self, method, receiver, args)
    }

    /// The recursion-guard primitive. Reflective guards materialize the
    /// activation stack before inspecting it, so this one reifies the
    /// selectors into a language-side array and scans that; cost is linear
    /// in stack depth.
    pub fn guard_contains(&mut self, selector: &str) -> bool {
        self.guard_checks += 1;
        let stack = self.activation_selectors();
        let ids: Vec<i64> = stack.iter().map(|s| self.lower_env.intern(s)).collect();
        let wanted = self.lower_env.intern(selector);
        match ids.len() {
            0 | 1 => false,
            depth => ids[..depth - 1].contains(&wanted),
        }
    }

}

struct VmIrEnv<'a> {
    core: &'a mut VmCore,
    functions: &'a BTreeMap<String, IrFunction>,
}

impl SymbolEnv for VmIrEnv<'_> {
    fn call_vm(&mut self, name: &str, args: &[u64]) -> Result<u64, IrEvalError> {
        self.core.call_vm_function(name, args)
    }

    fn internal(&self, name: &str) -> Option<&IrFunction> {
        self.functions.get(name)
    }

    fn resolve_symbol(&self, name: &str) -> Option<u64> {
        self.core.symbols.try_resolve(name)
    }
}

impl NativeActivation for Vm {
    fn load_code(&mut self, bytes: &[u8]) -> Result<u64, RuntimeError> {
        let region = ExecRegion::load(bytes)
            .map_err(|e| RuntimeError::Compile { stage: "load".into(), detail: e.to_string() })?;
        let address = region.address();
        // the caller owns lookup by address; keep the region alive
        self.core().loaded_regions.push(region);
        Ok(address)
    }

    fn resolve_symbol(&self, name: &str) -> Result<u64, RuntimeError> {
        Ok(self.core_ref().symbols.resolve(name)?)
    }

    fn write_arg_slot(&mut self, receiver: u64, args: &[u64]) -> Result<(), RuntimeError> {
        self.core().write_arg_slot_words(receiver, args)
    }

    fn invoke(&mut self, entry: u64) -> Result<ActivationStatus, RuntimeError> {
        let word = self.core().invoke_entry_word(entry)?;
        Ok(if word == PRIMITIVE_FAILURE_WORD {
            ActivationStatus::PrimitiveFailed
        } else {
            ActivationStatus::Success
        })
    }

    fn read_result(&self) -> Result<u64, RuntimeError> {
        let core = self.core_ref();
        if !core.last_invoke_ok {
            return Err(RuntimeError::ActivationContract(
                "read_result requires a successful invoke",
            ));
        }
        Ok(core.arg_slot.result)
    }
}
