//! A miniature object VM with a runtime compiler that translates a
//! statically bound, Smalltalk-syntax language subset into native code on
//! demand, and installs or replaces VM primitives and plugins while the
//! system runs.
//!
//! The pipeline is a chain of converters: source is purified, parsed into
//! an AST, type-annotated from pragmas, lowered to three-address code,
//! put into SSA form and emitted as x86-64 machine code that activates
//! through a pinned argument slot. An AST interpreter and an IR
//! interpreter provide the reference semantics the native backend is
//! checked against.

pub mod codegen;
pub mod corpus;
pub mod frontend;
pub mod harness;
pub mod ir;
pub mod plugins;
pub mod reachability;
pub mod runtime;
pub mod selectors;

pub use codegen::{
    classify_send, emit_native, inline_template, layout_frames, CodegenError, FrameContext,
    NativeArtifact, PrimitiveTemplate, SendKind, PRIMITIVE_FAILURE_WORD,
};
pub use frontend::{
    annotate_types, parse_bundle, parse_method, print_method, purify, FrontendError, MethodNode,
    SourceMethod,
};
pub use ir::{interpret_ir, lower, to_ssa, ConverterChain, IrFunction, StageError};
pub use reachability::{reachable_methods, MethodTable, ReachabilityError, ReachableSet};
pub use runtime::{
    guard_check, native_activation, Backend, NativeActivation, Oop, RuntimeError, Vm, VmConfig,
};
