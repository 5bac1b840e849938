//! VM functions: the C-convention entry points generated code calls.
//!
//! The VM is single threaded, so the current VM is a thread-local raw
//! pointer installed around every activation; the same function pointers
//! back both native calls and interpreted `call_vm` instructions, which
//! keeps the three execution backends behaviorally identical.

use super::VmCore;
use crate::codegen::PRIMITIVE_FAILURE_WORD;
use std::cell::Cell;

thread_local! {
    static CURRENT_VM: Cell<*mut VmCore> = const { Cell::new(std::ptr::null_mut()) };
}

/// Install `core` as the thread's current VM for the guard's lifetime.
pub(crate) struct CurrentVmGuard {
    previous: *mut VmCore,
}

impl CurrentVmGuard {
    pub(crate) fn install(core: *mut VmCore) -> CurrentVmGuard {
        let previous = CURRENT_VM.with(|c| c.replace(core));
        CurrentVmGuard { previous }
    }
}

impl Drop for CurrentVmGuard {
    fn drop(&mut self) {
        CURRENT_VM.with(|c| c.set(self.previous));
    }
}

fn with_vm(f: impl FnOnce(&mut VmCore) -> u64) -> u64 {
    CURRENT_VM.with(|c| {
        let ptr = c.get();
        if ptr.is_null() {
            return PRIMITIVE_FAILURE_WORD;
        }
        f(unsafe { &mut *ptr })
    })
}

extern "C" fn vmf_primitive_new() -> u64 {
    with_vm(|vm| vm.vmf_primitive_new())
}

extern "C" fn vmf_print_oop(oop: u64) -> u64 {
    with_vm(|vm| vm.vmf_print_oop(oop))
}

extern "C" fn vmf_create_directory(path: u64) -> u64 {
    with_vm(|vm| vm.vmf_create_directory(path))
}

extern "C" fn vmf_file_write(path: u64, data: u64) -> u64 {
    with_vm(|vm| vm.vmf_file_write(path, data))
}

extern "C" fn vmf_file_read(path: u64) -> u64 {
    with_vm(|vm| vm.vmf_file_read(path))
}

extern "C" fn vmf_emit_hex_digit(digit: u64) -> u64 {
    with_vm(|vm| vm.vmf_emit_hex_digit(digit))
}

pub(crate) struct VmFunction {
    pub name: &'static str,
    pub arity: usize,
    pub address: u64,
}

pub(crate) fn vm_functions() -> Vec<VmFunction> {
    vec![
        VmFunction { name: "primitiveNew", arity: 0, address: vmf_primitive_new as extern "C" fn() -> u64 as usize as u64 },
        VmFunction { name: "printOop", arity: 1, address: vmf_print_oop as extern "C" fn(u64) -> u64 as usize as u64 },
        VmFunction { name: "createDirectory", arity: 1, address: vmf_create_directory as extern "C" fn(u64) -> u64 as usize as u64 },
        VmFunction { name: "fileWrite", arity: 2, address: vmf_file_write as extern "C" fn(u64, u64) -> u64 as usize as u64 },
        VmFunction { name: "fileRead", arity: 1, address: vmf_file_read as extern "C" fn(u64) -> u64 as usize as u64 },
        VmFunction { name: "emitHexDigit", arity: 1, address: vmf_emit_hex_digit as extern "C" fn(u64) -> u64 as usize as u64 },
    ]
}

/// Call a VM function by address through its C signature; used by the
/// interpreters so every backend runs the very same code.
///
/// # Safety
/// `address` must be one of the registered VM function entry points and
/// `args.len()` must match its arity.
pub(crate) unsafe fn call_by_address(address: u64, args: &[u64]) -> u64 {
    unsafe {
        match args.len() {
            0 => std::mem::transmute::<u64, extern "C" fn() -> u64>(address)(),
            1 => std::mem::transmute::<u64, extern "C" fn(u64) -> u64>(address)(args[0]),
            2 => std::mem::transmute::<u64, extern "C" fn(u64, u64) -> u64>(address)(
                args[0], args[1],
            ),
            n => panic!("no VM function takes {n} arguments"),
        }
    }
}
