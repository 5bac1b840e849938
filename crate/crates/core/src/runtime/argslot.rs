//! The pinned argument slot: a single fixed-address block through which
//! every receiver, argument and result word crosses the VM/native
//! boundary. Generated code addresses it absolutely, and the collector
//! treats its contents as roots, so a moving collection never leaves
//! native code holding a stale reference.

/// Symbol under which the slot's base address is registered.
pub const ARG_SLOT_SYMBOL: &str = "vm_arg_slot";

pub const ARG_SLOT_CAPACITY: usize = 8;

#[repr(C)]
#[derive(Debug)]
pub struct PinnedArgSlot {
    pub receiver: u64,
    pub arg_count: u64,
    pub args: [u64; ARG_SLOT_CAPACITY],
    pub result: u64,
}

impl PinnedArgSlot {
    pub fn new() -> Box<PinnedArgSlot> {
        Box::new(PinnedArgSlot {
            receiver: 0,
            arg_count: 0,
            args: [0; ARG_SLOT_CAPACITY],
            result: 0,
        })
    }

    pub fn base_address(&self) -> u64 {
        self as *const PinnedArgSlot as u64
    }
}

/// Field offsets shared between the runtime, the emitter and the IR
/// interpreter. They mirror the `#[repr(C)]` layout above.
pub struct ArgSlotLayout;

impl ArgSlotLayout {
    pub const RECEIVER_OFFSET: u64 = 0;
    pub const ARG_COUNT_OFFSET: u64 = 8;
    pub const ARGS_OFFSET: u64 = 16;
    pub const RESULT_OFFSET: u64 = 16 + 8 * ARG_SLOT_CAPACITY as u64;

    pub fn argument_offset(index: u32) -> u64 {
        Self::ARGS_OFFSET + 8 * index as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::mem::offset_of;

    #[test]
    fn layout_constants_match_struct() {
        assert_eq!(offset_of!(PinnedArgSlot, receiver) as u64, ArgSlotLayout::RECEIVER_OFFSET);
        assert_eq!(offset_of!(PinnedArgSlot, arg_count) as u64, ArgSlotLayout::ARG_COUNT_OFFSET);
        assert_eq!(offset_of!(PinnedArgSlot, args) as u64, ArgSlotLayout::ARGS_OFFSET);
        assert_eq!(offset_of!(PinnedArgSlot, result) as u64, ArgSlotLayout::RESULT_OFFSET);
    }

    #[test]
    fn address_is_stable() {
        let slot = PinnedArgSlot::new();
        let a = slot.base_address();
        let b = slot.base_address();
        assert_eq!(a, b);
        assert_eq!(a & 7, 0);
    }
}
