//! Frame layout: every virtual register gets its own rbp-relative slot
//! (register allocation is deliberately naive), and the source-variable
//! scope tree is mirrored so block-level reads resolve through a parent
//! chain exactly like nested contexts.

use crate::ir::IrFunction;
use std::collections::BTreeMap;

pub const WORD_BYTES: i32 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameScope {
    pub parent: Option<usize>,
    /// Source variable -> frame slot (word index).
    pub slots: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameContext {
    pub function: String,
    /// One slot per virtual register; slot i lives at `[rbp - 8*(i+1)]`.
    pub vreg_slots: u32,
    /// Scope chain mirroring the function's lexical structure; scope 0 is
    /// the method scope.
    pub scopes: Vec<FrameScope>,
    pub frame_words: u32,
}

impl FrameContext {
    pub fn frame_bytes(&self) -> i32 {
        // keep rsp adjustment a multiple of 16
        let bytes = self.frame_words as i32 * WORD_BYTES;
        (bytes + 15) & !15
    }

    pub fn slot_disp(&self, vreg: u32) -> i32 {
        debug_assert!(vreg < self.vreg_slots);
        -WORD_BYTES * (vreg as i32 + 1)
    }

    /// Resolve a variable from `scope`, walking parents; returns the frame
    /// offset and the number of hops taken.
    pub fn access_path(&self, scope: usize, name: &str) -> Option<(i32, usize)> {
        let mut hops = 0;
        let mut current = Some(scope);
        while let Some(idx) = current {
            if let Some(&slot) = self.scopes[idx].slots.get(name) {
                return Some((self.slot_disp(slot), hops));
            }
            current = self.scopes[idx].parent;
            hops += 1;
        }
        None
    }
}

pub fn layout_frames(f: &IrFunction) -> FrameContext {
    let scopes = f
        .scopes
        .scopes
        .iter()
        .map(|scope| FrameScope {
            parent: scope.parent,
            slots: scope.vars.iter().map(|(name, vreg)| (name.clone(), *vreg)).collect(),
        })
        .collect();
    FrameContext {
        function: f.name.clone(),
        vreg_slots: f.vreg_count,
        scopes,
        frame_words: f.vreg_count,
    }
}
