//! Semispace copying collector.
//!
//! Objects are two header words followed by the payload. Header word 0
//! packs the class id and a format bit; its low bit is the forwarding
//! mark, set only while a collection is running (the rest of the word then
//! holds the new address). Word 1 is the element count: slots for plain
//! objects, bytes for byte objects.
//!
//! `nil` is a distinguished object pinned outside both semispaces and is
//! never moved, so slot initialization is a plain word write.

use super::oop::Oop;
use thiserror::Error;

pub const HEADER_WORDS: u64 = 2;
pub const HEADER_BYTES: u64 = HEADER_WORDS * 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjFormat {
    Slots,
    Bytes,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum HeapError {
    #[error("out of memory: {requested_words} words requested, {free_words} free after collection")]
    OutOfMemory { requested_words: u64, free_words: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CollectStats {
    pub live_bytes: u64,
    pub forwarded_count: u64,
}

/// Decoded header of one heap object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectHeader {
    pub class_id: u64,
    pub format: ObjFormat,
    pub element_count: u64,
}

impl ObjectHeader {
    fn word0(&self) -> u64 {
        let format_bit = match self.format {
            ObjFormat::Slots => 0,
            ObjFormat::Bytes => 1,
        };
        (self.class_id << 2) | (format_bit << 1)
    }

    fn from_word0(word0: u64, element_count: u64) -> ObjectHeader {
        ObjectHeader {
            class_id: word0 >> 2,
            format: if word0 & 2 != 0 { ObjFormat::Bytes } else { ObjFormat::Slots },
            element_count,
        }
    }

    pub fn payload_words(&self) -> u64 {
        match self.format {
            ObjFormat::Slots => self.element_count,
            ObjFormat::Bytes => self.element_count.div_ceil(8),
        }
    }

    pub fn size_words(&self) -> u64 {
        HEADER_WORDS + self.payload_words()
    }
}

pub struct Heap {
    spaces: [Box<[u64]>; 2],
    active: usize,
    /// Allocation cursor, in words from the start of the active space.
    cursor: u64,
    space_words: u64,
    nil_storage: Box<[u64; 2]>,
    pub collections: u64,
    /// Force a collection on every allocation (the GC torture mode).
    pub torture: bool,
    collecting: bool,
}

pub const NIL_CLASS_ID: u64 = 0;

impl Heap {
    pub fn new(semispace_bytes: usize) -> Heap {
        let space_words = (semispace_bytes / 8) as u64;
        let mut nil_storage = Box::new([0u64; 2]);
        nil_storage[0] = ObjectHeader {
            class_id: NIL_CLASS_ID,
            format: ObjFormat::Slots,
            element_count: 0,
        }
        .word0();
        nil_storage[1] = 0;
        Heap {
            spaces: [
                vec![0u64; space_words as usize].into_boxed_slice(),
                vec![0u64; space_words as usize].into_boxed_slice(),
            ],
            active: 0,
            cursor: 0,
            space_words,
            nil_storage,
            collections: 0,
            torture: false,
            collecting: false,
        }
    }

    pub fn nil(&self) -> Oop {
        Oop::from_heap_address(self.nil_storage.as_ptr() as u64)
    }

    fn space_base(&self, index: usize) -> u64 {
        self.spaces[index].as_ptr() as u64
    }

    pub fn used_words(&self) -> u64 {
        self.cursor
    }

    pub fn free_words(&self) -> u64 {
        self.space_words - self.cursor
    }

    pub fn contains_active(&self, address: u64) -> bool {
        let base = self.space_base(self.active);
        address >= base && address < base + self.space_words * 8
    }

    /// Allocate without triggering a collection; `None` when full.
    fn try_allocate(&mut self, header: ObjectHeader) -> Option<Oop> {
        let size = header.size_words();
        if self.cursor + size > self.space_words {
            return None;
        }
        let base = self.space_base(self.active) + self.cursor * 8;
        self.cursor += size;
        unsafe {
            std::ptr::write(base as *mut u64, header.word0());
            std::ptr::write((base + 8) as *mut u64, header.element_count);
            let nil = self.nil().raw();
            for i in 0..header.payload_words() {
                let fill = match header.format {
                    ObjFormat::Slots => nil,
                    ObjFormat::Bytes => 0,
                };
                std::ptr::write((base + HEADER_BYTES + i * 8) as *mut u64, fill);
            }
        }
        Some(Oop::from_heap_address(base))
    }

    pub fn header_of(&self, oop: Oop) -> ObjectHeader {
        let address = oop.heap_address().expect("heap oop");
        unsafe {
            let word0 = std::ptr::read(address as *const u64);
            debug_assert_eq!(word0 & 1, 0, "forwarding mark outside collection");
            let count = std::ptr::read((address + 8) as *const u64);
            ObjectHeader::from_word0(word0, count)
        }
    }

    pub fn slot(&self, oop: Oop, index: u64) -> u64 {
        let address = oop.heap_address().expect("heap oop");
        unsafe { std::ptr::read((address + HEADER_BYTES + index * 8) as *const u64) }
    }

    pub fn set_slot(&mut self, oop: Oop, index: u64, value: u64) {
        let address = oop.heap_address().expect("heap oop");
        unsafe { std::ptr::write((address + HEADER_BYTES + index * 8) as *mut u64, value) };
    }

    pub fn bytes_of(&self, oop: Oop) -> Vec<u8> {
        let header = self.header_of(oop);
        debug_assert_eq!(header.format, ObjFormat::Bytes);
        let address = oop.heap_address().expect("heap oop") + HEADER_BYTES;
        let mut out = vec![0u8; header.element_count as usize];
        unsafe {
            std::ptr::copy_nonoverlapping(address as *const u8, out.as_mut_ptr(), out.len());
        }
        out
    }

    pub fn write_bytes(&mut self, oop: Oop, data: &[u8]) {
        let header = self.header_of(oop);
        debug_assert_eq!(header.format, ObjFormat::Bytes);
        debug_assert!(data.len() as u64 <= header.element_count);
        let address = oop.heap_address().expect("heap oop") + HEADER_BYTES;
        unsafe {
            std::ptr::copy_nonoverlapping(data.as_ptr(), address as *mut u8, data.len());
        }
    }

    /// Allocate, collecting once on exhaustion before giving up. The root
    /// visitor enumerates every root word so the collector can update it.
    pub fn allocate(
        &mut self,
        class_id: u64,
        element_count: u64,
        format: ObjFormat,
        roots: &mut dyn FnMut(&mut dyn FnMut(&mut u64)),
    ) -> Result<Oop, HeapError> {
        let header = ObjectHeader { class_id, format, element_count };
        if self.torture && !self.collecting {
            self.collect(roots);
        }
        if let Some(oop) = self.try_allocate(header) {
            return Ok(oop);
        }
        self.collect(roots);
        self.try_allocate(header).ok_or(HeapError::OutOfMemory {
            requested_words: header.size_words(),
            free_words: self.free_words(),
        })
    }

    /// Cheney two-finger copying collection. Every root word is rewritten
    /// through the visitor; interior slot words that reference the
    /// from-space are forwarded during the scan.
    pub fn collect(&mut self, roots: &mut dyn FnMut(&mut dyn FnMut(&mut u64))) -> CollectStats {
        assert!(!self.collecting, "collect is not reentrant");
        self.collecting = true;
        let from = self.active;
        let to = 1 - self.active;
        let from_base = self.space_base(from);
        let from_end = from_base + self.cursor * 8;
        let to_base = self.space_base(to);
        let mut to_cursor = 0u64; // words
        let mut forwarded = 0u64;

        let forward_word = |word: &mut u64, to_cursor: &mut u64, forwarded: &mut u64| {
            let value = *word;
            // candidate references: aligned words inside the from-space
            if value & 7 != 0 || value < from_base || value >= from_end {
                return;
            }
            unsafe {
                let word0 = std::ptr::read(value as *const u64);
                if word0 & 1 == 1 {
                    *word = word0 & !1;
                    return;
                }
                let count = std::ptr::read((value + 8) as *const u64);
                let header = ObjectHeader::from_word0(word0, count);
                let size = header.size_words();
                let new_address = to_base + *to_cursor * 8;
                std::ptr::copy_nonoverlapping(
                    value as *const u64,
                    new_address as *mut u64,
                    size as usize,
                );
                *to_cursor += size;
                *forwarded += 1;
                std::ptr::write(value as *mut u64, new_address | 1);
                *word = new_address;
            }
        };

        roots(&mut |word| forward_word(word, &mut to_cursor, &mut forwarded));

        // scan the copied objects, forwarding what their slots reference
        let mut scan = 0u64;
        while scan < to_cursor {
            let address = to_base + scan * 8;
            let header = unsafe {
                let word0 = std::ptr::read(address as *const u64);
                let count = std::ptr::read((address + 8) as *const u64);
                ObjectHeader::from_word0(word0, count)
            };
            if header.format == ObjFormat::Slots {
                for i in 0..header.element_count {
                    let slot_address = (address + HEADER_BYTES + i * 8) as *mut u64;
                    let mut word = unsafe { std::ptr::read(slot_address) };
                    forward_word(&mut word, &mut to_cursor, &mut forwarded);
                    unsafe { std::ptr::write(slot_address, word) };
                }
            }
            scan += header.size_words();
        }

        self.active = to;
        self.cursor = to_cursor;
        self.collections += 1;
        self.collecting = false;
        CollectStats { live_bytes: to_cursor * 8, forwarded_count: forwarded }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_roots(_: &mut dyn FnMut(&mut u64)) {}

    #[test]
    fn allocate_initializes_slots_to_nil() {
        let mut heap = Heap::new(64 * 1024);
        let oop = heap.allocate(7, 2, ObjFormat::Slots, &mut no_roots).unwrap();
        let header = heap.header_of(oop);
        assert_eq!(header.class_id, 7);
        assert_eq!(header.element_count, 2);
        assert_eq!(heap.slot(oop, 0), heap.nil().raw());
        assert_eq!(heap.slot(oop, 1), heap.nil().raw());
    }

    #[test]
    fn empty_heap_collect_is_empty() {
        let mut heap = Heap::new(64 * 1024);
        let stats = heap.collect(&mut no_roots);
        assert_eq!(stats, CollectStats { live_bytes: 0, forwarded_count: 0 });
    }

    #[test]
    fn unreachable_objects_do_not_survive() {
        let mut heap = Heap::new(64 * 1024);
        for _ in 0..100 {
            heap.allocate(1, 3, ObjFormat::Slots, &mut no_roots).unwrap();
        }
        let mut keep = heap.allocate(1, 3, ObjFormat::Slots, &mut no_roots).unwrap().raw();
        let stats = heap.collect(&mut |visit| visit(&mut keep));
        assert_eq!(stats.forwarded_count, 1);
        assert_eq!(stats.live_bytes, 5 * 8);
        let survivor = Oop(keep);
        assert!(heap.contains_active(survivor.raw()));
        assert_eq!(heap.header_of(survivor).class_id, 1);
    }

    #[test]
    fn graph_copied_isomorphically() {
        let mut heap = Heap::new(64 * 1024);
        let a = heap.allocate(10, 2, ObjFormat::Slots, &mut no_roots).unwrap();
        let b = heap.allocate(11, 1, ObjFormat::Slots, &mut no_roots).unwrap();
        heap.set_slot(a, 0, b.raw());
        heap.set_slot(a, 1, Oop::from_small_int(99).raw());
        heap.set_slot(b, 0, a.raw()); // cycle

        let mut root = a.raw();
        let stats = heap.collect(&mut |visit| visit(&mut root));
        assert_eq!(stats.forwarded_count, 2);
        let a2 = Oop(root);
        assert_ne!(a2.raw(), a.raw());
        let b2 = Oop(heap.slot(a2, 0));
        assert_eq!(heap.header_of(a2).class_id, 10);
        assert_eq!(heap.header_of(b2).class_id, 11);
        assert_eq!(Oop(heap.slot(a2, 1)).as_small_int(), Some(99));
        assert_eq!(heap.slot(b2, 0), a2.raw(), "cycle preserved");
    }

    #[test]
    fn nil_is_pinned_and_never_moves() {
        let mut heap = Heap::new(64 * 1024);
        let nil_before = heap.nil();
        let obj = heap.allocate(3, 1, ObjFormat::Slots, &mut no_roots).unwrap();
        let mut root = obj.raw();
        heap.collect(&mut |visit| visit(&mut root));
        assert_eq!(heap.nil(), nil_before);
        // the slot still holds nil, and nil was not forwarded
        assert_eq!(heap.slot(Oop(root), 0), nil_before.raw());
    }

    #[test]
    fn oversized_request_is_out_of_memory() {
        let mut heap = Heap::new(4096);
        let err = heap
            .allocate(1, 10_000, ObjFormat::Slots, &mut no_roots)
            .unwrap_err();
        assert!(matches!(err, HeapError::OutOfMemory { .. }));
    }

    #[test]
    fn exhaustion_collects_then_succeeds() {
        let mut heap = Heap::new(4096); // 512 words
        // fill with garbage: 100 objects of 5 words
        for _ in 0..100 {
            heap.allocate(1, 3, ObjFormat::Slots, &mut no_roots).unwrap();
        }
        assert!(heap.free_words() < 25);
        // no roots: everything is garbage, allocation succeeds after collect
        let oop = heap.allocate(2, 20, ObjFormat::Slots, &mut no_roots).unwrap();
        assert_eq!(heap.header_of(oop).element_count, 20);
        assert_eq!(heap.collections, 1);
    }

    #[test]
    fn byte_objects_not_scanned() {
        let mut heap = Heap::new(64 * 1024);
        let buf = heap.allocate(5, 24, ObjFormat::Bytes, &mut no_roots).unwrap();
        // write a word that would look like a heap pointer
        let fake = heap.space_base_for_tests();
        heap.write_bytes(buf, &fake.to_le_bytes());
        let mut root = buf.raw();
        heap.collect(&mut |visit| visit(&mut root));
        let copied = heap.bytes_of(Oop(root));
        assert_eq!(&copied[..8], &fake.to_le_bytes(), "byte payload copied verbatim");
    }

    impl Heap {
        fn space_base_for_tests(&self) -> u64 {
            self.space_base(self.active)
        }
    }

    #[test]
    fn torture_collects_on_every_allocation() {
        let mut heap = Heap::new(64 * 1024);
        heap.torture = true;
        for _ in 0..5 {
            heap.allocate(1, 1, ObjFormat::Slots, &mut no_roots).unwrap();
        }
        assert_eq!(heap.collections, 5);
    }
}
