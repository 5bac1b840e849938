//! Tagged object pointers: one machine word, low bit set for immediate
//! small integers (value in the upper 63 bits, two's complement), low bit
//! clear for 8-byte-aligned heap references.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Oop(pub u64);

pub const SMALL_INT_MIN: i64 = -(1 << 62);
pub const SMALL_INT_MAX: i64 = (1 << 62) - 1;

impl Oop {
    pub fn from_small_int(value: i64) -> Oop {
        debug_assert!((SMALL_INT_MIN..=SMALL_INT_MAX).contains(&value));
        Oop(((value as u64) << 1) | 1)
    }

    pub fn from_heap_address(address: u64) -> Oop {
        debug_assert_eq!(address & 7, 0, "heap references are 8-byte aligned");
        Oop(address)
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn is_small_int(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn is_heap(self) -> bool {
        !self.is_small_int()
    }

    pub fn as_small_int(self) -> Option<i64> {
        self.is_small_int().then(|| (self.0 as i64) >> 1)
    }

    pub fn heap_address(self) -> Option<u64> {
        self.is_heap().then_some(self.0)
    }
}

impl fmt::Display for Oop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_small_int() {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "oop:{:016x}", self.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_roundtrip() {
        for v in [0i64, 1, -1, 42, -42, SMALL_INT_MAX, SMALL_INT_MIN] {
            let oop = Oop::from_small_int(v);
            assert!(oop.is_small_int());
            assert_eq!(oop.as_small_int(), Some(v));
        }
    }

    #[test]
    fn heap_refs_untouched() {
        let oop = Oop::from_heap_address(0x10_0000);
        assert!(oop.is_heap());
        assert_eq!(oop.heap_address(), Some(0x10_0000));
        assert_eq!(oop.as_small_int(), None);
    }
}
