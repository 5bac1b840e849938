//! Runtime symbol resolution: internal VM functions and globals first,
//! then entries parsed from an nm-style map file.

use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SymbolError {
    #[error("symbol '{0}' not found")]
    SymbolNotFound(String),
    #[error("map parse error at line {0}")]
    MapParseError(usize),
}

#[derive(Debug, Default, Clone)]
pub struct SymbolTable {
    internal: BTreeMap<String, u64>,
    mapped: BTreeMap<String, u64>,
}

impl SymbolTable {
    pub fn new() -> Self {
        SymbolTable::default()
    }

    pub fn register_internal(&mut self, name: &str, address: u64) {
        self.internal.insert(name.to_string(), address);
    }

    /// Internal registrations take precedence over map-file entries.
    pub fn resolve(&self, name: &str) -> Result<u64, SymbolError> {
        self.internal
            .get(name)
            .or_else(|| self.mapped.get(name))
            .copied()
            .ok_or_else(|| SymbolError::SymbolNotFound(name.to_string()))
    }

    pub fn try_resolve(&self, name: &str) -> Option<u64> {
        self.resolve(name).ok()
    }

    pub fn internal_names(&self) -> impl Iterator<Item = &String> {
        self.internal.keys()
    }

    /// Merge nm-style lines: `<hex-address> <type-letter> <name>`. Only
    /// the T/t/D/d type letters produce entries; anything else (including
    /// undefined `U name` lines, which carry no address) is skipped.
    /// Lines starting with `#` are comments. Returns the accepted entries.
    pub fn load_symbol_map(&mut self, text: &str) -> Result<Vec<(String, u64)>, SymbolError> {
        let mut added = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            match fields.as_slice() {
                [address, letter, name] => {
                    if letter.len() != 1 {
                        return Err(SymbolError::MapParseError(line_no));
                    }
                    let accepted = matches!(*letter, "T" | "t" | "D" | "d");
                    let value = u64::from_str_radix(address, 16)
                        .map_err(|_| SymbolError::MapParseError(line_no))?;
                    if accepted {
                        self.mapped.insert(name.to_string(), value);
                        added.push((name.to_string(), value));
                    }
                }
                // nm prints undefined symbols without an address
                [letter, _name] if letter.len() == 1 && !matches!(*letter, "T" | "t" | "D" | "d") => {}
                _ => return Err(SymbolError::MapParseError(line_no)),
            }
        }
        Ok(added)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_entry_parsed() {
        let mut table = SymbolTable::new();
        let added = table.load_symbol_map("0000000000401120 T printOop\n").unwrap();
        assert_eq!(added, vec![("printOop".to_string(), 0x401120)]);
        assert_eq!(table.resolve("printOop").unwrap(), 0x401120);
    }

    #[test]
    fn undefined_lines_skipped() {
        let mut table = SymbolTable::new();
        let added = table.load_symbol_map("U externref\n").unwrap();
        assert!(added.is_empty());
        assert!(matches!(
            table.resolve("externref"),
            Err(SymbolError::SymbolNotFound(_))
        ));
    }

    #[test]
    fn bad_address_reports_line() {
        let mut table = SymbolTable::new();
        let err = table.load_symbol_map("# comment\nzzzz T broken\n").unwrap_err();
        assert_eq!(err, SymbolError::MapParseError(2));
    }

    #[test]
    fn internal_precedence() {
        let mut table = SymbolTable::new();
        table.load_symbol_map("10 T fn\n").unwrap();
        table.register_internal("fn", 0x9000);
        assert_eq!(table.resolve("fn").unwrap(), 0x9000);
    }

    #[test]
    fn other_type_letters_skipped() {
        let mut table = SymbolTable::new();
        let added = table.load_symbol_map("00ff B bssThing\n00aa T kept\n").unwrap();
        assert_eq!(added.len(), 1);
        assert!(table.resolve("bssThing").is_err());
        assert_eq!(table.resolve("kept").unwrap(), 0xaa);
    }
}
