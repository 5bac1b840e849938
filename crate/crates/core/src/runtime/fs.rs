//! Filesystem seam for the file plugin. The host operations sit behind one
//! trait so tests and the behavioral-parity corpus run against a
//! deterministic in-memory tree; benchmarking against the real OS is the
//! opt-in mode.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::{Path, PathBuf};

pub trait SlangFs {
    fn create_dir(&mut self, path: &str) -> io::Result<()>;
    fn write(&mut self, path: &str, data: &[u8]) -> io::Result<()>;
    fn read(&self, path: &str) -> io::Result<Vec<u8>>;
}

/// In-memory tree with mkdir semantics: the parent must exist, repeats
/// fail with `AlreadyExists`.
#[derive(Debug, Default)]
pub struct InMemoryFs {
    dirs: BTreeSet<String>,
    files: BTreeMap<String, Vec<u8>>,
}

impl InMemoryFs {
    pub fn new() -> Self {
        InMemoryFs::default()
    }

    pub fn dir_count(&self) -> usize {
        self.dirs.len()
    }

    fn normalize(path: &str) -> String {
        let trimmed = path.trim_end_matches('/');
        if trimmed.is_empty() { "/".to_string() } else { trimmed.to_string() }
    }

    fn parent_exists(&self, path: &str) -> bool {
        match path.rsplit_once('/') {
            None => true,
            Some(("", _)) => true, // direct child of the root
            Some((parent, _)) => self.dirs.contains(parent),
        }
    }
}

impl SlangFs for InMemoryFs {
    fn create_dir(&mut self, path: &str) -> io::Result<()> {
        let path = Self::normalize(path);
        if path == "/" || self.dirs.contains(&path) || self.files.contains_key(&path) {
            return Err(io::Error::new(io::ErrorKind::AlreadyExists, path));
        }
        if !self.parent_exists(&path) {
            return Err(io::Error::new(io::ErrorKind::NotFound, path));
        }
        self.dirs.insert(path);
        Ok(())
    }

    fn write(&mut self, path: &str, data: &[u8]) -> io::Result<()> {
        let path = Self::normalize(path);
        if !self.parent_exists(&path) {
            return Err(io::Error::new(io::ErrorKind::NotFound, path));
        }
        if self.dirs.contains(&path) {
            return Err(io::Error::new(io::ErrorKind::AlreadyExists, path));
        }
        self.files.insert(path, data.to_vec());
        Ok(())
    }

    fn read(&self, path: &str) -> io::Result<Vec<u8>> {
        let path = Self::normalize(path);
        self.files
            .get(&path)
            .cloned()
            .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, path))
    }
}

/// Host filesystem rooted under a directory; paths from the VM are
/// interpreted relative to it.
#[derive(Debug)]
pub struct HostFs {
    root: PathBuf,
}

impl HostFs {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        HostFs { root: root.into() }
    }

    fn resolve(&self, path: &str) -> PathBuf {
        self.root.join(Path::new(path.trim_start_matches('/')))
    }
}

impl SlangFs for HostFs {
    fn create_dir(&mut self, path: &str) -> io::Result<()> {
        std::fs::create_dir(self.resolve(path))
    }

    fn write(&mut self, path: &str, data: &[u8]) -> io::Result<()> {
        std::fs::write(self.resolve(path), data)
    }

    fn read(&self, path: &str) -> io::Result<Vec<u8>> {
        std::fs::read(self.resolve(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mkdir_semantics() {
        let mut fs = InMemoryFs::new();
        fs.create_dir("/a").unwrap();
        fs.create_dir("/a/b").unwrap();
        assert_eq!(
            fs.create_dir("/a/b").unwrap_err().kind(),
            io::ErrorKind::AlreadyExists
        );
        assert_eq!(
            fs.create_dir("/missing/child").unwrap_err().kind(),
            io::ErrorKind::NotFound
        );
        assert_eq!(fs.dir_count(), 2);
    }

    #[test]
    fn file_roundtrip() {
        let mut fs = InMemoryFs::new();
        fs.create_dir("/d").unwrap();
        fs.write("/d/f.txt", b"hello").unwrap();
        assert_eq!(fs.read("/d/f.txt").unwrap(), b"hello");
        assert_eq!(fs.read("/d/g.txt").unwrap_err().kind(), io::ErrorKind::NotFound);
    }
}
