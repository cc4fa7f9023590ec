//! Append-only JSON-lines journal, one file per entity family.
//!
//! Every change appends the full new state of the entity; replay keeps the
//! last line per key. A snapshot rewrites each file with only current state.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Users,
    Devices,
    Profiles,
    Prescriptions,
    Proposals,
    Records,
    Tokens,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Users,
        Family::Devices,
        Family::Profiles,
        Family::Prescriptions,
        Family::Proposals,
        Family::Records,
        Family::Tokens,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Family::Users => "users.jsonl",
            Family::Devices => "devices.jsonl",
            Family::Profiles => "profiles.jsonl",
            Family::Prescriptions => "prescriptions.jsonl",
            Family::Proposals => "proposals.jsonl",
            Family::Records => "records.jsonl",
            Family::Tokens => "tokens.jsonl",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Journal {
    dir: PathBuf,
}

impl Journal {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, family: Family) -> PathBuf {
        self.dir.join(family.file_name())
    }

    pub fn append<T: Serialize>(&self, family: Family, record: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let mut file = OpenOptions::new().create(true).append(true).open(self.path(family))?;
        file.write_all(&line)?;
        file.sync_data()
    }

    /// Every line of the family in append order; missing file = empty.
    pub fn read_all<T: DeserializeOwned>(&self, family: Family) -> io::Result<Vec<T>> {
        let path = self.path(family);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let reader = BufReader::new(File::open(&path)?);
        let mut out = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(&line).map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), n + 1))
            })?;
            out.push(record);
        }
        Ok(out)
    }

    /// Atomically replaces the family with `records`.
    pub fn rewrite<T: Serialize>(&self, family: Family, records: &[T]) -> io::Result<()> {
        let tmp = self.dir.join(format!("{}.tmp", family.file_name()));
        {
            let mut file = File::create(&tmp)?;
            for r in records {
                serde_json::to_writer(&mut file, r)?;
                file.write_all(b"\n")?;
            }
            file.sync_all()?;
        }
        fs::rename(tmp, self.path(family))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_then_read_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let j = Journal::open(dir.path()).unwrap();
        assert!(j.read_all::<u32>(Family::Records).unwrap().is_empty());
        for i in 0..5u32 {
            j.append(Family::Records, &i).unwrap();
        }
        assert_eq!(j.read_all::<u32>(Family::Records).unwrap(), vec![0, 1, 2, 3, 4]);
        j.rewrite(Family::Records, &[9u32]).unwrap();
        assert_eq!(j.read_all::<u32>(Family::Records).unwrap(), vec![9]);
    }

    #[test]
    fn corrupt_line_is_reported_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let j = Journal::open(dir.path()).unwrap();
        fs::write(dir.path().join("users.jsonl"), "1\nnot json\n").unwrap();
        let err = j.read_all::<u32>(Family::Users).unwrap_err();
        assert!(err.to_string().contains("users.jsonl:2"));
    }
}
