//! On-disk layout: `<root>/pages/<encoded name>/` holds `page.json` plus
//! `rev-<n>.xml` and `rev-<n>.json` for every revision. Page names encode
//! `/` as `~`; identifiers never contain `~`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PageKind, Revision, RevisionMeta};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageMeta {
    pub name: String,
    pub kind: PageKind,
    pub created_seq: u64,
    pub saved_seq: u64,
}

#[derive(Debug, Clone)]
pub struct StoredPage {
    pub meta: PageMeta,
    pub revisions: Vec<Revision>,
}

#[derive(Debug, Clone)]
pub struct Storage {
    root: PathBuf,
}

fn encode(name: &str) -> String {
    name.replace('/', "~")
}

fn invalid(path: &Path, e: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))
}

impl Storage {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("pages"))?;
        Ok(Storage { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn page_dir(&self, name: &str) -> PathBuf {
        self.root.join("pages").join(encode(name))
    }

    pub fn write_revision(&self, name: &str, rev: &Revision) -> io::Result<()> {
        let dir = self.page_dir(name);
        fs::create_dir_all(&dir)?;
        let id = rev.meta.id;
        fs::write(dir.join(format!("rev-{id}.xml")), &rev.source)?;
        let meta = serde_json::to_vec_pretty(&rev.meta).map_err(io::Error::other)?;
        fs::write(dir.join(format!("rev-{id}.json")), meta)
    }

    pub fn write_page_meta(&self, meta: &PageMeta) -> io::Result<()> {
        let dir = self.page_dir(&meta.name);
        fs::create_dir_all(&dir)?;
        let bytes = serde_json::to_vec_pretty(meta).map_err(io::Error::other)?;
        fs::write(dir.join("page.json"), bytes)
    }

    /// Every stored page with its revisions in id order.
    pub fn load(&self) -> io::Result<Vec<StoredPage>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("pages"))? {
            let dir = entry?.path();
            if !dir.is_dir() {
                continue;
            }
            let meta_path = dir.join("page.json");
            let meta: PageMeta =
                serde_json::from_slice(&fs::read(&meta_path)?).map_err(|e| invalid(&meta_path, e))?;
            let mut revisions = Vec::new();
            for id in 1.. {
                let xml = dir.join(format!("rev-{id}.xml"));
                if !xml.exists() {
                    break;
                }
                let json = dir.join(format!("rev-{id}.json"));
                let rev_meta: RevisionMeta =
                    serde_json::from_slice(&fs::read(&json)?).map_err(|e| invalid(&json, e))?;
                if rev_meta.id != id {
                    return Err(invalid(&json, format!("revision id {} in file for {id}", rev_meta.id)));
                }
                revisions.push(Revision {
                    meta: rev_meta,
                    source: fs::read_to_string(&xml)?,
                });
            }
            if revisions.is_empty() {
                return Err(invalid(&dir, "page without revisions"));
            }
            out.push(StoredPage { meta, revisions });
        }
        out.sort_by_key(|p| p.meta.created_seq);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn revision_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let storage = Storage::open(dir.path()).unwrap();
        let meta = PageMeta {
            name: "t/a".into(),
            kind: PageKind::StatementPage,
            created_seq: 3,
            saved_seq: 4,
        };
        let rev = Revision {
            meta: RevisionMeta {
                id: 1,
                parent: None,
                author: "ann".into(),
                timestamp: chrono::DateTime::from_timestamp(0, 0).unwrap(),
                deleted: false,
            },
            source: "<omdoc/>".into(),
        };
        storage.write_page_meta(&meta).unwrap();
        storage.write_revision("t/a", &rev).unwrap();
        assert!(dir.path().join("pages/t~a/rev-1.xml").exists());
        let loaded = storage.load().unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].meta, meta);
        assert_eq!(loaded[0].revisions, vec![rev]);
    }
}
