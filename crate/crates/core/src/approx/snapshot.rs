//! Parameter snapshot files.
//!
//! ```text
//! DRMDP-PARAMS v1
//! section<TAB>name<TAB>mlp 5-32-32-1 identity<TAB>count<TAB>sha256 hex
//! ...
//! end
//! <little-endian f64 data, sections in header order>
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::mlp::{Mlp, MlpArch};
use crate::error::{Error, Result};

const MAGIC: &str = "DRMDP-PARAMS v1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSnapshot {
    sections: Vec<(String, Mlp)>,
}

fn bytes_of(params: &[f64]) -> Vec<u8> {
    params.iter().flat_map(|p| p.to_le_bytes()).collect()
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ParamSnapshot {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, net: &Mlp) {
        assert!(!name.is_empty() && !name.contains(char::is_whitespace), "section names are single tokens");
        match self.sections.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = net.clone(),
            None => self.sections.push((name.to_string(), net.clone())),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Mlp> {
        self.sections.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn require(&self, name: &str) -> Result<&Mlp> {
        self.get(name).ok_or_else(|| Error::UnknownName { kind: "snapshot section", name: name.into() })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|(n, _)| n.as_str())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        let blobs: Vec<Vec<u8>> = self.sections.iter().map(|(_, m)| bytes_of(m.params())).collect();
        for ((name, net), blob) in self.sections.iter().zip(&blobs) {
            writeln!(w, "section\t{name}\t{}\t{}\t{}", net.arch().descriptor(), net.num_params(), digest(blob))?;
        }
        writeln!(w, "end")?;
        for blob in &blobs {
            w.write_all(blob)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != MAGIC {
            return Err(Error::Parse("not a parameter snapshot".into()));
        }
        let mut header = Vec::new();
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Parse("snapshot header is not terminated".into()));
            }
            let text = line.trim_end_matches('\n');
            if text == "end" {
                break;
            }
            let fields: Vec<&str> = text.split('\t').collect();
            if fields.len() != 5 || fields[0] != "section" {
                return Err(Error::Parse(format!("bad snapshot header line `{text}`")));
            }
            let arch = MlpArch::parse_descriptor(fields[2])?;
            let count: usize = fields[3].parse().map_err(|_| Error::Parse(format!("bad count `{}`", fields[3])))?;
            if count != arch.num_params() {
                return Err(Error::Parse(format!("section `{}` count does not match its architecture", fields[1])));
            }
            header.push((fields[1].to_string(), arch, count, fields[4].to_string()));
        }
        let mut sections = Vec::with_capacity(header.len());
        for (name, arch, count, sum) in header {
            let mut blob = vec![0u8; count * 8];
            r.read_exact(&mut blob)?;
            if digest(&blob) != sum {
                return Err(Error::Checksum(name));
            }
            let params = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            sections.push((name, Mlp::from_params(arch, params)?));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Parse("trailing bytes after snapshot data".into()));
        }
        Ok(Self { sections })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
