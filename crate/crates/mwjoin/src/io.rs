// SPDX-License-Identifier: Apache-2.0

//! On-disk formats: relation and aggregate CSVs, and the output sink.
//!
//! A relation file has a header naming the two column roles (`A,B`) and one
//! `u32,u32` row per tuple. An aggregate file has the header
//! `a_value,count` and rows sorted by `a_value`.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use mwjoin_core::oracle::JoinAggregate;
use mwjoin_core::{Relation, Role, Tuple};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const AGGREGATE_HEADER: [&str; 2] = ["a_value", "count"];

/// Largest relation the default `--verify` will hand to the oracle, in
/// total tuples over R, S and T.
pub const DEFAULT_ORACLE_LIMIT: u64 = 100_000;

pub fn write_relation<W: Write>(rel: &Relation, w: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([rel.columns[0].to_string(), rel.columns[1].to_string()])?;
    for t in &rel.tuples {
        wtr.write_record([t.key1.to_string(), t.key2.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_relation_from<R: Read>(name: &str, r: R) -> Result<Relation, String> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers().map_err(|e| e.to_string())?;
    if header.len() != 2 {
        return Err(format!("expected two header columns, found {}", header.len()));
    }
    let role = |i: usize| header[i].parse::<Role>().map_err(|e| e.to_string());
    let columns = [role(0)?, role(1)?];
    if columns[0] == columns[1] {
        return Err(format!("duplicate column role {}", columns[0]));
    }
    let mut tuples = Vec::new();
    for rec in rdr.deserialize::<(u32, u32)>() {
        let (key1, key2) = rec.map_err(|e| e.to_string())?;
        tuples.push(Tuple { key1, key2 });
    }
    Ok(Relation::new(name, columns, tuples))
}

/// Reads a relation file; the relation is named after the file stem.
pub fn read_relation(path: &Path) -> Result<Relation> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_relation_from(&name, io::BufReader::new(file))
        .map_err(|msg| CliError::io(path, io::Error::new(io::ErrorKind::InvalidData, msg)))
}

pub fn write_aggregate<W: Write>(agg: &JoinAggregate, w: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(AGGREGATE_HEADER)?;
    for (a, count) in agg.iter() {
        wtr.write_record([a.to_string(), count.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_aggregate_from<R: Read>(r: R) -> csv::Result<JoinAggregate> {
    let mut agg = JoinAggregate::new();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    for rec in rdr.deserialize::<(u32, u64)>() {
        let (a, count) = rec?;
        agg.add(a, count);
    }
    Ok(agg)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A CSV table with a fixed column list, so an empty table still has a header.
pub trait Table: Serialize {
    const COLUMNS: &'static [&'static str];
}

/// Writes `# <comment>` lines, the header and one row per item.
pub fn write_table<T: Table, W: Write>(mut w: W, comment: &str, rows: &[T]) -> csv::Result<()> {
    for line in comment.lines() {
        writeln!(w, "# {line}")?;
    }
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(T::COLUMNS)?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Where a command writes its primary output.
pub struct Sink {
    path: Option<PathBuf>,
}

impl Sink {
    pub fn new(path: Option<PathBuf>) -> Self {
        Sink { path }
    }

    pub fn label(&self) -> PathBuf {
        self.path.clone().unwrap_or_else(|| PathBuf::from("<stdout>"))
    }

    pub fn open(&self) -> Result<Box<dyn Write>> {
        match &self.path {
            Some(p) => {
                let f = File::create(p).map_err(|e| CliError::io(p, e))?;
                Ok(Box::new(BufWriter::new(f)))
            }
            None => Ok(Box::new(io::stdout().lock())),
        }
    }

    pub fn write_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut w = self.open()?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::json(self.label(), e))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(self.label(), e))
    }

    pub fn write_table<T: Table>(&self, comment: &str, rows: &[T]) -> Result<()> {
        write_table(self.open()?, comment, rows).map_err(|e| CliError::csv(self.label(), e))
    }
}
