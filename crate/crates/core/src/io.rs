//! NDJSON and JSON helpers shared by the file formats of each module.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn write_ndjson<T: Serialize, W: Write>(mut out: W, items: impl IntoIterator<Item = T>) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_ndjson<T: DeserializeOwned, R: Read>(input: R) -> Result<Vec<T>> {
    let mut items = Vec::new();
    for (lineno, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::data(format!("line {}: {e}", lineno + 1)))?;
        items.push(item);
    }
    Ok(items)
}

pub fn write_ndjson_file<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    write_ndjson(BufWriter::new(File::create(path)?), items)
}

pub fn read_ndjson_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_ndjson(open(path)?)
}

pub fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(open(path)?))?)
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))
}
