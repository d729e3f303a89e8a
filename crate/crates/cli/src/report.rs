use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::Failure;

fn sink(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    })
}

/// Writes `rows` as CSV with a header taken from the row type.
pub fn write_csv<R: Serialize>(out: Option<&Path>, rows: &[R]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), Failure> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

/// Progress and skipped points go to standard error so reports stay clean.
pub fn log(msg: impl AsRef<str>) {
    eprintln!("hpscan: {}", msg.as_ref());
}
