use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

fn sink(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

/// Writes `rows` as CSV (header from the field names) or as a JSON array.
pub fn write_rows<T: Serialize>(rows: &[T], out: Option<&Path>, format: Format) -> Result<(), String> {
    let mut w = sink(out).map_err(|e| e.to_string())?;
    match format {
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            for r in rows {
                csv.serialize(r).map_err(|e| e.to_string())?;
            }
            csv.flush().map_err(|e| e.to_string())
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, rows).map_err(|e| e.to_string())?;
            writeln!(w).and_then(|_| w.flush()).map_err(|e| e.to_string())
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), String> {
    let mut w = sink(out).map_err(|e| e.to_string())?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| e.to_string())?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| e.to_string())
}
