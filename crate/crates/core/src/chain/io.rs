//! Chain CSV files: a header `x1,...,xd[,g1,...,gd]` and one row per state.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::ChainOutput;
use crate::error::{Error, Result};

fn parse_header(header: &csv::StringRecord) -> Result<(usize, bool)> {
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let d = names.iter().take_while(|n| n.starts_with('x')).count();
    if d == 0 {
        return Err(Error::InvalidInput("chain CSV header must start with x1".into()));
    }
    let has_grads = match names.len() {
        n if n == d => false,
        n if n == 2 * d => true,
        n => {
            return Err(Error::InvalidInput(format!(
                "chain CSV header has {n} columns for {d} coordinates"
            )))
        }
    };
    for (i, name) in names.iter().enumerate() {
        let expected = if i < d {
            format!("x{}", i + 1)
        } else {
            format!("g{}", i - d + 1)
        };
        if *name != expected {
            return Err(Error::InvalidInput(format!(
                "chain CSV column {} is '{name}', expected '{expected}'",
                i + 1
            )));
        }
    }
    Ok((d, has_grads))
}

pub fn read_chain<R: Read>(reader: R) -> Result<ChainOutput> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let (d, has_grads) = parse_header(rdr.headers()?)?;
    let mut states = Vec::new();
    let mut grads = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut vals = Vec::with_capacity(rec.len());
        for field in rec.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::InvalidInput(format!("row {}: cannot parse '{field}' as a number", row + 1))
            })?;
            vals.push(v);
        }
        states.push(vals[..d].to_vec());
        if has_grads {
            grads.push(vals[d..].to_vec());
        }
    }
    ChainOutput::from_rows(&states, has_grads.then_some(grads.as_slice()))
}

pub fn read_chain_file(path: impl AsRef<Path>) -> Result<ChainOutput> {
    read_chain(File::open(path)?)
}

/// Writes the chain, including gradient columns when present. Values use
/// the shortest representation that parses back to the same `f64`.
pub fn write_chain<W: Write>(writer: W, chain: &ChainOutput) -> Result<()> {
    let d = chain.dim();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    if chain.has_grads() {
        header.extend((1..=d).map(|i| format!("g{i}")));
    }
    w.write_record(&header)?;
    for i in 0..chain.len() {
        let mut row: Vec<String> = chain.state(i).iter().map(|v| v.to_string()).collect();
        if let Some(g) = chain.grad(i) {
            row.extend(g.iter().map(|v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_chain_file(path: impl AsRef<Path>, chain: &ChainOutput) -> Result<()> {
    write_chain(File::create(path)?, chain)
}
