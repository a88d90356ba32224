use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Attribute, Dataset, Domain};
use crate::error::{Error, Result};

/// Reserved column holding integer household ids.
pub const HOUSEHOLD_COLUMN: &str = "__household__";
/// Reserved column holding 0/1 membership labels.
pub const MEMBER_COLUMN: &str = "__member__";

pub fn load_csv(path: impl AsRef<Path>, schema: Option<&Domain>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

fn parse_member(s: &str) -> Option<bool> {
    match s.trim() {
        "1" | "true" | "True" | "TRUE" => Some(true),
        "0" | "false" | "False" | "FALSE" => Some(false),
        _ => None,
    }
}

/// Reads a headed CSV. Without a schema, categories are numbered in order
/// of first appearance within each column.
pub fn read_csv<R: Read>(reader: R, schema: Option<&Domain>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();

    let mut household_col = None;
    let mut member_col = None;
    let mut attr_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        match h {
            HOUSEHOLD_COLUMN => household_col = Some(i),
            MEMBER_COLUMN => member_col = Some(i),
            _ => attr_cols.push((i, h.to_string())),
        }
    }

    // Position of each CSV attribute column in the domain.
    let targets: Vec<usize> = match schema {
        Some(dom) => {
            if dom.len() != attr_cols.len() {
                return Err(Error::Schema(format!(
                    "file has {} attribute columns, schema has {}",
                    attr_cols.len(),
                    dom.len()
                )));
            }
            attr_cols
                .iter()
                .map(|(_, name)| {
                    dom.index_of(name).ok_or_else(|| {
                        Error::Schema(format!("column `{name}` is not in the schema"))
                    })
                })
                .collect::<Result<_>>()?
        }
        None => (0..attr_cols.len()).collect(),
    };

    let mut lookups: Vec<HashMap<String, u32>> = match schema {
        Some(dom) => dom
            .attributes()
            .iter()
            .map(|a| {
                a.categories
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.clone(), i as u32))
                    .collect()
            })
            .collect(),
        None => vec![HashMap::new(); attr_cols.len()],
    };
    let mut inferred: Vec<Vec<String>> = vec![Vec::new(); attr_cols.len()];

    let mut columns = vec![Vec::new(); attr_cols.len()];
    let mut households = Vec::new();
    let mut members = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        for ((src, name), &dst) in attr_cols.iter().zip(&targets) {
            let raw = &rec[*src];
            let code = match lookups[dst].get(raw) {
                Some(&c) => c,
                None if schema.is_some() => {
                    return Err(Error::Schema(format!(
                        "unknown category `{raw}` in column `{name}` (data row {})",
                        line + 1
                    )))
                }
                None => {
                    let c = inferred[dst].len() as u32;
                    inferred[dst].push(raw.to_string());
                    lookups[dst].insert(raw.to_string(), c);
                    c
                }
            };
            columns[dst].push(code);
        }
        if let Some(i) = household_col {
            let id = rec[i].trim().parse::<u64>().map_err(|_| {
                Error::Parse(format!("bad household id `{}` (data row {})", &rec[i], line + 1))
            })?;
            households.push(id);
        }
        if let Some(i) = member_col {
            members.push(parse_member(&rec[i]).ok_or_else(|| {
                Error::Parse(format!("bad membership label `{}` (data row {})", &rec[i], line + 1))
            })?);
        }
    }

    let domain = match schema {
        Some(dom) => dom.clone(),
        None => Domain::new(
            attr_cols
                .into_iter()
                .zip(inferred)
                .map(|((_, name), categories)| Attribute { name, categories })
                .collect(),
        )?,
    };
    let mut ds = Dataset::from_columns(domain, columns)?;
    if household_col.is_some() {
        ds = ds.with_households(households)?;
    }
    if member_col.is_some() {
        ds = ds.with_membership(members)?;
    }
    Ok(ds)
}

pub fn write_csv(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(file, ds).map_err(|e| match e {
        Error::Parse(m) => Error::io(path, std::io::Error::other(m)),
        other => other,
    })
}

pub(crate) fn write_csv_to<W: Write>(w: W, ds: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    let mut header: Vec<&str> = ds
        .domain()
        .attributes()
        .iter()
        .map(|a| a.name.as_str())
        .collect();
    if ds.households().is_some() {
        header.push(HOUSEHOLD_COLUMN);
    }
    if ds.membership().is_some() {
        header.push(MEMBER_COLUMN);
    }
    wtr.write_record(&header).map_err(err)?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for row in 0..ds.n_rows() {
        fields.clear();
        for a in 0..ds.n_attrs() {
            let v = ds.value(row, a);
            fields.push(ds.domain().decode(a, v).unwrap_or_default().to_string());
        }
        if let Some(h) = ds.households() {
            fields.push(h[row].to_string());
        }
        if let Some(m) = ds.membership() {
            fields.push(if m[row] { "1" } else { "0" }.to_string());
        }
        wtr.write_record(&fields).map_err(err)?;
    }
    wtr.flush()
        .map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}
