//! CSV diagnostics series and binary field snapshots.
//!
//! A snapshot is one text header line
//! `VISCO2D1 n=<n> length=<L> t=<t> formulation=<name> fields=<a,b,...>`
//! followed, for each listed field, by `n²` little-endian `f64` values in
//! row-major order (`x₂` index as the row).

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::field::ScalarField;

pub const CSV_COLUMNS: [&str; 16] = [
    "t",
    "E_basic",
    "E_alt",
    "gradu_l2sq",
    "h2_u",
    "h2_V",
    "deltaU_l2sq",
    "detIpV",
    "trdet",
    "compat",
    "newid",
    "detF",
    "divFT",
    "acc_gradu_h2",
    "acc_deltaU_h1",
    "acc_divV_h1",
];

pub const SNAPSHOT_MAGIC: &str = "VISCO2D1";

/// 17 significant digits, enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), num)
}

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

pub fn csv_row(r: &DiagnosticsRecord) -> String {
    let c = &r.residuals;
    [
        num(r.t),
        num(r.e_basic),
        num(r.e_alt),
        num(r.gradu_l2sq),
        num(r.h2_u),
        num(r.h2_v),
        num(r.delta_u_l2sq),
        num(c.det_ipv),
        num(c.trdet),
        opt(c.compat),
        num(c.newid),
        opt(c.det_f),
        opt(c.div_ft),
        num(r.dissip_accum[0]),
        num(r.dissip_accum[1]),
        num(r.dissip_accum[2]),
    ]
    .join(",")
}

pub fn write_series(path: &Path, series: &[DiagnosticsRecord]) -> Result<()> {
    let mut out = String::with_capacity(256 * (series.len() + 1));
    out.push_str(&csv_header());
    out.push('\n');
    for r in series {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub length: f64,
    pub t: f64,
    pub formulation: String,
    pub fields: Vec<(String, Vec<f64>)>,
}

pub fn write_snapshot(
    path: &Path,
    t: f64,
    formulation: &str,
    fields: &[(&str, &ScalarField)],
) -> Result<()> {
    let first = fields
        .first()
        .ok_or_else(|| Error::InvalidInput("snapshot needs at least one field".into()))?;
    let grid = first.1.grid();
    let names: Vec<&str> = fields.iter().map(|(name, _)| *name).collect();
    let mut buf = format!(
        "{SNAPSHOT_MAGIC} n={} length={:?} t={:?} formulation={formulation} fields={}\n",
        grid.n(),
        grid.length(),
        t,
        names.join(",")
    )
    .into_bytes();
    for (_, f) in fields {
        for x in f.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bad = |m: String| Error::InvalidInput(format!("{}: {m}", path.display()));
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let mut words = header.split_whitespace();
    if words.next() != Some(SNAPSHOT_MAGIC) {
        return Err(bad("missing snapshot magic".into()));
    }
    let (mut n, mut length, mut t, mut formulation, mut names) = (None, None, None, None, None);
    for w in words {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| bad(format!("bad header entry '{w}'")))?;
        let real = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("bad number '{v}'")));
        match k {
            "n" => n = Some(v.parse::<usize>().map_err(|_| bad(format!("bad n '{v}'")))?),
            "length" => length = Some(real(v)?),
            "t" => t = Some(real(v)?),
            "formulation" => formulation = Some(v.to_string()),
            "fields" => names = Some(v.split(',').map(String::from).collect::<Vec<_>>()),
            _ => return Err(bad(format!("unknown header key '{k}'"))),
        }
    }
    let missing = |k: &str| bad(format!("header lacks '{k}'"));
    let n = n.ok_or_else(|| missing("n"))?;
    let names = names.ok_or_else(|| missing("fields"))?;
    let mut fields = Vec::with_capacity(names.len());
    let mut bytes = vec![0u8; 8 * n * n];
    for name in names {
        reader
            .read_exact(&mut bytes)
            .map_err(|_| bad(format!("truncated data for field '{name}'")))?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        fields.push((name, values));
    }
    Ok(Snapshot {
        n,
        length: length.ok_or_else(|| missing("length"))?,
        t: t.ok_or_else(|| missing("t"))?,
        formulation: formulation.ok_or_else(|| missing("formulation"))?,
        fields,
    })
}
