//! The fixed CSV schema shared by every directive.

use std::io::Write;

use auctionlab_core::rational::{fmt_rational, to_f64};
use auctionlab_core::Rational;
use serde::Serialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// One CSV row. Columns that do not apply to a directive stay empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Row {
    pub schema_version: u32,
    pub directive: String,
    pub instance: String,
    pub mechanism: String,
    pub n: usize,
    pub m: usize,
    pub opt: String,
    pub welfare_min: String,
    pub welfare_max: String,
    pub revenue: String,
    pub equilibria: Option<usize>,
    pub profiles: Option<u128>,
    pub poa: String,
    pub poa_decimal: Option<f64>,
    pub pos: String,
    pub pos_decimal: Option<f64>,
    pub family: String,
    pub lambda: String,
    pub mu: String,
    pub margin: String,
    pub margin_decimal: Option<f64>,
    pub exhaustive: Option<bool>,
    pub passed: bool,
}

impl Row {
    pub fn new(directive: &str, instance: &str, mechanism: &str, n: usize, m: usize) -> Self {
        Row {
            schema_version: SCHEMA_VERSION,
            directive: directive.into(),
            instance: instance.into(),
            mechanism: mechanism.into(),
            n,
            m,
            passed: true,
            ..Row::default()
        }
    }
}

pub fn exact(r: Option<Rational>) -> String {
    r.map(|x| fmt_rational(&x)).unwrap_or_default()
}

pub fn decimal(r: Option<Rational>) -> Option<f64> {
    r.map(|x| to_f64(&x))
}

pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}
