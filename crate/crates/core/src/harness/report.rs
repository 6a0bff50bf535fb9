use std::io::{Read, Write};
use std::path::Path;

use super::BerRecord;
use crate::error::{Error, Result};

const HEADER: [&str; 10] = [
    "snr_db",
    "bits_sent",
    "bit_errors",
    "ber",
    "estimator",
    "channel",
    "qam_order",
    "seed",
    "wall_time_seconds",
    "training_converged",
];

/// Full round-trip precision; never fewer than 17 significant digits.
fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn write_csv<W: Write>(records: &[BerRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record([
            float(r.snr_db),
            r.bits_sent.to_string(),
            r.bit_errors.to_string(),
            float(r.ber),
            r.estimator.to_string(),
            r.channel.clone(),
            r.qam_order.to_string(),
            r.seed.to_string(),
            float(r.wall_time_seconds),
            r.training_converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a header and one row per record.
pub fn emit_csv(records: &[BerRecord], path: impl AsRef<Path>) -> Result<()> {
    write_csv(records, std::fs::File::create(path)?)
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = row.get(i).unwrap_or_default();
    raw.parse()
        .map_err(|_| Error::InvalidInput(format!("bad {} value '{raw}'", HEADER[i])))
}

pub fn read_csv_from<R: Read>(input: R) -> Result<Vec<BerRecord>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(HEADER) {
        return Err(Error::InvalidInput("unexpected BER CSV header".into()));
    }
    r.records()
        .map(|row| {
            let row = row?;
            Ok(BerRecord {
                snr_db: field(&row, 0)?,
                bits_sent: field(&row, 1)?,
                bit_errors: field(&row, 2)?,
                ber: field(&row, 3)?,
                estimator: field(&row, 4)?,
                channel: field(&row, 5)?,
                qam_order: field(&row, 6)?,
                seed: field(&row, 7)?,
                wall_time_seconds: field(&row, 8)?,
                training_converged: field(&row, 9)?,
            })
        })
        .collect()
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BerRecord>> {
    read_csv_from(std::fs::File::open(path)?)
}
