//! Deterministic float formatting for the report files: JSON numbers are
//! written with 17 significant digits, CSV plot data with 9.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;

/// serde_json formatter that renders every float with 17 significant digits
/// (scientific notation), so identical data always serializes byte-identically.
struct SigFigFormatter;

impl Formatter for SigFigFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            // JSON has no non-finite literals; null keeps the file parseable.
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serialize `value` to `path` with the fixed float format.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    let mut ser = serde_json::Serializer::with_formatter(&mut writer, SigFigFormatter);
    value
        .serialize(&mut ser)
        .map_err(std::io::Error::other)?;
    writer.write_all(b"\n")?;
    writer.flush()
}

/// CSV float field: 9 significant digits.
pub fn csv_f64(value: f64) -> String {
    format!("{value:.8e}")
}
