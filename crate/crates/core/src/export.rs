//! Deterministic JSON: every float is written with 17 significant digits so
//! artifacts round-trip exactly and compare byte-for-byte.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

/// Version tag carried by every top-level artifact.
pub const SCHEMA: &str = "cusp-atlas/v1";

#[derive(Debug, Clone, Copy, Default)]
pub struct SigDigitsFormatter;

impl Formatter for SigDigitsFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{}", format_f64(value))
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// `value` in scientific notation with 17 significant digits; `-0` is written as `0`.
pub fn format_f64(value: f64) -> String {
    let v = if value == 0.0 { 0.0 } else { value };
    format!("{v:.16e}")
}

pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, SigDigitsFormatter);
    value.serialize(&mut ser)?;
    Ok(out)
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    // the formatter only emits ASCII
    Ok(String::from_utf8(to_json_bytes(value)?).expect("JSON output is UTF-8"))
}
