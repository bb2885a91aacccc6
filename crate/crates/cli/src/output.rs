//! CSV and JSON writers. Floats are printed with 17 significant digits.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_roundtrip() {
        for v in [0.1, 1.0 / 3.0, 1.355201481588489, -2.5e-300, 6.02214076e23] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17, "{s}");
        }
        assert_eq!(num(f64::NAN), "NaN");
        assert_eq!(opt_num(None), "");
    }
}
