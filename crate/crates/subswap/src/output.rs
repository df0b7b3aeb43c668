//! CSV emission with a frozen column set and a schema comment line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const BOUNDS_COLUMNS: [&str; 8] = [
    "array",
    "snr_db",
    "event",
    "model",
    "compressed",
    "probability",
    "mc_probability",
    "mc_std",
];

pub const MSE_COLUMNS: [&str; 8] = [
    "array",
    "snr_db",
    "mse",
    "crb",
    "sigma_t",
    "pss_bound",
    "trials",
    "swap_frequency",
];

pub const ESTIMATE_COLUMNS: [&str; 5] = ["array", "snr_db", "trial", "theta1_hat", "theta2_hat"];

/// Shortest decimal that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes `# subswap <kind> schema_version=N`, the header, then `rows`.
pub fn write_csv(path: &Path, kind: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# subswap {kind} schema_version={CSV_SCHEMA_VERSION}")?;
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(columns)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`], checking the header.
pub fn read_csv(path: &Path, columns: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let header = r.headers()?.clone();
    anyhow::ensure!(
        header.iter().eq(columns.iter().copied()),
        "{} has unexpected columns",
        path.display()
    );
    r.records()
        .map(|rec| rec.map_err(Into::into))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, -2.5, 0.1, 1e-300, 5.08980e-1, 6.40605e-19, 123456.789, 3.0e20, f64::MIN_POSITIVE] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(1e-300), "1e-300");
    }

    proptest::proptest! {
        #[test]
        fn any_finite_number_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            proptest::prop_assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_csv(&p, "test", &["a", "b"], &[vec!["1".into(), "".into()]]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# subswap test schema_version=1\na,b\n"));
        let rows = read_csv(&p, &["a", "b"]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(read_csv(&p, &["a", "c"]).is_err());
    }
}
