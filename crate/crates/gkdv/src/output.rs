//! Deterministic CSV/JSON emission.
//!
//! CSV files open with a `# schema_version=1` comment line, then a header
//! row; floats are printed with 17 significant digits ('.' decimal
//! separator), which round-trips f64 exactly. JSON uses struct field order
//! (and BTreeMap for maps), so identical inputs produce byte-identical
//! output.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// 17-significant-digit scientific form; parses back to the same bits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(
    w: &mut W,
    header: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> io::Result<()> {
    writeln!(w, "# schema_version={SCHEMA_VERSION}")?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Read back a CSV produced by [`write_csv`] (comment lines skipped).
pub fn read_csv<R: io::BufRead>(r: R) -> io::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut header = Vec::new();
    let mut rows = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if header.is_empty() {
            header = line.split(',').map(|s| s.to_string()).collect();
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse()).collect();
        rows.push(row.map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
    }
    Ok((header, rows))
}

pub fn write_json<W: Write, T: serde::Serialize>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)
}

/// Open `path` for writing, or fall back to stdout.
pub fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    #[test]
    fn csv_round_trips_within_one_ulp() {
        let rows = vec![
            vec![0.1, 2.0 / 3.0, f64::MIN_POSITIVE],
            vec![-1.5e300, 3.141592653589793, 1e-17],
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &["a", "b", "c"], rows.clone().into_iter()).unwrap();
        let (header, parsed) = read_csv(BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(header, ["a", "b", "c"]);
        for (orig, back) in rows.iter().zip(&parsed) {
            for (o, b) in orig.iter().zip(back) {
                assert_eq!(o.to_bits(), b.to_bits(), "{o} vs {b}");
            }
        }
    }

    #[test]
    fn header_only_for_empty_data() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &["z", "y"], std::iter::empty()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# schema_version=1\nz,y\n");
    }

    #[test]
    fn json_is_deterministic() {
        #[derive(serde::Serialize)]
        struct S {
            b: f64,
            a: f64,
        }
        let mut one = Vec::new();
        let mut two = Vec::new();
        write_json(&mut one, &S { b: 1.0, a: 2.0 }).unwrap();
        write_json(&mut two, &S { b: 1.0, a: 2.0 }).unwrap();
        assert_eq!(one, two);
        // struct field order is preserved
        let text = String::from_utf8(one).unwrap();
        assert!(text.find("\"b\"").unwrap() < text.find("\"a\"").unwrap());
    }
}
