//! Quantized sample files.
//!
//! CSV: one code per line, `#` comments and blank lines ignored.
//! Binary: 16-byte header (`QRNS`, bit depth `u32` LE, count `u64` LE)
//! followed by `count` little-endian `u16` codes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"QRNS";
pub const HEADER_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleSet {
    /// Bit depth; `None` for CSV input, which does not record it.
    pub n_bits: Option<u32>,
    pub codes: Vec<u16>,
}

fn check_code(code: u16, n_bits: u32) -> bool {
    n_bits >= 16 || (code as u32) < (1u32 << n_bits)
}

pub fn write_csv<W: Write>(codes: &[u16], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for c in codes {
        writeln!(out, "{c}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R, source_name: &str) -> Result<SampleSet> {
    let mut codes = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let code = t.parse::<u16>().map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: i + 1,
            message: format!("`{t}` is not a sample code: {e}"),
        })?;
        codes.push(code);
    }
    Ok(SampleSet { n_bits: None, codes })
}

pub fn write_binary<W: Write>(codes: &[u16], n_bits: u32, out: W) -> Result<()> {
    if !(1..=16).contains(&n_bits) {
        return Err(Error::invalid("n_bits", "must lie in 1..=16"));
    }
    if let Some(bad) = codes.iter().position(|&c| !check_code(c, n_bits)) {
        return Err(Error::InvalidInput(format!(
            "sample {bad} = {} does not fit in {n_bits} bits",
            codes[bad]
        )));
    }
    let mut out = BufWriter::new(out);
    out.write_all(&MAGIC)?;
    out.write_all(&n_bits.to_le_bytes())?;
    out.write_all(&(codes.len() as u64).to_le_bytes())?;
    for c in codes {
        out.write_all(&c.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Parse errors report the 1-based record number as the line.
pub fn read_binary<R: Read>(mut input: R, source_name: &str) -> Result<SampleSet> {
    let err = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut header = [0u8; HEADER_LEN];
    input
        .read_exact(&mut header)
        .map_err(|_| err(0, "truncated header".into()))?;
    if header[..4] != MAGIC {
        return Err(err(0, "bad magic, not a sample file".into()));
    }
    let n_bits = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if !(1..=16).contains(&n_bits) {
        return Err(err(0, format!("bit depth {n_bits} outside 1..=16")));
    }
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() as u64 != count.saturating_mul(2) {
        return Err(err(
            (body.len() / 2 + 1).min(count as usize),
            format!("header announces {count} samples, body holds {} bytes", body.len()),
        ));
    }
    let mut codes = Vec::with_capacity(count as usize);
    for (i, c) in body.chunks_exact(2).enumerate() {
        let code = u16::from_le_bytes([c[0], c[1]]);
        if !check_code(code, n_bits) {
            return Err(err(i + 1, format!("code {code} does not fit in {n_bits} bits")));
        }
        codes.push(code);
    }
    Ok(SampleSet {
        n_bits: Some(n_bits),
        codes,
    })
}

/// Reads either format, choosing by the magic bytes.
pub fn read_samples(path: &Path) -> Result<SampleSet> {
    let name = path.display().to_string();
    let mut f = BufReader::new(File::open(path)?);
    let is_binary = f.fill_buf()?.starts_with(&MAGIC);
    if is_binary {
        read_binary(f, &name)
    } else {
        read_csv(f, &name)
    }
}

/// Checks every code against a bit depth.
pub fn validate_codes(set: &SampleSet, n_bits: u32, source_name: &str) -> Result<()> {
    if let Some(n) = set.n_bits {
        if n != n_bits {
            return Err(Error::Parse {
                source_name: source_name.to_string(),
                line: 0,
                message: format!("file holds {n}-bit samples, the ADC is configured for {n_bits}"),
            });
        }
    }
    if let Some(i) = set.codes.iter().position(|&c| !check_code(c, n_bits)) {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            line: i + 1,
            message: format!("code {} does not fit in {n_bits} bits", set.codes[i]),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_round_trip_and_errors() {
        let mut buf = Vec::new();
        write_csv(&[0, 5, 255], &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), "s.csv").unwrap();
        assert_eq!(back.codes, vec![0, 5, 255]);
        let bad = "# header\n1\n2\nthree\n";
        match read_csv(bad.as_bytes(), "s.csv") {
            Err(Error::Parse { line, source_name, .. }) => {
                assert_eq!(line, 4);
                assert_eq!(source_name, "s.csv");
            }
            other => panic!("{other:?}"),
        }
        assert!(read_csv("-1\n".as_bytes(), "s.csv").is_err());
    }

    #[test]
    fn binary_layout() {
        let mut buf = Vec::new();
        write_binary(&[1, 258], 10, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"QRNS");
        assert_eq!(buf.len(), HEADER_LEN + 4);
        assert_eq!(&buf[16..], &[1, 0, 2, 1]);
        assert!(write_binary(&[1024], 10, Vec::new()).is_err());
    }

    #[test]
    fn binary_corruption_detected() {
        let mut buf = Vec::new();
        write_binary(&[1, 2, 3], 4, &mut buf).unwrap();
        assert!(read_binary(&buf[..buf.len() - 1], "b").is_err());
        assert!(read_binary(&buf[..10], "b").is_err());
        let mut wide = buf.clone();
        wide[HEADER_LEN + 2] = 0x40;
        match read_binary(wide.as_slice(), "b") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let mut magic = buf;
        magic[0] = b'X';
        assert!(read_binary(magic.as_slice(), "b").is_err());
    }

    #[test]
    fn validation_against_bit_depth() {
        let set = SampleSet {
            n_bits: None,
            codes: vec![3, 4, 8],
        };
        assert!(validate_codes(&set, 4, "s").is_ok());
        match validate_codes(&set, 3, "s") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn binary_round_trip(n in 1u32..=16, raw in proptest::collection::vec(any::<u16>(), 0..200)) {
            let codes: Vec<u16> = raw.iter().map(|&c| if n == 16 { c } else { c % (1 << n) }).collect();
            let mut buf = Vec::new();
            write_binary(&codes, n, &mut buf).unwrap();
            let back = read_binary(buf.as_slice(), "p").unwrap();
            prop_assert_eq!(back.n_bits, Some(n));
            prop_assert_eq!(back.codes, codes);
        }
    }
}
