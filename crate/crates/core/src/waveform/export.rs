//! Waveform file formats.
//!
//! CSV: header `index,t_seconds,re,im`, one row per sample.
//!
//! Binary: 16-byte header (`b"CSWV"`, `u32` version, `f64` sample rate), then
//! interleaved `re, im` pairs; every field little-endian, samples as `f64`.

use std::io::{Read, Write};

use num_complex::Complex;

use super::SampledSignal;
use crate::{Error, Real, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"CSWV";
pub const BINARY_VERSION: u32 = 1;

pub fn write_csv<T: Real, W: Write>(signal: &SampledSignal<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "t_seconds", "re", "im"])?;
    for (k, x) in signal.samples().iter().enumerate() {
        w.write_record([
            k.to_string(),
            signal.time_of(k).as_f64().to_string(),
            x.re.as_f64().to_string(),
            x.im.as_f64().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`]. The sample rate is recovered from
/// the first two timestamps, so at least two rows are required.
pub fn read_csv<T: Real, R: Read>(input: R) -> Result<SampledSignal<T>> {
    let mut r = csv::Reader::from_reader(input);
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Format(format!("bad field {i} in row {}", samples.len())))
        };
        times.push(field(1)?);
        samples.push(Complex::new(T::lit(field(2)?), T::lit(field(3)?)));
    }
    if times.len() < 2 {
        return Err(Error::Format(
            "need at least two rows to infer the sample rate".into(),
        ));
    }
    let fs = 1.0 / (times[1] - times[0]);
    SampledSignal::with_start(samples, T::lit(fs), T::lit(times[0]))
}

pub fn write_binary<T: Real, W: Write>(signal: &SampledSignal<T>, mut out: W) -> Result<()> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&signal.sample_rate().as_f64().to_le_bytes())?;
    for x in signal.samples() {
        out.write_all(&x.re.as_f64().to_le_bytes())?;
        out.write_all(&x.im.as_f64().to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_binary<T: Real, R: Read>(mut input: R) -> Result<SampledSignal<T>> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if &header[..4] != BINARY_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let fs = f64::from_le_bytes(header[8..16].try_into().unwrap());
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() % 16 != 0 {
        return Err(Error::Format("truncated sample data".into()));
    }
    let samples = body
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect();
    SampledSignal::new(samples, T::lit(fs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{generate_ttsfw, TtsfwParams};
    use proptest::prelude::*;

    #[test]
    fn binary_header_layout() {
        let s = SampledSignal::new(vec![Complex::new(1.5, -2.0)], 25e6).unwrap();
        let mut buf = Vec::new();
        write_binary(&s, &mut buf).unwrap();
        assert_eq!(buf.len(), 32);
        assert_eq!(&buf[..4], b"CSWV");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(buf[8..16].try_into().unwrap()), 25e6);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 1.5);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), -2.0);
    }

    #[test]
    fn binary_rejects_garbage() {
        assert!(read_binary::<f64, _>(&b"XXXX\x01\0\0\0\0\0\0\0\0\0\0\0"[..]).is_err());
        let mut buf = Vec::new();
        let s = SampledSignal::new(vec![Complex::new(1.0, 0.0)], 1.0).unwrap();
        write_binary(&s, &mut buf).unwrap();
        buf.pop();
        assert!(read_binary::<f64, _>(&buf[..]).is_err());
    }

    #[test]
    fn csv_header_and_first_row() {
        let p = TtsfwParams::new(0.5e6, 4e6, 1, 2e-6, 0.5, 25e6).unwrap();
        let s = generate_ttsfw(&p).unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,t_seconds,re,im"));
        assert_eq!(lines.next(), Some("0,0,2,0"));
        assert_eq!(text.lines().count(), 51);
    }

    proptest! {
        #[test]
        fn csv_and_binary_round_trip(vals in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..40)) {
            let samples: Vec<_> = vals.iter().map(|(a, b)| Complex::new(*a, *b)).collect();
            let s = SampledSignal::new(samples, 25e6).unwrap();
            let mut bin = Vec::new();
            write_binary(&s, &mut bin).unwrap();
            prop_assert_eq!(&read_binary::<f64, _>(&bin[..]).unwrap(), &s);
            let mut text = Vec::new();
            write_csv(&s, &mut text).unwrap();
            let back = read_csv::<f64, _>(&text[..]).unwrap();
            prop_assert_eq!(back.samples(), s.samples());
            prop_assert!((back.sample_rate() - 25e6).abs() < 1e-3);
        }
    }
}
