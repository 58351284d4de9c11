//! RIFF/WAVE, PCM 16-bit little-endian, mono.

use std::io::{Read, Write};

use super::{AudSpecError, Result, Waveform};

fn bad(offset: usize, detail: impl Into<String>) -> AudSpecError {
    AudSpecError::Format {
        format: "WAV",
        offset,
        detail: detail.into(),
    }
}

fn show_tag(b: &[u8]) -> String {
    format!("{:?}", String::from_utf8_lossy(b))
}

pub fn read_wav<R: Read>(mut r: R) -> Result<Waveform> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 12 {
        return Err(bad(0, format!("file of {} bytes is too short for a RIFF header", buf.len())));
    }
    if &buf[0..4] != b"RIFF" {
        return Err(bad(0, format!("bad magic {}, expected \"RIFF\"", show_tag(&buf[0..4]))));
    }
    if &buf[8..12] != b"WAVE" {
        return Err(bad(8, format!("bad form type {}, expected \"WAVE\"", show_tag(&buf[8..12]))));
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= buf.len() {
        let id = &buf[pos..pos + 4];
        let size = u32::from_le_bytes(buf[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = pos + 8;
        if body + size > buf.len() {
            return Err(bad(pos, format!("chunk {} overruns the file", show_tag(id))));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(bad(pos, "fmt chunk shorter than 16 bytes"));
                }
                let f = &buf[body..body + 16];
                let u16_at = |i: usize| u16::from_le_bytes([f[i], f[i + 1]]);
                let rate = u32::from_le_bytes(f[4..8].try_into().unwrap());
                format = Some((u16_at(0), u16_at(2), rate, u16_at(14)));
            }
            b"data" => {
                let (tag, channels, rate, bits) =
                    format.ok_or_else(|| bad(pos, "data chunk before fmt chunk"))?;
                if tag != 1 {
                    return Err(bad(pos, format!("unsupported format tag {tag}, expected PCM (1)")));
                }
                if channels != 1 {
                    return Err(bad(pos, format!("{channels} channels, expected mono")));
                }
                if bits != 16 {
                    return Err(bad(pos, format!("{bits}-bit samples, expected 16")));
                }
                let samples = buf[body..body + size - size % 2]
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
                    .collect();
                return Waveform::new(samples, rate);
            }
            _ => {}
        }
        pos = body + size + size % 2;
    }
    Err(bad(pos, "no data chunk"))
}

/// Writes PCM16; samples are clipped to [-1, 1).
pub fn write_wav<W: Write>(mut w: W, wave: &Waveform) -> Result<()> {
    let data_len = wave.samples.len() * 2;
    let mut buf = Vec::with_capacity(44 + data_len);
    buf.extend_from_slice(b"RIFF");
    buf.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    buf.extend_from_slice(b"WAVEfmt ");
    buf.extend_from_slice(&16u32.to_le_bytes());
    buf.extend_from_slice(&1u16.to_le_bytes());
    buf.extend_from_slice(&1u16.to_le_bytes());
    buf.extend_from_slice(&wave.sample_rate.to_le_bytes());
    buf.extend_from_slice(&(wave.sample_rate * 2).to_le_bytes());
    buf.extend_from_slice(&2u16.to_le_bytes());
    buf.extend_from_slice(&16u16.to_le_bytes());
    buf.extend_from_slice(b"data");
    buf.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &wave.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        buf.extend_from_slice(&q.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}
