//! `AUDS` spectrogram files.
//!
//! Little-endian: magic `AUDS`, u32 version = 1, u32 T, u32 F = 128,
//! f32 frm_len, f32 tc, i32 fac, i32 shft, then T·F f32 values, time-major.

use std::io::{Read, Write};

use super::{AudSpec, AudSpecError, AudSpecParams, Result, N_CHANNELS};

pub const AUDS_MAGIC: &[u8; 4] = b"AUDS";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 32;

fn bad(offset: usize, detail: impl Into<String>) -> AudSpecError {
    AudSpecError::Format {
        format: "AUDS",
        offset,
        detail: detail.into(),
    }
}

pub fn write_auds<W: Write>(mut w: W, s: &AudSpec) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + s.data().len() * 4);
    buf.extend_from_slice(AUDS_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(s.n_frames() as u32).to_le_bytes());
    buf.extend_from_slice(&(N_CHANNELS as u32).to_le_bytes());
    buf.extend_from_slice(&(s.params.frm_len as f32).to_le_bytes());
    buf.extend_from_slice(&(s.params.tc as f32).to_le_bytes());
    buf.extend_from_slice(&s.params.fac.to_le_bytes());
    buf.extend_from_slice(&s.params.shft.to_le_bytes());
    for &v in s.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_auds<R: Read>(mut r: R) -> Result<AudSpec> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 4 || &buf[0..4] != AUDS_MAGIC {
        let got = String::from_utf8_lossy(&buf[..buf.len().min(4)]).into_owned();
        return Err(bad(0, format!("bad magic {got:?}, expected \"AUDS\"")));
    }
    if buf.len() < HEADER_LEN {
        return Err(bad(buf.len(), "truncated header"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
    let f32_at = |i: usize| f32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
    let i32_at = |i: usize| i32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(bad(4, format!("unsupported version {version}")));
    }
    let t = u32_at(8) as usize;
    let f = u32_at(12) as usize;
    if f != N_CHANNELS {
        return Err(bad(12, format!("{f} channels, expected {N_CHANNELS}")));
    }
    let params = AudSpecParams {
        frm_len: f32_at(16) as f64,
        tc: f32_at(20) as f64,
        fac: i32_at(24),
        shft: i32_at(28),
    };
    let need = HEADER_LEN + t * f * 4;
    if buf.len() != need {
        return Err(bad(
            buf.len().min(need),
            format!("payload holds {} bytes, header promises {}", buf.len() - HEADER_LEN, t * f * 4),
        ));
    }
    let data = buf[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    AudSpec::new(data, t, params).map_err(|e| bad(HEADER_LEN, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrong_channel_count_rejected() {
        let s = AudSpec::new(vec![0.5; N_CHANNELS], 1, AudSpecParams::default()).unwrap();
        let mut buf = Vec::new();
        write_auds(&mut buf, &s).unwrap();
        buf[12] = 64;
        let e = read_auds(&buf[..]).unwrap_err();
        assert!(e.to_string().contains("byte 12"));
    }
}
