use std::io::{Read, Write};

use crate::tensor::Tensor;

use super::{DataError, Result};

pub const VFRM_MAGIC: &[u8; 4] = b"VFRM";
const VFRM_VERSION: u32 = 1;
const VFRM_HEADER: usize = 24;

/// Grayscale video, frames stored time-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub data: Vec<f64>,
    pub n_frames: usize,
    pub height: usize,
    pub width: usize,
    pub frame_rate: f64,
}

impl FrameSequence {
    pub fn new(data: Vec<f64>, n_frames: usize, height: usize, width: usize, frame_rate: f64) -> Result<Self> {
        if n_frames == 0 || height == 0 || width == 0 {
            return Err(DataError::Invalid(format!("empty video {n_frames}x{height}x{width}")));
        }
        if data.len() != n_frames * height * width {
            return Err(DataError::Invalid(format!(
                "{} values for {n_frames} frames of {height}x{width}",
                data.len()
            )));
        }
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(DataError::Invalid(format!("frame rate {frame_rate}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("non-finite pixel".into()));
        }
        Ok(FrameSequence {
            data,
            n_frames,
            height,
            width,
            frame_rate,
        })
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[t * n..(t + 1) * n]
    }

    pub fn duration_s(&self) -> f64 {
        self.n_frames as f64 / self.frame_rate
    }
}

/// Bilinear resize with pixel-center alignment and edge clamping.
pub fn resize_bilinear(src: &[f64], h: usize, w: usize, nh: usize, nw: usize) -> Vec<f64> {
    let (sy, sx) = (h as f64 / nh as f64, w as f64 / nw as f64);
    let coord = |d: usize, scale: f64, n: usize| {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, s - i0 as f64)
    };
    let cols: Vec<_> = (0..nw).map(|x| coord(x, sx, w)).collect();
    let mut out = Vec::with_capacity(nh * nw);
    for y in 0..nh {
        let (y0, y1, fy) = coord(y, sy, h);
        for &(x0, x1, fx) in &cols {
            let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
            let bottom = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Resizes every frame to `size`×`size` and normalizes the whole sequence to
/// zero mean and unit standard deviation.
pub fn preprocess(seq: &FrameSequence, size: usize) -> Result<FrameSequence> {
    if size == 0 {
        return Err(DataError::Invalid("target size 0".into()));
    }
    let mut data = Vec::with_capacity(seq.n_frames * size * size);
    for t in 0..seq.n_frames {
        if seq.height == size && seq.width == size {
            data.extend_from_slice(seq.frame(t));
        } else {
            data.extend(resize_bilinear(seq.frame(t), seq.height, seq.width, size, size));
        }
    }
    let mean = crate::stats::mean(&data);
    let std = (crate::stats::centered_ss(&data) / data.len() as f64).sqrt();
    if std <= 1e-12 {
        return Err(DataError::Invalid("video has zero variance".into()));
    }
    for v in &mut data {
        *v = (*v - mean) / std;
    }
    FrameSequence::new(data, seq.n_frames, size, size, seq.frame_rate)
}

/// Forward difference along the last axis with the final value repeated.
fn forward_difference(x: &[f64], t: usize) -> Vec<f64> {
    let mut d = vec![0.0; x.len()];
    for (src, dst) in x.chunks_exact(t).zip(d.chunks_exact_mut(t)) {
        for i in 0..t - 1 {
            dst[i] = src[i + 1] - src[i];
        }
        dst[t - 1] = dst[t - 2];
    }
    d
}

/// (3, H, W, T) tensor of the frames and their first and second temporal
/// derivatives.
pub fn derivatives(seq: &FrameSequence) -> Result<Tensor> {
    let (t, h, w) = (seq.n_frames, seq.height, seq.width);
    if t < 3 {
        return Err(DataError::Invalid(format!("derivatives need at least 3 frames, got {t}")));
    }
    // (H, W, T) layout of the raw channel
    let mut raw = vec![0.0; h * w * t];
    for ti in 0..t {
        for (p, &v) in seq.frame(ti).iter().enumerate() {
            raw[p * t + ti] = v;
        }
    }
    let d1 = forward_difference(&raw, t);
    let d2 = forward_difference(&d1, t);
    Ok(Tensor::new(&[3, h, w, t], [raw, d1, d2].concat())?)
}

/// Number of paired slices: the smaller of the two slice counts, with any
/// trailing remainder dropped on both sides.
pub fn paired_slices(video_frames: usize, lv: usize, audio_frames: usize, la: usize) -> Result<usize> {
    if lv == 0 || la == 0 {
        return Err(DataError::Invalid("slice lengths must be positive".into()));
    }
    let k = (video_frames / lv).min(audio_frames / la);
    if k == 0 {
        return Err(DataError::Invalid(format!(
            "no complete slice: {video_frames} frames / {lv}, {audio_frames} spectrogram frames / {la}"
        )));
    }
    Ok(k)
}

/// First `k` non-overlapping (3, H, W, L_v) slices of a derivative tensor.
pub fn slice_video(d: &Tensor, lv: usize, k: usize) -> Result<Vec<Tensor>> {
    let s = d.shape();
    if s.len() != 4 || s[0] != 3 {
        return Err(DataError::Invalid(format!("expected (3, H, W, T), got {s:?}")));
    }
    let t = s[3];
    if lv == 0 || k * lv > t {
        return Err(DataError::Invalid(format!("{k} slices of {lv} frames exceed {t}")));
    }
    let planes = 3 * s[1] * s[2];
    Ok((0..k)
        .map(|j| {
            let mut out = Vec::with_capacity(planes * lv);
            for p in 0..planes {
                out.extend_from_slice(&d.data()[p * t + j * lv..p * t + (j + 1) * lv]);
            }
            Tensor::new(&[3, s[1], s[2], lv], out).expect("slice shape")
        })
        .collect())
}

/// First `k` non-overlapping slices of a (T, B) code matrix, each flattened to L_a·B.
pub fn slice_codes(codes: &Tensor, la: usize, k: usize) -> Result<Vec<Tensor>> {
    let s = codes.shape();
    if s.len() != 2 {
        return Err(DataError::Invalid(format!("expected (T, B), got {s:?}")));
    }
    if la == 0 || k * la > s[0] {
        return Err(DataError::Invalid(format!("{k} slices of {la} frames exceed {}", s[0])));
    }
    let n = la * s[1];
    Ok((0..k)
        .map(|j| Tensor::new(&[n], codes.data()[j * n..(j + 1) * n].to_vec()).expect("slice shape"))
        .collect())
}

fn bad(offset: usize, detail: impl Into<String>) -> DataError {
    DataError::Format {
        format: "VFRM",
        offset,
        detail: detail.into(),
    }
}

/// Writes 8-bit frames; values are clamped to [0, 1] and rounded to 1/255.
pub fn write_vfrm<W: Write>(mut w: W, seq: &FrameSequence) -> Result<()> {
    let mut buf = Vec::with_capacity(VFRM_HEADER + seq.data.len());
    buf.extend_from_slice(VFRM_MAGIC);
    buf.extend_from_slice(&VFRM_VERSION.to_le_bytes());
    for v in [seq.n_frames, seq.height, seq.width] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(seq.frame_rate as f32).to_le_bytes());
    buf.extend(seq.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    w.write_all(&buf)?;
    Ok(())
}

/// Reads 8-bit frames scaled to [0, 1].
pub fn read_vfrm<R: Read>(mut r: R) -> Result<FrameSequence> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 4 || &buf[..4] != VFRM_MAGIC {
        let got = String::from_utf8_lossy(&buf[..buf.len().min(4)]).into_owned();
        return Err(bad(0, format!("bad magic {got:?}, expected \"VFRM\"")));
    }
    if buf.len() < VFRM_HEADER {
        return Err(bad(buf.len(), "truncated header"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap()) as usize;
    if u32_at(4) != VFRM_VERSION as usize {
        return Err(bad(4, format!("unsupported version {}", u32_at(4))));
    }
    let (t, h, w) = (u32_at(8), u32_at(12), u32_at(16));
    let rate = f32::from_le_bytes(buf[20..24].try_into().unwrap()) as f64;
    let need = VFRM_HEADER + t * h * w;
    if buf.len() != need {
        return Err(bad(
            buf.len().min(need),
            format!("payload holds {} bytes, header promises {}", buf.len() - VFRM_HEADER, t * h * w),
        ));
    }
    let data = buf[VFRM_HEADER..].iter().map(|&b| b as f64 / 255.0).collect();
    FrameSequence::new(data, t, h, w, rate).map_err(|e| bad(8, e.to_string()))
}
