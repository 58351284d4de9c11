use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::rng::Rng;
use crate::tensor::Tensor;

/// Pixel noise std of the noise branch, in normalized units.
pub const AUGMENT_NOISE_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Flip,
    Noise,
}

/// Flips a (3, H, W, L) slice horizontally or adds pixel noise, each with
/// probability one half.
pub fn augment(slice: &Tensor, rng: &mut Rng) -> Tensor {
    let branch = if rng.random_bool(0.5) { Branch::Flip } else { Branch::Noise };
    augment_with(slice, branch, rng)
}

/// Applies the chosen branch.
///
/// Flipping mirrors the W axis of every channel; derivatives of a mirrored
/// sequence are the mirrored derivatives, so all three channels stay
/// consistent. The noise branch adds i.i.d. noise `n_t` to every raw frame
/// (two frames beyond the slice included) and propagates it through the
/// forward differences: channel 1 gets `n_{t+1} − n_t`, channel 2
/// `n_{t+2} − 2n_{t+1} + n_t`.
pub fn augment_with(slice: &Tensor, branch: Branch, rng: &mut Rng) -> Tensor {
    let s = slice.shape();
    assert!(s.len() == 4 && s[0] == 3, "slice must be (3, H, W, L), got {s:?}");
    let (h, w, l) = (s[1], s[2], s[3]);
    let src = slice.data();
    let mut out = slice.clone();
    match branch {
        Branch::Flip => {
            let dst = out.data_mut();
            for c in 0..3 {
                for y in 0..h {
                    for x in 0..w {
                        let a = ((c * h + y) * w + x) * l;
                        let b = ((c * h + y) * w + (w - 1 - x)) * l;
                        dst[a..a + l].copy_from_slice(&src[b..b + l]);
                    }
                }
            }
        }
        Branch::Noise => {
            let normal = Normal::new(0.0, AUGMENT_NOISE_STD).expect("positive std");
            let dst = out.data_mut();
            let plane = h * w;
            let mut n = vec![0.0; l + 2];
            for p in 0..plane {
                for v in n.iter_mut() {
                    *v = normal.sample(rng);
                }
                for t in 0..l {
                    dst[p * l + t] += n[t];
                    dst[(plane + p) * l + t] += n[t + 1] - n[t];
                    dst[(2 * plane + p) * l + t] += n[t + 2] - 2.0 * n[t + 1] + n[t];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flip_is_an_involution() {
        let x = Tensor::from_fn(&[3, 4, 6, 5], |i| i as f64);
        let mut r = crate::rng::rng(1);
        let once = augment_with(&x, Branch::Flip, &mut r);
        assert_ne!(once, x);
        assert_eq!(augment_with(&once, Branch::Flip, &mut r), x);
    }
}
