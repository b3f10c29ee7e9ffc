//! Single-level orthonormal 2D Haar decomposition.
//!
//! The transform is `W·D·Wᵀ`, where the first half of `W`'s rows are the
//! lowpass pairs `(1, 1)/√2` and the second half the highpass pairs
//! `(1, -1)/√2`. Left multiplication filters columns (vertical direction),
//! right multiplication by `Wᵀ` filters rows (horizontal direction), giving
//! the block layout `[[LL, HL], [LH, HH]]`.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, PartialEq)]
pub struct SubbandQuad {
    pub ll: Raster,
    /// Horizontal highpass, vertical lowpass.
    pub hl: Raster,
    /// Horizontal lowpass, vertical highpass.
    pub lh: Raster,
    pub hh: Raster,
}

impl SubbandQuad {
    /// Subbands in canonical order LL, HL, LH, HH.
    pub fn bands(&self) -> [&Raster; 4] {
        [&self.ll, &self.hl, &self.lh, &self.hh]
    }

    pub fn width(&self) -> usize {
        self.ll.width()
    }

    pub fn height(&self) -> usize {
        self.ll.height()
    }
}

/// Replicates the last row and/or column so both dimensions are even.
pub fn pad_to_even(plane: &Raster) -> Raster {
    let (w, h) = (plane.width(), plane.height());
    if w % 2 == 0 && h % 2 == 0 {
        return plane.clone();
    }
    let pw = w + w % 2;
    let ph = h + h % 2;
    Raster::from_fn(pw, ph, |r, c| plane.get(r.min(h - 1), c.min(w - 1), 0))
        .expect("padded dimensions are non-zero")
}

pub fn haar_decompose(plane: &Raster) -> Result<SubbandQuad> {
    if plane.channels() != 1 {
        return Err(Error::Channels {
            expected: 1,
            got: plane.channels(),
        });
    }
    if plane.width() < 2 || plane.height() < 2 {
        return Err(Error::TooSmall {
            width: plane.width(),
            height: plane.height(),
            min_width: 2,
            min_height: 2,
        });
    }
    let padded = pad_to_even(plane);
    let w = padded.width();
    let hw = w / 2;
    let hh = padded.height() / 2;
    let src = padded.data();
    let n = hw * hh;
    let (mut ll, mut hl, mut lh, mut hhb) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for r in 0..hh {
        let top = &src[2 * r * w..(2 * r + 1) * w];
        let bot = &src[(2 * r + 1) * w..(2 * r + 2) * w];
        for c in 0..hw {
            let (a, b) = (top[2 * c], top[2 * c + 1]);
            let (d, e) = (bot[2 * c], bot[2 * c + 1]);
            // Vertical pass then horizontal pass, each scaled by 1/√2.
            let lo_a = (a + d) * FRAC_1_SQRT_2;
            let lo_b = (b + e) * FRAC_1_SQRT_2;
            let hi_a = (a - d) * FRAC_1_SQRT_2;
            let hi_b = (b - e) * FRAC_1_SQRT_2;
            ll.push((lo_a + lo_b) * FRAC_1_SQRT_2);
            hl.push((lo_a - lo_b) * FRAC_1_SQRT_2);
            lh.push((hi_a + hi_b) * FRAC_1_SQRT_2);
            hhb.push((hi_a - hi_b) * FRAC_1_SQRT_2);
        }
    }
    Ok(SubbandQuad {
        ll: Raster::new(hw, hh, 1, ll)?,
        hl: Raster::new(hw, hh, 1, hl)?,
        lh: Raster::new(hw, hh, 1, lh)?,
        hh: Raster::new(hw, hh, 1, hhb)?,
    })
}

/// Inverse transform `Wᵀ·B·W`; returns the (padded) even-sized plane.
pub fn haar_reconstruct(quad: &SubbandQuad) -> Result<Raster> {
    let (hw, hh) = (quad.width(), quad.height());
    for band in quad.bands() {
        if band.width() != hw || band.height() != hh || band.channels() != 1 {
            return Err(Error::DimensionMismatch {
                left: quad.ll.dims(),
                right: band.dims(),
            });
        }
    }
    let w = 2 * hw;
    let mut out = vec![0.0; w * 2 * hh];
    for r in 0..hh {
        for c in 0..hw {
            let i = r * hw + c;
            let (s_ll, s_hl) = (quad.ll.data()[i], quad.hl.data()[i]);
            let (s_lh, s_hh) = (quad.lh.data()[i], quad.hh.data()[i]);
            let lo_a = (s_ll + s_hl) * FRAC_1_SQRT_2;
            let lo_b = (s_ll - s_hl) * FRAC_1_SQRT_2;
            let hi_a = (s_lh + s_hh) * FRAC_1_SQRT_2;
            let hi_b = (s_lh - s_hh) * FRAC_1_SQRT_2;
            out[2 * r * w + 2 * c] = (lo_a + hi_a) * FRAC_1_SQRT_2;
            out[2 * r * w + 2 * c + 1] = (lo_b + hi_b) * FRAC_1_SQRT_2;
            out[(2 * r + 1) * w + 2 * c] = (lo_a - hi_a) * FRAC_1_SQRT_2;
            out[(2 * r + 1) * w + 2 * c + 1] = (lo_b - hi_b) * FRAC_1_SQRT_2;
        }
    }
    Raster::new(w, 2 * hh, 1, out)
}
