//! Black border detection and removal.
//!
//! Borders are found on a single reference frame by repeatedly peeling the
//! outermost row or column while none of its channel bytes exceeds the
//! threshold. The resulting box is then applied to every frame of the video.

use crate::error::{Error, Result};
use crate::media::FrameBuffer;

/// Inclusive top-left corner plus extent, in source pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CropBox {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
}

impl CropBox {
    pub fn full(frame: &FrameBuffer) -> Self {
        Self {
            x0: 0,
            y0: 0,
            w: frame.width(),
            h: frame.height(),
        }
    }

    pub fn is_full(&self, frame: &FrameBuffer) -> bool {
        *self == Self::full(frame)
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.w >= 1
            && self.h >= 1
            && self.x0 as u64 + self.w as u64 <= width as u64
            && self.y0 as u64 + self.h as u64 <= height as u64
    }

    /// True when `other` lies entirely inside `self`.
    pub fn contains(&self, other: &CropBox) -> bool {
        other.x0 >= self.x0
            && other.y0 >= self.y0
            && other.x0 + other.w <= self.x0 + self.w
            && other.y0 + other.h <= self.y0 + self.h
    }
}

fn row_is_dark(frame: &FrameBuffer, y: u32, x0: u32, x1: u32, threshold: u8) -> bool {
    let row = frame.row(y);
    row[x0 as usize * 3..x1 as usize * 3]
        .iter()
        .all(|&c| c <= threshold)
}

fn col_is_dark(frame: &FrameBuffer, x: u32, y0: u32, y1: u32, threshold: u8) -> bool {
    (y0..y1).all(|y| frame.pixel(x, y).iter().all(|&c| c <= threshold))
}

/// Peels dark outer rows and columns until every edge of the remaining box
/// holds at least one channel byte strictly above `threshold`.
///
/// Fails with [`Error::FrameAllDark`] when either side of the result would
/// be shorter than `min_dim`.
pub fn compute_crop_box(frame: &FrameBuffer, threshold: u8, min_dim: u32) -> Result<CropBox> {
    // half-open bounds [x0, x1) x [y0, y1)
    let (mut x0, mut x1, mut y0, mut y1) = (0, frame.width(), 0, frame.height());
    loop {
        let mut peeled = false;
        if y0 < y1 && row_is_dark(frame, y0, x0, x1, threshold) {
            y0 += 1;
            peeled = true;
        }
        if y0 < y1 && row_is_dark(frame, y1 - 1, x0, x1, threshold) {
            y1 -= 1;
            peeled = true;
        }
        if x0 < x1 && col_is_dark(frame, x0, y0, y1, threshold) {
            x0 += 1;
            peeled = true;
        }
        if x0 < x1 && col_is_dark(frame, x1 - 1, y0, y1, threshold) {
            x1 -= 1;
            peeled = true;
        }
        if !peeled || x0 >= x1 || y0 >= y1 {
            break;
        }
    }
    let (w, h) = (x1.saturating_sub(x0), y1.saturating_sub(y0));
    if w < min_dim.max(1) || h < min_dim.max(1) {
        return Err(Error::FrameAllDark {
            width: w,
            height: h,
        });
    }
    Ok(CropBox { x0, y0, w, h })
}

/// Copies the pixels inside `bbox`, keeping the frame's timestamp.
pub fn apply_crop(frame: &FrameBuffer, bbox: &CropBox) -> Result<FrameBuffer> {
    if !bbox.fits(frame.width(), frame.height()) {
        return Err(Error::BoxOutOfBounds {
            x0: bbox.x0,
            y0: bbox.y0,
            w: bbox.w,
            h: bbox.h,
            width: frame.width(),
            height: frame.height(),
        });
    }
    if bbox.is_full(frame) {
        return Ok(frame.clone());
    }
    let mut out = Vec::with_capacity(bbox.w as usize * bbox.h as usize * 3);
    let (a, b) = (bbox.x0 as usize * 3, (bbox.x0 + bbox.w) as usize * 3);
    for y in bbox.y0..bbox.y0 + bbox.h {
        out.extend_from_slice(&frame.row(y)[a..b]);
    }
    FrameBuffer::new(bbox.w, bbox.h, out, frame.timestamp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{Fps, Timestamp};
    use proptest::prelude::*;

    fn ts() -> Timestamp {
        Timestamp::new(0, Fps::integer(30).unwrap())
    }

    fn frame_from_levels(w: u32, h: u32, level: impl Fn(u32, u32) -> u8) -> FrameBuffer {
        let mut px = Vec::with_capacity((w * h * 3) as usize);
        for y in 0..h {
            for x in 0..w {
                let v = level(x, y);
                px.extend_from_slice(&[v, v, v]);
            }
        }
        FrameBuffer::new(w, h, px, ts()).unwrap()
    }

    /// Largest box whose four edges each hold a byte above the threshold,
    /// found by enumerating every sub-rectangle.
    fn brute_force_box(frame: &FrameBuffer, threshold: u8) -> Option<CropBox> {
        let bright = |x: u32, y: u32| frame.pixel(x, y).iter().any(|&c| c > threshold);
        let (w, h) = (frame.width(), frame.height());
        let mut best: Option<CropBox> = None;
        for y0 in 0..h {
            for y1 in y0 + 1..=h {
                for x0 in 0..w {
                    for x1 in x0 + 1..=w {
                        let top = (x0..x1).any(|x| bright(x, y0));
                        let bottom = (x0..x1).any(|x| bright(x, y1 - 1));
                        let left = (y0..y1).any(|y| bright(x0, y));
                        let right = (y0..y1).any(|y| bright(x1 - 1, y));
                        if top && bottom && left && right {
                            let cand = CropBox {
                                x0,
                                y0,
                                w: x1 - x0,
                                h: y1 - y0,
                            };
                            let area = |b: &CropBox| b.w * b.h;
                            if best.map_or(true, |b| area(&cand) > area(&b)) {
                                best = Some(cand);
                            }
                        }
                    }
                }
            }
        }
        best
    }

    #[test]
    fn planted_ten_pixel_border() {
        let frame = frame_from_levels(100, 100, |x, y| {
            if (10..90).contains(&x) && (10..90).contains(&y) {
                200
            } else {
                0
            }
        });
        let bbox = compute_crop_box(&frame, 15, 64).unwrap();
        assert_eq!(
            bbox,
            CropBox {
                x0: 10,
                y0: 10,
                w: 80,
                h: 80
            }
        );
        assert_eq!(brute_force_box(&frame, 15), Some(bbox));

        let cropped = apply_crop(&frame, &bbox).unwrap();
        assert_eq!((cropped.width(), cropped.height()), (80, 80));
        assert_eq!(cropped.pixel(0, 0), frame.pixel(10, 10));
    }

    #[test]
    fn bright_edges_keep_full_frame() {
        let frame = frame_from_levels(70, 70, |x, y| 16 + ((x + y) % 100) as u8);
        assert_eq!(
            compute_crop_box(&frame, 15, 64).unwrap(),
            CropBox::full(&frame)
        );
    }

    #[test]
    fn threshold_is_strict() {
        // a border at exactly the threshold is still dark
        let frame = frame_from_levels(80, 80, |x, _| if x < 5 { 15 } else { 100 });
        let bbox = compute_crop_box(&frame, 15, 64).unwrap();
        assert_eq!(
            bbox,
            CropBox {
                x0: 5,
                y0: 0,
                w: 75,
                h: 80
            }
        );
    }

    #[test]
    fn single_bright_channel_keeps_a_row() {
        let mut px = vec![0u8; 70 * 70 * 3];
        for b in px.iter_mut().skip(70 * 3) {
            *b = 50;
        }
        // only the green channel of one top-row pixel is bright
        px[3 * 3 + 1] = 16;
        let frame = FrameBuffer::new(70, 70, px, ts()).unwrap();
        assert_eq!(compute_crop_box(&frame, 15, 64).unwrap().y0, 0);
    }

    #[test]
    fn all_dark_frame_is_rejected() {
        let frame = FrameBuffer::filled(100, 100, 0, ts()).unwrap();
        assert!(matches!(
            compute_crop_box(&frame, 15, 64),
            Err(Error::FrameAllDark { .. })
        ));
        assert!(matches!(
            compute_crop_box(&frame, 15, 1),
            Err(Error::FrameAllDark { .. })
        ));
    }

    #[test]
    fn small_remaining_area_is_rejected() {
        let frame = frame_from_levels(100, 100, |x, y| {
            if (40..60).contains(&x) && (40..60).contains(&y) {
                200
            } else {
                0
            }
        });
        assert!(matches!(
            compute_crop_box(&frame, 15, 64),
            Err(Error::FrameAllDark {
                width: 20,
                height: 20
            })
        ));
        assert_eq!(compute_crop_box(&frame, 15, 20).unwrap().w, 20);
    }

    #[test]
    fn apply_crop_edge_cases() {
        let frame = frame_from_levels(5, 4, |x, y| (x * 10 + y) as u8);
        let same = apply_crop(&frame, &CropBox::full(&frame)).unwrap();
        assert_eq!(same, frame);

        let one = apply_crop(
            &frame,
            &CropBox {
                x0: 3,
                y0: 2,
                w: 1,
                h: 1,
            },
        )
        .unwrap();
        assert_eq!((one.width(), one.height()), (1, 1));
        assert_eq!(one.pixel(0, 0), frame.pixel(3, 2));
        assert_eq!(one.timestamp(), frame.timestamp());

        let oob = apply_crop(
            &frame,
            &CropBox {
                x0: 3,
                y0: 0,
                w: 3,
                h: 1,
            },
        );
        assert!(matches!(oob, Err(Error::BoxOutOfBounds { .. })));
    }

    fn small_frame() -> impl Strategy<Value = FrameBuffer> {
        (1u32..9, 1u32..9).prop_flat_map(|(w, h)| {
            proptest::collection::vec(
                prop_oneof![Just(0u8), Just(15u8), 0u8..=40],
                (w * h * 3) as usize,
            )
            .prop_map(move |px| FrameBuffer::new(w, h, px, ts()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn peeling_matches_brute_force(frame in small_frame(), threshold in 0u8..30) {
            let peeled = compute_crop_box(&frame, threshold, 1).ok();
            prop_assert_eq!(peeled, brute_force_box(&frame, threshold));
        }

        #[test]
        fn cropping_is_idempotent(frame in small_frame(), threshold in 0u8..30) {
            if let Ok(bbox) = compute_crop_box(&frame, threshold, 1) {
                let cropped = apply_crop(&frame, &bbox).unwrap();
                let again = compute_crop_box(&cropped, threshold, 1).unwrap();
                prop_assert!(again.is_full(&cropped));
            }
        }

        #[test]
        fn higher_threshold_never_grows_box(frame in small_frame(), t in 0u8..30, dt in 0u8..20) {
            if let Ok(high) = compute_crop_box(&frame, t + dt, 1) {
                let low = compute_crop_box(&frame, t, 1).unwrap();
                prop_assert!(low.contains(&high));
            }
        }
    }
}
