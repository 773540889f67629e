//! Procedural factor-grid image dataset.
//!
//! 768 binary 16x16 images generated from four independent ground-truth
//! factors: shape (square, ellipse, triangle), size (4 levels), and an
//! 8x8 grid of positions. Every factor combination renders exactly
//! once, every image is unique, and moving the position factor
//! translates the sprite pixel-for-pixel. Ground-truth factors are what
//! the disentanglement metric scores against.

use std::io::Read;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::rng::{shuffle, stream, Stream};
use crate::{Error, Result};

pub const IMAGE_SIDE: usize = 16;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const N_SHAPES: usize = 3;
pub const N_SIZES: usize = 4;
pub const N_POSITIONS: usize = 8;
/// 3 shapes x 4 sizes x 8 x positions x 8 y positions.
pub const N_IMAGES: usize = N_SHAPES * N_SIZES * N_POSITIONS * N_POSITIONS;

/// Sprite side lengths indexed by the size factor.
const SIZES: [usize; N_SIZES] = [3, 4, 5, 6];

/// The full factor grid with rendered images.
pub struct FactorGrid {
    /// N_IMAGES x IMAGE_PIXELS, each pixel 0.0 or 1.0, rows in factor
    /// lexicographic order (shape, scale, pos_x, pos_y).
    pub images: Array2<f64>,
    /// N_IMAGES x 4 integer factor values (shape, scale, pos_x, pos_y).
    pub factors: Array2<usize>,
}

/// Factor names in column order of `FactorGrid::factors`.
pub fn factor_names() -> [&'static str; 4] {
    ["shape", "scale", "pos_x", "pos_y"]
}

/// Factor cardinalities in column order of `FactorGrid::factors`.
pub fn factor_cardinalities() -> [usize; 4] {
    [N_SHAPES, N_SIZES, N_POSITIONS, N_POSITIONS]
}

/// Render one sprite into a fresh image. The sprite's bounding box is
/// `s x s` anchored at row 1 + pos_y, column 1 + pos_x, so all 8x8
/// positions keep every size-6 sprite inside the 16x16 frame.
pub fn render(shape: usize, scale: usize, pos_x: usize, pos_y: usize) -> Result<Vec<f64>> {
    if shape >= N_SHAPES || scale >= N_SIZES || pos_x >= N_POSITIONS || pos_y >= N_POSITIONS {
        return Err(Error::InvalidArgument(format!(
            "factor out of range: shape {shape} scale {scale} pos ({pos_x}, {pos_y})"
        )));
    }
    let s = SIZES[scale];
    let (top, left) = (1 + pos_y, 1 + pos_x);
    let mut img = vec![0.0; IMAGE_PIXELS];
    let mut lit = |r: usize, c: usize| img[r * IMAGE_SIDE + c] = 1.0;
    match shape {
        // square: the full s x s block
        0 => {
            for r in 0..s {
                for c in 0..s {
                    lit(top + r, left + c);
                }
            }
        }
        // ellipse: a disc on the block's center with a bulge term that
        // separates it from the square at every size
        1 => {
            let ctr = (s as f64 - 1.0) / 2.0;
            let r2 = ctr * ctr + 0.25 * s as f64 + 1e-9;
            for r in 0..s {
                for c in 0..s {
                    let dr = r as f64 - ctr;
                    let dc = c as f64 - ctr;
                    if dr * dr + dc * dc <= r2 {
                        lit(top + r, left + c);
                    }
                }
            }
        }
        // triangle: lower-left staircase of the block
        _ => {
            for r in 0..s {
                for c in 0..=r {
                    lit(top + r, left + c);
                }
            }
        }
    }
    Ok(img)
}

impl FactorGrid {
    /// Render the exhaustive grid in factor lexicographic order.
    pub fn full() -> Self {
        let mut images = Array2::zeros((N_IMAGES, IMAGE_PIXELS));
        let mut factors = Array2::zeros((N_IMAGES, 4));
        let mut row = 0;
        for shape in 0..N_SHAPES {
            for scale in 0..N_SIZES {
                for pos_x in 0..N_POSITIONS {
                    for pos_y in 0..N_POSITIONS {
                        let img = render(shape, scale, pos_x, pos_y).unwrap();
                        for (j, v) in img.into_iter().enumerate() {
                            images[[row, j]] = v;
                        }
                        factors[[row, 0]] = shape;
                        factors[[row, 1]] = scale;
                        factors[[row, 2]] = pos_x;
                        factors[[row, 3]] = pos_y;
                        row += 1;
                    }
                }
            }
        }
        Self { images, factors }
    }

    pub fn len(&self) -> usize {
        self.images.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Deterministic minibatch index stream: reshuffles [0, N) each
    /// epoch with the given seed, yielding `batch`-sized index chunks.
    pub fn batch_indices(&self, seed: u64, batch: usize) -> Result<BatchIndices> {
        BatchIndices::new(self.len(), seed, batch)
    }

    /// Shuffled-epoch stream of (images, factor values) pairs.
    pub fn batches(&self, seed: u64, batch: usize) -> Result<impl Iterator<Item = (Array2<f64>, Array2<usize>)> + '_> {
        let idx = self.batch_indices(seed, batch)?;
        Ok(idx.map(move |ids| {
            let mut facs = Array2::zeros((ids.len(), 4));
            for (row, &i) in ids.iter().enumerate() {
                facs.row_mut(row).assign(&self.factors.row(i));
            }
            (self.batch(&ids), facs)
        }))
    }

    /// Gather rows into a dense batch matrix.
    pub fn batch(&self, idx: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((idx.len(), IMAGE_PIXELS));
        for (row, &i) in idx.iter().enumerate() {
            out.row_mut(row).assign(&self.images.row(i));
        }
        out
    }

    /// Serialize to a flat little-endian binary file:
    /// magic "FGRD", u32 count, u32 pixel count, u32 factor count,
    /// u32 cardinalities, then factor rows as u8, then images packed
    /// one bit per pixel row-major.
    pub fn export(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(b"FGRD");
        buf.extend_from_slice(&(self.len() as u32).to_le_bytes());
        buf.extend_from_slice(&(IMAGE_PIXELS as u32).to_le_bytes());
        buf.extend_from_slice(&4u32.to_le_bytes());
        for card in factor_cardinalities() {
            buf.extend_from_slice(&(card as u32).to_le_bytes());
        }
        for i in 0..self.len() {
            for f in 0..4 {
                buf.push(self.factors[[i, f]] as u8);
            }
        }
        let mut acc = 0u8;
        let mut nbits = 0;
        for v in self.images.iter() {
            acc = (acc << 1) | (*v > 0.5) as u8;
            nbits += 1;
            if nbits == 8 {
                buf.push(acc);
                acc = 0;
                nbits = 0;
            }
        }
        if nbits > 0 {
            buf.push(acc << (8 - nbits));
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    /// Inverse of [`FactorGrid::export`].
    pub fn import(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut off = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            if off + n > bytes.len() {
                return Err(Error::Checkpoint("factor grid file truncated".into()));
            }
            let s = &bytes[off..off + n];
            off += n;
            Ok(s)
        };
        if take(4)? != b"FGRD" {
            return Err(Error::Checkpoint("bad factor grid magic".into()));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes([s[0], s[1], s[2], s[3]]) as usize;
        let count = u32_at(take(4)?);
        let pixels = u32_at(take(4)?);
        let nfactors = u32_at(take(4)?);
        if pixels != IMAGE_PIXELS || nfactors != 4 {
            return Err(Error::Checkpoint(format!(
                "unsupported grid geometry: {pixels} pixels, {nfactors} factors"
            )));
        }
        let mut cards = [0usize; 4];
        for c in cards.iter_mut() {
            *c = u32_at(take(4)?);
        }
        if cards != factor_cardinalities() {
            return Err(Error::Checkpoint(format!("unexpected cardinalities {cards:?}")));
        }
        let mut factors = Array2::zeros((count, 4));
        let fbytes = take(count * 4)?;
        for i in 0..count {
            for f in 0..4 {
                factors[[i, f]] = fbytes[i * 4 + f] as usize;
            }
        }
        let nbits = count * pixels;
        let packed = take(nbits.div_ceil(8))?;
        let mut images = Array2::zeros((count, pixels));
        for b in 0..nbits {
            if packed[b / 8] >> (7 - b % 8) & 1 == 1 {
                images[[b / pixels, b % pixels]] = 1.0;
            }
        }
        Ok(Self { images, factors })
    }
}

/// Epoch-reshuffling minibatch cursor; see [`FactorGrid::batch_indices`].
pub struct BatchIndices {
    n: usize,
    batch: usize,
    order: Vec<usize>,
    cursor: usize,
    rng: rand_chacha::ChaCha8Rng,
}

impl BatchIndices {
    /// Stream over an arbitrary index range [0, n); usable by any
    /// dataset stored as plain rows.
    pub fn new(n: usize, seed: u64, batch: usize) -> Result<Self> {
        if batch == 0 || batch > n {
            return Err(Error::InvalidArgument(format!(
                "batch size {batch} must be in 1..={n}"
            )));
        }
        Ok(Self { n, batch, order: Vec::new(), cursor: 0, rng: stream(seed, Stream::Batches) })
    }
}

impl Iterator for BatchIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.cursor + self.batch > self.order.len() {
            self.order = (0..self.n).collect();
            shuffle(&mut self.rng, &mut self.order);
            self.cursor = 0;
        }
        let out = self.order[self.cursor..self.cursor + self.batch].to_vec();
        self.cursor += self.batch;
        Some(out)
    }
}

/// Count of lit pixels per image row.
pub fn lit_pixels(images: ArrayView2<f64>) -> Vec<usize> {
    images
        .rows()
        .into_iter()
        .map(|r| r.iter().filter(|&&v| v > 0.5).count())
        .collect()
}
