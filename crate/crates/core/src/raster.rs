//! Grid types shared by every stage of the pipeline: confidence maps, binary
//! edge maps, pixel coordinates, thresholding, the 5×5 box blur and tiling.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Zero-based pixel position. `x` is the column, `y` the row.
///
/// Ordering is row-major (by `y`, then `x`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

impl PixelCoord {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

impl Ord for PixelCoord {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for PixelCoord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<(usize, usize)> for PixelCoord {
    fn from((x, y): (usize, usize)) -> Self {
        Self { x, y }
    }
}

/// L1 distance between two pixels.
pub fn manhattan(a: PixelCoord, b: PixelCoord) -> usize {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

pub fn euclidean(a: PixelCoord, b: PixelCoord) -> f64 {
    let dx = a.x.abs_diff(b.x) as f64;
    let dy = a.y.abs_diff(b.y) as f64;
    dx.hypot(dy)
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "map dimensions must be positive, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::invalid(format!(
            "{len} values do not fill a {width}x{height} map"
        )));
    }
    Ok(())
}

/// Row-major grid of edge confidences in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ConfidenceMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Validation(format!(
                "confidence {v} at index {i} is outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// # Panics
    /// If either dimension is zero or `value` is outside `[0, 1]`.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "map dimensions must be positive");
        assert!((0.0..=1.0).contains(&value), "confidence outside [0, 1]");
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    /// Builds a map from single-precision values, e.g. a framework tensor.
    pub fn from_f32(width: usize, height: usize, values: &[f32]) -> Result<Self> {
        Self::new(
            width,
            height,
            values.iter().map(|&v| f64::from(v)).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn at(&self, p: PixelCoord) -> f64 {
        self.get(p.x, p.y)
    }

    /// # Panics
    /// If `value` is outside `[0, 1]`.
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        assert!((0.0..=1.0).contains(&value), "confidence outside [0, 1]");
        self.values[y * self.width + x] = value;
    }

    /// Multiplies every confidence by `factor` (clamped into `[0, 1]`).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self
                .values
                .iter()
                .map(|v| (v * factor).clamp(0.0, 1.0))
                .collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Crate-internal constructor for values already known to be in range.
    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(width * height, values.len());
        debug_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            width,
            height,
            values,
        }
    }
}

/// Row-major grid of edge / non-edge bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMap {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMap {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height, bits.len())?;
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// Builds a map from bytes where any nonzero byte is an edge.
    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| b != 0).collect())
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn empty(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "map dimensions must be positive");
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    /// Map with exactly the listed pixels set.
    ///
    /// # Panics
    /// If a pixel lies outside the map.
    pub fn from_pixels(width: usize, height: usize, pixels: &[PixelCoord]) -> Self {
        let mut map = Self::empty(width, height);
        for &p in pixels {
            assert!(p.x < width && p.y < height, "pixel {p:?} out of bounds");
            map.set(p.x, p.y, true);
        }
        map
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn at(&self, p: PixelCoord) -> bool {
        self.get(p.x, p.y)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Set pixels in row-major order.
    pub fn ones(&self) -> Vec<PixelCoord> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| PixelCoord::new(i % self.width, i / self.width))
            .collect()
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMap) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// `1.0` on set pixels, `0.0` elsewhere.
    pub fn to_confidence(&self) -> ConfidenceMap {
        ConfidenceMap::from_raw(
            self.width,
            self.height,
            self.bits
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        )
    }
}

/// Binarizes `map` with the inclusive rule `value >= t`.
pub fn threshold(map: &ConfidenceMap, t: f64) -> Result<BinaryMap> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("threshold {t} is outside [0, 1]")));
    }
    Ok(BinaryMap {
        width: map.width,
        height: map.height,
        bits: map.values.iter().map(|&v| v >= t).collect(),
    })
}

/// Mean over the 5×5 neighbourhood of each pixel, averaging only the samples
/// that fall inside the map.
pub fn box_blur5(map: &ConfidenceMap) -> ConfidenceMap {
    const RADIUS: usize = 2;
    let (w, h) = map.dims();

    // Summed-area table with a zero first row and column.
    let stride = w + 1;
    let mut integral = vec![0.0f64; stride * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += map.get(x, y);
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
        }
    }

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let y0 = y.saturating_sub(RADIUS);
        let y1 = (y + RADIUS + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(RADIUS);
            let x1 = (x + RADIUS + 1).min(w);
            let sum = integral[y1 * stride + x1]
                - integral[y0 * stride + x1]
                - integral[y1 * stride + x0]
                + integral[y0 * stride + x0];
            let n = ((x1 - x0) * (y1 - y0)) as f64;
            out.push((sum / n).clamp(0.0, 1.0));
        }
    }
    ConfidenceMap::from_raw(w, h, out)
}

/// One rectangle of a [`TileLayout`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// Non-overlapping rectangles exactly covering a parent map, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileLayout {
    rows: usize,
    cols: usize,
    width: usize,
    height: usize,
    tiles: Vec<TileRect>,
}

/// Splits `len` into `parts` contiguous spans whose sizes differ by at most one.
fn split_axis(len: usize, parts: usize) -> Vec<(usize, usize)> {
    (0..parts)
        .map(|i| {
            let start = i * len / parts;
            let end = (i + 1) * len / parts;
            (start, end - start)
        })
        .collect()
}

impl TileLayout {
    pub fn new(width: usize, height: usize, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("tile rows and cols must be at least 1"));
        }
        if rows > height || cols > width {
            return Err(Error::invalid(format!(
                "cannot split a {width}x{height} map into {rows}x{cols} tiles"
            )));
        }
        let ys = split_axis(height, rows);
        let xs = split_axis(width, cols);
        let tiles = ys
            .iter()
            .flat_map(|&(y, th)| {
                xs.iter().map(move |&(x, tw)| TileRect {
                    x,
                    y,
                    width: tw,
                    height: th,
                })
            })
            .collect();
        Ok(Self {
            rows,
            cols,
            width,
            height,
            tiles,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tiles(&self) -> &[TileRect] {
        &self.tiles
    }

    pub fn parent_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Maps that can be cut into tiles and put back together.
pub trait Tileable: Sized {
    fn dims(&self) -> (usize, usize);
    fn crop(&self, rect: TileRect) -> Self;
    fn paste(&mut self, rect: TileRect, tile: &Self);
    fn blank(width: usize, height: usize) -> Self;
}

macro_rules! impl_tileable {
    ($ty:ident, $field:ident, $zero:expr) => {
        impl Tileable for $ty {
            fn dims(&self) -> (usize, usize) {
                (self.width, self.height)
            }

            fn crop(&self, r: TileRect) -> Self {
                let mut $field = Vec::with_capacity(r.width * r.height);
                for y in r.y..r.y + r.height {
                    let start = y * self.width + r.x;
                    $field.extend_from_slice(&self.$field[start..start + r.width]);
                }
                Self {
                    width: r.width,
                    height: r.height,
                    $field,
                }
            }

            fn paste(&mut self, r: TileRect, tile: &Self) {
                debug_assert_eq!((tile.width, tile.height), (r.width, r.height));
                for row in 0..r.height {
                    let dst = (r.y + row) * self.width + r.x;
                    let src = row * tile.width;
                    self.$field[dst..dst + r.width]
                        .copy_from_slice(&tile.$field[src..src + r.width]);
                }
            }

            fn blank(width: usize, height: usize) -> Self {
                Self {
                    width,
                    height,
                    $field: vec![$zero; width * height],
                }
            }
        }
    };
}

impl_tileable!(ConfidenceMap, values, 0.0);
impl_tileable!(BinaryMap, bits, false);

/// Cuts `map` into `rows × cols` tiles using floor/ceil splits on each axis.
pub fn tile<M: Tileable>(map: &M, rows: usize, cols: usize) -> Result<(TileLayout, Vec<M>)> {
    let (w, h) = map.dims();
    let layout = TileLayout::new(w, h, rows, cols)?;
    let tiles = layout.tiles.iter().map(|&r| map.crop(r)).collect();
    Ok((layout, tiles))
}

/// Reassembles tiles produced against `layout`.
pub fn merge<M: Tileable>(layout: &TileLayout, tiles: &[M]) -> Result<M> {
    if tiles.len() != layout.tiles.len() {
        return Err(Error::invalid(format!(
            "layout has {} tiles but {} were supplied",
            layout.tiles.len(),
            tiles.len()
        )));
    }
    let mut out = M::blank(layout.width, layout.height);
    for (rect, tile) in layout.tiles.iter().zip(tiles) {
        if tile.dims() != (rect.width, rect.height) {
            return Err(Error::invalid(format!(
                "tile is {:?} but its slot is {}x{}",
                tile.dims(),
                rect.width,
                rect.height
            )));
        }
        out.paste(*rect, tile);
    }
    Ok(out)
}
