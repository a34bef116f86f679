//! Dense row-major 2D rasters.

use crate::error::{Error, Result};

/// Dense raster of `T` values, row-major: pixel `(x, y)` lives at index
/// `y * width + x`.
///
/// Coordinate convention used everywhere in this crate: `x` (= `u`) is the
/// column growing rightward, `y` (= `v`) the row growing downward, and the
/// origin is the **center** of the top-left pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> ImageGrid<T> {
    /// Grid of the given dimensions with every pixel set to `value`.
    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![value; width * height],
        })
    }
}

impl<T> ImageGrid<T> {
    /// Wraps an existing row-major buffer; `data.len()` must equal
    /// `width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "grid data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Total pixel count.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index_of(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn coords_of(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    /// Panics on out-of-bounds coordinates.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[self.index_of(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let i = self.index_of(x, y);
        self.data[i] = value;
    }

    #[inline]
    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Iterate pixels as `((x, y), &value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &T)> {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| ((i % w, i / w), v))
    }

    /// Same dimensions as another grid (element types may differ).
    pub fn same_dims<U>(&self, other: &ImageGrid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Element-wise map preserving dimensions.
    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> ImageGrid<U> {
        ImageGrid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!(
            "grid dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_dimensions() {
        assert!(ImageGrid::<u8>::filled(0, 4, 0).is_err());
        assert!(ImageGrid::<u8>::filled(4, 0, 0).is_err());
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(ImageGrid::from_vec(3, 2, vec![0u8; 5]).is_err());
        assert!(ImageGrid::from_vec(3, 2, vec![0u8; 6]).is_ok());
    }

    #[test]
    fn row_major_indexing() {
        let mut g = ImageGrid::filled(4, 3, 0u32).unwrap();
        g.set(2, 1, 7);
        assert_eq!(*g.get(2, 1), 7);
        assert_eq!(g.as_slice()[4 + 2], 7);
        assert_eq!(g.coords_of(g.index_of(2, 1)), (2, 1));
    }

    #[test]
    fn bounds_checks() {
        let g = ImageGrid::filled(4, 3, 0u8).unwrap();
        assert!(g.in_bounds(0, 0));
        assert!(g.in_bounds(3, 2));
        assert!(!g.in_bounds(4, 0));
        assert!(!g.in_bounds(0, 3));
        assert!(!g.in_bounds(-1, 0));
    }
}
