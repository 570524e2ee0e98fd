//! Dense row-major grid storage for maps and per-hypothesis volumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense H×W grid, row-major, indexed as `(row, col)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid2<T> {
    /// Grid of the given shape with every cell set to `value`.
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Grid2 { height, width, data: vec![value; height * width] }
    }

    /// Wrap an existing row-major buffer; `data.len()` must equal `height * width`.
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "buffer of {} elements for a {height}x{width} grid",
                data.len()
            )));
        }
        Ok(Grid2 { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(height, width)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    /// Row-major linear index of `(row, col)`.
    pub fn linear(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    /// Row-major iterator over `((row, col), value)`.
    pub fn enumerate(&self) -> impl Iterator<Item = ((usize, usize), T)> + '_ {
        let w = self.width;
        self.data.iter().enumerate().map(move |(i, &v)| ((i / w, i % w), v))
    }

    /// Element-wise map onto a grid of the same shape.
    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid2<U> {
        Grid2 {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// True when `other` has the same height and width.
    pub fn same_shape<U: Copy>(&self, other: &Grid2<U>) -> bool {
        self.height == other.height && self.width == other.width
    }
}

/// Dense H×W×M volume, row-major with the per-pixel axis innermost,
/// indexed as `(row, col, slot)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid3<T> {
    height: usize,
    width: usize,
    depth: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid3<T> {
    /// Volume of the given shape with every cell set to `value`.
    pub fn filled(height: usize, width: usize, depth: usize, value: T) -> Self {
        Grid3 { height, width, depth, data: vec![value; height * width * depth] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Size of the innermost (per-pixel) axis.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `(height, width, depth)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.depth)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize, slot: usize) -> T {
        self.data[(row * self.width + col) * self.depth + slot]
    }

    pub fn set(&mut self, row: usize, col: usize, slot: usize, value: T) {
        self.data[(row * self.width + col) * self.depth + slot] = value;
    }

    /// The `depth`-long slice belonging to pixel `(row, col)`.
    pub fn ray(&self, row: usize, col: usize) -> &[T] {
        let start = (row * self.width + col) * self.depth;
        &self.data[start..start + self.depth]
    }

    /// Mutable access to the slice belonging to pixel `(row, col)`.
    pub fn ray_mut(&mut self, row: usize, col: usize) -> &mut [T] {
        let start = (row * self.width + col) * self.depth;
        &mut self.data[start..start + self.depth]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Element-wise map onto a volume of the same shape.
    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid3<U> {
        Grid3 {
            height: self.height,
            width: self.width,
            depth: self.depth,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// True when `other` has the same three dimensions.
    pub fn same_shape<U: Copy>(&self, other: &Grid3<U>) -> bool {
        self.height == other.height && self.width == other.width && self.depth == other.depth
    }
}
