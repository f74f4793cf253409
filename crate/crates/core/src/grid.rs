use serde::{Deserialize, Serialize};

/// Dense row-major rows×cols matrix indexed by taxel position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone + Default> Grid<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }
}

impl<T> Grid<T> {
    /// Wraps row-major data. Panics when the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "grid data length mismatch");
        Grid { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.cols + col]
    }

    #[inline]
    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut T {
        &mut self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn iter_indexed(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let cols = self.cols;
        self.data
            .iter()
            .enumerate()
            .map(move |(k, v)| (k / cols, k % cols, v))
    }
}

/// Binary taxel map, entries 0 or 1.
pub type BinaryMap = Grid<u8>;

impl Grid<u8> {
    pub fn count_active(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Active cells of `self` are all active in `other`.
    pub fn is_subset_of(&self, other: &Grid<u8>) -> bool {
        self.data
            .iter()
            .zip(&other.data)
            .all(|(&a, &b)| a == 0 || b != 0)
    }

    /// '#' for active, '.' for inactive, one text line per row.
    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity(self.rows * (self.cols + 1));
        for row in self.data.chunks(self.cols) {
            out.extend(row.iter().map(|&v| if v != 0 { '#' } else { '.' }));
            out.push('\n');
        }
        out
    }

    /// Comma-separated 0/1 rows, LF newlines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.data.chunks(self.cols) {
            let line: Vec<&str> = row
                .iter()
                .map(|&v| if v != 0 { "1" } else { "0" })
                .collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Intersection over union of two binary maps. Two empty maps score 1.
pub fn iou(a: &BinaryMap, b: &BinaryMap) -> f64 {
    assert_eq!(a.len(), b.len(), "iou: map size mismatch");
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        let (x, y) = (x != 0, y != 0);
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}
