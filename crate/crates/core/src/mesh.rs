//! Finite dyadic geometry on the unit cube `[0,1)^d` and piecewise-constant
//! functions on it.
//!
//! A [`DyadicMesh`] of depth `L` carries `2^{dL}` finest cells stored in
//! lexicographic order (first coordinate major). Every dyadic subcube of the
//! unit cube with level `0..=L` is a [`DyadicCube`]; cubes are enumerated
//! level-major, then lexicographically by corner.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::{Deref, Range};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported `d * L`; keeps cell arrays within a few hundred MB.
pub const MAX_LOG2_CELLS: u32 = 24;

/// Finite dyadic partition of `[0,1)^d` at level `depth`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicMesh {
    dim: u32,
    depth: u32,
}

impl DyadicMesh {
    pub fn new(dim: u32, depth: u32) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if depth == 0 {
            return Err(Error::InvalidMesh("depth must be positive".into()));
        }
        if dim * depth > MAX_LOG2_CELLS {
            return Err(Error::InvalidMesh(format!(
                "d*L = {} exceeds the supported maximum {MAX_LOG2_CELLS}",
                dim * depth
            )));
        }
        Ok(Self { dim, depth })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Number of finest cells, `2^{dL}`.
    pub fn cell_count(&self) -> usize {
        1usize << (self.dim * self.depth)
    }

    pub fn cells_per_side(&self) -> usize {
        1usize << self.depth
    }

    /// Lebesgue measure of one finest cell, `2^{-dL}`.
    pub fn cell_volume(&self) -> f64 {
        (-((self.dim * self.depth) as f64)).exp2()
    }

    pub fn cubes_at_level(&self, level: u32) -> usize {
        1usize << (self.dim * level)
    }

    /// Total number of dyadic cubes of levels `0..=L`.
    pub fn cube_count(&self) -> usize {
        (0..=self.depth).map(|j| self.cubes_at_level(j)).sum()
    }

    /// Offset of the first cube of `level` in level-major enumeration.
    pub fn level_offset(&self, level: u32) -> usize {
        (0..level).map(|j| self.cubes_at_level(j)).sum()
    }

    pub fn unit_cube(&self) -> DyadicCube {
        DyadicCube {
            level: 0,
            corner: [0, 0],
            dim: self.dim,
        }
    }

    /// The cube with the given in-level index (lexicographic corner order).
    pub fn cube_at(&self, level: u32, index: usize) -> DyadicCube {
        debug_assert!(level <= self.depth);
        debug_assert!(index < self.cubes_at_level(level));
        let corner = if self.dim == 1 {
            [index as u32, 0]
        } else {
            let w = 1usize << level;
            [(index / w) as u32, (index % w) as u32]
        };
        DyadicCube {
            level,
            corner,
            dim: self.dim,
        }
    }

    /// All cubes of one level, lexicographic.
    pub fn cubes_at(&self, level: u32) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..self.cubes_at_level(level)).map(move |i| self.cube_at(level, i))
    }

    /// All cubes of levels `0..=L`, level-major then lexicographic.
    pub fn cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..=self.depth).flat_map(move |j| self.cubes_at(j))
    }

    /// Global position of `q` in [`DyadicMesh::cubes`] order.
    pub fn cube_id(&self, q: &DyadicCube) -> usize {
        self.level_offset(q.level) + q.index_in_level()
    }

    pub fn cube_from_id(&self, mut id: usize) -> DyadicCube {
        for j in 0..=self.depth {
            let n = self.cubes_at_level(j);
            if id < n {
                return self.cube_at(j, id);
            }
            id -= n;
        }
        panic!("cube id out of range");
    }

    pub fn contains_cube(&self, q: &DyadicCube) -> bool {
        if q.dim != self.dim || q.level > self.depth {
            return false;
        }
        let side = 1u64 << q.level;
        (q.corner[0] as u64) < side
            && if self.dim == 1 {
                q.corner[1] == 0
            } else {
                (q.corner[1] as u64) < side
            }
    }

    pub(crate) fn check_cube(&self, q: &DyadicCube) -> Result<()> {
        if self.contains_cube(q) {
            Ok(())
        } else {
            Err(Error::ForeignCube(format!(
                "{q} on a mesh with d={} L={}",
                self.dim, self.depth
            )))
        }
    }

    /// The `2^d` children of `q`, lexicographic.
    pub fn children(&self, q: &DyadicCube) -> Result<Vec<DyadicCube>> {
        self.check_cube(q)?;
        if q.level >= self.depth {
            return Err(Error::NoChildren {
                level: q.level,
                depth: self.depth,
            });
        }
        Ok(q.children().collect())
    }

    /// The `i`-th dyadic parent of `q`; `parent_i(q, 0) == q`.
    pub fn parent_i(&self, q: &DyadicCube, i: u32) -> Result<DyadicCube> {
        self.check_cube(q)?;
        q.ancestor(i).ok_or(Error::OutOfGrid {
            level: q.level,
            steps: i,
        })
    }

    /// The finest cube occupying cell `index`.
    pub fn cell_cube(&self, index: usize) -> DyadicCube {
        self.cube_at(self.depth, index)
    }

    /// Midpoint of cell `index`; the second coordinate is 0 for `d = 1`.
    pub fn cell_center(&self, index: usize) -> [f64; 2] {
        let h = 1.0 / self.cells_per_side() as f64;
        let c = self.cell_cube(index).corner;
        [(c[0] as f64 + 0.5) * h, (c[1] as f64 + 0.5) * h]
    }

    /// Number of finest cells inside `q`.
    pub fn cells_in(&self, q: &DyadicCube) -> usize {
        1usize << (self.dim * (self.depth - q.level))
    }

    /// Contiguous runs of finest-cell indices covering `q`. One run in
    /// `d = 1`, one run per row in `d = 2`.
    pub fn cell_rows(&self, q: &DyadicCube) -> impl Iterator<Item = Range<usize>> {
        let s = 1usize << (self.depth - q.level);
        let side = self.cells_per_side();
        let (rows, start_row, col) = if self.dim == 1 {
            (1, 0, q.corner[0] as usize * s)
        } else {
            (s, q.corner[0] as usize * s, q.corner[1] as usize * s)
        };
        (0..rows).map(move |r| {
            let start = (start_row + r) * side + col;
            start..start + s
        })
    }

    /// Indices of all finest cells inside `q`.
    pub fn cells(&self, q: &DyadicCube) -> impl Iterator<Item = usize> {
        self.cell_rows(q).flatten()
    }

    /// In-level index of the parent of the cube with in-level index `index`
    /// at `level >= 1`.
    pub(crate) fn parent_index(&self, level: u32, index: usize) -> usize {
        if self.dim == 1 {
            index >> 1
        } else {
            let w = 1usize << level;
            let (r, c) = (index / w, index % w);
            (r >> 1) * (w >> 1) + (c >> 1)
        }
    }
}

/// A dyadic subcube `2^{-j}(k + [0,1)^d)` of the unit cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    level: u32,
    corner: [u32; 2],
    dim: u32,
}

impl DyadicCube {
    pub fn new(dim: u32, level: u32, corner: [u32; 2]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if level > 31 {
            return Err(Error::ForeignCube(format!("level {level} is too deep")));
        }
        let side = 1u64 << level;
        let used = if dim == 1 { 1 } else { 2 };
        if corner[..used].iter().any(|&k| u64::from(k) >= side) {
            return Err(Error::ForeignCube(format!(
                "corner {corner:?} outside level {level}"
            )));
        }
        if dim == 1 && corner[1] != 0 {
            return Err(Error::ForeignCube("d = 1 cube with nonzero second corner".into()));
        }
        Ok(Self { level, corner, dim })
    }

    /// Interval `[k 2^{-j}, (k+1) 2^{-j})` in one dimension.
    pub fn interval(level: u32, k: u32) -> Result<Self> {
        Self::new(1, level, [k, 0])
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn corner(&self) -> [u32; 2] {
        self.corner
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// Side length `l(Q) = 2^{-j}`.
    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Lebesgue measure `|Q| = 2^{-jd}`.
    pub fn volume(&self) -> f64 {
        (-((self.level * self.dim) as f64)).exp2()
    }

    pub fn index_in_level(&self) -> usize {
        if self.dim == 1 {
            self.corner[0] as usize
        } else {
            ((self.corner[0] as usize) << self.level) + self.corner[1] as usize
        }
    }

    pub fn parent(&self) -> Option<Self> {
        self.ancestor(1)
    }

    pub fn ancestor(&self, steps: u32) -> Option<Self> {
        if steps > self.level {
            return None;
        }
        Some(Self {
            level: self.level - steps,
            corner: [self.corner[0] >> steps, self.corner[1] >> steps],
            dim: self.dim,
        })
    }

    /// Children one level down (no depth check).
    pub fn children(&self) -> impl Iterator<Item = DyadicCube> {
        let me = *self;
        let count = if me.dim == 1 { 2u32 } else { 4 };
        (0..count).map(move |b| {
            let (b0, b1) = if me.dim == 1 { (b, 0) } else { (b >> 1, b & 1) };
            DyadicCube {
                level: me.level + 1,
                corner: [2 * me.corner[0] + b0, 2 * me.corner[1] + b1],
                dim: me.dim,
            }
        })
    }

    /// Descendants exactly `depth` levels below, lexicographic.
    pub fn descendants_at(&self, depth: u32) -> impl Iterator<Item = DyadicCube> {
        let me = *self;
        let per_side = 1u32 << depth;
        let count = if me.dim == 1 { per_side } else { per_side * per_side };
        (0..count).map(move |b| {
            let (b0, b1) = if me.dim == 1 {
                (b, 0)
            } else {
                (b / per_side, b % per_side)
            };
            DyadicCube {
                level: me.level + depth,
                corner: [
                    (me.corner[0] << depth) + b0,
                    if me.dim == 1 { 0 } else { (me.corner[1] << depth) + b1 },
                ],
                dim: me.dim,
            }
        })
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.dim == self.dim
            && other.level >= self.level
            && other.ancestor(other.level - self.level).as_ref() == Some(self)
    }

    /// Lower-left corner in `[0,1)^d`.
    pub fn origin(&self) -> [f64; 2] {
        let h = self.side();
        [self.corner[0] as f64 * h, self.corner[1] as f64 * h]
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.side();
        let o = self.origin();
        if self.dim == 1 {
            write!(f, "[{}, {})", o[0], o[0] + h)
        } else {
            write!(
                f,
                "[{}, {})x[{}, {})",
                o[0],
                o[0] + h,
                o[1],
                o[1] + h
            )
        }
    }
}

/// Per-level cube data, one array per level `0..=L` indexed by in-level
/// cube index.
#[derive(Clone, Debug, PartialEq)]
pub struct Pyramid {
    mesh: DyadicMesh,
    levels: Vec<Vec<f64>>,
}

impl Pyramid {
    /// Cube sums `Σ_{cells in Q} values[cell]` for every cube, bottom-up.
    pub fn sums(mesh: DyadicMesh, values: &[f64]) -> Self {
        assert_eq!(values.len(), mesh.cell_count());
        let depth = mesh.depth() as usize;
        let mut levels = vec![Vec::new(); depth + 1];
        levels[depth] = values.to_vec();
        for j in (0..depth).rev() {
            let mut acc = vec![0.0; mesh.cubes_at_level(j as u32)];
            for (idx, v) in levels[j + 1].iter().enumerate() {
                acc[mesh.parent_index(j as u32 + 1, idx)] += v;
            }
            levels[j] = acc;
        }
        Self { mesh, levels }
    }

    /// Cube averages of `values`.
    pub fn averages(mesh: DyadicMesh, values: &[f64]) -> Self {
        let mut p = Self::sums(mesh, values);
        for (j, level) in p.levels.iter_mut().enumerate() {
            let n = mesh.cells_in(&mesh.cube_at(j as u32, 0)) as f64;
            level.iter_mut().for_each(|v| *v /= n);
        }
        p
    }

    pub fn from_levels(mesh: DyadicMesh, levels: Vec<Vec<f64>>) -> Self {
        assert_eq!(levels.len(), mesh.depth() as usize + 1);
        Self { mesh, levels }
    }

    pub fn mesh(&self) -> DyadicMesh {
        self.mesh
    }

    pub fn level(&self, j: u32) -> &[f64] {
        &self.levels[j as usize]
    }

    pub fn get(&self, q: &DyadicCube) -> f64 {
        self.levels[q.level as usize][q.index_in_level()]
    }

    /// Fold each finest cell's chain of ancestors top-down:
    /// `acc_0 = level_0`, `acc_j = combine(acc_{j-1}[parent], level_j)`.
    pub fn descend(&self, combine: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut acc = self.levels[0].clone();
        for j in 1..self.levels.len() {
            let level = &self.levels[j];
            let next: Vec<f64> = level
                .iter()
                .enumerate()
                .map(|(idx, &v)| combine(acc[self.mesh.parent_index(j as u32, idx)], v))
                .collect();
            acc = next;
        }
        acc
    }
}

/// A real value per finest cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    mesh: DyadicMesh,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: DyadicMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.cell_count() {
            return Err(Error::MeshMismatch(format!(
                "expected {} cell values, got {}",
                mesh.cell_count(),
                values.len()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn constant(mesh: DyadicMesh, c: f64) -> Self {
        Self {
            mesh,
            values: vec![c; mesh.cell_count()],
        }
    }

    pub fn zeros(mesh: DyadicMesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    /// Sample `f` at cell centers.
    pub fn from_fn(mesh: DyadicMesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..mesh.cell_count()).map(|i| f(mesh.cell_center(i))).collect();
        Self { mesh, values }
    }

    pub fn indicator(mesh: DyadicMesh, q: &DyadicCube) -> Self {
        let mut g = Self::zeros(mesh);
        for r in mesh.cell_rows(q) {
            g.values[r].iter_mut().for_each(|v| *v = 1.0);
        }
        g
    }

    pub fn mesh(&self) -> DyadicMesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `∫_{[0,1)^d} f dx`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.mesh.cell_volume()
    }

    /// `Σ_{cells in Q} f(cell)`.
    pub fn cell_sum(&self, q: &DyadicCube) -> f64 {
        self.mesh
            .cell_rows(q)
            .map(|r| self.values[r].iter().sum::<f64>())
            .sum()
    }

    /// `⟨f⟩_Q = |Q|^{-1} ∫_Q f`.
    pub fn average(&self, q: &DyadicCube) -> f64 {
        self.cell_sum(q) / self.mesh.cells_in(q) as f64
    }

    /// Values of the cells inside `q`.
    pub fn cell_values(&self, q: &DyadicCube) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.mesh.cells_in(q));
        for r in self.mesh.cell_rows(q) {
            out.extend_from_slice(&self.values[r]);
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            mesh: self.mesh,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        ensure_same_mesh(self, other)?;
        Ok(Self {
            mesh: self.mesh,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridFunction) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    /// `χ_Q f`.
    pub fn restrict(&self, q: &DyadicCube) -> Self {
        let mut g = Self::zeros(self.mesh);
        for r in self.mesh.cell_rows(q) {
            g.values[r.clone()].copy_from_slice(&self.values[r]);
        }
        g
    }

    /// `∫ f g dx`.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        ensure_same_mesh(self, other)?;
        Ok(dot(&self.values, &other.values) * self.mesh.cell_volume())
    }

    /// `(∫ |f|^p dx)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.mesh.cell_volume()).powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sums(&self) -> Pyramid {
        Pyramid::sums(self.mesh, &self.values)
    }

    pub fn averages(&self) -> Pyramid {
        Pyramid::averages(self.mesh, &self.values)
    }

    /// Parse the `dyadic-grid d=<d> L=<L>` text format.
    pub fn read_from(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (mesh, header_line) = loop {
            match lines.next() {
                None => {
                    return Err(Error::Parse {
                        line: 1,
                        message: "missing `dyadic-grid` header".into(),
                    })
                }
                Some((i, line)) => {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break (parse_header(&line, i + 1)?, i + 1);
                }
            }
        };
        let expected = mesh.cell_count();
        let mut values = Vec::with_capacity(expected);
        let mut last_line = header_line;
        for (i, line) in lines {
            let line = line?;
            let t = line.trim();
            last_line = i + 1;
            if t.is_empty() {
                continue;
            }
            if values.len() == expected {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("more than {expected} values for d={} L={}", mesh.dim(), mesh.depth()),
                });
            }
            let v: f64 = t.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("`{t}` is not a decimal value"),
            })?;
            values.push(v);
        }
        if values.len() != expected {
            return Err(Error::Parse {
                line: last_line,
                message: format!("expected {expected} values, found {}", values.len()),
            });
        }
        Ok(Self { mesh, values })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "dyadic-grid d={} L={}", self.mesh.dim(), self.mesh.depth())?;
        for v in &self.values {
            writeln!(w, "{v:?}")?;
        }
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn parse_header(line: &str, line_no: usize) -> Result<DyadicMesh> {
    let bad = |m: &str| Error::Parse {
        line: line_no,
        message: m.to_string(),
    };
    let mut parts = line.split_whitespace();
    if parts.next() != Some("dyadic-grid") {
        return Err(bad("expected header `dyadic-grid d=<d> L=<L>`"));
    }
    let (mut d, mut l) = (None, None);
    for part in parts {
        match part.split_once('=') {
            Some(("d", v)) => d = v.parse::<u32>().ok(),
            Some(("L", v)) => l = v.parse::<u32>().ok(),
            _ => return Err(bad(&format!("unexpected header field `{part}`"))),
        }
    }
    match (d, l) {
        (Some(d), Some(l)) => DyadicMesh::new(d, l).map_err(|e| bad(&e.to_string())),
        _ => Err(bad("header must set both d and L")),
    }
}

pub(crate) fn ensure_same_mesh(a: &GridFunction, b: &GridFunction) -> Result<()> {
    if a.mesh != b.mesh {
        return Err(Error::MeshMismatch(format!(
            "d={} L={} vs d={} L={}",
            a.mesh.dim(),
            a.mesh.depth(),
            b.mesh.dim(),
            b.mesh.depth()
        )));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A strictly positive, finite grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight(GridFunction);

impl Weight {
    pub fn new(f: GridFunction) -> Result<Self> {
        if let Some((index, &value)) = f
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidWeight { index, value });
        }
        Ok(Self(f))
    }

    pub fn constant(mesh: DyadicMesh, c: f64) -> Result<Self> {
        Self::new(GridFunction::constant(mesh, c))
    }

    /// `w(Q) = ∫_Q w dx`.
    pub fn measure(&self, q: &DyadicCube) -> f64 {
        self.0.cell_sum(q) * self.0.mesh.cell_volume()
    }

    pub fn as_function(&self) -> &GridFunction {
        &self.0
    }

    pub fn into_inner(self) -> GridFunction {
        self.0
    }

    /// `w^e`, still a weight.
    pub fn powf(&self, e: f64) -> Weight {
        Weight(self.0.map(|v| v.powf(e)))
    }

    pub fn scaled(&self, c: f64) -> Result<Weight> {
        Weight::new(self.0.scale(c))
    }
}

impl Deref for Weight {
    type Target = GridFunction;
    fn deref(&self) -> &GridFunction {
        &self.0
    }
}

/// `w(Q) = ∫_Q w dx`, rejecting non-positive cells inside `Q`.
pub fn weighted_measure(w: &GridFunction, q: &DyadicCube) -> Result<f64> {
    w.mesh.check_cube(q)?;
    for index in w.mesh.cells(q) {
        let value = w.values[index];
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidWeight { index, value });
        }
    }
    Ok(w.cell_sum(q) * w.mesh.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh1(l: u32) -> DyadicMesh {
        DyadicMesh::new(1, l).unwrap()
    }

    #[test]
    fn children_of_unit_interval_bisect() {
        let m = mesh1(3);
        let kids = m.children(&m.unit_cube()).unwrap();
        assert_eq!(
            kids,
            vec![
                DyadicCube::interval(1, 0).unwrap(),
                DyadicCube::interval(1, 1).unwrap()
            ]
        );
        assert_eq!(kids[1].origin()[0], 0.5);
    }

    #[test]
    fn children_of_unit_square_are_quadrants() {
        let m = DyadicMesh::new(2, 2).unwrap();
        let kids = m.children(&m.unit_cube()).unwrap();
        let corners: Vec<_> = kids.iter().map(|q| q.corner()).collect();
        assert_eq!(corners, vec![[0, 0], [0, 1], [1, 0], [1, 1]]);
        assert!(kids.iter().all(|q| q.volume() == 0.25));
    }

    #[test]
    fn finest_cube_has_no_children() {
        let m = mesh1(3);
        let q = m.cell_cube(5);
        assert!(matches!(m.children(&q), Err(Error::NoChildren { level: 3, depth: 3 })));
    }

    #[test]
    fn parent_examples() {
        let m = mesh1(4);
        let q = DyadicCube::interval(2, 1).unwrap(); // [1/4, 1/2)
        assert_eq!(m.parent_i(&q, 1).unwrap(), DyadicCube::interval(1, 0).unwrap());
        assert_eq!(m.parent_i(&q, 0).unwrap(), q);
        let r = DyadicCube::interval(3, 3).unwrap(); // [3/8, 1/2)
        // brute-force walk: find the level-1 interval containing 3/8
        let x = r.origin()[0];
        let expected = (0..2u32)
            .map(|k| DyadicCube::interval(1, k).unwrap())
            .find(|c| c.origin()[0] <= x && x < c.origin()[0] + c.side())
            .unwrap();
        assert_eq!(m.parent_i(&r, 2).unwrap(), expected);
        assert!(matches!(m.parent_i(&r, 4), Err(Error::OutOfGrid { .. })));
    }

    #[test]
    fn cube_enumeration_is_level_major_and_ids_roundtrip() {
        let m = DyadicMesh::new(2, 3).unwrap();
        let cubes: Vec<_> = m.cubes().collect();
        assert_eq!(cubes.len(), m.cube_count());
        assert!(cubes.windows(2).all(|w| w[0] < w[1]));
        for (id, q) in cubes.iter().enumerate() {
            assert_eq!(m.cube_id(q), id);
            assert_eq!(m.cube_from_id(id), *q);
        }
    }

    #[test]
    fn cells_tile_the_cube() {
        let m = DyadicMesh::new(2, 3).unwrap();
        for q in m.cubes() {
            let cells: Vec<_> = m.cells(&q).collect();
            assert_eq!(cells.len(), m.cells_in(&q));
            for c in cells {
                assert!(q.contains(&m.cell_cube(c)));
            }
        }
        let total: usize = m.cubes_at(2).map(|q| m.cells_in(&q)).sum();
        assert_eq!(total, m.cell_count());
    }

    #[test]
    fn average_examples() {
        let m = mesh1(4);
        let half = DyadicCube::interval(1, 0).unwrap();
        let f = GridFunction::indicator(m, &half);
        assert_eq!(f.average(&m.unit_cube()), 0.5);
        let c = GridFunction::constant(m, 3.25);
        assert!(m.cubes().all(|q| c.average(&q) == 3.25));
    }

    #[test]
    fn weighted_measure_examples() {
        let m = mesh1(4);
        let one = GridFunction::constant(m, 1.0);
        let q = DyadicCube::interval(2, 3).unwrap();
        assert_eq!(weighted_measure(&one, &q).unwrap(), q.volume());
        let two = GridFunction::constant(m, 2.0);
        assert_eq!(weighted_measure(&two, &DyadicCube::interval(1, 0).unwrap()).unwrap(), 1.0);
        let mut bad = one.clone();
        bad.values_mut()[3] = 0.0;
        assert!(matches!(
            weighted_measure(&bad, &m.unit_cube()),
            Err(Error::InvalidWeight { index: 3, .. })
        ));
        // the bad cell is outside [1/2, 1)
        assert!(weighted_measure(&bad, &DyadicCube::interval(1, 1).unwrap()).is_ok());
    }

    #[test]
    fn pyramid_descend_max_matches_brute_force() {
        let m = DyadicMesh::new(2, 3).unwrap();
        let f = GridFunction::from_fn(m, |x| (7.0 * x[0] + 3.0 * x[1]).sin());
        let avg = f.averages();
        let best = avg.descend(f64::max);
        for (cell, &b) in best.iter().enumerate() {
            let cube = m.cell_cube(cell);
            let brute = (0..=3)
                .map(|i| f.average(&cube.ancestor(i).unwrap()))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((b - brute).abs() <= 1e-13 * brute.abs().max(1.0));
        }
    }

    #[test]
    fn file_format_roundtrip_and_rejections() {
        let m = DyadicMesh::new(2, 2).unwrap();
        let f = GridFunction::from_fn(m, |x| 1.0 / 3.0 + x[0] * 1e-300 + x[1]);
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("dyadic-grid d=2 L=2\n"));
        let g = GridFunction::read_from(&buf[..]).unwrap();
        assert_eq!(f, g);

        let short = "dyadic-grid d=1 L=2\n1\n2\n3\n";
        assert!(matches!(
            GridFunction::read_from(short.as_bytes()),
            Err(Error::Parse { .. })
        ));
        let long = "dyadic-grid d=1 L=1\n1\n2\n3\n";
        assert!(matches!(
            GridFunction::read_from(long.as_bytes()),
            Err(Error::Parse { line: 4, .. })
        ));
        let junk = "dyadic-grid d=1 L=1\n1\nabc\n";
        assert!(matches!(
            GridFunction::read_from(junk.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(GridFunction::read_from("grid d=1 L=1\n1\n2\n".as_bytes()).is_err());
    }

    #[test]
    fn weight_rejects_nonpositive() {
        let m = mesh1(2);
        assert!(Weight::new(GridFunction::new(m, vec![1.0, 2.0, -1.0, 1.0]).unwrap()).is_err());
        assert!(Weight::new(GridFunction::new(m, vec![1.0, f64::NAN, 1.0, 1.0]).unwrap()).is_err());
        assert!(Weight::constant(m, 0.5).is_ok());
    }
}
