//! Periodic lattice geometry: sites, squares, balls and box partitions.
//!
//! Coordinates are `[x, y]`; in one dimension `y` is always 0. Site indices
//! are row-major with `x` varying fastest, so `index = x + L * y`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `D`-dimensional periodic lattice of side `L` (`D` is 1 or 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Torus {
    dim: usize,
    side: usize,
}

impl Torus {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::invalid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if side == 0 {
            return Err(Error::invalid("side length must be positive"));
        }
        Ok(Torus { dim, side })
    }

    /// Build from a list of side lengths; all sides must be equal.
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        match dims {
            [l] => Torus::new(1, *l),
            [a, b] if a == b => Torus::new(2, *a),
            [_, _] => Err(Error::invalid("only square tori are supported")),
            _ => Err(Error::invalid(format!("expected 1 or 2 dims, got {}", dims.len()))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dims(&self) -> Vec<usize> {
        vec![self.side; self.dim]
    }

    pub fn site_count(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    fn extent(&self, axis: usize) -> usize {
        if axis < self.dim {
            self.side
        } else {
            1
        }
    }

    pub fn wrap(&self, axis: usize, c: i64) -> usize {
        let l = self.extent(axis) as i64;
        c.rem_euclid(l) as usize
    }

    pub fn index(&self, coords: [usize; 2]) -> usize {
        let x = coords[0] % self.side;
        let y = if self.dim == 2 { coords[1] % self.side } else { 0 };
        x + self.side * y
    }

    pub fn coords(&self, site: usize) -> [usize; 2] {
        if self.dim == 1 {
            [site, 0]
        } else {
            [site % self.side, site / self.side]
        }
    }

    /// Site displaced by `delta` with periodic wrap.
    pub fn shift(&self, site: usize, delta: [i64; 2]) -> usize {
        let c = self.coords(site);
        let x = self.wrap(0, c[0] as i64 + delta[0]);
        let y = self.wrap(1, c[1] as i64 + delta[1]);
        self.index([x, y])
    }

    /// Chebyshev distance on the torus.
    pub fn distance(&self, a: usize, b: usize) -> usize {
        let ca = self.coords(a);
        let cb = self.coords(b);
        (0..self.dim)
            .map(|k| {
                let d = ca[k].abs_diff(cb[k]);
                d.min(self.side - d)
            })
            .max()
            .unwrap_or(0)
    }

    /// The single square covering every site.
    pub fn full_square(&self) -> Square {
        Square {
            anchor: [0, 0],
            size: self.side,
        }
    }

    pub fn square(&self, anchor: [usize; 2], size: usize) -> Result<Square> {
        if size == 0 || size > self.side {
            return Err(Error::invalid(format!(
                "square size {size} outside 1..={}",
                self.side
            )));
        }
        if size == self.side {
            return Ok(self.full_square());
        }
        let y = if self.dim == 2 { anchor[1] % self.side } else { 0 };
        Ok(Square {
            anchor: [anchor[0] % self.side, y],
            size,
        })
    }
}

/// An `r x r` block (an interval of length `r` when `D = 1`) anchored at
/// its bottom-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Square {
    pub anchor: [usize; 2],
    pub size: usize,
}

impl Square {
    pub fn rect(&self, torus: &Torus) -> Rect {
        let ey = if torus.dim == 2 { self.size } else { 1 };
        Rect {
            anchor: self.anchor,
            extent: [self.size, ey],
        }
    }

    pub fn sites(&self, torus: &Torus) -> Vec<usize> {
        self.rect(torus).sites(torus)
    }

    pub fn contains_site(&self, torus: &Torus, site: usize) -> bool {
        self.rect(torus).contains_site(torus, site)
    }

    /// Site-set containment `self ⊆ other`.
    pub fn is_within(&self, torus: &Torus, other: &Square) -> bool {
        let outer = other.rect(torus);
        self.sites(torus)
            .into_iter()
            .all(|s| outer.contains_site(torus, s))
    }

    pub fn covers_lattice(&self, torus: &Torus) -> bool {
        self.size >= torus.side
    }

    /// Site at the lower-middle of the square.
    pub fn center(&self, torus: &Torus) -> usize {
        let off = ((self.size - 1) / 2) as i64;
        let a = torus.index(self.anchor);
        let dy = if torus.dim == 2 { off } else { 0 };
        torus.shift(a, [off, dy])
    }
}

/// Axis-aligned box; used by the box partition where boundary boxes may be
/// truncated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub anchor: [usize; 2],
    pub extent: [usize; 2],
}

impl Rect {
    pub fn sites(&self, torus: &Torus) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.extent[0] * self.extent[1]);
        for dy in 0..self.extent[1] {
            for dx in 0..self.extent[0] {
                let x = (self.anchor[0] + dx) % torus.side;
                let y = torus.wrap(1, (self.anchor[1] + dy) as i64);
                out.push(torus.index([x, y]));
            }
        }
        out
    }

    pub fn contains_site(&self, torus: &Torus, site: usize) -> bool {
        let c = torus.coords(site);
        (0..2).all(|k| {
            let l = torus.extent(k);
            let off = (c[k] + l - self.anchor[k] % l) % l;
            self.extent[k] >= l || off < self.extent[k]
        })
    }
}

/// All squares of size `r`, anchors in row-major order.
pub fn enumerate_squares(torus: &Torus, r: usize) -> Result<Vec<Square>> {
    if r < 1 || r > torus.side {
        return Err(Error::invalid(format!(
            "square size {r} outside 1..={}",
            torus.side
        )));
    }
    if r == torus.side {
        return Ok(vec![torus.full_square()]);
    }
    Ok((0..torus.site_count())
        .map(|s| Square {
            anchor: torus.coords(s),
            size: r,
        })
        .collect())
}

/// Result of [`ball`]: the grown square and whether it hit the lattice size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ball {
    pub square: Square,
    pub saturated: bool,
}

/// `b_l(A)`: the square containing `A` and its neighbours up to distance `l`.
pub fn ball(torus: &Torus, a: &Square, l: usize) -> Ball {
    let size = a.size + 2 * l;
    if size >= torus.side {
        return Ball {
            square: torus.full_square(),
            saturated: size > torus.side,
        };
    }
    let x = torus.wrap(0, a.anchor[0] as i64 - l as i64);
    let y = if torus.dim == 2 {
        torus.wrap(1, a.anchor[1] as i64 - l as i64)
    } else {
        0
    };
    Ball {
        square: Square {
            anchor: [x, y],
            size,
        },
        saturated: false,
    }
}

/// Ball of radius `l` around a single site.
pub fn site_ball(torus: &Torus, site: usize, l: usize) -> Ball {
    let a = Square {
        anchor: torus.coords(site),
        size: 1,
    };
    ball(torus, &a, l)
}

/// Smallest `l` for which `b_l(site)` covers the whole lattice.
pub fn covering_radius(torus: &Torus) -> usize {
    torus.side / 2
}

/// Tiling of the lattice by contiguous boxes of side `r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxPartition {
    pub r: usize,
    pub boxes: Vec<Rect>,
    /// For every square of [`enumerate_squares`]`(torus, 2)`, the box it is
    /// assigned to.
    pub assignment: Vec<usize>,
    /// Box index for each site.
    site_box: Vec<usize>,
}

impl BoxPartition {
    /// Box owning a square: the one containing its bottom-left site.
    pub fn box_of(&self, torus: &Torus, sq: &Square) -> usize {
        self.site_box[torus.index(sq.anchor)]
    }

    pub fn box_of_site(&self, site: usize) -> usize {
        self.site_box[site]
    }
}

pub fn box_partition(torus: &Torus, r: usize) -> Result<BoxPartition> {
    if r < 2 {
        return Err(Error::invalid(format!("box size must be at least 2, got {r}")));
    }
    let l = torus.side;
    let starts: Vec<(usize, usize)> = (0..l)
        .step_by(r)
        .map(|s| (s, r.min(l - s)))
        .collect();
    let ystarts: Vec<(usize, usize)> = if torus.dim == 2 {
        starts.clone()
    } else {
        vec![(0, 1)]
    };
    let mut boxes = Vec::new();
    for &(y0, ey) in &ystarts {
        for &(x0, ex) in &starts {
            boxes.push(Rect {
                anchor: [x0, y0],
                extent: [ex, ey],
            });
        }
    }
    let mut site_box = vec![usize::MAX; torus.site_count()];
    for (b, rect) in boxes.iter().enumerate() {
        for s in rect.sites(torus) {
            site_box[s] = b;
        }
    }
    let squares = enumerate_squares(torus, 2.min(l))?;
    let assignment = squares
        .iter()
        .map(|sq| site_box[torus.index(sq.anchor)])
        .collect();
    Ok(BoxPartition {
        r,
        boxes,
        assignment,
        site_box,
    })
}

/// Smallest square (ties broken by the lowest anchor) containing all `sites`.
/// The empty set maps to the unit square at the origin.
pub fn enclosing_square(torus: &Torus, sites: &[usize]) -> Square {
    if sites.is_empty() {
        return Square { anchor: [0, 0], size: 1 };
    }
    let mut anchor = [0usize; 2];
    let mut size = 1usize;
    #[allow(clippy::needless_range_loop)]
    for axis in 0..torus.dim {
        let mut pos: Vec<usize> = sites.iter().map(|&s| torus.coords(s)[axis]).collect();
        pos.sort_unstable();
        pos.dedup();
        let l = torus.side;
        // largest cyclic gap between consecutive occupied coordinates
        let mut best_gap = 0usize;
        let mut start = pos[0];
        for (i, &p) in pos.iter().enumerate() {
            let next = if i + 1 < pos.len() { pos[i + 1] } else { pos[0] + l };
            let gap = next - p - 1;
            if gap > best_gap {
                best_gap = gap;
                start = next % l;
            }
        }
        anchor[axis] = start;
        size = size.max(l - best_gap);
    }
    if size >= torus.side {
        return torus.full_square();
    }
    Square { anchor, size }
}

/// A torus whose sites each carry a fixed number of qubits.
///
/// Qubit `q` lives on site `q / qubits_per_site`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    pub torus: Torus,
    pub qubits_per_site: usize,
}

impl Lattice {
    pub fn new(torus: Torus, qubits_per_site: usize) -> Result<Self> {
        if qubits_per_site == 0 {
            return Err(Error::invalid("qubits_per_site must be positive"));
        }
        Ok(Lattice {
            torus,
            qubits_per_site,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.torus.site_count() * self.qubits_per_site
    }

    pub fn site_of_qubit(&self, q: usize) -> usize {
        q / self.qubits_per_site
    }

    pub fn qubit(&self, site: usize, k: usize) -> usize {
        site * self.qubits_per_site + k
    }

    /// Qubits of the given sites, in site order then in-site order.
    pub fn qubits_of_sites(&self, sites: &[usize]) -> Vec<usize> {
        sites
            .iter()
            .flat_map(|&s| (0..self.qubits_per_site).map(move |k| s * self.qubits_per_site + k))
            .collect()
    }

    pub fn qubits_of(&self, sq: &Square) -> Vec<usize> {
        self.qubits_of_sites(&sq.sites(&self.torus))
    }

    /// Sites touched by a set of qubits, sorted.
    pub fn sites_of_qubits(&self, qubits: &[usize]) -> Vec<usize> {
        let mut s: Vec<usize> = qubits.iter().map(|&q| self.site_of_qubit(q)).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn t2(l: usize) -> Torus {
        Torus::new(2, l).unwrap()
    }

    #[test]
    fn square_counts() {
        assert_eq!(enumerate_squares(&t2(4), 2).unwrap().len(), 16);
        let full = enumerate_squares(&t2(3), 3).unwrap();
        assert_eq!(full.len(), 1);
        assert_eq!(full[0].sites(&t2(3)).len(), 9);
        assert!(enumerate_squares(&t2(3), 4).is_err());
        assert!(enumerate_squares(&t2(3), 0).is_err());
    }

    #[test]
    fn squares_cover_lattice() {
        let t = t2(3);
        let sq = enumerate_squares(&t, 2).unwrap();
        assert_eq!(sq.len(), 9);
        let union: BTreeSet<usize> = sq.iter().flat_map(|s| s.sites(&t)).collect();
        assert_eq!(union.len(), 9);
    }

    #[test]
    fn square_support_size() {
        for l in 1..=6 {
            for d in 1..=2 {
                let t = Torus::new(d, l).unwrap();
                for r in 1..=l {
                    for sq in enumerate_squares(&t, r).unwrap() {
                        let s: BTreeSet<usize> = sq.sites(&t).into_iter().collect();
                        assert_eq!(s.len(), r.pow(d as u32));
                        for site in 0..t.site_count() {
                            assert_eq!(sq.contains_site(&t, site), s.contains(&site));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn ball_cases() {
        let t = t2(8);
        let a = Square { anchor: [0, 0], size: 2 };
        let b = ball(&t, &a, 2);
        assert!(!b.saturated);
        assert_eq!(b.square, Square { anchor: [6, 6], size: 6 });
        assert!(a.is_within(&t, &b.square));
        assert_eq!(ball(&t, &a, 0).square, a);

        let t4 = t2(4);
        let sat = ball(&t4, &a, 2);
        assert!(sat.saturated);
        assert!(sat.square.covers_lattice(&t4));
    }

    #[test]
    fn ball_composes() {
        let t = t2(9);
        for s in 0..t.site_count() {
            let a = Square { anchor: t.coords(s), size: 1 };
            for x in 0..3 {
                for y in 0..3 {
                    let two = ball(&t, &ball(&t, &a, x).square, y);
                    let one = ball(&t, &a, x + y);
                    if !two.saturated && !one.saturated {
                        assert_eq!(two.square, one.square);
                    }
                }
            }
        }
    }

    #[test]
    fn box_partition_audit() {
        for (l, r, nboxes) in [(4, 2, 4), (4, 4, 1), (5, 2, 9), (8, 3, 9)] {
            let t = t2(l);
            let p = box_partition(&t, r).unwrap();
            assert_eq!(p.boxes.len(), nboxes);
            // boxes tile the lattice
            let mut seen = vec![0; t.site_count()];
            for b in &p.boxes {
                for s in b.sites(&t) {
                    seen[s] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
            let squares = enumerate_squares(&t, 2).unwrap();
            assert_eq!(p.assignment.len(), squares.len());
            for (sq, &b) in squares.iter().zip(&p.assignment) {
                assert!(b < p.boxes.len());
                assert!(p.boxes[b].contains_site(&t, t.index(sq.anchor)));
            }
        }
        let p = box_partition(&t2(5), 2).unwrap();
        assert!(p.boxes.iter().any(|b| b.extent != [2, 2]));
        assert!(box_partition(&t2(4), 1).is_err());
    }

    #[test]
    fn enclosing() {
        let t = t2(5);
        let sq = enclosing_square(&t, &[t.index([4, 0]), t.index([0, 1])]);
        assert_eq!(sq, Square { anchor: [4, 0], size: 2 });
        let t1 = Torus::new(1, 8).unwrap();
        assert_eq!(enclosing_square(&t1, &[0, 4]).size, 5);
        assert_eq!(enclosing_square(&t1, &[2]), Square { anchor: [2, 0], size: 1 });
        assert!(enclosing_square(&t1, &(0..8).collect::<Vec<_>>()).covers_lattice(&t1));
    }

    #[test]
    fn one_dimensional() {
        let t = Torus::new(1, 5).unwrap();
        let sq = enumerate_squares(&t, 2).unwrap();
        assert_eq!(sq.len(), 5);
        assert_eq!(sq[4].sites(&t), vec![4, 0]);
        assert_eq!(t.distance(0, 4), 1);
        let b = site_ball(&t, 0, 1);
        assert_eq!(b.square.sites(&t), vec![4, 0, 1]);
    }
}
