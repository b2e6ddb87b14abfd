//! Periodic finite volumes and their exclusion graphs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hnf::Lattice2;
use crate::lattice::{add, isqrt, sub, LatticeKind, Point, Site, SymmetryOp, Vec2i};

/// A torus `W / (Z p1 + Z p2)` with sites listed in a fixed canonical order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Torus {
    pub kind: LatticeKind,
    pub p1: Vec2i,
    pub p2: Vec2i,
    pub site_count: usize,
    period: Lattice2,
    points: Vec<Point>,
    /// Dense table over the reduction box of `period`; `u32::MAX` marks non-sites.
    table: Vec<u32>,
}

impl Torus {
    pub fn new(kind: LatticeKind, p1: Vec2i, p2: Vec2i) -> Result<Self> {
        let u = kind.translation_to_plane(p1);
        let v = kind.translation_to_plane(p2);
        let period = Lattice2::from_generators(&[u, v]).ok_or_else(|| {
            Error::Domain(format!("torus periods {p1:?}, {p2:?} are linearly dependent"))
        })?;
        let (a, _, d) = period.hnf();
        let mut points = Vec::new();
        let mut table = vec![u32::MAX; (a * d) as usize];
        for x in 0..a {
            for y in 0..d {
                if kind.is_site([x, y]) {
                    table[(x * d + y) as usize] = points.len() as u32;
                    points.push([x, y]);
                }
            }
        }
        Ok(Torus {
            kind,
            p1,
            p2,
            site_count: points.len(),
            period,
            points,
            table,
        })
    }

    /// Torus whose period lattice is given in plane coordinates.
    pub fn from_plane_lattice(kind: LatticeKind, l: &Lattice2) -> Result<Self> {
        let [u, v] = l.reduced_basis(kind);
        let tu = kind.plane_to_translation(u);
        let tv = kind.plane_to_translation(v);
        match (tu, tv) {
            (Some(p1), Some(p2)) => Torus::new(kind, p1, p2),
            _ => Err(Error::Commensurability(format!(
                "period lattice {:?} is not a lattice of translations",
                l.hnf()
            ))),
        }
    }

    pub fn period_lattice(&self) -> &Lattice2 {
        &self.period
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn site(&self, i: usize) -> Site {
        self.kind.plane_to_site(self.points[i]).expect("stored points are sites")
    }

    /// Index of the torus site containing a plane point, if it is a site.
    pub fn index_of(&self, p: Point) -> Option<usize> {
        let (_, _, d) = self.period.hnf();
        let r = self.period.reduce(p);
        let v = self.table[(r[0] * d + r[1]) as usize];
        (v != u32::MAX).then_some(v as usize)
    }

    pub fn index_of_site(&self, s: Site) -> Option<usize> {
        self.index_of(self.kind.site_to_plane(s))
    }

    /// Squared length of the shortest nonzero period.
    pub fn min_period_norm(&self) -> i64 {
        self.period.min_norm(self.kind)
    }

    /// Squared torus distance: minimum over all period images.
    pub fn distance2(&self, i: usize, j: usize) -> i64 {
        let w = sub(self.points[j], self.points[i]);
        let [u, v] = self.period.reduced_basis(self.kind);
        let mut best = i64::MAX;
        let w0 = self.nearest_image(w);
        for s in -2..=2 {
            for t in -2..=2 {
                let c = [w0[0] + s * u[0] + t * v[0], w0[1] + s * u[1] + t * v[1]];
                best = best.min(self.kind.norm(c));
            }
        }
        best
    }

    fn nearest_image(&self, w: Point) -> Point {
        // Babai rounding in the reduced basis.
        let [u, v] = self.period.reduced_basis(self.kind);
        let det = (u[0] * v[1] - u[1] * v[0]) as f64;
        let s = ((w[0] * v[1] - w[1] * v[0]) as f64 / det).round() as i64;
        let t = ((u[0] * w[1] - u[1] * w[0]) as f64 / det).round() as i64;
        [w[0] - s * u[0] - t * v[0], w[1] - s * u[1] - t * v[1]]
    }

    /// Whether the torus is commensurate with a plane lattice (every period lies in it).
    pub fn is_commensurate_with(&self, l: &Lattice2) -> bool {
        l.contains_lattice(&self.period)
    }

    /// Translation vectors of the torus, one per class, in plane coordinates.
    pub fn translations(&self) -> Vec<Point> {
        let (a, _, d) = self.period.hnf();
        let mut out = Vec::new();
        for x in 0..a {
            for y in 0..d {
                if self.kind.is_translation([x, y]) {
                    out.push([x, y]);
                }
            }
        }
        out
    }

    /// Site permutation induced by a plane translation.
    pub fn translate_perm(&self, t: Point) -> Vec<usize> {
        self.points
            .iter()
            .map(|&p| self.index_of(add(p, t)).expect("translations map sites to sites"))
            .collect()
    }

    /// Site permutation induced by a point-group element, if it preserves the periods.
    pub fn symmetry_perm(&self, g: &SymmetryOp) -> Option<Vec<usize>> {
        if self.period.transform(g) != self.period {
            return None;
        }
        Some(
            self.points
                .iter()
                .map(|&p| self.index_of(g.apply(p)).expect("symmetries map sites to sites"))
                .collect(),
        )
    }

    /// The D-exclusion graph on the torus.
    pub fn conflict_graph(&self, d2: u64) -> ConflictGraph {
        let offsets = conflict_offsets(self.kind, d2);
        let n = self.site_count;
        let mut adj = vec![Vec::new(); n];
        let mut blocked = vec![false; n];
        for (i, &p) in self.points.iter().enumerate() {
            for &w in &offsets {
                if let Some(j) = self.index_of(add(p, w)) {
                    if j == i {
                        blocked[i] = true;
                    } else {
                        adj[i].push(j);
                    }
                }
            }
            adj[i].sort_unstable();
            adj[i].dedup();
        }
        ConflictGraph::new(adj, blocked)
    }

    /// Whether a set of torus sites is D-admissible in the torus metric.
    pub fn is_admissible(&self, occupied: &[usize], d2: u64) -> bool {
        let g = self.conflict_graph(d2);
        g.is_independent(occupied)
    }
}

/// Nonzero plane vectors `w` with `|w|^2 < d2` (site-to-site offsets that conflict).
pub fn conflict_offsets(kind: LatticeKind, d2: u64) -> Vec<Point> {
    let r = isqrt(4 * d2 / 3) as i64 + 2;
    let mut out = Vec::new();
    for x in -r..=r {
        for y in -r..=r {
            let n = kind.norm([x, y]);
            if n > 0 && (n as u64) < d2 {
                out.push([x, y]);
            }
        }
    }
    out
}

/// Fixed-width bitset over graph vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitset {
    words: Vec<u64>,
}

impl Bitset {
    pub fn new(n: usize) -> Self {
        Bitset {
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn full(n: usize) -> Self {
        let mut b = Bitset::new(n);
        for i in 0..n {
            b.insert(i);
        }
        b
    }

    pub fn from_indices(n: usize, idx: &[usize]) -> Self {
        let mut b = Bitset::new(n);
        for &i in idx {
            b.insert(i);
        }
        b
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        self.words[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        self.words[i >> 6] &= !(1 << (i & 63));
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn first(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(k, w)| k * 64 + w.trailing_zeros() as usize)
    }

    pub fn difference_with(&mut self, other: &Bitset) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    pub fn intersect_with(&mut self, other: &Bitset) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn union_with(&mut self, other: &Bitset) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersects(&self, other: &Bitset) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + t)
            })
        })
    }
}

/// Conflict graph with open neighbourhoods as bitsets; blocked vertices conflict with themselves.
#[derive(Debug, Clone)]
pub struct ConflictGraph {
    pub n: usize,
    pub adj: Vec<Vec<usize>>,
    pub masks: Vec<Bitset>,
    pub blocked: Vec<bool>,
}

impl ConflictGraph {
    pub fn new(adj: Vec<Vec<usize>>, blocked: Vec<bool>) -> Self {
        let n = adj.len();
        let masks = adj.iter().map(|a| Bitset::from_indices(n, a)).collect();
        ConflictGraph {
            n,
            adj,
            masks,
            blocked,
        }
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        let b = Bitset::from_indices(self.n, set);
        set.iter()
            .all(|&i| !self.blocked[i] && !self.masks[i].intersects(&b))
    }

    /// Vertices that may still be occupied.
    pub fn free_vertices(&self) -> Bitset {
        let mut b = Bitset::new(self.n);
        for i in 0..self.n {
            if !self.blocked[i] {
                b.insert(i);
            }
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_counts() {
        let t = Torus::new(LatticeKind::Z2, Vec2i::new(4, 0), Vec2i::new(0, 4)).unwrap();
        assert_eq!(t.site_count, 16);
        let t = Torus::new(LatticeKind::H2, Vec2i::new(3, 0), Vec2i::new(0, 2)).unwrap();
        assert_eq!(t.site_count, 12);
        let t = Torus::new(LatticeKind::A2, Vec2i::new(2, 1), Vec2i::new(-1, 3)).unwrap();
        assert_eq!(t.site_count, 7);
        assert!(Torus::new(LatticeKind::A2, Vec2i::new(2, 1), Vec2i::new(4, 2)).is_err());
    }

    #[test]
    fn every_site_round_trips() {
        for kind in LatticeKind::ALL {
            let t = Torus::new(kind, Vec2i::new(3, 1), Vec2i::new(-1, 4)).unwrap();
            for i in 0..t.site_count {
                assert_eq!(t.index_of(t.point(i)), Some(i));
                assert_eq!(t.index_of_site(t.site(i)), Some(i));
                let shifted = add(t.point(i), t.period_lattice().basis()[0]);
                assert_eq!(t.index_of(shifted), Some(i));
            }
        }
    }

    #[test]
    fn honeycomb_graph_is_cubic() {
        let t = Torus::new(LatticeKind::H2, Vec2i::new(4, 0), Vec2i::new(0, 4)).unwrap();
        let g = t.conflict_graph(3);
        assert!(g.adj.iter().all(|a| a.len() == 3));
        let g = t.conflict_graph(4);
        assert!(g.adj.iter().all(|a| a.len() == 9));
    }

    #[test]
    fn tiny_torus_blocks_sites() {
        let t = Torus::new(LatticeKind::Z2, Vec2i::new(2, 0), Vec2i::new(0, 2)).unwrap();
        let g = t.conflict_graph(9);
        assert!(g.blocked.iter().all(|&b| b));
        let g = t.conflict_graph(2);
        assert!(g.blocked.iter().all(|&b| !b));
        assert!(g.is_independent(&[t.index_of([0, 0]).unwrap(), t.index_of([1, 1]).unwrap()]));
    }

    #[test]
    fn torus_distance_is_minimal_image() {
        let t = Torus::new(LatticeKind::A2, Vec2i::new(9, 0), Vec2i::new(0, 9)).unwrap();
        let i = t.index_of([0, 0]).unwrap();
        let j = t.index_of([8, 8]).unwrap();
        assert_eq!(t.distance2(i, j), 3);
    }

    #[test]
    fn bitset_ops() {
        let mut b = Bitset::from_indices(130, &[0, 64, 129]);
        assert_eq!(b.count(), 3);
        assert_eq!(b.iter().collect::<Vec<_>>(), vec![0, 64, 129]);
        b.remove(0);
        assert_eq!(b.first(), Some(64));
        let c = Bitset::from_indices(130, &[64]);
        b.difference_with(&c);
        assert_eq!(b.iter().collect::<Vec<_>>(), vec![129]);
    }
}
