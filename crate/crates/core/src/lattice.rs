//! Exact geometry of the triangular (A2), honeycomb (H2) and square (Z2) lattices.
//!
//! Every site is mapped into a common integer "plane" coordinate system in which
//! squared Euclidean distances are an integral quadratic form:
//!
//! * A2 and H2 use the triangular basis `e1 = (1, 0)`, `e2 = (1/2, sqrt(3)/2)`,
//!   so `|x e1 + y e2|^2 = x^2 + xy + y^2`.
//! * Z2 uses the standard basis, `|(x, y)|^2 = x^2 + y^2`.
//!
//! The honeycomb is the unit triangular lattice with the index-3 sublattice
//! `{x = y mod 3}` (the hexagon centres) removed. Its translation lattice is that
//! same index-3 sublattice, spanned by `(1, 1)` and `(2, -1)`, and every site is a
//! translate of one of the two basis sites `(1, 0)` (parity 0) or `(0, 1)` (parity 1).
//! Nearest neighbours are at distance 1, so all squared distances stay integral.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer coordinates in the plane basis of a lattice kind.
pub type Point = [i64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LatticeKind {
    A2,
    H2,
    Z2,
}

/// A lattice site: coefficients in the translation basis plus a honeycomb parity bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub a: i64,
    pub b: i64,
    pub parity: u8,
}

impl Site {
    pub const fn new(a: i64, b: i64) -> Self {
        Site { a, b, parity: 0 }
    }

    pub const fn with_parity(a: i64, b: i64, parity: u8) -> Self {
        Site { a, b, parity }
    }
}

/// A displacement in translation-basis coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vec2i {
    pub da: i64,
    pub db: i64,
}

impl Vec2i {
    pub const fn new(da: i64, db: i64) -> Self {
        Vec2i { da, db }
    }
}

const H2_T1: Point = [1, 1];
const H2_T2: Point = [2, -1];
const H2_OFFSETS: [Point; 2] = [[1, 0], [0, 1]];

pub fn add(p: Point, q: Point) -> Point {
    [p[0] + q[0], p[1] + q[1]]
}

pub fn sub(p: Point, q: Point) -> Point {
    [p[0] - q[0], p[1] - q[1]]
}

pub fn scale(k: i64, p: Point) -> Point {
    [k * p[0], k * p[1]]
}

pub fn cross(p: Point, q: Point) -> i64 {
    p[0] * q[1] - p[1] * q[0]
}

impl LatticeKind {
    pub const ALL: [LatticeKind; 3] = [LatticeKind::A2, LatticeKind::H2, LatticeKind::Z2];

    pub fn name(self) -> &'static str {
        match self {
            LatticeKind::A2 => "a2",
            LatticeKind::H2 => "h2",
            LatticeKind::Z2 => "z2",
        }
    }

    /// Squared Euclidean length of a plane vector.
    pub fn norm(self, v: Point) -> i64 {
        match self {
            LatticeKind::A2 | LatticeKind::H2 => v[0] * v[0] + v[0] * v[1] + v[1] * v[1],
            LatticeKind::Z2 => v[0] * v[0] + v[1] * v[1],
        }
    }

    /// Twice the bilinear form associated with [`norm`](Self::norm).
    pub fn dot2(self, u: Point, v: Point) -> i64 {
        match self {
            LatticeKind::A2 | LatticeKind::H2 => {
                2 * u[0] * v[0] + u[0] * v[1] + u[1] * v[0] + 2 * u[1] * v[1]
            }
            LatticeKind::Z2 => 2 * (u[0] * v[0] + u[1] * v[1]),
        }
    }

    /// Number of sites per translation cell.
    pub fn basis_sites(self) -> usize {
        match self {
            LatticeKind::H2 => 2,
            _ => 1,
        }
    }

    /// Whether a plane point is a site of this lattice.
    pub fn is_site(self, p: Point) -> bool {
        match self {
            LatticeKind::H2 => (p[0] - p[1]).rem_euclid(3) != 0,
            _ => true,
        }
    }

    /// Whether a plane vector is a translation of this lattice.
    pub fn is_translation(self, v: Point) -> bool {
        match self {
            LatticeKind::H2 => (v[0] - v[1]).rem_euclid(3) == 0,
            _ => true,
        }
    }

    pub fn validate(self, s: Site) -> Result<()> {
        match self {
            LatticeKind::H2 if s.parity > 1 => Err(Error::InvalidSite {
                kind: self,
                reason: format!("parity {} out of range", s.parity),
            }),
            LatticeKind::A2 | LatticeKind::Z2 if s.parity != 0 => Err(Error::InvalidSite {
                kind: self,
                reason: format!("parity {} on a Bravais lattice", s.parity),
            }),
            _ => Ok(()),
        }
    }

    pub fn site_to_plane(self, s: Site) -> Point {
        match self {
            LatticeKind::H2 => add(
                self.translation_to_plane(Vec2i::new(s.a, s.b)),
                H2_OFFSETS[s.parity as usize & 1],
            ),
            _ => [s.a, s.b],
        }
    }

    pub fn plane_to_site(self, p: Point) -> Option<Site> {
        match self {
            LatticeKind::H2 => {
                let parity = match (p[0] - p[1]).rem_euclid(3) {
                    1 => 0u8,
                    2 => 1u8,
                    _ => return None,
                };
                let t = self.plane_to_translation(sub(p, H2_OFFSETS[parity as usize]))?;
                Some(Site::with_parity(t.da, t.db, parity))
            }
            _ => Some(Site::new(p[0], p[1])),
        }
    }

    pub fn translation_to_plane(self, v: Vec2i) -> Point {
        match self {
            LatticeKind::H2 => add(scale(v.da, H2_T1), scale(v.db, H2_T2)),
            _ => [v.da, v.db],
        }
    }

    pub fn plane_to_translation(self, p: Point) -> Option<Vec2i> {
        match self {
            LatticeKind::H2 => {
                // a (1,1) + b (2,-1) = (x, y)
                let diff = p[0] - p[1];
                if diff.rem_euclid(3) != 0 {
                    return None;
                }
                let b = diff / 3;
                Some(Vec2i::new(p[1] + b, b))
            }
            _ => Some(Vec2i::new(p[0], p[1])),
        }
    }

    /// The point group fixing the plane origin (12 elements on A2 and H2, 8 on Z2).
    pub fn point_group(self) -> Vec<SymmetryOp> {
        let gens: [[[i64; 2]; 2]; 2] = match self {
            LatticeKind::A2 | LatticeKind::H2 => [[[0, -1], [1, 1]], [[0, 1], [1, 0]]],
            LatticeKind::Z2 => [[[0, -1], [1, 0]], [[0, 1], [1, 0]]],
        };
        let identity = [[1, 0], [0, 1]];
        let mut seen: BTreeSet<[[i64; 2]; 2]> = BTreeSet::new();
        let mut frontier = vec![identity];
        seen.insert(identity);
        while let Some(m) = frontier.pop() {
            for g in &gens {
                let p = mat_mul(*g, m);
                if seen.insert(p) {
                    frontier.push(p);
                }
            }
        }
        seen.into_iter().map(|matrix| SymmetryOp { matrix }).collect()
    }
}

fn mat_mul(a: [[i64; 2]; 2], b: [[i64; 2]; 2]) -> [[i64; 2]; 2] {
    let mut out = [[0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// A point-group element acting linearly on plane coordinates.
///
/// For the honeycomb the group is taken about a hexagon centre (the plane origin),
/// so it maps sites to sites and permutes the two parities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymmetryOp {
    pub matrix: [[i64; 2]; 2],
}

impl SymmetryOp {
    pub fn apply(&self, p: Point) -> Point {
        let m = &self.matrix;
        [m[0][0] * p[0] + m[0][1] * p[1], m[1][0] * p[0] + m[1][1] * p[1]]
    }

    pub fn det(&self) -> i64 {
        let m = &self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

/// Squared Euclidean distance between two sites (unit nearest-neighbour spacing).
pub fn squared_distance(kind: LatticeKind, s: Site, t: Site) -> Result<u64> {
    kind.validate(s)?;
    kind.validate(t)?;
    let d = sub(kind.site_to_plane(s), kind.site_to_plane(t));
    Ok(kind.norm(d) as u64)
}

/// All `(a, b)` with `0 <= a <= b` and `a^2 + ab + b^2 = d2` (A2, H2) or `a^2 + b^2 = d2` (Z2).
pub fn diophantine_solutions(kind: LatticeKind, d2: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    let mut a = 0u64;
    loop {
        let base = match kind {
            LatticeKind::Z2 => 2 * a * a,
            _ => 3 * a * a,
        };
        if base > d2 {
            break;
        }
        // Smallest b >= a solving the form: scan upward, the form is increasing in b.
        let b_max = isqrt(d2);
        let mut b = a;
        while b <= b_max {
            let v = match kind {
                LatticeKind::Z2 => a * a + b * b,
                _ => a * a + a * b + b * b,
            };
            if v == d2 {
                out.push((a, b));
                break;
            }
            if v > d2 {
                break;
            }
            b += 1;
        }
        a += 1;
    }
    out
}

pub fn isqrt(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut x = (n as f64).sqrt() as u64;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// Twice the area of a triangle, in units of the plane coordinate cell.
pub fn doubled_area(kind: LatticeKind, p: Site, q: Site, r: Site) -> Result<u64> {
    for s in [p, q, r] {
        kind.validate(s)?;
    }
    let (p, q, r) = (kind.site_to_plane(p), kind.site_to_plane(q), kind.site_to_plane(r));
    Ok(cross(sub(q, p), sub(r, p)).unsigned_abs())
}

/// Orbit of a translation vector under the point group.
pub fn symmetry_images(kind: LatticeKind, v: Vec2i) -> BTreeSet<Vec2i> {
    let p = kind.translation_to_plane(v);
    kind.point_group()
        .iter()
        .filter_map(|g| kind.plane_to_translation(g.apply(p)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances_from_examples() {
        let o = Site::new(0, 0);
        assert_eq!(squared_distance(LatticeKind::A2, o, Site::new(1, 2)).unwrap(), 7);
        assert_eq!(squared_distance(LatticeKind::Z2, o, Site::new(3, 4)).unwrap(), 25);
        for kind in LatticeKind::ALL {
            assert_eq!(squared_distance(kind, o, o).unwrap(), 0);
        }
    }

    #[test]
    fn parity_rejected_off_honeycomb() {
        let bad = Site::with_parity(0, 0, 1);
        assert!(squared_distance(LatticeKind::A2, bad, Site::new(0, 0)).is_err());
        assert!(squared_distance(LatticeKind::Z2, bad, Site::new(0, 0)).is_err());
        assert!(squared_distance(LatticeKind::H2, bad, Site::new(0, 0)).is_ok());
    }

    #[test]
    fn honeycomb_nearest_neighbours() {
        let k = LatticeKind::H2;
        let s0 = Site::with_parity(0, 0, 0);
        let s1 = Site::with_parity(0, 0, 1);
        assert_eq!(squared_distance(k, s0, s1).unwrap(), 1);
        // Same-parity translates sit at distance sqrt(3).
        assert_eq!(squared_distance(k, s0, Site::with_parity(1, 0, 0)).unwrap(), 3);
        // Every site has exactly three neighbours at distance 1.
        let p0 = k.site_to_plane(s0);
        let mut count = 0;
        for x in -3..=3 {
            for y in -3..=3 {
                let q = add(p0, [x, y]);
                if k.is_site(q) && k.norm([x, y]) == 1 {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 3);
    }

    #[test]
    fn site_plane_round_trip() {
        for kind in LatticeKind::ALL {
            for a in -4..4 {
                for b in -4..4 {
                    for parity in 0..kind.basis_sites() as u8 {
                        let s = Site::with_parity(a, b, parity);
                        assert_eq!(kind.plane_to_site(kind.site_to_plane(s)), Some(s));
                    }
                }
            }
        }
    }

    #[test]
    fn solutions_from_examples() {
        assert_eq!(diophantine_solutions(LatticeKind::A2, 49), vec![(0, 7), (3, 5)]);
        assert_eq!(diophantine_solutions(LatticeKind::A2, 13), vec![(1, 3)]);
        assert!(diophantine_solutions(LatticeKind::Z2, 3).is_empty());
        assert_eq!(diophantine_solutions(LatticeKind::Z2, 25), vec![(0, 5), (3, 4)]);
    }

    #[test]
    fn areas_from_examples() {
        let z = LatticeKind::Z2;
        let s = |a, b| Site::new(a, b);
        assert_eq!(doubled_area(z, s(0, 0), s(1, 0), s(0, 1)).unwrap(), 1);
        assert_eq!(doubled_area(z, s(1, 3), s(4, 6), s(0, 7)).unwrap(), 15);
        assert_eq!(doubled_area(z, s(0, 0), s(1, 1), s(3, 3)).unwrap(), 0);
    }

    #[test]
    fn point_group_orders() {
        assert_eq!(LatticeKind::A2.point_group().len(), 12);
        assert_eq!(LatticeKind::H2.point_group().len(), 12);
        assert_eq!(LatticeKind::Z2.point_group().len(), 8);
        for kind in LatticeKind::ALL {
            for g in kind.point_group() {
                assert_eq!(g.det().abs(), 1);
                for v in [[1, 0], [2, 1], [-3, 5]] {
                    assert_eq!(kind.norm(g.apply(v)), kind.norm(v));
                }
            }
        }
    }

    #[test]
    fn honeycomb_is_point_group_invariant() {
        let k = LatticeKind::H2;
        for g in k.point_group() {
            for x in -5..5 {
                for y in -5..5 {
                    assert_eq!(k.is_site([x, y]), k.is_site(g.apply([x, y])));
                }
            }
        }
    }

    #[test]
    fn orbits() {
        let z = symmetry_images(LatticeKind::Z2, Vec2i::new(1, 0));
        let expect: BTreeSet<_> = [(1, 0), (0, 1), (-1, 0), (0, -1)]
            .into_iter()
            .map(|(a, b)| Vec2i::new(a, b))
            .collect();
        assert_eq!(z, expect);
        assert_eq!(symmetry_images(LatticeKind::Z2, Vec2i::new(2, 1)).len(), 8);
        assert_eq!(symmetry_images(LatticeKind::A2, Vec2i::new(1, 0)).len(), 6);
    }

    #[test]
    fn attainable_values_match_a_site_scan() {
        for kind in LatticeKind::ALL {
            let mut realized = BTreeSet::new();
            let r = 30i64;
            let origin = kind.site_to_plane(Site::new(0, 0));
            for x in -r..=r {
                for y in -r..=r {
                    let q = add(origin, [x, y]);
                    if kind.is_site(q) {
                        realized.insert(kind.norm([x, y]) as u64);
                    }
                }
            }
            for d2 in 1..=200u64 {
                assert_eq!(
                    !diophantine_solutions(kind, d2).is_empty(),
                    realized.contains(&d2),
                    "{kind:?} {d2}"
                );
            }
        }
    }
}
