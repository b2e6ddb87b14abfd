//! Minimal-area admissible triangles on Z^2 (M-triangles) and their congruence classes.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hnf::Lattice2;
use crate::lattice::{cross, isqrt, sub, LatticeKind, Point, SymmetryOp};

const Z2: LatticeKind = LatticeKind::Z2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triangle {
    pub vertices: [Point; 3],
    /// Squared side lengths, ascending.
    pub sides2: [i64; 3],
    pub doubled_area: i64,
}

impl Triangle {
    pub fn new(vertices: [Point; 3]) -> Self {
        let [p, q, r] = vertices;
        let mut sides2 = [Z2.norm(sub(q, p)), Z2.norm(sub(r, q)), Z2.norm(sub(p, r))];
        sides2.sort();
        Triangle {
            vertices,
            sides2,
            doubled_area: cross(sub(q, p), sub(r, p)).abs(),
        }
    }

    pub fn is_isosceles(&self) -> bool {
        self.sides2[0] == self.sides2[1] || self.sides2[1] == self.sides2[2]
    }

    /// Sides at least `sqrt(d2)` and no obtuse angle.
    pub fn is_feasible(&self, d2: i64) -> bool {
        if self.sides2[0] < d2 || self.doubled_area == 0 {
            return false;
        }
        let v = self.vertices;
        (0..3).all(|i| {
            let o = v[i];
            let a = sub(v[(i + 1) % 3], o);
            let b = sub(v[(i + 2) % 3], o);
            a[0] * b[0] + a[1] * b[1] >= 0
        })
    }

    fn image(&self, g: &SymmetryOp) -> [Point; 3] {
        let mut v = self.vertices.map(|p| g.apply(p));
        v.sort();
        let o = v[0];
        v.map(|p| sub(p, o))
    }

    /// Representative of the orbit under Z^2 translations and the square point group.
    pub fn canonical(&self) -> Triangle {
        let v = Z2
            .point_group()
            .iter()
            .map(|g| self.image(g))
            .min()
            .expect("nonempty group");
        Triangle::new(v)
    }

    /// The sublattice spanned by the edge vectors; adjacent copies tile it.
    pub fn sublattice(&self) -> Lattice2 {
        let [p, q, r] = self.vertices;
        Lattice2::from_generators(&[sub(q, p), sub(r, p)]).expect("non-degenerate triangle")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriangleClass {
    pub representative: Triangle,
    /// Multiplicity by the isosceles rule.
    pub m: u64,
    /// Number of distinct sublattices actually generated by the class.
    pub orbit_m: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MTriangleReport {
    pub d2: u64,
    /// Doubled minimal area.
    pub s: u64,
    pub classes: Vec<TriangleClass>,
    pub k: usize,
    pub n0: usize,
    pub n1: usize,
    /// Bound on the squared longest side used for the exhaustive search.
    pub search_bound: i64,
}

/// Bound on the squared longest side of any feasible triangle with doubled area at most `s`.
///
/// The angle opposite the longest side lies in [60°, 90°], so `s >= (sqrt 3 / 2) a b` with
/// `a, b >= D`; together with `l^2 <= a^2 + b^2 <= 2 b^2` this gives `l^2 <= 8 s^2 / (3 d2)`.
pub fn longest_side_bound(d2: i64, s: i64) -> i64 {
    (8 * s * s) / (3 * d2) + 1
}

fn points_in_annulus(lo: i64, hi: i64) -> Vec<Point> {
    let r = isqrt(hi as u64) as i64 + 1;
    let mut pts = Vec::new();
    for x in -r..=r {
        for y in -r..=r {
            let n = x * x + y * y;
            if n >= lo && n <= hi {
                pts.push([x, y]);
            }
        }
    }
    pts
}

/// All feasible triangles with a vertex at the origin and doubled area at most `s_max`.
fn feasible_at_origin(d2: i64, s_max: i64, bound: i64) -> Vec<Triangle> {
    let pts = points_in_annulus(d2, bound);
    pts.par_iter()
        .flat_map_iter(|&p| {
            let pts = &pts;
            pts.iter().filter_map(move |&q| {
                let c = cross(p, q);
                if c <= 0 || c > s_max {
                    return None;
                }
                let t = Triangle::new([[0, 0], p, q]);
                (t.sides2[2] <= bound && t.is_feasible(d2)).then_some(t)
            })
        })
        .collect()
}

pub fn solve_problem5(d2: u64) -> Result<MTriangleReport> {
    if d2 < 2 || !crate::arith::is_attainable(Z2, d2) {
        return Err(Error::NotAttainable { kind: Z2, d2 });
    }
    let d = d2 as i64;
    let k = {
        let r = isqrt(d2) as i64;
        if r * r == d {
            r
        } else {
            r + 1
        }
    };
    let s_ub = k * k;
    let bound = longest_side_bound(d, s_ub);
    let feasible = feasible_at_origin(d, s_ub, bound);
    let s = feasible
        .iter()
        .map(|t| t.doubled_area)
        .min()
        .expect("the right isosceles triangle with legs k is feasible");
    let minimizers: Vec<Triangle> = feasible.into_iter().filter(|t| t.doubled_area == s).collect();
    let part = congruence_partition(&minimizers);
    Ok(MTriangleReport {
        d2,
        s: s as u64,
        k: part.classes.len(),
        n0: part.n0,
        n1: part.n1,
        classes: part
            .classes
            .into_iter()
            .map(|representative| TriangleClass {
                m: multiplicity_m(&representative, d2),
                orbit_m: sublattice_orbit_size(&representative),
                representative,
            })
            .collect(),
        search_bound: bound,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CongruencePartition {
    /// Canonical representatives, sorted.
    pub classes: Vec<Triangle>,
    pub n0: usize,
    pub n1: usize,
}

pub fn congruence_partition(triangles: &[Triangle]) -> CongruencePartition {
    let classes: BTreeSet<Triangle> = triangles.iter().map(|t| t.canonical()).collect();
    let mut by_sides: BTreeMap<[i64; 3], usize> = BTreeMap::new();
    for t in &classes {
        *by_sides.entry(t.sides2).or_default() += 1;
    }
    CongruencePartition {
        n0: by_sides.values().copied().max().unwrap_or(0),
        n1: by_sides.len(),
        classes: classes.into_iter().collect(),
    }
}

/// Number of MDA sublattices generated by the class of an M-triangle.
pub fn multiplicity_m(t: &Triangle, d2: u64) -> u64 {
    if d2 == 2 {
        1
    } else if t.is_isosceles() {
        2
    } else {
        4
    }
}

/// Size of the point-group orbit of the sublattice spanned by `t`.
pub fn sublattice_orbit_size(t: &Triangle) -> u64 {
    let l = t.sublattice();
    Z2.point_group()
        .iter()
        .map(|g| l.transform(g))
        .collect::<BTreeSet<_>>()
        .len() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figure_values() {
        let r = solve_problem5(16).unwrap();
        assert_eq!((r.s, r.k), (15, 1));
        assert_eq!(r.classes[0].m, 2);
        let r = solve_problem5(25).unwrap();
        assert_eq!((r.s, r.k), (23, 1));
        assert_eq!(r.classes[0].m, 4);
        let r = solve_problem5(2).unwrap();
        assert_eq!((r.s, r.k), (2, 1));
        assert_eq!(r.classes[0].m, 1);
        assert_eq!(r.classes[0].representative.sides2, [2, 2, 4]);
    }

    #[test]
    fn degenerate_classes() {
        let r = solve_problem5(425).unwrap();
        assert_eq!((r.s, r.k, r.n0, r.n1), (375, 2, 2, 1));
        let r = solve_problem5(65).unwrap();
        assert_eq!((r.s, r.k, r.n1), (60, 2, 2));
    }

    #[test]
    fn rejects_unattainable() {
        assert!(solve_problem5(3).is_err());
        assert!(solve_problem5(1).is_err());
    }

    #[test]
    fn canonical_is_idempotent_and_invariant() {
        let t = Triangle::new([[1, 3], [4, 6], [0, 7]]);
        assert_eq!(t.doubled_area, 15);
        let c = t.canonical();
        assert_eq!(c.canonical(), c);
        for g in Z2.point_group() {
            let moved = Triangle::new(t.vertices.map(|p| {
                let q = g.apply(p);
                [q[0] + 5, q[1] - 2]
            }));
            assert_eq!(moved.canonical(), c);
        }
    }

    #[test]
    fn multiplicity_rule_against_sublattice_orbits() {
        for d2 in [2u64, 5, 10, 13, 16, 17, 25, 26, 34, 100] {
            let r = solve_problem5(d2).unwrap();
            for c in &r.classes {
                assert_eq!(c.m, c.orbit_m, "d2={d2}");
            }
        }
        // Isosceles M-triangles whose axis is not a mirror of Z^2 generate four sublattices.
        for d2 in [65u64, 425] {
            let r = solve_problem5(d2).unwrap();
            let orbits: Vec<u64> = r.classes.iter().map(|c| c.orbit_m).collect();
            assert!(r.classes.iter().all(|c| c.m == 2));
            assert_eq!(orbits, vec![4, 2], "d2={d2}");
        }
    }

    #[test]
    fn area_never_beats_the_triangular_packing() {
        for d2 in (2u64..=300).filter(|&d| crate::arith::is_attainable(Z2, d)) {
            let r = solve_problem5(d2).unwrap();
            // S >= (sqrt 3 / 2) d2
            assert!(4 * r.s * r.s >= 3 * d2 * d2, "d2={d2}");
            for c in &r.classes {
                let t = &c.representative;
                assert!(t.is_feasible(d2 as i64));
                assert_eq!(t.doubled_area as u64, r.s);
            }
        }
    }
}
