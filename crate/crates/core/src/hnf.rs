//! Full-rank integer lattices in the plane, kept in row Hermite normal form.

use serde::{Deserialize, Serialize};

use crate::lattice::{LatticeKind, Point, SymmetryOp};

/// A full-rank sublattice of Z^2 with basis rows `(a, b)` and `(0, d)`,
/// `a > 0`, `d > 0`, `0 <= b < d`. The representation is unique per lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lattice2 {
    a: i64,
    b: i64,
    d: i64,
}

fn egcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = egcd(b, a.rem_euclid(b));
        // a = q b + r with r = a mod b
        let q = (a - a.rem_euclid(b)) / b;
        (g, y, x - q * y)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Lattice2 {
    /// Lattice generated by the given vectors; `None` unless they span a rank-2 lattice.
    pub fn from_generators(gens: &[Point]) -> Option<Self> {
        let mut r1: Point = [0, 0];
        let mut d = 0i64;
        for &g in gens {
            if g[0] == 0 {
                d = gcd(d, g[1]);
                continue;
            }
            if r1[0] == 0 {
                d = gcd(d, r1[1]);
                r1 = g;
                continue;
            }
            let (h, s, t) = egcd(r1[0], g[0]);
            let new_r1 = [s * r1[0] + t * g[0], s * r1[1] + t * g[1]];
            let kill = [
                (g[0] / h) * r1[0] - (r1[0] / h) * g[0],
                (g[0] / h) * r1[1] - (r1[0] / h) * g[1],
            ];
            debug_assert_eq!(kill[0], 0);
            d = gcd(d, kill[1]);
            r1 = new_r1;
        }
        if r1[0] == 0 || d == 0 {
            return None;
        }
        if r1[0] < 0 {
            r1 = [-r1[0], -r1[1]];
        }
        Some(Lattice2 {
            a: r1[0],
            b: r1[1].rem_euclid(d),
            d,
        })
    }

    pub fn scaled_identity(n: i64) -> Self {
        Lattice2 { a: n, b: 0, d: n }
    }

    pub fn basis(&self) -> [Point; 2] {
        [[self.a, self.b], [0, self.d]]
    }

    pub fn hnf(&self) -> (i64, i64, i64) {
        (self.a, self.b, self.d)
    }

    /// Index in Z^2.
    pub fn det(&self) -> i64 {
        self.a * self.d
    }

    pub fn contains(&self, p: Point) -> bool {
        if p[0].rem_euclid(self.a) != 0 {
            return false;
        }
        let k = p[0] / self.a;
        (p[1] - k * self.b).rem_euclid(self.d) == 0
    }

    /// Canonical coset representative in the box `[0, a) x [0, d)`.
    pub fn reduce(&self, p: Point) -> Point {
        let k = p[0].div_euclid(self.a);
        let x = p[0] - k * self.a;
        let y = (p[1] - k * self.b).rem_euclid(self.d);
        [x, y]
    }

    /// Index of the coset of `p` in `0..det()`.
    pub fn coset_index(&self, p: Point) -> usize {
        let r = self.reduce(p);
        (r[0] * self.d + r[1]) as usize
    }

    pub fn contains_lattice(&self, other: &Lattice2) -> bool {
        other.basis().iter().all(|&v| self.contains(v))
    }

    /// Intersection via the dual: `L1 ∩ L2 = (L1* + L2*)*`.
    pub fn intersect(&self, other: &Lattice2) -> Lattice2 {
        let m = self.det() as i128 * other.det() as i128;
        let dual = |l: &Lattice2, f: i128| -> [[i128; 2]; 2] {
            // det(l) * l* has rows (d, 0), (-b, a)
            [[f * l.d as i128, 0], [-f * l.b as i128, f * l.a as i128]]
        };
        let g1 = dual(self, other.det() as i128);
        let g2 = dual(other, self.det() as i128);
        let gens: Vec<Point> = g1
            .iter()
            .chain(g2.iter())
            .map(|r| [r[0] as i64, r[1] as i64])
            .collect();
        let sum = Lattice2::from_generators(&gens).expect("dual sum has full rank");
        let det_sum = sum.det() as i128;
        let (a, b, d) = (sum.a as i128, sum.b as i128, sum.d as i128);
        let rows = [[m * d, 0], [-m * b, m * a]];
        let mut out = Vec::new();
        for r in rows {
            debug_assert_eq!(r[0] % det_sum, 0);
            debug_assert_eq!(r[1] % det_sum, 0);
            out.push([(r[0] / det_sum) as i64, (r[1] / det_sum) as i64]);
        }
        Lattice2::from_generators(&out).expect("intersection has full rank")
    }

    pub fn transform(&self, g: &SymmetryOp) -> Lattice2 {
        let [u, v] = self.basis();
        Lattice2::from_generators(&[g.apply(u), g.apply(v)]).expect("unimodular image")
    }

    /// Gauss-reduced basis under the quadratic form of `kind`; the first vector is a shortest vector.
    pub fn reduced_basis(&self, kind: LatticeKind) -> [Point; 2] {
        let [mut u, mut v] = self.basis();
        loop {
            if kind.norm(u) > kind.norm(v) {
                std::mem::swap(&mut u, &mut v);
            }
            let nu = kind.norm(u);
            let b2 = kind.dot2(u, v);
            // mu = round(<u, v> / |u|^2) = round(b2 / (2 nu))
            let mu = (b2 as f64 / (2 * nu) as f64).round() as i64;
            if mu == 0 {
                break;
            }
            v = [v[0] - mu * u[0], v[1] - mu * u[1]];
            if kind.norm(v) >= nu {
                break;
            }
        }
        if kind.norm(u) > kind.norm(v) {
            std::mem::swap(&mut u, &mut v);
        }
        [u, v]
    }

    pub fn min_norm(&self, kind: LatticeKind) -> i64 {
        kind.norm(self.reduced_basis(kind)[0])
    }

    /// Nonzero lattice vectors with norm at most `bound` (both signs).
    pub fn short_vectors(&self, kind: LatticeKind, bound: i64) -> Vec<Point> {
        let [u, v] = self.reduced_basis(kind);
        // For a reduced basis, |i u + j v|^2 >= (3/4) max(i,j)^2 min|.|^2 roughly; scan generously.
        let nu = kind.norm(u).max(1);
        let r = ((4 * bound) as f64 / (3 * nu) as f64).sqrt().ceil() as i64 + 2;
        let mut out = Vec::new();
        for i in -r..=r {
            for j in -r..=r {
                if i == 0 && j == 0 {
                    continue;
                }
                let w = [i * u[0] + j * v[0], i * u[1] + j * v[1]];
                if kind.norm(w) <= bound {
                    out.push(w);
                }
            }
        }
        out.sort_by_key(|w| (kind.norm(*w), *w));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hnf_of_simple_generators() {
        let l = Lattice2::from_generators(&[[2, 0], [0, 2]]).unwrap();
        assert_eq!(l.hnf(), (2, 0, 2));
        let l = Lattice2::from_generators(&[[1, 1], [-1, 1]]).unwrap();
        assert_eq!(l.det(), 2);
        assert!(l.contains([2, 0]) && l.contains([1, -1]) && !l.contains([1, 0]));
        assert!(Lattice2::from_generators(&[[1, 2], [2, 4]]).is_none());
    }

    #[test]
    fn intersecting_mirror_sublattices_for_d2_7() {
        // (1,2) and its 60-degree rotation (-2,3); the mirror pair is (2,1), (-1,3).
        let l1 = Lattice2::from_generators(&[[1, 2], [-2, 3]]).unwrap();
        let l2 = Lattice2::from_generators(&[[2, 1], [-1, 3]]).unwrap();
        assert_eq!(l1.det(), 7);
        assert_eq!(l2.det(), 7);
        let i = l1.intersect(&l2);
        assert_eq!(i, Lattice2::scaled_identity(7));
    }

    #[test]
    fn reduced_basis_finds_shortest() {
        let l = Lattice2::from_generators(&[[1, 0], [100, 1]]).unwrap();
        let [u, v] = l.reduced_basis(LatticeKind::Z2);
        assert_eq!(LatticeKind::Z2.norm(u), 1);
        assert_eq!(LatticeKind::Z2.norm(v), 1);
        let l = Lattice2::from_generators(&[[0, 7], [-7, 7]]).unwrap();
        assert_eq!(l.min_norm(LatticeKind::A2), 49);
    }

    fn arb_lattice() -> impl Strategy<Value = Lattice2> {
        (-6i64..6, -6i64..6, -6i64..6, -6i64..6)
            .prop_filter_map("full rank", |(a, b, c, d)| {
                Lattice2::from_generators(&[[a, b], [c, d]])
            })
    }

    proptest! {
        #[test]
        fn intersection_is_exactly_common_membership(l1 in arb_lattice(), l2 in arb_lattice()) {
            let i = l1.intersect(&l2);
            prop_assert!(l1.contains_lattice(&i));
            prop_assert!(l2.contains_lattice(&i));
            for x in -20i64..20 {
                for y in -20i64..20 {
                    prop_assert_eq!(i.contains([x, y]), l1.contains([x, y]) && l2.contains([x, y]));
                }
            }
        }

        #[test]
        fn generators_are_members_and_reduce_is_canonical(a in -9i64..9, b in -9i64..9, c in -9i64..9, d in -9i64..9, x in -50i64..50, y in -50i64..50) {
            if let Some(l) = Lattice2::from_generators(&[[a, b], [c, d]]) {
                prop_assert!(l.contains([a, b]) && l.contains([c, d]));
                prop_assert_eq!(l.det(), (a * d - b * c).abs());
                let r = l.reduce([x, y]);
                prop_assert!(l.contains([x - r[0], y - r[1]]));
                prop_assert_eq!(l.reduce(r), r);
                let [u, v] = l.basis();
                prop_assert_eq!(l.reduce([x + 3 * u[0] - v[0], y + 3 * u[1] - v[1]]), r);
            }
        }
    }
}
