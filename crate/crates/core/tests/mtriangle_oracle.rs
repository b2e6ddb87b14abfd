//! Problem (5) solver against a naive scan over a generous disk.

use hardcore::arith::is_attainable;
use hardcore::lattice::{isqrt, LatticeKind};
use hardcore::mtriangle::{solve_problem5, Triangle};
use rayon::prelude::*;

fn naive_min_area(d2: i64) -> i64 {
    let r = 2 * (isqrt(d2 as u64) as i64 + 1) + 2;
    let pts: Vec<[i64; 2]> = (-r..=r)
        .flat_map(|x| (-r..=r).map(move |y| [x, y]))
        .filter(|p| p[0] * p[0] + p[1] * p[1] <= r * r)
        .collect();
    pts.par_iter()
        .map(|&p| {
            let mut best = i64::MAX;
            for &q in &pts {
                let t = Triangle::new([[0, 0], p, q]);
                if t.doubled_area > 0 && t.doubled_area < best && t.is_feasible(d2) {
                    best = t.doubled_area;
                }
            }
            best
        })
        .min()
        .unwrap()
}

#[test]
fn minimal_area_matches_naive_scan_up_to_200() {
    for d2 in (2u64..=200).filter(|&d| is_attainable(LatticeKind::Z2, d)) {
        let r = solve_problem5(d2).unwrap();
        assert_eq!(r.s as i64, naive_min_area(d2 as i64), "d2={d2}");
    }
}
