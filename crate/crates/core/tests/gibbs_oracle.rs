use hardcore::gibbs::{
    finite_gibbs_probability, mcmc_run, partition_polynomial, McmcOptions, Region,
};
use hardcore::torus::Torus;
use hardcore::{LatticeKind, Point, Vec2i};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn kind_strategy() -> impl Strategy<Value = LatticeKind> {
    prop_oneof![Just(LatticeKind::A2), Just(LatticeKind::H2), Just(LatticeKind::Z2)]
}

fn diff(p: Point, q: Point) -> Point {
    [p[0] - q[0], p[1] - q[1]]
}

/// Counts by size of all subsets of `points` that are pairwise at squared distance >= d2
/// and keep that distance from every point of `outside`.
fn naive_counts(kind: LatticeKind, points: &[Point], outside: &[Point], d2: u64) -> Vec<u128> {
    let n = points.len();
    let ok: Vec<bool> = points
        .iter()
        .map(|&p| outside.iter().all(|&q| kind.norm(diff(p, q)) as u64 >= d2))
        .collect();
    let adj: Vec<u32> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && (kind.norm(diff(points[i], points[j])) as u64) < d2)
                .fold(0u32, |m, j| m | 1 << j)
        })
        .collect();
    let mut counts = vec![0u128; n + 1];
    'outer: for mask in 0u32..1 << n {
        for i in 0..n {
            if mask >> i & 1 == 1 && (!ok[i] || adj[i] & mask != 0) {
                continue 'outer;
            }
        }
        counts[mask.count_ones() as usize] += 1;
    }
    while counts.len() > 1 && counts.last() == Some(&0) {
        counts.pop();
    }
    counts
}

fn region_strategy() -> impl Strategy<Value = (LatticeKind, Vec<Point>, Vec<Point>, u64)> {
    (
        kind_strategy(),
        proptest::collection::btree_set((0i64..6, 0i64..6), 0..20),
        proptest::collection::vec((-2i64..8, -2i64..8), 0..3),
        1u64..10,
    )
        .prop_map(|(kind, pts, out, d2)| {
            let points: Vec<Point> = pts.into_iter().map(|(x, y)| [x, y]).filter(|&p| kind.is_site(p)).collect();
            let outside: Vec<Point> = out
                .into_iter()
                .map(|(x, y)| [x, y])
                .filter(|&p| kind.is_site(p) && !points.contains(&p))
                .collect();
            (kind, points, outside, d2)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn polynomial_matches_naive((kind, points, outside, d2) in region_strategy()) {
        let region = Region::with_boundary(kind, points.clone(), outside.clone()).unwrap();
        let z = partition_polynomial(&region, d2, 36).unwrap();
        let mut sorted = points.clone();
        sorted.sort();
        prop_assert_eq!(z.coeffs, naive_counts(kind, &sorted, &outside, d2));
    }

    #[test]
    fn probabilities_sum_to_one((kind, points, outside, d2) in region_strategy(), num in 1i64..6, den in 1i64..4) {
        prop_assume!(points.len() <= 12);
        let region = Region::with_boundary(kind, points.clone(), outside).unwrap();
        let u = BigRational::new(BigInt::from(num), BigInt::from(den));
        let n = region.points.len();
        let mut total = BigRational::zero();
        for mask in 0u32..1 << n {
            let psi: Vec<Point> = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| region.points[i]).collect();
            total += finite_gibbs_probability(&psi, &region, d2, &u, 36).unwrap();
        }
        prop_assert!(total.is_one());
    }
}

#[test]
fn chain_mean_matches_exact_mean() {
    let torus = Torus::new(LatticeKind::Z2, Vec2i::new(4, 0), Vec2i::new(0, 4)).unwrap();
    let z = partition_polynomial(&Region::torus(torus.clone()), 2, 36).unwrap();
    let exact = z.mean_count(&BigRational::one());
    let exact = exact.numer().to_string().parse::<f64>().unwrap() / exact.denom().to_string().parse::<f64>().unwrap();
    let opts = McmcOptions {
        thin: 10,
        ..Default::default()
    };
    let s = mcmc_run(&torus, 2, 1.0, 200_000, 11, &opts, None).unwrap();
    let se = s.standard_error(50);
    assert!((s.mean_count() - exact).abs() < 3.0 * se, "{} vs {exact} (se {se})", s.mean_count());
}

#[test]
fn chain_distribution_matches_exact_probabilities() {
    // chi-square over particle numbers on a 3x3 torus at u = 2
    let torus = Torus::new(LatticeKind::Z2, Vec2i::new(3, 0), Vec2i::new(0, 3)).unwrap();
    let z = partition_polynomial(&Region::torus(torus.clone()), 2, 36).unwrap();
    let u = 2.0f64;
    let zval: f64 = z.coeffs.iter().enumerate().map(|(k, &c)| c as f64 * u.powi(k as i32)).sum();
    let opts = McmcOptions {
        thin: 50,
        shift_probability: 0.2,
        ..Default::default()
    };
    let s = mcmc_run(&torus, 2, u, 1_000_000, 5, &opts, None).unwrap();
    let n = s.count_trace.len() as f64;
    let mut chi2 = 0.0;
    let mut dof = 0;
    for (k, &c) in z.coeffs.iter().enumerate() {
        let expected = n * c as f64 * u.powi(k as i32) / zval;
        if expected < 5.0 {
            continue;
        }
        let observed = s.count_trace.iter().filter(|&&x| x == k).count() as f64;
        chi2 += (observed - expected).powi(2) / expected;
        dof += 1;
    }
    // generous bound: samples are thinned but still weakly correlated
    assert!(chi2 < 10.0 * dof as f64, "chi2 {chi2} over {dof} bins");
}
