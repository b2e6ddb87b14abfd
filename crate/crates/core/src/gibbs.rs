//! Finite-volume Gibbs distributions: exact partition polynomials, probabilities and sampling.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contour::TemplateGrid;
use crate::error::{Error, Result};
use crate::lattice::{add, LatticeKind, Point};
use crate::pgs::{realize, PgsCatalog};
use crate::torus::{conflict_offsets, Bitset, ConflictGraph, Torus};

pub const DEFAULT_EXACT_BUDGET: usize = 36;

#[derive(Debug, Clone)]
pub enum Boundary {
    /// No particles outside the region.
    Free,
    /// Occupied sites outside the region.
    Fixed(Vec<Point>),
    /// The region is the whole torus.
    Torus(Torus),
}

#[derive(Debug, Clone)]
pub struct Region {
    pub kind: LatticeKind,
    /// Plane coordinates of the sites, sorted.
    pub points: Vec<Point>,
    pub boundary: Boundary,
}

impl Region {
    pub fn free(kind: LatticeKind, points: Vec<Point>) -> Result<Self> {
        Region::with_boundary(kind, points, Vec::new())
    }

    pub fn with_boundary(kind: LatticeKind, mut points: Vec<Point>, outside: Vec<Point>) -> Result<Self> {
        if let Some(p) = points.iter().chain(&outside).find(|p| !kind.is_site(**p)) {
            return Err(Error::InvalidSite {
                kind,
                reason: format!("{p:?} is not a site"),
            });
        }
        points.sort();
        points.dedup();
        let boundary = if outside.is_empty() {
            Boundary::Free
        } else {
            Boundary::Fixed(outside)
        };
        Ok(Region {
            kind,
            points,
            boundary,
        })
    }

    pub fn torus(torus: Torus) -> Self {
        Region {
            kind: torus.kind,
            points: torus.points().to_vec(),
            boundary: Boundary::Torus(torus),
        }
    }

    /// Rectangle `[0, w) x [0, h)` in plane coordinates (sites only).
    pub fn rectangle(kind: LatticeKind, w: i64, h: i64) -> Self {
        let pts = (0..w)
            .flat_map(|x| (0..h).map(move |y| [x, y]))
            .filter(|&p| kind.is_site(p))
            .collect();
        Region::free(kind, pts).expect("sites only")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, p: Point) -> Option<usize> {
        match &self.boundary {
            Boundary::Torus(t) => t.index_of(p),
            _ => self.points.binary_search(&p).ok(),
        }
    }

    /// Exclusion graph inside the region; sites conflicting with the boundary are blocked.
    pub fn graph(&self, d2: u64) -> ConflictGraph {
        if let Boundary::Torus(t) = &self.boundary {
            return t.conflict_graph(d2);
        }
        let offsets = conflict_offsets(self.kind, d2);
        let outside: BTreeSet<Point> = match &self.boundary {
            Boundary::Fixed(o) => o.iter().copied().collect(),
            _ => BTreeSet::new(),
        };
        let mut adj = vec![Vec::new(); self.points.len()];
        let mut blocked = vec![false; self.points.len()];
        for (i, &p) in self.points.iter().enumerate() {
            for &w in &offsets {
                let q = add(p, w);
                if let Ok(j) = self.points.binary_search(&q) {
                    adj[i].push(j);
                }
                if outside.contains(&q) {
                    blocked[i] = true;
                }
            }
            if outside.contains(&p) {
                blocked[i] = true;
            }
            adj[i].sort_unstable();
        }
        ConflictGraph::new(adj, blocked)
    }
}

/// `Z(u) = sum_k c_k u^k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPolynomial {
    pub coeffs: Vec<u128>,
}

impl PartitionPolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, u: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * u + BigRational::from_integer(BigInt::from(*c));
        }
        acc
    }

    /// Number of compatible configurations (`Z(1)`).
    pub fn total(&self) -> u128 {
        self.coeffs.iter().sum()
    }

    /// Exact mean particle number at fugacity `u`.
    pub fn mean_count(&self, u: &BigRational) -> BigRational {
        let mut num = BigRational::zero();
        let mut pow = BigRational::one();
        for (k, c) in self.coeffs.iter().enumerate() {
            num += BigRational::from_integer(BigInt::from(*c) * BigInt::from(k)) * &pow;
            pow *= u;
        }
        num / self.eval(u)
    }
}

fn add_into(acc: &mut Vec<u128>, other: &[u128], shift: usize) {
    if acc.len() < other.len() + shift {
        acc.resize(other.len() + shift, 0);
    }
    for (k, c) in other.iter().enumerate() {
        acc[k + shift] += c;
    }
}

fn count_by_size(g: &ConflictGraph, p: Bitset, memo: &mut HashMap<Bitset, Vec<u128>>) -> Vec<u128> {
    let Some(v) = p.first() else {
        return vec![1];
    };
    if let Some(r) = memo.get(&p) {
        return r.clone();
    }
    let mut without = p.clone();
    without.remove(v);
    let mut with = without.clone();
    with.difference_with(&g.masks[v]);
    let mut out = count_by_size(g, without, memo);
    let w = count_by_size(g, with, memo);
    add_into(&mut out, &w, 1);
    memo.insert(p, out.clone());
    out
}

/// Independent-set counts by size over the free vertices of a conflict graph.
pub fn independence_polynomial(g: &ConflictGraph) -> PartitionPolynomial {
    let mut memo = HashMap::new();
    PartitionPolynomial {
        coeffs: count_by_size(g, g.free_vertices(), &mut memo),
    }
}

pub fn partition_polynomial(region: &Region, d2: u64, budget: usize) -> Result<PartitionPolynomial> {
    if region.len() > budget {
        return Err(Error::Budget {
            what: "exact partition function sites".into(),
            needed: region.len(),
            budget,
        });
    }
    Ok(independence_polynomial(&region.graph(d2)))
}

/// Whether `psi` lies in the region and is admissible and compatible with the boundary.
pub fn is_compatible(psi: &[Point], region: &Region, d2: u64) -> bool {
    let g = region.graph(d2);
    let mut idx = Vec::with_capacity(psi.len());
    for &p in psi {
        match region.index_of(p) {
            Some(i) => idx.push(i),
            None => return false,
        }
    }
    let distinct: BTreeSet<usize> = idx.iter().copied().collect();
    distinct.len() == idx.len() && g.is_independent(&idx)
}

/// `u^{#psi} / Z` for compatible `psi`, otherwise 0.
pub fn finite_gibbs_probability(
    psi: &[Point],
    region: &Region,
    d2: u64,
    u: &BigRational,
    budget: usize,
) -> Result<BigRational> {
    if !is_compatible(psi, region, d2) {
        return Ok(BigRational::zero());
    }
    let z = partition_polynomial(region, d2, budget)?;
    let mut w = BigRational::one();
    for _ in 0..psi.len() {
        w *= u;
    }
    Ok(w / z.eval(u))
}

/// Per-PGS fraction of correct templates.
pub fn order_parameter(occupied: &[usize], catalog: &PgsCatalog, grid: &TemplateGrid) -> Vec<f64> {
    let occ = Bitset::from_indices(grid.torus.site_count, occupied);
    catalog
        .all_pgs()
        .iter()
        .map(|p| {
            let phi = Bitset::from_indices(grid.torus.site_count, &realize(p, &grid.torus));
            let correct = grid.correct_cells(&occ, &phi);
            correct.iter().filter(|&&c| c).count() as f64 / grid.cell_count() as f64
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcOptions {
    /// Probability of a particle shift move instead of an insert/delete toggle.
    pub shift_probability: f64,
    /// Record a sample every `thin` steps.
    pub thin: u64,
    /// Steps discarded before recording.
    pub burn_in: u64,
}

impl Default for McmcOptions {
    fn default() -> Self {
        McmcOptions {
            shift_probability: 0.0,
            thin: 100,
            burn_in: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainStats {
    pub seed: u64,
    pub steps: u64,
    pub u: f64,
    pub insert: MoveStats,
    pub delete: MoveStats,
    pub shift: MoveStats,
    /// Particle number after every `thin` steps past burn-in.
    pub count_trace: Vec<usize>,
    /// Per-PGS order parameter at each recorded sample (when a catalog was given).
    pub order_trace: Vec<Vec<f64>>,
    pub final_state: Vec<usize>,
}

impl ChainStats {
    pub fn mean_count(&self) -> f64 {
        self.count_trace.iter().sum::<usize>() as f64 / self.count_trace.len().max(1) as f64
    }

    /// Batch-means standard error of the mean particle number.
    pub fn standard_error(&self, batches: usize) -> f64 {
        let n = self.count_trace.len();
        let b = n / batches.max(1);
        if b == 0 {
            return f64::INFINITY;
        }
        let means: Vec<f64> = (0..batches)
            .map(|k| self.count_trace[k * b..(k + 1) * b].iter().sum::<usize>() as f64 / b as f64)
            .collect();
        let m = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (batches as f64 - 1.0);
        (var / batches as f64).sqrt()
    }

    /// Largest per-PGS order parameter in the last sample.
    pub fn final_max_order(&self) -> Option<f64> {
        self.order_trace
            .last()
            .map(|v| v.iter().copied().fold(0.0, f64::max))
    }
}

/// Offsets used by shift moves: the shortest nonzero translations.
fn shift_offsets(kind: LatticeKind) -> Vec<Point> {
    let mut out: Vec<Point> = (-2..=2)
        .flat_map(|x| (-2..=2).map(move |y| [x, y]))
        .filter(|&w| kind.is_translation(w) && kind.norm(w) > 0)
        .collect();
    let min = out.iter().map(|&w| kind.norm(w)).min().expect("nonempty");
    out.retain(|&w| kind.norm(w) == min);
    out
}

/// Metropolis chain for the measure proportional to `u^{#psi}` on admissible configurations.
///
/// Toggle moves pick a uniform site and propose to flip its occupancy, accepted with
/// `min(1, u^{+-1})`. Shift moves pick a uniform site and a uniform shortest translation and,
/// if the site is occupied, propose moving the particle; the proposal is symmetric and the
/// weight unchanged, so admissible moves are always accepted.
pub fn mcmc_run(
    torus: &Torus,
    d2: u64,
    u: f64,
    steps: u64,
    seed: u64,
    options: &McmcOptions,
    order: Option<(&PgsCatalog, &TemplateGrid)>,
) -> Result<ChainStats> {
    if u <= 0.0 || !u.is_finite() {
        return Err(Error::Domain(format!("fugacity must be positive, got {u}")));
    }
    let g = torus.conflict_graph(d2);
    let n = torus.site_count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut occ = vec![false; n];
    let mut block = vec![0u32; n];
    let shifts = shift_offsets(torus.kind);
    let shift_perms: Vec<Vec<usize>> = shifts.iter().map(|&w| torus.translate_perm(w)).collect();
    let mut stats = ChainStats {
        seed,
        steps,
        u,
        insert: MoveStats::default(),
        delete: MoveStats::default(),
        shift: MoveStats::default(),
        count_trace: Vec::new(),
        order_trace: Vec::new(),
        final_state: Vec::new(),
    };
    let mut count = 0usize;
    let thin = options.thin.max(1);
    for step in 1..=steps {
        let i = rng.gen_range(0..n);
        if options.shift_probability > 0.0 && rng.gen::<f64>() < options.shift_probability {
            let k = rng.gen_range(0..shifts.len());
            if occ[i] {
                stats.shift.proposed += 1;
                let j = shift_perms[k][i];
                let conflict_with_i = u32::from(g.masks[j].contains(i));
                if !occ[j] && !g.blocked[j] && block[j] - conflict_with_i == 0 {
                    occ[i] = false;
                    for &x in &g.adj[i] {
                        block[x] -= 1;
                    }
                    occ[j] = true;
                    for &x in &g.adj[j] {
                        block[x] += 1;
                    }
                    stats.shift.accepted += 1;
                }
            }
        } else if occ[i] {
            stats.delete.proposed += 1;
            if u >= 1.0 && rng.gen::<f64>() >= 1.0 / u {
                // rejected
            } else {
                occ[i] = false;
                for &x in &g.adj[i] {
                    block[x] -= 1;
                }
                count -= 1;
                stats.delete.accepted += 1;
            }
        } else {
            stats.insert.proposed += 1;
            if !g.blocked[i] && block[i] == 0 && (u >= 1.0 || rng.gen::<f64>() < u) {
                occ[i] = true;
                for &x in &g.adj[i] {
                    block[x] += 1;
                }
                count += 1;
                stats.insert.accepted += 1;
            }
        }
        if step > options.burn_in && (step - options.burn_in) % thin == 0 {
            stats.count_trace.push(count);
            if let Some((cat, grid)) = order {
                let state: Vec<usize> = (0..n).filter(|&x| occ[x]).collect();
                stats.order_trace.push(order_parameter(&state, cat, grid));
            }
        }
    }
    stats.final_state = (0..n).filter(|&x| occ[x]).collect();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeKind::Z2, Vec2i};

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn small_polynomials() {
        let r = Region::rectangle(Z2, 2, 2);
        assert_eq!(partition_polynomial(&r, 4, 36).unwrap().coeffs, vec![1, 4]);
        let empty = Region::free(Z2, vec![]).unwrap();
        assert_eq!(partition_polynomial(&empty, 4, 36).unwrap().coeffs, vec![1]);
        let t = Torus::new(Z2, Vec2i::new(2, 0), Vec2i::new(0, 2)).unwrap();
        assert_eq!(
            partition_polynomial(&Region::torus(t), 2, 36).unwrap().coeffs,
            vec![1, 4, 2]
        );
    }

    #[test]
    fn probabilities() {
        let r = Region::rectangle(Z2, 2, 2);
        let one = ratio(1, 1);
        assert_eq!(finite_gibbs_probability(&[], &r, 4, &one, 36).unwrap(), ratio(1, 5));
        assert_eq!(
            finite_gibbs_probability(&[[0, 0], [1, 1]], &r, 4, &one, 36).unwrap(),
            ratio(0, 1)
        );
        let u = ratio(3, 2);
        // u / (1 + 4u)
        assert_eq!(finite_gibbs_probability(&[[1, 0]], &r, 4, &u, 36).unwrap(), ratio(3, 14));
        assert_eq!(finite_gibbs_probability(&[[5, 5]], &r, 4, &u, 36).unwrap(), ratio(0, 1));
    }

    #[test]
    fn boundary_blocks_sites() {
        let r = Region::with_boundary(Z2, vec![[0, 0], [1, 0], [2, 0]], vec![[-1, 0]]).unwrap();
        // (0,0) is within distance 1 of the boundary particle
        assert_eq!(partition_polynomial(&r, 2, 36).unwrap().coeffs, vec![1, 2]);
    }

    #[test]
    fn budget_is_enforced() {
        let r = Region::rectangle(Z2, 7, 7);
        assert!(matches!(partition_polynomial(&r, 2, 36), Err(Error::Budget { .. })));
    }

    #[test]
    fn chain_is_reproducible() {
        let t = Torus::new(Z2, Vec2i::new(4, 0), Vec2i::new(0, 4)).unwrap();
        let opts = McmcOptions {
            shift_probability: 0.3,
            ..Default::default()
        };
        let a = mcmc_run(&t, 2, 1.0, 5000, 7, &opts, None).unwrap();
        let b = mcmc_run(&t, 2, 1.0, 5000, 7, &opts, None).unwrap();
        assert_eq!(a.count_trace, b.count_trace);
        assert_eq!(a.final_state, b.final_state);
        assert!(t.conflict_graph(2).is_independent(&a.final_state));
    }

    #[test]
    fn tiny_fugacity_stays_nearly_empty() {
        let t = Torus::new(Z2, Vec2i::new(4, 0), Vec2i::new(0, 4)).unwrap();
        let s = mcmc_run(&t, 2, 1e-6, 20_000, 1, &McmcOptions::default(), None).unwrap();
        assert!(s.mean_count() < 0.01);
    }

    #[test]
    fn order_parameter_cases() {
        use crate::pgs::{pgs_catalog, template_lattice};
        let cat = pgs_catalog(Z2, 5).unwrap();
        let grid = TemplateGrid::new(&template_lattice(Z2, 5).unwrap(), 5, 5).unwrap();
        let pgs = cat.all_pgs();
        let phi = realize(&pgs[3], &grid.torus);
        let op = order_parameter(&phi, &cat, &grid);
        assert_eq!(op[3], 1.0);
        assert!(op.iter().enumerate().all(|(i, &v)| i == 3 || v < 1.0));
        assert!(order_parameter(&[], &cat, &grid).iter().all(|&v| v == 0.0));
        let vacancy: Vec<usize> = phi[1..].to_vec();
        assert_eq!(order_parameter(&vacancy, &cat, &grid)[3], 16.0 / 25.0);
    }

    #[test]
    fn naive_enumeration_agrees() {
        let r = Region::rectangle(Z2, 4, 3);
        for d2 in [1, 2, 4, 5] {
            let g = r.graph(d2);
            let mut naive = vec![0u128; r.len() + 1];
            for mask in 0u32..1 << r.len() {
                let set: Vec<usize> = (0..r.len()).filter(|&i| mask >> i & 1 == 1).collect();
                if g.is_independent(&set) {
                    naive[set.len()] += 1;
                }
            }
            while naive.last() == Some(&0) {
                naive.pop();
            }
            assert_eq!(partition_polynomial(&r, d2, 36).unwrap().coeffs, naive);
        }
    }
}
