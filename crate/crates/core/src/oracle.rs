//! Exact maximum packings on tori by branch and bound, and sliding witnesses.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::arith::{classify, CaseLabel};
use crate::error::{Error, Result};
use crate::hnf::Lattice2;
use crate::lattice::{add, cross, diophantine_solutions, scale, sub, LatticeKind, Point, Vec2i};
use crate::mtriangle::solve_problem5;
use crate::pgs::{mda_sublattices, Sublattice};
use crate::torus::{conflict_offsets, Bitset, ConflictGraph, Torus};

pub const DEFAULT_BUDGET: usize = 600;

/// Cap on stored optimizers when enumerating.
pub const OPTIMIZER_CAP: usize = 200_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackingResult {
    pub p1: Vec2i,
    pub p2: Vec2i,
    pub site_count: usize,
    pub d2: u64,
    pub max_count: usize,
    /// Sorted optimizers (sorted site lists); empty unless enumeration was requested.
    pub optimizers: Vec<Vec<usize>>,
    /// Exact number of optimizers, when enumerated and not truncated.
    pub optimizer_count: Option<usize>,
    pub truncated: bool,
    /// Branch-and-bound nodes visited.
    pub nodes: u64,
}

struct Mis<'a> {
    g: &'a ConflictGraph,
    best: usize,
    collect: bool,
    found: Vec<Vec<usize>>,
    stack: Vec<usize>,
    nodes: u64,
    cap: usize,
    /// Stop as soon as a set of this size is recorded.
    halt_at: usize,
    halted: bool,
}

impl Mis<'_> {
    fn record(&mut self) {
        let size = self.stack.len();
        if size >= self.halt_at {
            self.halted = true;
        }
        if size > self.best {
            self.best = size;
            self.found.clear();
        }
        if self.collect && size == self.best && self.found.len() < self.cap {
            let mut s = self.stack.clone();
            s.sort_unstable();
            self.found.push(s);
        }
    }

    /// Colour-ordered branch and bound: `p` is greedily covered by cliques of the conflict
    /// graph, and vertices are branched on from the last cover class backwards, so the class
    /// number bounds what the remaining prefix can still contribute.
    fn expand(&mut self, mut p: Bitset) {
        self.nodes += 1;
        let mut order = Vec::new();
        let mut colour = Vec::new();
        let mut rest = p.clone();
        let mut k = 0;
        while let Some(v) = rest.first() {
            k += 1;
            rest.remove(v);
            order.push(v);
            colour.push(k);
            let mut cand = rest.clone();
            cand.intersect_with(&self.g.masks[v]);
            while let Some(w) = cand.first() {
                rest.remove(w);
                cand.remove(w);
                cand.intersect_with(&self.g.masks[w]);
                order.push(w);
                colour.push(k);
            }
        }
        for i in (0..order.len()).rev() {
            if self.halted {
                return;
            }
            let reach = self.stack.len() + colour[i];
            if reach < self.best || (!self.collect && reach == self.best) {
                return;
            }
            let v = order[i];
            p.remove(v);
            let mut next = p.clone();
            next.difference_with(&self.g.masks[v]);
            self.stack.push(v);
            if next.is_empty() {
                self.record();
            } else {
                self.expand(next);
            }
            self.stack.pop();
        }
    }

    fn run(&mut self, p: Bitset) {
        if p.is_empty() {
            self.record();
        } else {
            self.expand(p);
        }
    }
}

fn greedy(g: &ConflictGraph, start: Option<usize>) -> usize {
    let mut free = g.free_vertices();
    let mut n = 0;
    if let Some(s) = start {
        if !free.contains(s) {
            return 0;
        }
        free.remove(s);
        free.difference_with(&g.masks[s]);
        n += 1;
    }
    while let Some(v) = free.first() {
        free.remove(v);
        free.difference_with(&g.masks[v]);
        n += 1;
    }
    n
}

/// Maximum independent set size of the graph restricted to sets containing `forced` (if given).
pub fn max_independent(g: &ConflictGraph, forced: Option<usize>) -> (usize, u64) {
    let mut free = g.free_vertices();
    let mut stack = Vec::new();
    if let Some(s) = forced {
        if !free.contains(s) {
            return (0, 0);
        }
        free.remove(s);
        free.difference_with(&g.masks[s]);
        stack.push(s);
    }
    let mut m = Mis {
        g,
        best: greedy(g, forced),
        collect: false,
        found: Vec::new(),
        stack,
        nodes: 0,
        cap: 0,
        halt_at: usize::MAX,
        halted: false,
    };
    m.run(free);
    (m.best, m.nodes)
}

/// Maximum independent set size among the vertices of `p`.
pub fn max_independent_within(g: &ConflictGraph, p: Bitset) -> usize {
    let mut rest = p.clone();
    let mut lower = 0;
    while let Some(v) = rest.first() {
        rest.remove(v);
        rest.difference_with(&g.masks[v]);
        lower += 1;
    }
    let mut m = Mis {
        g,
        best: lower,
        collect: false,
        found: Vec::new(),
        stack: Vec::new(),
        nodes: 0,
        cap: 0,
        halt_at: usize::MAX,
        halted: false,
    };
    m.run(p);
    m.best
}

/// Whether the vertices of `p` contain an independent set of size `target`.
pub fn has_independent_set(g: &ConflictGraph, p: Bitset, target: usize) -> bool {
    if target == 0 {
        return true;
    }
    let mut m = Mis {
        g,
        best: target - 1,
        collect: false,
        found: Vec::new(),
        stack: Vec::new(),
        nodes: 0,
        cap: 0,
        halt_at: target,
        halted: false,
    };
    m.run(p);
    m.halted
}

/// All independent sets of size `target` containing `forced`.
fn enumerate_containing(g: &ConflictGraph, forced: usize, target: usize, cap: usize) -> (Vec<Vec<usize>>, u64) {
    let mut free = g.free_vertices();
    if !free.contains(forced) {
        return (Vec::new(), 0);
    }
    free.remove(forced);
    free.difference_with(&g.masks[forced]);
    let mut m = Mis {
        g,
        best: target,
        collect: true,
        found: Vec::new(),
        stack: vec![forced],
        nodes: 0,
        cap,
        halt_at: usize::MAX,
        halted: false,
    };
    m.run(free);
    let found = m.found.into_iter().filter(|s| s.len() == target).collect();
    (found, m.nodes)
}

/// Site permutations generating a group that acts transitively on sites.
fn transitive_symmetries(torus: &Torus) -> Vec<Vec<usize>> {
    let mut gens: Vec<Vec<usize>> = torus
        .translations()
        .into_iter()
        .map(|t| torus.translate_perm(t))
        .collect();
    if torus.kind == LatticeKind::H2 {
        // inversion through a bond midpoint swaps the parities
        gens.push(
            (0..torus.site_count)
                .map(|i| torus.index_of(sub([1, 1], torus.point(i))).expect("site"))
                .collect(),
        );
    }
    gens
}

pub fn max_packing_torus(
    torus: &Torus,
    d2: u64,
    enumerate_all: bool,
    budget: usize,
) -> Result<PackingResult> {
    if torus.site_count > budget {
        return Err(Error::Budget {
            what: "packing oracle sites".into(),
            needed: torus.site_count,
            budget,
        });
    }
    let g = torus.conflict_graph(d2);
    // Every nonempty packing is equivalent under a torus symmetry to one containing site 0.
    let s0 = 0;
    let (max_count, mut nodes) = if g.blocked[s0] {
        (0, 0)
    } else {
        max_independent(&g, Some(s0))
    };
    let mut out = PackingResult {
        p1: torus.p1,
        p2: torus.p2,
        site_count: torus.site_count,
        d2,
        max_count,
        optimizers: Vec::new(),
        optimizer_count: None,
        truncated: false,
        nodes,
    };
    if !enumerate_all {
        return Ok(out);
    }
    if max_count == 0 {
        out.optimizers = vec![Vec::new()];
        out.optimizer_count = Some(1);
        return Ok(out);
    }
    let (seeds, n2) = enumerate_containing(&g, s0, max_count, OPTIMIZER_CAP);
    nodes += n2;
    let gens = transitive_symmetries(torus);
    let mut all: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut frontier: Vec<Vec<usize>> = Vec::new();
    for s in seeds {
        if all.insert(s.clone()) {
            frontier.push(s);
        }
    }
    while let Some(c) = frontier.pop() {
        if all.len() >= OPTIMIZER_CAP {
            out.truncated = true;
            break;
        }
        for p in &gens {
            let mut img: Vec<usize> = c.iter().map(|&i| p[i]).collect();
            img.sort_unstable();
            if all.insert(img.clone()) {
                frontier.push(img);
            }
        }
    }
    out.nodes = nodes;
    out.optimizer_count = (!out.truncated).then_some(all.len());
    out.optimizers = all.into_iter().collect();
    Ok(out)
}

/// Up to `cap` maximum packings containing site 0.
pub fn optimizers_through_origin(torus: &Torus, d2: u64, cap: usize, budget: usize) -> Result<Vec<Vec<usize>>> {
    if torus.site_count > budget {
        return Err(Error::Budget {
            what: "packing oracle sites".into(),
            needed: torus.site_count,
            budget,
        });
    }
    let g = torus.conflict_graph(d2);
    if g.blocked[0] {
        return Ok(Vec::new());
    }
    let (max_count, _) = max_independent(&g, Some(0));
    Ok(enumerate_containing(&g, 0, max_count, cap).0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityCheckTorus {
    pub p1: Vec2i,
    pub p2: Vec2i,
    pub site_count: usize,
    pub max_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityCheck {
    pub sigma: u64,
    pub tori: Vec<DensityCheckTorus>,
    pub holds: bool,
}

/// Checks `max_count / site_count = 1 / sigma` on two tori of different sizes whose periods
/// are multiples of a reduced basis of an MDA sublattice.
pub fn verify_density_formula(kind: LatticeKind, d2: u64, budget: usize) -> Result<DensityCheck> {
    let classes = mda_sublattices(kind, d2)?;
    let sub = classes[0].representative;
    let sigma = sub.index;
    let [u, w] = sub.basis;
    let mut tori = Vec::new();
    let mut sizes = BTreeSet::new();
    for (k1, k2) in [(2, 2), (2, 3), (3, 3), (3, 4), (1, 2), (1, 3), (1, 1)] {
        if tori.len() == 2 {
            break;
        }
        let n = sigma as usize * k1 * k2;
        if n > budget || sizes.contains(&n) {
            continue;
        }
        let p1 = Vec2i::new(k1 as i64 * u.da, k1 as i64 * u.db);
        let p2 = Vec2i::new(k2 as i64 * w.da, k2 as i64 * w.db);
        let t = Torus::new(kind, p1, p2)?;
        let r = max_packing_torus(&t, d2, false, budget)?;
        sizes.insert(n);
        tori.push(DensityCheckTorus {
            p1,
            p2,
            site_count: t.site_count,
            max_count: r.max_count,
        });
    }
    if tori.len() < 2 {
        return Err(Error::Budget {
            what: "two commensurate tori".into(),
            needed: 2 * sigma as usize,
            budget,
        });
    }
    let holds = tori
        .iter()
        .all(|t| (t.max_count as u64) * sigma == t.site_count as u64);
    Ok(DensityCheck { sigma, tori, holds })
}

/// Two maximal packings on a torus that differ by shifting a band of rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlidingWitness {
    pub p1: Vec2i,
    pub p2: Vec2i,
    pub count: usize,
    /// Row direction (plane coordinates).
    pub direction: Point,
    /// Translation applied to the band.
    pub shift: Point,
    /// "band" (one block of rows shifted) or "staircase" (the shift accumulates across evenly
    /// spaced row interfaces).
    pub pattern: String,
    /// Rows in the band, or rows per staircase step.
    pub band_rows: usize,
    pub base: Vec<usize>,
    pub shifted: Vec<usize>,
    /// Where the base packing came from: "sublattice" or "oracle".
    pub source: String,
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

/// Sublattices that may carry maximal lattice packings, ignoring the sliding exclusion.
fn candidate_lattices(kind: LatticeKind, d2: u64) -> Vec<Lattice2> {
    let triangular = |n: u64| -> Vec<Lattice2> {
        diophantine_solutions(LatticeKind::A2, n)
            .into_iter()
            .flat_map(|(a, b)| {
                let (a, b) = (a as i64, b as i64);
                [
                    Lattice2::from_generators(&[[a, b], [-b, a + b]]),
                    Lattice2::from_generators(&[[b, a], [-a, a + b]]),
                ]
            })
            .flatten()
            .collect()
    };
    let base: Vec<Lattice2> = match (kind, classify(kind, d2)) {
        (_, CaseLabel::NotAttainable) => Vec::new(),
        (LatticeKind::A2, _) => triangular(d2),
        (LatticeKind::H2, CaseLabel::HC { dstar2 }) if !crate::arith::H2_SLIDING.contains(&d2) => {
            triangular(dstar2)
        }
        (LatticeKind::H2, CaseLabel::HA1 | CaseLabel::HA2 | CaseLabel::HB) => triangular(d2),
        (LatticeKind::H2, _) => Vec::new(),
        (LatticeKind::Z2, _) => solve_problem5(d2)
            .map(|r| r.classes.iter().map(|c| c.representative.sublattice()).collect())
            .unwrap_or_default(),
    };
    let mut out = BTreeSet::new();
    for l in base {
        for g in kind.point_group() {
            out.insert(l.transform(&g));
        }
    }
    out.into_iter().collect()
}

fn admissible(torus: &Torus, occ: &Bitset, offsets: &[Point]) -> bool {
    occ.iter().all(|i| {
        let p = torus.point(i);
        offsets.iter().all(|&w| match torus.index_of(add(p, w)) {
            Some(j) => !occ.contains(j),
            None => true,
        })
    })
}

/// Primitive translation vector along `w`.
fn primitive_translation(kind: LatticeKind, w: Point) -> Point {
    let g = gcd(w[0], w[1]);
    let u = [w[0] / g, w[1] / g];
    let mut k = 1;
    while !kind.is_translation(scale(k, u)) {
        k += 1;
    }
    scale(k, u)
}

struct BandSearch<'a> {
    torus: &'a Torus,
    offsets: Vec<Point>,
    d2: u64,
}

impl BandSearch<'_> {
    /// Shifts row `k` (in sorted row order) of `base` by `steps(k) * shift`.
    fn shifted(&self, base: &[usize], rows: &[i64], row_of: &dyn Fn(usize) -> i64, shift: Point, steps: &dyn Fn(usize) -> i64) -> Bitset {
        let t = self.torus;
        let mut occ = Bitset::new(t.site_count);
        for &i in base {
            let k = rows.binary_search(&row_of(i)).expect("row of a base site");
            let p = add(t.point(i), scale(steps(k), shift));
            occ.insert(t.index_of(p).expect("translation"));
        }
        occ
    }

    /// Tries band shifts of `base` along translation direction `u`, and for sublattice packings
    /// also staircases: `m` evenly spaced interfaces each shifted by `t`, where `m t` is a period
    /// of the packing.
    fn try_direction(
        &self,
        base: &[usize],
        u: Point,
        lattice: Option<&Lattice2>,
    ) -> Option<(Point, usize, Vec<usize>, &'static str)> {
        let t = self.torus;
        let [p1, p2] = t.period_lattice().basis();
        let modulus = gcd(cross(u, p1), cross(u, p2));
        if modulus == 0 {
            return None;
        }
        let row_of = |i: usize| cross(u, t.point(i)).rem_euclid(modulus);
        let rows: Vec<i64> = base.iter().map(|&i| row_of(i)).collect::<BTreeSet<_>>().into_iter().collect();
        let nrows = rows.len();
        if nrows < 2 {
            return None;
        }
        // Rows within the exclusion distance of one another.
        let reach = {
            let gaps: Vec<i64> = rows.windows(2).map(|w| w[1] - w[0]).collect();
            let min_gap = gaps.into_iter().min().unwrap_or(modulus).max(1) as f64;
            let h = min_gap / (self.torus.kind.norm(u) as f64).sqrt();
            ((self.d2 as f64).sqrt() / h).ceil() as usize + 1
        };
        let max_width = (nrows - 1).min(reach + 1);
        let starts: Vec<usize> = if lattice.is_none() { (0..nrows).collect() } else { vec![0] };
        let occ0 = Bitset::from_indices(t.site_count, base);
        let ok = |occ: &Bitset| *occ != occ0 && occ.count() == base.len() && admissible(t, occ, &self.offsets);
        let mut j = 1;
        loop {
            let shift = scale(j, u);
            if t.period_lattice().contains(shift) || j > 4 * t.site_count as i64 {
                break;
            }
            for &s in &starts {
                for width in 1..=max_width {
                    let steps = |k: usize| i64::from((k + nrows - s) % nrows < width);
                    let occ = self.shifted(base, &rows, &row_of, shift, &steps);
                    if ok(&occ) {
                        return Some((shift, width, occ.iter().collect(), "band"));
                    }
                }
            }
            if let Some(lat) = lattice {
                for sign in [1, -1] {
                    let step = scale(sign, shift);
                    let m = (1..=nrows as i64).find(|&m| lat.contains(scale(m, step)));
                    let Some(m) = m.map(|m| m as usize) else { continue };
                    if m >= nrows {
                        continue;
                    }
                    let steps = |k: usize| (k * m / nrows) as i64;
                    let occ = self.shifted(base, &rows, &row_of, step, &steps);
                    if ok(&occ) {
                        return Some((step, nrows / m, occ.iter().collect(), "staircase"));
                    }
                }
            }
            j += 1;
        }
        None
    }

    fn directions(&self, bound: i64) -> Vec<Point> {
        let kind = self.torus.kind;
        let r = ((4 * bound) as f64 / 3.0).sqrt() as i64 + 2;
        let mut dirs = BTreeSet::new();
        for x in -r..=r {
            for y in 0..=r {
                if (y == 0 && x <= 0) || kind.norm([x, y]) > bound {
                    continue;
                }
                if kind.is_translation([x, y]) {
                    dirs.insert(primitive_translation(kind, [x, y]));
                }
            }
        }
        let mut v: Vec<Point> = dirs.into_iter().collect();
        v.sort_by_key(|&u| (kind.norm(u), u));
        v
    }
}

/// Searches for two maximal packings on the `l x l` torus related by a band shift.
///
/// Base packings are sublattice packings commensurate with the torus, or, when there are
/// none, oracle optimizers through site 0. Row directions range over translations of squared
/// length at most `4 d2`; `None` means no band shift preserves admissibility.
pub fn sliding_witness(kind: LatticeKind, d2: u64, l: i64, budget: usize) -> Result<Option<SlidingWitness>> {
    let torus = Torus::new(kind, Vec2i::new(l, 0), Vec2i::new(0, l))?;
    let search = BandSearch {
        torus: &torus,
        offsets: conflict_offsets(kind, d2),
        d2,
    };
    let mut bases: Vec<(Vec<usize>, Option<Lattice2>)> = candidate_lattices(kind, d2)
        .into_iter()
        .filter(|lat| torus.is_commensurate_with(lat))
        .map(|lat| {
            let s = Sublattice::new(kind, lat).expect("translation sublattice");
            let offset = s.coset_offsets()[0];
            let occ: Vec<usize> = (0..torus.site_count)
                .filter(|&i| lat.contains(sub(torus.point(i), offset)))
                .collect();
            (occ, Some(lat))
        })
        .collect();
    let source;
    if bases.is_empty() {
        bases = optimizers_through_origin(&torus, d2, 64, budget)?
            .into_iter()
            .map(|o| (o, None))
            .collect();
        source = "oracle";
    } else {
        source = "sublattice";
    }
    let dirs = search.directions(4 * d2 as i64);
    for (base, lattice) in &bases {
        for &u in &dirs {
            if let Some((shift, band_rows, shifted, pattern)) = search.try_direction(base, u, lattice.as_ref()) {
                return Ok(Some(SlidingWitness {
                    p1: torus.p1,
                    p2: torus.p2,
                    count: base.len(),
                    direction: u,
                    shift,
                    pattern: pattern.into(),
                    band_rows,
                    base: base.clone(),
                    shifted,
                    source: source.into(),
                }));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeKind::{A2, H2, Z2};

    fn torus(kind: LatticeKind, a: i64, b: i64) -> Torus {
        Torus::new(kind, Vec2i::new(a, 0), Vec2i::new(0, b)).unwrap()
    }

    fn brute_max(g: &ConflictGraph) -> usize {
        let n = g.n;
        let mut best = 0;
        for mask in 0u32..(1 << n) {
            let set: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            if set.len() > best && g.is_independent(&set) {
                best = set.len();
            }
        }
        best
    }

    #[test]
    fn checkerboard() {
        let r = max_packing_torus(&torus(Z2, 4, 4), 2, true, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.max_count, 8);
        assert_eq!(r.optimizer_count, Some(2));
    }

    #[test]
    fn matches_brute_force_on_small_tori() {
        for kind in LatticeKind::ALL {
            for (a, b) in [(3, 3), (4, 3), (4, 4), (5, 3)] {
                let t = torus(kind, a, b);
                if t.site_count > 20 {
                    continue;
                }
                for d2 in [1u64, 2, 3, 4, 5, 7] {
                    let g = t.conflict_graph(d2);
                    let r = max_packing_torus(&t, d2, false, DEFAULT_BUDGET).unwrap();
                    assert_eq!(r.max_count, brute_max(&g), "{kind:?} {a}x{b} d2={d2}");
                }
            }
        }
    }

    #[test]
    fn enumeration_counts_brute_force_optimizers() {
        for kind in LatticeKind::ALL {
            let t = torus(kind, 4, 4);
            if t.site_count > 20 {
                continue;
            }
            for d2 in [2u64, 3, 4] {
                let g = t.conflict_graph(d2);
                let r = max_packing_torus(&t, d2, true, DEFAULT_BUDGET).unwrap();
                let n = g.n;
                let brute = (0u32..(1 << n))
                    .filter(|mask| {
                        let set: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                        set.len() == r.max_count && g.is_independent(&set)
                    })
                    .count();
                assert_eq!(r.optimizer_count, Some(brute), "{kind:?} d2={d2}");
            }
        }
    }

    #[test]
    fn spec_examples() {
        let r = max_packing_torus(&torus(Z2, 15, 15), 16, false, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.max_count, 15);
        let r = max_packing_torus(&torus(A2, 9, 9), 9, false, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.max_count, 9);
        assert!(matches!(
            max_packing_torus(&torus(Z2, 30, 30), 16, false, DEFAULT_BUDGET),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn honeycomb_uses_both_parities() {
        let t = torus(H2, 3, 3);
        let r = max_packing_torus(&t, 1, true, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.max_count, 18);
        assert_eq!(r.optimizer_count, Some(1));
        let r = max_packing_torus(&t, 3, true, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.max_count, 9);
        assert_eq!(r.optimizer_count, Some(2));
    }

    #[test]
    fn density_formula_small() {
        assert!(verify_density_formula(A2, 7, DEFAULT_BUDGET).unwrap().holds);
        assert!(verify_density_formula(Z2, 5, DEFAULT_BUDGET).unwrap().holds);
        assert!(verify_density_formula(H2, 12, DEFAULT_BUDGET).unwrap().holds);
    }

    #[test]
    fn sliding_examples() {
        let w = sliding_witness(Z2, 9, 12, DEFAULT_BUDGET).unwrap().expect("Z2 9 slides");
        assert_eq!(w.count, 16);
        assert!(sliding_witness(Z2, 16, 15, DEFAULT_BUDGET).unwrap().is_none());
    }
}
