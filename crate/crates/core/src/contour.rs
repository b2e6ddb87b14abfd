//! Templates, correct and frustrated cells, contours, Peierls scans and u^-2 insertions.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::PartitionPolynomial;
use crate::hnf::Lattice2;
use crate::lattice::{add, cross, sub, LatticeKind, Point};
use crate::oracle::{has_independent_set, max_independent_within};
use crate::pgs::{
    densest_sublattice_classes, pgs_catalog, pgs_of_classes, realize, template_of, Pgs, PgsCatalog,
    PgsClass, Template,
};
use crate::torus::{Bitset, ConflictGraph, Torus};

fn floor_div(a: i64, b: i64) -> i64 {
    if b > 0 {
        a.div_euclid(b)
    } else {
        (-a).div_euclid(-b)
    }
}

/// A torus tiled by `n1 x n2` template cells along the reduced template basis.
#[derive(Debug, Clone)]
pub struct TemplateGrid {
    pub template: Template,
    pub torus: Torus,
    pub n: [usize; 2],
    /// Template basis in plane coordinates.
    pub basis: [Point; 2],
    /// Cell index of each torus site.
    pub cell_of: Vec<usize>,
    /// Sites of each cell, sorted.
    pub cells: Vec<Vec<usize>>,
    pub neighbours: Vec<[usize; 8]>,
}

impl TemplateGrid {
    pub fn new(template: &Template, n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::Domain("template grid needs at least one cell".into()));
        }
        let kind = template.kind;
        let torus = template.torus(n1 as i64, n2 as i64)?;
        let [u, v] = template.lattice.basis;
        let b1 = kind.translation_to_plane(u);
        let b2 = kind.translation_to_plane(v);
        let det = cross(b1, b2);
        let count = n1 * n2;
        let mut cells = vec![Vec::new(); count];
        let mut cell_of = vec![0; torus.site_count];
        for (i, &x) in torus.points().iter().enumerate() {
            let s = floor_div(cross(x, b2), det).rem_euclid(n1 as i64) as usize;
            let t = floor_div(cross(b1, x), det).rem_euclid(n2 as i64) as usize;
            let c = s + n1 * t;
            cell_of[i] = c;
            cells[c].push(i);
        }
        debug_assert!(cells.iter().all(|c| c.len() as u64 == template.cell_sites()));
        let neighbours = (0..count)
            .map(|c| {
                let (i, j) = ((c % n1) as i64, (c / n1) as i64);
                let mut out = [0; 8];
                let mut k = 0;
                for dj in -1..=1 {
                    for di in -1..=1 {
                        if (di, dj) != (0, 0) {
                            let a = (i + di).rem_euclid(n1 as i64) as usize;
                            let b = (j + dj).rem_euclid(n2 as i64) as usize;
                            out[k] = a + n1 * b;
                            k += 1;
                        }
                    }
                }
                out
            })
            .collect();
        Ok(TemplateGrid {
            template: template.clone(),
            torus,
            n: [n1, n2],
            basis: [b1, b2],
            cell_of,
            cells,
            neighbours,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_coords(&self, c: usize) -> [usize; 2] {
        [c % self.n[0], c / self.n[0]]
    }

    pub fn cell_index(&self, i: i64, j: i64) -> usize {
        i.rem_euclid(self.n[0] as i64) as usize + self.n[0] * j.rem_euclid(self.n[1] as i64) as usize
    }

    /// Cells on which `occ` and `phi` disagree somewhere.
    pub fn irregular_cells(&self, occ: &Bitset, phi: &Bitset) -> Vec<bool> {
        let mut bad = vec![false; self.cell_count()];
        for x in 0..self.torus.site_count {
            if occ.contains(x) != phi.contains(x) {
                bad[self.cell_of[x]] = true;
            }
        }
        bad
    }

    /// Cells that are regular together with their eight neighbours.
    pub fn correct_cells(&self, occ: &Bitset, phi: &Bitset) -> Vec<bool> {
        let bad = self.irregular_cells(occ, phi);
        (0..self.cell_count())
            .map(|c| !bad[c] && self.neighbours[c].iter().all(|&d| !bad[d]))
            .collect()
    }

    pub fn sites_of(&self, cells: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = cells.iter().flat_map(|&c| self.cells[c].iter().copied()).collect();
        out.sort_unstable();
        out
    }

    /// Connected components (8-neighbourhood) of the cells with `mask[c]` set.
    pub fn components(&self, mask: &[bool]) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.cell_count()];
        let mut out = Vec::new();
        for start in 0..self.cell_count() {
            if !mask[start] || seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(c) = queue.pop_front() {
                for &d in &self.neighbours[c] {
                    if mask[d] && !seen[d] {
                        seen[d] = true;
                        comp.push(d);
                        queue.push_back(d);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// Realized ground states on a template grid.
#[derive(Debug, Clone)]
pub struct Phases {
    pub pgs: Vec<Pgs>,
    pub occupied: Vec<Bitset>,
    /// Particles of any phase in one template cell.
    pub per_cell: usize,
}

impl Phases {
    pub fn from_catalog(catalog: &PgsCatalog, grid: &TemplateGrid) -> Result<Self> {
        Phases::from_classes(&catalog.classes, grid)
    }

    pub fn from_classes(classes: &[PgsClass], grid: &TemplateGrid) -> Result<Self> {
        let pgs = pgs_of_classes(classes);
        let n = grid.torus.site_count;
        for p in &pgs {
            if !grid.torus.is_commensurate_with(&p.sublattice) {
                return Err(Error::Commensurability(format!(
                    "grid torus is not commensurate with {:?}",
                    p.sublattice.hnf()
                )));
            }
        }
        let occupied: Vec<Bitset> = pgs
            .iter()
            .map(|p| Bitset::from_indices(n, &realize(p, &grid.torus)))
            .collect();
        let per_cell = occupied
            .first()
            .map(|o| grid.cells[0].iter().filter(|&&x| o.contains(x)).count())
            .unwrap_or(0);
        Ok(Phases {
            pgs,
            occupied,
            per_cell,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectnessGrid {
    /// `correct[phi][cell]`.
    pub correct: Vec<Vec<bool>>,
    pub frustrated: Vec<bool>,
}

impl CorrectnessGrid {
    pub fn frustrated_count(&self) -> usize {
        self.frustrated.iter().filter(|&&f| f).count()
    }
}

pub fn correct_templates(grid: &TemplateGrid, occ: &Bitset, phases: &Phases) -> CorrectnessGrid {
    let correct: Vec<Vec<bool>> = phases.occupied.iter().map(|phi| grid.correct_cells(occ, phi)).collect();
    let frustrated = (0..grid.cell_count())
        .map(|c| correct.iter().all(|row| !row[c]))
        .collect();
    CorrectnessGrid { correct, frustrated }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Side {
    pub cells: Vec<usize>,
    /// The phase correct on every cell of this side adjacent to the support.
    pub phase: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContourData {
    pub support: Vec<usize>,
    /// Occupied sites in the support.
    pub psi: Vec<usize>,
    pub external_phase: Option<usize>,
    pub exterior: Option<Side>,
    pub interiors: Vec<Side>,
    /// Two or more complement components share the largest size.
    pub exterior_ambiguous: bool,
}

impl ContourData {
    /// Some side has no phase that is correct on all its cells adjacent to the support.
    pub fn is_malformed(&self) -> bool {
        self.exterior.iter().chain(&self.interiors).any(|s| s.phase.is_none())
    }
}

fn side_phase(grid: &TemplateGrid, cg: &CorrectnessGrid, support: &[bool], side: &[usize]) -> Option<usize> {
    let adjacent: Vec<usize> = side
        .iter()
        .copied()
        .filter(|&c| grid.neighbours[c].iter().any(|&d| support[d]))
        .collect();
    (0..cg.correct.len()).find(|&phi| adjacent.iter().all(|&c| cg.correct[phi][c]))
}

/// Connected components of the frustrated set with their exterior and interior sides.
/// On a torus the exterior is the largest complement component.
pub fn extract_contours(grid: &TemplateGrid, occ: &Bitset, phases: &Phases) -> Vec<ContourData> {
    let cg = correct_templates(grid, occ, phases);
    grid.components(&cg.frustrated)
        .into_iter()
        .map(|support| {
            let mut in_support = vec![false; grid.cell_count()];
            for &c in &support {
                in_support[c] = true;
            }
            let rest: Vec<bool> = in_support.iter().map(|&b| !b).collect();
            let mut sides = grid.components(&rest);
            sides.sort_by_key(|s| std::cmp::Reverse(s.len()));
            let exterior_ambiguous = sides.len() > 1 && sides[0].len() == sides[1].len();
            let mut sides = sides.into_iter().map(|cells| Side {
                phase: side_phase(grid, &cg, &in_support, &cells),
                cells,
            });
            let exterior = sides.next();
            let interiors: Vec<Side> = sides.collect();
            let psi = grid.sites_of(&support).into_iter().filter(|&x| occ.contains(x)).collect();
            ContourData {
                external_phase: exterior.as_ref().and_then(|s| s.phase),
                support,
                psi,
                exterior,
                interiors,
                exterior_ambiguous,
            }
        })
        .collect()
}

/// `#psi - #(phi on the support)`.
pub fn weight_exponent(gamma: &ContourData, grid: &TemplateGrid, phi: &Bitset) -> i64 {
    let reference = grid.sites_of(&gamma.support).iter().filter(|&&x| phi.contains(x)).count();
    gamma.psi.len() as i64 - reference as i64
}

/// Calls `f` on every independent set of the free vertices of `g`.
pub fn for_each_independent_set(g: &ConflictGraph, mut f: impl FnMut(&[usize])) {
    fn go(g: &ConflictGraph, p: Bitset, stack: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        let Some(v) = p.first() else {
            f(stack);
            return;
        };
        let mut without = p.clone();
        without.remove(v);
        let mut with = without.clone();
        with.difference_with(&g.masks[v]);
        go(g, without, stack, f);
        stack.push(v);
        go(g, with, stack, f);
        stack.pop();
    }
    go(g, g.free_vertices(), &mut Vec::new(), &mut f);
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContourRepresentation {
    /// Coefficients of `u^{#phi(V)} * sum prod w(Gamma)` grouped by total exponent.
    pub polynomial: PartitionPolynomial,
    pub configurations: u64,
    /// Configurations whose contours do not form a compatible collection.
    pub incompatible: u64,
}

/// Expands every admissible configuration of the grid torus into its contour collection and
/// sums `u^{#phi(V)} prod_i u^{w(Gamma_i)}` over the compatible ones.
pub fn contour_representation(
    grid: &TemplateGrid,
    d2: u64,
    phases: &Phases,
    budget: usize,
) -> Result<ContourRepresentation> {
    let n = grid.torus.site_count;
    if n > budget {
        return Err(Error::Budget {
            what: "contour representation sites".into(),
            needed: n,
            budget,
        });
    }
    let g = grid.torus.conflict_graph(d2);
    let volume = (phases.per_cell * grid.cell_count()) as i64;
    let mut coeffs: Vec<u128> = Vec::new();
    let mut configurations = 0;
    let mut incompatible = 0;
    for_each_independent_set(&g, |set| {
        configurations += 1;
        let occ = Bitset::from_indices(n, set);
        let contours = extract_contours(grid, &occ, phases);
        let mut exponent = volume;
        let mut ok = true;
        if contours.is_empty() {
            ok = phases.occupied.iter().any(|phi| *phi == occ);
        }
        for gamma in &contours {
            if gamma.is_malformed() {
                ok = false;
            }
            exponent += gamma.psi.len() as i64 - (phases.per_cell * gamma.support.len()) as i64;
        }
        if !ok || exponent < 0 {
            incompatible += 1;
            return;
        }
        let e = exponent as usize;
        if coeffs.len() <= e {
            coeffs.resize(e + 1, 0);
        }
        coeffs[e] += 1;
    });
    Ok(ContourRepresentation {
        polynomial: PartitionPolynomial { coeffs },
        configurations,
        incompatible,
    })
}

pub const DEFAULT_MAX_TEMPLATES: usize = 4;

/// Connected (8-neighbourhood) cell sets of size at most `k`, up to translation,
/// normalized to nonnegative coordinates touching both axes.
pub fn cell_animals(k: usize) -> Vec<Vec<[i64; 2]>> {
    fn normalize(mut s: Vec<[i64; 2]>) -> Vec<[i64; 2]> {
        let mi = s.iter().map(|c| c[0]).min().unwrap_or(0);
        let mj = s.iter().map(|c| c[1]).min().unwrap_or(0);
        for c in &mut s {
            c[0] -= mi;
            c[1] -= mj;
        }
        s.sort_unstable();
        s
    }
    let mut all: BTreeSet<Vec<[i64; 2]>> = BTreeSet::new();
    let mut layer: BTreeSet<Vec<[i64; 2]>> = BTreeSet::from([vec![[0, 0]]]);
    for _ in 0..k {
        let mut next = BTreeSet::new();
        for s in &layer {
            all.insert(s.clone());
            for c in s {
                for di in -1..=1 {
                    for dj in -1..=1 {
                        let d = [c[0] + di, c[1] + dj];
                        if !s.contains(&d) {
                            let mut t = s.clone();
                            t.push(d);
                            next.insert(normalize(t));
                        }
                    }
                }
            }
        }
        layer = next;
    }
    all.into_iter().collect()
}

/// Largest particle loss over admissible configurations on `cells` that differ from `phi`
/// there while `phi` is kept outside: `#(phi on cells) - max #psi` over `psi != phi`.
/// `None` when no such configuration exists.
pub fn support_deficit(grid: &TemplateGrid, g: &ConflictGraph, phi: &Bitset, cells: &[usize]) -> Option<i64> {
    let n = grid.torus.site_count;
    let sites = grid.sites_of(cells);
    let inside = Bitset::from_indices(n, &sites);
    let mut free = Bitset::new(n);
    for &x in &sites {
        if !g.blocked[x] && !g.adj[x].iter().any(|&y| phi.contains(y) && !inside.contains(y)) {
            free.insert(x);
        }
    }
    let phi_s: Vec<usize> = sites.iter().copied().filter(|&x| phi.contains(x)).collect();
    let base = phi_s.len();
    // Every psi != phi either misses some particle of phi (split by the first one missed)
    // or strictly contains phi.
    let mut second = base.checked_sub(1);
    let mut p = free;
    for (forced, &x) in phi_s.iter().enumerate() {
        let mut q = p.clone();
        q.remove(x);
        if has_independent_set(g, q.clone(), base - forced) {
            let m = forced + max_independent_within(g, q);
            second = second.max(Some(m));
        }
        p.remove(x);
        p.difference_with(&g.masks[x]);
    }
    if !p.is_empty() {
        second = second.max(Some(base + max_independent_within(g, p)));
    }
    let second = second?;
    Some(base as i64 - second as i64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefectWitness {
    pub phase: usize,
    pub class: usize,
    /// Cell coordinates of the support.
    pub cells: Vec<[usize; 2]>,
    pub deficit: i64,
    /// The support wraps around the torus.
    pub strip: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeierlsDiagnostic {
    pub c: String,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeierlsReport {
    pub kind: LatticeKind,
    pub d2: u64,
    pub max_templates: usize,
    pub phases_scanned: usize,
    pub supports_scanned: usize,
    /// Minimum of deficit / cells over the scanned supports.
    pub min_ratio: Ratio<i64>,
    pub worst: Option<DefectWitness>,
    /// Some support admits a different configuration with no particle loss.
    pub zero_deficit: bool,
    /// `min_ratio >= c / d2` for c in 1/4, 1/2, 1.
    pub diagnostics: Vec<PeierlsDiagnostic>,
}

struct ScanJob<'a> {
    grid: &'a TemplateGrid,
    graph: ConflictGraph,
    phases: Phases,
    supports: Vec<(Vec<usize>, bool)>,
}

/// Exhaustive scan of local defects in every densest periodic configuration: for each
/// connected support of at most `max_templates` template cells (and each strip of
/// `max_templates` cells wrapping the torus), the particle loss of the best different
/// configuration on the support with the ground state kept outside.
pub fn peierls_scan(kind: LatticeKind, d2: u64, max_templates: usize, budget: usize) -> Result<PeierlsReport> {
    use rayon::prelude::*;
    let k = max_templates.max(1);
    let classes = densest_sublattice_classes(kind, d2)?;
    let template = template_of(kind, d2, &classes)?;
    let side = k + 2;
    let sites = template.cell_sites() as usize * side * side;
    if sites > budget {
        return Err(Error::Budget {
            what: "Peierls scan torus sites".into(),
            needed: sites,
            budget,
        });
    }
    let area_grid = TemplateGrid::new(&template, side, side)?;
    let row_grid = TemplateGrid::new(&template, k, 3)?;
    let col_grid = TemplateGrid::new(&template, 3, k)?;
    let animals = cell_animals(k);
    let mut jobs = Vec::new();
    for grid in [&area_grid, &row_grid, &col_grid] {
        let phases = Phases::from_classes(&classes, grid)?;
        let graph = grid.torus.conflict_graph(d2);
        let supports: Vec<(Vec<usize>, bool)> = if std::ptr::eq(grid, &area_grid) {
            animals
                .iter()
                .map(|a| (a.iter().map(|c| grid.cell_index(c[0], c[1])).collect(), false))
                .collect()
        } else if std::ptr::eq(grid, &row_grid) {
            vec![((0..k).map(|i| grid.cell_index(i as i64, 0)).collect(), true)]
        } else {
            vec![((0..k).map(|j| grid.cell_index(0, j as i64)).collect(), true)]
        };
        jobs.push(ScanJob {
            grid,
            graph,
            phases,
            supports,
        });
    }
    let phases_scanned = jobs[0].phases.pgs.len();
    let tasks: Vec<(usize, usize, usize)> = jobs
        .iter()
        .enumerate()
        .flat_map(|(j, job)| {
            (0..job.phases.pgs.len()).flat_map(move |p| (0..job.supports.len()).map(move |s| (j, p, s)))
        })
        .collect();
    let results: Vec<(usize, usize, usize, Option<i64>)> = tasks
        .par_iter()
        .map(|&(j, p, s)| {
            let job = &jobs[j];
            let d = support_deficit(job.grid, &job.graph, &job.phases.occupied[p], &job.supports[s].0);
            (j, p, s, d)
        })
        .collect();
    let mut min_ratio: Option<Ratio<i64>> = None;
    let mut worst = None;
    let mut supports_scanned = 0;
    for (j, p, s, d) in results {
        supports_scanned += 1;
        let Some(d) = d else { continue };
        let job = &jobs[j];
        let (cells, strip) = &job.supports[s];
        let r = Ratio::new(d, cells.len() as i64);
        if min_ratio.map_or(true, |m| r < m) {
            min_ratio = Some(r);
            worst = Some(DefectWitness {
                phase: p,
                class: job.phases.pgs[p].class,
                cells: cells.iter().map(|&c| job.grid.cell_coords(c)).collect(),
                deficit: d,
                strip: *strip,
            });
        }
    }
    let min_ratio = min_ratio.unwrap_or_else(|| Ratio::from_integer(0));
    let value = *min_ratio.numer() as f64 / *min_ratio.denom() as f64;
    let diagnostics = [("1/4", 0.25), ("1/2", 0.5), ("1", 1.0)]
        .iter()
        .map(|&(c, cv)| PeierlsDiagnostic {
            c: c.into(),
            bound: cv / d2 as f64,
            holds: value >= cv / d2 as f64,
        })
        .collect();
    Ok(PeierlsReport {
        kind,
        d2,
        max_templates: k,
        phases_scanned,
        supports_scanned,
        zero_deficit: *min_ratio.numer() <= 0,
        min_ratio,
        worst,
        diagnostics,
    })
}

/// Add `added`, remove `removed` (all of them neighbours of the added sites) in a ground state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Insertion {
    pub added: Vec<Point>,
    pub removed: Vec<Point>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InsertionOptions {
    /// Largest number of added particles searched.
    pub max_n: usize,
    /// Removed sets have squared diameter at most `diameter2_factor * d2`.
    pub diameter2_factor: u64,
    /// Number of insertions kept in the report.
    pub keep: usize,
}

impl Default for InsertionOptions {
    fn default() -> Self {
        InsertionOptions {
            max_n: 5,
            diameter2_factor: 4,
            keep: 5000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InsertionReport {
    pub kind: LatticeKind,
    pub d2: u64,
    pub class: usize,
    pub label: String,
    /// The ground state is `offset + lattice`.
    pub offset: Point,
    pub lattice: Lattice2,
    pub diameter2_bound: i64,
    /// `counts[n - 1]`: insertions with n added particles per fundamental cell of the lattice.
    pub counts: Vec<u64>,
    pub insertions: Vec<Insertion>,
    pub truncated: bool,
    /// No insertion with `max_n` added particles exists.
    pub exhausted: bool,
}

impl InsertionReport {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, n: usize) -> u64 {
        self.counts.get(n.wrapping_sub(1)).copied().unwrap_or(0)
    }
}

fn lex_positive(p: Point) -> bool {
    p > [0, 0]
}

/// u^-2 insertions of the ground state `offset + lattice`: admissible sets A of n sites off the
/// ground state whose exclusion disks cover exactly n + 2 of its particles. Each is counted once
/// per lattice translation class (the lexicographically smallest removed particle is `offset`).
pub fn insertions_of(
    kind: LatticeKind,
    d2: u64,
    lattice: &Lattice2,
    offset: Point,
    options: &InsertionOptions,
) -> Result<(Vec<u64>, Vec<Insertion>, bool)> {
    let d = d2 as i64;
    let diam2 = options.diameter2_factor as i64 * d;
    let reach = ((diam2 as f64).sqrt() + 2.0 * (d as f64).sqrt()).powi(2).ceil() as i64 + 1;
    let mut near = vec![[0, 0]];
    near.extend(lattice.short_vectors(kind, reach));
    if near.len() > 128 {
        return Err(Error::Budget {
            what: "lattice points near a removed set".into(),
            needed: near.len(),
            budget: 128,
        });
    }
    let pos: Vec<usize> = (0..near.len())
        .filter(|&i| lex_positive(near[i]) && kind.norm(near[i]) <= diam2)
        .collect();
    let disk: Vec<Point> = {
        let r = (d as f64 * 4.0 / 3.0).sqrt().ceil() as i64 + 1;
        (-r..=r)
            .flat_map(|x| (-r..=r).map(move |y| [x, y]))
            .filter(|&w| kind.norm(w) < d)
            .collect()
    };
    // Sites off the ground state within reach of a possible removed set, with their
    // conflicting particles as masks over `near`.
    let mut cand: BTreeMap<Point, u128> = BTreeMap::new();
    for &r in std::iter::once(&0).chain(&pos) {
        for &w in &disk {
            let rel = add(near[r], w);
            let x = add(offset, rel);
            if !kind.is_site(x) || lattice.contains(rel) || cand.contains_key(&x) {
                continue;
            }
            let mut mask = 0u128;
            for (i, &q) in near.iter().enumerate() {
                if kind.norm(sub(rel, q)) < d {
                    mask |= 1 << i;
                }
            }
            cand.insert(x, mask);
        }
    }
    let cand: Vec<(Point, u128)> = cand.into_iter().collect();

    let mut counts = Vec::new();
    let mut kept = Vec::new();
    let mut truncated = false;
    for n in 1..=options.max_n {
        let mut count = 0u64;
        let mut removed_sets: Vec<u128> = Vec::new();
        choose_removed(&near, &pos, n + 1, diam2, kind, 0, 1, &mut Vec::new(), &mut removed_sets);
        for rmask in removed_sets {
            let local: Vec<(Point, u128)> = cand.iter().copied().filter(|&(_, m)| m & !rmask == 0).collect();
            let mut suffix = vec![0u128; local.len() + 1];
            for i in (0..local.len()).rev() {
                suffix[i] = suffix[i + 1] | local[i].1;
            }
            let mut chosen = Vec::new();
            choose_added(
                kind,
                d,
                &local,
                &suffix,
                rmask,
                n,
                0,
                0,
                &mut chosen,
                &mut |added: &[Point]| {
                    count += 1;
                    if kept.len() < options.keep {
                        let removed = (0..near.len())
                            .filter(|&i| rmask >> i & 1 == 1)
                            .map(|i| add(offset, near[i]))
                            .collect();
                        kept.push(Insertion {
                            added: added.to_vec(),
                            removed,
                        });
                    } else {
                        truncated = true;
                    }
                },
            );
        }
        counts.push(count);
    }
    Ok((counts, kept, truncated))
}

#[allow(clippy::too_many_arguments)]
fn choose_removed(
    near: &[Point],
    pos: &[usize],
    need: usize,
    diam2: i64,
    kind: LatticeKind,
    from: usize,
    mask: u128,
    chosen: &mut Vec<usize>,
    out: &mut Vec<u128>,
) {
    if need == 0 {
        out.push(mask);
        return;
    }
    for k in from..pos.len() {
        let i = pos[k];
        if chosen.iter().all(|&j| kind.norm(sub(near[i], near[j])) <= diam2) {
            chosen.push(i);
            choose_removed(near, pos, need - 1, diam2, kind, k + 1, mask | 1 << i, chosen, out);
            chosen.pop();
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn choose_added(
    kind: LatticeKind,
    d: i64,
    local: &[(Point, u128)],
    suffix: &[u128],
    target: u128,
    need: usize,
    from: usize,
    covered: u128,
    chosen: &mut Vec<Point>,
    emit: &mut dyn FnMut(&[Point]),
) {
    if need == 0 {
        if covered == target {
            emit(chosen);
        }
        return;
    }
    if (covered | suffix[from]) != target {
        return;
    }
    for k in from..local.len() {
        if local.len() - k < need || (covered | suffix[k]) != target {
            break;
        }
        let (x, m) = local[k];
        if chosen.iter().all(|&y| kind.norm(sub(x, y)) >= d) {
            chosen.push(x);
            choose_added(kind, d, local, suffix, target, need - 1, k + 1, covered | m, chosen, emit);
            chosen.pop();
        }
    }
}

pub fn enumerate_u2_insertions(
    kind: LatticeKind,
    d2: u64,
    class_id: usize,
    options: &InsertionOptions,
) -> Result<InsertionReport> {
    let catalog = pgs_catalog(kind, d2)?;
    let class = catalog
        .classes
        .get(class_id)
        .ok_or_else(|| Error::Domain(format!("class {class_id} out of range (K = {})", catalog.k)))?;
    let sub = class.representative;
    let offset = sub.coset_offsets()[0];
    let (counts, insertions, truncated) = insertions_of(kind, d2, &sub.lattice, offset, options)?;
    Ok(InsertionReport {
        kind,
        d2,
        class: class_id,
        label: class.label.clone(),
        offset,
        lattice: sub.lattice,
        diameter2_bound: options.diameter2_factor as i64 * d2 as i64,
        exhausted: counts.last().copied() == Some(0),
        counts,
        insertions,
        truncated,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassInsertions {
    pub class: usize,
    pub label: String,
    pub m: u64,
    pub counts: Vec<u64>,
    pub total: u64,
    pub exhausted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominanceReport {
    pub kind: LatticeKind,
    pub d2: u64,
    pub k: usize,
    pub classes: Vec<ClassInsertions>,
    pub dominant: Vec<usize>,
    pub dominant_labels: Vec<String>,
    /// A single class has the largest insertion total (or K = 1).
    pub resolved: bool,
    /// `sigma * sum of m_k` over the dominant classes, when resolved.
    pub egd_count: Option<u64>,
    pub diameter2_bound: i64,
}

/// Leading-order dominance: the class with strictly more u^-2 insertions per cell wins.
pub fn dominance_decision(kind: LatticeKind, d2: u64, options: &InsertionOptions) -> Result<DominanceReport> {
    use rayon::prelude::*;
    let catalog = pgs_catalog(kind, d2)?;
    let diameter2_bound = options.diameter2_factor as i64 * d2 as i64;
    if catalog.k == 1 {
        return Ok(DominanceReport {
            kind,
            d2,
            k: 1,
            classes: Vec::new(),
            dominant: vec![0],
            dominant_labels: vec![catalog.classes[0].label.clone()],
            resolved: true,
            egd_count: Some(catalog.pgs_count),
            diameter2_bound,
        });
    }
    let classes: Vec<ClassInsertions> = (0..catalog.k)
        .into_par_iter()
        .map(|c| {
            let r = enumerate_u2_insertions(kind, d2, c, options)?;
            Ok(ClassInsertions {
                class: c,
                label: r.label.clone(),
                m: catalog.classes[c].m,
                total: r.total(),
                exhausted: r.exhausted,
                counts: r.counts,
            })
        })
        .collect::<Result<_>>()?;
    let best = classes.iter().map(|c| c.total).max().unwrap_or(0);
    let dominant: Vec<usize> = classes.iter().filter(|c| c.total == best).map(|c| c.class).collect();
    let resolved = dominant.len() == 1;
    Ok(DominanceReport {
        kind,
        d2,
        k: catalog.k,
        dominant_labels: dominant.iter().map(|&c| catalog.classes[c].label.clone()).collect(),
        egd_count: resolved.then(|| catalog.sigma * dominant.iter().map(|&c| catalog.classes[c].m).sum::<u64>()),
        resolved,
        dominant,
        classes,
        diameter2_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeKind::{A2, Z2};
    use crate::pgs::template_lattice;

    fn setup(kind: LatticeKind, d2: u64, n: usize) -> (TemplateGrid, Phases) {
        let cat = pgs_catalog(kind, d2).unwrap();
        let grid = TemplateGrid::new(&template_lattice(kind, d2).unwrap(), n, n).unwrap();
        let ph = Phases::from_catalog(&cat, &grid).unwrap();
        (grid, ph)
    }

    #[test]
    fn animal_counts() {
        let sizes: Vec<usize> = (1..=3).map(|k| cell_animals(k).len()).collect();
        assert_eq!(sizes, vec![1, 5, 25]);
    }

    #[test]
    fn cells_tile_the_torus() {
        let (grid, ph) = setup(Z2, 5, 3);
        assert_eq!(grid.cells.iter().map(Vec::len).sum::<usize>(), grid.torus.site_count);
        assert!(grid.cells.iter().all(|c| c.len() == 25));
        for phi in &ph.occupied {
            for c in &grid.cells {
                assert_eq!(c.iter().filter(|&&x| phi.contains(x)).count(), ph.per_cell);
            }
        }
    }

    #[test]
    fn ground_states_and_empty() {
        let (grid, ph) = setup(A2, 4, 5);
        for phi in &ph.occupied {
            let cg = correct_templates(&grid, phi, &ph);
            assert_eq!(cg.frustrated_count(), 0);
            assert!(extract_contours(&grid, phi, &ph).is_empty());
        }
        let empty = Bitset::new(grid.torus.site_count);
        assert_eq!(correct_templates(&grid, &empty, &ph).frustrated_count(), 25);
    }

    #[test]
    fn single_vacancy_contour() {
        let (grid, ph) = setup(A2, 9, 5);
        let phi = &ph.occupied[0];
        let mut occ = phi.clone();
        let x = phi.first().unwrap();
        occ.remove(x);
        let cs = extract_contours(&grid, &occ, &ph);
        assert_eq!(cs.len(), 1);
        let g = &cs[0];
        assert_eq!(g.support.len(), 9);
        assert!(g.interiors.is_empty());
        assert_eq!(g.external_phase, Some(0));
        assert!(!g.is_malformed());
        assert_eq!(weight_exponent(g, &grid, phi), -1);
    }

    #[test]
    fn far_vacancies_give_two_contours() {
        let (grid, ph) = setup(A2, 4, 8);
        let phi = &ph.occupied[0];
        let mut occ = phi.clone();
        let a = grid.cells[grid.cell_index(0, 0)].iter().copied().find(|&x| phi.contains(x)).unwrap();
        let b = grid.cells[grid.cell_index(4, 4)].iter().copied().find(|&x| phi.contains(x)).unwrap();
        occ.remove(a);
        occ.remove(b);
        let cs = extract_contours(&grid, &occ, &ph);
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].support.len(), cs[1].support.len());
    }

    #[test]
    fn ring_has_an_interior() {
        let (grid, ph) = setup(A2, 4, 9);
        let phi = &ph.occupied[0];
        let mut occ = phi.clone();
        // vacancies on the boundary of a 5x5 block leave a correct centre cell inside
        for (i, j) in [(2, 2), (4, 2), (6, 2), (6, 4), (6, 6), (4, 6), (2, 6), (2, 4)] {
            let c = grid.cell_index(i, j);
            let x = grid.cells[c].iter().copied().find(|&x| phi.contains(x)).unwrap();
            occ.remove(x);
        }
        let cs = extract_contours(&grid, &occ, &ph);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].interiors.len(), 1);
        assert_eq!(cs[0].interiors[0].phase, Some(0));
        assert_eq!(weight_exponent(&cs[0], &grid, phi), -8);
    }

    #[test]
    fn representation_matches_partition_function() {
        let (grid, ph) = setup(A2, 4, 2);
        let rep = contour_representation(&grid, 4, &ph, 36).unwrap();
        let z = crate::gibbs::independence_polynomial(&grid.torus.conflict_graph(4));
        assert_eq!(rep.incompatible, 0);
        assert_eq!(rep.polynomial, z);
    }

    #[test]
    fn insertions_have_weight_minus_two() {
        let rep = enumerate_u2_insertions(A2, 9, 0, &InsertionOptions::default()).unwrap();
        assert!(rep.count(1) > 0);
        let (grid, ph) = setup(A2, 9, 8);
        let pgs = ph.pgs.iter().position(|p| p.sublattice == rep.lattice && p.offset == rep.offset).unwrap();
        let phi = &ph.occupied[pgs];
        for ins in rep.insertions.iter().take(40) {
            let mut occ = phi.clone();
            for &r in &ins.removed {
                occ.remove(grid.torus.index_of(r).unwrap());
            }
            for &a in &ins.added {
                occ.insert(grid.torus.index_of(a).unwrap());
            }
            let idx: Vec<usize> = occ.iter().collect();
            assert!(grid.torus.is_admissible(&idx, 9));
            let cs = extract_contours(&grid, &occ, &ph);
            assert_eq!(cs.len(), 1);
            assert_eq!(weight_exponent(&cs[0], &grid, phi), -2);
        }
    }

    #[test]
    fn single_class_short_circuits() {
        let r = dominance_decision(A2, 9, &InsertionOptions::default()).unwrap();
        assert_eq!(r.dominant, vec![0]);
        assert_eq!(r.egd_count, Some(9));
        assert!(r.classes.is_empty());
    }

    #[test]
    fn dominance_49() {
        let r = dominance_decision(A2, 49, &InsertionOptions::default()).unwrap();
        assert_eq!(r.dominant_labels, vec!["horizontal".to_string()]);
    }

    #[test]
    fn peierls_small() {
        let r = peierls_scan(A2, 9, 2, 10_000).unwrap();
        assert!(r.min_ratio > Ratio::from_integer(0));
        assert!(!r.zero_deficit);
        let s = peierls_scan(Z2, 9, 2, 10_000).unwrap();
        assert!(s.zero_deficit);
        assert!(s.worst.unwrap().strip);
    }
}
