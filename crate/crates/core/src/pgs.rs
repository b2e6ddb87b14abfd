//! MDA sublattices, periodic ground states, densities and templates.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::arith::{classify, sliding_status, CaseLabel};
use crate::error::{Error, Result};
use crate::hnf::Lattice2;
use crate::lattice::{diophantine_solutions, sub, LatticeKind, Point, Vec2i};
use crate::mtriangle::solve_problem5;
use crate::torus::Torus;

/// A sublattice of translations in plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sublattice {
    pub kind: LatticeKind,
    pub lattice: Lattice2,
    /// Reduced basis in translation coordinates.
    pub basis: [Vec2i; 2],
    /// Sites per fundamental parallelogram.
    pub index: u64,
}

impl Sublattice {
    pub fn new(kind: LatticeKind, lattice: Lattice2) -> Result<Self> {
        let [u, v] = lattice.reduced_basis(kind);
        let (tu, tv) = match (kind.plane_to_translation(u), kind.plane_to_translation(v)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Domain(format!(
                    "{:?} is not a lattice of translations",
                    lattice.hnf()
                )))
            }
        };
        let det = lattice.det() as u64;
        let index = match kind {
            LatticeKind::H2 => 2 * det / 3,
            _ => det,
        };
        Ok(Sublattice {
            kind,
            lattice,
            basis: [tu, tv],
            index,
        })
    }

    pub fn min_norm(&self) -> i64 {
        self.lattice.min_norm(self.kind)
    }

    /// Site representatives of the cosets `s + L`, one per site of a fundamental cell.
    pub fn coset_offsets(&self) -> Vec<Point> {
        let (a, _, d) = self.lattice.hnf();
        let mut out = Vec::new();
        for x in 0..a {
            for y in 0..d {
                if self.kind.is_site([x, y]) {
                    out.push([x, y]);
                }
            }
        }
        out
    }
}

/// One periodic ground state: the coset `offset + sublattice`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pgs {
    pub class: usize,
    pub sublattice: Lattice2,
    pub offset: Point,
}

impl Pgs {
    pub fn contains(&self, p: Point) -> bool {
        self.sublattice.contains(sub(p, self.offset))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PgsClass {
    pub label: String,
    pub representative: Sublattice,
    /// The point-group orbit of the representative, sorted.
    pub sublattices: Vec<Sublattice>,
    pub m: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PgsCatalog {
    pub kind: LatticeKind,
    pub d2: u64,
    pub case: CaseLabel,
    pub sigma: u64,
    pub k: usize,
    pub m: Vec<u64>,
    pub pgs_count: u64,
    pub classes: Vec<PgsClass>,
}

impl PgsCatalog {
    /// Every PGS, ordered by class, sublattice and offset.
    pub fn all_pgs(&self) -> Vec<Pgs> {
        pgs_of_classes(&self.classes)
    }

    pub fn sublattice_reps(&self) -> Vec<Sublattice> {
        self.classes.iter().map(|c| c.representative).collect()
    }
}

/// The cosets of every sublattice of every class.
pub fn pgs_of_classes(classes: &[PgsClass]) -> Vec<Pgs> {
    let mut out = Vec::new();
    for (ci, c) in classes.iter().enumerate() {
        for s in &c.sublattices {
            for offset in s.coset_offsets() {
                out.push(Pgs {
                    class: ci,
                    sublattice: s.lattice,
                    offset,
                });
            }
        }
    }
    out
}

fn orbit(kind: LatticeKind, l: &Lattice2) -> Vec<Lattice2> {
    kind.point_group()
        .iter()
        .map(|g| l.transform(g))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn check_supported(kind: LatticeKind, d2: u64) -> Result<CaseLabel> {
    let case = classify(kind, d2);
    match case {
        CaseLabel::NotAttainable => Err(Error::NotAttainable { kind, d2 }),
        CaseLabel::HExceptional => Err(Error::Unsupported {
            kind,
            d2,
            case: "HExceptional".into(),
        }),
        _ if sliding_status(kind, d2).sliding => Err(Error::Unsupported {
            kind,
            d2,
            case: "sliding".into(),
        }),
        _ => Ok(case),
    }
}

fn triangular_label(a: u64, b: u64) -> String {
    if a == 0 {
        "horizontal".into()
    } else if a == b {
        "vertical".into()
    } else {
        format!("inclined({a},{b})")
    }
}

/// Plane lattices generating the PGS classes, with class labels.
fn class_generators(kind: LatticeKind, d2: u64, case: CaseLabel) -> Result<Vec<(String, Lattice2)>> {
    let triangular = |n: u64| -> Vec<(String, Lattice2)> {
        diophantine_solutions(LatticeKind::A2, n)
            .into_iter()
            .map(|(a, b)| {
                let (a, b) = (a as i64, b as i64);
                let l = Lattice2::from_generators(&[[a, b], [-b, a + b]]).expect("rank 2");
                (triangular_label(a as u64, b as u64), l)
            })
            .collect()
    };
    Ok(match (kind, case) {
        (LatticeKind::A2, _) => triangular(d2),
        (LatticeKind::H2, CaseLabel::HC { dstar2 }) => triangular(dstar2),
        (LatticeKind::H2, _) => triangular(d2),
        (LatticeKind::Z2, _) => {
            let report = solve_problem5(d2)?;
            report
                .classes
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let t = &c.representative;
                    (format!("M{}:{:?}", i + 1, t.sides2), t.sublattice())
                })
                .collect()
        }
    })
}

pub fn mda_sublattices(kind: LatticeKind, d2: u64) -> Result<Vec<PgsClass>> {
    let case = check_supported(kind, d2)?;
    build_classes(kind, d2, case)
}

/// Densest sublattice classes, including sliding values (where they are not the only
/// maximal packings).
pub fn densest_sublattice_classes(kind: LatticeKind, d2: u64) -> Result<Vec<PgsClass>> {
    match check_supported(kind, d2) {
        Ok(case) => build_classes(kind, d2, case),
        Err(Error::Unsupported { case, .. }) if case == "sliding" => build_classes(kind, d2, classify(kind, d2)),
        Err(e) => Err(e),
    }
}

fn build_classes(kind: LatticeKind, d2: u64, case: CaseLabel) -> Result<Vec<PgsClass>> {
    let mut seen: BTreeSet<Lattice2> = BTreeSet::new();
    let mut classes = Vec::new();
    for (label, l) in class_generators(kind, d2, case)? {
        if seen.contains(&l) {
            continue;
        }
        let orb = orbit(kind, &l);
        seen.extend(orb.iter().copied());
        let sublattices = orb
            .iter()
            .map(|&x| Sublattice::new(kind, x))
            .collect::<Result<Vec<_>>>()?;
        classes.push(PgsClass {
            label,
            representative: Sublattice::new(kind, l)?,
            m: sublattices.len() as u64,
            sublattices,
        });
    }
    Ok(classes)
}

pub fn pgs_catalog(kind: LatticeKind, d2: u64) -> Result<PgsCatalog> {
    let case = check_supported(kind, d2)?;
    let classes = mda_sublattices(kind, d2)?;
    let sigma = classes[0].representative.index;
    debug_assert!(classes.iter().all(|c| c.representative.index == sigma));
    let m: Vec<u64> = classes.iter().map(|c| c.m).collect();
    Ok(PgsCatalog {
        kind,
        d2,
        case,
        sigma,
        k: classes.len(),
        pgs_count: sigma * m.iter().sum::<u64>(),
        m,
        classes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Radical {
    One,
    Sqrt3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityScope {
    Exact,
    /// Obtained for a sliding value from its maximal sub-lattice packings.
    Approximate,
}

/// `delta = coeff * pi / radical`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityValue {
    pub coeff: Ratio<u64>,
    pub radical: Radical,
    pub scope: DensityScope,
}

impl DensityValue {
    pub fn value(&self) -> f64 {
        let c = *self.coeff.numer() as f64 / *self.coeff.denom() as f64;
        let r = match self.radical {
            Radical::One => 1.0,
            Radical::Sqrt3 => 3f64.sqrt(),
        };
        c * std::f64::consts::PI / r
    }

    /// Twelve significant digits.
    pub fn decimal(&self) -> String {
        significant(self.value(), 12)
    }

    /// Density of a periodic packing occupying one in `sigma` sites with disks of squared diameter `d2`.
    pub fn from_sigma(kind: LatticeKind, d2: u64, sigma: u64, scope: DensityScope) -> Self {
        let (c, radical) = match kind {
            LatticeKind::A2 => (2, Radical::Sqrt3),
            LatticeKind::H2 => (3, Radical::Sqrt3),
            LatticeKind::Z2 => (4, Radical::One),
        };
        DensityValue {
            coeff: Ratio::new(d2, c * sigma),
            radical,
            scope,
        }
    }
}

pub fn significant(x: f64, digits: i32) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let prec = (digits - 1 - mag).max(0) as usize;
    format!("{x:.prec$}")
}

impl fmt::Display for DensityValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = match self.radical {
            Radical::One => "",
            Radical::Sqrt3 => "/sqrt(3)",
        };
        write!(f, "({}/{})*pi{}", self.coeff.numer(), self.coeff.denom(), r)
    }
}

pub fn packing_density(kind: LatticeKind, d2: u64) -> Result<DensityValue> {
    let case = classify(kind, d2);
    match (kind, case) {
        (_, CaseLabel::NotAttainable) => Err(Error::NotAttainable { kind, d2 }),
        (LatticeKind::H2, CaseLabel::HExceptional) => Err(Error::Unsupported {
            kind,
            d2,
            case: "HExceptional".into(),
        }),
        (LatticeKind::H2, _) if sliding_status(kind, d2).sliding => Err(Error::Unsupported {
            kind,
            d2,
            case: "sliding".into(),
        }),
        (LatticeKind::A2, _) => Ok(DensityValue::from_sigma(kind, d2, d2, DensityScope::Exact)),
        (LatticeKind::H2, CaseLabel::HC { dstar2 }) => Ok(DensityValue::from_sigma(
            kind,
            d2,
            2 * dstar2 / 3,
            DensityScope::Exact,
        )),
        (LatticeKind::H2, _) => Ok(DensityValue::from_sigma(kind, d2, 2 * d2 / 3, DensityScope::Exact)),
        (LatticeKind::Z2, _) => {
            let s = solve_problem5(d2)?.s;
            let scope = if sliding_status(kind, d2).sliding {
                DensityScope::Approximate
            } else {
                DensityScope::Exact
            };
            Ok(DensityValue::from_sigma(kind, d2, s, scope))
        }
    }
}

/// The common period lattice of all MDA sublattices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub kind: LatticeKind,
    pub d2: u64,
    pub lattice: Sublattice,
}

impl Template {
    /// Sites per template cell.
    pub fn cell_sites(&self) -> u64 {
        self.lattice.index
    }

    /// Torus made of `n1 x n2` template cells along the reduced template basis.
    pub fn torus(&self, n1: i64, n2: i64) -> Result<Torus> {
        let [u, v] = self.lattice.basis;
        Torus::new(
            self.kind,
            Vec2i::new(n1 * u.da, n1 * u.db),
            Vec2i::new(n2 * v.da, n2 * v.db),
        )
    }
}

pub fn template_lattice(kind: LatticeKind, d2: u64) -> Result<Template> {
    let classes = mda_sublattices(kind, d2)?;
    template_of(kind, d2, &classes)
}

pub fn template_of(kind: LatticeKind, d2: u64, classes: &[PgsClass]) -> Result<Template> {
    let mut acc: Option<Lattice2> = None;
    for s in classes.iter().flat_map(|c| &c.sublattices) {
        acc = Some(match acc {
            None => s.lattice,
            Some(l) => l.intersect(&s.lattice),
        });
    }
    let l = acc.ok_or_else(|| Error::Domain("no MDA sublattices".into()))?;
    debug_assert!(classes
        .iter()
        .flat_map(|c| &c.sublattices)
        .all(|s| s.lattice.contains_lattice(&l)));
    Ok(Template {
        kind,
        d2,
        lattice: Sublattice::new(kind, l)?,
    })
}

/// Every PGS of the catalog on a torus whose periods lie in the template lattice,
/// as sorted lists of occupied torus sites.
pub fn realize_pgs_on_torus(catalog: &PgsCatalog, torus: &Torus) -> Result<Vec<Vec<usize>>> {
    let template = template_of(catalog.kind, catalog.d2, &catalog.classes)?;
    if torus.kind != catalog.kind || !torus.is_commensurate_with(&template.lattice.lattice) {
        return Err(Error::Commensurability(format!(
            "torus periods {:?}, {:?} do not lie in the template lattice {:?}",
            torus.p1,
            torus.p2,
            template.lattice.lattice.hnf()
        )));
    }
    Ok(realize_all(catalog, torus))
}

pub(crate) fn realize_all(catalog: &PgsCatalog, torus: &Torus) -> Vec<Vec<usize>> {
    catalog
        .all_pgs()
        .iter()
        .map(|p| realize(p, torus))
        .collect()
}

/// Occupied torus sites of one PGS (the torus must be commensurate with its sublattice).
pub fn realize(pgs: &Pgs, torus: &Torus) -> Vec<usize> {
    (0..torus.site_count)
        .filter(|&i| pgs.contains(torus.point(i)))
        .collect()
}
