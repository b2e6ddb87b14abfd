//! Deterministic SVG drawings of configurations.

use std::fmt::Write as _;

use clap::ValueEnum;
use hardcore::contour::{correct_templates, enumerate_u2_insertions, InsertionOptions, Phases, TemplateGrid};
use hardcore::lattice::{add, cross, scale, sub};
use hardcore::oracle::{sliding_witness, DEFAULT_BUDGET};
use hardcore::pgs::{pgs_catalog, realize, template_lattice};
use hardcore::torus::Bitset;
use hardcore::{Error, LatticeKind, Point, Result};

pub const DEFAULT_SITE_LIMIT: usize = 20_000;

const UNIT: f64 = 24.0;
const ORDER_COLOURS: [&str; 5] = ["#1f77b4", "#2ca02c", "#ff7f0e", "#d62728", "#9467bd"];

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Scene {
    /// One PGS with its sublattice cell outlined.
    Pgs,
    /// Base and band-shifted maximal packings.
    Sliding,
    /// A single vacancy with its non-correct template cells shaded.
    Vacancy,
    /// One u^-2 insertion of each order, colour-coded.
    Insertions,
}

pub struct Request {
    pub kind: LatticeKind,
    pub d2: u64,
    pub class: usize,
    pub cells: Option<[usize; 2]>,
    pub budget: usize,
}

pub fn render(scene: Scene, req: &Request) -> Result<String> {
    match scene {
        Scene::Pgs => pgs_scene(req),
        Scene::Sliding => sliding_scene(req),
        Scene::Vacancy => vacancy_scene(req),
        Scene::Insertions => insertion_scene(req),
    }
}

/// Plane coordinates to Euclidean ones (y up).
fn embed(kind: LatticeKind, p: [f64; 2]) -> (f64, f64) {
    match kind {
        LatticeKind::Z2 => (p[0], p[1]),
        _ => (p[0] + p[1] / 2.0, p[1] * 3f64.sqrt() / 2.0),
    }
}

fn as_f(p: Point) -> [f64; 2] {
    [p[0] as f64, p[1] as f64]
}

/// Representative of `p` in the half-open parallelogram spanned by `u` and `w`.
fn wrap(p: Point, u: Point, w: Point) -> [f64; 2] {
    let mut det = cross(u, w);
    let (mut a, mut b) = (cross(p, w), cross(u, p));
    if det < 0 {
        det = -det;
        a = -a;
        b = -b;
    }
    let (a, b) = (a.rem_euclid(det) as f64 / det as f64, b.rem_euclid(det) as f64 / det as f64);
    [a * u[0] as f64 + b * w[0] as f64, a * u[1] as f64 + b * w[1] as f64]
}

struct Canvas {
    kind: LatticeKind,
    body: String,
    min: (f64, f64),
    max: (f64, f64),
}

impl Canvas {
    fn new(kind: LatticeKind) -> Self {
        Canvas {
            kind,
            body: String::new(),
            min: (f64::INFINITY, f64::INFINITY),
            max: (f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn xy(&mut self, p: [f64; 2], dx: f64) -> (f64, f64) {
        let (x, y) = embed(self.kind, p);
        let (x, y) = ((x + dx) * UNIT, -y * UNIT);
        self.min = (self.min.0.min(x), self.min.1.min(y));
        self.max = (self.max.0.max(x), self.max.1.max(y));
        (x, y)
    }

    fn dot(&mut self, p: [f64; 2], dx: f64, r: f64, fill: &str) {
        let (x, y) = self.xy(p, dx);
        let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill="{fill}"/>"#, r * UNIT);
    }

    fn ring(&mut self, p: [f64; 2], dx: f64, r: f64, stroke: &str) {
        let (x, y) = self.xy(p, dx);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill="none" stroke="{stroke}" stroke-width="2"/>"#,
            r * UNIT
        );
    }

    fn polygon(&mut self, corners: &[[f64; 2]], dx: f64, fill: &str, stroke: &str) {
        let pts: Vec<String> = corners
            .iter()
            .map(|&c| {
                let (x, y) = self.xy(c, dx);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polygon points="{}" fill="{fill}" stroke="{stroke}" stroke-width="1"/>"#,
            pts.join(" ")
        );
    }

    fn label(&mut self, p: [f64; 2], dx: f64, text: &str) {
        let (x, y) = self.xy(p, dx);
        let _ = writeln!(self.body, r#"<text x="{x:.3}" y="{y:.3}" font-size="14" font-family="monospace">{text}</text>"#);
    }

    fn finish(self) -> String {
        let pad = UNIT;
        let (x0, y0) = (self.min.0 - pad, self.min.1 - pad);
        let (w, h) = (self.max.0 - self.min.0 + 2.0 * pad, self.max.1 - self.min.1 + 2.0 * pad);
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{x0:.3} {y0:.3} {w:.3} {h:.3}\" width=\"{w:.0}\" height=\"{h:.0}\">\n<rect x=\"{x0:.3}\" y=\"{y0:.3}\" width=\"{w:.3}\" height=\"{h:.3}\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

fn parallelogram(origin: [f64; 2], u: Point, w: Point) -> [[f64; 2]; 4] {
    let at = |a: f64, b: f64| [origin[0] + a * u[0] as f64 + b * w[0] as f64, origin[1] + a * u[1] as f64 + b * w[1] as f64];
    [at(0.0, 0.0), at(1.0, 0.0), at(1.0, 1.0), at(0.0, 1.0)]
}

fn grid_of(req: &Request, default: usize) -> Result<TemplateGrid> {
    let [n, m] = req.cells.unwrap_or([default, default]);
    let tpl = template_lattice(req.kind, req.d2)?;
    let sites = tpl.cell_sites() as usize * n * m;
    if sites > req.budget {
        return Err(Error::Budget {
            what: "rendered sites".into(),
            needed: sites,
            budget: req.budget,
        });
    }
    TemplateGrid::new(&tpl, n, m)
}

fn site_dots(c: &mut Canvas, grid: &TemplateGrid, u: Point, w: Point, occupied: &Bitset) {
    for i in 0..grid.torus.site_count {
        let p = wrap(grid.torus.point(i), u, w);
        if occupied.contains(i) {
            c.dot(p, 0.0, 0.3, "black");
        } else {
            c.dot(p, 0.0, 0.06, "#999999");
        }
    }
}

fn domain(grid: &TemplateGrid) -> (Point, Point) {
    (scale(grid.n[0] as i64, grid.basis[0]), scale(grid.n[1] as i64, grid.basis[1]))
}

fn pgs_scene(req: &Request) -> Result<String> {
    let cat = pgs_catalog(req.kind, req.d2)?;
    let grid = grid_of(req, 3)?;
    let class = cat
        .classes
        .get(req.class)
        .ok_or_else(|| Error::Domain(format!("class {} out of range (K = {})", req.class, cat.k)))?;
    let pgs = cat
        .all_pgs()
        .into_iter()
        .find(|p| p.class == req.class)
        .expect("every class has a PGS");
    let occ = Bitset::from_indices(grid.torus.site_count, &realize(&pgs, &grid.torus));
    let (u, w) = domain(&grid);
    let mut c = Canvas::new(req.kind);
    c.polygon(&parallelogram([0.0, 0.0], u, w), 0.0, "none", "#cccccc");
    let [b1, b2] = class.representative.basis.map(|v| req.kind.translation_to_plane(v));
    let origin = wrap(pgs.offset, u, w);
    c.polygon(&parallelogram(origin, b1, b2), 0.0, "#fde9b8", "#b07800");
    site_dots(&mut c, &grid, u, w, &occ);
    let text = format!("{} D2={} {} (index {})", req.kind.name(), req.d2, class.label, class.representative.index);
    c.label([0.0, -1.5], 0.0, &text);
    Ok(c.finish())
}

fn vacancy_scene(req: &Request) -> Result<String> {
    let cat = pgs_catalog(req.kind, req.d2)?;
    let grid = grid_of(req, 5)?;
    let phases = Phases::from_catalog(&cat, &grid)?;
    let phi = &phases.occupied[0];
    let mid = grid.cell_index(grid.n[0] as i64 / 2, grid.n[1] as i64 / 2);
    let hole = grid.cells[mid]
        .iter()
        .copied()
        .find(|&i| phi.contains(i))
        .ok_or_else(|| Error::Domain("middle cell holds no particle".into()))?;
    let mut occ = phi.clone();
    occ.remove(hole);
    let correct = correct_templates(&grid, &occ, &phases);
    let (u, w) = domain(&grid);
    let mut c = Canvas::new(req.kind);
    for cell in 0..grid.cell_count() {
        let [i, j] = grid.cell_coords(cell);
        let origin = as_f(add(scale(i as i64, grid.basis[0]), scale(j as i64, grid.basis[1])));
        let fill = if correct.correct[0][cell] { "none" } else { "#f4c7c3" };
        c.polygon(&parallelogram(origin, grid.basis[0], grid.basis[1]), 0.0, fill, "#cccccc");
    }
    site_dots(&mut c, &grid, u, w, &occ);
    c.ring(wrap(grid.torus.point(hole), u, w), 0.0, 0.3, "#d62728");
    c.label([0.0, -1.5], 0.0, &format!("{} D2={} single vacancy", req.kind.name(), req.d2));
    Ok(c.finish())
}

fn sliding_scene(req: &Request) -> Result<String> {
    let l = crate::default_side(req.kind, req.d2).map_err(|e| match e {
        crate::CliError::Lib(e) => e,
        other => Error::Domain(other.to_string()),
    })?;
    let sites = l as usize * l as usize * req.kind.basis_sites();
    if sites > req.budget {
        return Err(Error::Budget {
            what: "rendered sites".into(),
            needed: sites,
            budget: req.budget,
        });
    }
    let w = sliding_witness(req.kind, req.d2, l, DEFAULT_BUDGET.max(sites))?
        .ok_or_else(|| Error::Domain(format!("no sliding witness on the {l} x {l} torus")))?;
    let torus = hardcore::torus::Torus::new(req.kind, w.p1, w.p2)?;
    let (u, v) = (req.kind.translation_to_plane(w.p1), req.kind.translation_to_plane(w.p2));
    let base = Bitset::from_indices(torus.site_count, &w.base);
    let shifted = Bitset::from_indices(torus.site_count, &w.shifted);
    let gap = embed(req.kind, as_f(u)).0.abs().max(embed(req.kind, as_f(v)).0.abs()) + 3.0;
    let mut c = Canvas::new(req.kind);
    for (panel, occ) in [&base, &shifted].into_iter().enumerate() {
        let dx = panel as f64 * gap;
        c.polygon(&parallelogram([0.0, 0.0], u, v), dx, "none", "#cccccc");
        for i in 0..torus.site_count {
            let p = wrap(torus.point(i), u, v);
            if occ.contains(i) {
                let moved = panel == 1 && !base.contains(i);
                c.dot(p, dx, 0.3, if moved { "#d62728" } else { "black" });
            } else {
                c.dot(p, dx, 0.06, "#999999");
            }
        }
    }
    let text = format!("{} D2={} {} of {} rows, shift {:?}", req.kind.name(), req.d2, w.pattern, w.band_rows, w.shift);
    c.label([0.0, -1.5], 0.0, &text);
    Ok(c.finish())
}

fn insertion_scene(req: &Request) -> Result<String> {
    let opts = InsertionOptions {
        max_n: ORDER_COLOURS.len(),
        ..Default::default()
    };
    let rep = enumerate_u2_insertions(req.kind, req.d2, req.class, &opts)?;
    let mut firsts = Vec::new();
    for n in 1..=ORDER_COLOURS.len() {
        if let Some(ins) = rep.insertions.iter().find(|i| i.added.len() == n) {
            firsts.push(ins);
        }
    }
    if firsts.is_empty() {
        return Err(Error::Domain("no u^-2 insertions for this class".into()));
    }
    let r2 = 4 * req.d2 as i64;
    let r = ((4.0 * r2 as f64 / 3.0).sqrt().ceil() as i64) + 1;
    let sites = firsts.len() * (2 * r as usize + 1).pow(2);
    if sites > req.budget {
        return Err(Error::Budget {
            what: "rendered sites".into(),
            needed: sites,
            budget: req.budget,
        });
    }
    let gap = 2.0 * r as f64 + 2.0;
    let mut c = Canvas::new(req.kind);
    for (panel, ins) in firsts.iter().enumerate() {
        let dx = panel as f64 * gap;
        let centre = ins.removed[0];
        for x in -r..=r {
            for y in -r..=r {
                let q = add(centre, [x, y]);
                if !req.kind.is_site(q) || req.kind.norm([x, y]) > r2 {
                    continue;
                }
                let p = as_f(sub(q, centre));
                if ins.added.contains(&q) {
                    c.dot(p, dx, 0.3, ORDER_COLOURS[ins.added.len() - 1]);
                } else if ins.removed.contains(&q) {
                    c.ring(p, dx, 0.3, "black");
                } else if rep.lattice.contains(sub(q, rep.offset)) {
                    c.dot(p, dx, 0.3, "black");
                } else {
                    c.dot(p, dx, 0.06, "#999999");
                }
            }
        }
        c.label([-(r as f64), -(r as f64) - 1.0], dx, &format!("n={} total {}", ins.added.len(), rep.counts[ins.added.len() - 1]));
    }
    let text = format!("{} D2={} class {}", req.kind.name(), req.d2, rep.label);
    c.label([-(r as f64), r as f64 + 1.5], 0.0, &text);
    Ok(c.finish())
}
