//! Refinements between atlases, the bundle two refinements induce between
//! groupoids of fractions, atlas isomorphism search and invariant comparison.
//!
//! Chart indices `i, i'` are fine and `j, j', k` coarse. `α_jii'` composes a
//! refinement element with a fine embedding on the right, `α_j'ji` with a
//! coarse embedding on the left.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::atlas::{verify_atlas, Atlas};
use crate::bimodule::{check_cell, isomorphisms_along, Bimodule, BimoduleError};
use crate::exec::{self, Execution};
use crate::fractions::{build_groupoid, build_groupoid_with, FractionsGroupoid, Span};
use crate::group::{isomorphisms, GroupHom};
use crate::groupoid_model::{
    extract, local_bisections, morita_invariants, section_product, Cover, FiniteGroupoidModel, GroupoidError,
    LocalBisections, MoritaInvariants,
};
use crate::report::{CheckKey, CheckOutcome, Report, Status};
use crate::satake::{derive_con, ConModule, SatakeError};
use crate::uf::UnionFind;

#[derive(Debug, Error)]
pub enum RefinementError {
    #[error("atlases have different quotient points")]
    QuotientMismatch,
    #[error("atlases do not share the {0} atlas")]
    AtlasMismatch(&'static str),
    #[error("no refinement module for {fine} in {coarse}")]
    MissingModule { fine: String, coarse: String },
    #[error("{fine} is not contained in {coarse}")]
    NotContained { fine: String, coarse: String },
    #[error("refinement module {fine} in {coarse} has the wrong groups")]
    GroupMismatch { fine: String, coarse: String },
    #[error("concrete maps for {fine} in {coarse}: {detail}")]
    Concrete { fine: String, coarse: String, detail: String },
    #[error("missing cell {0}")]
    MissingCell(String),
    #[error("cell {cell}: {detail}")]
    CellShape { cell: String, detail: String },
    #[error("no middle chart between {fine} and {coarse}")]
    NoMiddle { fine: String, coarse: String },
    #[error("composite is not well defined: {0}")]
    NotWellDefined(String),
    #[error(transparent)]
    Satake(#[from] SatakeError),
    #[error(transparent)]
    Groupoid(#[from] GroupoidError),
    #[error(transparent)]
    Bimodule(#[from] BimoduleError),
}

/// User-supplied refinement data; identity cells are implied.
#[derive(Debug, Clone, Default)]
pub struct RefinementParts {
    /// `A_ji` keyed `(i, j)`.
    pub modules: BTreeMap<(usize, usize), Bimodule>,
    /// Concrete cross-embeddings `C_ji` keyed `(i, j)`. Derived when absent.
    pub concrete: BTreeMap<(usize, usize), Vec<Vec<usize>>>,
    /// `ρ̃_ji(λ)` as sample maps, keyed `(i, j)`. May be omitted when `C_ji`
    /// has one element.
    pub tilde: BTreeMap<(usize, usize), Vec<Vec<usize>>>,
    /// `α_jii'` keyed `(j, i, i')`, row-major in `λ ∈ A_ji`. Defaults to the
    /// right action when `i' = i`.
    pub right: BTreeMap<(usize, usize, usize), Vec<usize>>,
    /// `α_j'ji` keyed `(j', j, i)`, row-major in the coarse embedding.
    /// Defaults to the left action when `j' = j`.
    pub left: BTreeMap<(usize, usize, usize), Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct RefinementData {
    fine: Atlas,
    coarse: Atlas,
    pairs: Vec<(usize, usize)>,
    pair_index: HashMap<(usize, usize), usize>,
    modules: Vec<Bimodule>,
    con: Vec<ConModule>,
    tilde: Vec<Vec<usize>>,
    right: BTreeMap<(usize, usize, usize), Vec<usize>>,
    left: BTreeMap<(usize, usize, usize), Vec<usize>>,
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|q| b.contains(q))
}

/// Inverse of a unit table, `None` where the table misses an element.
fn invert(unit: &[usize], size: usize) -> Vec<Option<usize>> {
    let mut inv = vec![None; size];
    for (g, &u) in unit.iter().enumerate() {
        if u < size {
            inv[u] = Some(g);
        }
    }
    inv
}

fn same_layout(a: &Atlas, b: &Atlas) -> bool {
    let (la, lb) = (a.layer(), b.layer());
    la.quotient().names() == lb.quotient().names()
        && la.charts().len() == lb.charts().len()
        && la.charts().iter().zip(lb.charts()).all(|(x, y)| x.name() == y.name() && x.samples() == y.samples())
        && la.poset().arrows() == lb.poset().arrows()
        && (0..a.arrow_count()).all(|e| a.abst(e).size() == b.abst(e).size())
}

impl RefinementData {
    pub fn build(fine: Atlas, coarse: Atlas, mut parts: RefinementParts) -> Result<Self, RefinementError> {
        if fine.layer().quotient().names() != coarse.layer().quotient().names() {
            return Err(RefinementError::QuotientMismatch);
        }
        let (lf, lc) = (fine.layer(), coarse.layer());
        let fname = |i: usize| lf.chart(i).name().to_string();
        let cname = |j: usize| lc.chart(j).name().to_string();
        let mut pairs = Vec::new();
        for i in 0..lf.charts().len() {
            for j in 0..lc.charts().len() {
                if is_subset(lf.quotient().support(i), lc.quotient().support(j)) {
                    pairs.push((i, j));
                }
            }
        }
        let pair_index: HashMap<(usize, usize), usize> = pairs.iter().enumerate().map(|(p, &ij)| (ij, p)).collect();
        if let Some(&(i, j)) = parts.modules.keys().find(|k| !pair_index.contains_key(k)) {
            return Err(RefinementError::NotContained {
                fine: lf.charts().get(i).map_or(i.to_string(), |c| c.name().into()),
                coarse: lc.charts().get(j).map_or(j.to_string(), |c| c.name().into()),
            });
        }

        let mut modules = Vec::with_capacity(pairs.len());
        let mut con = Vec::with_capacity(pairs.len());
        let mut tilde = Vec::with_capacity(pairs.len());
        for &(i, j) in &pairs {
            let (cf, cc) = (lf.chart(i), lc.chart(j));
            let m = parts
                .modules
                .remove(&(i, j))
                .ok_or_else(|| RefinementError::MissingModule { fine: fname(i), coarse: cname(j) })?;
            if **m.left() != **cc.group() || **m.right() != **cf.group() {
                return Err(RefinementError::GroupMismatch { fine: fname(i), coarse: cname(j) });
            }
            let concrete_err = |detail: &str| RefinementError::Concrete { fine: fname(i), coarse: cname(j), detail: detail.into() };
            let c = match parts.concrete.remove(&(i, j)) {
                Some(mut maps) => {
                    if maps.iter().any(|m| m.len() != cf.samples() || m.iter().any(|&y| y >= cc.samples())) {
                        return Err(concrete_err("map of the wrong shape"));
                    }
                    maps.sort();
                    maps.dedup();
                    ConModule::new(cf, cc, maps, true)?
                }
                None => ConModule::new(cf, cc, derive_con(cf, cc, false), false)?,
            };
            if c.is_empty() {
                return Err(concrete_err("no concrete cross-embeddings"));
            }
            let t = match parts.tilde.remove(&(i, j)) {
                Some(maps) => {
                    if maps.len() != m.size() {
                        return Err(concrete_err(&format!("expected {} maps", m.size())));
                    }
                    maps.iter()
                        .enumerate()
                        .map(|(l, map)| c.index_of(map).ok_or_else(|| concrete_err(&format!("element {l} maps outside the concrete embeddings"))))
                        .collect::<Result<Vec<_>, _>>()?
                }
                None if c.len() == 1 => vec![0; m.size()],
                None => return Err(concrete_err("concrete maps required")),
            };
            modules.push(m);
            con.push(c);
            tilde.push(t);
        }

        let pf = lf.poset();
        let pc = lc.poset();
        let mut right = BTreeMap::new();
        let mut left = BTreeMap::new();
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let m = &modules[p];
            for a in pf.arrows_into(i) {
                let i2 = pf.source(a);
                let (nl, nn, nt) = (modules[p].size(), fine.abst(a).size(), modules[pair_index[&(i2, j)]].size());
                let label = format!("{} after {}", pair_label(lf, lc, i, j), lf.arrow_label(a));
                let table = match parts.right.remove(&(j, i, i2)) {
                    Some(t) => t,
                    None if i2 == i => {
                        let inv = invert(fine.unit_table(i), nn);
                        (0..nl).flat_map(|l| inv.iter().map(move |g| g.map_or(usize::MAX, |g| m.act_right(l, g)))).collect()
                    }
                    None => return Err(RefinementError::MissingCell(label)),
                };
                if table.len() != nl * nn || table.iter().any(|&v| v >= nt) {
                    return Err(RefinementError::CellShape { cell: label, detail: format!("expected {} entries below {nt}", nl * nn) });
                }
                right.insert((j, i, i2), table);
            }
            for b in pc.arrows_from(j) {
                let j2 = pc.target(b);
                let (nth, nl, nt) = (coarse.abst(b).size(), modules[p].size(), modules[pair_index[&(i, j2)]].size());
                let label = format!("{} after {}", lc.arrow_label(b), pair_label(lf, lc, i, j));
                let table = match parts.left.remove(&(j2, j, i)) {
                    Some(t) => t,
                    None if j2 == j => {
                        let inv = invert(coarse.unit_table(j), nth);
                        inv.iter().flat_map(|h| (0..nl).map(move |l| h.map_or(usize::MAX, |h| m.act_left(h, l)))).collect()
                    }
                    None => return Err(RefinementError::MissingCell(label)),
                };
                if table.len() != nth * nl || table.iter().any(|&v| v >= nt) {
                    return Err(RefinementError::CellShape { cell: label, detail: format!("expected {} entries below {nt}", nth * nl) });
                }
                left.insert((j2, j, i), table);
            }
        }
        if let Some(k) = parts.right.keys().next().or(parts.left.keys().next()) {
            return Err(RefinementError::CellShape { cell: format!("{k:?}"), detail: "not a composable cell".into() });
        }
        Ok(RefinementData { fine, coarse, pairs, pair_index, modules, con, tilde, right, left })
    }

    pub fn fine(&self) -> &Atlas {
        &self.fine
    }

    pub fn coarse(&self) -> &Atlas {
        &self.coarse
    }

    /// `(fine, coarse)` pairs with support containment.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<usize> {
        self.pair_index.get(&(i, j)).copied()
    }

    pub fn module(&self, i: usize, j: usize) -> &Bimodule {
        &self.modules[self.pair_index[&(i, j)]]
    }

    pub fn concrete(&self, i: usize, j: usize) -> &ConModule {
        &self.con[self.pair_index[&(i, j)]]
    }

    pub fn tilde_index(&self, i: usize, j: usize, lambda: usize) -> usize {
        self.tilde[self.pair_index[&(i, j)]][lambda]
    }

    pub fn tilde(&self, i: usize, j: usize, lambda: usize) -> &[usize] {
        let p = self.pair_index[&(i, j)];
        self.con[p].map(self.tilde[p][lambda])
    }

    /// `α_jii'(λ ⊗ ν)`.
    pub fn right_cell(&self, j: usize, i: usize, i2: usize, lambda: usize, nu: usize) -> usize {
        let a = self.fine.layer().poset().arrow(i2, i).expect("fine arrow");
        self.right[&(j, i, i2)][lambda * self.fine.abst(a).size() + nu]
    }

    /// `α_j'ji(θ ⊗ λ)`.
    pub fn left_cell(&self, j2: usize, j: usize, i: usize, theta: usize, lambda: usize) -> usize {
        self.left[&(j2, j, i)][theta * self.module(i, j).size() + lambda]
    }

    pub fn label(&self, i: usize, j: usize) -> String {
        pair_label(self.fine.layer(), self.coarse.layer(), i, j)
    }

    pub fn set_right_entry(&mut self, key: (usize, usize, usize), index: usize, value: usize) {
        self.right.get_mut(&key).expect("cell")[index] = value;
    }

    pub fn set_left_entry(&mut self, key: (usize, usize, usize), index: usize, value: usize) {
        self.left.get_mut(&key).expect("cell")[index] = value;
    }

    pub fn to_parts(&self) -> RefinementParts {
        let mut parts = RefinementParts::default();
        for (p, &ij) in self.pairs.iter().enumerate() {
            parts.modules.insert(ij, self.modules[p].clone());
            if self.con[p].declared() {
                parts.concrete.insert(ij, self.con[p].maps().to_vec());
            }
            parts.tilde.insert(ij, self.tilde[p].iter().map(|&k| self.con[p].map(k).to_vec()).collect());
        }
        parts.right = self.right.clone();
        parts.left = self.left.clone();
        parts
    }
}

fn pair_label(lf: &crate::satake::SatakeLayer, lc: &crate::satake::SatakeLayer, i: usize, j: usize) -> String {
    format!("{} in {}", lf.chart(i).name(), lc.chart(j).name())
}

/// The refinement of an atlas by itself: refinement modules are the
/// abstract embeddings and mixed cells the composition cells.
pub fn identity_refinement(atlas: &Atlas) -> RefinementData {
    let p = atlas.layer().poset();
    let mut parts = RefinementParts::default();
    for (a, &(i, j)) in p.arrows().iter().enumerate() {
        parts.modules.insert((i, j), atlas.abst(a).clone());
        parts.concrete.insert((i, j), atlas.layer().con(a).maps().to_vec());
        parts.tilde.insert((i, j), (0..atlas.abst(a).size()).map(|l| atlas.tilde(a, l).to_vec()).collect());
    }
    for &(outer, inner) in atlas.alpha_tables().keys() {
        let (i2, i) = p.arrows()[inner];
        let j = p.target(outer);
        let t = atlas.alpha_table(outer, inner).expect("cell").to_vec();
        parts.right.insert((j, i, i2), t.clone());
        parts.left.insert((j, i, i2), t);
    }
    RefinementData::build(atlas.clone(), atlas.clone(), parts).expect("an atlas refines itself")
}

/// Atlases extracted from `model` on both covers, refinement modules from
/// local bisections of fine charts into coarse ones.
pub fn refinement_from_groupoid(model: &FiniteGroupoidModel, fine: &Cover, coarse: &Cover) -> Result<RefinementData, RefinementError> {
    let ef = extract(model, fine)?;
    let ec = extract(model, coarse)?;
    let (lf, lc) = (ef.atlas.layer(), ec.atlas.layer());
    let mut cross = BTreeMap::new();
    for i in 0..lf.charts().len() {
        for j in 0..lc.charts().len() {
            if is_subset(lf.quotient().support(i), lc.quotient().support(j)) {
                cross.insert((i, j), local_bisections(model, &ef.groups[i], &ec.groups[j])?);
            }
        }
    }
    let mut fine_mods: HashMap<usize, LocalBisections> = HashMap::new();
    for (a, &(i2, i)) in lf.poset().arrows().iter().enumerate() {
        fine_mods.insert(a, local_bisections(model, &ef.groups[i2], &ef.groups[i])?);
    }
    let mut coarse_mods: HashMap<usize, LocalBisections> = HashMap::new();
    for (b, &(j, j2)) in lc.poset().arrows().iter().enumerate() {
        coarse_mods.insert(b, local_bisections(model, &ec.groups[j], &ec.groups[j2])?);
    }
    let positions = |domain: &[usize]| -> HashMap<usize, usize> { domain.iter().enumerate().map(|(p, &x)| (x, p)).collect() };

    let mut parts = RefinementParts::default();
    for (&(i, j), lb) in &cross {
        let maps: Vec<Vec<usize>> = (0..lb.sections.len()).map(|k| lb.concrete(model, k, &ec.groups[j])).collect();
        let mut declared = maps.clone();
        declared.sort();
        declared.dedup();
        parts.concrete.insert((i, j), declared);
        parts.tilde.insert((i, j), maps);
        parts.modules.insert((i, j), lb.module.clone());

        let pos = positions(&ef.groups[i].domain);
        for a in lf.poset().arrows_into(i) {
            let i2 = lf.poset().source(a);
            let target = &cross[&(i2, j)];
            let mut t = Vec::new();
            for tau in &lb.sections {
                for s in &fine_mods[&a].sections {
                    t.push(section_product(model, &pos, tau, s).and_then(|p| target.index_of(&p)).unwrap_or(usize::MAX));
                }
            }
            parts.right.insert((j, i, i2), t);
        }
        let pos = positions(&ec.groups[j].domain);
        for b in lc.poset().arrows_from(j) {
            let j2 = lc.poset().target(b);
            let target = &cross[&(i, j2)];
            let mut t = Vec::new();
            for tau in &coarse_mods[&b].sections {
                for s in &lb.sections {
                    t.push(section_product(model, &pos, tau, s).and_then(|p| target.index_of(&p)).unwrap_or(usize::MAX));
                }
            }
            parts.left.insert((j2, j, i), t);
        }
    }
    RefinementData::build(ef.atlas, ec.atlas, parts)
}

/// One composite refinement module: classes of `(j, a, b)` with
/// `a ∈ A_kj`, `b ∈ A_ji` under the coend relation over middle charts.
struct Coend {
    elems: Vec<(usize, usize, usize)>,
    index: HashMap<(usize, usize, usize), usize>,
    class_of: Vec<usize>,
    reps: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Coend {
    fn class(&self, e: (usize, usize, usize)) -> usize {
        self.class_of[self.index[&e]]
    }

    /// Applies `f` to every member of every class and requires one class per row.
    fn descend(&self, what: &str, f: impl Fn((usize, usize, usize)) -> usize) -> Result<Vec<usize>, RefinementError> {
        let mut out = Vec::with_capacity(self.reps.len());
        for (c, ms) in self.members.iter().enumerate() {
            let v = f(self.elems[self.reps[c]]);
            if let Some(&m) = ms.iter().find(|&&m| f(self.elems[m]) != v) {
                return Err(RefinementError::NotWellDefined(format!("{what} differs on {:?}", self.elems[m])));
            }
            out.push(v);
        }
        Ok(out)
    }
}

/// Composes `U -> V` with `V -> W` by tensoring refinement modules over the
/// middle charts.
pub fn compose_refinements(first: &RefinementData, second: &RefinementData) -> Result<RefinementData, RefinementError> {
    if !same_layout(&first.coarse, &second.fine) {
        return Err(RefinementError::AtlasMismatch("middle"));
    }
    let (u, v, w) = (&first.fine, &first.coarse, &second.coarse);
    let (lu, lv, lw) = (u.layer(), v.layer(), w.layer());
    if lu.quotient().names() != lw.quotient().names() {
        return Err(RefinementError::QuotientMismatch);
    }
    let mut coends: BTreeMap<(usize, usize), Coend> = BTreeMap::new();
    for i in 0..lu.charts().len() {
        for k in 0..lw.charts().len() {
            if !is_subset(lu.quotient().support(i), lw.quotient().support(k)) {
                continue;
            }
            let middles: Vec<usize> =
                (0..lv.charts().len()).filter(|&j| first.pair(i, j).is_some() && second.pair(j, k).is_some()).collect();
            if middles.is_empty() {
                return Err(RefinementError::NoMiddle { fine: lu.chart(i).name().into(), coarse: lw.chart(k).name().into() });
            }
            let mut elems = Vec::new();
            for &j in &middles {
                for a in 0..second.module(j, k).size() {
                    for b in 0..first.module(i, j).size() {
                        elems.push((j, a, b));
                    }
                }
            }
            let index: HashMap<_, _> = elems.iter().enumerate().map(|(n, &e)| (e, n)).collect();
            let mut uf = UnionFind::new(elems.len());
            for &j in &middles {
                for beta in lv.poset().arrows_from(j) {
                    let j2 = lv.poset().target(beta);
                    if !middles.contains(&j2) {
                        continue;
                    }
                    for t in 0..v.abst(beta).size() {
                        for a in 0..second.module(j2, k).size() {
                            for b in 0..first.module(i, j).size() {
                                let lhs = (j, second.right_cell(k, j2, j, a, t), b);
                                let rhs = (j2, a, first.left_cell(j2, j, i, t, b));
                                uf.union(index[&lhs], index[&rhs]);
                            }
                        }
                    }
                }
            }
            let (class_of, reps) = uf.classes();
            let mut members = vec![Vec::new(); reps.len()];
            for (n, &c) in class_of.iter().enumerate() {
                members[c].push(n);
            }
            coends.insert((i, k), Coend { elems, index, class_of, reps, members });
        }
    }

    let mut parts = RefinementParts::default();
    for (&(i, k), ce) in &coends {
        let (gk, gi) = (w.group(k), u.group(i));
        let mut left = Vec::with_capacity(gk.order() * ce.reps.len());
        for h in gk.elements() {
            left.extend(ce.descend("left action", |(j, a, b)| ce.class((j, second.module(j, k).act_left(h, a), b)))?);
        }
        let mut right = vec![0; ce.reps.len() * gi.order()];
        for g in gi.elements() {
            let col = ce.descend("right action", |(j, a, b)| ce.class((j, a, first.module(i, j).act_right(b, g))))?;
            for (c, v) in col.into_iter().enumerate() {
                right[c * gi.order() + g] = v;
            }
        }
        let module = Bimodule::new_unchecked(gk.clone(), gi.clone(), ce.reps.len(), left, right)?;
        parts.modules.insert((i, k), module);

        let compose = |(j, a, b): (usize, usize, usize)| -> Vec<usize> {
            let (t2, t1) = (second.tilde(j, k, a), first.tilde(i, j, b));
            t1.iter().map(|&y| t2[y]).collect()
        };
        let mut tilde = Vec::with_capacity(ce.reps.len());
        for (c, ms) in ce.members.iter().enumerate() {
            let t = compose(ce.elems[ce.reps[c]]);
            if ms.iter().any(|&m| compose(ce.elems[m]) != t) {
                return Err(RefinementError::NotWellDefined(format!("concrete map of class {c} in {i}/{k}")));
            }
            tilde.push(t);
        }
        parts.tilde.insert((i, k), tilde);
        let mut concrete = Vec::new();
        for j in (0..lv.charts().len()).filter(|&j| first.pair(i, j).is_some() && second.pair(j, k).is_some()) {
            for c2 in second.concrete(j, k).maps() {
                for c1 in first.concrete(i, j).maps() {
                    concrete.push(c1.iter().map(|&y| c2[y]).collect::<Vec<usize>>());
                }
            }
        }
        parts.concrete.insert((i, k), concrete);

        for c in lu.poset().arrows_into(i) {
            let i2 = lu.poset().source(c);
            let target = &coends[&(i2, k)];
            let mut t = vec![0; ce.reps.len() * u.abst(c).size()];
            for nu in 0..u.abst(c).size() {
                let col = ce.descend("fine cell", |(j, a, b)| target.class((j, a, first.right_cell(j, i, i2, b, nu))))?;
                for (m, val) in col.into_iter().enumerate() {
                    t[m * u.abst(c).size() + nu] = val;
                }
            }
            parts.right.insert((k, i, i2), t);
        }
        for d in lw.poset().arrows_from(k) {
            let k2 = lw.poset().target(d);
            let target = &coends[&(i, k2)];
            let mut t = Vec::with_capacity(w.abst(d).size() * ce.reps.len());
            for theta in 0..w.abst(d).size() {
                t.extend(ce.descend("coarse cell", |(j, a, b)| target.class((j, second.left_cell(k2, k, j, theta, a), b)))?);
            }
            parts.left.insert((k2, k, i), t);
        }
    }
    RefinementData::build(u.clone(), w.clone(), parts)
}

pub fn verify_refinement(data: &RefinementData) -> Report {
    verify_refinement_with(data, Execution::default())
}

/// Every refinement condition, exhaustively over pairs and composable chains.
pub fn verify_refinement_with(data: &RefinementData, exec: Execution) -> Report {
    let mut report = Report::new("verify refinement");
    let (lf, lc) = (data.fine.layer(), data.coarse.layer());
    for i in 0..lf.charts().len() {
        let w = (!data.pairs.iter().any(|&(a, _)| a == i)).then(|| "support lies in no coarse chart".to_string());
        report.push(CheckOutcome::from_witness(CheckKey::RefineSatake, lf.chart(i).name(), w));
    }
    for i in 0..lf.charts().len() {
        for j in 0..lc.charts().len() {
            let meet: Vec<usize> =
                lf.quotient().support(i).iter().copied().filter(|q| lc.quotient().contains(j, *q)).collect();
            if meet.is_empty() {
                continue;
            }
            let w = meet
                .iter()
                .find(|&&q| !(0..lf.charts().len()).any(|m| lf.quotient().contains(m, q) && is_subset(lf.quotient().support(m), &meet)))
                .map(|&q| format!("no fine chart through {} inside the intersection", lf.quotient().name(q)));
            report.push(CheckOutcome::from_witness(
                CheckKey::RefineCover,
                format!("{} with {}", lf.chart(i).name(), lc.chart(j).name()),
                w,
            ));
        }
    }
    let pairs: Vec<usize> = (0..data.pairs.len()).collect();
    report.extend(exec::flat_map(exec, &pairs, |&p| check_pair_module(data, p)));
    report.extend(exec::flat_map(exec, &pairs, |&p| check_mixed_cells(data, p)));
    report.extend(exec::flat_map(exec, &pairs, |&p| check_coherence(data, p)));
    report
}

fn check_pair_module(data: &RefinementData, p: usize) -> Vec<CheckOutcome> {
    let (i, j) = data.pairs[p];
    let label = data.label(i, j);
    let m = &data.modules[p];
    let con = &data.con[p];
    let t = &data.tilde[p];
    let (cf, cc) = (data.fine.layer().chart(i), data.coarse.layer().chart(j));
    let mut out = Vec::new();
    let laws = m.check_laws().err().map(|e| e.to_string());
    let cls = m.classify();
    let w = laws.or_else(|| (!cls.all()).then(|| cls.to_string()));
    out.push(CheckOutcome::from_witness(CheckKey::RefineModule, label.clone(), w));

    let missing = (0..con.len()).find(|k| !t.contains(k));
    out.push(CheckOutcome::from_witness(
        CheckKey::RefineRhoSurjective,
        label.clone(),
        missing.map(|k| format!("concrete embedding {k} has no preimage")),
    ));

    let cm = con.module();
    let mut w = None;
    'e: for l in 0..m.size() {
        for g in cf.group().elements() {
            if t[m.act_right(l, g)] != cm.act_right(t[l], cf.rho().apply(g)) {
                w = Some(format!("element {l} times g{g}"));
                break 'e;
            }
        }
        for h in cc.group().elements() {
            if t[m.act_left(h, l)] != cm.act_left(cc.rho().apply(h), t[l]) {
                w = Some(format!("h{h} times element {l}"));
                break 'e;
            }
        }
    }
    out.push(CheckOutcome::from_witness(CheckKey::RefineRhoEquivariant, label.clone(), w));

    let mut w = None;
    'k: for l in 0..m.size() {
        for l2 in l + 1..m.size() {
            if t[l] == t[l2] && !cf.group().elements().any(|g| m.act_right(l, g) == l2) {
                w = Some(format!("elements {l} and {l2} share a concrete image but differ by no g"));
                break 'k;
            }
        }
    }
    out.push(CheckOutcome::from_witness(CheckKey::RefineKernelTransitivity, label, w));
    out
}

fn compose_maps(outer: &[usize], inner: &[usize]) -> Vec<usize> {
    inner.iter().map(|&y| outer[y]).collect()
}

fn check_mixed_cells(data: &RefinementData, p: usize) -> Vec<CheckOutcome> {
    let (i, j) = data.pairs[p];
    let (f, c) = (&data.fine, &data.coarse);
    let (lf, lc) = (f.layer(), c.layer());
    let mut out = Vec::new();
    for a in lf.poset().arrows_into(i) {
        let i2 = lf.poset().source(a);
        let label = format!("{} after {}", data.label(i, j), lf.arrow_label(a));
        let target = data.module(i2, j);
        let r = check_cell(&data.modules[p], f.abst(a), target, &|l, n| Some(data.right_cell(j, i, i2, l, n)));
        let w = r.balanced_witness().or(r.equivariance_witness()).or(r.not_iso.clone());
        out.push(CheckOutcome::from_witness(CheckKey::RefineRightCell, label.clone(), w));

        let (cji, ca, cji2) = (&data.con[p], lf.con(a), data.concrete(i2, j));
        let r = check_cell(cji.module(), ca.module(), cji2.module(), &|x, y| cji2.index_of(&compose_maps(cji.map(x), ca.map(y))));
        let w = r.balanced_witness().or(r.equivariance_witness()).or(r.not_iso.clone());
        out.push(CheckOutcome::from_witness(CheckKey::RefineGammaRight, label.clone(), w));

        let mut w = None;
        'r: for l in 0..data.modules[p].size() {
            for n in 0..f.abst(a).size() {
                let lhs = data.tilde(i2, j, data.right_cell(j, i, i2, l, n));
                if lhs != compose_maps(data.tilde(i, j, l), f.tilde(a, n)).as_slice() {
                    w = Some(format!("concrete image of ({l}, {n}) is not the composite"));
                    break 'r;
                }
            }
        }
        out.push(CheckOutcome::from_witness(CheckKey::RefineRhoRight, label, w));
    }
    for b in lc.poset().arrows_from(j) {
        let j2 = lc.poset().target(b);
        let label = format!("{} after {}", lc.arrow_label(b), data.label(i, j));
        let target = data.module(i, j2);
        let r = check_cell(c.abst(b), &data.modules[p], target, &|t, l| Some(data.left_cell(j2, j, i, t, l)));
        let w = r.balanced_witness().or(r.equivariance_witness()).or(r.not_iso.clone());
        out.push(CheckOutcome::from_witness(CheckKey::RefineLeftCell, label.clone(), w));

        let (cb, cji, cj2i) = (lc.con(b), &data.con[p], data.concrete(i, j2));
        let r = check_cell(cb.module(), cji.module(), cj2i.module(), &|x, y| cj2i.index_of(&compose_maps(cb.map(x), cji.map(y))));
        let w = r.balanced_witness().or(r.equivariance_witness()).or(r.not_iso.clone());
        out.push(CheckOutcome::from_witness(CheckKey::RefineGammaLeft, label.clone(), w));

        let mut w = None;
        'l: for t in 0..c.abst(b).size() {
            for l in 0..data.modules[p].size() {
                let lhs = data.tilde(i, j2, data.left_cell(j2, j, i, t, l));
                if lhs != compose_maps(c.tilde(b, t), data.tilde(i, j, l)).as_slice() {
                    w = Some(format!("concrete image of ({t}, {l}) is not the composite"));
                    break 'l;
                }
            }
        }
        out.push(CheckOutcome::from_witness(CheckKey::RefineRhoLeft, label, w));
    }
    out
}

fn check_coherence(data: &RefinementData, p: usize) -> Vec<CheckOutcome> {
    let (i, j) = data.pairs[p];
    let (f, c) = (&data.fine, &data.coarse);
    let (pf, pc) = (f.layer().poset(), c.layer().poset());
    let (lf, lc) = (f.layer(), c.layer());
    let size = data.modules[p].size();
    let mut out = Vec::new();

    for a in pf.arrows_into(i) {
        let i2 = pf.source(a);
        for a2 in pf.arrows_into(i2) {
            let i3 = pf.source(a2);
            let label = format!("{} after {} after {}", data.label(i, j), lf.arrow_label(a), lf.arrow_label(a2));
            let mut w = None;
            'f: for l in 0..size {
                for n in 0..f.abst(a).size() {
                    for n2 in 0..f.abst(a2).size() {
                        let lhs = data.right_cell(j, i2, i3, data.right_cell(j, i, i2, l, n), n2);
                        let rhs = data.right_cell(j, i, i3, l, f.alpha(a, a2, n, n2));
                        if lhs != rhs {
                            w = Some(format!("({l}, {n}, {n2}): {lhs} != {rhs}"));
                            break 'f;
                        }
                    }
                }
            }
            out.push(CheckOutcome::from_witness(CheckKey::RefinePentagonFine, label, w));
        }
    }
    for b in pc.arrows_from(j) {
        let j2 = pc.target(b);
        for a in pf.arrows_into(i) {
            let i2 = pf.source(a);
            let label = format!("{} after {} after {}", lc.arrow_label(b), data.label(i, j), lf.arrow_label(a));
            let mut w = None;
            'm: for t in 0..c.abst(b).size() {
                for l in 0..size {
                    for n in 0..f.abst(a).size() {
                        let lhs = data.right_cell(j2, i, i2, data.left_cell(j2, j, i, t, l), n);
                        let rhs = data.left_cell(j2, j, i2, t, data.right_cell(j, i, i2, l, n));
                        if lhs != rhs {
                            w = Some(format!("({t}, {l}, {n}): {lhs} != {rhs}"));
                            break 'm;
                        }
                    }
                }
            }
            out.push(CheckOutcome::from_witness(CheckKey::RefinePentagonMixed, label, w));
        }
        for b2 in pc.arrows_from(j2) {
            let j3 = pc.target(b2);
            let label = format!("{} after {} after {}", lc.arrow_label(b2), lc.arrow_label(b), data.label(i, j));
            let mut w = None;
            'c: for t2 in 0..c.abst(b2).size() {
                for t in 0..c.abst(b).size() {
                    for l in 0..size {
                        let lhs = data.left_cell(j3, j, i, c.alpha(b2, b, t2, t), l);
                        let rhs = data.left_cell(j3, j2, i, t2, data.left_cell(j2, j, i, t, l));
                        if lhs != rhs {
                            w = Some(format!("({t2}, {t}, {l}): {lhs} != {rhs}"));
                            break 'c;
                        }
                    }
                }
            }
            out.push(CheckOutcome::from_witness(CheckKey::RefinePentagonCoarse, label, w));
        }
    }

    let m = &data.modules[p];
    let w = (0..size)
        .flat_map(|l| f.group(i).elements().map(move |g| (l, g)))
        .find(|&(l, g)| data.right_cell(j, i, i, l, f.unit(i, g)) != m.act_right(l, g))
        .map(|(l, g)| format!("{l} after unit(g{g}) is not {l}.g{g}"));
    out.push(CheckOutcome::from_witness(CheckKey::RefineUnitFine, data.label(i, j), w));
    let w = c
        .group(j)
        .elements()
        .flat_map(|h| (0..size).map(move |l| (h, l)))
        .find(|&(h, l)| data.left_cell(j, j, i, c.unit(j, h), l) != m.act_left(h, l))
        .map(|(h, l)| format!("unit(h{h}) after {l} is not h{h}.{l}"));
    out.push(CheckOutcome::from_witness(CheckKey::RefineUnitCoarse, data.label(i, j), w));
    out
}

/// Fine chart with one refinement element on each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BundlePiece {
    pub fine: usize,
    pub left: usize,
    pub right: usize,
}

/// `(λ, x, μ)` with `λ ∈ A^V_ji`, `x` a fine sample and `μ ∈ A^W_ki`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BundlePoint {
    pub piece: usize,
    pub lambda: usize,
    pub x: usize,
    pub mu: usize,
}

/// The bibundle between `G(V)` and `G(W)` induced by two refinements of a
/// common atlas. The right action is by arrows of `G(V)` along `τ`, the left
/// action by arrows of `G(W)` along `ε`.
#[derive(Debug, Clone)]
pub struct MoritaBundle {
    pub pieces: Vec<BundlePiece>,
    offset: Vec<usize>,
    dims: Vec<(usize, usize, usize)>,
    piece_index: HashMap<(usize, usize, usize), usize>,
    pub class_of: Vec<usize>,
    pub reps: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    pub tau: Vec<usize>,
    pub eps: Vec<usize>,
    pub left_groupoid: FractionsGroupoid,
    pub right_groupoid: FractionsGroupoid,
    /// `(m, g) -> m·g` for `g ∈ G(V)` with `t(g) = τ(m)`.
    pub right: HashMap<(usize, usize), usize>,
    /// `(h, m) -> h·m` for `h ∈ G(W)` with `s(h) = ε(m)`.
    pub left: HashMap<(usize, usize), usize>,
    anchor_failure: Option<String>,
    right_failure: Option<String>,
    left_failure: Option<String>,
}

impl MoritaBundle {
    pub fn len(&self) -> usize {
        *self.offset.last().unwrap_or(&0) + self.dims.last().map_or(0, |d| d.0 * d.1 * d.2)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn classes(&self) -> usize {
        self.reps.len()
    }

    pub fn piece_of(&self, fine: usize, left: usize, right: usize) -> Option<usize> {
        self.piece_index.get(&(fine, left, right)).copied()
    }

    pub fn id(&self, s: BundlePoint) -> usize {
        let (_, nx, nm) = self.dims[s.piece];
        self.offset[s.piece] + (s.lambda * nx + s.x) * nm + s.mu
    }

    pub fn point(&self, id: usize) -> BundlePoint {
        let piece = self.offset.partition_point(|&o| o <= id) - 1;
        let (_, nx, nm) = self.dims[piece];
        let r = id - self.offset[piece];
        BundlePoint { piece, lambda: r / (nx * nm), x: (r / nm) % nx, mu: r % nm }
    }

    pub fn class(&self, s: BundlePoint) -> usize {
        self.class_of[self.id(s)]
    }
}

/// Which refinement acts and on which leg of a bundle point.
#[derive(Clone, Copy)]
enum Side {
    Right,
    Left,
}

struct BundleCtx<'a> {
    v: &'a RefinementData,
    w: &'a RefinementData,
    pieces: &'a [BundlePiece],
    piece_index: &'a HashMap<(usize, usize, usize), usize>,
}

impl BundleCtx<'_> {
    /// All results of acting on `m` by the span `s` of the acting groupoid,
    /// one per reconciling witness. The span leg `from` must land in the
    /// acting chart of `m`; the result lies over the target of `to`.
    fn act(&self, side: Side, m: BundlePoint, s: Span, gpd: &FractionsGroupoid) -> Vec<BundlePoint> {
        let pc = self.pieces[m.piece];
        let (acting, passive, act_chart, pas_chart, act_elem, pas_elem) = match side {
            Side::Right => (self.v, self.w, pc.left, pc.right, m.lambda, m.mu),
            Side::Left => (self.w, self.v, pc.right, pc.left, m.mu, m.lambda),
        };
        let sp = gpd.space.pieces[s.piece];
        let (from, from_elem, to, to_elem) = match side {
            Side::Right => (sp.right, s.nu, sp.left, s.lambda),
            Side::Left => (sp.left, s.lambda, sp.right, s.nu),
        };
        let ca = acting.coarse.layer().poset();
        if ca.target(from) != act_chart {
            return Vec::new();
        }
        let mid = sp.chart;
        let new_chart = ca.target(to);
        let fine = &acting.fine;
        let pf = fine.layer().poset();
        let i = pc.fine;
        let mut out = Vec::new();
        for e in pf.arrows_into(i) {
            let i2 = pf.source(e);
            if acting.pair(i2, mid).is_none() {
                continue;
            }
            for nu in 0..fine.abst(e).size() {
                let img = fine.tilde(e, nu);
                for (z, &zx) in img.iter().enumerate() {
                    if zx != m.x {
                        continue;
                    }
                    let through = acting.right_cell(act_chart, i, i2, act_elem, nu);
                    for kappa in 0..acting.module(i2, mid).size() {
                        if acting.tilde(i2, mid, kappa)[z] != s.x {
                            continue;
                        }
                        if acting.left_cell(act_chart, mid, i2, from_elem, kappa) != through {
                            continue;
                        }
                        let new_act = acting.left_cell(new_chart, mid, i2, to_elem, kappa);
                        let new_pas = passive.right_cell(pas_chart, i, i2, pas_elem, nu);
                        let (l, r, lambda, mu) = match side {
                            Side::Right => (new_chart, pas_chart, new_act, new_pas),
                            Side::Left => (pas_chart, new_chart, new_pas, new_act),
                        };
                        out.push(BundlePoint { piece: self.piece_index[&(i2, l, r)], lambda, x: z, mu });
                    }
                }
            }
        }
        out
    }
}

pub fn build_morita_bundle(v: &RefinementData, w: &RefinementData) -> Result<MoritaBundle, RefinementError> {
    build_morita_bundle_with(v, w, Execution::default())
}

/// Points are classes of `(λ, κ̃(z), μ) ~ (α(λ⊗κ), z, α(μ⊗κ))`; actions go
/// through reconciling witnesses and are checked on all representatives.
pub fn build_morita_bundle_with(v: &RefinementData, w: &RefinementData, exec: Execution) -> Result<MoritaBundle, RefinementError> {
    if v.coarse.layer().quotient().names() != w.coarse.layer().quotient().names() {
        return Err(RefinementError::QuotientMismatch);
    }
    if !same_layout(&v.fine, &w.fine) {
        return Err(RefinementError::AtlasMismatch("fine"));
    }
    let fine = &v.fine;
    let lf = fine.layer();
    let mut pieces = Vec::new();
    for i in 0..lf.charts().len() {
        for &(_, j) in v.pairs.iter().filter(|p| p.0 == i) {
            for &(_, k) in w.pairs.iter().filter(|p| p.0 == i) {
                pieces.push(BundlePiece { fine: i, left: j, right: k });
            }
        }
    }
    let piece_index: HashMap<(usize, usize, usize), usize> =
        pieces.iter().enumerate().map(|(n, p)| ((p.fine, p.left, p.right), n)).collect();
    let mut offset = Vec::with_capacity(pieces.len());
    let mut dims = Vec::with_capacity(pieces.len());
    let mut len = 0;
    for p in &pieces {
        offset.push(len);
        let d = (v.module(p.fine, p.left).size(), lf.chart(p.fine).samples(), w.module(p.fine, p.right).size());
        dims.push(d);
        len += d.0 * d.1 * d.2;
    }
    let mut bundle = MoritaBundle {
        pieces,
        offset,
        dims,
        piece_index,
        class_of: Vec::new(),
        reps: Vec::new(),
        members: Vec::new(),
        tau: Vec::new(),
        eps: Vec::new(),
        left_groupoid: build_groupoid_with(&v.coarse, exec),
        right_groupoid: build_groupoid_with(&w.coarse, exec),
        right: HashMap::new(),
        left: HashMap::new(),
        anchor_failure: None,
        right_failure: None,
        left_failure: None,
    };

    let mut uf = UnionFind::new(len);
    let pf = lf.poset();
    for (n, p) in bundle.pieces.iter().enumerate() {
        let (i, j, k) = (p.fine, p.left, p.right);
        for e in pf.arrows_into(i) {
            let i2 = pf.source(e);
            let target = bundle.piece_index[&(i2, j, k)];
            for kappa in 0..fine.abst(e).size() {
                for (z, &x) in fine.tilde(e, kappa).iter().enumerate() {
                    for lambda in 0..bundle.dims[n].0 {
                        for mu in 0..bundle.dims[n].2 {
                            let a = bundle.id(BundlePoint { piece: n, lambda, x, mu });
                            let b = bundle.id(BundlePoint {
                                piece: target,
                                lambda: v.right_cell(j, i, i2, lambda, kappa),
                                x: z,
                                mu: w.right_cell(k, i, i2, mu, kappa),
                            });
                            uf.union(a, b);
                        }
                    }
                }
            }
        }
    }
    let (class_of, reps) = uf.classes();
    let mut members = vec![Vec::new(); reps.len()];
    for (id, &c) in class_of.iter().enumerate() {
        members[c].push(id);
    }
    bundle.class_of = class_of;
    bundle.reps = reps;
    bundle.members = members;

    let tau_of = |b: &MoritaBundle, id: usize| {
        let s = b.point(id);
        let p = b.pieces[s.piece];
        b.left_groupoid.object(p.left, v.tilde(p.fine, p.left, s.lambda)[s.x])
    };
    let eps_of = |b: &MoritaBundle, id: usize| {
        let s = b.point(id);
        let p = b.pieces[s.piece];
        b.right_groupoid.object(p.right, w.tilde(p.fine, p.right, s.mu)[s.x])
    };
    bundle.tau = bundle.reps.iter().map(|&r| tau_of(&bundle, r)).collect();
    bundle.eps = bundle.reps.iter().map(|&r| eps_of(&bundle, r)).collect();
    for (c, ms) in bundle.members.iter().enumerate() {
        if let Some(&m) = ms.iter().find(|&&m| tau_of(&bundle, m) != bundle.tau[c] || eps_of(&bundle, m) != bundle.eps[c]) {
            bundle.anchor_failure = Some(format!("{:?} and {:?} share a class but not anchors", bundle.point(bundle.reps[c]), bundle.point(m)));
            break;
        }
    }

    let ctx = BundleCtx { v, w, pieces: &bundle.pieces, piece_index: &bundle.piece_index };
    for side in [Side::Right, Side::Left] {
        let gpd = match side {
            Side::Right => &bundle.left_groupoid,
            Side::Left => &bundle.right_groupoid,
        };
        let classes: Vec<usize> = (0..bundle.reps.len()).collect();
        let b = &bundle;
        let results = exec::map(exec, &classes, |&m| {
            let anchor = match side {
                Side::Right => b.tau[m],
                Side::Left => b.eps[m],
            };
            let mut row = Vec::new();
            let mut fail = None;
            for g in 0..gpd.classes() {
                let hits = match side {
                    Side::Right => gpd.model.target(g) == anchor,
                    Side::Left => gpd.model.source(g) == anchor,
                };
                if !hits {
                    continue;
                }
                let (rm, rg) = (b.point(b.reps[m]), gpd.space.span(gpd.reps[g]));
                let all: Vec<usize> = ctx.act(side, rm, rg, gpd).into_iter().map(|p| b.class(p)).collect();
                let Some(&first) = all.first() else {
                    fail.get_or_insert_with(|| format!("no reconciling witness for class {m} and arrow {g}"));
                    continue;
                };
                if let Some(o) = all.iter().find(|&&c| c != first) {
                    fail.get_or_insert_with(|| format!("class {m} and arrow {g}: witnesses give {first} and {o}"));
                }
                for &pm in &b.members[m] {
                    if ctx.act(side, b.point(pm), rg, gpd).first().map(|p| b.class(*p)) != Some(first) {
                        fail.get_or_insert_with(|| format!("representative {:?} of class {m} acts differently", b.point(pm)));
                    }
                }
                for &pg in &gpd.members[g] {
                    if ctx.act(side, rm, gpd.space.span(pg), gpd).first().map(|p| b.class(*p)) != Some(first) {
                        fail.get_or_insert_with(|| format!("representative of arrow {g} acts differently on class {m}"));
                    }
                }
                row.push((g, first));
            }
            (row, fail)
        });
        let mut table = HashMap::new();
        let mut failure = None;
        for (m, (row, fail)) in results.into_iter().enumerate() {
            for (g, r) in row {
                match side {
                    Side::Right => table.insert((m, g), r),
                    Side::Left => table.insert((g, m), r),
                };
            }
            if failure.is_none() {
                failure = fail;
            }
        }
        match side {
            Side::Right => {
                bundle.right = table;
                bundle.right_failure = failure;
            }
            Side::Left => {
                bundle.left = table;
                bundle.left_failure = failure;
            }
        }
    }
    Ok(bundle)
}

/// Finite bi-principality: surjective anchors, both actions well defined
/// and lawful, commuting, with bijective pairing maps.
pub fn check_biprincipality(b: &MoritaBundle) -> Report {
    let mut r = Report::new("bundle");
    let (gv, gw) = (&b.left_groupoid.model, &b.right_groupoid.model);
    let n = b.classes();

    let mut w = b.anchor_failure.clone();
    if w.is_none() {
        w = (0..gv.objects()).find(|o| !b.tau.contains(o)).map(|o| format!("τ misses {}", gv.object_name(o)));
    }
    if w.is_none() {
        w = (0..gw.objects()).find(|o| !b.eps.contains(o)).map(|o| format!("ε misses {}", gw.object_name(o)));
    }
    r.push(CheckOutcome::from_witness(CheckKey::BundleAnchor, "τ, ε", w));

    let mut w = b.right_failure.clone();
    for m in 0..n {
        if w.is_some() {
            break;
        }
        if b.right.get(&(m, gv.unit(b.tau[m]))) != Some(&m) {
            w = Some(format!("class {m} times a unit moves"));
            break;
        }
        for (&(m2, g), &mg) in b.right.iter().filter(|((m2, _), _)| *m2 == m) {
            if b.tau[mg] != gv.source(g) || b.eps[mg] != b.eps[m2] {
                w = Some(format!("class {m} times arrow {g} leaves its fibre"));
                break;
            }
            for g2 in (0..gv.arrows()).filter(|&g2| gv.target(g2) == gv.source(g)) {
                let lhs = b.right.get(&(mg, g2));
                let rhs = gv.compose(g, g2).and_then(|gg| b.right.get(&(m, gg)));
                if lhs.is_none() || lhs != rhs {
                    w = Some(format!("(class {m} · {g}) · {g2} differs from class {m} · ({g} ∘ {g2})"));
                    break;
                }
            }
            if w.is_some() {
                break;
            }
        }
    }
    r.push(CheckOutcome::from_witness(CheckKey::BundleRightAction, "G(V)", w));

    let mut w = b.left_failure.clone();
    for m in 0..n {
        if w.is_some() {
            break;
        }
        if b.left.get(&(gw.unit(b.eps[m]), m)) != Some(&m) {
            w = Some(format!("a unit times class {m} moves"));
            break;
        }
        for (&(h, _), &hm) in b.left.iter().filter(|((_, m2), _)| *m2 == m) {
            if b.eps[hm] != gw.target(h) || b.tau[hm] != b.tau[m] {
                w = Some(format!("arrow {h} times class {m} leaves its fibre"));
                break;
            }
            for h2 in (0..gw.arrows()).filter(|&h2| gw.source(h2) == gw.target(h)) {
                let lhs = b.left.get(&(h2, hm));
                let rhs = gw.compose(h2, h).and_then(|hh| b.left.get(&(hh, m)));
                if lhs.is_none() || lhs != rhs {
                    w = Some(format!("{h2} · ({h} · class {m}) differs from ({h2} ∘ {h}) · class {m}"));
                    break;
                }
            }
            if w.is_some() {
                break;
            }
        }
    }
    r.push(CheckOutcome::from_witness(CheckKey::BundleLeftAction, "G(W)", w));

    let mut w = None;
    'c: for (&(m, g), &mg) in &b.right {
        for h in (0..gw.arrows()).filter(|&h| gw.source(h) == b.eps[m]) {
            let lhs = b.left.get(&(h, mg));
            let rhs = b.left.get(&(h, m)).and_then(|hm| b.right.get(&(*hm, g)));
            if lhs.is_none() || lhs != rhs {
                w = Some(format!("arrow {h}, class {m}, arrow {g}"));
                break 'c;
            }
        }
    }
    r.push(CheckOutcome::from_witness(CheckKey::BundleCommute, "actions", w));

    // (m, g) -> (m, m·g) onto pairs with equal ε
    let mut w = None;
    'p: for m in 0..n {
        let mut hit = vec![0usize; n];
        for (&(_, _), &mg) in b.right.iter().filter(|((m2, _), _)| *m2 == m) {
            hit[mg] += 1;
        }
        for m2 in 0..n {
            let want = usize::from(b.eps[m2] == b.eps[m]);
            if hit[m2] != want {
                w = Some(format!("class {m} reaches class {m2} by {} arrows, expected {want}", hit[m2]));
                break 'p;
            }
        }
    }
    r.push(CheckOutcome::from_witness(CheckKey::BundleRightPrincipal, "G(V)", w));

    let mut w = None;
    'q: for m in 0..n {
        let mut hit = vec![0usize; n];
        for (&(_, _), &hm) in b.left.iter().filter(|((_, m2), _)| *m2 == m) {
            hit[hm] += 1;
        }
        for m2 in 0..n {
            let want = usize::from(b.tau[m2] == b.tau[m]);
            if hit[m2] != want {
                w = Some(format!("class {m} reaches class {m2} by {} arrows, expected {want}", hit[m2]));
                break 'q;
            }
        }
    }
    r.push(CheckOutcome::from_witness(CheckKey::BundleLeftPrincipal, "G(W)", w));
    r.push(CheckOutcome::info(CheckKey::BundleSize, "bundle", format!("{} points in {} classes", b.len(), n)));
    r
}

/// Group isos, sample bijections and module bijections, indexed like the
/// source atlas.
#[derive(Debug, Clone)]
pub struct AtlasIsomorphism {
    pub groups: Vec<GroupHom>,
    pub samples: Vec<Vec<usize>>,
    pub modules: Vec<Vec<usize>>,
}

fn sample_bijections(a: &Atlas, b: &Atlas, i: usize, phi: &GroupHom) -> Vec<Vec<usize>> {
    let (ca, cb) = (a.layer().chart(i), b.layer().chart(i));
    let (qa, qb) = (a.layer().quotient(), b.layer().quotient());
    let n = ca.samples();
    if cb.samples() != n {
        return Vec::new();
    }
    let cands: Vec<Vec<usize>> =
        (0..n).map(|x| (0..n).filter(|&y| qb.name(cb.proj()[y]) == qa.name(ca.proj()[x])).collect()).collect();
    let mut out = Vec::new();
    fn rec(cands: &[Vec<usize>], cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == cands.len() {
            out.push(cur.clone());
            return;
        }
        for &y in &cands[cur.len()] {
            if !used[y] {
                used[y] = true;
                cur.push(y);
                rec(cands, cur, used, out);
                cur.pop();
                used[y] = false;
            }
        }
    }
    rec(&cands, &mut Vec::new(), &mut vec![false; n], &mut out);
    out.retain(|s| {
        ca.group().elements().all(|g| (0..n).all(|x| s[ca.action().apply(g, x)] == cb.action().apply(phi.apply(g), s[x])))
    });
    out
}

/// Searches for an isomorphism matching charts by index and quotient points
/// by name: group isos, equivariant sample bijections and module bijections
/// compatible with units, concrete maps and composition cells.
pub fn find_atlas_isomorphism(a: &Atlas, b: &Atlas) -> Result<Option<AtlasIsomorphism>, BimoduleError> {
    let (la, lb) = (a.layer(), b.layer());
    let mut qa: Vec<&str> = la.quotient().names().iter().map(String::as_str).collect();
    let mut qb: Vec<&str> = lb.quotient().names().iter().map(String::as_str).collect();
    qa.sort_unstable();
    qb.sort_unstable();
    if qa != qb || la.charts().len() != lb.charts().len() || la.poset().arrows() != lb.poset().arrows() {
        return Ok(None);
    }
    let charts = la.charts().len();
    let mut per_chart: Vec<Vec<(GroupHom, Vec<usize>)>> = Vec::with_capacity(charts);
    for i in 0..charts {
        let mut c = Vec::new();
        for phi in isomorphisms(a.group(i), b.group(i)) {
            for s in sample_bijections(a, b, i, &phi) {
                c.push((phi.clone(), s));
            }
        }
        if c.is_empty() {
            return Ok(None);
        }
        per_chart.push(c);
    }

    let mut choice = vec![0; charts];
    loop {
        let groups: Vec<GroupHom> = (0..charts).map(|i| per_chart[i][choice[i]].0.clone()).collect();
        let samples: Vec<Vec<usize>> = (0..charts).map(|i| per_chart[i][choice[i]].1.clone()).collect();
        if let Some(modules) = match_modules(a, b, &groups, &samples)? {
            return Ok(Some(AtlasIsomorphism { groups, samples, modules }));
        }
        let mut k = 0;
        loop {
            if k == charts {
                return Ok(None);
            }
            choice[k] += 1;
            if choice[k] < per_chart[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn match_modules(a: &Atlas, b: &Atlas, groups: &[GroupHom], samples: &[Vec<usize>]) -> Result<Option<Vec<Vec<usize>>>, BimoduleError> {
    let p = a.layer().poset();
    let mut cands: Vec<Vec<Vec<usize>>> = Vec::with_capacity(p.len());
    for (e, &(i, j)) in p.arrows().iter().enumerate() {
        let mut c = if i == j {
            let mut f = vec![usize::MAX; a.abst(e).size()];
            for g in a.group(i).elements() {
                f[a.unit(i, g)] = b.unit(i, groups[i].apply(g));
            }
            vec![f]
        } else {
            isomorphisms_along(a.abst(e), b.abst(e), &groups[j], &groups[i], None)?
        };
        c.retain(|f| {
            f.iter().enumerate().all(|(l, &fl)| {
                fl < b.abst(e).size()
                    && compose_maps(&samples[j], a.tilde(e, l)) == compose_maps(b.tilde(e, fl), &samples[i])
            })
        });
        if c.is_empty() {
            return Ok(None);
        }
        cands.push(c);
    }
    let pairs = p.composable_pairs();
    let consistent = |chosen: &[Option<usize>], cands: &[Vec<Vec<usize>>]| {
        pairs.iter().all(|&(o, i, c)| {
            let (Some(fo), Some(fi), Some(fc)) = (chosen[o], chosen[i], chosen[c]) else { return true };
            let (fo, fi, fc) = (&cands[o][fo], &cands[i][fi], &cands[c][fc]);
            (0..a.abst(o).size())
                .all(|n| (0..a.abst(i).size()).all(|l| fc[a.alpha(o, i, n, l)] == b.alpha(o, i, fo[n], fi[l])))
        })
    };
    fn rec(
        e: usize,
        chosen: &mut Vec<Option<usize>>,
        cands: &[Vec<Vec<usize>>],
        ok: &dyn Fn(&[Option<usize>], &[Vec<Vec<usize>>]) -> bool,
    ) -> bool {
        if e == cands.len() {
            return true;
        }
        for k in 0..cands[e].len() {
            chosen[e] = Some(k);
            if ok(chosen, cands) && rec(e + 1, chosen, cands, ok) {
                return true;
            }
        }
        chosen[e] = None;
        false
    }
    let mut chosen = vec![None; p.len()];
    if rec(0, &mut chosen, &cands, &consistent) {
        Ok(Some(chosen.iter().enumerate().map(|(e, k)| cands[e][k.expect("assigned")].clone()).collect()))
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Equal invariants; evidence of equivalence, not a proof.
    Equal,
    /// First differing field; proves the groupoids are not Morita equivalent.
    Differ { field: &'static str, left: String, right: String },
}

impl Verdict {
    pub fn describe(&self) -> String {
        match self {
            Verdict::Equal => "equal".into(),
            Verdict::Differ { field, left, right } => format!("differ: {field} {left} vs {right}"),
        }
    }
}

pub fn compare_invariants(a: &MoritaInvariants, b: &MoritaInvariants) -> Verdict {
    if a.quotient_points != b.quotient_points {
        return Verdict::Differ {
            field: "quotient points",
            left: a.quotient_points.to_string(),
            right: b.quotient_points.to_string(),
        };
    }
    if a.isotropy != b.isotropy {
        return Verdict::Differ { field: "isotropy", left: a.isotropy.join(","), right: b.isotropy.join(",") };
    }
    if a.inertia != b.inertia {
        return Verdict::Differ { field: "inertia", left: a.inertia.to_string(), right: b.inertia.to_string() };
    }
    Verdict::Equal
}

pub fn atlas_invariants(atlas: &Atlas) -> Result<MoritaInvariants, GroupoidError> {
    morita_invariants(&build_groupoid(atlas).model)
}

/// One line per invariant and a verdict line, failing on `differ`.
pub fn compare_report(a: &MoritaInvariants, b: &MoritaInvariants) -> Report {
    let mut r = Report::new("compare");
    r.push(CheckOutcome::info(CheckKey::MoritaQuotientPoints, "points", format!("{} vs {}", a.quotient_points, b.quotient_points)));
    r.push(CheckOutcome::info(CheckKey::MoritaIsotropy, "isotropy", format!("[{}] vs [{}]", a.isotropy.join(","), b.isotropy.join(","))));
    r.push(CheckOutcome::info(CheckKey::MoritaInertia, "inertia", format!("{} vs {}", a.inertia, b.inertia)));
    let v = compare_invariants(a, b);
    let status = match v {
        Verdict::Equal => Status::Pass,
        Verdict::Differ { .. } => Status::Fail,
    };
    r.push(CheckOutcome { key: CheckKey::MoritaVerdict, subject: "verdict".into(), status, detail: v.describe() });
    r
}

/// The cover of a groupoid of fractions by its charts.
pub fn chart_cover(atlas: &Atlas, gpd: &FractionsGroupoid) -> Cover {
    let layer = atlas.layer();
    Cover::new(
        layer.charts().iter().map(|c| c.name().to_string()).collect(),
        layer.charts().iter().enumerate().map(|(i, c)| (0..c.samples()).map(|x| gpd.object(i, x)).collect()).collect(),
    )
}

/// Groupoid of fractions, extraction on the chart cover, verification of the
/// extracted atlas and its groupoid's invariants against the original.
pub fn roundtrip_check(atlas: &Atlas) -> Report {
    let mut r = Report::new("roundtrip");
    let gpd = build_groupoid(atlas);
    let before = match morita_invariants(&gpd.model) {
        Ok(i) => i,
        Err(e) => {
            r.push(CheckOutcome::fail(CheckKey::RoundtripInvariants, "before", e.to_string()));
            return r;
        }
    };
    let extracted = match extract(&gpd.model, &chart_cover(atlas, &gpd)) {
        Ok(e) => e.atlas,
        Err(e) => {
            r.push(CheckOutcome::fail(CheckKey::ExtractVerify, "charts", e.to_string()));
            return r;
        }
    };
    let v = verify_atlas(&extracted);
    let fails = v.failed_keys();
    r.push(CheckOutcome::from_witness(
        CheckKey::ExtractVerify,
        "charts",
        (!v.passed()).then(|| format!("failing checks: {}", fails.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", "))),
    ));
    match atlas_invariants(&extracted) {
        Ok(after) => {
            let verdict = compare_invariants(&before, &after);
            r.push(CheckOutcome::from_witness(
                CheckKey::RoundtripInvariants,
                "invariants",
                (verdict != Verdict::Equal).then(|| verdict.describe()),
            ));
        }
        Err(e) => r.push(CheckOutcome::fail(CheckKey::RoundtripInvariants, "after", e.to_string())),
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::*;

    #[test]
    fn identity_refinements_verify() {
        for a in [z3_circle(false), z3_circle(true), single_chart(regular_action(3)), torsor_pair()] {
            let r = verify_refinement(&identity_refinement(&a));
            assert!(r.passed(), "{}", r.render_human());
        }
    }

    #[test]
    fn fine_cover_refinement_verifies() {
        let g = z3_circle_groupoid(false);
        let data = refinement_from_groupoid(&g, &z3_circle_fine_cover(&g), &z3_circle_cover(&g)).unwrap();
        let r = verify_refinement(&data);
        assert!(r.passed(), "{}", r.render_human());
    }

    #[test]
    fn corrupted_pentagon_is_named() {
        let mut data = identity_refinement(&z3_circle(false));
        let key = *data.left.keys().find(|(j2, j, _)| j2 != j).unwrap();
        let t = &data.left[&key];
        let v = (t[0] + 1) % data.module(key.2, key.0).size();
        data.set_left_entry(key, 0, v);
        let r = verify_refinement(&data);
        assert!(!r.passed());
        assert!(r.failed_keys().contains(&CheckKey::RefineLeftCell) || r.failed_keys().contains(&CheckKey::RefinePentagonCoarse));
    }

    #[test]
    fn identity_bundle_is_the_arrow_space() {
        let a = z3_circle(false);
        let id = identity_refinement(&a);
        let b = build_morita_bundle(&id, &id).unwrap();
        assert_eq!(b.classes(), build_groupoid(&a).classes());
        let r = check_biprincipality(&b);
        assert!(r.passed(), "{}", r.render_human());
    }

    #[test]
    fn composition_with_identity_verifies() {
        let g = z3_circle_groupoid(true);
        let data = refinement_from_groupoid(&g, &z3_circle_fine_cover(&g), &z3_circle_cover(&g)).unwrap();
        let c = compose_refinements(&data, &identity_refinement(data.coarse())).unwrap();
        assert!(verify_refinement(&c).passed());
        let c = compose_refinements(&identity_refinement(data.fine()), &data).unwrap();
        assert!(verify_refinement(&c).passed());
    }

    #[test]
    fn isomorphism_search_separates_twists() {
        let (a, b) = (z3_circle(false), z3_circle(true));
        assert!(find_atlas_isomorphism(&a, &a).unwrap().is_some());
        assert!(find_atlas_isomorphism(&a, &b).unwrap().is_none());
        let ga = crate::groupoid_model::atlas_from_groupoid(&z3_circle_groupoid(false), &z3_circle_cover(&z3_circle_groupoid(false))).unwrap();
        assert!(find_atlas_isomorphism(&ga, &a).unwrap().is_some());
    }

    #[test]
    fn compare_reports_inertia() {
        let (a, b) = (atlas_invariants(&z3_circle(false)).unwrap(), atlas_invariants(&z3_circle(true)).unwrap());
        assert_eq!(compare_invariants(&a, &b).describe(), "differ: inertia 3 vs 2");
        assert_eq!(compare_invariants(&b, &a).describe(), "differ: inertia 2 vs 3");
    }

    #[test]
    fn roundtrip_keeps_invariants() {
        for a in [z3_circle(false), z3_circle(true)] {
            let r = roundtrip_check(&a);
            assert!(r.passed(), "{}", r.render_human());
        }
    }

    #[test]
    fn bundle_between_covers_is_biprincipal() {
        let g = z3_circle_groupoid(true);
        let fine = z3_circle_fine_cover(&g);
        let v = refinement_from_groupoid(&g, &fine, &z3_circle_cover(&g)).unwrap();
        let w = refinement_from_groupoid(&g, &fine, &fine).unwrap();
        let b = build_morita_bundle(&v, &w).unwrap();
        let r = check_biprincipality(&b);
        assert!(r.passed(), "{}", r.render_human());
    }

    #[test]
    fn dropped_action_entry_breaks_principality() {
        let id = identity_refinement(&z3_circle(false));
        let mut b = build_morita_bundle(&id, &id).unwrap();
        let k = *b.right.keys().min().unwrap();
        b.right.remove(&k);
        let r = check_biprincipality(&b);
        assert!(r.failed_keys().contains(&CheckKey::BundleRightPrincipal));
    }
}
