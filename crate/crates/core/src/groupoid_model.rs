//! Finite groupoid models with sheets, bisection groups, modules of local
//! bisections and atlas extraction.
//!
//! A finite set of arrows cannot carry a topology, so a model may declare
//! sheets: sets of arrows that lie on one connected local bisection. A
//! section `σ` over a set of objects is continuous when every sheet through
//! one of its values also dictates its values at the other sources of that
//! sheet in the domain.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::atlas::{Atlas, AtlasError, AtlasParts};
use crate::bimodule::Bimodule;
use crate::group::{iso_label, FiniteGroup, GroupAction, GroupError, GroupRef};
use crate::report::{CheckKey, CheckOutcome, Report, Status};
use crate::satake::{Chart, SatakeError, SatakeLayer};
use crate::uf::UnionFind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupoidError {
    #[error("model shape: {0}")]
    Shape(String),
    #[error("{chart} is not a translation subset: {detail}")]
    NotTranslationSubset { chart: String, detail: String },
    #[error("bisections over {chart} are not closed under composition")]
    NotClosed { chart: String },
    #[error("evaluation from bisections of {source_chart} into {target_chart} is not bijective: {detail}")]
    EvaluationNotBijective { source_chart: String, target_chart: String, detail: String },
    #[error("quotient of {source_chart} is not contained in the quotient of {target_chart}")]
    QuotientNotContained { source_chart: String, target_chart: String },
    #[error("left action on bisections {source_chart} -> {target_chart} is not free and transitive")]
    NotTorsor { source_chart: String, target_chart: String },
    #[error("cover chart {0} is empty")]
    EmptyChart(String),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Satake(#[from] SatakeError),
    #[error(transparent)]
    Atlas(#[from] AtlasError),
}

#[derive(Debug, Clone)]
pub struct FiniteGroupoidModel {
    object_names: Vec<String>,
    arrow_names: Vec<String>,
    source: Vec<usize>,
    target: Vec<usize>,
    unit: Vec<usize>,
    inverse: Vec<usize>,
    compose: HashMap<(usize, usize), usize>,
    sheets: Vec<Vec<usize>>,
    quotient_labels: Option<Vec<String>>,
    out_arrows: Vec<Vec<usize>>,
    sheets_of: Vec<Vec<usize>>,
    sheet_at: Vec<HashMap<usize, usize>>,
}

impl FiniteGroupoidModel {
    /// Range-checked construction; the groupoid laws are checked by
    /// [`validate_groupoid`]. `compose` is keyed `(g2, g1)` for `g2 ∘ g1`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        object_names: Vec<String>,
        arrow_names: Vec<String>,
        source: Vec<usize>,
        target: Vec<usize>,
        unit: Vec<usize>,
        inverse: Vec<usize>,
        compose: HashMap<(usize, usize), usize>,
        sheets: Vec<Vec<usize>>,
    ) -> Result<Self, GroupoidError> {
        let (no, na) = (object_names.len(), arrow_names.len());
        let shape = |m: String| Err(GroupoidError::Shape(m));
        if source.len() != na || target.len() != na || inverse.len() != na {
            return shape(format!("{na} arrows but source/target/inverse have other lengths"));
        }
        if unit.len() != no {
            return shape(format!("{no} objects but {} units", unit.len()));
        }
        if source.iter().chain(&target).any(|&x| x >= no) {
            return shape("source or target out of range".into());
        }
        if unit.iter().chain(&inverse).any(|&g| g >= na) {
            return shape("unit or inverse out of range".into());
        }
        if compose.iter().any(|(&(a, b), &c)| a >= na || b >= na || c >= na) {
            return shape("composition entry out of range".into());
        }
        if sheets.iter().flatten().any(|&g| g >= na) {
            return shape("sheet arrow out of range".into());
        }
        let mut out_arrows = vec![Vec::new(); no];
        for g in 0..na {
            out_arrows[source[g]].push(g);
        }
        let mut sheets_of = vec![Vec::new(); na];
        let mut sheet_at = Vec::with_capacity(sheets.len());
        for (k, s) in sheets.iter().enumerate() {
            let mut at = HashMap::new();
            for &g in s {
                sheets_of[g].push(k);
                at.insert(source[g], g);
            }
            sheet_at.push(at);
        }
        Ok(FiniteGroupoidModel {
            object_names,
            arrow_names,
            source,
            target,
            unit,
            inverse,
            compose,
            sheets,
            quotient_labels: None,
            out_arrows,
            sheets_of,
            sheet_at,
        })
    }

    /// Per-object names of the quotient point, used to name orbits.
    pub fn with_quotient_labels(mut self, labels: Vec<String>) -> Result<Self, GroupoidError> {
        if labels.len() != self.objects() {
            return Err(GroupoidError::Shape("one quotient label per object required".into()));
        }
        self.quotient_labels = Some(labels);
        Ok(self)
    }

    pub fn objects(&self) -> usize {
        self.object_names.len()
    }

    pub fn arrows(&self) -> usize {
        self.arrow_names.len()
    }

    pub fn object_name(&self, x: usize) -> &str {
        &self.object_names[x]
    }

    pub fn object_names(&self) -> &[String] {
        &self.object_names
    }

    pub fn arrow_name(&self, g: usize) -> &str {
        &self.arrow_names[g]
    }

    pub fn arrow_names(&self) -> &[String] {
        &self.arrow_names
    }

    pub fn source(&self, g: usize) -> usize {
        self.source[g]
    }

    pub fn target(&self, g: usize) -> usize {
        self.target[g]
    }

    pub fn unit(&self, x: usize) -> usize {
        self.unit[x]
    }

    pub fn inverse(&self, g: usize) -> usize {
        self.inverse[g]
    }

    /// `g2 ∘ g1`, defined when `t(g1) = s(g2)`.
    pub fn compose(&self, g2: usize, g1: usize) -> Option<usize> {
        self.compose.get(&(g2, g1)).copied()
    }

    pub fn compose_table(&self) -> &HashMap<(usize, usize), usize> {
        &self.compose
    }

    pub fn sheets(&self) -> &[Vec<usize>] {
        &self.sheets
    }

    pub fn quotient_labels(&self) -> Option<&[String]> {
        self.quotient_labels.as_deref()
    }

    pub fn arrows_from(&self, x: usize) -> &[usize] {
        &self.out_arrows[x]
    }

    pub fn hom_set(&self, x: usize, y: usize) -> Vec<usize> {
        self.out_arrows[x].iter().copied().filter(|&g| self.target[g] == y).collect()
    }

    /// Orbit id per object, numbered by least object, and the orbits.
    pub fn orbits(&self) -> (Vec<usize>, Vec<Vec<usize>>) {
        let mut uf = UnionFind::new(self.objects());
        for g in 0..self.arrows() {
            uf.union(self.source[g], self.target[g]);
        }
        let (class_of, reps) = uf.classes();
        let mut orbits = vec![Vec::new(); reps.len()];
        for (x, &c) in class_of.iter().enumerate() {
            orbits[c].push(x);
        }
        (class_of, orbits)
    }

    /// Display name of each orbit: the quotient label of its least object,
    /// or the object name.
    pub fn orbit_names(&self) -> Vec<String> {
        let (_, orbits) = self.orbits();
        orbits
            .iter()
            .map(|o| match &self.quotient_labels {
                Some(l) => l[o[0]].clone(),
                None => self.object_names[o[0]].clone(),
            })
            .collect()
    }

    /// `(s, t)^{-1}(x, x)` as a group; the unit comes first.
    pub fn isotropy(&self, x: usize) -> Result<(FiniteGroup, Vec<usize>), GroupoidError> {
        let mut loops = vec![self.unit[x]];
        loops.extend(self.hom_set(x, x).into_iter().filter(|&g| g != self.unit[x]));
        let index: HashMap<usize, usize> = loops.iter().enumerate().map(|(k, &g)| (g, k)).collect();
        let n = loops.len();
        let mut table = Vec::with_capacity(n * n);
        for &a in &loops {
            for &b in &loops {
                let c = self
                    .compose(a, b)
                    .and_then(|c| index.get(&c).copied())
                    .ok_or_else(|| GroupoidError::Shape(format!("loops at {} do not compose", self.object_name(x))))?;
                table.push(c);
            }
        }
        Ok((FiniteGroup::from_flat(n, table)?, loops))
    }

    /// Loop components modulo same-sheet gluing and conjugation. Returns a
    /// component id per loop arrow (others `usize::MAX`) and the count.
    pub fn inertia(&self) -> (Vec<usize>, usize) {
        let na = self.arrows();
        let mut uf = UnionFind::new(na);
        let is_loop = |g: usize| self.source[g] == self.target[g];
        for s in &self.sheets {
            let loops: Vec<usize> = s.iter().copied().filter(|&g| is_loop(g)).collect();
            for w in loops.windows(2) {
                uf.union(w[0], w[1]);
            }
        }
        for g in (0..na).filter(|&g| is_loop(g)) {
            for &h in &self.out_arrows[self.source[g]] {
                let conj = self.compose(h, g).and_then(|hg| self.compose(hg, self.inverse[h]));
                if let Some(c) = conj {
                    uf.union(g, c);
                }
            }
        }
        let mut comp = vec![usize::MAX; na];
        let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
        for g in (0..na).filter(|&g| is_loop(g)) {
            let r = uf.find(g);
            let next = ids.len();
            comp[g] = *ids.entry(r).or_insert(next);
        }
        (comp, ids.len())
    }

    pub fn sheets_through(&self, g: usize) -> &[usize] {
        &self.sheets_of[g]
    }

    /// Arrow of sheet `k` with source `x`.
    pub fn sheet_at(&self, k: usize, x: usize) -> Option<usize> {
        self.sheet_at[k].get(&x).copied()
    }
}

/// Exhaustive scan of the groupoid laws and the sheet conditions.
pub fn validate_groupoid(model: &FiniteGroupoidModel) -> Report {
    let mut r = Report::new("validate groupoid");
    let m = model;
    let na = m.arrows();

    let w = (0..m.objects()).find_map(|x| {
        let u = m.unit[x];
        (m.source[u] != x || m.target[u] != x).then(|| format!("unit at {} is not a loop there", m.object_name(x)))
    });
    r.push(CheckOutcome::from_witness(CheckKey::ModelGroupoidLaws, "units", w));

    let mut w = None;
    'c: for g1 in 0..na {
        for &g2 in &m.out_arrows[m.target[g1]] {
            match m.compose(g2, g1) {
                None => {
                    w = Some(format!("{} after {} undefined", m.arrow_name(g2), m.arrow_name(g1)));
                    break 'c;
                }
                Some(c) if m.source[c] != m.source[g1] || m.target[c] != m.target[g2] => {
                    w = Some(format!("{} after {} has wrong endpoints", m.arrow_name(g2), m.arrow_name(g1)));
                    break 'c;
                }
                _ => {}
            }
        }
    }
    if w.is_none() {
        let mut keys: Vec<&(usize, usize)> = m.compose.keys().collect();
        keys.sort_unstable();
        w = keys
            .into_iter()
            .find(|&&(g2, g1)| m.target[g1] != m.source[g2])
            .map(|&(g2, g1)| format!("{} after {} defined but not composable", m.arrow_name(g2), m.arrow_name(g1)));
    }
    let composition_ok = w.is_none();
    r.push(CheckOutcome::from_witness(CheckKey::ModelGroupoidLaws, "composition", w));
    if !composition_ok {
        return r;
    }

    let w = (0..na).find_map(|g| {
        let (ls, rt) = (m.compose(g, m.unit[m.source[g]]), m.compose(m.unit[m.target[g]], g));
        (ls != Some(g) || rt != Some(g)).then(|| format!("units do not fix {}", m.arrow_name(g)))
    });
    r.push(CheckOutcome::from_witness(CheckKey::ModelGroupoidLaws, "unit laws", w));

    let w = (0..na).find_map(|g| {
        let i = m.inverse[g];
        let ok = m.source[i] == m.target[g]
            && m.target[i] == m.source[g]
            && m.compose(g, i) == Some(m.unit[m.target[g]])
            && m.compose(i, g) == Some(m.unit[m.source[g]]);
        (!ok).then(|| format!("inverse of {} is wrong", m.arrow_name(g)))
    });
    r.push(CheckOutcome::from_witness(CheckKey::ModelGroupoidLaws, "inverses", w));

    let mut w = None;
    'a: for g1 in 0..na {
        for &g2 in &m.out_arrows[m.target[g1]] {
            let g21 = m.compose(g2, g1).expect("checked");
            for &g3 in &m.out_arrows[m.target[g2]] {
                if m.compose(g3, g21) != m.compose(m.compose(g3, g2).expect("checked"), g1) {
                    w = Some(format!(
                        "({} {} {}) is not associative",
                        m.arrow_name(g3),
                        m.arrow_name(g2),
                        m.arrow_name(g1)
                    ));
                    break 'a;
                }
            }
        }
    }
    r.push(CheckOutcome::from_witness(CheckKey::ModelGroupoidLaws, "associativity", w));

    for (k, s) in m.sheets.iter().enumerate() {
        let mut seen_s = HashMap::new();
        let mut seen_t = HashMap::new();
        let mut w = None;
        for &g in s {
            if let Some(prev) = seen_s.insert(m.source[g], g) {
                w = Some(format!("{} and {} share a source", m.arrow_name(prev), m.arrow_name(g)));
                break;
            }
            if let Some(prev) = seen_t.insert(m.target[g], g) {
                w = Some(format!("{} and {} share a target", m.arrow_name(prev), m.arrow_name(g)));
                break;
            }
        }
        r.push(CheckOutcome::from_witness(CheckKey::ModelSheets, format!("sheet {k}"), w));
    }
    r
}

/// Continuous sections `σ` over `domain` with `s∘σ = id`, values landing in
/// `codomain`, and `t∘σ` injective. Each section lists `σ(domain[k])`;
/// sections come out in lexicographic order of arrow ids.
pub fn sections(model: &FiniteGroupoidModel, domain: &[usize], codomain: &[usize]) -> Vec<Vec<usize>> {
    let mut in_codomain = vec![false; model.objects()];
    for &y in codomain {
        in_codomain[y] = true;
    }
    let pos: HashMap<usize, usize> = domain.iter().enumerate().map(|(k, &x)| (x, k)).collect();
    let cands: Vec<Vec<usize>> = domain
        .iter()
        .map(|&x| model.arrows_from(x).iter().copied().filter(|&g| in_codomain[model.target(g)]).collect())
        .collect();
    let mut out = Vec::new();
    let mut cur: Vec<usize> = Vec::with_capacity(domain.len());
    let mut used = vec![false; model.objects()];
    extend_sections(model, &pos, &cands, &mut cur, &mut used, &mut out);
    out
}

fn extend_sections(
    m: &FiniteGroupoidModel,
    pos: &HashMap<usize, usize>,
    cands: &[Vec<usize>],
    cur: &mut Vec<usize>,
    used: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    let k = cur.len();
    if k == cands.len() {
        out.push(cur.clone());
        return;
    }
    for &g in &cands[k] {
        if used[m.target(g)] || !continuous_with(m, pos, cur, g) {
            continue;
        }
        used[m.target(g)] = true;
        cur.push(g);
        extend_sections(m, pos, cands, cur, used, out);
        cur.pop();
        used[m.target(g)] = false;
    }
}

fn continuous_with(m: &FiniteGroupoidModel, pos: &HashMap<usize, usize>, assigned: &[usize], g: usize) -> bool {
    let u = m.source(g);
    for &s in m.sheets_through(g) {
        for (&v, &a) in &m.sheet_at[s] {
            if let Some(&p) = pos.get(&v) {
                if p < assigned.len() && assigned[p] != a {
                    return false;
                }
            }
        }
    }
    for &h in assigned {
        for &s in m.sheets_through(h) {
            if let Some(a) = m.sheet_at(s, u) {
                if a != g {
                    return false;
                }
            }
        }
    }
    true
}

pub(crate) fn section_product(m: &FiniteGroupoidModel, pos: &HashMap<usize, usize>, outer: &[usize], inner: &[usize]) -> Option<Vec<usize>> {
    inner
        .iter()
        .map(|&g| {
            let p = *pos.get(&m.target(g))?;
            m.compose(outer[p], g)
        })
        .collect()
}

/// The group of continuous bisections of a chart onto itself, acting on the
/// chart by `t∘σ`.
#[derive(Debug, Clone)]
pub struct BisectionGroup {
    pub name: String,
    pub domain: Vec<usize>,
    pub sections: Vec<Vec<usize>>,
    pub group: GroupRef,
    pub action: GroupAction,
    index: HashMap<Vec<usize>, usize>,
}

impl BisectionGroup {
    pub fn index_of(&self, section: &[usize]) -> Option<usize> {
        self.index.get(section).copied()
    }

    pub fn position(&self, x: usize) -> Option<usize> {
        self.domain.iter().position(|&y| y == x)
    }
}

pub fn bisection_group(model: &FiniteGroupoidModel, name: &str, domain: &[usize]) -> Result<BisectionGroup, GroupoidError> {
    if domain.is_empty() {
        return Err(GroupoidError::EmptyChart(name.to_string()));
    }
    let mut domain = domain.to_vec();
    domain.sort_unstable();
    domain.dedup();
    let pos: HashMap<usize, usize> = domain.iter().enumerate().map(|(k, &x)| (x, k)).collect();
    let mut secs = sections(model, &domain, &domain);
    let id: Vec<usize> = domain.iter().map(|&x| model.unit(x)).collect();
    let Some(p) = secs.iter().position(|s| *s == id) else {
        return Err(GroupoidError::NotTranslationSubset {
            chart: name.to_string(),
            detail: "the unit section is not continuous".into(),
        });
    };
    let id = secs.remove(p);
    secs.insert(0, id);
    let index: HashMap<Vec<usize>, usize> = secs.iter().cloned().enumerate().map(|(k, s)| (s, k)).collect();
    let n = secs.len();

    let mut hit: HashMap<usize, (usize, usize)> = HashMap::new();
    for (k, s) in secs.iter().enumerate() {
        for (p, &g) in s.iter().enumerate() {
            if let Some(prev) = hit.insert(g, (k, p)) {
                return Err(GroupoidError::NotTranslationSubset {
                    chart: name.to_string(),
                    detail: format!("arrow {} lies in bisections {} and {k}", model.arrow_name(g), prev.0),
                });
            }
        }
    }
    for &x in &domain {
        for &g in model.arrows_from(x) {
            if pos.contains_key(&model.target(g)) && !hit.contains_key(&g) {
                return Err(GroupoidError::NotTranslationSubset {
                    chart: name.to_string(),
                    detail: format!("arrow {} lies in no bisection; shrink the chart", model.arrow_name(g)),
                });
            }
        }
    }

    let mut table = Vec::with_capacity(n * n);
    for a in &secs {
        for b in &secs {
            let prod = section_product(model, &pos, a, b).and_then(|p| index.get(&p).copied());
            table.push(prod.ok_or_else(|| GroupoidError::NotClosed { chart: name.to_string() })?);
        }
    }
    let group = Arc::new(FiniteGroup::from_flat(n, table)?);
    let mut act = Vec::with_capacity(n * domain.len());
    for s in &secs {
        act.extend(s.iter().map(|&g| pos[&model.target(g)]));
    }
    let action = GroupAction::new(group.clone(), domain.len(), act)?;
    Ok(BisectionGroup { name: name.to_string(), domain, sections: secs, group, action, index })
}

/// Bisections of `small` into `big` with their bimodule structure
/// `G_small ⟶̸ G_big`.
#[derive(Debug, Clone)]
pub struct LocalBisections {
    pub sections: Vec<Vec<usize>>,
    pub module: Bimodule,
    index: HashMap<Vec<usize>, usize>,
}

impl LocalBisections {
    pub fn index_of(&self, section: &[usize]) -> Option<usize> {
        self.index.get(section).copied()
    }

    /// `x ↦ t(σ(x))` as positions in `big`.
    pub fn concrete(&self, model: &FiniteGroupoidModel, k: usize, big: &BisectionGroup) -> Vec<usize> {
        self.sections[k].iter().map(|&g| big.position(model.target(g)).expect("lands in big")).collect()
    }
}

pub fn local_bisections(
    model: &FiniteGroupoidModel,
    small: &BisectionGroup,
    big: &BisectionGroup,
) -> Result<LocalBisections, GroupoidError> {
    let names = || (small.name.clone(), big.name.clone());
    let (orbit_of, _) = model.orbits();
    let big_orbits: Vec<usize> = big.domain.iter().map(|&x| orbit_of[x]).collect();
    if small.domain.iter().any(|&x| !big_orbits.contains(&orbit_of[x])) {
        let (s, t) = names();
        return Err(GroupoidError::QuotientNotContained { source_chart: s, target_chart: t });
    }
    let secs = sections(model, &small.domain, &big.domain);
    let index: HashMap<Vec<usize>, usize> = secs.iter().cloned().enumerate().map(|(k, s)| (s, k)).collect();

    let eval_fail = |detail: String| {
        let (s, t) = names();
        GroupoidError::EvaluationNotBijective { source_chart: s, target_chart: t, detail }
    };
    let mut hit: HashMap<usize, usize> = HashMap::new();
    for (k, s) in secs.iter().enumerate() {
        for &g in s {
            if let Some(prev) = hit.insert(g, k) {
                return Err(eval_fail(format!(
                    "arrow {} lies in bisections {prev} and {k}; shrink {}",
                    model.arrow_name(g),
                    small.name
                )));
            }
        }
    }
    for &x in &small.domain {
        for &g in model.arrows_from(x) {
            if big.position(model.target(g)).is_some() && !hit.contains_key(&g) {
                return Err(eval_fail(format!(
                    "arrow {} lies in no bisection; remove {} from {}",
                    model.arrow_name(g),
                    model.object_name(x),
                    small.name
                )));
            }
        }
    }

    let big_pos: HashMap<usize, usize> = big.domain.iter().enumerate().map(|(k, &x)| (x, k)).collect();
    let small_pos: HashMap<usize, usize> = small.domain.iter().enumerate().map(|(k, &x)| (x, k)).collect();
    let not_closed = || GroupoidError::NotClosed { chart: format!("{} -> {}", small.name, big.name) };
    let mut left = Vec::with_capacity(big.sections.len() * secs.len());
    for tau in &big.sections {
        for s in &secs {
            let p = section_product(model, &big_pos, tau, s).and_then(|p| index.get(&p).copied());
            left.push(p.ok_or_else(not_closed)?);
        }
    }
    let mut right = Vec::with_capacity(secs.len() * small.sections.len());
    for s in &secs {
        for g in &small.sections {
            let p = section_product(model, &small_pos, s, g).and_then(|p| index.get(&p).copied());
            right.push(p.ok_or_else(not_closed)?);
        }
    }
    let module = Bimodule::new(big.group.clone(), small.group.clone(), secs.len(), left, right)
        .map_err(|_| not_closed())?;
    let rep = module.classify();
    if !(rep.nonempty && rep.left_free && rep.left_transitive) {
        let (s, t) = names();
        return Err(GroupoidError::NotTorsor { source_chart: s, target_chart: t });
    }
    Ok(LocalBisections { sections: secs, module, index })
}

/// A declared cover: named object subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cover {
    pub names: Vec<String>,
    pub charts: Vec<Vec<usize>>,
}

impl Cover {
    pub fn new(names: Vec<String>, charts: Vec<Vec<usize>>) -> Self {
        let charts = charts
            .into_iter()
            .map(|mut c| {
                c.sort_unstable();
                c.dedup();
                c
            })
            .collect();
        Cover { names, charts }
    }

    pub fn len(&self) -> usize {
        self.charts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charts.is_empty()
    }
}

/// Cover checks: every object is covered and every point in the quotients
/// of two charts has a chart inside both quotients.
pub fn check_cover(model: &FiniteGroupoidModel, cover: &Cover) -> Vec<CheckOutcome> {
    let (orbit_of, _) = model.orbits();
    let supports: Vec<Vec<usize>> = cover
        .charts
        .iter()
        .map(|c| {
            let mut s: Vec<usize> = c.iter().map(|&x| orbit_of[x]).collect();
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect();
    let covered: Vec<bool> = (0..model.objects()).map(|x| cover.charts.iter().any(|c| c.contains(&x))).collect();
    let w = covered.iter().position(|&c| !c).map(|x| format!("object {} is not covered", model.object_name(x)));
    let mut out = vec![CheckOutcome::from_witness(CheckKey::ModelCover, "objects", w)];
    for a in 0..supports.len() {
        for b in a + 1..supports.len() {
            let meet: Vec<usize> = supports[a].iter().copied().filter(|q| supports[b].contains(q)).collect();
            if meet.is_empty() {
                continue;
            }
            let missing = meet.iter().find(|&&q| !supports.iter().any(|s| s.contains(&q) && s.iter().all(|p| meet.contains(p))));
            out.push(CheckOutcome::from_witness(
                CheckKey::ModelCover,
                format!("{},{}", cover.names[a], cover.names[b]),
                missing.map(|&q| format!("no chart inside the overlap contains orbit {q}")),
            ));
        }
    }
    out
}

/// Bisection groups and pairwise modules of a cover.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub groups: Vec<BisectionGroup>,
    pub atlas: Atlas,
}

fn chart_from_group(model: &FiniteGroupoidModel, bg: &BisectionGroup, orbit_of: &[usize]) -> Result<Chart, GroupoidError> {
    let names = bg.domain.iter().map(|&x| model.object_name(x).to_string()).collect();
    let proj = bg.domain.iter().map(|&x| orbit_of[x]).collect();
    Ok(Chart::new(bg.name.clone(), names, bg.action.clone(), proj, true, 1)?)
}

pub fn atlas_from_groupoid(model: &FiniteGroupoidModel, cover: &Cover) -> Result<Atlas, GroupoidError> {
    Ok(extract(model, cover)?.atlas)
}

/// Charts are the bisection groups of the cover sets, abstract embeddings
/// are the modules of local bisections and composition is composition of
/// bisections.
pub fn extract(model: &FiniteGroupoidModel, cover: &Cover) -> Result<Extraction, GroupoidError> {
    let (orbit_of, _) = model.orbits();
    let groups: Vec<BisectionGroup> = cover
        .charts
        .iter()
        .zip(&cover.names)
        .map(|(c, n)| bisection_group(model, n, c))
        .collect::<Result<_, _>>()?;
    let charts: Vec<Chart> = groups.iter().map(|g| chart_from_group(model, g, &orbit_of)).collect::<Result<_, _>>()?;
    let quotient = model.orbit_names();

    // poset arrows only depend on supports; build a provisional layer to read them
    let probe = SatakeLayer::new(quotient.clone(), charts.clone(), &BTreeMap::new())?;
    let poset = probe.poset().clone();
    let mut modules = Vec::with_capacity(poset.len());
    let mut declared = BTreeMap::new();
    for &(i, j) in poset.arrows() {
        let lb = local_bisections(model, &groups[i], &groups[j])?;
        let mut maps: Vec<Vec<usize>> = (0..lb.sections.len()).map(|k| lb.concrete(model, k, &groups[j])).collect();
        maps.sort();
        maps.dedup();
        declared.insert((i, j), maps);
        modules.push(lb);
    }
    let layer = SatakeLayer::new(quotient, charts, &declared)?;

    let mut parts = AtlasParts::default();
    for (a, &(i, j)) in poset.arrows().iter().enumerate() {
        let lb = &modules[a];
        let con = layer.con(a);
        let tilde = (0..lb.sections.len())
            .map(|k| con.index_of(&lb.concrete(model, k, &groups[j])).expect("declared"))
            .collect();
        parts.tilde.insert(a, tilde);
        parts.abst.insert(a, lb.module.clone());
        if i == j {
            let unit = groups[i].sections.iter().map(|s| lb.index_of(s).expect("bisections of a chart")).collect();
            parts.unit.insert(i, unit);
        }
    }
    for (outer, inner, composite) in poset.composable_pairs() {
        let j = poset.source(outer);
        let pos: HashMap<usize, usize> = groups[j].domain.iter().enumerate().map(|(p, &x)| (x, p)).collect();
        let (mo, mi, mc) = (&modules[outer], &modules[inner], &modules[composite]);
        let mut t = Vec::with_capacity(mo.sections.len() * mi.sections.len());
        for tau in &mo.sections {
            for s in &mi.sections {
                let prod = section_product(model, &pos, tau, s).and_then(|p| mc.index_of(&p));
                t.push(prod.unwrap_or(usize::MAX));
            }
        }
        parts.alpha.insert((outer, inner), t);
    }
    let atlas = Atlas::build(layer, parts)?;
    Ok(Extraction { groups, atlas })
}

/// Model-side checks for a cover: translation subsets, bisection orbits,
/// local bisection modules and the target-side decomposition.
pub fn check_model_cover(model: &FiniteGroupoidModel, cover: &Cover) -> Report {
    let mut r = validate_groupoid(model);
    r.command = "groupoid cover".into();
    r.extend(check_cover(model, cover));
    let (orbit_of, _) = model.orbits();
    let mut groups = Vec::new();
    for (c, n) in cover.charts.iter().zip(&cover.names) {
        match bisection_group(model, n, c) {
            Ok(g) => {
                r.push(CheckOutcome::pass(CheckKey::ModelTranslation, n.clone()));
                let w = g.domain.iter().enumerate().find_map(|(p, &x)| {
                    let by_group: Vec<usize> = g.action.orbit(p).into_iter().map(|q| g.domain[q]).collect();
                    let mut by_arrows: Vec<usize> =
                        model.arrows_from(x).iter().map(|&a| model.target(a)).filter(|y| g.domain.contains(y)).collect();
                    by_arrows.sort_unstable();
                    by_arrows.dedup();
                    (by_group != by_arrows).then(|| format!("orbit of {} differs", model.object_name(x)))
                });
                r.push(CheckOutcome::from_witness(CheckKey::ModelBisectionOrbits, n.clone(), w));
                groups.push(Some(g));
            }
            Err(e) => {
                r.push(CheckOutcome::fail(CheckKey::ModelTranslation, n.clone(), e.to_string()));
                groups.push(None);
            }
        }
    }
    for a in 0..groups.len() {
        for b in 0..groups.len() {
            let (Some(ga), Some(gb)) = (&groups[a], &groups[b]) else { continue };
            let contained = ga.domain.iter().all(|&x| gb.domain.iter().any(|&y| orbit_of[y] == orbit_of[x]));
            if !contained {
                continue;
            }
            let subject = format!("{} -> {}", cover.names[a], cover.names[b]);
            match local_bisections(model, ga, gb) {
                Ok(lb) => {
                    r.push(CheckOutcome::pass(CheckKey::ModelLocalBisections, subject.clone()));
                    r.push(CheckOutcome::from_witness(CheckKey::ModelTSide, subject, t_side_witness(model, &lb, ga, gb)));
                }
                Err(e) => r.push(CheckOutcome::fail(CheckKey::ModelLocalBisections, subject, e.to_string())),
            }
        }
    }
    r
}

/// Arrows from `big` into `small` are covered exactly once by the inverted
/// bisections, each of which is a section of the target map.
fn t_side_witness(model: &FiniteGroupoidModel, lb: &LocalBisections, small: &BisectionGroup, big: &BisectionGroup) -> Option<String> {
    let mut hit: HashMap<usize, usize> = HashMap::new();
    for s in &lb.sections {
        for (p, &g) in s.iter().enumerate() {
            let inv = model.inverse(g);
            if model.target(inv) != small.domain[p] {
                return Some(format!("{} is not a target section", model.arrow_name(inv)));
            }
            *hit.entry(inv).or_default() += 1;
        }
    }
    for &y in &big.domain {
        for &g in model.arrows_from(y) {
            if small.position(model.target(g)).is_some() && hit.get(&g) != Some(&1) {
                return Some(format!("{} is not covered exactly once", model.arrow_name(g)));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoritaInvariants {
    pub quotient_points: usize,
    /// Isotropy label of each orbit, sorted.
    pub isotropy: Vec<String>,
    pub inertia: usize,
}

pub fn morita_invariants(model: &FiniteGroupoidModel) -> Result<MoritaInvariants, GroupoidError> {
    let (_, orbits) = model.orbits();
    let mut isotropy = Vec::with_capacity(orbits.len());
    for o in &orbits {
        isotropy.push(iso_label(&model.isotropy(o[0])?.0));
    }
    isotropy.sort();
    Ok(MoritaInvariants { quotient_points: orbits.len(), isotropy, inertia: model.inertia().1 })
}

/// Isotropy per object as groups together with orbit-wise conjugacy checks.
pub fn isotropy_report(model: &FiniteGroupoidModel) -> Vec<CheckOutcome> {
    let (_, orbits) = model.orbits();
    let names = model.orbit_names();
    let mut out = Vec::new();
    for (o, members) in orbits.iter().enumerate() {
        let groups: Vec<Result<(FiniteGroup, Vec<usize>), GroupoidError>> = members.iter().map(|&x| model.isotropy(x)).collect();
        match &groups[0] {
            Ok((g, _)) => out.push(CheckOutcome::info(
                CheckKey::GroupoidIsotropy,
                names[o].clone(),
                format!("order {} {}", g.order(), iso_label(g)),
            )),
            Err(e) => {
                out.push(CheckOutcome::fail(CheckKey::GroupoidIsotropy, names[o].clone(), e.to_string()));
                continue;
            }
        }
        let w = isotropy_conjugacy_witness(model, members, &groups);
        out.push(CheckOutcome::from_witness(CheckKey::GroupoidIsotropyConjugacy, names[o].clone(), w));
    }
    out
}

fn isotropy_conjugacy_witness(
    model: &FiniteGroupoidModel,
    members: &[usize],
    groups: &[Result<(FiniteGroup, Vec<usize>), GroupoidError>],
) -> Option<String> {
    let Ok((_, base_loops)) = &groups[0] else { return Some("no isotropy group".into()) };
    let x = members[0];
    for (k, &y) in members.iter().enumerate().skip(1) {
        let Ok((_, loops)) = &groups[k] else { return Some(format!("no isotropy group at {}", model.object_name(y))) };
        for h in model.hom_set(x, y) {
            let img: Option<Vec<usize>> = base_loops
                .iter()
                .map(|&g| model.compose(h, g).and_then(|hg| model.compose(hg, model.inverse(h))))
                .collect();
            let Some(mut img) = img else { return Some("conjugate undefined".into()) };
            img.sort_unstable();
            let mut l = loops.clone();
            l.sort_unstable();
            if img != l {
                return Some(format!(
                    "conjugation by {} does not carry isotropy at {} onto {}",
                    model.arrow_name(h),
                    model.object_name(x),
                    model.object_name(y)
                ));
            }
        }
    }
    None
}

/// `(s, t)` fiber sizes over all object pairs, row-major.
pub fn fiber_sizes(model: &FiniteGroupoidModel) -> Vec<usize> {
    let n = model.objects();
    let mut sizes = vec![0; n * n];
    for g in 0..model.arrows() {
        sizes[model.source(g) * n + model.target(g)] += 1;
    }
    sizes
}

pub fn groupoid_summary(model: &FiniteGroupoidModel) -> Vec<CheckOutcome> {
    let (_, inertia) = model.inertia();
    let mut out = vec![CheckOutcome::info(
        CheckKey::GroupoidSummary,
        "groupoid",
        format!("{} objects, {} arrows, {} orbits", model.objects(), model.arrows(), model.orbits().1.len()),
    )];
    out.extend(isotropy_report(model));
    out.push(CheckOutcome::info(CheckKey::GroupoidInertia, "groupoid", format!("{inertia} components (loops on one sheet are glued: charts are taken as connected)")));
    let n = model.objects();
    let sizes = fiber_sizes(model);
    let max = sizes.iter().copied().max().unwrap_or(0);
    out.push(CheckOutcome::from_witness(
        CheckKey::GroupoidProperness,
        "groupoid",
        (n > 0 && max == 0).then(|| "no arrows".to_string()),
    ));
    if let Some(last) = out.last_mut() {
        if last.status == Status::Pass {
            last.detail = format!("largest (s,t) fiber has {max} arrows");
        }
    }
    out
}

/// Translation groupoid of an action, one sheet per group element when
/// `connected`.
pub fn translation_groupoid(action: &GroupAction, object_names: Vec<String>, connected: bool) -> FiniteGroupoidModel {
    let g = action.group();
    let n = action.set_size();
    let id = |h: usize, x: usize| h * n + x;
    let mut names = Vec::with_capacity(g.order() * n);
    let (mut s, mut t, mut inv) = (Vec::new(), Vec::new(), Vec::new());
    for h in g.elements() {
        for x in 0..n {
            names.push(format!("g{h}@{}", object_names[x]));
            s.push(x);
            t.push(action.apply(h, x));
            inv.push(id(g.inv(h), action.apply(h, x)));
        }
    }
    let mut compose = HashMap::new();
    for h1 in g.elements() {
        for x in 0..n {
            let y = action.apply(h1, x);
            for h2 in g.elements() {
                compose.insert((id(h2, y), id(h1, x)), id(g.mul(h2, h1), x));
            }
        }
    }
    let units = (0..n).map(|x| id(g.identity(), x)).collect();
    let sheets = if connected { g.elements().map(|h| (0..n).map(|x| id(h, x)).collect()).collect() } else { Vec::new() };
    FiniteGroupoidModel::new(object_names, names, s, t, units, inv, compose, sheets).expect("translation groupoid")
}

/// Points on a circle in cyclic order with isotropy `group` acting trivially.
/// Consecutive points are joined by an arc; the sheets over arc `k` (from
/// point `k` to `k+1`) match `g` with `twist[k](g)`.
pub fn circle_groupoid(points: &[String], group: &GroupRef, twists: &BTreeMap<usize, Vec<usize>>) -> FiniteGroupoidModel {
    let n = points.len();
    let o = group.order();
    let id = |x: usize, h: usize| x * o + h;
    let mut names = Vec::with_capacity(n * o);
    let (mut s, mut inv) = (Vec::new(), Vec::new());
    for (x, p) in points.iter().enumerate() {
        for h in group.elements() {
            names.push(format!("g{h}@{p}"));
            s.push(x);
            inv.push(id(x, group.inv(h)));
        }
    }
    let mut compose = HashMap::new();
    for x in 0..n {
        for a in group.elements() {
            for b in group.elements() {
                compose.insert((id(x, a), id(x, b)), id(x, group.mul(a, b)));
            }
        }
    }
    let mut sheets = Vec::new();
    for k in 0..n {
        let next = (k + 1) % n;
        for h in group.elements() {
            let th = twists.get(&k).map_or(h, |t| t[h]);
            sheets.push(vec![id(k, h), id(next, th)]);
        }
    }
    let units = (0..n).map(|x| id(x, group.identity())).collect();
    FiniteGroupoidModel::new(points.to_vec(), names, s.clone(), s, units, inv, compose, sheets).expect("circle groupoid")
}

/// Groupoid with only identity arrows.
pub fn trivial_groupoid(objects: Vec<String>) -> FiniteGroupoidModel {
    let n = objects.len();
    let names = objects.iter().map(|o| format!("1@{o}")).collect();
    let ids: Vec<usize> = (0..n).collect();
    let compose = (0..n).map(|x| ((x, x), x)).collect();
    FiniteGroupoidModel::new(objects, names, ids.clone(), ids.clone(), ids.clone(), ids, compose, Vec::new()).expect("trivial groupoid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::verify_atlas;

    fn pts() -> Vec<String> {
        ["q1", "q3", "q2", "q4"].iter().map(|s| s.to_string()).collect()
    }

    fn z3() -> GroupRef {
        Arc::new(FiniteGroup::cyclic(3))
    }

    fn model(twisted: bool) -> FiniteGroupoidModel {
        let mut tw = BTreeMap::new();
        if twisted {
            // arc q2 -> q4
            tw.insert(2, vec![0, 2, 1]);
        }
        circle_groupoid(&pts(), &z3(), &tw)
    }

    fn cover(m: &FiniteGroupoidModel) -> Cover {
        let ix = |n: &str| m.object_names().iter().position(|o| o == n).unwrap();
        Cover::new(
            vec!["U1".into(), "U2".into(), "U3".into(), "U4".into()],
            vec![
                vec![ix("q1"), ix("q3"), ix("q4")],
                vec![ix("q2"), ix("q3"), ix("q4")],
                vec![ix("q3")],
                vec![ix("q4")],
            ],
        )
    }

    #[test]
    fn circle_models_are_groupoids() {
        for tw in [false, true] {
            assert!(validate_groupoid(&model(tw)).passed());
        }
    }

    #[test]
    fn inertia_separates_the_two_circles() {
        assert_eq!(model(false).inertia().1, 3);
        assert_eq!(model(true).inertia().1, 2);
    }

    #[test]
    fn bisection_group_of_a_point_is_z3() {
        let m = model(false);
        let g = bisection_group(&m, "U3", &[1]).unwrap();
        assert_eq!(g.group.order(), 3);
    }

    #[test]
    fn extracted_atlases_verify() {
        for tw in [false, true] {
            let m = model(tw);
            let c = cover(&m);
            let a = atlas_from_groupoid(&m, &c).unwrap();
            let r = verify_atlas(&a);
            assert!(r.passed(), "{}", r.render_human());
            assert!(check_model_cover(&m, &c).passed());
        }
    }

    #[test]
    fn trivial_groupoid_single_chart() {
        let m = trivial_groupoid(vec!["p".into()]);
        let a = atlas_from_groupoid(&m, &Cover::new(vec!["U".into()], vec![vec![0]])).unwrap();
        assert_eq!(a.group(0).order(), 1);
        assert!(verify_atlas(&a).passed());
    }

    #[test]
    fn mismatched_isotropy_is_not_a_translation_subset() {
        // q0 has Z/3 isotropy, q1 trivial isotropy: one chart over both fails
        let g = z3();
        let mut compose = HashMap::new();
        for a in 0..3 {
            for b in 0..3 {
                compose.insert((a, b), g.mul(a, b));
            }
        }
        compose.insert((3, 3), 3);
        let m = FiniteGroupoidModel::new(
            vec!["q0".into(), "q1".into()],
            vec!["e".into(), "w".into(), "w2".into(), "1".into()],
            vec![0, 0, 0, 1],
            vec![0, 0, 0, 1],
            vec![0, 3],
            vec![0, 2, 1, 3],
            compose,
            vec![],
        )
        .unwrap();
        assert!(validate_groupoid(&m).passed());
        assert!(matches!(bisection_group(&m, "U", &[0, 1]), Err(GroupoidError::NotTranslationSubset { .. })));
    }
}
