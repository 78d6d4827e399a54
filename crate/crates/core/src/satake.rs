//! Finite chart models, the quotient, the chart poset and the modules of
//! concrete embeddings.
//!
//! A chart is a finite set of samples with a group action and a projection
//! to the quotient. Topological facts about embeddings cannot be derived
//! from samples, so they are checked as axioms by [`validate_satake`].

use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

use crate::bimodule::{check_cell, extract_hom, AtlasBimoduleReport, Bimodule};
use crate::exec::{self, Execution};
use crate::group::{homomorphisms, GroupAction, GroupError, GroupHom, GroupRef, ReducedImage};
use crate::report::{CheckKey, CheckOutcome, Report};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SatakeError {
    #[error("chart {chart}: sample {sample} projects to {value}, outside the quotient")]
    QuotientOutOfRange { chart: String, sample: usize, value: usize },
    #[error("chart {chart}: projection has {len} entries for {samples} samples")]
    ProjectionLength { chart: String, len: usize, samples: usize },
    #[error("chart {chart}: {len} sample names for {samples} samples")]
    SampleNames { chart: String, len: usize, samples: usize },
    #[error("charts {first} and {second} have the same support")]
    PosetViolation { first: String, second: String },
    #[error("declared embeddings {source_chart}->{target_chart}: supports are not nested")]
    DeclaredNotInPoset { source_chart: String, target_chart: String },
    #[error("declared embedding {source_chart}->{target_chart} has the wrong shape")]
    EmbeddingShape { source_chart: String, target_chart: String },
    #[error("embeddings {source_chart}->{target_chart} are not closed under the group actions: {detail}")]
    ConNotClosed { source_chart: String, target_chart: String, detail: String },
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// The finite quotient `Q` with one support `Q_i ⊆ Q` per chart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientModel {
    names: Vec<String>,
    supports: Vec<Vec<usize>>,
}

impl QuotientModel {
    pub fn new(names: Vec<String>, supports: Vec<Vec<usize>>) -> Self {
        let supports = supports
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect();
        QuotientModel { names, supports }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, q: usize) -> &str {
        &self.names[q]
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn support(&self, i: usize) -> &[usize] {
        &self.supports[i]
    }

    pub fn contains(&self, i: usize, q: usize) -> bool {
        self.supports[i].binary_search(&q).is_ok()
    }

    pub fn is_subset(&self, i: usize, j: usize) -> bool {
        self.supports[i].iter().all(|&q| self.contains(j, q))
    }

    pub fn intersection(&self, i: usize, j: usize) -> Vec<usize> {
        self.supports[i].iter().copied().filter(|&q| self.contains(j, q)).collect()
    }
}

/// Arrows `μ_ji` (`U_i ⊆ U_j`), stored as `(i, j)` and sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChartPoset {
    charts: usize,
    arrows: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
}

pub fn build_poset(model: &QuotientModel, chart_names: &[String]) -> Result<ChartPoset, SatakeError> {
    let n = model.supports().len();
    for i in 0..n {
        for j in i + 1..n {
            if model.support(i) == model.support(j) {
                return Err(SatakeError::PosetViolation {
                    first: chart_names[i].clone(),
                    second: chart_names[j].clone(),
                });
            }
        }
    }
    let mut arrows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if model.is_subset(i, j) {
                arrows.push((i, j));
            }
        }
    }
    let index = arrows.iter().enumerate().map(|(a, &p)| (p, a)).collect();
    Ok(ChartPoset { charts: n, arrows, index })
}

impl ChartPoset {
    pub fn charts(&self) -> usize {
        self.charts
    }

    pub fn len(&self) -> usize {
        self.arrows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrows.is_empty()
    }

    pub fn arrows(&self) -> &[(usize, usize)] {
        &self.arrows
    }

    pub fn source(&self, a: usize) -> usize {
        self.arrows[a].0
    }

    pub fn target(&self, a: usize) -> usize {
        self.arrows[a].1
    }

    /// The arrow from chart `i` into chart `j`.
    pub fn arrow(&self, i: usize, j: usize) -> Option<usize> {
        self.index.get(&(i, j)).copied()
    }

    pub fn identity(&self, i: usize) -> usize {
        self.index[&(i, i)]
    }

    pub fn is_identity(&self, a: usize) -> bool {
        self.arrows[a].0 == self.arrows[a].1
    }

    pub fn arrows_from(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.arrows.len()).filter(move |&a| self.arrows[a].0 == i)
    }

    pub fn arrows_into(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.arrows.len()).filter(move |&a| self.arrows[a].1 == j)
    }

    /// `(outer, inner, composite)` for every composable pair.
    pub fn composable_pairs(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (inner, &(i, j)) in self.arrows.iter().enumerate() {
            for outer in self.arrows_from(j) {
                let k = self.target(outer);
                out.push((outer, inner, self.index[&(i, k)]));
            }
        }
        out.sort_unstable();
        out
    }

    /// `(c, b, a)` with `a: i -> j`, `b: j -> k`, `c: k -> l`.
    pub fn composable_triples(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (a, &(_, j)) in self.arrows.iter().enumerate() {
            for b in self.arrows_from(j) {
                for c in self.arrows_from(self.target(b)) {
                    out.push((c, b, a));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone)]
pub struct Chart {
    name: String,
    sample_names: Vec<String>,
    action: GroupAction,
    proj: Vec<usize>,
    connected: bool,
    dimension: u32,
    reduced: ReducedImage,
}

impl Chart {
    pub fn new(
        name: impl Into<String>,
        sample_names: Vec<String>,
        action: GroupAction,
        proj: Vec<usize>,
        connected: bool,
        dimension: u32,
    ) -> Result<Self, SatakeError> {
        let name = name.into();
        let n = action.set_size();
        if proj.len() != n {
            return Err(SatakeError::ProjectionLength { chart: name, len: proj.len(), samples: n });
        }
        if sample_names.len() != n {
            return Err(SatakeError::SampleNames { chart: name, len: sample_names.len(), samples: n });
        }
        let reduced = action.reduced_image();
        Ok(Chart { name, sample_names, action, proj, connected, dimension, reduced })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sample_names(&self) -> &[String] {
        &self.sample_names
    }

    pub fn sample_name(&self, x: usize) -> &str {
        &self.sample_names[x]
    }

    pub fn samples(&self) -> usize {
        self.action.set_size()
    }

    pub fn group(&self) -> &GroupRef {
        self.action.group()
    }

    pub fn action(&self) -> &GroupAction {
        &self.action
    }

    pub fn proj(&self) -> &[usize] {
        &self.proj
    }

    pub fn connected(&self) -> bool {
        self.connected
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    pub fn reduced(&self) -> &ReducedImage {
        &self.reduced
    }

    /// `ρ_i: G_i -> G_i^red`
    pub fn rho(&self) -> &GroupHom {
        &self.reduced.quotient
    }

    pub fn support(&self) -> Vec<usize> {
        let mut s = self.proj.clone();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// All injective `π`-compatible maps `P_i -> P_j` that are equivariant along
/// an injective homomorphism of reduced groups. Self-embeddings must be
/// equivariant along an inner automorphism, as conjugation by the embedding
/// itself. Maps come out in lexicographic order.
pub fn derive_con(source: &Chart, target: &Chart, self_embedding: bool) -> Vec<Vec<usize>> {
    let n = source.samples();
    let candidates: Vec<Vec<usize>> = (0..n)
        .map(|x| (0..target.samples()).filter(|&y| target.proj[y] == source.proj[x]).collect())
        .collect();
    let mut maps = Vec::new();
    let mut cur = Vec::with_capacity(n);
    let mut used = vec![false; target.samples()];
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
    rec(&candidates, &mut cur, &mut used, &mut maps);

    let (gi, gj) = (&source.reduced.group, &target.reduced.group);
    let homs: Vec<GroupHom> = homomorphisms(gi, gj)
        .into_iter()
        .filter(|h| h.is_injective())
        .filter(|h| !self_embedding || gj.elements().any(|c| *h == GroupHom::identity(gj).conjugated(c)))
        .collect();
    let (ai, aj) = (&source.reduced.action, &target.reduced.action);
    maps.retain(|m| {
        homs.iter().any(|phi| gi.elements().all(|g| (0..n).all(|x| m[ai.apply(g, x)] == aj.apply(phi.apply(g), m[x]))))
    });
    maps
}

/// Concrete embeddings along one poset arrow, with their bimodule structure
/// over the reduced groups.
#[derive(Debug, Clone)]
pub struct ConModule {
    maps: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
    module: Bimodule,
    declared: bool,
}

impl ConModule {
    pub fn new(source: &Chart, target: &Chart, maps: Vec<Vec<usize>>, declared: bool) -> Result<Self, SatakeError> {
        let index: HashMap<Vec<usize>, usize> = maps.iter().cloned().enumerate().map(|(k, m)| (m, k)).collect();
        let (ai, aj) = (&source.reduced.action, &target.reduced.action);
        let (gi, gj) = (&source.reduced.group, &target.reduced.group);
        let err = |detail: String| SatakeError::ConNotClosed {
            source_chart: source.name.clone(),
            target_chart: target.name.clone(),
            detail,
        };
        let mut left = Vec::with_capacity(gj.order() * maps.len());
        for h in gj.elements() {
            for (k, m) in maps.iter().enumerate() {
                let img: Vec<usize> = m.iter().map(|&y| aj.apply(h, y)).collect();
                left.push(*index.get(&img).ok_or_else(|| err(format!("h{h} applied to embedding {k}")))?);
            }
        }
        let mut right = Vec::with_capacity(gi.order() * maps.len());
        for (k, m) in maps.iter().enumerate() {
            for g in gi.elements() {
                let img: Vec<usize> = (0..m.len()).map(|x| m[ai.apply(g, x)]).collect();
                right.push(*index.get(&img).ok_or_else(|| err(format!("embedding {k} precomposed with g{g}")))?);
            }
        }
        let module = Bimodule::new_unchecked(gj.clone(), gi.clone(), maps.len(), left, right)
            .map_err(|e| err(e.to_string()))?;
        Ok(ConModule { maps, index, module, declared })
    }

    pub fn maps(&self) -> &[Vec<usize>] {
        &self.maps
    }

    pub fn map(&self, k: usize) -> &[usize] {
        &self.maps[k]
    }

    pub fn index_of(&self, m: &[usize]) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn module(&self) -> &Bimodule {
        &self.module
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn declared(&self) -> bool {
        self.declared
    }
}

#[derive(Debug, Clone)]
pub struct SatakeLayer {
    quotient: QuotientModel,
    charts: Vec<Chart>,
    poset: ChartPoset,
    con: Vec<ConModule>,
}

impl SatakeLayer {
    /// Supports are read off the chart projections. `declared` restricts the
    /// concrete embeddings along `(i, j)`; other arrows use [`derive_con`].
    pub fn new(
        quotient_names: Vec<String>,
        charts: Vec<Chart>,
        declared: &BTreeMap<(usize, usize), Vec<Vec<usize>>>,
    ) -> Result<Self, SatakeError> {
        for c in &charts {
            if let Some((x, &q)) = c.proj.iter().enumerate().find(|(_, &q)| q >= quotient_names.len()) {
                return Err(SatakeError::QuotientOutOfRange { chart: c.name.clone(), sample: x, value: q });
            }
        }
        let quotient = QuotientModel::new(quotient_names, charts.iter().map(|c| c.support()).collect());
        let names: Vec<String> = charts.iter().map(|c| c.name.clone()).collect();
        let poset = build_poset(&quotient, &names)?;
        for &(i, j) in declared.keys() {
            if i >= charts.len() || j >= charts.len() || poset.arrow(i, j).is_none() {
                return Err(SatakeError::DeclaredNotInPoset {
                    source_chart: names.get(i).cloned().unwrap_or_default(),
                    target_chart: names.get(j).cloned().unwrap_or_default(),
                });
            }
        }
        let mut con = Vec::with_capacity(poset.len());
        for &(i, j) in poset.arrows() {
            let (src, tgt) = (&charts[i], &charts[j]);
            let m = match declared.get(&(i, j)) {
                Some(maps) => {
                    let bad = maps.iter().any(|m| m.len() != src.samples() || m.iter().any(|&y| y >= tgt.samples()));
                    if bad {
                        return Err(SatakeError::EmbeddingShape {
                            source_chart: src.name.clone(),
                            target_chart: tgt.name.clone(),
                        });
                    }
                    let mut maps = maps.clone();
                    maps.sort();
                    maps.dedup();
                    ConModule::new(src, tgt, maps, true)?
                }
                None => ConModule::new(src, tgt, derive_con(src, tgt, i == j), false)?,
            };
            con.push(m);
        }
        Ok(SatakeLayer { quotient, charts, poset, con })
    }

    pub fn quotient(&self) -> &QuotientModel {
        &self.quotient
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart(&self, i: usize) -> &Chart {
        &self.charts[i]
    }

    pub fn poset(&self) -> &ChartPoset {
        &self.poset
    }

    pub fn con(&self, arrow: usize) -> &ConModule {
        &self.con[arrow]
    }

    pub fn con_module(&self, arrow: usize) -> (Bimodule, AtlasBimoduleReport) {
        let m = self.con[arrow].module.clone();
        let r = m.classify();
        (m, r)
    }

    pub fn arrow_label(&self, a: usize) -> String {
        let (i, j) = self.poset.arrows()[a];
        format!("{}->{}", self.charts[i].name, self.charts[j].name)
    }

    /// `γ(ν, λ) = ν ∘ λ` as an index into the composite arrow's embeddings.
    pub fn gamma(&self, outer: usize, inner: usize, nu: usize, lambda: usize) -> Option<usize> {
        let (i, j) = self.poset.arrows()[inner];
        let (j2, k) = self.poset.arrows()[outer];
        if j != j2 {
            return None;
        }
        let composite = self.poset.arrow(i, k)?;
        let (n, l) = (self.con[outer].map(nu), self.con[inner].map(lambda));
        let m: Vec<usize> = l.iter().map(|&y| n[y]).collect();
        self.con[composite].index_of(&m)
    }

    /// Index of the identity embedding of chart `i`.
    pub fn identity_con(&self, i: usize) -> Option<usize> {
        let id: Vec<usize> = (0..self.charts[i].samples()).collect();
        self.con[self.poset.identity(i)].index_of(&id)
    }

    fn images_meet(&self, a: usize, k: usize, b: usize, l: usize) -> bool {
        let im: Vec<usize> = self.con[a].map(k).to_vec();
        self.con[b].map(l).iter().any(|y| im.contains(y))
    }
}

pub fn validate_chart(chart: &Chart) -> Vec<CheckOutcome> {
    let subject = chart.name.as_str();
    let a = &chart.action;
    let mut out = Vec::new();
    out.push(CheckOutcome::from_witness(
        CheckKey::ChartAction,
        subject,
        a.check_laws().err().map(|e| e.to_string()),
    ));
    let g = chart.group();
    let mut w = None;
    'p: for x in 0..chart.samples() {
        for h in g.elements() {
            if chart.proj[a.apply(h, x)] != chart.proj[x] {
                w = Some(format!("g{h} moves {} to another fiber", chart.sample_name(x)));
                break 'p;
            }
        }
    }
    out.push(CheckOutcome::from_witness(CheckKey::ChartProjectionInvariant, subject, w));
    let red = &chart.reduced.action;
    let mut w = None;
    'f: for x in 0..chart.samples() {
        let orbit = red.orbit(x);
        for y in 0..chart.samples() {
            if chart.proj[x] == chart.proj[y] && orbit.binary_search(&y).is_err() {
                w = Some(format!(
                    "fiber mismatch: {} and {} share a quotient point but lie in different orbits",
                    chart.sample_name(x),
                    chart.sample_name(y)
                ));
                break 'f;
            }
        }
    }
    out.push(CheckOutcome::from_witness(CheckKey::ChartFiberOrbit, subject, w));
    let w = (!red.is_effective()).then(|| "reduced group has a nontrivial pointwise stabilizer".to_string());
    out.push(CheckOutcome::from_witness(CheckKey::ChartEffectiveReduction, subject, w));
    out.push(CheckOutcome::info(
        CheckKey::ChartConnected,
        subject,
        format!("declared {}", if chart.connected { "connected" } else { "not connected" }),
    ));
    out
}

pub fn validate_satake(layer: &SatakeLayer) -> Report {
    validate_satake_with(layer, Execution::default())
}

pub fn validate_satake_with(layer: &SatakeLayer, exec: Execution) -> Report {
    let mut report = Report::new("validate satake layer");
    for c in &layer.charts {
        report.extend(validate_chart(c));
    }
    let q = &layer.quotient;
    let uncovered: Vec<&str> =
        (0..q.len()).filter(|&p| !(0..layer.charts.len()).any(|i| q.contains(i, p))).map(|p| q.name(p)).collect();
    report.push(CheckOutcome::from_witness(
        CheckKey::SatakeCover,
        "quotient",
        (!uncovered.is_empty()).then(|| format!("uncovered points {}", uncovered.join(","))),
    ));
    report.extend(local_compatibility(q, &layer.charts));

    let arrows: Vec<usize> = (0..layer.poset.len()).collect();
    let per_arrow = exec::flat_map(exec, &arrows, |&a| check_con_arrow(layer, a));
    report.extend(per_arrow);
    let pairs = layer.poset.composable_pairs();
    report.extend(exec::map(exec, &pairs, |&(o, i, c)| check_con_composition(layer, o, i, c)));
    report.extend(exec::map(exec, &pairs, |&(o, i, c)| check_factorization(layer, o, i, c)));
    let targets: Vec<usize> = (0..layer.charts.len()).collect();
    report.extend(exec::flat_map(exec, &targets, |&k| check_strong_compat(layer, k)));
    report
}

fn local_compatibility(q: &QuotientModel, charts: &[Chart]) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let n = charts.len();
    for u in 0..n {
        for v in u + 1..n {
            let meet = q.intersection(u, v);
            if meet.is_empty() {
                continue;
            }
            let missing = meet.iter().find(|&&p| {
                !(0..n).any(|w| q.contains(w, p) && q.support(w).iter().all(|r| meet.contains(r)))
            });
            out.push(CheckOutcome::from_witness(
                CheckKey::SatakeLocalCompatibility,
                format!("{},{}", charts[u].name, charts[v].name),
                missing.map(|&p| format!("no chart contains {} inside the overlap", q.name(p))),
            ));
        }
    }
    out
}

fn check_con_arrow(layer: &SatakeLayer, a: usize) -> Vec<CheckOutcome> {
    let label = layer.arrow_label(a);
    let con = &layer.con[a];
    let m = &con.module;
    let mut out = Vec::new();
    let report = m.classify();
    let w = match m.check_laws() {
        Err(e) => Some(e.to_string()),
        Ok(()) => (!report.all()).then(|| report.to_string()),
    };
    out.push(CheckOutcome::from_witness(CheckKey::SatakeConAtlasBimodule, label.clone(), w));

    let (i, j) = layer.poset.arrows()[a];
    let (ci, cj) = (&layer.charts[i], &layer.charts[j]);
    let mut w = None;
    if report.all() {
        'e: for k in 0..con.len() {
            let psi = match extract_hom(m, k) {
                Ok(p) => p,
                Err(e) => {
                    w = Some(e.to_string());
                    break;
                }
            };
            let map = con.map(k);
            for g in ci.reduced.group.elements() {
                for x in 0..ci.samples() {
                    if map[ci.reduced.action.apply(g, x)] != cj.reduced.action.apply(psi.apply(g), map[x]) {
                        w = Some(format!("embedding {k} at {} for g{g}", ci.sample_name(x)));
                        break 'e;
                    }
                }
            }
        }
        out.push(CheckOutcome::from_witness(CheckKey::SatakeConEquivariance, label.clone(), w));
    }

    if i == j {
        let w = match layer.identity_con(i) {
            None => Some("identity embedding missing".to_string()),
            Some(id) => {
                let g = &ci.reduced.group;
                let orbit: Vec<usize> = g.elements().map(|h| m.act_left(h, id)).collect();
                let mut sorted = orbit.clone();
                sorted.sort_unstable();
                sorted.dedup();
                let bad_right = g.elements().find(|&h| m.act_right(id, h) != m.act_left(h, id));
                if sorted.len() != g.order() || sorted.len() != con.len() {
                    Some("self-embeddings are not the reduced group".to_string())
                } else {
                    bad_right.map(|h| format!("identity.g{h} != g{h}.identity"))
                }
            }
        };
        out.push(CheckOutcome::from_witness(CheckKey::SatakeConUnit, label.clone(), w));
    }

    // overlapping images differ by a source group element
    let mut w = None;
    'o: for k in 0..con.len() {
        for l in 0..con.len() {
            if layer.images_meet(a, k, a, l) && !ci.reduced.group.elements().any(|g| m.act_right(l, g) == k) {
                w = Some(format!("embeddings {k} and {l} overlap but differ by no group element"));
                break 'o;
            }
        }
    }
    out.push(CheckOutcome::from_witness(CheckKey::SatakeOverlap, label, w));
    out
}

fn check_con_composition(layer: &SatakeLayer, outer: usize, inner: usize, composite: usize) -> CheckOutcome {
    let label = format!("{} after {}", layer.arrow_label(outer), layer.arrow_label(inner));
    let r = check_cell(layer.con[outer].module(), layer.con[inner].module(), layer.con[composite].module(), &|n, l| {
        layer.gamma(outer, inner, n, l)
    });
    let w = r.balanced_witness().or_else(|| r.equivariance_witness()).or(r.not_iso);
    CheckOutcome::from_witness(CheckKey::SatakeComposition, label, w)
}

/// Overlapping `λ_ki`, `λ_kj` factor as `λ_kj ∘ λ_ji = λ_ki`.
fn check_factorization(layer: &SatakeLayer, outer: usize, inner: usize, composite: usize) -> CheckOutcome {
    let label = format!("{} via {}", layer.arrow_label(composite), layer.arrow_label(inner));
    let mut w = None;
    'f: for lk in 0..layer.con[composite].len() {
        for nk in 0..layer.con[outer].len() {
            if !layer.images_meet(composite, lk, outer, nk) {
                continue;
            }
            let found = (0..layer.con[inner].len()).any(|lj| layer.gamma(outer, inner, nk, lj) == Some(lk));
            if !found {
                w = Some(format!("embedding {lk} does not factor through embedding {nk}"));
                break 'f;
            }
        }
    }
    CheckOutcome::from_witness(CheckKey::SatakeFactorization, label, w)
}

/// Concrete strong compatibility for all cospans into chart `k`.
fn check_strong_compat(layer: &SatakeLayer, k: usize) -> Vec<CheckOutcome> {
    let p = &layer.poset;
    let into: Vec<usize> = p.arrows_into(k).collect();
    let mut out = Vec::new();
    for &a1 in &into {
        for &a2 in &into {
            if a2 < a1 {
                continue;
            }
            let (c1, c2) = (p.source(a1), p.source(a2));
            let mut w = None;
            'c: for l1 in 0..layer.con[a1].len() {
                for l2 in 0..layer.con[a2].len() {
                    let (m1, m2) = (layer.con[a1].map(l1), layer.con[a2].map(l2));
                    for x1 in 0..m1.len() {
                        for x2 in 0..m2.len() {
                            if m1[x1] != m2[x2] {
                                continue;
                            }
                            if !concrete_witness_exists(layer, (a1, l1, x1), (a2, l2, x2)) {
                                w = Some(format!(
                                    "{} in {} and {} in {} meet without a reconciling chart",
                                    layer.charts[c1].sample_name(x1),
                                    layer.charts[c1].name,
                                    layer.charts[c2].sample_name(x2),
                                    layer.charts[c2].name
                                ));
                                break 'c;
                            }
                        }
                    }
                }
            }
            out.push(CheckOutcome::from_witness(
                CheckKey::SatakeStrongCompatibility,
                format!("{} and {}", layer.arrow_label(a1), layer.arrow_label(a2)),
                w,
            ));
        }
    }
    out
}

fn concrete_witness_exists(layer: &SatakeLayer, first: (usize, usize, usize), second: (usize, usize, usize)) -> bool {
    let p = &layer.poset;
    let (a1, l1, x1) = first;
    let (a2, l2, x2) = second;
    let (c1, c2) = (p.source(a1), p.source(a2));
    for c4 in 0..layer.charts.len() {
        let (Some(b1), Some(b2)) = (p.arrow(c4, c1), p.arrow(c4, c2)) else { continue };
        for k1 in 0..layer.con[b1].len() {
            for k2 in 0..layer.con[b2].len() {
                let (m1, m2) = (layer.con[b1].map(k1), layer.con[b2].map(k2));
                let same = (0..m1.len()).all(|y| layer.con[a1].map(l1)[m1[y]] == layer.con[a2].map(l2)[m2[y]]);
                if same && (0..m1.len()).any(|y| m1[y] == x1 && m2[y] == x2) {
                    return true;
                }
            }
        }
    }
    false
}

/// Convenience for tests and generators: a chart whose samples are the
/// given quotient points with a trivial action of `group`.
pub fn trivial_chart(name: &str, group: GroupRef, points: &[usize], quotient_names: &[String]) -> Chart {
    let action = GroupAction::trivial(group, points.len());
    let names = points.iter().map(|&q| quotient_names[q].clone()).collect();
    Chart::new(name, names, action, points.to_vec(), true, 1).expect("trivial chart")
}

/// Regular action of `group` on its own elements over a single quotient point.
pub fn regular_chart(name: &str, group: GroupRef, point: usize) -> Chart {
    let n = group.order();
    let action = GroupAction::regular(group);
    let names = (0..n).map(|x| format!("x{x}")).collect();
    Chart::new(name, names, action, vec![point; n], true, 1).expect("regular chart")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::FiniteGroup;
    use std::sync::Arc;

    fn arc(g: FiniteGroup) -> GroupRef {
        Arc::new(g)
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn circle_layer(drop_third: bool) -> SatakeLayer {
        let q = names(&["q1", "q2", "q3", "q4"]);
        let z3 = arc(FiniteGroup::cyclic(3));
        let mut charts = vec![
            trivial_chart("U1", z3.clone(), &[0, 2, 3], &q),
            trivial_chart("U2", z3.clone(), &[1, 2, 3], &q),
        ];
        if !drop_third {
            charts.push(trivial_chart("U3", z3.clone(), &[2], &q));
        }
        charts.push(trivial_chart("U4", z3, &[3], &q));
        SatakeLayer::new(q, charts, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn circle_poset_has_eight_arrows() {
        let l = circle_layer(false);
        assert_eq!(l.poset().len(), 8);
        for a in 0..8 {
            assert_eq!(l.con(a).len(), 1);
        }
        assert!(validate_satake(&l).passed());
    }

    #[test]
    fn nested_supports_give_six_arrows() {
        let q = names(&["a", "b", "c"]);
        let g = arc(FiniteGroup::trivial());
        let charts = vec![
            trivial_chart("V1", g.clone(), &[0], &q),
            trivial_chart("V2", g.clone(), &[0, 1], &q),
            trivial_chart("V3", g, &[0, 1, 2], &q),
        ];
        let l = SatakeLayer::new(q, charts, &BTreeMap::new()).unwrap();
        assert_eq!(l.poset().len(), 6);
    }

    #[test]
    fn duplicate_supports_rejected() {
        let q = names(&["a"]);
        let g = arc(FiniteGroup::trivial());
        let charts = vec![trivial_chart("A", g.clone(), &[0], &q), trivial_chart("B", g, &[0], &q)];
        assert!(matches!(SatakeLayer::new(q, charts, &BTreeMap::new()), Err(SatakeError::PosetViolation { .. })));
    }

    #[test]
    fn missing_overlap_chart_breaks_local_compatibility() {
        let l = circle_layer(true);
        let r = validate_satake(&l);
        let bad: Vec<_> = r.find(CheckKey::SatakeLocalCompatibility).filter(|o| o.status == crate::report::Status::Fail).collect();
        assert_eq!(bad.len(), 1);
        assert!(bad[0].detail.contains("q3"));
    }

    #[test]
    fn regular_chart_self_embeddings_are_rotations() {
        let q = names(&["p"]);
        let c = regular_chart("R", arc(FiniteGroup::cyclic(3)), 0);
        let l = SatakeLayer::new(q, vec![c], &BTreeMap::new()).unwrap();
        assert_eq!(l.con(0).len(), 3);
        assert!(l.con_module(0).1.all());
        assert!(validate_satake(&l).passed());
    }

    #[test]
    fn collapsed_orbits_are_reported() {
        let g = arc(FiniteGroup::trivial());
        let c = Chart::new("C", names(&["x", "y"]), GroupAction::trivial(g, 2), vec![0, 0], true, 1).unwrap();
        let out = validate_chart(&c);
        assert!(out.iter().any(|o| o.key == CheckKey::ChartFiberOrbit && o.status == crate::report::Status::Fail));
    }
}
