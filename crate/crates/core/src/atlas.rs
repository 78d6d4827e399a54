//! Abstract atlases: one bimodule of abstract embeddings per poset arrow,
//! composition and unit cells, and the maps onto concrete embeddings.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bimodule::{check_bimodule_map, check_cell, hom_to_bimodule, induced_hom, tensor, Bimodule, BimoduleError};
use crate::exec::{self, Execution};
use crate::group::{Elem, GroupHom, GroupRef};
use crate::report::{CheckKey, CheckOutcome, Report};
use crate::satake::{validate_satake_with, SatakeLayer};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AtlasError {
    #[error("no abstract embedding module for {0}")]
    MissingModule(String),
    #[error("module for {arrow} is over the wrong groups")]
    GroupMismatch { arrow: String },
    #[error("no concrete-image table for {0} and its concrete module has more than one element")]
    MissingTilde(String),
    #[error("concrete-image table for {arrow}: {detail}")]
    TildeShape { arrow: String, detail: String },
    #[error("no composition table for {outer} after {inner}")]
    MissingAlpha { outer: String, inner: String },
    #[error("composition table for {outer} after {inner}: {detail}")]
    AlphaShape { outer: String, inner: String, detail: String },
    #[error("unit table for chart {chart}: {detail}")]
    UnitShape { chart: String, detail: String },
    #[error("the group element g{element} of chart {chart} does not act as a concrete self-embedding")]
    IdentityNotConcrete { chart: String, element: Elem },
    #[error("arrow index {0} out of range")]
    NoSuchArrow(usize),
    #[error("{arrow}: element {element} out of range")]
    NoSuchElement { arrow: String, element: usize },
    #[error("{outer} and {inner} are not composable")]
    NotComposable { outer: String, inner: String },
    #[error("induced homomorphism at {element} in {arrow} does not restrict to an iso of kernels: {detail}")]
    KernelIsoFailure { arrow: String, element: usize, detail: String },
    #[error("concrete images do not overlap")]
    NoOverlap,
    #[error("no interpolating element exists")]
    NoSolution,
    #[error("interpolating elements {first} and {second} both solve")]
    NonUnique { first: usize, second: usize },
    #[error("the given points have different concrete images")]
    PointsDiffer,
    #[error("no reconciling chart for {0}")]
    NoWitness(String),
    #[error("chart {0} is not effective")]
    NotEffective(String),
    #[error(transparent)]
    Bimodule(#[from] BimoduleError),
}

/// User-supplied pieces of an atlas; the rest is implied by [`Atlas::build`].
#[derive(Debug, Clone, Default)]
pub struct AtlasParts {
    /// Abstract embedding module per poset arrow. Identity arrows default
    /// to the regular bimodule of the chart group.
    pub abst: BTreeMap<usize, Bimodule>,
    /// Unit cells `G_i -> Abst(id_i)`, default the identity.
    pub unit: BTreeMap<usize, Vec<usize>>,
    /// Composition tables keyed `(outer, inner)`, row-major in the outer
    /// element. Cells involving an identity arrow default to the actions.
    pub alpha: BTreeMap<(usize, usize), Vec<usize>>,
    /// Abstract element to concrete embedding index. May be omitted when the
    /// concrete module has one element; identity arrows default to the group
    /// acting on the chart.
    pub tilde: BTreeMap<usize, Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct Atlas {
    layer: SatakeLayer,
    abst: Vec<Bimodule>,
    unit: Vec<Vec<usize>>,
    alpha: BTreeMap<(usize, usize), Vec<usize>>,
    tilde: Vec<Vec<usize>>,
}

/// Witness for two abstract embeddings meeting at a point: a chart, a point
/// in it and two embeddings of that chart with equal composites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrongWitness {
    pub chart: usize,
    pub point: usize,
    pub first: usize,
    pub second: usize,
}

impl Atlas {
    pub fn build(layer: SatakeLayer, mut parts: AtlasParts) -> Result<Self, AtlasError> {
        let poset = layer.poset().clone();
        let mut abst = Vec::with_capacity(poset.len());
        for (a, &(i, j)) in poset.arrows().iter().enumerate() {
            let label = layer.arrow_label(a);
            let m = match parts.abst.remove(&a) {
                Some(m) => m,
                None if i == j => Bimodule::regular(layer.chart(i).group()),
                None => return Err(AtlasError::MissingModule(label)),
            };
            if **m.left() != **layer.chart(j).group() || **m.right() != **layer.chart(i).group() {
                return Err(AtlasError::GroupMismatch { arrow: label });
            }
            abst.push(m);
        }

        let mut unit = Vec::with_capacity(poset.charts());
        for i in 0..poset.charts() {
            let g = layer.chart(i).group();
            let size = abst[poset.identity(i)].size();
            let u = parts.unit.remove(&i).unwrap_or_else(|| g.elements().collect());
            if u.len() != g.order() || u.iter().any(|&v| v >= size) {
                return Err(AtlasError::UnitShape {
                    chart: layer.chart(i).name().to_string(),
                    detail: format!("expected {} entries below {size}", g.order()),
                });
            }
            unit.push(u);
        }

        let mut alpha = BTreeMap::new();
        for (outer, inner, composite) in poset.composable_pairs() {
            let (no, ni, nc) = (abst[outer].size(), abst[inner].size(), abst[composite].size());
            let names = || (layer.arrow_label(outer), layer.arrow_label(inner));
            let table = match parts.alpha.remove(&(outer, inner)) {
                Some(t) => t,
                None if poset.is_identity(outer) => {
                    // unit(h) ∘ λ = h·λ
                    let j = poset.source(outer);
                    let unit_inv = invert(&unit[j], no);
                    let mut t = Vec::with_capacity(no * ni);
                    for n in 0..no {
                        for l in 0..ni {
                            t.push(unit_inv[n].map_or(usize::MAX, |h| abst[inner].act_left(h, l)));
                        }
                    }
                    t
                }
                None if poset.is_identity(inner) => {
                    let i = poset.source(inner);
                    let unit_inv = invert(&unit[i], ni);
                    let mut t = Vec::with_capacity(no * ni);
                    for n in 0..no {
                        for l in 0..ni {
                            t.push(unit_inv[l].map_or(usize::MAX, |g| abst[outer].act_right(n, g)));
                        }
                    }
                    t
                }
                None => {
                    let (o, i) = names();
                    return Err(AtlasError::MissingAlpha { outer: o, inner: i });
                }
            };
            if table.len() != no * ni || table.iter().any(|&v| v >= nc) {
                let (o, i) = names();
                return Err(AtlasError::AlphaShape {
                    outer: o,
                    inner: i,
                    detail: format!("expected {} entries below {nc}", no * ni),
                });
            }
            alpha.insert((outer, inner), table);
        }
        if let Some(&(o, i)) = parts.alpha.keys().next() {
            return Err(AtlasError::NotComposable {
                outer: poset.arrows().get(o).map_or(o.to_string(), |_| layer.arrow_label(o)),
                inner: poset.arrows().get(i).map_or(i.to_string(), |_| layer.arrow_label(i)),
            });
        }

        let mut tilde = Vec::with_capacity(poset.len());
        for (a, &(i, j)) in poset.arrows().iter().enumerate() {
            let label = layer.arrow_label(a);
            let con = layer.con(a);
            let t = match parts.tilde.remove(&a) {
                Some(t) => t,
                None if con.len() == 1 => vec![0; abst[a].size()],
                None if i == j => {
                    let chart = layer.chart(i);
                    let unit_inv = invert(&unit[i], abst[a].size());
                    let mut t = Vec::with_capacity(abst[a].size());
                    for u in unit_inv {
                        let g = u.ok_or_else(|| AtlasError::UnitShape {
                            chart: chart.name().to_string(),
                            detail: "unit cell is not onto".into(),
                        })?;
                        let map = chart.action().permutation(g);
                        let k = con
                            .index_of(map)
                            .ok_or(AtlasError::IdentityNotConcrete { chart: chart.name().to_string(), element: g })?;
                        t.push(k);
                    }
                    t
                }
                None => return Err(AtlasError::MissingTilde(label)),
            };
            if t.len() != abst[a].size() || t.iter().any(|&k| k >= con.len()) {
                return Err(AtlasError::TildeShape {
                    arrow: label,
                    detail: format!("expected {} entries below {}", abst[a].size(), con.len()),
                });
            }
            tilde.push(t);
        }
        Ok(Atlas { layer, abst, unit, alpha, tilde })
    }

    /// The atlas of an effective layer: abstract embeddings are the concrete ones.
    pub fn canonical_effective(layer: SatakeLayer) -> Result<Self, AtlasError> {
        for c in layer.charts() {
            if !c.rho().is_bijective() {
                return Err(AtlasError::NotEffective(c.name().to_string()));
            }
        }
        let mut parts = AtlasParts::default();
        for a in 0..layer.poset().len() {
            let m = layer.con(a).module();
            let (i, j) = layer.poset().arrows()[a];
            let m = Bimodule::new_unchecked(
                layer.chart(j).group().clone(),
                layer.chart(i).group().clone(),
                m.size(),
                m.left_table().to_vec(),
                m.right_table().to_vec(),
            )?;
            parts.tilde.insert(a, (0..m.size()).collect());
            parts.abst.insert(a, m);
        }
        for i in 0..layer.charts().len() {
            let id = layer.poset().identity(i);
            let base = layer.identity_con(i).ok_or_else(|| AtlasError::NotEffective(layer.chart(i).name().to_string()))?;
            let m = &parts.abst[&id];
            parts.unit.insert(i, layer.chart(i).group().elements().map(|g| m.act_left(g, base)).collect());
        }
        for (outer, inner, _) in layer.poset().composable_pairs() {
            let (no, ni) = (layer.con(outer).len(), layer.con(inner).len());
            let mut t = Vec::with_capacity(no * ni);
            for n in 0..no {
                for l in 0..ni {
                    t.push(layer.gamma(outer, inner, n, l).unwrap_or(usize::MAX));
                }
            }
            parts.alpha.insert((outer, inner), t);
        }
        Atlas::build(layer, parts)
    }

    pub fn layer(&self) -> &SatakeLayer {
        &self.layer
    }

    pub fn abst(&self, arrow: usize) -> &Bimodule {
        &self.abst[arrow]
    }

    pub fn arrow_count(&self) -> usize {
        self.abst.len()
    }

    pub fn group(&self, chart: usize) -> &GroupRef {
        self.layer.chart(chart).group()
    }

    pub fn unit(&self, chart: usize, g: Elem) -> usize {
        self.unit[chart][g]
    }

    pub fn unit_table(&self, chart: usize) -> &[usize] {
        &self.unit[chart]
    }

    pub fn alpha_table(&self, outer: usize, inner: usize) -> Option<&[usize]> {
        self.alpha.get(&(outer, inner)).map(|t| t.as_slice())
    }

    pub fn alpha_tables(&self) -> &BTreeMap<(usize, usize), Vec<usize>> {
        &self.alpha
    }

    /// `α(ν ⊗ λ)` for `ν ∈ Abst(outer)`, `λ ∈ Abst(inner)`.
    pub fn alpha(&self, outer: usize, inner: usize, nu: usize, lambda: usize) -> usize {
        self.alpha[&(outer, inner)][nu * self.abst[inner].size() + lambda]
    }

    pub fn tilde_index(&self, arrow: usize, lambda: usize) -> usize {
        self.tilde[arrow][lambda]
    }

    pub fn tilde_table(&self, arrow: usize) -> &[usize] {
        &self.tilde[arrow]
    }

    /// The concrete embedding `λ̃` as a map of samples.
    pub fn tilde(&self, arrow: usize, lambda: usize) -> &[usize] {
        self.layer.con(arrow).map(self.tilde[arrow][lambda])
    }

    pub fn checked_tilde(&self, arrow: usize, lambda: usize) -> Result<&[usize], AtlasError> {
        self.element_in(arrow, lambda)?;
        Ok(self.tilde(arrow, lambda))
    }

    fn element_in(&self, arrow: usize, lambda: usize) -> Result<(), AtlasError> {
        if arrow >= self.abst.len() {
            return Err(AtlasError::NoSuchArrow(arrow));
        }
        if lambda >= self.abst[arrow].size() {
            return Err(AtlasError::NoSuchElement { arrow: self.layer.arrow_label(arrow), element: lambda });
        }
        Ok(())
    }

    /// `ℓ_λ: G_i -> G_j`, checked to restrict to an iso of the action kernels.
    pub fn ell(&self, arrow: usize, lambda: usize) -> Result<GroupHom, AtlasError> {
        self.element_in(arrow, lambda)?;
        let fail = |detail: String| AtlasError::KernelIsoFailure {
            arrow: self.layer.arrow_label(arrow),
            element: lambda,
            detail,
        };
        let hom = induced_hom(&self.abst[arrow], lambda).map_err(|e| fail(e.to_string()))?;
        let (i, j) = self.layer.poset().arrows()[arrow];
        let ki = self.layer.chart(i).rho().kernel();
        let kj = self.layer.chart(j).rho().kernel();
        if let Some(&g) = ki.elements().iter().find(|&&g| !kj.contains(hom.apply(g))) {
            return Err(fail(format!("g{g} leaves the kernel")));
        }
        if ki.order() != kj.order() {
            return Err(fail(format!("kernels have orders {} and {}", ki.order(), kj.order())));
        }
        Ok(hom)
    }

    /// The unique `κ` with `α(ν ⊗ κ) = λ`, for `ν ∈ Abst(j -> k)` and
    /// `λ ∈ Abst(i -> k)` whose concrete images overlap.
    pub fn interpolate(&self, outer: usize, nu: usize, composite: usize, lambda: usize) -> Result<usize, AtlasError> {
        self.element_in(outer, nu)?;
        self.element_in(composite, lambda)?;
        let p = self.layer.poset();
        let (i, k) = p.arrows()[composite];
        let (j, k2) = p.arrows()[outer];
        let inner = match p.arrow(i, j) {
            Some(a) if k == k2 => a,
            _ => {
                return Err(AtlasError::NotComposable {
                    outer: self.layer.arrow_label(outer),
                    inner: self.layer.arrow_label(composite),
                })
            }
        };
        let (ln, ll) = (self.tilde(outer, nu), self.tilde(composite, lambda));
        if !ll.iter().any(|y| ln.contains(y)) {
            return Err(AtlasError::NoOverlap);
        }
        let mut found = None;
        for kappa in 0..self.abst[inner].size() {
            if self.alpha(outer, inner, nu, kappa) == lambda {
                if let Some(first) = found {
                    return Err(AtlasError::NonUnique { first, second: kappa });
                }
                found = Some(kappa);
            }
        }
        found.ok_or(AtlasError::NoSolution)
    }

    /// First witness in (chart, point, first, second) order for `λ1 ∈
    /// Abst(a1)` at `x1` and `λ2 ∈ Abst(a2)` at `x2`, both arrows into one chart.
    pub fn strong_compat_witness(
        &self,
        first: (usize, usize, usize),
        second: (usize, usize, usize),
    ) -> Result<StrongWitness, AtlasError> {
        let (a1, l1, x1) = first;
        let (a2, l2, x2) = second;
        self.element_in(a1, l1)?;
        self.element_in(a2, l2)?;
        let p = self.layer.poset();
        if p.target(a1) != p.target(a2) {
            return Err(AtlasError::NotComposable {
                outer: self.layer.arrow_label(a1),
                inner: self.layer.arrow_label(a2),
            });
        }
        if self.tilde(a1, l1).get(x1).is_none()
            || self.tilde(a2, l2).get(x2).is_none()
            || self.tilde(a1, l1)[x1] != self.tilde(a2, l2)[x2]
        {
            return Err(AtlasError::PointsDiffer);
        }
        self.search_strong_witness(first, second).ok_or_else(|| {
            AtlasError::NoWitness(format!(
                "{} element {l1} at sample {x1} and {} element {l2} at sample {x2}",
                self.layer.arrow_label(a1),
                self.layer.arrow_label(a2)
            ))
        })
    }

    pub(crate) fn search_strong_witness(
        &self,
        first: (usize, usize, usize),
        second: (usize, usize, usize),
    ) -> Option<StrongWitness> {
        self.strong_witnesses(first, second).next()
    }

    /// All witnesses in search order.
    pub fn strong_witnesses(
        &self,
        first: (usize, usize, usize),
        second: (usize, usize, usize),
    ) -> impl Iterator<Item = StrongWitness> + '_ {
        let (a1, l1, x1) = first;
        let (a2, l2, x2) = second;
        let p = self.layer.poset();
        let (c1, c2) = (p.source(a1), p.source(a2));
        (0..p.charts()).flat_map(move |c4| {
            let arrows = p.arrow(c4, c1).zip(p.arrow(c4, c2));
            arrows.into_iter().flat_map(move |(b1, b2)| {
                let (n1, n2) = (self.abst[b1].size(), self.abst[b2].size());
                (0..self.layer.chart(c4).samples()).flat_map(move |y| {
                    (0..n1).flat_map(move |k1| {
                        (0..n2).filter_map(move |k2| {
                            let ok = self.tilde(b1, k1)[y] == x1
                                && self.tilde(b2, k2)[y] == x2
                                && self.alpha(a1, b1, l1, k1) == self.alpha(a2, b2, l2, k2);
                            ok.then_some(StrongWitness { chart: c4, point: y, first: k1, second: k2 })
                        })
                    })
                })
            })
        })
    }

    pub fn set_alpha_entry(&mut self, outer: usize, inner: usize, nu: usize, lambda: usize, value: usize) {
        let ni = self.abst[inner].size();
        self.alpha.get_mut(&(outer, inner)).expect("composable pair")[nu * ni + lambda] = value;
    }

    pub fn set_abst(&mut self, arrow: usize, module: Bimodule) {
        self.abst[arrow] = module;
    }

    pub fn abst_mut(&mut self, arrow: usize) -> &mut Bimodule {
        &mut self.abst[arrow]
    }

    pub fn set_tilde_entry(&mut self, arrow: usize, lambda: usize, value: usize) {
        self.tilde[arrow][lambda] = value;
    }

    /// The parts that reproduce this atlas through [`Atlas::build`].
    pub fn to_parts(&self) -> AtlasParts {
        AtlasParts {
            abst: self.abst.iter().cloned().enumerate().collect(),
            unit: self.unit.iter().cloned().enumerate().collect(),
            alpha: self.alpha.clone(),
            tilde: self.tilde.iter().cloned().enumerate().collect(),
        }
    }
}

fn invert(map: &[usize], size: usize) -> Vec<Option<usize>> {
    let mut inv = vec![None; size];
    for (x, &y) in map.iter().enumerate() {
        if y < size {
            inv[y] = Some(x);
        }
    }
    inv
}

pub fn verify_atlas(atlas: &Atlas) -> Report {
    verify_atlas_with(atlas, Execution::default())
}

/// Layer checks followed by every atlas condition, ordered by arrow.
pub fn verify_atlas_with(atlas: &Atlas, exec: Execution) -> Report {
    let mut report = validate_satake_with(&atlas.layer, exec);
    report.command = "validate atlas".into();
    let p = atlas.layer.poset();
    let arrows: Vec<usize> = (0..p.len()).collect();
    report.extend(exec::flat_map(exec, &arrows, |&a| check_arrow(atlas, a)));
    let charts: Vec<usize> = (0..p.charts()).collect();
    report.extend(exec::flat_map(exec, &charts, |&i| check_unit_iso(atlas, i)));
    let pairs = p.composable_pairs();
    report.extend(exec::flat_map(exec, &pairs, |&(o, i, c)| check_pair(atlas, o, i, c)));
    let triples = p.composable_triples();
    report.extend(exec::map(exec, &triples, |&(c, b, a)| check_associativity(atlas, c, b, a)));
    report
}

fn check_arrow(atlas: &Atlas, a: usize) -> Vec<CheckOutcome> {
    let label = atlas.layer.arrow_label(a);
    let m = &atlas.abst[a];
    let con = atlas.layer.con(a);
    let (i, j) = atlas.layer.poset().arrows()[a];
    let (ci, cj) = (atlas.layer.chart(i), atlas.layer.chart(j));
    let mut out = Vec::new();
    let laws = m.check_laws();
    out.push(CheckOutcome::from_witness(CheckKey::AtlasModuleLaws, label.clone(), laws.as_ref().err().map(|e| e.to_string())));
    let cls = m.classify();
    out.push(CheckOutcome::from_witness(CheckKey::AtlasBimodule, label.clone(), (!cls.all()).then(|| cls.to_string())));

    let t = &atlas.tilde[a];
    let missing = (0..con.len()).find(|k| !t.contains(k));
    out.push(CheckOutcome::from_witness(
        CheckKey::AtlasRhoSurjective,
        label.clone(),
        missing.map(|k| format!("concrete embedding {k} has no abstract preimage")),
    ));

    let cm = con.module();
    let mut w = None;
    'e: for l in 0..m.size() {
        for g in ci.group().elements() {
            if t[m.act_right(l, g)] != cm.act_right(t[l], ci.rho().apply(g)) {
                w = Some(format!("element {l} times g{g}"));
                break 'e;
            }
        }
        for h in cj.group().elements() {
            if t[m.act_left(h, l)] != cm.act_left(cj.rho().apply(h), t[l]) {
                w = Some(format!("h{h} times element {l}"));
                break 'e;
            }
        }
    }
    out.push(CheckOutcome::from_witness(CheckKey::AtlasRhoEquivariant, label.clone(), w));
    out.push(CheckOutcome::from_witness(CheckKey::AtlasRhoTwoCell, label.clone(), two_cell_witness(atlas, a)));

    let mut w = None;
    'k: for l in 0..m.size() {
        for l2 in l + 1..m.size() {
            if t[l] == t[l2] && !ci.group().elements().any(|g| m.act_right(l, g) == l2) {
                w = Some(format!("elements {l} and {l2} share a concrete image but differ by no g"));
                break 'k;
            }
        }
    }
    out.push(CheckOutcome::from_witness(CheckKey::AtlasKernelTransitivity, label.clone(), w));

    if laws.is_ok() && cls.all() {
        let w = (0..m.size()).find_map(|l| atlas.ell(a, l).err()).map(|e| e.to_string());
        out.push(CheckOutcome::from_witness(CheckKey::AtlasKernelIso, label, w));
    } else {
        out.push(CheckOutcome {
            key: CheckKey::AtlasKernelIso,
            subject: label,
            status: crate::report::Status::Skipped,
            detail: "module is not an atlas bimodule".into(),
        });
    }
    out
}

/// `e ⊗ λ ↦ ρ̃(λ) ⊗ e` from `G_j^red ⊗ Abst` to `Con ⊗ G_i^red`.
fn two_cell_witness(atlas: &Atlas, a: usize) -> Option<String> {
    let (i, j) = atlas.layer.poset().arrows()[a];
    let (ci, cj) = (atlas.layer.chart(i), atlas.layer.chart(j));
    let m = &atlas.abst[a];
    let con = atlas.layer.con(a).module();
    let source = match tensor(&hom_to_bimodule(cj.rho()), m) {
        Ok(s) => s,
        Err(e) => return Some(e.to_string()),
    };
    let target = match tensor(con, &hom_to_bimodule(ci.rho())) {
        Ok(t) => t,
        Err(e) => return Some(e.to_string()),
    };
    let e = ci.reduced().group.identity();
    let mut map = vec![usize::MAX; source.len()];
    for h in cj.reduced().group.elements() {
        for l in 0..m.size() {
            let c = source.class(h, l);
            let v = target.class(con.act_left(h, atlas.tilde[a][l]), e);
            if map[c] == usize::MAX {
                map[c] = v;
            } else if map[c] != v {
                return Some(format!("class of (h{h}, {l}) has two images"));
            }
        }
    }
    match check_bimodule_map(&map, &source.module, &target.module) {
        Err(e) => Some(e.to_string()),
        Ok(r) if !r.equivariant() => Some(format!("not equivariant: {r:?}")),
        Ok(_) => None,
    }
}

fn check_unit_iso(atlas: &Atlas, i: usize) -> Vec<CheckOutcome> {
    let chart = atlas.layer.chart(i);
    let id = atlas.layer.poset().identity(i);
    let regular = Bimodule::regular(chart.group());
    let w = match check_bimodule_map(&atlas.unit[i], &regular, &atlas.abst[id]) {
        Err(e) => Some(e.to_string()),
        Ok(r) if !r.equivariant() => Some(format!("unit cell not equivariant: {r:?}")),
        Ok(r) if !r.bijective => Some("unit cell is not a bijection".into()),
        Ok(_) => None,
    };
    let t = atlas.tilde[id][atlas.unit[i][chart.group().identity()]];
    let rho_unit = (Some(t) != atlas.layer.identity_con(i)).then(|| "unit maps to a non-identity embedding".to_string());
    vec![
        CheckOutcome::from_witness(CheckKey::AtlasUnitIso, chart.name(), w),
        CheckOutcome::from_witness(CheckKey::AtlasRhoUnit, chart.name(), rho_unit),
    ]
}

fn check_pair(atlas: &Atlas, outer: usize, inner: usize, composite: usize) -> Vec<CheckOutcome> {
    let layer = &atlas.layer;
    let p = layer.poset();
    let label = format!("{} after {}", layer.arrow_label(outer), layer.arrow_label(inner));
    let table = &atlas.alpha[&(outer, inner)];
    let ni = atlas.abst[inner].size();
    let r = check_cell(&atlas.abst[outer], &atlas.abst[inner], &atlas.abst[composite], &|n, l| table.get(n * ni + l).copied());
    let mut out = vec![
        CheckOutcome::from_witness(CheckKey::AtlasAlphaBalanced, label.clone(), r.balanced_witness()),
        CheckOutcome::from_witness(CheckKey::AtlasAlphaEquivariant, label.clone(), r.equivariance_witness()),
        CheckOutcome::from_witness(CheckKey::AtlasAlphaIso, label.clone(), r.not_iso.clone()),
    ];

    let mut w = None;
    'c: for n in 0..atlas.abst[outer].size() {
        for l in 0..ni {
            let lhs = atlas.tilde[composite][table[n * ni + l]];
            let rhs = layer.gamma(outer, inner, atlas.tilde[outer][n], atlas.tilde[inner][l]);
            if Some(lhs) != rhs {
                w = Some(format!("concrete image of ({n}, {l}) is not the composite"));
                break 'c;
            }
        }
    }
    out.push(CheckOutcome::from_witness(CheckKey::AtlasRhoComposition, label.clone(), w));

    if p.is_identity(outer) || p.is_identity(inner) {
        let mut w = None;
        if p.is_identity(outer) {
            let j = p.source(outer);
            'l: for h in atlas.group(j).elements() {
                for l in 0..ni {
                    if table[atlas.unit[j][h] * ni + l] != atlas.abst[inner].act_left(h, l) {
                        w = Some(format!("unit(h{h}) after {l} is not h{h}.{l}"));
                        break 'l;
                    }
                }
            }
        }
        if w.is_none() && p.is_identity(inner) {
            let i = p.source(inner);
            'r: for n in 0..atlas.abst[outer].size() {
                for g in atlas.group(i).elements() {
                    if table[n * ni + atlas.unit[i][g]] != atlas.abst[outer].act_right(n, g) {
                        w = Some(format!("{n} after unit(g{g}) is not {n}.g{g}"));
                        break 'r;
                    }
                }
            }
        }
        out.push(CheckOutcome::from_witness(CheckKey::AtlasUnitCoherence, label, w));
    }
    out
}

fn check_associativity(atlas: &Atlas, c: usize, b: usize, a: usize) -> CheckOutcome {
    let layer = &atlas.layer;
    let p = layer.poset();
    let (i, j) = p.arrows()[a];
    let k = p.target(b);
    let l = p.target(c);
    let (ba, cb) = (p.arrow(i, k).expect("composite"), p.arrow(j, l).expect("composite"));
    let label = format!("{} after {} after {}", layer.arrow_label(c), layer.arrow_label(b), layer.arrow_label(a));
    let mut w = None;
    'a: for z in 0..atlas.abst[c].size() {
        for y in 0..atlas.abst[b].size() {
            for x in 0..atlas.abst[a].size() {
                let lhs = atlas.alpha(c, ba, z, atlas.alpha(b, a, y, x));
                let rhs = atlas.alpha(cb, a, atlas.alpha(c, b, z, y), x);
                if lhs != rhs {
                    w = Some(format!("({z}, {y}, {x}): {lhs} != {rhs}"));
                    break 'a;
                }
            }
        }
    }
    CheckOutcome::from_witness(CheckKey::AtlasAssociativity, label, w)
}

pub fn left_cancel_check(atlas: &Atlas) -> Vec<CheckOutcome> {
    atlas
        .layer
        .poset()
        .composable_pairs()
        .into_iter()
        .map(|(o, i, c)| {
            let label = format!("{} after {}", atlas.layer.arrow_label(o), atlas.layer.arrow_label(i));
            let ni = atlas.abst[i].size();
            let mut w = None;
            'c: for n in 0..atlas.abst[o].size() {
                let mut seen = vec![usize::MAX; atlas.abst[c].size()];
                for l in 0..ni {
                    let v = atlas.alpha(o, i, n, l);
                    if seen[v] != usize::MAX {
                        w = Some(format!("({n}, {}) and ({n}, {l}) compose to {v}", seen[v]));
                        break 'c;
                    }
                    seen[v] = l;
                }
            }
            CheckOutcome::from_witness(CheckKey::LemmaLeftCancel, label, w)
        })
        .collect()
}

pub fn right_cancel_check(atlas: &Atlas) -> Vec<CheckOutcome> {
    let p = atlas.layer.poset();
    p.composable_pairs()
        .into_iter()
        .map(|(o, i, c)| {
            let label = format!("{} after {}", atlas.layer.arrow_label(o), atlas.layer.arrow_label(i));
            let mut w = None;
            'c: for l in 0..atlas.abst[i].size() {
                let mut seen = vec![usize::MAX; atlas.abst[c].size()];
                for n in 0..atlas.abst[o].size() {
                    let v = atlas.alpha(o, i, n, l);
                    if seen[v] != usize::MAX {
                        w = Some(format!("({}, {l}) and ({n}, {l}) compose to {v}", seen[v]));
                        break 'c;
                    }
                    seen[v] = n;
                }
            }
            CheckOutcome::from_witness(CheckKey::LemmaRightCancel, label, w)
        })
        .collect()
}

pub fn interpolation_check(atlas: &Atlas) -> Vec<CheckOutcome> {
    let p = atlas.layer.poset();
    p.composable_pairs()
        .into_iter()
        .map(|(o, _, c)| {
            let label = format!("{} through {}", atlas.layer.arrow_label(c), atlas.layer.arrow_label(o));
            let mut w = None;
            'c: for n in 0..atlas.abst[o].size() {
                for l in 0..atlas.abst[c].size() {
                    match atlas.interpolate(o, n, c, l) {
                        Ok(_) | Err(AtlasError::NoOverlap) => {}
                        Err(e) => {
                            w = Some(format!("({n}, {l}): {e}"));
                            break 'c;
                        }
                    }
                }
            }
            CheckOutcome::from_witness(CheckKey::LemmaInterpolation, label, w)
        })
        .collect()
}

pub fn strong_compat_check(atlas: &Atlas) -> Vec<CheckOutcome> {
    let p = atlas.layer.poset();
    let mut out = Vec::new();
    for k in 0..p.charts() {
        let into: Vec<usize> = p.arrows_into(k).collect();
        for &a1 in &into {
            for &a2 in &into {
                if a2 < a1 {
                    continue;
                }
                let label = format!("{} and {}", atlas.layer.arrow_label(a1), atlas.layer.arrow_label(a2));
                let mut w = None;
                'w: for l1 in 0..atlas.abst[a1].size() {
                    for l2 in 0..atlas.abst[a2].size() {
                        let (m1, m2) = (atlas.tilde(a1, l1), atlas.tilde(a2, l2));
                        for x1 in 0..m1.len() {
                            for x2 in 0..m2.len() {
                                if m1[x1] == m2[x2] && atlas.search_strong_witness((a1, l1, x1), (a2, l2, x2)).is_none() {
                                    w = Some(format!("elements {l1} at {x1} and {l2} at {x2}"));
                                    break 'w;
                                }
                            }
                        }
                    }
                }
                out.push(CheckOutcome::from_witness(CheckKey::LemmaStrongCompatibility, label, w));
            }
        }
    }
    out
}

pub fn ell_conjugacy_check(atlas: &Atlas) -> Vec<CheckOutcome> {
    let p = atlas.layer.poset();
    (0..p.len())
        .map(|a| {
            let label = atlas.layer.arrow_label(a);
            let m = &atlas.abst[a];
            let j = p.target(a);
            let mut w = None;
            'c: for l in 0..m.size() {
                let Ok(base) = atlas.ell(a, l) else {
                    w = Some(format!("no induced homomorphism at {l}"));
                    break;
                };
                for h in atlas.group(j).elements() {
                    match atlas.ell(a, m.act_left(h, l)) {
                        Ok(moved) if moved == base.conjugated(h) => {}
                        _ => {
                            w = Some(format!("induced homomorphism at h{h}.{l} is not the conjugate"));
                            break 'c;
                        }
                    }
                }
            }
            CheckOutcome::from_witness(CheckKey::LemmaEllConjugacy, label, w)
        })
        .collect()
}

/// All derived lemma checks.
pub fn check_lemmas(atlas: &Atlas) -> Report {
    let mut r = Report::new("atlas lemmas");
    r.extend(left_cancel_check(atlas));
    r.extend(right_cancel_check(atlas));
    r.extend(interpolation_check(atlas));
    r.extend(strong_compat_check(atlas));
    r.extend(ell_conjugacy_check(atlas));
    r
}
