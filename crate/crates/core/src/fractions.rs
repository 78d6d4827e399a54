//! The category of chart embeddings and its groupoid of fractions.
//!
//! Arrows of the groupoid are classes of spans `(λ, x, ν)` with `λ, ν`
//! abstract embeddings out of the chart containing `x`. Classes are the
//! closure of restriction moves `(λ, κ̃(y), ν) ~ (λκ, y, νκ)`.

use std::collections::{HashMap, HashSet};

use crate::atlas::Atlas;
use crate::exec::{self, Execution};
use crate::group::FiniteGroup;
use crate::groupoid_model::{fiber_sizes, groupoid_summary, validate_groupoid, FiniteGroupoidModel, GroupoidError};
use crate::report::{CheckKey, CheckOutcome, Report, Status};
use crate::uf::UnionFind;

/// Objects `∐ P_i` and arrows `(λ, x)` of the category of embeddings.
#[derive(Debug, Clone)]
pub struct AtlasCategory<'a> {
    atlas: &'a Atlas,
    object_offset: Vec<usize>,
    arrow_offset: Vec<usize>,
    objects: usize,
    arrows: usize,
}

impl<'a> AtlasCategory<'a> {
    pub fn new(atlas: &'a Atlas) -> Self {
        let layer = atlas.layer();
        let mut object_offset = Vec::with_capacity(layer.charts().len());
        let mut objects = 0;
        for c in layer.charts() {
            object_offset.push(objects);
            objects += c.samples();
        }
        let mut arrow_offset = Vec::with_capacity(atlas.arrow_count());
        let mut arrows = 0;
        for a in 0..atlas.arrow_count() {
            arrow_offset.push(arrows);
            arrows += atlas.abst(a).size() * layer.chart(layer.poset().source(a)).samples();
        }
        AtlasCategory { atlas, object_offset, arrow_offset, objects, arrows }
    }

    pub fn atlas(&self) -> &'a Atlas {
        self.atlas
    }

    pub fn objects(&self) -> usize {
        self.objects
    }

    pub fn arrows(&self) -> usize {
        self.arrows
    }

    pub fn object(&self, chart: usize, x: usize) -> usize {
        self.object_offset[chart] + x
    }

    /// Chart and sample of an object.
    pub fn locate(&self, obj: usize) -> (usize, usize) {
        let i = self.object_offset.partition_point(|&o| o <= obj) - 1;
        (i, obj - self.object_offset[i])
    }

    pub fn arrow(&self, a: usize, lambda: usize, x: usize) -> usize {
        let n = self.atlas.layer().chart(self.atlas.layer().poset().source(a)).samples();
        self.arrow_offset[a] + lambda * n + x
    }

    /// `(poset arrow, λ, x)` of an arrow id.
    pub fn decode(&self, f: usize) -> (usize, usize, usize) {
        let a = self.arrow_offset.partition_point(|&o| o <= f) - 1;
        let n = self.atlas.layer().chart(self.atlas.layer().poset().source(a)).samples();
        let r = f - self.arrow_offset[a];
        (a, r / n, r % n)
    }

    pub fn source(&self, f: usize) -> usize {
        let (a, _, x) = self.decode(f);
        self.object(self.atlas.layer().poset().source(a), x)
    }

    pub fn target(&self, f: usize) -> usize {
        let (a, l, x) = self.decode(f);
        self.object(self.atlas.layer().poset().target(a), self.atlas.tilde(a, l)[x])
    }

    pub fn unit(&self, obj: usize) -> usize {
        let (i, x) = self.locate(obj);
        let p = self.atlas.layer().poset();
        self.arrow(p.identity(i), self.atlas.unit(i, self.atlas.group(i).identity()), x)
    }

    /// `f2 ∘ f1` when `t(f1) = s(f2)`.
    pub fn compose(&self, f2: usize, f1: usize) -> Option<usize> {
        if self.target(f1) != self.source(f2) {
            return None;
        }
        let (a1, l1, x1) = self.decode(f1);
        let (a2, l2, _) = self.decode(f2);
        let p = self.atlas.layer().poset();
        let c = p.arrow(p.source(a1), p.target(a2))?;
        Some(self.arrow(c, self.atlas.alpha(a2, a1, l2, l1), x1))
    }
}

pub fn check_category_laws(cat: &AtlasCategory) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let w = (0..cat.objects()).find_map(|o| {
        let u = cat.unit(o);
        (cat.source(u) != o || cat.target(u) != o).then(|| format!("unit at object {o} is not a loop"))
    });
    out.push(CheckOutcome::from_witness(CheckKey::CategoryLaws, "units", w));
    let mut by_source = vec![Vec::new(); cat.objects()];
    for f in 0..cat.arrows() {
        by_source[cat.source(f)].push(f);
    }
    let w = (0..cat.arrows()).find_map(|f| {
        let ok = cat.compose(f, cat.unit(cat.source(f))) == Some(f) && cat.compose(cat.unit(cat.target(f)), f) == Some(f);
        (!ok).then(|| format!("units do not fix arrow {:?}", cat.decode(f)))
    });
    out.push(CheckOutcome::from_witness(CheckKey::CategoryLaws, "unit laws", w));
    let mut w = None;
    'a: for f1 in 0..cat.arrows() {
        for &f2 in &by_source[cat.target(f1)] {
            let Some(f21) = cat.compose(f2, f1) else {
                w = Some(format!("{:?} after {:?} undefined", cat.decode(f2), cat.decode(f1)));
                break 'a;
            };
            if cat.source(f21) != cat.source(f1) || cat.target(f21) != cat.target(f2) {
                w = Some(format!("{:?} after {:?} has wrong endpoints", cat.decode(f2), cat.decode(f1)));
                break 'a;
            }
            for &f3 in &by_source[cat.target(f2)] {
                let lhs = cat.compose(f3, f21);
                let rhs = cat.compose(f3, f2).and_then(|f32| cat.compose(f32, f1));
                if lhs != rhs {
                    w = Some(format!("associativity fails at {:?} {:?} {:?}", cat.decode(f3), cat.decode(f2), cat.decode(f1)));
                    break 'a;
                }
            }
        }
    }
    out.push(CheckOutcome::from_witness(CheckKey::CategoryLaws, "composition", w));
    out
}

/// Every cospan `(λ1, x1)`, `(λ2, x2)` with a common target completes to a
/// commuting square.
pub fn check_ore(cat: &AtlasCategory) -> Vec<CheckOutcome> {
    check_ore_with(cat, Execution::default())
}

pub fn check_ore_with(cat: &AtlasCategory, exec: Execution) -> Vec<CheckOutcome> {
    let atlas = cat.atlas;
    let p = atlas.layer().poset();
    let mut pairs = Vec::new();
    for k in 0..p.charts() {
        let into: Vec<usize> = p.arrows_into(k).collect();
        for &a1 in &into {
            for &a2 in &into {
                pairs.push((a1, a2));
            }
        }
    }
    exec::map(exec, &pairs, |&(a1, a2)| {
        let label = format!("{} / {}", atlas.layer().arrow_label(a1), atlas.layer().arrow_label(a2));
        let mut w = None;
        'c: for l1 in 0..atlas.abst(a1).size() {
            for l2 in 0..atlas.abst(a2).size() {
                let (m1, m2) = (atlas.tilde(a1, l1), atlas.tilde(a2, l2));
                for (x1, &y1) in m1.iter().enumerate() {
                    for (x2, &y2) in m2.iter().enumerate() {
                        if y1 == y2 && atlas.strong_witnesses((a1, l1, x1), (a2, l2, x2)).next().is_none() {
                            w = Some(format!("cospan ({l1} at {x1}, {l2} at {x2}) has no square"));
                            break 'c;
                        }
                    }
                }
            }
        }
        CheckOutcome::from_witness(CheckKey::FractionsOre, label, w)
    })
}

/// For parallel `f = (λ2, z)`, `g = (λ3, z)` equalised by some `h`, an arrow
/// `j` with `f j = g j` exists.
pub fn check_weak_cancellation(cat: &AtlasCategory) -> Vec<CheckOutcome> {
    let atlas = cat.atlas;
    let p = atlas.layer().poset();
    let mut out = Vec::new();
    for (outer, inner, _) in p.composable_pairs() {
        let label = format!("{} after {}", atlas.layer().arrow_label(outer), atlas.layer().arrow_label(inner));
        let j = p.source(inner);
        let mut w = None;
        'f: for l2 in 0..atlas.abst(inner).size() {
            for l3 in 0..atlas.abst(inner).size() {
                if l2 == l3 {
                    continue;
                }
                let equalised = (0..atlas.abst(outer).size()).any(|l4| atlas.alpha(outer, inner, l4, l2) == atlas.alpha(outer, inner, l4, l3));
                if !equalised {
                    continue;
                }
                let (m2, m3) = (atlas.tilde(inner, l2), atlas.tilde(inner, l3));
                for z in 0..m2.len() {
                    if m2[z] != m3[z] {
                        continue;
                    }
                    let found = p.arrows_into(j).any(|c| {
                        (0..atlas.abst(c).size()).any(|k| {
                            atlas.tilde(c, k).contains(&z) && atlas.alpha(inner, c, l2, k) == atlas.alpha(inner, c, l3, k)
                        })
                    });
                    if !found {
                        w = Some(format!("elements {l2} and {l3} at sample {z} are equalised but never coequalised"));
                        break 'f;
                    }
                }
            }
        }
        out.push(CheckOutcome::from_witness(CheckKey::FractionsWeakCancellation, label, w));
    }
    out
}

/// A chart with two embeddings out of it: `left: i -> j`, `right: i -> k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpanPiece {
    pub chart: usize,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub piece: usize,
    pub lambda: usize,
    pub x: usize,
    pub nu: usize,
}

/// Spans of an atlas, enumerated piece by piece and lexicographically in
/// `(λ, x, ν)` within a piece.
#[derive(Debug, Clone)]
pub struct SpanSpace {
    pub pieces: Vec<SpanPiece>,
    offset: Vec<usize>,
    piece_index: HashMap<(usize, usize), usize>,
    dims: Vec<(usize, usize, usize)>,
    len: usize,
}

impl SpanSpace {
    pub fn new(atlas: &Atlas) -> Self {
        let p = atlas.layer().poset();
        let mut pieces = Vec::new();
        for i in 0..p.charts() {
            let from: Vec<usize> = p.arrows_from(i).collect();
            for &a in &from {
                for &b in &from {
                    pieces.push(SpanPiece { chart: i, left: a, right: b });
                }
            }
        }
        let mut offset = Vec::with_capacity(pieces.len());
        let mut dims = Vec::with_capacity(pieces.len());
        let mut len = 0;
        for pc in &pieces {
            offset.push(len);
            let d = (atlas.abst(pc.left).size(), atlas.layer().chart(pc.chart).samples(), atlas.abst(pc.right).size());
            dims.push(d);
            len += d.0 * d.1 * d.2;
        }
        let piece_index = pieces.iter().enumerate().map(|(k, pc)| ((pc.left, pc.right), k)).collect();
        SpanSpace { pieces, offset, piece_index, dims, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn piece_of(&self, left: usize, right: usize) -> Option<usize> {
        self.piece_index.get(&(left, right)).copied()
    }

    pub fn id(&self, s: Span) -> usize {
        let (_, nx, nn) = self.dims[s.piece];
        self.offset[s.piece] + (s.lambda * nx + s.x) * nn + s.nu
    }

    pub fn span(&self, id: usize) -> Span {
        let piece = self.offset.partition_point(|&o| o <= id) - 1;
        let (_, nx, nn) = self.dims[piece];
        let r = id - self.offset[piece];
        Span { piece, lambda: r / (nx * nn), x: (r / nn) % nx, nu: r % nn }
    }

    pub fn spans_of_piece(&self, piece: usize) -> impl Iterator<Item = Span> {
        let (nl, nx, nn) = self.dims[piece];
        (0..nl).flat_map(move |lambda| (0..nx).flat_map(move |x| (0..nn).map(move |nu| Span { piece, lambda, x, nu })))
    }
}

/// All restriction moves out of one span: `(λ, κ̃(y), ν) -> (λκ, y, νκ)`.
pub fn restriction_moves(atlas: &Atlas, space: &SpanSpace, s: Span) -> Vec<Span> {
    let p = atlas.layer().poset();
    let pc = space.pieces[s.piece];
    let mut out = Vec::new();
    for c in p.arrows_into(pc.chart) {
        let l = p.source(c);
        let left = p.arrow(l, p.target(pc.left)).expect("composite");
        let right = p.arrow(l, p.target(pc.right)).expect("composite");
        let piece = space.piece_of(left, right).expect("piece");
        for kappa in 0..atlas.abst(c).size() {
            let m = atlas.tilde(c, kappa);
            for (y, &img) in m.iter().enumerate() {
                if img == s.x {
                    out.push(Span {
                        piece,
                        lambda: atlas.alpha(pc.left, c, s.lambda, kappa),
                        x: y,
                        nu: atlas.alpha(pc.right, c, s.nu, kappa),
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct FractionsGroupoid {
    pub space: SpanSpace,
    pub class_of: Vec<usize>,
    pub reps: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    pub model: FiniteGroupoidModel,
    /// Object id of `(chart, sample)` is `object_offset[chart] + sample`.
    pub object_offset: Vec<usize>,
    pub checks: Vec<CheckOutcome>,
}

impl FractionsGroupoid {
    pub fn classes(&self) -> usize {
        self.reps.len()
    }

    pub fn class_of_span(&self, s: Span) -> usize {
        self.class_of[self.space.id(s)]
    }

    pub fn object(&self, chart: usize, x: usize) -> usize {
        self.object_offset[chart] + x
    }

    pub fn compose(&self, g2: usize, g1: usize) -> Option<usize> {
        self.model.compose(g2, g1)
    }

    pub fn isotropy(&self, obj: usize) -> Result<FiniteGroup, GroupoidError> {
        Ok(self.model.isotropy(obj)?.0)
    }

    pub fn inertia_components(&self) -> (Vec<usize>, usize) {
        self.model.inertia()
    }

    /// `(s, t)` fiber sizes, row-major over objects.
    pub fn properness(&self) -> Vec<usize> {
        fiber_sizes(&self.model)
    }
}

fn span_source(atlas: &Atlas, space: &SpanSpace, offset: &[usize], s: Span) -> usize {
    let pc = space.pieces[s.piece];
    offset[atlas.layer().poset().target(pc.left)] + atlas.tilde(pc.left, s.lambda)[s.x]
}

fn span_target(atlas: &Atlas, space: &SpanSpace, offset: &[usize], s: Span) -> usize {
    let pc = space.pieces[s.piece];
    offset[atlas.layer().poset().target(pc.right)] + atlas.tilde(pc.right, s.nu)[s.x]
}

/// Composite of `s2 ∘ s1` for one reconciling witness.
fn compose_spans(atlas: &Atlas, space: &SpanSpace, s2: Span, s1: Span) -> Vec<Span> {
    let p = atlas.layer().poset();
    let (p1, p2) = (space.pieces[s1.piece], space.pieces[s2.piece]);
    atlas
        .strong_witnesses((p1.right, s1.nu, s1.x), (p2.left, s2.lambda, s2.x))
        .map(|w| {
            let c1 = p.arrow(w.chart, p1.chart).expect("witness arrow");
            let c2 = p.arrow(w.chart, p2.chart).expect("witness arrow");
            let left = p.arrow(w.chart, p.target(p1.left)).expect("composite");
            let right = p.arrow(w.chart, p.target(p2.right)).expect("composite");
            Span {
                piece: space.piece_of(left, right).expect("piece"),
                lambda: atlas.alpha(p1.left, c1, s1.lambda, w.first),
                x: w.point,
                nu: atlas.alpha(p2.right, c2, s2.nu, w.second),
            }
        })
        .collect()
}

pub fn build_groupoid(atlas: &Atlas) -> FractionsGroupoid {
    build_groupoid_with(atlas, Execution::default())
}

/// Closure of restriction moves, structure maps, composition through
/// reconciling witnesses (checked independent of witness and
/// representatives), sheets from span pieces.
pub fn build_groupoid_with(atlas: &Atlas, exec: Execution) -> FractionsGroupoid {
    let layer = atlas.layer();
    let space = SpanSpace::new(atlas);
    let mut object_offset = Vec::with_capacity(layer.charts().len());
    let mut objects = 0;
    for c in layer.charts() {
        object_offset.push(objects);
        objects += c.samples();
    }

    let ids: Vec<usize> = (0..space.len()).collect();
    let moves = exec::map(exec, &ids, |&id| {
        let s = space.span(id);
        restriction_moves(atlas, &space, s).into_iter().map(|m| space.id(m)).collect::<Vec<_>>()
    });
    let mut uf = UnionFind::new(space.len());
    for (id, ms) in moves.iter().enumerate() {
        for &m in ms {
            uf.union(id, m);
        }
    }
    let (class_of, reps) = uf.classes();
    let mut members = vec![Vec::new(); reps.len()];
    for (id, &c) in class_of.iter().enumerate() {
        members[c].push(id);
    }
    let mut checks = vec![CheckOutcome::info(
        CheckKey::FractionsSpanRelation,
        "spans",
        format!("{} spans in {} pieces, {} classes", space.len(), space.pieces.len(), reps.len()),
    )];

    let src = |id: usize| span_source(atlas, &space, &object_offset, space.span(id));
    let tgt = |id: usize| span_target(atlas, &space, &object_offset, space.span(id));
    let mut w = None;
    for (c, ms) in members.iter().enumerate() {
        if let Some(&m) = ms.iter().find(|&&m| src(m) != src(reps[c]) || tgt(m) != tgt(reps[c])) {
            w = Some(format!("span {:?} and {:?} share a class but not endpoints", space.span(reps[c]), space.span(m)));
            break;
        }
    }
    let source: Vec<usize> = reps.iter().map(|&r| src(r)).collect();
    let target: Vec<usize> = reps.iter().map(|&r| tgt(r)).collect();

    let swap = |id: usize| {
        let s = space.span(id);
        let pc = space.pieces[s.piece];
        let piece = space.piece_of(pc.right, pc.left).expect("piece");
        space.id(Span { piece, lambda: s.nu, x: s.x, nu: s.lambda })
    };
    if w.is_none() {
        for (c, ms) in members.iter().enumerate() {
            let inv = class_of[swap(reps[c])];
            if let Some(&m) = ms.iter().find(|&&m| class_of[swap(m)] != inv) {
                w = Some(format!("swapping legs of {:?} leaves its class", space.span(m)));
                break;
            }
        }
    }
    checks.push(CheckOutcome::from_witness(CheckKey::FractionsStructureMaps, "classes", w));
    let inverse: Vec<usize> = reps.iter().map(|&r| class_of[swap(r)]).collect();

    let p = layer.poset();
    let units: Vec<usize> = (0..objects)
        .map(|o| {
            let i = object_offset.partition_point(|&off| off <= o) - 1;
            let id = p.identity(i);
            let e = atlas.unit(i, atlas.group(i).identity());
            let piece = space.piece_of(id, id).expect("piece");
            class_of[space.id(Span { piece, lambda: e, x: o - object_offset[i], nu: e })]
        })
        .collect();

    let mut by_source = vec![Vec::new(); objects];
    for c in 0..reps.len() {
        by_source[source[c]].push(c);
    }
    let classes: Vec<usize> = (0..reps.len()).collect();
    let results = exec::map(exec, &classes, |&g1| {
        let mut row = Vec::new();
        let mut fail = None;
        for &g2 in &by_source[target[g1]] {
            let (r1, r2) = (space.span(reps[g1]), space.span(reps[g2]));
            let all: Vec<usize> = compose_spans(atlas, &space, r2, r1).into_iter().map(|s| class_of[space.id(s)]).collect();
            let Some(&first) = all.first() else {
                fail.get_or_insert_with(|| format!("{r2:?} after {r1:?}: no reconciling witness"));
                continue;
            };
            if let Some(other) = all.iter().find(|&&c| c != first) {
                fail.get_or_insert_with(|| format!("{r2:?} after {r1:?}: witnesses give classes {first} and {other}"));
            }
            for &m in &members[g1] {
                let c = compose_spans(atlas, &space, r2, space.span(m)).first().map(|s| class_of[space.id(*s)]);
                if c != Some(first) {
                    fail.get_or_insert_with(|| format!("representative {:?} of class {g1} composes differently", space.span(m)));
                }
            }
            for &m in &members[g2] {
                let c = compose_spans(atlas, &space, space.span(m), r1).first().map(|s| class_of[space.id(*s)]);
                if c != Some(first) {
                    fail.get_or_insert_with(|| format!("representative {:?} of class {g2} composes differently", space.span(m)));
                }
            }
            row.push(((g2, g1), first));
        }
        (row, fail)
    });
    let mut compose = HashMap::new();
    let mut w = None;
    for (row, fail) in results {
        compose.extend(row);
        if w.is_none() {
            w = fail;
        }
    }
    checks.push(CheckOutcome::from_witness(CheckKey::FractionsWitnessIndependence, "composition", w));

    let mut sheets = Vec::new();
    let mut seen = HashSet::new();
    for (k, pc) in space.pieces.iter().enumerate() {
        let n = layer.chart(pc.chart).samples();
        for lambda in 0..atlas.abst(pc.left).size() {
            for nu in 0..atlas.abst(pc.right).size() {
                let sheet: Vec<usize> = (0..n).map(|x| class_of[space.id(Span { piece: k, lambda, x, nu })]).collect();
                if sheet.len() > 1 && seen.insert(sheet.clone()) {
                    sheets.push(sheet);
                }
            }
        }
    }

    let object_names: Vec<String> = layer
        .charts()
        .iter()
        .flat_map(|c| c.sample_names().iter().map(move |s| format!("{}.{s}", c.name())))
        .collect();
    let labels: Vec<String> = layer
        .charts()
        .iter()
        .flat_map(|c| c.proj().iter().map(|&q| layer.quotient().name(q).to_string()))
        .collect();
    let arrow_names: Vec<String> = reps
        .iter()
        .map(|&r| {
            let s = space.span(r);
            let pc = space.pieces[s.piece];
            let chart = layer.chart(pc.chart);
            format!(
                "[{}:{}, {}.{}, {}:{}]",
                layer.arrow_label(pc.left),
                s.lambda,
                chart.name(),
                chart.sample_name(s.x),
                layer.arrow_label(pc.right),
                s.nu
            )
        })
        .collect();
    let model = FiniteGroupoidModel::new(object_names, arrow_names, source, target, units, inverse, compose, sheets)
        .and_then(|m| m.with_quotient_labels(labels))
        .expect("fractions model indices are in range");
    FractionsGroupoid { space, class_of, reps, members, model, object_offset, checks }
}

/// Category, Ore and cancellation checks, the closure checks, groupoid laws
/// on classes and the summary invariants.
pub fn fractions_report(atlas: &Atlas, exec: Execution) -> (Report, FractionsGroupoid) {
    let mut r = Report::new("groupoid of fractions");
    let cat = AtlasCategory::new(atlas);
    r.push(CheckOutcome::info(
        CheckKey::CategoryLaws,
        "size",
        format!("{} objects, {} arrows", cat.objects(), cat.arrows()),
    ));
    r.extend(check_category_laws(&cat));
    r.extend(check_ore_with(&cat, exec));
    r.extend(check_weak_cancellation(&cat));
    let gpd = build_groupoid_with(atlas, exec);
    r.extend(gpd.checks.iter().cloned());
    for o in validate_groupoid(&gpd.model).outcomes {
        let key = if o.key == CheckKey::ModelGroupoidLaws { CheckKey::FractionsGroupoidLaws } else { o.key };
        r.push(CheckOutcome { key, ..o });
    }
    r.push(CheckOutcome {
        key: CheckKey::FractionsHausdorff,
        subject: "arrows".into(),
        status: Status::Skipped,
        detail: "no finite content".into(),
    });
    r.extend(groupoid_summary(&gpd.model));
    (r, gpd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn category_of_circle_atlas() {
        let a = catalog::z3_circle(false);
        let cat = AtlasCategory::new(&a);
        assert_eq!(cat.objects(), 8);
        assert_eq!(cat.arrows(), 36);
        assert!(check_category_laws(&cat).iter().all(|o| o.status == Status::Pass));
    }

    #[test]
    fn circle_groupoids_have_expected_inertia() {
        for (tw, n) in [(false, 3), (true, 2)] {
            let g = build_groupoid(&catalog::z3_circle(tw));
            assert_eq!(g.inertia_components().1, n);
            assert_eq!(g.classes(), 60);
        }
    }

    #[test]
    fn single_chart_gives_translation_groupoid() {
        let a = catalog::single_chart(catalog::regular_action(3));
        let g = build_groupoid(&a);
        assert_eq!(g.classes(), 9);
        for x in 0..3 {
            assert_eq!(g.isotropy(x).unwrap().order(), 1);
        }
    }
}
