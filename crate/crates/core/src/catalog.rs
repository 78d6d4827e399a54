//! Ready-made layers, atlases and groupoid models.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::atlas::{Atlas, AtlasParts};
use crate::bimodule::{hom_to_bimodule, Bimodule};
use crate::group::{FiniteGroup, GroupAction, GroupHom, GroupRef};
use crate::groupoid_model::{circle_groupoid, Cover, FiniteGroupoidModel};
use crate::satake::{Chart, SatakeLayer};

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

/// A circle covered by `arcs` arc charts and one chart per overlap, all with
/// `group` acting trivially. Quotient points are the arc interiors
/// `q1..q_arcs` followed by the overlaps. Arc `k` contains overlaps `k` and
/// `k - 1`; charts are the arcs then the overlaps.
pub fn circle_layer(arcs: usize, group: &GroupRef) -> SatakeLayer {
    assert!(arcs >= 2, "a circle needs two arcs");
    let quotient = names("q", 2 * arcs);
    let chart = |name: String, pts: Vec<usize>| {
        let samples = pts.iter().map(|&q| quotient[q].clone()).collect();
        Chart::new(name, samples, GroupAction::trivial(group.clone(), pts.len()), pts, true, 1).expect("trivial chart")
    };
    let mut charts = Vec::with_capacity(2 * arcs);
    for k in 0..arcs {
        let mut pts = vec![k, arcs + k, arcs + (k + arcs - 1) % arcs];
        pts.sort_unstable();
        pts.dedup();
        charts.push(chart(format!("U{}", k + 1), pts));
    }
    for k in 0..arcs {
        charts.push(chart(format!("U{}", arcs + k + 1), vec![arcs + k]));
    }
    SatakeLayer::new(quotient, charts, &BTreeMap::new()).expect("circle layer")
}

/// Circle atlas with cyclic isotropy of order `n`. The inclusion of overlap
/// `o` into arc `a` uses inversion when `(a, o)` is listed in `twisted`, the
/// identity otherwise.
pub fn circle_atlas(arcs: usize, n: usize, twisted: &[(usize, usize)]) -> Atlas {
    let g: GroupRef = Arc::new(FiniteGroup::cyclic(n));
    let layer = circle_layer(arcs, &g);
    let identity = GroupHom::identity(&g);
    let inversion = GroupHom::new(g.clone(), g.clone(), g.elements().map(|x| g.inv(x)).collect()).expect("abelian");
    let mut parts = AtlasParts::default();
    let p = layer.poset().clone();
    for (a, &(i, j)) in p.arrows().iter().enumerate() {
        if i == j {
            continue;
        }
        let (arc, overlap) = (j, i - arcs);
        let phi = if twisted.contains(&(arc, overlap)) { &inversion } else { &identity };
        parts.abst.insert(a, hom_to_bimodule(phi));
    }
    Atlas::build(layer, parts).expect("circle atlas")
}

/// Four-chart atlas of the circle with `Z/3` isotropy. Untwisted, every
/// overlap module is `Z/3` with matching left and right rotation; twisted,
/// the inclusion of `U4` into `U2` rotates the other way on the right.
pub fn z3_circle(twisted: bool) -> Atlas {
    let tw: &[(usize, usize)] = if twisted { &[(1, 1)] } else { &[] };
    circle_atlas(2, 3, tw)
}

pub fn regular_action(n: usize) -> GroupAction {
    GroupAction::regular(Arc::new(FiniteGroup::cyclic(n)))
}

/// One chart over the orbit space of `action`.
pub fn single_chart(action: GroupAction) -> Atlas {
    let orbits = action.orbits();
    let mut proj = vec![0; action.set_size()];
    for (q, o) in orbits.iter().enumerate() {
        for &x in o {
            proj[x] = q;
        }
    }
    let quotient = names("q", orbits.len());
    let samples = (0..action.set_size()).map(|x| format!("x{x}")).collect();
    let chart = Chart::new("U", samples, action, proj, true, 1).expect("chart");
    let layer = SatakeLayer::new(quotient, vec![chart], &BTreeMap::new()).expect("single chart layer");
    Atlas::build(layer, AtlasParts::default()).expect("single chart atlas")
}

/// `U1` is a regular `Z/3` chart over `q1`; `U2` carries a regular `Z/3`
/// fiber over each of `q1`, `q2`. The embedding module is the `Z/3`
/// bitorsor and embeddings are the rotations onto the `q1` fiber.
pub fn torsor_pair() -> Atlas {
    let g: GroupRef = Arc::new(FiniteGroup::cyclic(3));
    let quotient = names("q", 2);
    let small = Chart::new(
        "U1",
        vec!["x0".into(), "x1".into(), "x2".into()],
        GroupAction::regular(g.clone()),
        vec![0; 3],
        true,
        1,
    )
    .expect("chart");
    let mut act = Vec::with_capacity(18);
    for h in g.elements() {
        act.extend((0..3).map(|k| g.mul(h, k)));
        act.extend((0..3).map(|k| 3 + g.mul(h, k)));
    }
    let big = Chart::new(
        "U2",
        ["x0", "x1", "x2", "y0", "y1", "y2"].iter().map(|s| s.to_string()).collect(),
        GroupAction::new(g.clone(), 6, act).expect("action"),
        vec![0, 0, 0, 1, 1, 1],
        true,
        1,
    )
    .expect("chart");
    let mut declared = BTreeMap::new();
    declared.insert((0, 1), (0..3).map(|r| (0..3).map(|k| (k + r) % 3).collect()).collect());
    declared.insert((1, 1), (0..3).map(|r| (0..6).map(|k| (k / 3) * 3 + (k + r) % 3).collect()).collect());
    let layer = SatakeLayer::new(quotient, vec![small, big], &declared).expect("torsor layer");
    let a = layer.poset().arrow(0, 1).expect("arrow");
    let mut parts = AtlasParts::default();
    parts.abst.insert(a, Bimodule::regular(&g));
    parts.tilde.insert(a, vec![0, 1, 2]);
    Atlas::build(layer, parts).expect("torsor atlas")
}

/// Points `q1, q3, q2, q4` in cyclic order with `Z/3` isotropy. Twisted, the
/// sheets over the arc from `q2` to `q4` match each rotation with its inverse.
pub fn z3_circle_groupoid(twisted: bool) -> FiniteGroupoidModel {
    let g: GroupRef = Arc::new(FiniteGroup::cyclic(3));
    let pts: Vec<String> = ["q1", "q3", "q2", "q4"].iter().map(|s| s.to_string()).collect();
    let mut tw = BTreeMap::new();
    if twisted {
        tw.insert(2, vec![0, 2, 1]);
    }
    circle_groupoid(&pts, &g, &tw)
}

fn object(model: &FiniteGroupoidModel, name: &str) -> usize {
    model.object_names().iter().position(|o| o == name).expect("object")
}

/// Two arcs and their two overlaps.
pub fn z3_circle_cover(model: &FiniteGroupoidModel) -> Cover {
    let ix = |n: &str| object(model, n);
    Cover::new(
        names("U", 4),
        vec![
            vec![ix("q1"), ix("q3"), ix("q4")],
            vec![ix("q2"), ix("q3"), ix("q4")],
            vec![ix("q3")],
            vec![ix("q4")],
        ],
    )
}

/// Four points and the four short arcs between consecutive points.
pub fn z3_circle_fine_cover(model: &FiniteGroupoidModel) -> Cover {
    let ix = |n: &str| object(model, n);
    Cover::new(
        names("V", 8),
        vec![
            vec![ix("q1")],
            vec![ix("q2")],
            vec![ix("q3")],
            vec![ix("q4")],
            vec![ix("q1"), ix("q3")],
            vec![ix("q3"), ix("q2")],
            vec![ix("q2"), ix("q4")],
            vec![ix("q4"), ix("q1")],
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::{check_lemmas, verify_atlas};

    #[test]
    fn catalog_atlases_verify() {
        for a in [
            z3_circle(false),
            z3_circle(true),
            circle_atlas(4, 5, &[(2, 1)]),
            single_chart(regular_action(3)),
            single_chart(GroupAction::trivial(Arc::new(FiniteGroup::trivial()), 1)),
            torsor_pair(),
        ] {
            let r = verify_atlas(&a);
            assert!(r.passed(), "{}", r.render_human());
            assert!(check_lemmas(&a).passed());
        }
    }
}
