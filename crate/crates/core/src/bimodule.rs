//! Finite group bimodules: a carrier with a left action of `H` and a
//! commuting right action of `G`, read as a 1-cell `G ⟶̸ H`.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::group::{Elem, GroupHom, GroupRef};
use crate::uf::UnionFind;

/// Guard for exhaustive isomorphism search.
pub const ISOMORPHISM_SIZE_BOUND: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BimoduleError {
    #[error("{what} table has {len} entries, expected {expected}")]
    Shape { what: &'static str, len: usize, expected: usize },
    #[error("{what} table value {value} is outside the carrier")]
    OutOfRange { what: &'static str, value: usize },
    #[error("left identity moves element {m}")]
    LeftIdentityMoves { m: usize },
    #[error("not a left action: (h{h}*h{k}).{m} != h{h}.(h{k}.{m})")]
    NotLeftAction { h: Elem, k: Elem, m: usize },
    #[error("right identity moves element {m}")]
    RightIdentityMoves { m: usize },
    #[error("not a right action: {m}.(g{g}*g{g2}) != ({m}.g{g}).g{g2}")]
    NotRightAction { m: usize, g: Elem, g2: Elem },
    #[error("actions do not commute: (h{h}.{m}).g{g} != h{h}.({m}.g{g})")]
    NotCompatible { h: Elem, m: usize, g: Elem },
    #[error("middle groups differ")]
    MiddleGroupMismatch,
    #[error("outer groups differ")]
    GroupMismatch,
    #[error("not an atlas bimodule: {0}")]
    NotAtlasBimodule(AtlasBimoduleReport),
    #[error("left action is not free and transitive: {0}")]
    NotTorsor(AtlasBimoduleReport),
    #[error("induced homomorphism is not injective: g{kernel_element} lies in its kernel")]
    NonInjective { kernel_element: Elem },
    #[error("carrier size {size} exceeds the search bound {bound}")]
    SizeBoundExceeded { size: usize, bound: usize },
    #[error("map is not equivariant: {0}")]
    NotEquivariant(MapReport),
}

#[derive(Clone, PartialEq, Eq)]
pub struct Bimodule {
    left: GroupRef,
    right: GroupRef,
    size: usize,
    left_act: Vec<usize>,
    right_act: Vec<usize>,
}

impl fmt::Debug for Bimodule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bimodule(|M|={}, left order {}, right order {})", self.size, self.left.order(), self.right.order())
    }
}

impl Bimodule {
    /// Tables: `left_act[h * size + m] = h·m`, `right_act[m * |G| + g] = m·g`.
    pub fn new(
        left: GroupRef,
        right: GroupRef,
        size: usize,
        left_act: Vec<usize>,
        right_act: Vec<usize>,
    ) -> Result<Self, BimoduleError> {
        let b = Self::new_unchecked(left, right, size, left_act, right_act)?;
        b.check_laws()?;
        Ok(b)
    }

    /// Checks only table shapes. Used by loaders so that law violations in
    /// hand-written data reach the verifiers instead of failing at parse time.
    pub fn new_unchecked(
        left: GroupRef,
        right: GroupRef,
        size: usize,
        left_act: Vec<usize>,
        right_act: Vec<usize>,
    ) -> Result<Self, BimoduleError> {
        if left_act.len() != left.order() * size {
            return Err(BimoduleError::Shape { what: "left action", len: left_act.len(), expected: left.order() * size });
        }
        if right_act.len() != right.order() * size {
            return Err(BimoduleError::Shape { what: "right action", len: right_act.len(), expected: right.order() * size });
        }
        if let Some(&v) = left_act.iter().find(|&&v| v >= size) {
            return Err(BimoduleError::OutOfRange { what: "left action", value: v });
        }
        if let Some(&v) = right_act.iter().find(|&&v| v >= size) {
            return Err(BimoduleError::OutOfRange { what: "right action", value: v });
        }
        Ok(Bimodule { left, right, size, left_act, right_act })
    }

    /// Builds the tables from action closures.
    pub fn from_fn(
        left: GroupRef,
        right: GroupRef,
        size: usize,
        lact: impl Fn(Elem, usize) -> usize,
        ract: impl Fn(usize, Elem) -> usize,
    ) -> Result<Self, BimoduleError> {
        let mut la = Vec::with_capacity(left.order() * size);
        for h in left.elements() {
            la.extend((0..size).map(|m| lact(h, m)));
        }
        let mut ra = Vec::with_capacity(right.order() * size);
        for m in 0..size {
            ra.extend(right.elements().map(|g| ract(m, g)));
        }
        Self::new(left, right, size, la, ra)
    }

    pub fn check_laws(&self) -> Result<(), BimoduleError> {
        let (h_grp, g_grp) = (&self.left, &self.right);
        for m in 0..self.size {
            if self.act_left(h_grp.identity(), m) != m {
                return Err(BimoduleError::LeftIdentityMoves { m });
            }
            if self.act_right(m, g_grp.identity()) != m {
                return Err(BimoduleError::RightIdentityMoves { m });
            }
        }
        for h in h_grp.elements() {
            for k in h_grp.elements() {
                for m in 0..self.size {
                    if self.act_left(h_grp.mul(h, k), m) != self.act_left(h, self.act_left(k, m)) {
                        return Err(BimoduleError::NotLeftAction { h, k, m });
                    }
                }
            }
        }
        for m in 0..self.size {
            for g in g_grp.elements() {
                for g2 in g_grp.elements() {
                    if self.act_right(m, g_grp.mul(g, g2)) != self.act_right(self.act_right(m, g), g2) {
                        return Err(BimoduleError::NotRightAction { m, g, g2 });
                    }
                }
            }
        }
        for h in h_grp.elements() {
            for m in 0..self.size {
                for g in g_grp.elements() {
                    if self.act_right(self.act_left(h, m), g) != self.act_left(h, self.act_right(m, g)) {
                        return Err(BimoduleError::NotCompatible { h, m, g });
                    }
                }
            }
        }
        Ok(())
    }

    /// The group as a bimodule over itself by left and right multiplication.
    pub fn regular(g: &GroupRef) -> Self {
        Self::from_fn(g.clone(), g.clone(), g.order(), |h, m| g.mul(h, m), |m, x| g.mul(m, x))
            .expect("regular bimodule")
    }

    pub fn left(&self) -> &GroupRef {
        &self.left
    }

    pub fn right(&self) -> &GroupRef {
        &self.right
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn act_left(&self, h: Elem, m: usize) -> usize {
        self.left_act[h * self.size + m]
    }

    #[inline]
    pub fn act_right(&self, m: usize, g: Elem) -> usize {
        self.right_act[m * self.right.order() + g]
    }

    pub fn left_table(&self) -> &[usize] {
        &self.left_act
    }

    pub fn right_table(&self) -> &[usize] {
        &self.right_act
    }

    pub fn set_left_entry(&mut self, h: Elem, m: usize, value: usize) {
        self.left_act[h * self.size + m] = value;
    }

    pub fn set_right_entry(&mut self, m: usize, g: Elem, value: usize) {
        let n = self.right.order();
        self.right_act[m * n + g] = value;
    }

    /// Unique `h` with `h·from = to`, if the left action provides one.
    pub fn left_divide(&self, to: usize, from: usize) -> Option<Elem> {
        self.left.elements().find(|&h| self.act_left(h, from) == to)
    }

    pub fn classify(&self) -> AtlasBimoduleReport {
        let mut r = AtlasBimoduleReport {
            nonempty: self.size > 0,
            left_free: true,
            left_transitive: true,
            right_free: true,
            left_free_witness: None,
            left_transitive_witness: None,
            right_free_witness: None,
        };
        let (eh, eg) = (self.left.identity(), self.right.identity());
        'lf: for h in self.left.elements().filter(|&h| h != eh) {
            for m in 0..self.size {
                if self.act_left(h, m) == m {
                    r.left_free = false;
                    r.left_free_witness = Some((h, m));
                    break 'lf;
                }
            }
        }
        if self.size > 0 {
            let mut seen = vec![false; self.size];
            for h in self.left.elements() {
                seen[self.act_left(h, 0)] = true;
            }
            if let Some(m) = seen.iter().position(|s| !s) {
                r.left_transitive = false;
                r.left_transitive_witness = Some((0, m));
            }
        }
        'rf: for m in 0..self.size {
            for g in self.right.elements().filter(|&g| g != eg) {
                if self.act_right(m, g) == m {
                    r.right_free = false;
                    r.right_free_witness = Some((m, g));
                    break 'rf;
                }
            }
        }
        r
    }

    pub fn is_atlas_bimodule(&self) -> bool {
        self.classify().all()
    }

    /// Carrier `self ⊔ other`, with `other` shifted past `self`.
    pub fn disjoint_union(&self, other: &Bimodule) -> Result<Bimodule, BimoduleError> {
        if *self.left != *other.left || *self.right != *other.right {
            return Err(BimoduleError::GroupMismatch);
        }
        let n = self.size;
        Bimodule::from_fn(
            self.left.clone(),
            self.right.clone(),
            n + other.size,
            |h, m| if m < n { self.act_left(h, m) } else { n + other.act_left(h, m - n) },
            |m, g| if m < n { self.act_right(m, g) } else { n + other.act_right(m - n, g) },
        )
    }

    /// Renames element `m` to `perm[m]`.
    pub fn relabel(&self, perm: &[usize]) -> Bimodule {
        let mut inv = vec![0; self.size];
        for (m, &p) in perm.iter().enumerate() {
            inv[p] = m;
        }
        Bimodule::from_fn(
            self.left.clone(),
            self.right.clone(),
            self.size,
            |h, m| perm[self.act_left(h, inv[m])],
            |m, g| perm[self.act_right(inv[m], g)],
        )
        .expect("relabelling preserves the laws")
    }

    /// Restriction of scalars along `left: H' -> H` and `right: G' -> G`.
    pub fn pull_back(&self, left: &GroupHom, right: &GroupHom) -> Result<Bimodule, BimoduleError> {
        if **left.target() != *self.left || **right.target() != *self.right {
            return Err(BimoduleError::GroupMismatch);
        }
        Bimodule::from_fn(
            left.source().clone(),
            right.source().clone(),
            self.size,
            |h, m| self.act_left(left.apply(h), m),
            |m, g| self.act_right(m, right.apply(g)),
        )
    }
}

/// Outcome of the atlas-bimodule test: nonempty, left free and transitive,
/// right free. Witnesses are `(h, m)` with `h·m = m`, `(m0, m)` with `m`
/// outside the orbit of `m0`, and `(m, g)` with `m·g = m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtlasBimoduleReport {
    pub nonempty: bool,
    pub left_free: bool,
    pub left_transitive: bool,
    pub right_free: bool,
    pub left_free_witness: Option<(Elem, usize)>,
    pub left_transitive_witness: Option<(usize, usize)>,
    pub right_free_witness: Option<(usize, Elem)>,
}

impl AtlasBimoduleReport {
    pub fn all(&self) -> bool {
        self.nonempty && self.left_free && self.left_transitive && self.right_free
    }
}

impl fmt::Display for AtlasBimoduleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.nonempty {
            parts.push("empty carrier".to_string());
        }
        if let Some((h, m)) = self.left_free_witness {
            parts.push(format!("left not free: h{h} fixes {m}"));
        }
        if let Some((a, b)) = self.left_transitive_witness {
            parts.push(format!("left not transitive: {b} not in the orbit of {a}"));
        }
        if let Some((m, g)) = self.right_free_witness {
            parts.push(format!("right not free: g{g} fixes {m}"));
        }
        if parts.is_empty() {
            write!(f, "atlas bimodule")
        } else {
            write!(f, "{}", parts.join("; "))
        }
    }
}

/// `N ⊗_H M` with its class map. Class ids follow the order of their least
/// pair `(y, x)`.
#[derive(Debug, Clone)]
pub struct TensorProduct {
    pub module: Bimodule,
    class_of: Vec<usize>,
    reps: Vec<(usize, usize)>,
    inner: usize,
}

impl TensorProduct {
    #[inline]
    pub fn class(&self, y: usize, x: usize) -> usize {
        self.class_of[y * self.inner + x]
    }

    pub fn representative(&self, c: usize) -> (usize, usize) {
        self.reps[c]
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn members(&self, c: usize) -> Vec<(usize, usize)> {
        (0..self.class_of.len())
            .filter(|&i| self.class_of[i] == c)
            .map(|i| (i / self.inner, i % self.inner))
            .collect()
    }
}

/// Tensor product of `n: H ⟶̸ K` and `m: G ⟶̸ H` over `H`.
pub fn tensor(n: &Bimodule, m: &Bimodule) -> Result<TensorProduct, BimoduleError> {
    if *n.right != *m.left {
        return Err(BimoduleError::MiddleGroupMismatch);
    }
    let inner = m.size;
    let mut uf = UnionFind::new(n.size * inner);
    for y in 0..n.size {
        for x in 0..inner {
            for h in n.right.elements() {
                uf.union(n.act_right(y, h) * inner + x, y * inner + m.act_left(h, x));
            }
        }
    }
    let (class_of, rep_idx) = uf.classes();
    let reps: Vec<(usize, usize)> = rep_idx.iter().map(|&i| (i / inner.max(1), i % inner.max(1))).collect();
    let module = Bimodule::from_fn(
        n.left.clone(),
        m.right.clone(),
        reps.len(),
        |k, c| {
            let (y, x) = reps[c];
            class_of[n.act_left(k, y) * inner + x]
        },
        |c, g| {
            let (y, x) = reps[c];
            class_of[y * inner + m.act_right(x, g)]
        },
    )
    .or_else(|_| {
        // inputs violating the laws still get a carrier so verifiers can report
        let mut la = Vec::new();
        for k in n.left.elements() {
            la.extend(reps.iter().map(|&(y, x)| class_of[n.act_left(k, y) * inner + x]));
        }
        let mut ra = Vec::new();
        for &(y, x) in &reps {
            ra.extend(m.right.elements().map(|g| class_of[y * inner + m.act_right(x, g)]));
        }
        Bimodule::new_unchecked(n.left.clone(), m.right.clone(), reps.len(), la, ra)
    })?;
    Ok(TensorProduct { module, class_of, reps, inner })
}

/// The homomorphism `ψ` with `base·g = ψ(g)·base`.
pub fn extract_hom(b: &Bimodule, base: usize) -> Result<GroupHom, BimoduleError> {
    let report = b.classify();
    if !(report.nonempty && report.left_free && report.left_transitive) || base >= b.size {
        return Err(BimoduleError::NotTorsor(report));
    }
    let map: Vec<Elem> = b
        .right
        .elements()
        .map(|g| b.left_divide(b.act_right(base, g), base).expect("left action is transitive"))
        .collect();
    GroupHom::new(b.right.clone(), b.left.clone(), map).map_err(|_| BimoduleError::NotTorsor(report))
}

/// `Λ_m` with `m·g = Λ_m(g)·m`, for an atlas bimodule.
pub fn induced_hom(b: &Bimodule, m: usize) -> Result<GroupHom, BimoduleError> {
    let report = b.classify();
    if !report.all() {
        return Err(BimoduleError::NotAtlasBimodule(report));
    }
    let hom = extract_hom(b, m)?;
    let kernel = hom.kernel();
    if let Some(&k) = kernel.elements().iter().find(|&&k| k != b.right.identity()) {
        return Err(BimoduleError::NonInjective { kernel_element: k });
    }
    Ok(hom)
}

/// Carrier `H`, left multiplication, right action `h·g = h φ(g)`.
pub fn hom_to_bimodule(phi: &GroupHom) -> Bimodule {
    let h = phi.target().clone();
    Bimodule::from_fn(h.clone(), phi.source().clone(), h.order(), |k, x| h.mul(k, x), |x, g| h.mul(x, phi.apply(g)))
        .expect("bimodule of a homomorphism")
}

/// Pointwise check of a candidate map between bimodules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapReport {
    pub total: bool,
    pub left_witness: Option<(Elem, usize)>,
    pub right_witness: Option<(usize, Elem)>,
    pub bijective: bool,
}

impl MapReport {
    pub fn equivariant(&self) -> bool {
        self.total && self.left_witness.is_none() && self.right_witness.is_none()
    }
}

impl fmt::Display for MapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.total {
            return write!(f, "map is not total on the source");
        }
        if let Some((h, m)) = self.left_witness {
            return write!(f, "f(h{h}.{m}) != h{h}.f({m})");
        }
        if let Some((m, g)) = self.right_witness {
            return write!(f, "f({m}.g{g}) != f({m}).g{g}");
        }
        write!(f, "equivariant{}", if self.bijective { ", bijective" } else { "" })
    }
}

pub fn check_bimodule_map(map: &[usize], source: &Bimodule, target: &Bimodule) -> Result<MapReport, BimoduleError> {
    if *source.left != *target.left || *source.right != *target.right {
        return Err(BimoduleError::GroupMismatch);
    }
    let total = map.len() == source.size && map.iter().all(|&v| v < target.size);
    let mut r = MapReport { total, left_witness: None, right_witness: None, bijective: false };
    if !total {
        return Ok(r);
    }
    'l: for h in source.left.elements() {
        for m in 0..source.size {
            if map[source.act_left(h, m)] != target.act_left(h, map[m]) {
                r.left_witness = Some((h, m));
                break 'l;
            }
        }
    }
    'r: for m in 0..source.size {
        for g in source.right.elements() {
            if map[source.act_right(m, g)] != target.act_right(map[m], g) {
                r.right_witness = Some((m, g));
                break 'r;
            }
        }
    }
    let mut hit = vec![false; target.size];
    for &v in map {
        hit[v] = true;
    }
    r.bijective = source.size == target.size && hit.iter().all(|&b| b);
    Ok(r)
}

/// An equivariant map between bimodules with the same outer groups.
#[derive(Debug, Clone)]
pub struct BimoduleMap {
    pub source: Bimodule,
    pub target: Bimodule,
    pub map: Vec<usize>,
}

impl BimoduleMap {
    pub fn new(source: Bimodule, target: Bimodule, map: Vec<usize>) -> Result<Self, BimoduleError> {
        let r = check_bimodule_map(&map, &source, &target)?;
        if !r.equivariant() {
            return Err(BimoduleError::NotEquivariant(r));
        }
        Ok(BimoduleMap { source, target, map })
    }

    pub fn is_isomorphism(&self) -> bool {
        check_bimodule_map(&self.map, &self.source, &self.target).map(|r| r.bijective).unwrap_or(false)
    }
}

/// All bijections `f` with `f(h·m·g) = L(h)·f(m)·R(g)`, found by fixing the
/// image of the least unassigned element and propagating over its orbit.
pub fn isomorphisms_along(
    m: &Bimodule,
    n: &Bimodule,
    left: &GroupHom,
    right: &GroupHom,
    limit: Option<usize>,
) -> Result<Vec<Vec<usize>>, BimoduleError> {
    if m.size > ISOMORPHISM_SIZE_BOUND || n.size > ISOMORPHISM_SIZE_BOUND {
        return Err(BimoduleError::SizeBoundExceeded { size: m.size.max(n.size), bound: ISOMORPHISM_SIZE_BOUND });
    }
    if **left.source() != *m.left || **left.target() != *n.left || **right.source() != *m.right || **right.target() != *n.right
    {
        return Err(BimoduleError::GroupMismatch);
    }
    let mut out = Vec::new();
    if m.size != n.size {
        return Ok(out);
    }
    let lgens = m.left.generators();
    let rgens = m.right.generators();

    // Assign f(start) = image and propagate; None on conflict.
    let propagate = |f: &mut Vec<usize>, used: &mut Vec<bool>, start: usize, image: usize| -> bool {
        let mut queue = VecDeque::new();
        if used[image] {
            return false;
        }
        f[start] = image;
        used[image] = true;
        queue.push_back(start);
        while let Some(x) = queue.pop_front() {
            let fx = f[x];
            let steps = lgens
                .iter()
                .map(|&h| (m.act_left(h, x), n.act_left(left.apply(h), fx)))
                .chain(rgens.iter().map(|&g| (m.act_right(x, g), n.act_right(fx, right.apply(g)))));
            for (y, fy) in steps.collect::<Vec<_>>() {
                if f[y] == usize::MAX {
                    if used[fy] {
                        return false;
                    }
                    f[y] = fy;
                    used[fy] = true;
                    queue.push_back(y);
                } else if f[y] != fy {
                    return false;
                }
            }
        }
        true
    };

    fn rec(
        f: Vec<usize>,
        used: Vec<bool>,
        n_size: usize,
        limit: Option<usize>,
        out: &mut Vec<Vec<usize>>,
        propagate: &dyn Fn(&mut Vec<usize>, &mut Vec<bool>, usize, usize) -> bool,
    ) {
        if limit.is_some_and(|l| out.len() >= l) {
            return;
        }
        let Some(start) = f.iter().position(|&v| v == usize::MAX) else {
            out.push(f);
            return;
        };
        for image in 0..n_size {
            if used[image] {
                continue;
            }
            let (mut f2, mut used2) = (f.clone(), used.clone());
            if propagate(&mut f2, &mut used2, start, image) {
                rec(f2, used2, n_size, limit, out, propagate);
            }
        }
    }

    rec(vec![usize::MAX; m.size], vec![false; n.size], n.size, limit, &mut out, &propagate);
    // propagation along generators only; confirm full equivariance
    out.retain(|f| {
        m.left.elements().all(|h| (0..m.size).all(|x| f[m.act_left(h, x)] == n.act_left(left.apply(h), f[x])))
            && (0..m.size).all(|x| m.right.elements().all(|g| f[m.act_right(x, g)] == n.act_right(f[x], right.apply(g))))
    });
    Ok(out)
}

pub fn find_isomorphism(m: &Bimodule, n: &Bimodule) -> Result<Option<BimoduleMap>, BimoduleError> {
    if *m.left != *n.left || *m.right != *n.right {
        return Err(BimoduleError::GroupMismatch);
    }
    let found = isomorphisms_along(m, n, &GroupHom::identity(&m.left), &GroupHom::identity(&m.right), Some(1))?;
    Ok(found.into_iter().next().map(|map| BimoduleMap { source: m.clone(), target: n.clone(), map }))
}

/// `H ⊗_H M -> M`, `[h, x] ↦ h·x`.
pub fn left_unitor(m: &Bimodule) -> BimoduleMap {
    let t = tensor(&Bimodule::regular(&m.left), m).expect("unit tensor");
    let map = (0..t.len()).map(|c| {
        let (h, x) = t.representative(c);
        m.act_left(h, x)
    });
    BimoduleMap::new(t.module.clone(), m.clone(), map.collect()).expect("left unitor is equivariant")
}

/// `M ⊗_G G -> M`, `[x, g] ↦ x·g`.
pub fn right_unitor(m: &Bimodule) -> BimoduleMap {
    let t = tensor(m, &Bimodule::regular(&m.right)).expect("unit tensor");
    let map = (0..t.len()).map(|c| {
        let (x, g) = t.representative(c);
        m.act_right(x, g)
    });
    BimoduleMap::new(t.module.clone(), m.clone(), map.collect()).expect("right unitor is equivariant")
}

/// `(P ⊗ N) ⊗ M -> P ⊗ (N ⊗ M)`, `[[p, n], x] ↦ [p, [n, x]]`.
pub fn associator(p: &Bimodule, n: &Bimodule, m: &Bimodule) -> Result<BimoduleMap, BimoduleError> {
    let pn = tensor(p, n)?;
    let nm = tensor(n, m)?;
    let left = tensor(&pn.module, m)?;
    let right = tensor(p, &nm.module)?;
    let map = (0..left.len())
        .map(|c| {
            let (pn_class, x) = left.representative(c);
            let (a, b) = pn.representative(pn_class);
            right.class(a, nm.class(b, x))
        })
        .collect();
    BimoduleMap::new(left.module.clone(), right.module.clone(), map)
}

/// Failures of a pairwise composition cell `outer × inner -> target`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellReport {
    /// `(ν, λ)` where the cell is undefined.
    pub undefined: Option<(usize, usize)>,
    /// `(ν, h, λ)` with `c(ν·h, λ) != c(ν, h·λ)`.
    pub unbalanced: Option<(usize, Elem, usize)>,
    /// `(k, ν, λ)` with `c(k·ν, λ) != k·c(ν, λ)`.
    pub left: Option<(Elem, usize, usize)>,
    /// `(ν, λ, g)` with `c(ν, λ·g) != c(ν, λ)·g`.
    pub right: Option<(usize, usize, Elem)>,
    /// Failure of bijectivity on tensor classes.
    pub not_iso: Option<String>,
}

impl CellReport {
    pub fn balanced_witness(&self) -> Option<String> {
        if let Some((n, l)) = self.undefined {
            return Some(format!("cell undefined at ({n}, {l})"));
        }
        self.unbalanced.map(|(n, h, l)| format!("c({n}.h{h}, {l}) != c({n}, h{h}.{l})"))
    }

    pub fn equivariance_witness(&self) -> Option<String> {
        if let Some((k, n, l)) = self.left {
            return Some(format!("c(k{k}.{n}, {l}) != k{k}.c({n}, {l})"));
        }
        self.right.map(|(n, l, g)| format!("c({n}, {l}.g{g}) != c({n}, {l}).g{g}"))
    }

    pub fn ok(&self) -> bool {
        *self == CellReport::default()
    }
}

/// Checks that `cell` is balanced, bi-equivariant and induces a bijection
/// `outer ⊗ inner -> target`.
pub fn check_cell(
    outer: &Bimodule,
    inner: &Bimodule,
    target: &Bimodule,
    cell: &dyn Fn(usize, usize) -> Option<usize>,
) -> CellReport {
    let mut r = CellReport::default();
    let mut table = vec![usize::MAX; outer.size * inner.size];
    for n in 0..outer.size {
        for l in 0..inner.size {
            match cell(n, l) {
                Some(v) if v < target.size => table[n * inner.size + l] = v,
                _ => {
                    r.undefined = Some((n, l));
                    return r;
                }
            }
        }
    }
    let c = |n: usize, l: usize| table[n * inner.size + l];
    if *outer.right != *inner.left {
        r.not_iso = Some("middle groups differ".into());
        return r;
    }
    'b: for n in 0..outer.size {
        for h in outer.right.elements() {
            for l in 0..inner.size {
                if c(outer.act_right(n, h), l) != c(n, inner.act_left(h, l)) {
                    r.unbalanced = Some((n, h, l));
                    break 'b;
                }
            }
        }
    }
    'l: for k in outer.left.elements() {
        for n in 0..outer.size {
            for l in 0..inner.size {
                if c(outer.act_left(k, n), l) != target.act_left(k, c(n, l)) {
                    r.left = Some((k, n, l));
                    break 'l;
                }
            }
        }
    }
    'r: for n in 0..outer.size {
        for l in 0..inner.size {
            for g in inner.right.elements() {
                if c(n, inner.act_right(l, g)) != target.act_right(c(n, l), g) {
                    r.right = Some((n, l, g));
                    break 'r;
                }
            }
        }
    }
    if let Ok(t) = tensor(outer, inner) {
        let mut hit: Vec<Option<usize>> = vec![None; target.size];
        for class in 0..t.len() {
            let (n, l) = t.representative(class);
            let v = c(n, l);
            if let Some(prev) = hit[v] {
                r.not_iso = Some(format!("classes of {:?} and ({n}, {l}) both map to {v}", t.representative(prev)));
                return r;
            }
            hit[v] = Some(class);
        }
        if let Some(v) = hit.iter().position(|h| h.is_none()) {
            r.not_iso = Some(format!("element {v} is not hit"));
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::FiniteGroup;
    use std::sync::Arc;

    fn z3() -> GroupRef {
        Arc::new(FiniteGroup::cyclic(3))
    }

    #[test]
    fn regular_is_atlas_bimodule() {
        assert!(Bimodule::regular(&z3()).classify().all());
    }

    #[test]
    fn point_with_nontrivial_right_group_is_not_right_free() {
        let b = Bimodule::from_fn(Arc::new(FiniteGroup::trivial()), z3(), 1, |_, m| m, |m, _| m).unwrap();
        let r = b.classify();
        assert!(!r.right_free);
        assert_eq!(r.right_free_witness, Some((0, 1)));
    }

    #[test]
    fn broken_compatibility_is_reported() {
        let g = z3();
        let mut b = Bimodule::regular(&g);
        b.set_right_entry(0, 1, 2);
        assert!(b.check_laws().is_err());
    }

    #[test]
    fn unit_tensor_matches_carrier() {
        let b = Bimodule::regular(&z3());
        let t = tensor(&b, &b).unwrap();
        assert_eq!(t.len(), 3);
        assert!(left_unitor(&b).is_isomorphism());
        assert!(right_unitor(&b).is_isomorphism());
    }

    #[test]
    fn hom_roundtrip_through_bimodule() {
        let g = z3();
        let inv = GroupHom::new(g.clone(), g.clone(), vec![0, 2, 1]).unwrap();
        let b = hom_to_bimodule(&inv);
        assert_eq!(extract_hom(&b, 0).unwrap(), inv);
        assert_eq!(induced_hom(&b, 0).unwrap(), inv);
    }

    #[test]
    fn trivial_hom_bimodule_is_not_right_free() {
        let one = Arc::new(FiniteGroup::trivial());
        let t = GroupHom::trivial(&z3(), &one);
        let b = hom_to_bimodule(&t);
        assert_eq!(b.size(), 1);
        assert!(matches!(induced_hom(&b, 0), Err(BimoduleError::NotAtlasBimodule(_))));
    }
}
