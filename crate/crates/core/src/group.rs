//! Finite groups stored as Cayley tables, together with homomorphisms,
//! subgroups and actions on finite sets.
//!
//! Elements are dense ids `0..order`. Names only exist in the document layer.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use thiserror::Error;

pub type Elem = usize;
pub type GroupRef = Arc<FiniteGroup>;

/// Default guard for brute-force automorphism enumeration.
pub const AUTOMORPHISM_ORDER_BOUND: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("empty multiplication table")]
    Empty,
    #[error("row {row} has length {len}, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("table entry ({a},{b}) = {value} is out of range")]
    OutOfRange { a: Elem, b: Elem, value: usize },
    #[error("not associative: ({a}*{b})*{c} != {a}*({b}*{c})")]
    NotAssociative { a: Elem, b: Elem, c: Elem },
    #[error("no two-sided identity")]
    NoIdentity,
    #[error("element {element} has no inverse")]
    NoInverse { element: Elem },
    #[error("map has length {len}, source order is {expected}")]
    MapLength { len: usize, expected: usize },
    #[error("map sends {at} to {value}, outside the target")]
    MapOutOfRange { at: Elem, value: usize },
    #[error("not a homomorphism: f({a}*{b}) != f({a})*f({b})")]
    NotHomomorphism { a: Elem, b: Elem },
    #[error("group order {order} exceeds the enumeration bound {bound}")]
    OrderBoundExceeded { order: usize, bound: usize },
    #[error("action table has {len} entries, expected {expected}")]
    ActionShape { len: usize, expected: usize },
    #[error("action sends ({g},{p}) to {value}, outside the set")]
    ActionOutOfRange { g: Elem, p: usize, value: usize },
    #[error("identity moves point {point}")]
    IdentityMoves { point: usize },
    #[error("not an action: ({g}*{h}).{p} != {g}.({h}.{p})")]
    NotAction { g: Elem, h: Elem, p: usize },
    #[error("generator images conflict at element {element}")]
    GeneratorConflict { element: Elem },
    #[error("generator images do not reach element {element}")]
    NotGenerating { element: Elem },
    #[error("element list is not a subgroup (witness {witness})")]
    NotSubgroup { witness: Elem },
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FiniteGroup {
    order: usize,
    table: Vec<Elem>,
    identity: Elem,
    inverse: Vec<Elem>,
}

impl fmt::Debug for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteGroup(order {}, {})", self.order, iso_label(self))
    }
}

impl FiniteGroup {
    /// Validates a square multiplication table. Checks run in the order
    /// shape, range, associativity, identity, inverses.
    pub fn from_table(rows: &[Vec<Elem>]) -> Result<Self, GroupError> {
        let n = rows.len();
        if n == 0 {
            return Err(GroupError::Empty);
        }
        let mut flat = Vec::with_capacity(n * n);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(GroupError::NotSquare { row, len: r.len(), expected: n });
            }
            flat.extend_from_slice(r);
        }
        Self::from_flat(n, flat)
    }

    pub fn from_flat(order: usize, table: Vec<Elem>) -> Result<Self, GroupError> {
        if order == 0 {
            return Err(GroupError::Empty);
        }
        if table.len() != order * order {
            return Err(GroupError::NotSquare { row: 0, len: table.len(), expected: order * order });
        }
        for a in 0..order {
            for b in 0..order {
                let v = table[a * order + b];
                if v >= order {
                    return Err(GroupError::OutOfRange { a, b, value: v });
                }
            }
        }
        let m = |a: usize, b: usize| table[a * order + b];
        for a in 0..order {
            for b in 0..order {
                let ab = m(a, b);
                for c in 0..order {
                    if m(ab, c) != m(a, m(b, c)) {
                        return Err(GroupError::NotAssociative { a, b, c });
                    }
                }
            }
        }
        let identity = (0..order)
            .find(|&e| (0..order).all(|x| m(e, x) == x && m(x, e) == x))
            .ok_or(GroupError::NoIdentity)?;
        let mut inverse = Vec::with_capacity(order);
        for g in 0..order {
            let inv = (0..order)
                .find(|&h| m(g, h) == identity && m(h, g) == identity)
                .ok_or(GroupError::NoInverse { element: g })?;
            inverse.push(inv);
        }
        Ok(FiniteGroup { order, table, identity, inverse })
    }

    /// Group generated by a set of permutations of `0..n`, listed in order of
    /// first appearance during closure. The identity permutation comes first.
    pub fn from_permutations(generators: &[Vec<usize>], n: usize) -> (Self, Vec<Vec<usize>>) {
        let id: Vec<usize> = (0..n).collect();
        let mut perms = vec![id.clone()];
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        index.insert(id, 0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for g in generators {
                let p = compose_perm(g, &perms[i]);
                if !index.contains_key(&p) {
                    index.insert(p.clone(), perms.len());
                    queue.push_back(perms.len());
                    perms.push(p);
                }
            }
        }
        let order = perms.len();
        let mut table = vec![0; order * order];
        for a in 0..order {
            for b in 0..order {
                table[a * order + b] = index[&compose_perm(&perms[a], &perms[b])];
            }
        }
        let group = Self::from_flat(order, table).expect("permutation closure is a group");
        (group, perms)
    }

    pub fn trivial() -> Self {
        FiniteGroup { order: 1, table: vec![0], identity: 0, inverse: vec![0] }
    }

    /// Z/n with element k standing for k mod n.
    pub fn cyclic(n: usize) -> Self {
        assert!(n > 0, "cyclic group of order 0");
        let table = (0..n * n).map(|i| (i / n + i % n) % n).collect();
        Self::from_flat(n, table).expect("cyclic table")
    }

    /// Z/2 x Z/2 with elements e, a, b, c = ab.
    pub fn klein4() -> Self {
        Self::direct_product(&Self::cyclic(2), &Self::cyclic(2))
    }

    /// Pair (a, b) has id `a * |B| + b`.
    pub fn direct_product(a: &FiniteGroup, b: &FiniteGroup) -> Self {
        let (na, nb) = (a.order, b.order);
        let n = na * nb;
        let mut table = vec![0; n * n];
        for x in 0..n {
            for y in 0..n {
                let (xa, xb) = (x / nb, x % nb);
                let (ya, yb) = (y / nb, y % nb);
                table[x * n + y] = a.mul(xa, ya) * nb + b.mul(xb, yb);
            }
        }
        Self::from_flat(n, table).expect("product table")
    }

    /// Dihedral group of order 2n; r^k s^f has id `k + n*f`.
    pub fn dihedral(n: usize) -> Self {
        assert!(n > 0);
        let order = 2 * n;
        let mut table = vec![0; order * order];
        for x in 0..order {
            for y in 0..order {
                let (a, f) = (x % n, x / n);
                let (b, g) = (y % n, y / n);
                let k = if f == 0 { (a + b) % n } else { (a + n - b) % n };
                table[x * order + y] = k + n * ((f + g) % 2);
            }
        }
        Self::from_flat(order, table).expect("dihedral table")
    }

    /// Symmetric group on n letters, permutations in lexicographic order.
    pub fn symmetric(n: usize) -> Self {
        let mut perms = vec![(0..n).collect::<Vec<_>>()];
        loop {
            let mut p = perms.last().unwrap().clone();
            if !next_permutation(&mut p) {
                break;
            }
            perms.push(p);
        }
        let index: HashMap<Vec<usize>, usize> =
            perms.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let order = perms.len();
        let mut table = vec![0; order * order];
        for a in 0..order {
            for b in 0..order {
                table[a * order + b] = index[&compose_perm(&perms[a], &perms[b])];
            }
        }
        Self::from_flat(order, table).expect("symmetric table")
    }

    /// Quaternion group; id `2*u + s` for unit u in (1,i,j,k) and sign s.
    pub fn quaternion() -> Self {
        // unit products as (unit, negated)
        const UNIT: [[(usize, bool); 4]; 4] = [
            [(0, false), (1, false), (2, false), (3, false)],
            [(1, false), (0, true), (3, false), (2, true)],
            [(2, false), (3, true), (0, true), (1, false)],
            [(3, false), (2, false), (1, true), (0, true)],
        ];
        let mut table = vec![0; 64];
        for x in 0..8 {
            for y in 0..8 {
                let (u, s) = (x / 2, x % 2 == 1);
                let (v, t) = (y / 2, y % 2 == 1);
                let (w, neg) = UNIT[u][v];
                table[x * 8 + y] = 2 * w + usize::from(s ^ t ^ neg);
            }
        }
        Self::from_flat(8, table).expect("quaternion table")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> Elem {
        self.identity
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        self.table[a * self.order + b]
    }

    #[inline]
    pub fn inv(&self, a: Elem) -> Elem {
        self.inverse[a]
    }

    pub fn elements(&self) -> Range<Elem> {
        0..self.order
    }

    pub fn table(&self) -> &[Elem] {
        &self.table
    }

    pub fn rows(&self) -> Vec<Vec<Elem>> {
        self.table.chunks(self.order).map(|r| r.to_vec()).collect()
    }

    /// h g h⁻¹
    pub fn conj(&self, h: Elem, g: Elem) -> Elem {
        self.mul(self.mul(h, g), self.inv(h))
    }

    pub fn pow(&self, g: Elem, k: usize) -> Elem {
        (0..k).fold(self.identity, |acc, _| self.mul(acc, g))
    }

    pub fn element_order(&self, g: Elem) -> usize {
        let mut x = g;
        let mut k = 1;
        while x != self.identity {
            x = self.mul(x, g);
            k += 1;
        }
        k
    }

    pub fn is_abelian(&self) -> bool {
        self.elements().all(|a| self.elements().all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    /// Greedy generating set: each generator is the least element outside
    /// the subgroup generated so far.
    pub fn generators(&self) -> Vec<Elem> {
        let mut gens = Vec::new();
        let mut reached = vec![false; self.order];
        reached[self.identity] = true;
        while let Some(g) = (0..self.order).find(|&g| !reached[g]) {
            gens.push(g);
            let mut members: Vec<Elem> = (0..self.order).filter(|&x| reached[x]).collect();
            let mut i = 0;
            while i < members.len() {
                let x = members[i];
                for &s in &gens {
                    let y = self.mul(x, s);
                    if !reached[y] {
                        reached[y] = true;
                        members.push(y);
                    }
                }
                i += 1;
            }
        }
        gens
    }
}

fn compose_perm(p: &[usize], q: &[usize]) -> Vec<usize> {
    q.iter().map(|&x| p[x]).collect()
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// All groups of order at most 8 up to isomorphism, with display labels.
pub fn small_groups() -> Vec<(&'static str, FiniteGroup)> {
    let c = FiniteGroup::cyclic;
    vec![
        ("1", FiniteGroup::trivial()),
        ("Z/2", c(2)),
        ("Z/3", c(3)),
        ("Z/4", c(4)),
        ("Z/2xZ/2", FiniteGroup::klein4()),
        ("Z/5", c(5)),
        ("Z/6", c(6)),
        ("S3", FiniteGroup::dihedral(3)),
        ("Z/7", c(7)),
        ("Z/8", c(8)),
        ("Z/4xZ/2", FiniteGroup::direct_product(&c(4), &c(2))),
        ("Z/2xZ/2xZ/2", FiniteGroup::direct_product(&FiniteGroup::klein4(), &c(2))),
        ("D4", FiniteGroup::dihedral(4)),
        ("Q8", FiniteGroup::quaternion()),
    ]
}

/// Isomorphism-class label: a catalog name up to order 8, otherwise the
/// order together with the sorted multiset of element orders.
pub fn iso_label(g: &FiniteGroup) -> String {
    if g.order() <= 8 {
        let gr = Arc::new(g.clone());
        for (name, h) in small_groups() {
            if h.order() == g.order() && find_group_isomorphism(&gr, &Arc::new(h)).is_some() {
                return name.to_string();
            }
        }
    }
    let mut orders: Vec<usize> = g.elements().map(|x| g.element_order(x)).collect();
    orders.sort_unstable();
    format!("order-{}{:?}", g.order(), orders)
}

#[derive(Clone, PartialEq, Eq)]
pub struct GroupHom {
    source: GroupRef,
    target: GroupRef,
    map: Vec<Elem>,
}

impl fmt::Debug for GroupHom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupHom{:?}", self.map)
    }
}

impl GroupHom {
    pub fn new(source: GroupRef, target: GroupRef, map: Vec<Elem>) -> Result<Self, GroupError> {
        if map.len() != source.order() {
            return Err(GroupError::MapLength { len: map.len(), expected: source.order() });
        }
        if let Some((at, &value)) = map.iter().enumerate().find(|(_, &v)| v >= target.order()) {
            return Err(GroupError::MapOutOfRange { at, value });
        }
        for a in source.elements() {
            for b in source.elements() {
                if map[source.mul(a, b)] != target.mul(map[a], map[b]) {
                    return Err(GroupError::NotHomomorphism { a, b });
                }
            }
        }
        Ok(GroupHom { source, target, map })
    }

    pub fn identity(g: &GroupRef) -> Self {
        GroupHom { source: g.clone(), target: g.clone(), map: g.elements().collect() }
    }

    pub fn trivial(source: &GroupRef, target: &GroupRef) -> Self {
        GroupHom {
            source: source.clone(),
            target: target.clone(),
            map: vec![target.identity(); source.order()],
        }
    }

    pub fn source(&self) -> &GroupRef {
        &self.source
    }

    pub fn target(&self) -> &GroupRef {
        &self.target
    }

    pub fn map(&self) -> &[Elem] {
        &self.map
    }

    #[inline]
    pub fn apply(&self, g: Elem) -> Elem {
        self.map[g]
    }

    pub fn kernel(&self) -> Subgroup {
        let e = self.target.identity();
        Subgroup { elements: self.source.elements().filter(|&g| self.map[g] == e).collect() }
    }

    pub fn image(&self) -> Subgroup {
        let mut v = self.map.clone();
        v.sort_unstable();
        v.dedup();
        Subgroup { elements: v }
    }

    pub fn is_injective(&self) -> bool {
        self.kernel().order() == 1
    }

    pub fn is_surjective(&self) -> bool {
        self.image().order() == self.target.order()
    }

    pub fn is_bijective(&self) -> bool {
        self.is_injective() && self.is_surjective()
    }

    /// `self ∘ inner`
    pub fn compose(&self, inner: &GroupHom) -> GroupHom {
        assert_eq!(*inner.target, *self.source, "hom composition over different groups");
        GroupHom {
            source: inner.source.clone(),
            target: self.target.clone(),
            map: inner.map.iter().map(|&x| self.map[x]).collect(),
        }
    }

    /// x ↦ h f(x) h⁻¹
    pub fn conjugated(&self, h: Elem) -> GroupHom {
        GroupHom {
            source: self.source.clone(),
            target: self.target.clone(),
            map: self.map.iter().map(|&y| self.target.conj(h, y)).collect(),
        }
    }

    pub fn inverse(&self) -> Option<GroupHom> {
        if !self.is_bijective() {
            return None;
        }
        let mut inv = vec![0; self.map.len()];
        for (x, &y) in self.map.iter().enumerate() {
            inv[y] = x;
        }
        Some(GroupHom { source: self.target.clone(), target: self.source.clone(), map: inv })
    }
}

/// Sorted element ids of an ambient group.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subgroup {
    elements: Vec<Elem>,
}

impl Subgroup {
    pub fn new(group: &FiniteGroup, mut elements: Vec<Elem>) -> Result<Self, GroupError> {
        elements.sort_unstable();
        elements.dedup();
        if let Some(&w) = elements.iter().find(|&&x| x >= group.order()) {
            return Err(GroupError::NotSubgroup { witness: w });
        }
        if elements.binary_search(&group.identity()).is_err() {
            return Err(GroupError::NotSubgroup { witness: group.identity() });
        }
        for &a in &elements {
            if elements.binary_search(&group.inv(a)).is_err() {
                return Err(GroupError::NotSubgroup { witness: a });
            }
            for &b in &elements {
                if elements.binary_search(&group.mul(a, b)).is_err() {
                    return Err(GroupError::NotSubgroup { witness: group.mul(a, b) });
                }
            }
        }
        Ok(Subgroup { elements })
    }

    pub fn whole(group: &FiniteGroup) -> Self {
        Subgroup { elements: group.elements().collect() }
    }

    pub fn elements(&self) -> &[Elem] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, g: Elem) -> bool {
        self.elements.binary_search(&g).is_ok()
    }

    /// First `(g, k)` with `g k g⁻¹` outside the subgroup.
    pub fn normality_witness(&self, group: &FiniteGroup) -> Option<(Elem, Elem)> {
        for g in group.elements() {
            for &k in &self.elements {
                if !self.contains(group.conj(g, k)) {
                    return Some((g, k));
                }
            }
        }
        None
    }

    pub fn is_normal(&self, group: &FiniteGroup) -> bool {
        self.normality_witness(group).is_none()
    }
}

/// Backtracking search over maps `source -> target`, assigning images in
/// element order and pruning as soon as a multiplicative constraint among
/// assigned elements fails.
fn search_homs(
    source: &FiniteGroup,
    target: &FiniteGroup,
    bijective: bool,
    limit: Option<usize>,
) -> Vec<Vec<Elem>> {
    let n = source.order();
    if bijective && n != target.order() {
        return Vec::new();
    }
    // constraints (a, b) checked once the largest of a, b, ab is assigned
    let mut checks: Vec<Vec<(Elem, Elem)>> = vec![Vec::new(); n];
    for a in 0..n {
        for b in 0..n {
            let top = a.max(b).max(source.mul(a, b));
            checks[top].push((a, b));
        }
    }
    let src_orders: Vec<usize> = (0..n).map(|g| source.element_order(g)).collect();
    let tgt_orders: Vec<usize> = target.elements().map(|g| target.element_order(g)).collect();
    let mut out = Vec::new();
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; target.order()];

    #[allow(clippy::too_many_arguments)]
    fn rec(
        k: usize,
        source: &FiniteGroup,
        target: &FiniteGroup,
        bijective: bool,
        limit: Option<usize>,
        checks: &[Vec<(Elem, Elem)>],
        src_orders: &[usize],
        tgt_orders: &[usize],
        map: &mut Vec<Elem>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<Elem>>,
    ) {
        if limit.is_some_and(|l| out.len() >= l) {
            return;
        }
        if k == source.order() {
            out.push(map.clone());
            return;
        }
        let candidates: Vec<Elem> = if k == source.identity() {
            vec![target.identity()]
        } else {
            target.elements().collect()
        };
        for c in candidates {
            if bijective && (used[c] || tgt_orders[c] != src_orders[k]) {
                continue;
            }
            if !bijective && src_orders[k] % tgt_orders[c] != 0 {
                continue;
            }
            map[k] = c;
            let ok = checks[k]
                .iter()
                .all(|&(a, b)| map[source.mul(a, b)] == target.mul(map[a], map[b]));
            if ok {
                used[c] = true;
                rec(k + 1, source, target, bijective, limit, checks, src_orders, tgt_orders, map, used, out);
                used[c] = false;
            }
            map[k] = usize::MAX;
        }
    }

    rec(0, source, target, bijective, limit, &checks, &src_orders, &tgt_orders, &mut map, &mut used, &mut out);
    out
}

/// All homomorphisms `source -> target`, maps in lexicographic order.
pub fn homomorphisms(source: &GroupRef, target: &GroupRef) -> Vec<GroupHom> {
    search_homs(source, target, false, None)
        .into_iter()
        .map(|map| GroupHom { source: source.clone(), target: target.clone(), map })
        .collect()
}

/// All isomorphisms `a -> b`.
pub fn isomorphisms(a: &GroupRef, b: &GroupRef) -> Vec<GroupHom> {
    search_homs(a, b, true, None)
        .into_iter()
        .map(|map| GroupHom { source: a.clone(), target: b.clone(), map })
        .collect()
}

pub fn find_group_isomorphism(a: &GroupRef, b: &GroupRef) -> Option<GroupHom> {
    search_homs(a, b, true, Some(1))
        .into_iter()
        .next()
        .map(|map| GroupHom { source: a.clone(), target: b.clone(), map })
}

/// All automorphisms of `g`, refusing groups larger than `bound`.
pub fn enumerate_automorphisms(g: &GroupRef, bound: usize) -> Result<Vec<GroupHom>, GroupError> {
    if g.order() > bound {
        return Err(GroupError::OrderBoundExceeded { order: g.order(), bound });
    }
    Ok(isomorphisms(g, g))
}

/// Action of a group on `0..set_size`; row `g` of the table is the
/// permutation by which `g` acts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAction {
    group: GroupRef,
    set_size: usize,
    act: Vec<usize>,
}

/// Image of an action in the permutations of the set.
#[derive(Debug, Clone)]
pub struct ReducedImage {
    pub group: GroupRef,
    pub quotient: GroupHom,
    pub action: GroupAction,
}

impl GroupAction {
    pub fn new(group: GroupRef, set_size: usize, act: Vec<usize>) -> Result<Self, GroupError> {
        let expected = group.order() * set_size;
        if act.len() != expected {
            return Err(GroupError::ActionShape { len: act.len(), expected });
        }
        for g in group.elements() {
            for p in 0..set_size {
                let v = act[g * set_size + p];
                if v >= set_size {
                    return Err(GroupError::ActionOutOfRange { g, p, value: v });
                }
            }
        }
        let a = GroupAction { group, set_size, act };
        a.check_laws()?;
        Ok(a)
    }

    pub fn check_laws(&self) -> Result<(), GroupError> {
        let e = self.group.identity();
        for p in 0..self.set_size {
            if self.apply(e, p) != p {
                return Err(GroupError::IdentityMoves { point: p });
            }
        }
        for g in self.group.elements() {
            for h in self.group.elements() {
                for p in 0..self.set_size {
                    if self.apply(self.group.mul(g, h), p) != self.apply(g, self.apply(h, p)) {
                        return Err(GroupError::NotAction { g, h, p });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn trivial(group: GroupRef, set_size: usize) -> Self {
        let act = (0..group.order() * set_size).map(|i| i % set_size.max(1)).collect();
        GroupAction { group, set_size, act }
    }

    /// Left multiplication of the group on itself.
    pub fn regular(group: GroupRef) -> Self {
        let act = group.table().to_vec();
        let n = group.order();
        GroupAction { group, set_size: n, act }
    }

    /// Expands images of a few elements to the whole group by closing under
    /// products. Conflicting products and unreached elements are errors.
    pub fn from_generator_images(
        group: GroupRef,
        set_size: usize,
        images: &[(Elem, Vec<usize>)],
    ) -> Result<Self, GroupError> {
        let n = group.order();
        let mut known: Vec<Option<Vec<usize>>> = vec![None; n];
        known[group.identity()] = Some((0..set_size).collect());
        for (g, perm) in images {
            if perm.len() != set_size {
                return Err(GroupError::ActionShape { len: perm.len(), expected: set_size });
            }
            if let Some(&v) = perm.iter().find(|&&v| v >= set_size) {
                return Err(GroupError::ActionOutOfRange { g: *g, p: 0, value: v });
            }
            match &known[*g] {
                Some(p) if p != perm => return Err(GroupError::GeneratorConflict { element: *g }),
                _ => known[*g] = Some(perm.clone()),
            }
        }
        let gens: Vec<Elem> = images.iter().map(|(g, _)| *g).collect();
        let mut queue: VecDeque<Elem> = (0..n).filter(|&g| known[g].is_some()).collect();
        while let Some(a) = queue.pop_front() {
            for &s in &gens {
                let prod = group.mul(s, a);
                let perm = compose_perm(known[s].as_ref().unwrap(), known[a].as_ref().unwrap());
                match &known[prod] {
                    Some(p) if *p != perm => return Err(GroupError::GeneratorConflict { element: prod }),
                    Some(_) => {}
                    None => {
                        known[prod] = Some(perm);
                        queue.push_back(prod);
                    }
                }
            }
        }
        let mut act = Vec::with_capacity(n * set_size);
        for (g, p) in known.into_iter().enumerate() {
            act.extend(p.ok_or(GroupError::NotGenerating { element: g })?);
        }
        GroupAction::new(group, set_size, act)
    }

    pub fn group(&self) -> &GroupRef {
        &self.group
    }

    pub fn set_size(&self) -> usize {
        self.set_size
    }

    #[inline]
    pub fn apply(&self, g: Elem, p: usize) -> usize {
        self.act[g * self.set_size + p]
    }

    /// Flat table `act[g * n + x]`.
    pub fn table(&self) -> &[usize] {
        &self.act
    }

    pub fn permutation(&self, g: Elem) -> &[usize] {
        &self.act[g * self.set_size..(g + 1) * self.set_size]
    }

    pub fn orbit(&self, p: usize) -> Vec<usize> {
        let mut o: Vec<usize> = self.group.elements().map(|g| self.apply(g, p)).collect();
        o.sort_unstable();
        o.dedup();
        o
    }

    /// Orbits sorted by least element.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.set_size];
        let mut out = Vec::new();
        for p in 0..self.set_size {
            if !seen[p] {
                let o = self.orbit(p);
                for &q in &o {
                    seen[q] = true;
                }
                out.push(o);
            }
        }
        out
    }

    pub fn stabilizer(&self, p: usize) -> Subgroup {
        Subgroup { elements: self.group.elements().filter(|&g| self.apply(g, p) == p).collect() }
    }

    /// Pointwise stabilizer of the whole set.
    pub fn kernel(&self) -> Subgroup {
        Subgroup {
            elements: self
                .group
                .elements()
                .filter(|&g| (0..self.set_size).all(|p| self.apply(g, p) == p))
                .collect(),
        }
    }

    pub fn is_effective(&self) -> bool {
        self.kernel().order() == 1
    }

    /// The permutation group G^red with the quotient G -> G^red and its
    /// (faithful) action on the same set.
    pub fn reduced_image(&self) -> ReducedImage {
        let n = self.set_size;
        let mut perms: Vec<Vec<usize>> = Vec::new();
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut quotient = Vec::with_capacity(self.group.order());
        for g in self.group.elements() {
            let p = self.permutation(g).to_vec();
            let id = *index.entry(p.clone()).or_insert_with(|| {
                perms.push(p);
                perms.len() - 1
            });
            quotient.push(id);
        }
        let m = perms.len();
        let mut table = vec![0; m * m];
        for a in 0..m {
            for b in 0..m {
                table[a * m + b] = index[&compose_perm(&perms[a], &perms[b])];
            }
        }
        let red = Arc::new(FiniteGroup::from_flat(m, table).expect("image of an action is a group"));
        let act = perms.concat();
        ReducedImage {
            quotient: GroupHom { source: self.group.clone(), target: red.clone(), map: quotient },
            action: GroupAction { group: red.clone(), set_size: n, act },
            group: red,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(x: FiniteGroup) -> GroupRef {
        Arc::new(x)
    }

    #[test]
    fn cyclic_three_basics() {
        let z3 = FiniteGroup::cyclic(3);
        assert_eq!(z3.order(), 3);
        assert_eq!(z3.identity(), 0);
        assert_eq!(z3.inv(1), 2);
    }

    #[test]
    fn corrupted_table_reports_associativity() {
        let mut rows = FiniteGroup::cyclic(3).rows();
        rows[1][1] = 0;
        assert!(matches!(FiniteGroup::from_table(&rows), Err(GroupError::NotAssociative { .. })));
    }

    #[test]
    fn constant_table_has_no_identity() {
        let rows = vec![vec![0, 0], vec![0, 0]];
        assert_eq!(FiniteGroup::from_table(&rows), Err(GroupError::NoIdentity));
    }

    #[test]
    fn named_groups_have_expected_orders() {
        assert_eq!(FiniteGroup::dihedral(4).order(), 8);
        assert!(!FiniteGroup::dihedral(3).is_abelian());
        assert_eq!(FiniteGroup::symmetric(3).order(), 6);
        assert!(!FiniteGroup::quaternion().is_abelian());
        assert_eq!(small_groups().len(), 14);
    }

    #[test]
    fn labels_distinguish_catalog() {
        for (name, h) in small_groups() {
            assert_eq!(iso_label(&h), name);
        }
        assert_eq!(iso_label(&FiniteGroup::symmetric(3)), "S3");
    }

    #[test]
    fn generator_expansion_matches_regular_action() {
        let z3 = g(FiniteGroup::cyclic(3));
        let a = GroupAction::from_generator_images(z3.clone(), 3, &[(1, vec![1, 2, 0])]).unwrap();
        assert_eq!(a, GroupAction::regular(z3));
    }

    #[test]
    fn generator_conflict_detected() {
        let z3 = g(FiniteGroup::cyclic(3));
        let r = GroupAction::from_generator_images(z3, 3, &[(1, vec![1, 0, 2])]);
        assert!(r.is_err());
    }
}
