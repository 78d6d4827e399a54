//! JSON input documents for atlases, groupoid models and refinements.
//!
//! Names are resolved to dense indices here. Paths inside a refinement
//! document are relative to that document's directory.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlas::{Atlas, AtlasParts};
use crate::bimodule::{hom_to_bimodule, Bimodule};
use crate::equivalence::{
    compose_refinements, identity_refinement, refinement_from_groupoid, RefinementData, RefinementParts,
};
use crate::group::{Elem, FiniteGroup, GroupAction, GroupHom, GroupRef};
use crate::groupoid_model::{Cover, FiniteGroupoidModel};
use crate::satake::{Chart, SatakeLayer};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: unknown field `{field}`")]
    UnknownField { path: String, field: String },
    #[error("{path}: format_version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { path: String, found: u32 },
    #[error("{path}: expected a {expected} document, found kind `{found}`")]
    Kind { path: String, expected: &'static str, found: String },
    #[error("{path}: {message}")]
    Reference { path: String, message: String },
    #[error("{path}: {message}")]
    Build { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Strict,
    Lenient,
}

/// A loaded value with the unknown fields skipped in lenient mode.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

// ---------------------------------------------------------------- schema types

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupSpec {
    /// `trivial`, `klein4`, `quaternion`, `cyclic:n`, `dihedral:n`, `symmetric:n`.
    Named(String),
    Table { table: Vec<Vec<usize>> },
}

/// A group action on a finite set. Generator keys are element indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionSpec {
    /// `trivial` or `regular`.
    Named(String),
    Generators { generators: BTreeMap<String, Vec<usize>> },
    /// `table[g][x]`, the image of `x` under `g` (or `x·g` for right actions).
    Table { table: Vec<Vec<usize>> },
}

fn is_true(b: &bool) -> bool {
    *b
}

fn yes() -> bool {
    true
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDoc {
    pub name: String,
    pub group: String,
    pub samples: Vec<String>,
    /// Quotient point name per sample.
    pub projection: Vec<String>,
    pub action: ActionSpec,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub connected: bool,
    #[serde(default = "one")]
    pub dimension: u32,
}

/// Module tables shared by atlas embeddings and refinement modules. Either
/// `hom` (carrier the target group), or `left` and `right` on `elements`
/// (or `size`) points. Identity arrows may omit both.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModuleFields {
    pub elements: Option<Vec<String>>,
    pub size: Option<usize>,
    pub hom: Option<Vec<Elem>>,
    pub left: Option<ActionSpec>,
    pub right: Option<ActionSpec>,
    pub concrete: Option<Vec<Vec<usize>>>,
    pub tilde: Option<Vec<Vec<usize>>>,
}

// Written out rather than flattened: unknown fields inside a flattened
// struct are invisible to the strict-mode check.
macro_rules! module_doc {
    ($(#[$m:meta])* $name:ident { $($key:ident),* }) => {
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct $name {
            $(pub $key: String,)*
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hom: Option<Vec<Elem>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<ActionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<ActionSpec>,
    /// Declared concrete embeddings as sample maps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concrete: Option<Vec<Vec<usize>>>,
    /// Concrete embedding per module element, as a sample map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilde: Option<Vec<Vec<usize>>>,
        }

        impl $name {
            pub fn module(&self) -> ModuleFields {
                ModuleFields {
                    elements: self.elements.clone(),
                    size: self.size,
                    hom: self.hom.clone(),
                    left: self.left.clone(),
                    right: self.right.clone(),
                    concrete: self.concrete.clone(),
                    tilde: self.tilde.clone(),
                }
            }

            fn with_module($($key: String,)* m: ModuleFields) -> Self {
                $name {
                    $($key,)*
                    elements: m.elements,
                    size: m.size,
                    hom: m.hom,
                    left: m.left,
                    right: m.right,
                    concrete: m.concrete,
                    tilde: m.tilde,
                }
            }
        }
    };
}

module_doc!(
    /// Abstract embedding module of `source` into `target`.
    EmbeddingDoc { source, target }
);

/// `α(ν ⊗ λ)` for `ν` in the `outer` module, `λ` in the `inner` one.
/// Arrows are written `"U3->U1"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDoc {
    pub outer: String,
    pub inner: String,
    pub table: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasDoc {
    pub kind: String,
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub groups: BTreeMap<String, GroupSpec>,
    pub quotient: Vec<String>,
    pub charts: Vec<ChartDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub embeddings: Vec<EmbeddingDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub units: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrowDoc {
    pub name: String,
    pub source: String,
    pub target: String,
    pub inverse: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverChartDoc {
    pub name: String,
    pub objects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupoidDoc {
    pub kind: String,
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub objects: Vec<String>,
    /// Quotient point name per object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quotient_labels: Option<Vec<String>>,
    pub arrows: Vec<ArrowDoc>,
    /// `[g2, g1, g2 ∘ g1]` for every composable pair.
    pub compose: Vec<[String; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sheets: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub covers: BTreeMap<String, Vec<CoverChartDoc>>,
}

module_doc!(
    /// Refinement module `A_ji` of fine chart `fine` in coarse chart `coarse`.
    RefModuleDoc { fine, coarse }
);

/// `α_jii'`: rows are elements of the module of `i` in `coarse`, columns
/// elements of the fine embedding `inner = "i'->i"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RightCellDoc {
    pub coarse: String,
    pub inner: String,
    pub table: Vec<Vec<usize>>,
}

/// `α_j'ji`: rows are elements of the coarse embedding `outer = "j->j'"`,
/// columns elements of the module of `fine` in `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeftCellDoc {
    pub outer: String,
    pub fine: String,
    pub table: Vec<Vec<usize>>,
}

/// Exactly one of `identity`, `groupoid`, `compose` or the explicit
/// `fine`/`coarse` form.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RefinementDoc {
    pub kind: String,
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groupoid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_cover: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_cover: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compose: Option<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modules: Vec<RefModuleDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub right_cells: Vec<RightCellDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub left_cells: Vec<LeftCellDoc>,
}

// ---------------------------------------------------------------- parsing

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn read(path: &Path) -> Result<String, DocumentError> {
    std::fs::read_to_string(path).map_err(|source| DocumentError::Io { path: display(path), source })
}

/// Parses `text`; unknown fields are errors in strict mode and warnings
/// otherwise.
pub fn parse<T: DeserializeOwned>(path: &str, text: &str, strictness: Strictness) -> Result<Loaded<T>, DocumentError> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let parse_err = |e: serde_json::Error| DocumentError::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let value: T = serde_ignored::deserialize(&mut de, |p| unknown.push(p.to_string())).map_err(parse_err)?;
    de.end().map_err(parse_err)?;
    if strictness == Strictness::Strict {
        if let Some(field) = unknown.into_iter().next() {
            return Err(DocumentError::UnknownField { path: path.to_string(), field });
        }
        return Ok(Loaded { value, warnings: Vec::new() });
    }
    Ok(Loaded { value, warnings: unknown.into_iter().map(|f| format!("{path}: unknown field `{f}` ignored")).collect() })
}

fn check_header(path: &str, kind: &str, version: u32, expected: &'static str) -> Result<(), DocumentError> {
    if kind != expected {
        return Err(DocumentError::Kind { path: path.to_string(), expected, found: kind.to_string() });
    }
    if version != FORMAT_VERSION {
        return Err(DocumentError::Version { path: path.to_string(), found: version });
    }
    Ok(())
}

struct Ctx<'a> {
    path: &'a str,
}

impl Ctx<'_> {
    fn reference(&self, message: impl Into<String>) -> DocumentError {
        DocumentError::Reference { path: self.path.to_string(), message: message.into() }
    }

    fn build(&self, e: impl std::fmt::Display) -> DocumentError {
        DocumentError::Build { path: self.path.to_string(), message: e.to_string() }
    }

    fn lookup(&self, names: &[String], name: &str, what: &str) -> Result<usize, DocumentError> {
        names.iter().position(|n| n == name).ok_or_else(|| self.reference(format!("unknown {what} `{name}`")))
    }
}

fn named_group(spec: &str) -> Option<FiniteGroup> {
    let (head, arg) = match spec.split_once(':') {
        Some((h, a)) => (h, Some(a.trim().parse::<usize>().ok()?)),
        None => (spec, None),
    };
    match (head.trim(), arg) {
        ("trivial", None) => Some(FiniteGroup::trivial()),
        ("klein4", None) => Some(FiniteGroup::klein4()),
        ("quaternion", None) => Some(FiniteGroup::quaternion()),
        ("cyclic", Some(n)) if n >= 1 => Some(FiniteGroup::cyclic(n)),
        ("dihedral", Some(n)) if n >= 1 => Some(FiniteGroup::dihedral(n)),
        ("symmetric", Some(n)) if (1..=5).contains(&n) => Some(FiniteGroup::symmetric(n)),
        _ => None,
    }
}

fn build_group(ctx: &Ctx, name: &str, spec: &GroupSpec) -> Result<GroupRef, DocumentError> {
    let g = match spec {
        GroupSpec::Named(s) => named_group(s).ok_or_else(|| ctx.reference(format!("group {name}: unknown shorthand `{s}`")))?,
        GroupSpec::Table { table } => FiniteGroup::from_table(table).map_err(|e| ctx.build(format!("group {name}: {e}")))?,
    };
    Ok(Arc::new(g))
}

fn generator_images(ctx: &Ctx, group: &GroupRef, gens: &BTreeMap<String, Vec<usize>>) -> Result<Vec<(Elem, Vec<usize>)>, DocumentError> {
    gens.iter()
        .map(|(k, perm)| {
            let g: Elem = k.parse().map_err(|_| ctx.reference(format!("generator key `{k}` is not an element index")))?;
            if g >= group.order() {
                return Err(ctx.reference(format!("generator {g} outside a group of order {}", group.order())));
            }
            Ok((g, perm.clone()))
        })
        .collect()
}

/// Left action table `act[g * n + x]`; checked unless given as a raw table.
fn left_table(ctx: &Ctx, what: &str, group: &GroupRef, n: usize, spec: &ActionSpec) -> Result<Vec<usize>, DocumentError> {
    match spec {
        ActionSpec::Named(s) if s == "trivial" => Ok(GroupAction::trivial(group.clone(), n).table().to_vec()),
        ActionSpec::Named(s) if s == "regular" => {
            if n != group.order() {
                return Err(ctx.reference(format!("{what}: regular action needs {} points, found {n}", group.order())));
            }
            Ok(group.table().to_vec())
        }
        ActionSpec::Named(s) => Err(ctx.reference(format!("{what}: unknown action `{s}`"))),
        ActionSpec::Generators { generators } => {
            let images = generator_images(ctx, group, generators)?;
            let a = GroupAction::from_generator_images(group.clone(), n, &images).map_err(|e| ctx.build(format!("{what}: {e}")))?;
            Ok(a.table().to_vec())
        }
        ActionSpec::Table { table } => {
            if table.len() != group.order() || table.iter().any(|r| r.len() != n) {
                return Err(ctx.build(format!("{what}: action table must be {} rows of {n}", group.order())));
            }
            Ok(table.concat())
        }
    }
}

/// Right action table `act[m * |G| + g] = m·g`.
fn right_table(ctx: &Ctx, what: &str, group: &GroupRef, n: usize, spec: &ActionSpec) -> Result<Vec<usize>, DocumentError> {
    let order = group.order();
    // As a left action of g⁻¹.
    let as_left = match spec {
        ActionSpec::Named(s) if s == "regular" => {
            if n != order {
                return Err(ctx.reference(format!("{what}: regular action needs {order} points, found {n}")));
            }
            let mut t = vec![0; order * n];
            for g in group.elements() {
                for m in 0..n {
                    t[group.inv(g) * n + m] = group.mul(m, g);
                }
            }
            t
        }
        ActionSpec::Generators { generators } => {
            let images: Vec<(Elem, Vec<usize>)> =
                generator_images(ctx, group, generators)?.into_iter().map(|(g, p)| (group.inv(g), p)).collect();
            GroupAction::from_generator_images(group.clone(), n, &images)
                .map_err(|e| ctx.build(format!("{what}: {e}")))?
                .table().to_vec()
        }
        ActionSpec::Table { table } => {
            if table.len() != order || table.iter().any(|r| r.len() != n) {
                return Err(ctx.build(format!("{what}: action table must be {order} rows of {n}")));
            }
            let mut t = vec![0; order * n];
            for m in 0..n {
                for g in group.elements() {
                    t[m * order + g] = table[g][m];
                }
            }
            return Ok(t);
        }
        other => left_table(ctx, what, group, n, other)?,
    };
    let mut t = vec![0; order * n];
    for m in 0..n {
        for g in group.elements() {
            t[m * order + g] = as_left[group.inv(g) * n + m];
        }
    }
    Ok(t)
}

/// Module over `left` (target side) and `right` (source side). `None` when
/// the fields declare no module.
fn build_module(
    ctx: &Ctx,
    what: &str,
    left: &GroupRef,
    right: &GroupRef,
    f: &ModuleFields,
) -> Result<Option<Bimodule>, DocumentError> {
    if let Some(map) = &f.hom {
        let phi = GroupHom::new(right.clone(), left.clone(), map.clone()).map_err(|e| ctx.build(format!("{what}: {e}")))?;
        return Ok(Some(hom_to_bimodule(&phi)));
    }
    let (l, r) = match (&f.left, &f.right) {
        (Some(l), Some(r)) => (l, r),
        (None, None) => return Ok(None),
        _ => return Err(ctx.reference(format!("{what}: give both `left` and `right`"))),
    };
    let n = match (&f.elements, f.size) {
        (Some(e), None) => e.len(),
        (None, Some(n)) => n,
        (Some(e), Some(n)) if e.len() == n => n,
        (Some(_), Some(_)) => return Err(ctx.reference(format!("{what}: `size` disagrees with `elements`"))),
        (None, None) => return Err(ctx.reference(format!("{what}: module needs `elements` or `size`"))),
    };
    let lt = left_table(ctx, &format!("{what} left"), left, n, l)?;
    let rt = right_table(ctx, &format!("{what} right"), right, n, r)?;
    Bimodule::new_unchecked(left.clone(), right.clone(), n, lt, rt).map(Some).map_err(|e| ctx.build(format!("{what}: {e}")))
}

fn parse_arrow<'s>(ctx: &Ctx, s: &'s str) -> Result<(&'s str, &'s str), DocumentError> {
    s.split_once("->")
        .map(|(a, b)| (a.trim(), b.trim()))
        .ok_or_else(|| ctx.reference(format!("arrow `{s}` is not of the form `A->B`")))
}

fn rectangular(ctx: &Ctx, what: &str, table: &[Vec<usize>], rows: usize, cols: usize) -> Result<Vec<usize>, DocumentError> {
    if table.len() != rows || table.iter().any(|r| r.len() != cols) {
        return Err(ctx.build(format!("{what}: expected {rows} rows of {cols}")));
    }
    Ok(table.concat())
}

/// Sample maps to indices into the concrete embeddings of an arrow.
fn tilde_indices(ctx: &Ctx, what: &str, maps: &[Vec<usize>], con: &[Vec<usize>]) -> Result<Vec<usize>, DocumentError> {
    let index: HashMap<&Vec<usize>, usize> = con.iter().enumerate().map(|(k, m)| (m, k)).collect();
    maps.iter()
        .map(|m| index.get(m).copied().ok_or_else(|| ctx.build(format!("{what}: {m:?} is not a concrete embedding"))))
        .collect()
}

impl AtlasDoc {
    pub fn into_atlas(self, path: &str) -> Result<Atlas, DocumentError> {
        let ctx = Ctx { path };
        check_header(path, &self.kind, self.format_version, "atlas")?;
        let mut groups = BTreeMap::new();
        for (name, spec) in &self.groups {
            groups.insert(name.clone(), build_group(&ctx, name, spec)?);
        }
        let chart_names: Vec<String> = self.charts.iter().map(|c| c.name.clone()).collect();
        let mut charts = Vec::with_capacity(self.charts.len());
        for c in &self.charts {
            let g = groups.get(&c.group).ok_or_else(|| ctx.reference(format!("chart {}: unknown group `{}`", c.name, c.group)))?;
            let n = c.samples.len();
            let act = left_table(&ctx, &format!("chart {}", c.name), g, n, &c.action)?;
            let action = GroupAction::new(g.clone(), n, act).map_err(|e| ctx.build(format!("chart {}: {e}", c.name)))?;
            let proj = c
                .projection
                .iter()
                .map(|q| ctx.lookup(&self.quotient, q, "quotient point"))
                .collect::<Result<Vec<_>, _>>()?;
            charts.push(
                Chart::new(c.name.clone(), c.samples.clone(), action, proj, c.connected, c.dimension).map_err(|e| ctx.build(e))?,
            );
        }
        let mut ends = Vec::with_capacity(self.embeddings.len());
        let mut declared = BTreeMap::new();
        for e in &self.embeddings {
            let i = ctx.lookup(&chart_names, &e.source, "chart")?;
            let j = ctx.lookup(&chart_names, &e.target, "chart")?;
            if let Some(maps) = &e.concrete {
                declared.insert((i, j), maps.clone());
            }
            ends.push((i, j));
        }
        let layer = SatakeLayer::new(self.quotient.clone(), charts, &declared).map_err(|e| ctx.build(e))?;
        let poset = layer.poset().clone();
        let arrow = |i: usize, j: usize| {
            poset.arrow(i, j).ok_or_else(|| ctx.reference(format!("{} is not contained in {}", chart_names[i], chart_names[j])))
        };
        let mut parts = AtlasParts::default();
        for (e, &(i, j)) in self.embeddings.iter().zip(&ends) {
            let a = arrow(i, j)?;
            let what = format!("embedding {}->{}", e.source, e.target);
            if parts.abst.contains_key(&a) {
                return Err(ctx.reference(format!("{what} given twice")));
            }
            let module = build_module(&ctx, &what, layer.chart(j).group(), layer.chart(i).group(), &e.module())?;
            match module {
                Some(m) => {
                    parts.abst.insert(a, m);
                }
                None if i == j => {}
                None => return Err(ctx.reference(format!("{what}: no module tables"))),
            }
            if let Some(maps) = &e.tilde {
                parts.tilde.insert(a, tilde_indices(&ctx, &what, maps, layer.con(a).maps())?);
            }
        }
        for (name, table) in &self.units {
            let i = ctx.lookup(&chart_names, name, "chart")?;
            parts.unit.insert(i, table.clone());
        }
        for cell in &self.cells {
            let (os, ot) = parse_arrow(&ctx, &cell.outer)?;
            let (is, it) = parse_arrow(&ctx, &cell.inner)?;
            let outer = arrow(ctx.lookup(&chart_names, os, "chart")?, ctx.lookup(&chart_names, ot, "chart")?)?;
            let inner = arrow(ctx.lookup(&chart_names, is, "chart")?, ctx.lookup(&chart_names, it, "chart")?)?;
            let size = |a: usize| {
                let (s, _) = poset.arrows()[a];
                parts.abst.get(&a).map(|m| m.size()).unwrap_or_else(|| layer.chart(s).group().order())
            };
            let what = format!("cell {} after {}", cell.outer, cell.inner);
            let flat = rectangular(&ctx, &what, &cell.table, size(outer), size(inner))?;
            parts.alpha.insert((outer, inner), flat);
        }
        Atlas::build(layer, parts).map_err(|e| ctx.build(e))
    }
}

/// Loaded groupoid model with its named covers.
#[derive(Debug, Clone)]
pub struct GroupoidBundle {
    pub model: FiniteGroupoidModel,
    pub covers: BTreeMap<String, Cover>,
}

impl GroupoidDoc {
    pub fn into_model(self, path: &str) -> Result<GroupoidBundle, DocumentError> {
        let ctx = Ctx { path };
        check_header(path, &self.kind, self.format_version, "groupoid")?;
        let arrow_names: Vec<String> = self.arrows.iter().map(|a| a.name.clone()).collect();
        let obj = |n: &str| ctx.lookup(&self.objects, n, "object");
        let arr = |n: &str| ctx.lookup(&arrow_names, n, "arrow");
        let mut source = Vec::new();
        let mut target = Vec::new();
        let mut inverse = Vec::new();
        let mut unit = vec![None; self.objects.len()];
        for (g, a) in self.arrows.iter().enumerate() {
            source.push(obj(&a.source)?);
            target.push(obj(&a.target)?);
            inverse.push(arr(&a.inverse)?);
            if a.unit {
                let x = source[g];
                if unit[x].replace(g).is_some() {
                    return Err(ctx.reference(format!("object {} has two units", self.objects[x])));
                }
            }
        }
        let unit = unit
            .into_iter()
            .enumerate()
            .map(|(x, u)| u.ok_or_else(|| ctx.reference(format!("object {} has no unit arrow", self.objects[x]))))
            .collect::<Result<Vec<_>, _>>()?;
        let mut compose = HashMap::new();
        for [g2, g1, g] in &self.compose {
            if compose.insert((arr(g2)?, arr(g1)?), arr(g)?).is_some() {
                return Err(ctx.reference(format!("composite {g2} after {g1} given twice")));
            }
        }
        let sheets = self
            .sheets
            .iter()
            .map(|s| s.iter().map(|g| arr(g)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let mut model = FiniteGroupoidModel::new(
            self.objects.clone(),
            arrow_names.clone(),
            source,
            target,
            unit,
            inverse,
            compose,
            sheets,
        )
        .map_err(|e| ctx.build(e))?;
        if let Some(labels) = self.quotient_labels {
            model = model.with_quotient_labels(labels).map_err(|e| ctx.build(e))?;
        }
        let mut covers = BTreeMap::new();
        for (name, charts) in &self.covers {
            let names = charts.iter().map(|c| c.name.clone()).collect();
            let sets = charts
                .iter()
                .map(|c| c.objects.iter().map(|o| obj(o)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            covers.insert(name.clone(), Cover::new(names, sets));
        }
        Ok(GroupoidBundle { model, covers })
    }
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    base.parent().unwrap_or_else(|| Path::new(".")).join(rel)
}

impl RefinementDoc {
    /// `path` anchors the relative paths inside the document.
    pub fn into_refinement(self, path: &Path, strictness: Strictness) -> Result<Loaded<RefinementData>, DocumentError> {
        let shown = display(path);
        let ctx = Ctx { path: &shown };
        check_header(&shown, &self.kind, self.format_version, "refinement")?;
        let mut warnings = Vec::new();
        let atlas = |rel: &str, warnings: &mut Vec<String>| -> Result<Atlas, DocumentError> {
            let l = load_atlas(&resolve(path, rel), strictness)?;
            warnings.extend(l.warnings);
            Ok(l.value)
        };
        let explicit = self.fine.is_some() || self.coarse.is_some();
        let modes = [self.identity.is_some(), self.groupoid.is_some(), self.compose.is_some(), explicit];
        if modes.iter().filter(|&&m| m).count() != 1 {
            return Err(ctx.reference("give exactly one of `identity`, `groupoid`, `compose` or `fine`/`coarse`"));
        }
        let data = if let Some(rel) = &self.identity {
            identity_refinement(&atlas(rel, &mut warnings)?)
        } else if let Some(rel) = &self.groupoid {
            let g = load_groupoid(&resolve(path, rel), strictness)?;
            warnings.extend(g.warnings);
            let cover = |name: &Option<String>, which: &str| {
                let name = name.as_ref().ok_or_else(|| ctx.reference(format!("`{which}` is required with `groupoid`")))?;
                g.value.covers.get(name).ok_or_else(|| ctx.reference(format!("no cover named `{name}`")))
            };
            let (fine, coarse) = (cover(&self.fine_cover, "fine_cover")?, cover(&self.coarse_cover, "coarse_cover")?);
            refinement_from_groupoid(&g.value.model, fine, coarse).map_err(|e| ctx.build(e))?
        } else if let Some([a, b]) = &self.compose {
            let first = load_refinement(&resolve(path, a), strictness)?;
            let second = load_refinement(&resolve(path, b), strictness)?;
            warnings.extend(first.warnings);
            warnings.extend(second.warnings);
            compose_refinements(&first.value, &second.value).map_err(|e| ctx.build(e))?
        } else {
            let (Some(f), Some(c)) = (&self.fine, &self.coarse) else {
                return Err(ctx.reference("explicit refinements need both `fine` and `coarse`"));
            };
            let fine = atlas(f, &mut warnings)?;
            let coarse = atlas(c, &mut warnings)?;
            let parts = self.explicit_parts(&ctx, &fine, &coarse)?;
            RefinementData::build(fine, coarse, parts).map_err(|e| ctx.build(e))?
        };
        Ok(Loaded { value: data, warnings })
    }

    fn explicit_parts(&self, ctx: &Ctx, fine: &Atlas, coarse: &Atlas) -> Result<RefinementParts, DocumentError> {
        let names = |a: &Atlas| (0..a.layer().charts().len()).map(|i| a.layer().chart(i).name().to_string()).collect::<Vec<_>>();
        let (fnames, cnames) = (names(fine), names(coarse));
        let fi = |n: &str| ctx.lookup(&fnames, n, "fine chart");
        let cj = |n: &str| ctx.lookup(&cnames, n, "coarse chart");
        let mut parts = RefinementParts::default();
        for m in &self.modules {
            let (i, j) = (fi(&m.fine)?, cj(&m.coarse)?);
            let what = format!("module {} in {}", m.fine, m.coarse);
            let module = build_module(ctx, &what, coarse.group(j), fine.group(i), &m.module())?
                .ok_or_else(|| ctx.reference(format!("{what}: no module tables")))?;
            parts.modules.insert((i, j), module);
            if let Some(c) = &m.concrete {
                parts.concrete.insert((i, j), c.clone());
            }
            if let Some(t) = &m.tilde {
                parts.tilde.insert((i, j), t.clone());
            }
        }
        let size = |parts: &RefinementParts, i: usize, j: usize, what: &str| {
            parts.modules.get(&(i, j)).map(|m| m.size()).ok_or_else(|| ctx.reference(format!("{what}: no module for this pair")))
        };
        for c in &self.right_cells {
            let j = cj(&c.coarse)?;
            let (s, t) = parse_arrow(ctx, &c.inner)?;
            let (i2, i) = (fi(s)?, fi(t)?);
            let a = fine.layer().poset().arrow(i2, i).ok_or_else(|| ctx.reference(format!("{s} is not contained in {t}")))?;
            let what = format!("right cell {} / {}", c.coarse, c.inner);
            let rows = size(&parts, i, j, &what)?;
            parts.right.insert((j, i, i2), rectangular(ctx, &what, &c.table, rows, fine.abst(a).size())?);
        }
        for c in &self.left_cells {
            let i = fi(&c.fine)?;
            let (s, t) = parse_arrow(ctx, &c.outer)?;
            let (j, j2) = (cj(s)?, cj(t)?);
            let a = coarse.layer().poset().arrow(j, j2).ok_or_else(|| ctx.reference(format!("{s} is not contained in {t}")))?;
            let what = format!("left cell {} / {}", c.outer, c.fine);
            let cols = size(&parts, i, j, &what)?;
            parts.left.insert((j2, j, i), rectangular(ctx, &what, &c.table, coarse.abst(a).size(), cols)?);
        }
        Ok(parts)
    }
}

// ---------------------------------------------------------------- loading

pub fn load_atlas(path: &Path, strictness: Strictness) -> Result<Loaded<Atlas>, DocumentError> {
    let shown = display(path);
    let doc: Loaded<AtlasDoc> = parse(&shown, &read(path)?, strictness)?;
    Ok(Loaded { value: doc.value.into_atlas(&shown)?, warnings: doc.warnings })
}

pub fn load_groupoid(path: &Path, strictness: Strictness) -> Result<Loaded<GroupoidBundle>, DocumentError> {
    let shown = display(path);
    let doc: Loaded<GroupoidDoc> = parse(&shown, &read(path)?, strictness)?;
    Ok(Loaded { value: doc.value.into_model(&shown)?, warnings: doc.warnings })
}

pub fn load_refinement(path: &Path, strictness: Strictness) -> Result<Loaded<RefinementData>, DocumentError> {
    let doc: Loaded<RefinementDoc> = parse(&display(path), &read(path)?, strictness)?;
    let mut r = doc.value.into_refinement(path, strictness)?;
    r.warnings.splice(0..0, doc.warnings);
    Ok(r)
}

// ---------------------------------------------------------------- writing

fn rows(flat: &[usize], width: usize) -> Vec<Vec<usize>> {
    if width == 0 {
        return Vec::new();
    }
    flat.chunks(width).map(|c| c.to_vec()).collect()
}

fn table_spec(group: &FiniteGroup) -> GroupSpec {
    GroupSpec::Table { table: group.rows() }
}

fn module_fields(m: &Bimodule) -> ModuleFields {
    let (n, gl, gr) = (m.size(), m.left().order(), m.right().order());
    let mut right = vec![vec![0; n]; gr];
    for x in 0..n {
        for (g, row) in right.iter_mut().enumerate() {
            row[x] = m.act_right(x, g);
        }
    }
    debug_assert_eq!(m.left_table().len(), gl * n);
    ModuleFields {
        size: Some(n),
        left: Some(ActionSpec::Table { table: rows(m.left_table(), n) }),
        right: Some(ActionSpec::Table { table: right }),
        ..ModuleFields::default()
    }
}

/// Explicit document for `atlas`: one table-form group per chart, every
/// module, unit and composition table written out.
pub fn atlas_to_document(atlas: &Atlas) -> AtlasDoc {
    let layer = atlas.layer();
    let quotient = layer.quotient().names().to_vec();
    let mut groups = BTreeMap::new();
    let mut charts = Vec::new();
    let mut units = BTreeMap::new();
    for i in 0..layer.charts().len() {
        let c = layer.chart(i);
        let gname = format!("G_{}", c.name());
        groups.insert(gname.clone(), table_spec(c.group()));
        charts.push(ChartDoc {
            name: c.name().to_string(),
            group: gname,
            samples: c.sample_names().to_vec(),
            projection: c.proj().iter().map(|&q| quotient[q].clone()).collect(),
            action: ActionSpec::Table { table: (0..c.group().order()).map(|g| c.action().permutation(g).to_vec()).collect() },
            connected: c.connected(),
            dimension: c.dimension(),
        });
        units.insert(c.name().to_string(), atlas.unit_table(i).to_vec());
    }
    let poset = layer.poset();
    let name = |i: usize| layer.chart(i).name().to_string();
    let label = |a: usize| {
        let (s, t) = poset.arrows()[a];
        format!("{}->{}", name(s), name(t))
    };
    let mut embeddings = Vec::new();
    for (a, &(i, j)) in poset.arrows().iter().enumerate() {
        let mut module = module_fields(atlas.abst(a));
        let con = layer.con(a);
        if con.declared() {
            module.concrete = Some(con.maps().to_vec());
        }
        module.tilde = Some((0..atlas.abst(a).size()).map(|l| atlas.tilde(a, l).to_vec()).collect());
        embeddings.push(EmbeddingDoc::with_module(name(i), name(j), module));
    }
    let cells = atlas
        .alpha_tables()
        .iter()
        .map(|(&(outer, inner), t)| CellDoc {
            outer: label(outer),
            inner: label(inner),
            table: rows(t, atlas.abst(inner).size()),
        })
        .collect();
    AtlasDoc {
        kind: "atlas".into(),
        format_version: FORMAT_VERSION,
        description: None,
        groups,
        quotient,
        charts,
        embeddings,
        units,
        cells,
    }
}

pub fn groupoid_to_document(model: &FiniteGroupoidModel, covers: &BTreeMap<String, Cover>) -> GroupoidDoc {
    let on = |x: usize| model.object_name(x).to_string();
    let an = |g: usize| model.arrow_name(g).to_string();
    let arrows = (0..model.arrows())
        .map(|g| ArrowDoc {
            name: an(g),
            source: on(model.source(g)),
            target: on(model.target(g)),
            inverse: an(model.inverse(g)),
            unit: model.unit(model.source(g)) == g,
        })
        .collect();
    let mut pairs: Vec<_> = model.compose_table().iter().map(|(&(a, b), &c)| (a, b, c)).collect();
    pairs.sort_unstable();
    GroupoidDoc {
        kind: "groupoid".into(),
        format_version: FORMAT_VERSION,
        description: None,
        objects: model.object_names().to_vec(),
        quotient_labels: model.quotient_labels().map(|l| l.to_vec()),
        arrows,
        compose: pairs.into_iter().map(|(a, b, c)| [an(a), an(b), an(c)]).collect(),
        sheets: model.sheets().iter().map(|s| s.iter().map(|&g| an(g)).collect()).collect(),
        covers: covers
            .iter()
            .map(|(k, c)| {
                let charts = c
                    .names
                    .iter()
                    .zip(&c.charts)
                    .map(|(n, objs)| CoverChartDoc { name: n.clone(), objects: objs.iter().map(|&x| on(x)).collect() })
                    .collect();
                (k.clone(), charts)
            })
            .collect(),
    }
}

/// Explicit refinement document over atlas documents at `fine` and
/// `coarse`. Identity cells are left implied.
pub fn refinement_to_document(data: &RefinementData, fine: &str, coarse: &str) -> RefinementDoc {
    let (fa, ca) = (data.fine(), data.coarse());
    let fname = |i: usize| fa.layer().chart(i).name().to_string();
    let cname = |j: usize| ca.layer().chart(j).name().to_string();
    let parts = data.to_parts();
    let modules = data
        .pairs()
        .iter()
        .map(|&(i, j)| {
            let m = data.module(i, j);
            let mut module = module_fields(m);
            if data.concrete(i, j).declared() {
                module.concrete = Some(data.concrete(i, j).maps().to_vec());
            }
            module.tilde = Some((0..m.size()).map(|l| data.tilde(i, j, l).to_vec()).collect());
            RefModuleDoc::with_module(fname(i), cname(j), module)
        })
        .collect();
    let right_cells = parts
        .right
        .iter()
        .filter(|(&(_, i, i2), _)| i != i2)
        .map(|(&(j, i, i2), t)| {
            let a = fa.layer().poset().arrow(i2, i).expect("fine arrow");
            RightCellDoc { coarse: cname(j), inner: format!("{}->{}", fname(i2), fname(i)), table: rows(t, fa.abst(a).size()) }
        })
        .collect();
    let left_cells = parts
        .left
        .iter()
        .filter(|(&(j2, j, _), _)| j != j2)
        .map(|(&(j2, j, i), t)| LeftCellDoc {
            outer: format!("{}->{}", cname(j), cname(j2)),
            fine: fname(i),
            table: rows(t, data.module(i, j).size()),
        })
        .collect();
    RefinementDoc {
        kind: "refinement".into(),
        format_version: FORMAT_VERSION,
        fine: Some(fine.to_string()),
        coarse: Some(coarse.to_string()),
        modules,
        right_cells,
        left_cells,
        ..RefinementDoc::default()
    }
}

/// Pretty JSON with arrays of scalars kept on one line.
pub fn to_json<T: Serialize>(doc: &T) -> String {
    let pretty = serde_json::to_string_pretty(doc).expect("documents serialize");
    let mut out = String::with_capacity(pretty.len());
    let mut rest = pretty.as_str();
    while let Some(open) = rest.find('[') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        let close = tail.find(']').expect("balanced");
        let inner = &tail[1..close];
        if inner.contains(['[', '{']) {
            out.push('[');
            rest = &tail[1..];
        } else {
            let items: Vec<&str> = inner.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            out.push('[');
            out.push_str(&items.join(" "));
            out.push(']');
            rest = &tail[close + 1..];
        }
    }
    out.push_str(rest);
    out.push('\n');
    out
}
