//! Check outcomes and their human and machine renderings.
//!
//! Every line carries a [`CheckKey`]. The key table printed by
//! `orbatlas keys` is generated from the same list.

use std::fmt;

use serde::Serialize;

pub const REPORT_SCHEMA: &str = "orbatlas-report/1";

macro_rules! check_keys {
    ($( $variant:ident => $key:literal : $desc:literal ),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum CheckKey { $($variant),* }

        impl CheckKey {
            pub const ALL: &'static [CheckKey] = &[$(CheckKey::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self { $(CheckKey::$variant => $key),* }
            }

            pub fn description(self) -> &'static str {
                match self { $(CheckKey::$variant => $desc),* }
            }
        }
    };
}

check_keys! {
    DocumentLoad => "document.load": "input document parsed and all references resolved",
    DocumentUnknownField => "document.unknown-field": "field not in the schema (error in strict mode, warning otherwise)",
    ChartAction => "chart.action": "chart group acts on the samples (identity and composition laws)",
    ChartProjectionInvariant => "chart.projection-invariant": "projection is constant on group orbits",
    ChartFiberOrbit => "chart.fiber-orbit": "fibers of the projection are exactly the orbits of the reduced group",
    ChartEffectiveReduction => "chart.effective-reduction": "reduced group acts faithfully on the samples",
    ChartConnected => "chart.connected": "declared connectedness flag (documentation only)",
    SatakeCover => "satake.cover": "chart supports cover the quotient",
    SatakeLocalCompatibility => "satake.local-compatibility": "each point of an overlap lies in a chart inside the overlap",
    SatakeConAtlasBimodule => "satake.con-atlas-bimodule": "concrete embeddings form an atlas bimodule over the reduced groups",
    SatakeConEquivariance => "satake.con-equivariance": "each concrete embedding is equivariant for the homomorphism extracted from its module",
    SatakeConUnit => "satake.con-unit": "self-embeddings of a chart are its reduced group acting on the identity",
    SatakeComposition => "satake.composition": "composition of concrete embeddings is a balanced bimodule iso on tensor classes",
    SatakeOverlap => "satake.overlap": "embeddings with overlapping images differ by a group element",
    SatakeFactorization => "satake.factorization": "overlapping embeddings into a chart factor through the middle chart",
    SatakeStrongCompatibility => "satake.strong-compatibility": "embeddings meeting at a point are reconciled by a smaller chart",
    AtlasModuleLaws => "atlas.module-laws": "abstract embedding tables satisfy the bimodule laws",
    AtlasBimodule => "atlas.atlas-bimodule": "abstract embeddings: nonempty, left free and transitive, right free",
    AtlasAlphaBalanced => "atlas.alpha-balanced": "composition cell is balanced over the middle group",
    AtlasAlphaEquivariant => "atlas.alpha-equivariant": "composition cell commutes with the outer actions",
    AtlasAlphaIso => "atlas.alpha-iso": "composition cell is a bijection on tensor classes",
    AtlasUnitIso => "atlas.unit-iso": "unit cell is a bimodule iso from the chart group",
    AtlasAssociativity => "atlas.associativity": "composition cells satisfy the pentagon (associativity) law",
    AtlasUnitCoherence => "atlas.unit-coherence": "composition with unit cells reduces to the group actions",
    AtlasRhoSurjective => "atlas.rho-surjective": "abstract embeddings map onto the concrete ones",
    AtlasRhoEquivariant => "atlas.rho-equivariant": "the map to concrete embeddings intertwines both actions",
    AtlasRhoTwoCell => "atlas.rho-two-cell": "tensor-level 2-cell e⊗λ ↦ ρ̃(λ)⊗e is a well-defined bimodule map",
    AtlasKernelTransitivity => "atlas.kernel-transitivity": "abstract embeddings with equal concrete image differ by a chart group element",
    AtlasRhoComposition => "atlas.rho-composition": "concrete image of a composite is the composite of concrete images",
    AtlasRhoUnit => "atlas.rho-unit": "unit cells map to identity embeddings",
    AtlasKernelIso => "atlas.kernel-iso": "induced homomorphism restricts to an iso between kernels of the chart actions",
    AtlasVerified => "atlas.verified": "atlas passes every atlas check before derived results are checked",
    LemmaLeftCancel => "lemma.left-cancel": "composing on the left with a fixed embedding is injective",
    LemmaRightCancel => "lemma.right-cancel": "composing on the right with a fixed embedding is injective",
    LemmaInterpolation => "lemma.interpolation": "overlapping embeddings factor uniquely through the middle chart",
    LemmaStrongCompatibility => "lemma.strong-compatibility": "abstract embeddings meeting at a point are reconciled by a smaller chart",
    LemmaEllConjugacy => "lemma.ell-conjugacy": "induced homomorphism at h·λ is the conjugate by h",
    CategoryLaws => "category.laws": "category of chart embeddings is unital and associative",
    FractionsOre => "fractions.ore": "every cospan of embeddings completes to a commuting square",
    FractionsWeakCancellation => "fractions.weak-cancellation": "parallel embeddings equalised by a later one coincide",
    FractionsSpanRelation => "fractions.span-relation": "span relation closure agrees with the pairwise definition",
    FractionsStructureMaps => "fractions.structure-maps": "source and target are constant on span classes",
    FractionsWitnessIndependence => "fractions.witness-independence": "composition is independent of the witness and representatives",
    FractionsGroupoidLaws => "fractions.groupoid-laws": "units, inverses and associativity hold on span classes",
    FractionsHausdorff => "fractions.hausdorff": "Hausdorff arrow space: no finite content, not checked",
    GroupoidSummary => "groupoid.summary": "object and arrow-class counts",
    GroupoidIsotropy => "groupoid.isotropy": "isotropy group per quotient point",
    GroupoidIsotropyConjugacy => "groupoid.isotropy-conjugacy": "isotropy groups over one quotient point are isomorphic",
    GroupoidInertia => "groupoid.inertia": "components of the loop space (same-sheet, span and conjugation gluing)",
    GroupoidProperness => "groupoid.properness": "all (source, target) fibers are finite",
    ModelGroupoidLaws => "model.groupoid-laws": "finite groupoid model satisfies the groupoid axioms",
    ModelSheets => "model.sheets": "declared sheets are local bisections",
    ModelTranslation => "model.translation": "evaluation from bisections times subset onto restricted arrows is bijective",
    ModelBisectionOrbits => "model.bisection-orbits": "bisection group has the same orbits as the restricted groupoid",
    ModelLocalBisections => "model.local-bisections": "evaluation of local bisections is bijective and the left action is a torsor",
    ModelTSide => "model.t-side": "arrows from the big set into the small set split into target sections",
    ModelCover => "model.cover": "cover charts cover the objects and satisfy the intersection condition",
    ExtractVerify => "extract.verify": "extracted atlas passes atlas verification",
    RefineSatake => "refine.satake": "fine supports lie in coarse supports and concrete cross-embeddings exist",
    RefineCover => "refine.cover": "each point of a fine/coarse intersection lies in a fine chart inside it",
    RefineModule => "refine.module": "refinement modules are atlas bimodules",
    RefineRhoSurjective => "refine.rho-surjective": "refinement modules map onto concrete cross-embeddings",
    RefineRhoEquivariant => "refine.rho-equivariant": "refinement maps intertwine both actions",
    RefineKernelTransitivity => "refine.kernel-transitivity": "refinement elements with equal concrete image differ by a fine group element",
    RefineRightCell => "refine.right-cell": "fine-side mixed cells are isomorphisms on tensor classes",
    RefineLeftCell => "refine.left-cell": "coarse-side mixed cells are isomorphisms on tensor classes",
    RefineGammaRight => "refine.gamma-right": "concrete fine-side composition is an iso on tensor classes",
    RefineGammaLeft => "refine.gamma-left": "concrete coarse-side composition is an iso on tensor classes",
    RefineRhoRight => "refine.rho-right": "fine-side cells are compatible with the concrete maps",
    RefineRhoLeft => "refine.rho-left": "coarse-side cells are compatible with the concrete maps",
    RefinePentagonFine => "refine.pentagon-fine": "pentagon: two fine arrows after a refinement element",
    RefinePentagonMixed => "refine.pentagon-mixed": "pentagon: coarse arrow, refinement element, fine arrow",
    RefinePentagonCoarse => "refine.pentagon-coarse": "pentagon: two coarse arrows before a refinement element",
    RefineUnitFine => "refine.unit-fine": "fine unit cells act as the right action",
    RefineUnitCoarse => "refine.unit-coarse": "coarse unit cells act as the left action",
    BundleAnchor => "bundle.anchor": "anchor and projection are surjective",
    BundleRightAction => "bundle.right-action": "right action is a well-defined action over the projection",
    BundleLeftAction => "bundle.left-action": "left action is a well-defined action over the anchor",
    BundleCommute => "bundle.commute": "left and right actions commute",
    BundleRightPrincipal => "bundle.right-principal": "(m, g) ↦ (m, m·g) is a bijection",
    BundleLeftPrincipal => "bundle.left-principal": "(h, m) ↦ (h·m, m) is a bijection",
    BundleSize => "bundle.size": "class count of the bundle",
    MoritaQuotientPoints => "morita.quotient-points": "number of quotient points",
    MoritaIsotropy => "morita.isotropy": "multiset of isotropy labels",
    MoritaInertia => "morita.inertia": "number of inertia components",
    MoritaVerdict => "morita.verdict": "equal invariants (evidence) or the first differing field (refutation)",
    RoundtripInvariants => "roundtrip.invariants": "invariants agree before and after extraction from the groupoid of fractions",
    LawTensorSize => "law.tensor-size": "tensor size equals |N||M|/|H| when the middle action on N is free",
    LawInducedConjugacy => "law.induced-conjugacy": "induced homomorphism at h·m is the conjugate by h",
    LawInducedInjective => "law.induced-injective": "induced homomorphisms of atlas bimodules are injective",
}

impl fmt::Display for CheckKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Info,
    Skipped,
    /// A theorem of the construction failed; always a bug or corrupted data.
    Breach,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
            Status::Skipped => "SKIP",
            Status::Breach => "BREACH",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub key: CheckKey,
    pub subject: String,
    pub status: Status,
    pub detail: String,
}

impl CheckOutcome {
    pub fn pass(key: CheckKey, subject: impl Into<String>) -> Self {
        CheckOutcome { key, subject: subject.into(), status: Status::Pass, detail: String::new() }
    }

    pub fn fail(key: CheckKey, subject: impl Into<String>, detail: impl Into<String>) -> Self {
        CheckOutcome { key, subject: subject.into(), status: Status::Fail, detail: detail.into() }
    }

    pub fn info(key: CheckKey, subject: impl Into<String>, detail: impl Into<String>) -> Self {
        CheckOutcome { key, subject: subject.into(), status: Status::Info, detail: detail.into() }
    }

    /// Pass when `witness` is `None`, otherwise fail with the witness text.
    pub fn from_witness(key: CheckKey, subject: impl Into<String>, witness: Option<String>) -> Self {
        match witness {
            None => Self::pass(key, subject),
            Some(w) => Self::fail(key, subject, w),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub command: String,
    pub outcomes: Vec<CheckOutcome>,
}

#[derive(Serialize)]
struct Record<'a> {
    schema: &'static str,
    key: &'a str,
    subject: &'a str,
    status: Status,
    #[serde(skip_serializing_if = "str::is_empty")]
    detail: &'a str,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema: &'static str,
    command: &'a str,
    verdict: &'static str,
    checks: usize,
    failures: usize,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report { command: command.into(), outcomes: Vec::new() }
    }

    pub fn push(&mut self, o: CheckOutcome) {
        self.outcomes.push(o);
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = CheckOutcome>) {
        self.outcomes.extend(other);
    }

    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| matches!(o.status, Status::Pass | Status::Info | Status::Skipped))
    }

    pub fn has_breach(&self) -> bool {
        self.outcomes.iter().any(|o| o.status == Status::Breach)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| matches!(o.status, Status::Fail | Status::Breach))
    }

    pub fn failed_keys(&self) -> Vec<CheckKey> {
        let mut k: Vec<CheckKey> = self.failures().map(|o| o.key).collect();
        k.sort();
        k.dedup();
        k
    }

    pub fn find(&self, key: CheckKey) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(move |o| o.key == key)
    }

    pub fn render_human(&self) -> String {
        let mut s = format!("# {}\n", self.command);
        for o in &self.outcomes {
            s.push_str(&format!("{:<6} {:<32} {}", o.status.as_str(), o.key.as_str(), o.subject));
            if !o.detail.is_empty() {
                s.push_str(&format!(": {}", o.detail));
            }
            s.push('\n');
        }
        let failures = self.failures().count();
        s.push_str(&format!(
            "verdict: {} ({} checks, {} failures)\n",
            if self.passed() { "pass" } else { "fail" },
            self.outcomes.len(),
            failures
        ));
        s
    }

    /// One JSON record per line, closed by a summary record.
    pub fn render_machine(&self) -> String {
        let mut s = String::new();
        for o in &self.outcomes {
            let r = Record {
                schema: REPORT_SCHEMA,
                key: o.key.as_str(),
                subject: &o.subject,
                status: o.status,
                detail: &o.detail,
            };
            s.push_str(&serde_json::to_string(&r).expect("report record serializes"));
            s.push('\n');
        }
        let summary = Summary {
            schema: REPORT_SCHEMA,
            command: &self.command,
            verdict: if self.passed() { "pass" } else { "fail" },
            checks: self.outcomes.len(),
            failures: self.failures().count(),
        };
        s.push_str(&serde_json::to_string(&summary).expect("summary serializes"));
        s.push('\n');
        s
    }
}

/// Markdown table of every key, used by `orbatlas keys` and the README.
pub fn key_table() -> String {
    let mut s = String::from("| key | meaning |\n|---|---|\n");
    for k in CheckKey::ALL {
        s.push_str(&format!("| `{}` | {} |\n", k.as_str(), k.description()));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_unique() {
        let mut v: Vec<&str> = CheckKey::ALL.iter().map(|k| k.as_str()).collect();
        let n = v.len();
        v.sort_unstable();
        v.dedup();
        assert_eq!(v.len(), n);
    }

    #[test]
    fn info_lines_do_not_fail_a_report() {
        let mut r = Report::new("t");
        r.push(CheckOutcome::info(CheckKey::ChartConnected, "U1", "declared"));
        assert!(r.passed());
        r.push(CheckOutcome::fail(CheckKey::SatakeCover, "q1", "uncovered"));
        assert!(!r.passed());
        assert!(r.render_machine().lines().count() == 3);
    }
}
