//! Certified lower bounds on `δ_F` assembled from the structural lemmas, each
//! recorded as a node of a [`BoundCertificate`] tree.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::lie::{LieAlgebra, Subspace};
use crate::linalg::{self, Cutoff, Mat};
use crate::rep::{format_weight, Character, InducedMode, Representation, WeightDecomposition};

/// Slack on `value = Π children` for composite certificates.
pub const PRODUCT_TOL: f64 = 1e-12;
/// Determinants this close to one count as one for the solvable leaf.
const DET_ONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    TrivialBound,
    Reduction,
    RescaledSplit,
    CharacterShift,
    SolvableSharp,
    SemisimpleOrbit,
    RadicalRootProduct,
    Product,
}

impl Rule {
    /// Name of the result the rule applies.
    pub fn lemma(self) -> &'static str {
        match self {
            Rule::TrivialBound => "Trivial bound (rho^-dim)",
            Rule::Reduction => "Reduction Lemma",
            Rule::RescaledSplit => "Rescaled splitting lemma",
            Rule::CharacterShift => "Shifting characters lemma",
            Rule::SolvableSharp => "Solvable theorem (rescaled delta = 1)",
            Rule::SemisimpleOrbit => "Nilpotent orbit bound (rho^-d/2)",
            Rule::RadicalRootProduct => "Root product over the radical",
            Rule::Product => "Product",
        }
    }

    pub fn is_leaf(self) -> bool {
        matches!(self, Rule::TrivialBound | Rule::SolvableSharp | Rule::SemisimpleOrbit)
    }
}

/// A derivation tree: the rule applied, its numeric bound, rule-specific
/// metadata and the certificates it composes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub rule: Rule,
    pub value: f64,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
    #[serde(default)]
    pub children: Vec<BoundCertificate>,
}

impl BoundCertificate {
    pub fn leaf(rule: Rule, value: f64) -> Self {
        Self {
            rule,
            value,
            metadata: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: Value) -> Self {
        self.metadata.insert(key.to_string(), value);
        self
    }

    /// `sqrt(value)`: the lower bound on `c(A)`.
    pub fn c_lower(&self) -> f64 {
        c_lower(self)
    }

    /// Checks the tree invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.value > 0.0 && self.value <= 1.0 + PRODUCT_TOL) {
            return Err(Error::Invalid(format!(
                "{:?}: value {} outside (0, 1]",
                self.rule, self.value
            )));
        }
        if self.rule.is_leaf() {
            if !self.children.is_empty() {
                return Err(Error::Invalid(format!("{:?} leaf has children", self.rule)));
            }
            return Ok(());
        }
        let product: f64 = self.children.iter().map(|c| c.value).product();
        if (product - self.value).abs() > PRODUCT_TOL * self.value.max(product).max(1e-300) {
            return Err(Error::Invalid(format!(
                "{:?}: value {} differs from product of children {}",
                self.rule, self.value, product
            )));
        }
        if self.children.is_empty() && self.rule != Rule::RadicalRootProduct && self.rule != Rule::Product {
            return Err(Error::Invalid(format!("{:?} has no children", self.rule)));
        }
        for c in &self.children {
            c.validate()?;
        }
        Ok(())
    }

    /// Canonical JSON; identical inputs give identical bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Indented proof tree quoting the lemma behind each node.
    pub fn render_tree(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0);
        out
    }

    fn render_into(&self, out: &mut String, depth: usize) {
        let indent = "  ".repeat(depth);
        let meta: Vec<String> = self
            .metadata
            .iter()
            .filter(|(_, v)| !v.is_array() && !v.is_object())
            .map(|(k, v)| format!("{k}={}", render_value(v)))
            .collect();
        let _ = write!(out, "{indent}- [{:?}] {}: {}", self.rule, self.rule.lemma(), self.value);
        if !meta.is_empty() {
            let _ = write!(out, "  ({})", meta.join(", "));
        }
        out.push('\n');
        for c in &self.children {
            c.render_into(out, depth + 1);
        }
    }

    /// Leaves in depth-first order.
    pub fn leaves(&self) -> Vec<&BoundCertificate> {
        if self.children.is_empty() {
            return vec![self];
        }
        self.children.iter().flat_map(|c| c.leaves()).collect()
    }
}

fn render_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn c_lower(cert: &BoundCertificate) -> f64 {
    cert.value.sqrt()
}

/// Inner product used to measure `ρ`.
#[derive(Debug, Clone)]
pub enum InnerProduct {
    Euclidean,
    Gram { matrix: Mat, label: String },
}

impl InnerProduct {
    fn label(&self) -> &str {
        match self {
            InnerProduct::Euclidean => "euclidean",
            InnerProduct::Gram { label, .. } => label,
        }
    }
}

/// `ρ^{-dim V}` with `ρ = sup_F ||π(g)||` (clamped below by one).
pub fn trivial_bound(rep: &Representation, inner: &InnerProduct) -> Result<BoundCertificate> {
    let raw = match inner {
        InnerProduct::Euclidean => rep.operator_norm_sup(None)?,
        InnerProduct::Gram { matrix, .. } => rep.operator_norm_sup(Some(matrix))?,
    };
    let rho = raw.max(1.0);
    let value = rho.powi(-(rep.dim() as i32));
    Ok(BoundCertificate::leaf(Rule::TrivialBound, value)
        .with("rho", json!(rho))
        .with("dim", json!(rep.dim()))
        .with("inner_product", json!(inner.label())))
}

/// Product of the bounds for `W` and `V/W`.
pub fn reduction_compose(cert_w: BoundCertificate, cert_q: BoundCertificate) -> BoundCertificate {
    BoundCertificate {
        rule: Rule::Reduction,
        value: cert_w.value * cert_q.value,
        metadata: BTreeMap::new(),
        children: vec![cert_w, cert_q],
    }
}

/// Product of independent factor certificates.
pub fn product(children: Vec<BoundCertificate>) -> BoundCertificate {
    BoundCertificate {
        rule: Rule::Product,
        value: children.iter().map(|c| c.value).product(),
        metadata: BTreeMap::new(),
        children,
    }
}

fn dets_are_one(rep: &Representation) -> bool {
    rep.dim() == 0
        || rep
            .group()
            .iter()
            .all(|g| (g.matrix.determinant() - 1.0).abs() <= DET_ONE_TOL)
}

/// Bound for a factor of a split: 1 for the zero space, the solvable theorem
/// when it applies, otherwise the Euclidean trivial bound.
pub fn factor_bound(rep: &Representation) -> Result<BoundCertificate> {
    if rep.dim() == 0 {
        return Ok(BoundCertificate::leaf(Rule::TrivialBound, 1.0)
            .with("dim", json!(0))
            .with("rho", json!(1.0))
            .with("inner_product", json!("euclidean")));
    }
    if dets_are_one(rep) && rep.connected() && rep.algebra().is_solvable() {
        return solvable_bound(rep);
    }
    trivial_bound(rep, &InnerProduct::Euclidean)
}

/// Splits at an invariant `W`, rescales both factors to determinant one and
/// bounds each with [`factor_bound`].
pub fn rescaled_split_bound(rep: &Representation, w: &Subspace) -> Result<BoundCertificate> {
    rescaled_split_with(rep, w, factor_bound, factor_bound)
}

/// [`rescaled_split_bound`] with caller-chosen bounds for the rescaled
/// sub-representation and quotient.
pub fn rescaled_split_with(
    rep: &Representation,
    w: &Subspace,
    sub_bound: impl Fn(&Representation) -> Result<BoundCertificate>,
    quotient_bound: impl Fn(&Representation) -> Result<BoundCertificate>,
) -> Result<BoundCertificate> {
    let input_det_one = dets_are_one(rep);
    let base = if input_det_one { rep.clone() } else { rep.rescale_det_one()? };
    let sub = base.induced(w, InducedMode::Sub)?.rescale_det_one()?;
    let quotient = base.induced(w, InducedMode::Quotient)?.rescale_det_one()?;
    let cw = sub_bound(&sub).map_err(|e| e.context("rescaled split: sub-representation"))?;
    let cq = quotient_bound(&quotient).map_err(|e| e.context("rescaled split: quotient"))?;
    Ok(BoundCertificate {
        rule: Rule::RescaledSplit,
        value: cw.value * cq.value,
        metadata: BTreeMap::new(),
        children: vec![cw, cq],
    }
    .with("dim_sub", json!(w.rank()))
    .with("dim_quotient", json!(rep.dim() - w.rank()))
    .with("input_det_one", json!(input_det_one))
    .with("neighbourhoods", json!("balanced")))
}

/// Splits at an invariant `W`, twisting the sub-representation by `χ⁻¹` and
/// the quotient by `χ`. The default `χ` is `det π_W`, which makes the twisted
/// sub-representation unimodular.
pub fn character_shift_bound(
    rep: &Representation,
    w: &Subspace,
    chi: Option<&Character>,
) -> Result<BoundCertificate> {
    let sub = rep.induced(w, InducedMode::Sub)?;
    let quotient = rep.induced(w, InducedMode::Quotient)?;
    let (chi, source) = match chi {
        Some(c) => (c.clone(), "user"),
        None => (sub.determinant_character()?, "det of sub-representation"),
    };
    chi.check_positive()?;
    let sub_tw = sub.twist_by_character(&chi, -1)?;
    let quotient_tw = quotient.twist_by_character(&chi, 1)?;
    let cw = factor_bound(&sub_tw).map_err(|e| e.context("character shift: sub-representation"))?;
    let cq = factor_bound(&quotient_tw).map_err(|e| e.context("character shift: quotient"))?;
    Ok(BoundCertificate {
        rule: Rule::CharacterShift,
        value: cw.value * cq.value,
        metadata: BTreeMap::new(),
        children: vec![cw, cq],
    }
    .with("dim_sub", json!(w.rank()))
    .with("dim_quotient", json!(rep.dim() - w.rank()))
    .with("chi", json!(chi.values))
    .with("chi_source", json!(source))
    .with("neighbourhoods", json!("balanced")))
}

/// `δ̄ = 1` for a solvable algebra with `F` in the connected group. The
/// metadata records the invariant flag of weight lines and planes.
pub fn solvable_bound(rep: &Representation) -> Result<BoundCertificate> {
    if !rep.algebra().is_solvable() {
        return Err(Error::NotSolvable);
    }
    if !rep.connected() {
        return Err(Error::FNotConnected);
    }
    let flag = rep.lie_flag()?;
    let dims: Vec<usize> = flag.iter().map(|s| s.dim).collect();
    let weights: Vec<String> = flag.iter().map(|s| format_weight(&s.weight)).collect();
    Ok(BoundCertificate::leaf(Rule::SolvableSharp, 1.0)
        .with("dim", json!(rep.dim()))
        .with("flag_step_dims", json!(dims))
        .with("flag_weights", json!(weights))
        .with("det_one", json!(dets_are_one(rep))))
}

/// `B_θ(x, y) = -B(x, θy)`, checked symmetric positive definite.
pub fn b_theta(alg: &LieAlgebra, theta: &Mat) -> Result<Mat> {
    let n = alg.dim();
    if theta.nrows() != n || theta.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: theta.nrows(),
        });
    }
    let b = alg.killing_form();
    let g = -(&b * theta);
    let asym = linalg::max_abs(&(&g - g.transpose()));
    let (roots, min_eigenvalue) = linalg::spd_roots(&g);
    if asym > 1e-8 * (1.0 + linalg::max_abs(&b)) || roots.is_none() {
        return Err(Error::ThetaNotCartan {
            min_eigenvalue: if roots.is_none() { min_eigenvalue } else { -asym },
        });
    }
    Ok((&g + g.transpose()) * 0.5)
}

/// `ρ^{-d/2}` with `ρ` measured in the `B_θ` inner product and `d` the
/// maximal nilpotent orbit dimension. Without `θ` this falls back to the
/// Euclidean trivial bound and says so in the metadata.
pub fn semisimple_bound(
    alg: &LieAlgebra,
    rep: &Representation,
    theta: Option<&Mat>,
) -> Result<BoundCertificate> {
    if rep.dim() != alg.dim() {
        return Err(Error::DimensionMismatch {
            expected: alg.dim(),
            got: rep.dim(),
        });
    }
    let d = alg.max_nilpotent_orbit_dim()?;
    let Some(theta) = theta else {
        return Ok(trivial_bound(rep, &InnerProduct::Euclidean)?
            .with("annotation", json!("no Cartan involution supplied; trivial bound used"))
            .with("d", json!(d)));
    };
    let g = b_theta(alg, theta)?;
    let rho = rep.operator_norm_sup(Some(&g))?.max(1.0);
    let value = rho.powf(-(d as f64) / 2.0);
    Ok(BoundCertificate::leaf(Rule::SemisimpleOrbit, value)
        .with("rho", json!(rho))
        .with("d", json!(d))
        .with("dim", json!(alg.dim()))
        .with("inner_product", json!("B_theta")))
}

/// `Π ρ_λ^{-dim U_λ}` over the real isotypic components of every level, with
/// `ρ_λ` the norm of the determinant-one rescaling on `U_λ`.
pub fn radical_root_product_bound(
    rep_r: &Representation,
    decomp: &[WeightDecomposition],
) -> Result<BoundCertificate> {
    let mut children = Vec::new();
    for level in decomp {
        let level_rep = rep_r.compressed(&level.level_basis);
        for comp in &level.real_components {
            let sub = level_rep
                .induced(&comp.space, InducedMode::Sub)
                .map_err(|e| e.context(format!("level {} weight {}", level.level, format_weight(&comp.weight))))?;
            let bar = sub.rescale_det_one()?;
            let rho = bar.operator_norm_sup(None)?.max(1.0);
            let dim = comp.space.rank();
            let value = rho.powi(-(dim as i32));
            children.push(
                BoundCertificate::leaf(Rule::TrivialBound, value)
                    .with("rho", json!(rho))
                    .with("dim", json!(dim))
                    .with("level", json!(level.level))
                    .with("weight", json!(format_weight(&comp.weight)))
                    .with("conjugate_pair", json!(comp.conjugate_pair))
                    .with("inner_product", json!("euclidean"))
                    .with("open_problem", json!(rho > 1.0 + 1e-9)),
            );
        }
    }
    let value = children.iter().map(|c| c.value).product();
    Ok(BoundCertificate {
        rule: Rule::RadicalRootProduct,
        value,
        metadata: BTreeMap::new(),
        children,
    }
    .with("levels", json!(decomp.len())))
}

/// Whether `rep` is the adjoint representation of its algebra.
pub fn is_adjoint(rep: &Representation) -> bool {
    let alg = rep.algebra();
    rep.dim() == alg.dim()
        && rep
            .action()
            .iter()
            .enumerate()
            .all(|(i, m)| (m - alg.ad_basis(i)).norm() <= 1e-10 * (1.0 + m.norm()))
}

/// Bound on `δ_F` for the adjoint representation: the solvable theorem, the
/// nilpotent orbit bound, or the reduction along the radical.
pub fn full_pipeline(adjoint: &Representation, theta: Option<&Mat>) -> Result<BoundCertificate> {
    let alg = adjoint.algebra_arc();
    let uni = alg.is_unimodular();
    if let Some((index, trace)) = uni.witness {
        return Err(Error::NotUnimodular { index, trace });
    }
    if !is_adjoint(adjoint) {
        return Err(Error::Invalid("representation is not the adjoint representation".into()));
    }
    let n = alg.dim();
    let rad = alg.radical()?;
    if rad.rank() == n {
        return solvable_bound(adjoint).map_err(|e| e.context("solvable algebra"));
    }
    if rad.rank() == 0 {
        return semisimple_bound(&alg, adjoint, theta).map_err(|e| e.context("semisimple algebra"));
    }

    // Semisimple quotient.
    let q_alg = Arc::new(alg.quotient(&rad)?);
    let q_induced = adjoint.induced(&rad, InducedMode::Quotient)?;
    let q_action = (0..q_alg.dim()).map(|i| q_alg.ad_basis(i)).collect();
    let q_rep = Representation::new(q_alg.clone(), q_alg.dim(), q_action, q_induced.group().to_vec())?
        .with_connected(adjoint.connected());
    let comp = rad.complement();
    let q_theta = theta.map(|t| comp.basis().transpose() * t * comp.basis());
    let ss = semisimple_bound(&q_alg, &q_rep, q_theta.as_ref()).map_err(|e| e.context("semisimple quotient"))?;

    // Radical.
    let ra = radical_analysis_at(adjoint, rad.clone())?;
    let r_alg = ra.algebra.clone();
    let r_sub = ra.sub;
    let rr = radical_root_product_bound(&ra.representation, &ra.levels).map_err(|e| e.context("radical"))?;

    let mut cert = reduction_compose(ss.clone(), rr)
        .with("radical_rank", json!(rad.rank()))
        .with("split", json!("radical"));
    if r_alg.derived_algebra().rank() == 0
        && rad.rank() == q_alg.dim()
        && has_invertible_intertwiner(&r_sub, &q_induced)
    {
        cert = cert
            .with("sharper_bound", json!(ss.value * ss.value))
            .with(
                "annotation",
                json!("radical is the adjoint module of the quotient (tangent group): sharper bound reported, not certified"),
            );
    }
    Ok(cert)
}

/// The radical of an adjoint representation with its level-wise weights.
#[derive(Debug, Clone)]
pub struct RadicalAnalysis {
    pub radical: Subspace,
    pub algebra: Arc<LieAlgebra>,
    /// `F` acting on the radical, as a representation of the ambient algebra.
    pub sub: Representation,
    /// The same action restricted to the radical subalgebra.
    pub representation: Representation,
    pub levels: Vec<WeightDecomposition>,
}

pub fn radical_analysis(adjoint: &Representation) -> Result<RadicalAnalysis> {
    if !is_adjoint(adjoint) {
        return Err(Error::Invalid("representation is not the adjoint representation".into()));
    }
    let rad = adjoint.algebra().radical()?;
    radical_analysis_at(adjoint, rad)
}

fn radical_analysis_at(adjoint: &Representation, rad: Subspace) -> Result<RadicalAnalysis> {
    let algebra = Arc::new(adjoint.algebra().subalgebra(&rad)?);
    let sub = adjoint.induced(&rad, InducedMode::Sub)?;
    let representation = sub.restrict_algebra(algebra.clone(), rad.basis())?;
    let terms = algebra.derived_series().terms;
    let levels = representation
        .weight_decomposition(&terms)
        .map_err(|e| e.context("radical weight decomposition"))?;
    Ok(RadicalAnalysis { radical: rad, algebra, sub, representation, levels })
}

/// A proper nonzero `F`-invariant subspace to split at: the radical or the
/// derived algebra for adjoint representations, else the first step of the
/// invariant flag of a solvable action.
pub fn default_split(rep: &Representation) -> Option<Subspace> {
    let n = rep.dim();
    let proper = |s: &Subspace| s.rank() > 0 && s.rank() < n;
    let invariant = |s: &Subspace| rep.invariance_leakage(s) <= 1e-7;
    let mut candidates = Vec::new();
    if is_adjoint(rep) {
        if let Ok(r) = rep.algebra().radical() {
            candidates.push(r);
        }
        candidates.push(rep.algebra().derived_algebra());
    }
    if rep.algebra().is_solvable() {
        if let Ok(flag) = rep.lie_flag() {
            candidates.extend(flag.into_iter().map(|s| s.space));
        }
    }
    candidates.into_iter().find(|s| proper(s) && invariant(s))
}

/// `ρ^{-dim}` with `ρ` the operator norm in the gauge of a box with the given
/// half-widths, which bounds `δ_F` of that box.
pub fn box_trivial_bound(rep: &Representation, half_widths: &[f64]) -> Result<BoundCertificate> {
    let n = rep.dim();
    if half_widths.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: half_widths.len() });
    }
    let mut rho = 1.0f64;
    for g in rep.group() {
        let m = &g.matrix;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| (m[(i, j)] * half_widths[j] / half_widths[i]).abs()).sum();
            rho = rho.max(row);
        }
    }
    Ok(BoundCertificate::leaf(Rule::TrivialBound, rho.powi(-(n as i32)))
        .with("rho", json!(rho))
        .with("dim", json!(n))
        .with("inner_product", json!("box gauge")))
}

/// Whether two representations of the same algebra admit an invertible
/// intertwiner `T π_a(x) = π_b(x) T`.
fn has_invertible_intertwiner(a: &Representation, b: &Representation) -> bool {
    let n = a.dim();
    if b.dim() != n || n == 0 {
        return false;
    }
    // vec(T π_a - π_b T) = (π_aᵀ ⊗ I - I ⊗ π_b) vec(T).
    let eye = Mat::identity(n, n);
    let blocks: Vec<Mat> = a
        .action()
        .iter()
        .zip(b.action())
        .map(|(pa, pb)| pa.transpose().kronecker(&eye) - eye.kronecker(pb))
        .collect();
    let rows = blocks.len() * n * n;
    let mut stacked = Mat::zeros(rows, n * n);
    for (k, blk) in blocks.iter().enumerate() {
        stacked.view_mut((k * n * n, 0), (n * n, n * n)).copy_from(blk);
    }
    let ns = linalg::null_space(&stacked, Cutoff::new(1e-8, 1e-10));
    if ns.ncols() == 0 {
        return false;
    }
    // A fixed generic combination of the intertwiners.
    let mut t = Mat::zeros(n, n);
    for (k, col) in ns.column_iter().enumerate() {
        let c = 1.0 + 0.618_033_988_75 * (k as f64 + 1.0).sqrt();
        for j in 0..n {
            for i in 0..n {
                t[(i, j)] += c * col[j * n + i];
            }
        }
    }
    linalg::rank(&t, Cutoff::new(1e-8, 1e-12)) == n
}

/// Chooses a rule for an arbitrary representation: the full pipeline for
/// adjoint representations, the solvable theorem where it applies, and the
/// trivial bound otherwise.
pub fn bound_representation(rep: &Representation, theta: Option<&Mat>) -> Result<BoundCertificate> {
    if is_adjoint(rep) && rep.algebra().is_unimodular().unimodular {
        return full_pipeline(rep, theta);
    }
    if dets_are_one(rep) && rep.connected() && rep.algebra().is_solvable() {
        return solvable_bound(rep);
    }
    let cert = trivial_bound(rep, &InnerProduct::Euclidean)?;
    let open = !rep.algebra().is_solvable() && !is_adjoint(rep);
    Ok(cert.with("open_problem", json!(open)))
}
