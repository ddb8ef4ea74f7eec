//! Finite-dimensional real representations of a Lie algebra together with a
//! finite symmetric set `F` of group matrices.

use std::sync::Arc;

use nalgebra::Schur;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{LieAlgebra, Subspace};
use crate::linalg::{self, Cutoff, CMat, Mat, Vector, C64};

/// Relative tolerance of the homomorphism check.
pub const HOMOMORPHISM_TOL: f64 = 1e-8;
/// Relative tolerance of invariance checks.
pub const INVARIANCE_TOL: f64 = 1e-7;
/// Eigenvalue clustering and weight equality tolerance (times the scale).
pub const WEIGHT_TOL: f64 = 1e-6;
/// Tolerance on determinants after rescaling or twisting.
pub const DET_TOL: f64 = 1e-9;

const INVERSE_MATCH_TOL: f64 = 1e-8;
const WEIGHT_SEED: u64 = 0x5eed_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    pub label: String,
    pub matrix: Mat,
}

impl GroupElement {
    pub fn new(label: impl Into<String>, matrix: Mat) -> Self {
        Self {
            label: label.into(),
            matrix,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InducedMode {
    Sub,
    Quotient,
}

#[derive(Debug, Clone)]
pub struct Representation {
    algebra: Arc<LieAlgebra>,
    dim: usize,
    action: Vec<Mat>,
    group: Vec<GroupElement>,
    connected: bool,
}

impl Representation {
    /// Validates the homomorphism property and invertibility, and closes `F`
    /// under inversion by adjoining missing inverses.
    pub fn new(
        algebra: Arc<LieAlgebra>,
        dim: usize,
        action: Vec<Mat>,
        group: Vec<GroupElement>,
    ) -> Result<Self> {
        let rep = Self::unchecked(algebra, dim, action, group)?;
        rep.check_homomorphism()?;
        let group = close_under_inverses(rep.group)?;
        Ok(Self { group, ..rep })
    }

    fn unchecked(
        algebra: Arc<LieAlgebra>,
        dim: usize,
        action: Vec<Mat>,
        group: Vec<GroupElement>,
    ) -> Result<Self> {
        if action.len() != algebra.dim() {
            return Err(Error::DimensionMismatch {
                expected: algebra.dim(),
                got: action.len(),
            });
        }
        for m in action.iter().chain(group.iter().map(|g| &g.matrix)) {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: if m.nrows() != dim { m.nrows() } else { m.ncols() },
                });
            }
        }
        Ok(Self {
            algebra,
            dim,
            action,
            group,
            connected: false,
        })
    }

    /// Declares whether `F` lies in the connected group generated by the
    /// algebra action.
    pub fn with_connected(mut self, connected: bool) -> Self {
        self.connected = connected;
        self
    }

    /// The adjoint representation with the given group matrices.
    pub fn adjoint(algebra: Arc<LieAlgebra>, group: Vec<GroupElement>) -> Result<Self> {
        let n = algebra.dim();
        let action = (0..n).map(|i| algebra.ad_basis(i)).collect();
        Self::new(algebra, n, action, group)
    }

    /// `F = {I} ∪ {exp(±t π(x)) : x in generators}`, declared connected.
    pub fn from_exponentials(
        algebra: Arc<LieAlgebra>,
        dim: usize,
        action: Vec<Mat>,
        generators: &[(String, Vector)],
        t: f64,
    ) -> Result<Self> {
        let probe = Self::unchecked(algebra.clone(), dim, action.clone(), Vec::new())?;
        let mut group = vec![GroupElement::new("I", Mat::identity(dim, dim))];
        for (name, x) in generators {
            let px = probe.action_of(x)?;
            group.push(GroupElement::new(format!("exp(+{t}*{name})"), linalg::expm(&(&px * t))));
            group.push(GroupElement::new(format!("exp(-{t}*{name})"), linalg::expm(&(&px * -t))));
        }
        Ok(Self::new(algebra, dim, action, group)?.with_connected(true))
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    pub fn algebra_arc(&self) -> Arc<LieAlgebra> {
        self.algebra.clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn action(&self) -> &[Mat] {
        &self.action
    }

    pub fn group(&self) -> &[GroupElement] {
        &self.group
    }

    pub fn connected(&self) -> bool {
        self.connected
    }

    /// Replaces `F`, re-closing under inversion.
    pub fn with_group(&self, group: Vec<GroupElement>) -> Result<Self> {
        let rep = Self::unchecked(self.algebra.clone(), self.dim, self.action.clone(), group)?;
        let group = close_under_inverses(rep.group)?;
        Ok(Self {
            group,
            connected: self.connected,
            ..rep
        })
    }

    /// `π(x)` for an algebra vector `x`.
    pub fn action_of(&self, x: &Vector) -> Result<Mat> {
        if x.len() != self.algebra.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.algebra.dim(),
                got: x.len(),
            });
        }
        let mut m = Mat::zeros(self.dim, self.dim);
        for (i, a) in self.action.iter().enumerate() {
            if x[i] != 0.0 {
                m += a * x[i];
            }
        }
        Ok(m)
    }

    pub(crate) fn action_scale(&self) -> f64 {
        1.0 + self.action.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    /// Max over basis pairs of `||π([e_i,e_j]) - [π(e_i), π(e_j)]||`.
    pub fn homomorphism_residual(&self) -> f64 {
        let n = self.algebra.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let br = self.algebra.bracket(&self.algebra.basis_vector(i), &self.algebra.basis_vector(j));
                let lhs = self.action_of(&br.expect("basis vectors")).expect("dimension");
                let rhs = &self.action[i] * &self.action[j] - &self.action[j] * &self.action[i];
                worst = worst.max((lhs - rhs).norm());
            }
        }
        worst
    }

    fn check_homomorphism(&self) -> Result<()> {
        let s = self.action_scale();
        let tolerance = HOMOMORPHISM_TOL * s * s;
        let residual = self.homomorphism_residual();
        if residual > tolerance {
            return Err(Error::HomomorphismResidual { residual, tolerance });
        }
        Ok(())
    }

    /// Largest relative leakage of `w` under the action and `F`.
    pub fn invariance_leakage(&self, w: &Subspace) -> f64 {
        self.action
            .iter()
            .chain(self.group.iter().map(|g| &g.matrix))
            .map(|m| linalg::leakage(m, w.basis()) / m.norm().max(1.0))
            .fold(0.0, f64::max)
    }

    /// Restriction to an invariant subspace or the induced action on the
    /// orthogonal complement, which stands in for `V/W`.
    pub fn induced(&self, w: &Subspace, mode: InducedMode) -> Result<Representation> {
        if w.ambient_dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: w.ambient_dim(),
            });
        }
        let leakage = self.invariance_leakage(w);
        if leakage > INVARIANCE_TOL {
            return Err(Error::NotInvariant { leakage });
        }
        let basis = match mode {
            InducedMode::Sub => w.basis().clone(),
            InducedMode::Quotient => w.complement().basis().clone(),
        };
        Ok(self.compressed(&basis))
    }

    /// `Bᵀ M B` for every matrix, for an orthonormal `B` whose span (or the
    /// span together with an invariant subspace below it) is already known
    /// to be invariant. No check is made.
    pub fn compressed(&self, basis: &Mat) -> Representation {
        let bt = basis.transpose();
        let action = self.action.iter().map(|m| &bt * m * basis).collect();
        let group = self
            .group
            .iter()
            .map(|g| GroupElement::new(g.label.clone(), &bt * &g.matrix * basis))
            .collect();
        Representation {
            algebra: self.algebra.clone(),
            dim: basis.ncols(),
            action,
            group,
            connected: self.connected,
        }
    }

    /// Restricts the algebra action to a subalgebra whose basis is given by
    /// the columns of `embedding` (coordinates in the original algebra).
    pub fn restrict_algebra(&self, sub: Arc<LieAlgebra>, embedding: &Mat) -> Result<Representation> {
        if embedding.nrows() != self.algebra.dim() || embedding.ncols() != sub.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.algebra.dim(),
                got: embedding.nrows(),
            });
        }
        let action = (0..sub.dim())
            .map(|a| self.action_of(&embedding.column(a).into_owned()))
            .collect::<Result<Vec<_>>>()?;
        let rep = Representation {
            algebra: sub,
            dim: self.dim,
            action,
            group: self.group.clone(),
            connected: self.connected,
        };
        rep.check_homomorphism()?;
        Ok(rep)
    }

    /// Sup over `F` of the operator norm in the inner product with Gram
    /// matrix `inner` (Euclidean when `None`). Returns 1 for empty `F`.
    pub fn operator_norm_sup(&self, inner: Option<&Mat>) -> Result<f64> {
        if self.dim == 0 || self.group.is_empty() {
            return Ok(1.0);
        }
        let (roots, min_eigenvalue) = match inner {
            None => (None, 1.0),
            Some(g) => {
                if g.nrows() != self.dim || g.ncols() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: g.nrows(),
                    });
                }
                let (roots, min) = linalg::spd_roots(g);
                match roots {
                    Some(r) => (Some(r), min),
                    None => return Err(Error::InnerProductNotPD { min_eigenvalue: min }),
                }
            }
        };
        let _ = min_eigenvalue;
        Ok(self
            .group
            .iter()
            .map(|g| match &roots {
                None => linalg::spectral_norm(&g.matrix),
                Some((s, s_inv)) => linalg::spectral_norm(&(s * &g.matrix * s_inv)),
            })
            .fold(0.0, f64::max))
    }

    /// `χ(g) = det π(g)` on `F`, with differential `x -> trace π(x)`.
    pub fn determinant_character(&self) -> Result<Character> {
        let mut values = Vec::with_capacity(self.group.len());
        for g in &self.group {
            let det = if self.dim == 0 { 1.0 } else { g.matrix.determinant() };
            if !(det > 0.0) {
                return Err(Error::NonPositiveDeterminant {
                    label: g.label.clone(),
                    det,
                });
            }
            values.push(det);
        }
        Ok(Character {
            labels: self.group.iter().map(|g| g.label.clone()).collect(),
            values,
            differential: Some(self.action.iter().map(|m| m.trace()).collect()),
        })
    }

    /// `π̄(g) = det(π(g))^{-1/d} π(g)`; the algebra action loses its trace.
    /// Matrices whose determinant is already within `1e-12` of one are kept
    /// as they are.
    pub fn rescale_det_one(&self) -> Result<Representation> {
        let chi = self.determinant_character()?;
        if self.dim == 0 {
            return Ok(self.clone());
        }
        let d = self.dim as f64;
        let eye = Mat::identity(self.dim, self.dim);
        let group = self
            .group
            .iter()
            .zip(&chi.values)
            .map(|(g, &det)| {
                if (det - 1.0).abs() <= 1e-12 {
                    g.clone()
                } else {
                    GroupElement::new(g.label.clone(), &g.matrix * det.powf(-1.0 / d))
                }
            })
            .collect();
        let action = self
            .action
            .iter()
            .map(|m| {
                let tr = m.trace();
                if tr == 0.0 {
                    m.clone()
                } else {
                    m - &eye * (tr / d)
                }
            })
            .collect();
        Ok(Representation {
            group,
            action,
            ..self.clone()
        })
    }

    /// `π^χ(g) = χ(g)^{direction/d} π(g)`. Values exactly equal to one leave
    /// the matrix untouched.
    pub fn twist_by_character(&self, chi: &Character, direction: i32) -> Result<Representation> {
        if chi.values.len() != self.group.len() {
            return Err(Error::DimensionMismatch {
                expected: self.group.len(),
                got: chi.values.len(),
            });
        }
        chi.check_positive()?;
        if self.dim == 0 {
            return Ok(self.clone());
        }
        let d = self.dim as f64;
        let e = f64::from(direction);
        let mut group = Vec::with_capacity(self.group.len());
        for (g, &c) in self.group.iter().zip(&chi.values) {
            if c == 1.0 {
                group.push(g.clone());
                continue;
            }
            let m = &g.matrix * c.powf(e / d);
            let before = g.matrix.determinant();
            let after = m.determinant();
            let expected = c.powf(e) * before;
            if (after - expected).abs() > DET_TOL * expected.abs().max(1.0) {
                return Err(Error::Invalid(format!(
                    "twist of '{}' has determinant {after:.6e}, expected {expected:.6e}",
                    g.label
                )));
            }
            group.push(GroupElement::new(g.label.clone(), m));
        }
        let action = match &chi.differential {
            Some(diff) if diff.len() == self.action.len() => {
                let eye = Mat::identity(self.dim, self.dim);
                self.action
                    .iter()
                    .zip(diff)
                    .map(|(m, &dc)| if dc == 0.0 { m.clone() } else { m + &eye * (e * dc / d) })
                    .collect()
            }
            _ => self.action.clone(),
        };
        Ok(Representation {
            group,
            action,
            ..self.clone()
        })
    }

    /// Rep of the level `V_k / V_{k+1}` for nested invariant subspaces,
    /// realized on `V_k ⊖ V_{k+1}`. Returns the rep and its basis in `V`.
    pub fn level_representation(&self, upper: &Subspace, lower: &Subspace) -> Result<(Representation, Mat)> {
        let sub = self.induced(upper, InducedMode::Sub)?;
        let lower_in_upper = Subspace::span(&(upper.basis().transpose() * lower.basis()), Cutoff::new(1e-8, 1e-12));
        let comp = lower_in_upper.complement();
        let level = sub.induced(&lower_in_upper, InducedMode::Quotient)?;
        Ok((level, upper.basis() * comp.basis()))
    }

    /// Simultaneous complex diagonalization of the algebra action on each
    /// level `levels[k] / levels[k+1]` (a trailing zero level is implied).
    pub fn weight_decomposition(&self, levels: &[Subspace]) -> Result<Vec<WeightDecomposition>> {
        let mut out = Vec::with_capacity(levels.len());
        let derived = self.algebra.derived_algebra();
        for (k, upper) in levels.iter().enumerate() {
            if upper.rank() == 0 {
                break;
            }
            let zero = Subspace::zero(self.dim);
            let lower = levels.get(k + 1).unwrap_or(&zero);
            let (level_rep, level_basis) = self.level_representation(upper, lower)?;
            let scale = level_rep.action_scale();
            for y in derived.basis().column_iter() {
                let norm = level_rep.action_of(&y.into_owned())?.norm();
                if norm > INVARIANCE_TOL * scale {
                    return Err(Error::DerivedActionNonzero { level: k, norm });
                }
            }
            let weights = simultaneous_eigenspaces(level_rep.action(), k)?;
            let real_components = real_components(&weights, scale)?;
            out.push(WeightDecomposition {
                level: k,
                level_basis,
                weights,
                real_components,
            });
        }
        Ok(out)
    }

    /// An invariant flag `0 ⊂ S_1 ⊂ ... ⊂ V` whose steps are weight lines
    /// (real weights) or planes (complex pairs), built by repeatedly finding
    /// a common eigenvector in the quotient. Requires a solvable algebra.
    pub fn lie_flag(&self) -> Result<Vec<FlagStep>> {
        let derived = self.algebra.derived_algebra();
        let mut current = Subspace::zero(self.dim);
        let mut steps = Vec::new();
        while current.rank() < self.dim {
            let quotient = self.induced(&current, InducedMode::Quotient)?;
            let p = current.complement().basis().clone();
            let (u, weight) = common_eigenvector(&quotient, &derived)?;
            let lifted = &p * u;
            let mut cols: Vec<Vector> = current.basis().column_iter().map(|c| c.into_owned()).collect();
            cols.extend(lifted.column_iter().map(|c| c.into_owned()));
            let next = Subspace::span(&Mat::from_columns(&cols), Cutoff::new(1e-8, 1e-12));
            if next.rank() <= current.rank() {
                return Err(Error::Invalid("flag construction stalled".into()));
            }
            steps.push(FlagStep {
                dim: next.rank() - current.rank(),
                weight,
                space: next.clone(),
            });
            current = next;
        }
        Ok(steps)
    }
}

fn close_under_inverses(mut group: Vec<GroupElement>) -> Result<Vec<GroupElement>> {
    let original = group.len();
    for idx in 0..original {
        let g = &group[idx];
        let sv = g.matrix.clone().singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let inv = if g.matrix.nrows() == 0 {
            Some(g.matrix.clone())
        } else if smin > 1e-13 * smax && smax.is_finite() {
            g.matrix.clone().try_inverse()
        } else {
            None
        };
        let inv = inv.ok_or_else(|| Error::SingularGroupMatrix { label: g.label.clone() })?;
        let tol = INVERSE_MATCH_TOL * (1.0 + inv.norm());
        if !group.iter().any(|h| (&h.matrix - &inv).norm() <= tol) {
            let label = format!("{}^-1", group[idx].label);
            group.push(GroupElement::new(label, inv));
        }
    }
    Ok(group)
}

/// A positive character on `F`, stored by its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Character {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
    /// Optional differential, one value per algebra basis element.
    pub differential: Option<Vec<f64>>,
}

impl Character {
    pub fn trivial(rep: &Representation) -> Self {
        Self {
            labels: rep.group().iter().map(|g| g.label.clone()).collect(),
            values: vec![1.0; rep.group().len()],
            differential: Some(vec![0.0; rep.algebra().dim()]),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0)
    }

    pub fn inverse(&self) -> Self {
        Self {
            labels: self.labels.clone(),
            values: self.values.iter().map(|v| 1.0 / v).collect(),
            differential: self.differential.as_ref().map(|d| d.iter().map(|v| -v).collect()),
        }
    }

    pub fn check_positive(&self) -> Result<()> {
        for (label, &value) in self.labels.iter().zip(&self.values) {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveCharacter {
                    label: label.clone(),
                    value,
                });
            }
        }
        Ok(())
    }

    /// Largest `|χ(g) χ(g⁻¹) - 1|` over inverse pairs of `F`.
    pub fn pairing_defect(&self, rep: &Representation) -> f64 {
        let group = rep.group();
        let mut worst = 0.0_f64;
        for (i, g) in group.iter().enumerate() {
            let Some(inv) = g.matrix.clone().try_inverse() else { continue };
            let tol = INVERSE_MATCH_TOL * (1.0 + inv.norm());
            if let Some(j) = group.iter().position(|h| (&h.matrix - &inv).norm() <= tol) {
                worst = worst.max((self.values[i] * self.values[j] - 1.0).abs());
            }
        }
        worst
    }

    /// Sup of `max(χ, 1/χ)` over `F`.
    pub fn sup(&self) -> f64 {
        self.values.iter().map(|&v| v.max(1.0 / v)).fold(1.0, f64::max)
    }
}

/// A complex weight with its weight space in level coordinates.
#[derive(Debug, Clone)]
pub struct Weight {
    pub values: Vec<C64>,
    pub space: CMat,
}

impl Weight {
    pub fn multiplicity(&self) -> usize {
        self.space.ncols()
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.values.iter().all(|v| v.im.abs() <= tol)
    }
}

/// Real isotypic component: a real weight space, or the real part of a
/// conjugate pair of weight spaces.
#[derive(Debug, Clone)]
pub struct RealComponent {
    pub weight: Vec<C64>,
    pub conjugate_pair: bool,
    /// Subspace of the level, in level coordinates.
    pub space: Subspace,
}

#[derive(Debug, Clone)]
pub struct WeightDecomposition {
    pub level: usize,
    /// Orthonormal basis of the level inside `V` (columns).
    pub level_basis: Mat,
    pub weights: Vec<Weight>,
    pub real_components: Vec<RealComponent>,
}

impl WeightDecomposition {
    pub fn level_dim(&self) -> usize {
        self.level_basis.ncols()
    }

    /// `||Σ P_U - I||` over the real components.
    pub fn projector_defect(&self) -> f64 {
        let n = self.level_dim();
        let mut sum = Mat::zeros(n, n);
        for c in &self.real_components {
            sum += c.space.projector();
        }
        linalg::max_abs(&(sum - Mat::identity(n, n)))
    }
}

#[derive(Debug, Clone)]
pub struct FlagStep {
    pub dim: usize,
    pub weight: Vec<C64>,
    pub space: Subspace,
}

/// Formats a complex weight as `a+bi` entries.
pub fn format_weight(values: &[C64]) -> String {
    let parts: Vec<String> = values
        .iter()
        .map(|v| {
            let re = clean(v.re);
            let im = clean(v.im);
            if im == 0.0 {
                format!("{re}")
            } else if im > 0.0 {
                format!("{re}+{im}i")
            } else {
                format!("{re}{im}i")
            }
        })
        .collect();
    format!("({})", parts.join(", "))
}

fn clean(v: f64) -> f64 {
    let r = (v * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn complex_eigenvalues(a: &CMat) -> Vec<C64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    Schur::new(a.clone()).eigenvalues().map(|v| v.iter().cloned().collect()).unwrap_or_default()
}

/// Groups nearby eigenvalues; returns cluster means and multiplicities in a
/// deterministic order.
fn cluster(values: &[C64], tol: f64) -> Vec<(C64, usize)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut clusters: Vec<(C64, usize)> = Vec::new();
    for v in sorted {
        if let Some(c) = clusters.iter_mut().find(|(m, _)| (*m - v).norm() <= tol) {
            let n = c.1 as f64;
            c.0 = (c.0 * n + v) / (n + 1.0);
            c.1 += 1;
        } else {
            clusters.push((v, 1));
        }
    }
    clusters
}

/// Right singular vectors of `m` for its `count` smallest singular values,
/// and the largest of those values.
fn smallest_singular_vectors(m: &CMat, count: usize) -> (CMat, f64) {
    let n = m.ncols();
    let svd = nalgebra::SVD::new(m.clone(), false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let chosen = &order[..count.min(order.len())];
    let residual = chosen.iter().map(|&i| svd.singular_values[i]).fold(0.0, f64::max);
    (CMat::from_fn(n, chosen.len(), |r, c| v_t[(chosen[c], r)].conj()), residual)
}

/// Splits the invariant block `e` into eigenspaces of `a` restricted to it.
fn split_block(e: &CMat, a: &CMat, tol: f64) -> std::result::Result<Vec<CMat>, f64> {
    let m = e.ncols();
    let restricted = e.adjoint() * a * e;
    let eig = complex_eigenvalues(&restricted);
    let clusters = cluster(&eig, tol);
    if clusters.len() == 1 {
        let mu = clusters[0].0;
        let shifted = &restricted - CMat::identity(m, m) * mu;
        let residual = shifted.norm();
        return if residual <= tol { Ok(vec![e.clone()]) } else { Err(residual) };
    }
    let mut blocks = Vec::with_capacity(clusters.len());
    for (mu, mult) in clusters {
        let shifted = &restricted - CMat::identity(m, m) * mu;
        let (vecs, residual) = smallest_singular_vectors(&shifted, mult);
        if residual > tol {
            return Err(residual);
        }
        blocks.push(e * vecs);
    }
    Ok(blocks)
}

fn simultaneous_eigenspaces(action: &[Mat], level: usize) -> Result<Vec<Weight>> {
    let n = action.first().map(|m| m.nrows()).unwrap_or(0);
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = 1.0 + action.iter().map(|m| m.norm()).fold(0.0, f64::max);
    let tol = WEIGHT_TOL * scale;
    let complex: Vec<CMat> = action.iter().map(linalg::to_complex).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(WEIGHT_SEED.wrapping_add(level as u64));
    let mut generic = CMat::zeros(n, n);
    for a in &complex {
        let c: f64 = StandardNormal.sample(&mut rng);
        generic += a * C64::new(c, 0.0);
    }
    let mut blocks = split_block(&CMat::identity(n, n), &generic, tol)
        .map_err(|residual| Error::NotSimultaneouslyDiagonalizable { level, residual })?;
    for a in &complex {
        let mut refined = Vec::new();
        for b in &blocks {
            let parts = split_block(b, a, tol)
                .map_err(|residual| Error::NotSimultaneouslyDiagonalizable { level, residual })?;
            refined.extend(parts);
        }
        blocks = refined;
    }
    let mut weights: Vec<Weight> = Vec::new();
    for b in blocks {
        let m = b.ncols() as f64;
        let mut values = Vec::with_capacity(complex.len());
        for a in &complex {
            let lambda = (b.adjoint() * a * &b).trace() / C64::new(m, 0.0);
            let residual = (a * &b - &b * lambda).norm();
            if residual > tol {
                return Err(Error::NotSimultaneouslyDiagonalizable { level, residual });
            }
            values.push(lambda);
        }
        if let Some(w) = weights.iter_mut().find(|w| max_dist(&w.values, &values) <= tol) {
            let mut cols: Vec<_> = w.space.column_iter().map(|c| c.into_owned()).collect();
            cols.extend(b.column_iter().map(|c| c.into_owned()));
            w.space = CMat::from_columns(&cols);
        } else {
            weights.push(Weight { values, space: b });
        }
    }
    weights.sort_by(|a, b| compare_weights(&a.values, &b.values));
    Ok(weights)
}

fn compare_weights(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != std::cmp::Ordering::Equal && (x - y).norm() > 1e-9 {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

fn max_dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn real_span(e: &CMat) -> Subspace {
    let n = e.nrows();
    let m = e.ncols();
    let stacked = Mat::from_fn(n, 2 * m, |r, c| if c < m { e[(r, c)].re } else { e[(r, c - m)].im });
    Subspace::span(&stacked, Cutoff::new(1e-6, 1e-9))
}

fn real_components(weights: &[Weight], scale: f64) -> Result<Vec<RealComponent>> {
    let tol = WEIGHT_TOL * scale;
    let mut used = vec![false; weights.len()];
    let mut out = Vec::new();
    for i in 0..weights.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let w = &weights[i];
        if w.is_real(tol) {
            let space = real_span(&w.space);
            out.push(RealComponent {
                weight: w.values.iter().map(|v| C64::new(v.re, 0.0)).collect(),
                conjugate_pair: false,
                space,
            });
            continue;
        }
        let conj: Vec<C64> = w.values.iter().map(|v| v.conj()).collect();
        let j = (0..weights.len())
            .find(|&j| !used[j] && max_dist(&weights[j].values, &conj) <= tol)
            .ok_or_else(|| Error::Invalid("complex weight without conjugate partner".into()))?;
        used[j] = true;
        let tag = if first_imag_positive(&w.values) { w } else { &weights[j] };
        out.push(RealComponent {
            weight: tag.values.clone(),
            conjugate_pair: true,
            space: real_span(&tag.space),
        });
    }
    Ok(out)
}

fn first_imag_positive(values: &[C64]) -> bool {
    values.iter().find(|v| v.im.abs() > 1e-12).map(|v| v.im > 0.0).unwrap_or(true)
}

/// A common eigenvector of a solvable action, returned as a real basis of
/// the invariant line or plane it spans, plus its weight.
fn common_eigenvector(rep: &Representation, derived: &Subspace) -> Result<(Mat, Vec<C64>)> {
    let n = rep.dim();
    let scale = rep.action_scale();
    let tol = WEIGHT_TOL * scale;
    let complex: Vec<CMat> = rep.action().iter().map(linalg::to_complex).collect();
    // Joint kernel of the derived algebra: invariant, and the action
    // commutes on it.
    let mut e = CMat::identity(n, n);
    if derived.rank() > 0 {
        let mut rows = Vec::new();
        for y in derived.basis().column_iter() {
            rows.push(linalg::to_complex(&rep.action_of(&y.into_owned())?));
        }
        let stacked = CMat::from_fn(n * rows.len(), n, |r, c| rows[r / n][(r % n, c)]);
        let ns = linalg::complex_null_space(&stacked, tol);
        if ns.ncols() == 0 {
            return Err(Error::NotSolvable);
        }
        e = ns;
    }
    for a in &complex {
        let restricted = e.adjoint() * a * &e;
        let eig = complex_eigenvalues(&restricted);
        let clusters = cluster(&eig, tol);
        let (mu, _) = clusters
            .iter()
            .cloned()
            .max_by(|x, y| x.0.im.total_cmp(&y.0.im).then(y.0.re.total_cmp(&x.0.re)))
            .expect("nonempty block");
        let m = e.ncols();
        let shifted = &restricted - CMat::identity(m, m) * mu;
        let (vecs, residual) = smallest_singular_vectors(&shifted, 1);
        if residual > tol {
            return Err(Error::NotSimultaneouslyDiagonalizable { level: 0, residual });
        }
        // Keep the whole eigenspace so later generators can refine it.
        let full = linalg::complex_null_space(&shifted, tol.max(residual * 10.0));
        e = if full.ncols() > 0 { &e * full } else { &e * vecs };
    }
    let mut v = e.column(0).into_owned();
    let weight: Vec<C64> = complex
        .iter()
        .map(|a| (v.adjoint() * a * &v)[(0, 0)] / v.norm_squared())
        .collect();
    let real = weight.iter().all(|w| w.im.abs() <= tol);
    if real {
        let s: C64 = v.iter().map(|z| z * z).sum();
        let phase = C64::from_polar(1.0, -s.arg() / 2.0);
        v *= phase;
        let re = Vector::from_iterator(n, v.iter().map(|z| z.re));
        let basis = linalg::column_span(&Mat::from_columns(&[re]), Cutoff::new(1e-8, 1e-12));
        Ok((basis, weight.iter().map(|w| C64::new(w.re, 0.0)).collect()))
    } else {
        let re = Vector::from_iterator(n, v.iter().map(|z| z.re));
        let im = Vector::from_iterator(n, v.iter().map(|z| z.im));
        let basis = linalg::column_span(&Mat::from_columns(&[re, im]), Cutoff::new(1e-8, 1e-12));
        Ok((basis, weight))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, algebras};
    use approx::assert_abs_diff_eq;

    fn line() -> Arc<LieAlgebra> {
        Arc::new(algebras::abelian(1))
    }

    fn diag_rep(a: f64) -> Representation {
        let act = Mat::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        let g = GroupElement::new("a", Mat::from_diagonal(&Vector::from_vec(vec![a, 1.0 / a])));
        Representation::new(line(), 2, vec![act], vec![g]).unwrap()
    }

    #[test]
    fn inverses_are_adjoined_once() {
        let r = diag_rep(2.0);
        assert_eq!(r.group().len(), 2);
        assert_eq!(r.group()[1].label, "a^-1");
        let again = r.with_group(r.group().to_vec()).unwrap();
        assert_eq!(again.group().len(), 2);
    }

    #[test]
    fn homomorphism_violation_is_rejected() {
        let h = Arc::new(algebras::heisenberg());
        let zero = Mat::zeros(2, 2);
        let x = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let y = Mat::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let err = Representation::new(h, 2, vec![x, y, zero], vec![]).unwrap_err();
        assert!(matches!(err, Error::HomomorphismResidual { .. }));
    }

    #[test]
    fn singular_group_matrix_is_rejected() {
        let act = Mat::zeros(2, 2);
        let g = GroupElement::new("s", Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        let err = Representation::new(line(), 2, vec![act], vec![g]).unwrap_err();
        assert!(matches!(err, Error::SingularGroupMatrix { .. }));
    }

    #[test]
    fn heisenberg_center_sub_and_quotient() {
        let e = catalog::get("heisenberg3").unwrap();
        let rep = &e.representation;
        let center = Subspace::coordinate(3, &[2]);
        let sub = rep.induced(&center, InducedMode::Sub).unwrap();
        assert_eq!(sub.dim(), 1);
        for m in sub.action() {
            assert!(m.norm() < 1e-14);
        }
        for g in sub.group() {
            assert_abs_diff_eq!(g.matrix[(0, 0)], 1.0, epsilon = 1e-14);
        }
        let q = rep.induced(&center, InducedMode::Quotient).unwrap();
        assert_eq!(q.dim(), 2);
        for m in q.action() {
            assert!(m.norm() < 1e-14);
        }
    }

    #[test]
    fn tangent_quotient_is_sl2_adjoint() {
        let e = catalog::get("tangent_sl2").unwrap();
        let rep = &e.representation;
        let radical = Subspace::coordinate(6, &[3, 4, 5]);
        let q = rep.induced(&radical, InducedMode::Quotient).unwrap();
        // The complement basis is an orthogonal frame of span(h, e, f).
        let frame = radical.complement().basis().rows(0, 3).into_owned();
        let sl2 = algebras::sl2();
        for i in 0..3 {
            let back = &frame * &q.action()[i] * frame.transpose();
            assert!((back - sl2.ad_basis(i)).norm() < 1e-12);
        }
    }

    #[test]
    fn non_invariant_subspace_is_rejected() {
        let e = catalog::get("heisenberg3").unwrap();
        let w = Subspace::coordinate(3, &[0]);
        let err = e.representation.induced(&w, InducedMode::Sub).unwrap_err();
        assert!(matches!(err, Error::NotInvariant { .. }));
    }

    #[test]
    fn heisenberg_weights_are_zero() {
        let e = catalog::get("heisenberg3").unwrap();
        let series = e.algebra.derived_series();
        let dec = e.representation.weight_decomposition(&series.terms).unwrap();
        assert_eq!(dec.len(), 2);
        assert_eq!(dec[0].weights.len(), 1);
        assert_eq!(dec[0].weights[0].multiplicity(), 2);
        assert_eq!(dec[1].weights[0].multiplicity(), 1);
        for d in &dec {
            for w in &d.weights {
                assert!(w.values.iter().all(|v| v.norm() < 1e-9));
            }
            assert!(d.projector_defect() < 1e-7);
        }
    }

    #[test]
    fn diagonal_action_has_two_real_weights() {
        let r = diag_rep(2.0);
        let dec = r.weight_decomposition(&[Subspace::full(2)]).unwrap();
        let w = &dec[0].weights;
        assert_eq!(w.len(), 2);
        assert_abs_diff_eq!(w[0].values[0].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1].values[0].re, 1.0, epsilon = 1e-12);
        assert_eq!(dec[0].real_components.len(), 2);
        assert!(dec[0].real_components.iter().all(|c| c.space.rank() == 1));
    }

    #[test]
    fn rotation_generator_gives_one_complex_pair() {
        let rot = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let r = Representation::new(line(), 2, vec![rot], vec![]).unwrap();
        let dec = r.weight_decomposition(&[Subspace::full(2)]).unwrap();
        assert_eq!(dec[0].weights.len(), 2);
        let comps = &dec[0].real_components;
        assert_eq!(comps.len(), 1);
        assert!(comps[0].conjugate_pair);
        assert_eq!(comps[0].space.rank(), 2);
        assert_abs_diff_eq!(comps[0].weight[0].im, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn jordan_block_is_not_diagonalizable() {
        let n = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let r = Representation::new(line(), 2, vec![n], vec![]).unwrap();
        let err = r.weight_decomposition(&[Subspace::full(2)]).unwrap_err();
        assert!(matches!(err, Error::NotSimultaneouslyDiagonalizable { .. }));
    }

    #[test]
    fn determinant_character_examples() {
        let r = diag_rep(2.0);
        let chi = r.determinant_character().unwrap();
        assert!(chi.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
        let g = GroupElement::new("g", Mat::from_diagonal(&Vector::from_vec(vec![2.0, 1.0])));
        let r2 = Representation::new(line(), 2, vec![Mat::zeros(2, 2)], vec![g]).unwrap();
        assert_abs_diff_eq!(r2.determinant_character().unwrap().values[0], 2.0, epsilon = 1e-15);

        let axb = Arc::new(algebras::ax_plus_b());
        let t = 0.7;
        let g = GroupElement::new("g", linalg::expm(&(axb.ad_basis(0) * t)));
        let r3 = Representation::adjoint(axb, vec![g]).unwrap();
        assert_abs_diff_eq!(r3.determinant_character().unwrap().values[0], t.exp(), epsilon = 1e-12);

        let neg = GroupElement::new("n", Mat::from_diagonal(&Vector::from_vec(vec![-1.0, 1.0])));
        let r4 = Representation::new(line(), 2, vec![Mat::zeros(2, 2)], vec![neg]).unwrap();
        assert!(matches!(
            r4.determinant_character().unwrap_err(),
            Error::NonPositiveDeterminant { .. }
        ));
    }

    #[test]
    fn rescaling_examples() {
        let g = GroupElement::new("g", Mat::from_diagonal(&Vector::from_vec(vec![4.0, 1.0])));
        let r = Representation::new(line(), 2, vec![Mat::zeros(2, 2)], vec![g]).unwrap();
        let bar = r.rescale_det_one().unwrap();
        assert_abs_diff_eq!(bar.group()[0].matrix[(0, 0)], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(bar.group()[0].matrix[(1, 1)], 0.5, epsilon = 1e-14);
        for h in bar.group() {
            assert_abs_diff_eq!(h.matrix.determinant(), 1.0, epsilon = 1e-9);
        }
        let again = bar.rescale_det_one().unwrap();
        for (a, b) in bar.group().iter().zip(again.group()) {
            assert!((&a.matrix - &b.matrix).norm() <= 1e-12);
        }
        let one = GroupElement::new("c", Mat::from_element(1, 1, 3.5));
        let r1 = Representation::new(line(), 1, vec![Mat::from_element(1, 1, 0.2)], vec![one]).unwrap();
        let r1bar = r1.rescale_det_one().unwrap();
        for h in r1bar.group() {
            assert_abs_diff_eq!(h.matrix[(0, 0)], 1.0, epsilon = 1e-14);
        }
        assert_eq!(r1bar.action()[0][(0, 0)], 0.0);
        let unchanged = diag_rep(2.0).rescale_det_one().unwrap();
        assert_eq!(unchanged.group(), diag_rep(2.0).group());
    }

    #[test]
    fn twisting_examples() {
        let id = GroupElement::new("g", Mat::identity(2, 2));
        let r = Representation::new(line(), 2, vec![Mat::zeros(2, 2)], vec![id]).unwrap();
        let chi = Character {
            labels: vec!["g".into()],
            values: vec![4.0],
            differential: None,
        };
        let tw = r.twist_by_character(&chi, 1).unwrap();
        assert!((&tw.group()[0].matrix - Mat::identity(2, 2) * 2.0).norm() < 1e-15);
        let back = tw.twist_by_character(&chi, -1).unwrap();
        assert!((&back.group()[0].matrix - &r.group()[0].matrix).norm() < 1e-12);
        let trivial = Character::trivial(&r);
        assert_eq!(r.twist_by_character(&trivial, 1).unwrap().group(), r.group());
        let bad = Character {
            labels: vec!["g".into()],
            values: vec![-1.0],
            differential: None,
        };
        assert!(matches!(
            r.twist_by_character(&bad, 1).unwrap_err(),
            Error::NonPositiveCharacter { .. }
        ));
    }

    #[test]
    fn operator_norm_examples() {
        let id = GroupElement::new("I", Mat::identity(3, 3));
        let r = Representation::new(line(), 3, vec![Mat::zeros(3, 3)], vec![id]).unwrap();
        assert_abs_diff_eq!(r.operator_norm_sup(None).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(diag_rep(2.0).operator_norm_sup(None).unwrap(), 2.0, epsilon = 1e-14);
        let so3 = catalog::get("so3").unwrap();
        assert_abs_diff_eq!(so3.representation.operator_norm_sup(None).unwrap(), 1.0, epsilon = 1e-12);
        let not_pd = Mat::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(
            diag_rep(2.0).operator_norm_sup(Some(&not_pd)).unwrap_err(),
            Error::InnerProductNotPD { .. }
        ));
    }

    #[test]
    fn lie_flag_fills_the_space() {
        for name in ["heisenberg3", "se2"] {
            let e = catalog::get(name).unwrap();
            let flag = e.representation.lie_flag().unwrap();
            assert_eq!(flag.last().unwrap().space.rank(), e.representation.dim());
            for step in &flag {
                assert!(e.representation.invariance_leakage(&step.space) < 1e-7);
            }
        }
    }

    #[test]
    fn weight_spaces_are_preserved_by_connected_group() {
        let e = catalog::get("se2").unwrap();
        let series = e.algebra.derived_series();
        let dec = e.representation.weight_decomposition(&series.terms).unwrap();
        for d in &dec {
            let (level_rep, _) = e
                .representation
                .level_representation(&series.terms[d.level], &series.terms[d.level + 1])
                .unwrap();
            for c in &d.real_components {
                for g in level_rep.group() {
                    assert!(linalg::leakage(&g.matrix, c.space.basis()) < 1e-6);
                }
            }
        }
    }
}
