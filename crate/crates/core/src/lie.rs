//! Finite-dimensional real Lie algebras given by structure constants.
//!
//! `[e_i, e_j] = sum_k c[i][j][k] e_k`. Structure constants are antisymmetrized
//! on construction and the Jacobi identity is checked to
//! `1e-9 * (1 + max|c|)^2`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, Cutoff, Mat, Vector, RANK_CUTOFF};

/// Tolerance on `|trace(ad_x)|` for unimodularity.
pub const UNIMODULAR_TOL: f64 = 1e-9;

/// A linear subspace of `R^n`, stored as an orthonormal column basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    basis: Mat,
}

impl Subspace {
    /// Span of the columns of `vectors`, orthonormalized.
    pub fn span(vectors: &Mat, cutoff: Cutoff) -> Self {
        Self {
            ambient_dim: vectors.nrows(),
            basis: linalg::column_span(vectors, cutoff),
        }
    }

    /// Wraps a basis that is already orthonormal.
    pub fn from_orthonormal(basis: Mat) -> Self {
        Self {
            ambient_dim: basis.nrows(),
            basis,
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            ambient_dim: n,
            basis: Mat::zeros(n, 0),
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            ambient_dim: n,
            basis: Mat::identity(n, n),
        }
    }

    /// Span of the listed coordinate axes.
    pub fn coordinate(n: usize, axes: &[usize]) -> Self {
        let basis = Mat::from_fn(n, axes.len(), |r, c| if r == axes[c] { 1.0 } else { 0.0 });
        Self::from_orthonormal(basis)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn projector(&self) -> Mat {
        &self.basis * self.basis.transpose()
    }

    pub fn complement(&self) -> Subspace {
        Subspace::from_orthonormal(linalg::orthogonal_complement(&self.basis, self.ambient_dim))
    }

    /// Distance from `v` to the subspace.
    pub fn distance(&self, v: &Vector) -> f64 {
        let proj = &self.basis * (self.basis.transpose() * v);
        (v - proj).norm()
    }

    pub fn contains(&self, v: &Vector, tol: f64) -> bool {
        self.distance(v) <= tol * (1.0 + v.norm())
    }

    /// Coordinates of `v` in the orthonormal basis.
    pub fn coords(&self, v: &Vector) -> Vector {
        self.basis.transpose() * v
    }

    /// Largest deviation of the basis from orthonormality.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.basis.transpose() * &self.basis;
        linalg::max_abs(&(g - Mat::identity(self.rank(), self.rank())))
    }
}

/// Result of the commutator series computation.
#[derive(Debug, Clone)]
pub struct DerivedSeries {
    /// `r^0, r^1, ...`; ends with `{0}` when solvable, otherwise with the
    /// first repeated (perfect) term.
    pub terms: Vec<Subspace>,
    pub solvable: bool,
}

impl DerivedSeries {
    pub fn ranks(&self) -> Vec<usize> {
        self.terms.iter().map(Subspace::rank).collect()
    }

    /// Deepest nonzero term.
    pub fn deepest_nonzero(&self) -> Option<&Subspace> {
        self.terms.iter().rev().find(|s| s.rank() > 0)
    }
}

/// Outcome of the unimodularity test, with the offending basis element if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unimodularity {
    pub unimodular: bool,
    pub witness: Option<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct LieAlgebra {
    names: Vec<String>,
    structure: Vec<f64>,
    rel_cutoff: f64,
}

impl LieAlgebra {
    /// Builds an algebra from a dense `dim^3` tensor (index `(i*dim + j)*dim + k`).
    pub fn from_structure(names: Vec<String>, structure: Vec<f64>) -> Result<Self> {
        let alg = Self::from_structure_unchecked(names, structure)?;
        let tol = alg.jacobi_tolerance();
        let defect = alg.jacobi_defect();
        if defect > tol {
            return Err(Error::JacobiViolation {
                defect,
                tolerance: tol,
            });
        }
        Ok(alg)
    }

    /// Antisymmetrizes but skips the Jacobi check.
    pub fn from_structure_unchecked(names: Vec<String>, structure: Vec<f64>) -> Result<Self> {
        let n = names.len();
        if structure.len() != n * n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n * n,
                got: structure.len(),
            });
        }
        let mut sym = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = structure[(i * n + j) * n + k];
                    let b = structure[(j * n + i) * n + k];
                    sym[(i * n + j) * n + k] = 0.5 * (a - b);
                }
            }
        }
        Ok(Self {
            names,
            structure: sym,
            rel_cutoff: RANK_CUTOFF,
        })
    }

    /// Builds an algebra from a list of brackets `[e_i, e_j] = sum coeff e_k`.
    /// Unlisted pairs are zero; `[e_j, e_i]` is filled in by antisymmetry.
    pub fn from_brackets(names: &[&str], brackets: &[(usize, usize, &[(usize, f64)])]) -> Result<Self> {
        let n = names.len();
        let mut c = vec![0.0; n * n * n];
        for &(i, j, coeffs) in brackets {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: i.max(j) + 1,
                });
            }
            for &(k, v) in coeffs {
                if k >= n {
                    return Err(Error::DimensionMismatch { expected: n, got: k + 1 });
                }
                c[(i * n + j) * n + k] += v;
                c[(j * n + i) * n + k] -= v;
            }
        }
        Self::from_structure(names.iter().map(|s| s.to_string()).collect(), c)
    }

    pub fn with_rank_cutoff(mut self, rel: f64) -> Self {
        self.rel_cutoff = rel;
        self
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn structure(&self) -> &[f64] {
        &self.structure
    }

    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim();
        self.structure[(i * n + j) * n + k]
    }

    pub fn max_abs_structure(&self) -> f64 {
        self.structure.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Rank cutoff used for subspaces of this algebra.
    pub fn cutoff(&self) -> Cutoff {
        Cutoff::new(self.rel_cutoff, 1e-10 * (1.0 + self.max_abs_structure()))
    }

    fn jacobi_tolerance(&self) -> f64 {
        let s = 1.0 + self.max_abs_structure();
        1e-9 * s * s
    }

    pub fn basis_vector(&self, i: usize) -> Vector {
        let mut v = Vector::zeros(self.dim());
        v[i] = 1.0;
        v
    }

    pub fn bracket(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        let n = self.dim();
        for v in [x, y] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Ok(self.bracket_unchecked(x, y))
    }

    fn bracket_unchecked(&self, x: &Vector, y: &Vector) -> Vector {
        let n = self.dim();
        let mut out = Vector::zeros(n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                let base = (i * n + j) * n;
                for k in 0..n {
                    out[k] += w * self.structure[base + k];
                }
            }
        }
        out
    }

    /// Matrix of `ad_x = [x, .]` in the basis.
    pub fn ad(&self, x: &Vector) -> Mat {
        let n = self.dim();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                for k in 0..n {
                    m[(k, j)] += x[i] * self.c(i, j, k);
                }
            }
        }
        m
    }

    pub fn ad_basis(&self, i: usize) -> Mat {
        self.ad(&self.basis_vector(i))
    }

    /// Max over basis triples of `||[x,[y,z]] + [y,[z,x]] + [z,[x,y]]||`.
    pub fn jacobi_defect(&self) -> f64 {
        tensor_jacobi_defect(self.dim(), &self.structure)
    }

    /// `[S, S]` for a subspace `S`.
    pub fn bracket_span(&self, s: &Subspace) -> Subspace {
        let q = s.basis();
        let m = q.ncols();
        let mut cols: Vec<Vector> = Vec::new();
        for a in 0..m {
            for b in (a + 1)..m {
                cols.push(self.bracket_unchecked(&q.column(a).into_owned(), &q.column(b).into_owned()));
            }
        }
        if cols.is_empty() {
            return Subspace::zero(self.dim());
        }
        Subspace::span(&Mat::from_columns(&cols), self.cutoff())
    }

    pub fn derived_algebra(&self) -> Subspace {
        self.bracket_span(&Subspace::full(self.dim()))
    }

    pub fn derived_series(&self) -> DerivedSeries {
        self.derived_series_of(&Subspace::full(self.dim()))
    }

    /// Commutator series of a subalgebra `s`.
    pub fn derived_series_of(&self, s: &Subspace) -> DerivedSeries {
        let mut terms = vec![s.clone()];
        loop {
            let current = terms.last().expect("nonempty");
            if current.rank() == 0 {
                return DerivedSeries {
                    terms,
                    solvable: true,
                };
            }
            let next = self.bracket_span(current);
            let stalled = next.rank() == current.rank();
            terms.push(next);
            if stalled {
                return DerivedSeries {
                    terms,
                    solvable: false,
                };
            }
        }
    }

    pub fn is_solvable(&self) -> bool {
        self.derived_series().solvable
    }

    /// `B[i][j] = trace(ad_i ad_j)`.
    pub fn killing_form(&self) -> Mat {
        let n = self.dim();
        let ads: Vec<Mat> = (0..n).map(|i| self.ad_basis(i)).collect();
        let mut b = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = (&ads[i] * &ads[j]).trace();
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
        }
        b
    }

    /// The radical, as the Killing-orthogonal complement of `[g, g]`.
    pub fn radical(&self) -> Result<Subspace> {
        let n = self.dim();
        let derived = self.derived_algebra();
        let rad = if derived.rank() == 0 {
            Subspace::full(n)
        } else {
            let b = self.killing_form();
            let m = derived.basis().transpose() * &b;
            let scale = 1.0 + linalg::max_abs(&b);
            let ns = linalg::null_space(&m, Cutoff::new(self.rel_cutoff, 1e-10 * scale));
            Subspace::from_orthonormal(ns)
        };
        if !self.derived_series_of(&rad).solvable {
            return Err(Error::SolvabilityCheckFailed { rank: rad.rank() });
        }
        Ok(rad)
    }

    pub fn is_unimodular(&self) -> Unimodularity {
        for i in 0..self.dim() {
            let tr = self.ad_basis(i).trace();
            if tr.abs() > UNIMODULAR_TOL {
                return Unimodularity {
                    unimodular: false,
                    witness: Some((i, tr)),
                };
            }
        }
        Unimodularity {
            unimodular: true,
            witness: None,
        }
    }

    /// Minimum of `dim ker ad_x` over `trials` random unit vectors.
    pub fn generic_rank(&self, trials: usize, seed: u64) -> usize {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cutoff = Cutoff::new(RANK_CUTOFF, 1e-12 * (1.0 + self.max_abs_structure()));
        let mut best = n;
        for _ in 0..trials.max(1) {
            let mut x = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let norm = x.norm();
            if norm > 0.0 {
                x /= norm;
            }
            let nullity = n - linalg::rank(&self.ad(&x), cutoff);
            best = best.min(nullity);
        }
        best
    }

    /// Maximal dimension of a nilpotent adjoint orbit, as `dim - rank`.
    pub fn max_nilpotent_orbit_dim(&self) -> Result<usize> {
        self.max_nilpotent_orbit_dim_with(8, 0)
    }

    pub fn max_nilpotent_orbit_dim_with(&self, trials: usize, seed: u64) -> Result<usize> {
        let rad = self.radical()?;
        if rad.rank() > 0 {
            return Err(Error::NotSemisimple {
                radical_rank: rad.rank(),
            });
        }
        let d = self.dim() - self.generic_rank(trials, seed);
        if d % 2 == 1 {
            return Err(Error::OddOrbitDimension { d });
        }
        Ok(d)
    }

    /// Largest leakage of `[e_i, s]` out of `s` over basis elements `e_i`.
    pub fn ideal_leakage(&self, s: &Subspace) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            let ad = self.ad_basis(i);
            worst = worst.max(linalg::leakage(&ad, s.basis()));
        }
        worst
    }

    /// The subalgebra `s` as an algebra in its own orthonormal coordinates.
    pub fn subalgebra(&self, s: &Subspace) -> Result<LieAlgebra> {
        let q = s.basis();
        let m = q.ncols();
        let cols: Vec<Vector> = (0..m).map(|a| q.column(a).into_owned()).collect();
        let mut c = vec![0.0; m * m * m];
        let mut leak = 0.0_f64;
        for a in 0..m {
            for b in 0..m {
                let br = self.bracket_unchecked(&cols[a], &cols[b]);
                leak = leak.max(s.distance(&br));
                let coords = s.coords(&br);
                for k in 0..m {
                    c[(a * m + b) * m + k] = coords[k];
                }
            }
        }
        if leak > 1e-8 * (1.0 + self.max_abs_structure()) {
            return Err(Error::NotInvariant { leakage: leak });
        }
        let names = (0..m).map(|a| format!("s{a}")).collect();
        Ok(LieAlgebra::from_structure(names, c)?.with_rank_cutoff(self.rel_cutoff))
    }

    /// The quotient by an ideal, realized on its orthogonal complement.
    pub fn quotient(&self, ideal: &Subspace) -> Result<LieAlgebra> {
        let leak = self.ideal_leakage(ideal);
        if leak > 1e-8 * (1.0 + self.max_abs_structure()) {
            return Err(Error::NotInvariant { leakage: leak });
        }
        let comp = ideal.complement();
        let p = comp.basis();
        let m = p.ncols();
        let cols: Vec<Vector> = (0..m).map(|a| p.column(a).into_owned()).collect();
        let mut c = vec![0.0; m * m * m];
        for a in 0..m {
            for b in 0..m {
                let coords = comp.coords(&self.bracket_unchecked(&cols[a], &cols[b]));
                for k in 0..m {
                    c[(a * m + b) * m + k] = coords[k];
                }
            }
        }
        let names = (0..m).map(|a| format!("q{a}")).collect();
        Ok(LieAlgebra::from_structure(names, c)?.with_rank_cutoff(self.rel_cutoff))
    }
}

/// Jacobi defect of a raw `n^3` tensor, read as given (no antisymmetrization).
pub fn tensor_jacobi_defect(n: usize, c: &[f64]) -> f64 {
    assert_eq!(c.len(), n * n * n, "tensor must have n^3 entries");
    let br = |i: usize, y: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (j, &yj) in y.iter().enumerate() {
            if yj == 0.0 {
                continue;
            }
            for k in 0..n {
                out[k] += yj * c[(i * n + j) * n + k];
            }
        }
        out
    };
    let mut worst = 0.0_f64;
    for a in 0..n {
        for b in 0..n {
            for d in 0..n {
                let mut sum = vec![0.0; n];
                for (x, y, z) in [(a, b, d), (b, d, a), (d, a, b)] {
                    let yz: Vec<f64> = (0..n).map(|k| c[(y * n + z) * n + k]).collect();
                    for (s, v) in sum.iter_mut().zip(br(x, &yz)) {
                        *s += v;
                    }
                }
                worst = worst.max(sum.iter().map(|v| v * v).sum::<f64>().sqrt());
            }
        }
    }
    worst
}
