//! Built-in algebras, representations and `F`-families.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lie::LieAlgebra;
use crate::linalg::{self, Mat, Vector};
use crate::rep::Representation;

/// Structure constants of the example algebras.
pub mod algebras {
    use crate::lie::LieAlgebra;

    fn build(names: &[&str], brackets: &[(usize, usize, &[(usize, f64)])]) -> LieAlgebra {
        LieAlgebra::from_brackets(names, brackets).expect("catalog algebra is valid")
    }

    /// `[X, Y] = Z`.
    pub fn heisenberg() -> LieAlgebra {
        build(&["X", "Y", "Z"], &[(0, 1, &[(2, 1.0)])])
    }

    /// Basis `(h, e, f)`: `[h,e] = 2e`, `[h,f] = -2f`, `[e,f] = h`.
    pub fn sl2() -> LieAlgebra {
        build(
            &["h", "e", "f"],
            &[(0, 1, &[(1, 2.0)]), (0, 2, &[(2, -2.0)]), (1, 2, &[(0, 1.0)])],
        )
    }

    /// `[L1, L2] = L3` and cyclic.
    pub fn so3() -> LieAlgebra {
        build(
            &["L1", "L2", "L3"],
            &[(0, 1, &[(2, 1.0)]), (1, 2, &[(0, 1.0)]), (2, 0, &[(1, 1.0)])],
        )
    }

    /// Euclidean motions of the plane: `[θ, x] = y`, `[θ, y] = -x`.
    pub fn se2() -> LieAlgebra {
        build(&["theta", "x", "y"], &[(0, 1, &[(2, 1.0)]), (0, 2, &[(1, -1.0)])])
    }

    /// `sl2 ⋉ R^3` with `R^3` the adjoint module; basis `(h, e, f, H, E, F)`
    /// where the capitals are the translation copy.
    pub fn tangent_sl2() -> LieAlgebra {
        build(
            &["h", "e", "f", "H", "E", "F"],
            &[
                (0, 1, &[(1, 2.0)]),
                (0, 2, &[(2, -2.0)]),
                (1, 2, &[(0, 1.0)]),
                (0, 4, &[(4, 2.0)]),
                (0, 5, &[(5, -2.0)]),
                (1, 5, &[(3, 1.0)]),
                (1, 3, &[(4, -2.0)]),
                (2, 3, &[(5, 2.0)]),
                (2, 4, &[(3, -1.0)]),
            ],
        )
    }

    /// Two commuting copies of [`sl2`], basis `(h1, e1, f1, h2, e2, f2)`.
    pub fn sl2_plus_sl2() -> LieAlgebra {
        build(
            &["h1", "e1", "f1", "h2", "e2", "f2"],
            &[
                (0, 1, &[(1, 2.0)]),
                (0, 2, &[(2, -2.0)]),
                (1, 2, &[(0, 1.0)]),
                (3, 4, &[(4, 2.0)]),
                (3, 5, &[(5, -2.0)]),
                (4, 5, &[(3, 1.0)]),
            ],
        )
    }

    /// `[a, x] = x`; not unimodular.
    pub fn ax_plus_b() -> LieAlgebra {
        build(&["a", "x"], &[(0, 1, &[(1, 1.0)])])
    }

    pub fn abelian(n: usize) -> LieAlgebra {
        if n == 1 {
            return build(&["t"], &[]);
        }
        let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        build(&refs, &[])
    }
}

/// Names accepted by [`get`].
pub const NAMES: [&str; 6] = ["heisenberg3", "diag_r2", "sl2_adjoint", "tangent_sl2", "se2", "so3"];

/// A matrix group realizing an algebra: basis matrices and, for every element
/// of `F` (in the same order), its matrix in this realization.
#[derive(Debug, Clone)]
pub struct MatrixRealization {
    pub basis: Vec<Mat>,
    pub group: Vec<Mat>,
}

impl MatrixRealization {
    /// `Σ x_i B_i`.
    pub fn element(&self, x: &Vector) -> Mat {
        let n = self.basis[0].nrows();
        let mut m = Mat::zeros(n, n);
        for (b, &c) in self.basis.iter().zip(x.iter()) {
            m += b * c;
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub algebra: Arc<LieAlgebra>,
    pub representation: Representation,
    /// Whether `representation` is the adjoint representation.
    pub adjoint: bool,
    pub generators: Vec<(String, Vector)>,
    pub scale: f64,
    pub notes: &'static str,
    pub realization: Option<MatrixRealization>,
    /// Cartan involution in algebra coordinates, where one is known.
    pub involution: Option<Mat>,
}

/// Entry with its documented default scale.
pub fn get(name: &str) -> Result<CatalogEntry> {
    get_scaled(name, default_scale(name)?)
}

pub fn default_scale(name: &str) -> Result<f64> {
    match name {
        "heisenberg3" | "se2" | "so3" => Ok(1.0),
        "diag_r2" | "sl2_adjoint" | "tangent_sl2" => Ok(std::f64::consts::LN_2),
        other => Err(Error::UnknownEntry(other.to_string())),
    }
}

/// Entry with `F = {I} ∪ {exp(±t x_i)}` for its generators `x_i`.
pub fn get_scaled(name: &str, t: f64) -> Result<CatalogEntry> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Invalid(format!("scale must be finite and nonnegative, got {t}")));
    }
    match name {
        "heisenberg3" => adjoint_entry(
            "heisenberg3",
            algebras::heisenberg(),
            &[0, 1],
            t,
            "3-dim Heisenberg algebra [X,Y]=Z; F from exp(±t ad X), exp(±t ad Y). At t=1, rho is the golden ratio.",
            Some(heisenberg_basis()),
            None,
        ),
        "diag_r2" => diag_entry(t),
        "sl2_adjoint" => adjoint_entry(
            "sl2_adjoint",
            algebras::sl2(),
            &[0],
            t,
            "Adjoint representation of sl2 in the basis (h,e,f); F from exp(±t ad h). At t=ln 2, rho = 4 in the B_theta norm.",
            Some(sl2_basis()),
            Some(sl2_involution()),
        ),
        "tangent_sl2" => {
            let mut theta = Mat::zeros(6, 6);
            theta.view_mut((0, 0), (3, 3)).copy_from(&sl2_involution());
            theta.view_mut((3, 3), (3, 3)).copy_from(&sl2_involution());
            adjoint_entry(
                "tangent_sl2",
                algebras::tangent_sl2(),
                &[0, 3],
                t,
                "Tangent algebra sl2 ⋉ R^3 of SL(2,R); F from exp(±t ad h) and exp(±t ad H). At t=ln 2, rho = 4.",
                Some(tangent_basis()),
                Some(theta),
            )
        }
        "se2" => adjoint_entry(
            "se2",
            algebras::se2(),
            &[0, 1],
            t,
            "Euclidean motion algebra se(2), basis (theta,x,y); solvable and unimodular. F from exp(±t ad theta), exp(±t ad x).",
            Some(se2_basis()),
            None,
        ),
        "so3" => adjoint_entry(
            "so3",
            algebras::so3(),
            &[0, 1, 2],
            t,
            "Compact control so(3): the adjoint action is isometric, rho = 1 and every bound equals 1.",
            Some(so3_basis()),
            Some(Mat::identity(3, 3)),
        ),
        other => Err(Error::UnknownEntry(other.to_string())),
    }
}

fn unit(n: usize, i: usize) -> Vector {
    let mut v = Vector::zeros(n);
    v[i] = 1.0;
    v
}

fn adjoint_entry(
    name: &'static str,
    algebra: LieAlgebra,
    generator_indices: &[usize],
    t: f64,
    notes: &'static str,
    basis: Option<Vec<Mat>>,
    involution: Option<Mat>,
) -> Result<CatalogEntry> {
    let n = algebra.dim();
    let generators: Vec<(String, Vector)> = generator_indices
        .iter()
        .map(|&i| (algebra.names()[i].clone(), unit(n, i)))
        .collect();
    let algebra = Arc::new(algebra);
    let action = (0..n).map(|i| algebra.ad_basis(i)).collect();
    let representation = Representation::from_exponentials(algebra.clone(), n, action, &generators, t)?;
    let realization = basis.map(|basis| {
        let probe = MatrixRealization {
            basis: basis.clone(),
            group: Vec::new(),
        };
        let size = basis[0].nrows();
        let mut group = vec![Mat::identity(size, size)];
        for (_, x) in &generators {
            let m = probe.element(x);
            group.push(linalg::expm(&(&m * t)));
            group.push(linalg::expm(&(&m * -t)));
        }
        MatrixRealization { basis, group }
    });
    if let Some(r) = &realization {
        if r.group.len() != representation.group().len() {
            return Err(Error::Invalid(format!("{name}: realization does not match F")));
        }
    }
    Ok(CatalogEntry {
        name,
        algebra,
        representation,
        adjoint: true,
        generators,
        scale: t,
        notes,
        realization,
        involution,
    })
}

fn diag_entry(t: f64) -> Result<CatalogEntry> {
    let algebra = Arc::new(algebras::abelian(1));
    let action = vec![Mat::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]))];
    let generators = vec![("t".to_string(), unit(1, 0))];
    let representation = Representation::from_exponentials(algebra.clone(), 2, action, &generators, t)?;
    Ok(CatalogEntry {
        name: "diag_r2",
        algebra,
        representation,
        adjoint: false,
        generators,
        scale: t,
        notes: "The positive reals acting on R^2 by diag(a, 1/a), a = e^t; F = {diag(a,1/a), diag(1/a,a), I}. At t=ln 2, a = 2.",
        realization: None,
        involution: None,
    })
}

fn e(n: usize, r: usize, c: usize) -> Mat {
    let mut m = Mat::zeros(n, n);
    m[(r, c)] = 1.0;
    m
}

fn heisenberg_basis() -> Vec<Mat> {
    vec![e(3, 0, 1), e(3, 1, 2), e(3, 0, 2)]
}

fn sl2_basis() -> Vec<Mat> {
    vec![Mat::from_diagonal(&Vector::from_vec(vec![1.0, -1.0])), e(2, 0, 1), e(2, 1, 0)]
}

fn so3_basis() -> Vec<Mat> {
    vec![
        e(3, 2, 1) - e(3, 1, 2),
        e(3, 0, 2) - e(3, 2, 0),
        e(3, 1, 0) - e(3, 0, 1),
    ]
}

fn se2_basis() -> Vec<Mat> {
    vec![e(3, 1, 0) - e(3, 0, 1), e(3, 0, 2), e(3, 1, 2)]
}

/// Affine 4×4 realization `[[ad_x, v], [0, 0]]`.
fn tangent_basis() -> Vec<Mat> {
    let sl2 = algebras::sl2();
    let mut basis = Vec::with_capacity(6);
    for i in 0..3 {
        let mut m = Mat::zeros(4, 4);
        m.view_mut((0, 0), (3, 3)).copy_from(&sl2.ad_basis(i));
        basis.push(m);
    }
    for i in 0..3 {
        basis.push(e(4, i, 3));
    }
    basis
}

/// `θ(x) = -xᵀ` on sl2 in the basis `(h, e, f)`.
fn sl2_involution() -> Mat {
    Mat::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, -1.0, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn every_entry_loads() {
        for name in NAMES {
            let entry = get(name).unwrap();
            assert!(entry.algebra.jacobi_defect() <= 1e-12);
            assert!(entry.representation.homomorphism_residual() <= 1e-10);
            assert!(entry.representation.connected());
        }
    }

    #[test]
    fn unknown_entry() {
        assert!(matches!(get("sl3").unwrap_err(), Error::UnknownEntry(_)));
    }

    #[test]
    fn heisenberg_entry() {
        let h = get("heisenberg3").unwrap();
        assert_eq!(h.algebra.dim(), 3);
        assert_eq!(h.algebra.derived_series().ranks(), vec![3, 1, 0]);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(h.representation.operator_norm_sup(None).unwrap(), golden, epsilon = 1e-12);
    }

    #[test]
    fn diag_entry_matches_motivating_matrices() {
        let d = get("diag_r2").unwrap();
        let mats: Vec<&Mat> = d.representation.group().iter().map(|g| &g.matrix).collect();
        assert_eq!(mats.len(), 3);
        for a in [2.0, 0.5, 1.0] {
            let target = Mat::from_diagonal(&Vector::from_vec(vec![a, 1.0 / a]));
            assert!(mats.iter().any(|m| (*m - &target).norm() < 1e-14));
        }
    }

    #[test]
    fn sl2_entry_structure() {
        let s = get("sl2_adjoint").unwrap();
        assert_eq!(s.algebra.max_nilpotent_orbit_dim().unwrap(), 2);
        assert!(s.algebra.is_unimodular().unimodular);
        assert_abs_diff_eq!(s.representation.operator_norm_sup(None).unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn realizations_reproduce_structure_constants() {
        for name in ["heisenberg3", "sl2_adjoint", "tangent_sl2", "se2", "so3"] {
            let entry = get(name).unwrap();
            let r = entry.realization.as_ref().unwrap();
            let alg = &entry.algebra;
            let n = alg.dim();
            for i in 0..n {
                for j in 0..n {
                    let lhs = &r.basis[i] * &r.basis[j] - &r.basis[j] * &r.basis[i];
                    let br = alg.bracket(&alg.basis_vector(i), &alg.basis_vector(j)).unwrap();
                    assert!((lhs - r.element(&br)).norm() < 1e-14, "{name} [{i},{j}]");
                }
            }
        }
    }

    #[test]
    fn involutions_are_cartan() {
        for name in ["sl2_adjoint", "so3"] {
            let entry = get(name).unwrap();
            let theta = entry.involution.unwrap();
            let b = entry.algebra.killing_form();
            let b_theta = -(&b * &theta);
            let (roots, min) = linalg::spd_roots(&b_theta);
            assert!(roots.is_some() && min > 0.0, "{name}");
            assert!((&theta * &theta - Mat::identity(3, 3)).norm() < 1e-14);
        }
    }
}
