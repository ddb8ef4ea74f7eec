//! JSON input and output for algebras and representations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::CatalogEntry;
use crate::lie::LieAlgebra;
use crate::linalg::Mat;
use crate::rep::{GroupElement, Representation};
use crate::{Error, Result};

/// A basis index given either by position or by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisRef {
    Index(usize),
    Name(String),
}

impl BasisRef {
    fn resolve(&self, names: &[String]) -> Result<usize> {
        match self {
            BasisRef::Index(i) if *i < names.len() => Ok(*i),
            BasisRef::Index(i) => Err(Error::DimensionMismatch { expected: names.len(), got: i + 1 }),
            BasisRef::Name(s) => names
                .iter()
                .position(|n| n == s)
                .ok_or_else(|| Error::Invalid(format!("unknown basis element '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketEntry {
    pub i: BasisRef,
    pub j: BasisRef,
    pub coeffs: BTreeMap<String, f64>,
}

/// `{ "dim": n, "basis": [names], "brackets": [{"i", "j", "coeffs"}] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraFile {
    pub dim: usize,
    pub basis: Vec<String>,
    #[serde(default)]
    pub brackets: Vec<BracketEntry>,
}

impl AlgebraFile {
    /// Builds and validates the algebra. Omitted pairs are zero and
    /// `[e_j, e_i] = -[e_i, e_j]` is filled in.
    pub fn build(&self) -> Result<LieAlgebra> {
        let n = self.dim;
        if self.basis.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.basis.len() });
        }
        let mut c = vec![0.0; n * n * n];
        let mut seen = vec![false; n * n];
        for b in &self.brackets {
            let i = b.i.resolve(&self.basis)?;
            let j = b.j.resolve(&self.basis)?;
            let mut row = vec![0.0; n];
            for (name, v) in &b.coeffs {
                row[BasisRef::Name(name.clone()).resolve(&self.basis)?] += v;
            }
            if i == j {
                if row.iter().any(|v| *v != 0.0) {
                    return Err(Error::Invalid(format!("bracket [{0},{0}] must vanish", self.basis[i])));
                }
                continue;
            }
            if seen[i * n + j] || seen[j * n + i] {
                let expected: Vec<f64> = (0..n).map(|k| c[(i * n + j) * n + k]).collect();
                let mismatch = expected.iter().zip(&row).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()));
                if mismatch {
                    return Err(Error::Invalid(format!(
                        "bracket [{}, {}] given twice with inconsistent values",
                        self.basis[i], self.basis[j]
                    )));
                }
                continue;
            }
            seen[i * n + j] = true;
            for (k, v) in row.into_iter().enumerate() {
                c[(i * n + j) * n + k] = v;
                c[(j * n + i) * n + k] = -v;
            }
        }
        LieAlgebra::from_structure(self.basis.clone(), c)
    }

    pub fn from_algebra(alg: &LieAlgebra) -> Self {
        let n = alg.dim();
        let names = alg.names().to_vec();
        let mut brackets = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let coeffs: BTreeMap<String, f64> = (0..n)
                    .filter(|&k| alg.c(i, j, k) != 0.0)
                    .map(|k| (names[k].clone(), alg.c(i, j, k)))
                    .collect();
                if !coeffs.is_empty() {
                    brackets.push(BracketEntry { i: BasisRef::Index(i), j: BasisRef::Index(j), coeffs });
                }
            }
        }
        AlgebraFile { dim: n, basis: names, brackets }
    }
}

/// An algebra given inline or as a path relative to the referring file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgebraSource {
    Path(PathBuf),
    Inline(AlgebraFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEntry {
    pub label: String,
    pub matrix: Vec<Vec<f64>>,
}

/// `{ "algebra", "action", "F" }` plus optional `connected` and `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentationFile {
    pub algebra: AlgebraSource,
    pub action: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "F")]
    pub group: Vec<GroupEntry>,
    /// Whether every element of `F` lies in the identity component.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub connected: bool,
    /// Cartan involution in algebra coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<Vec<f64>>>,
}

/// A representation together with its optional Cartan involution.
#[derive(Debug, Clone)]
pub struct LoadedRepresentation {
    pub representation: Representation,
    pub theta: Option<Mat>,
}

impl RepresentationFile {
    pub fn build(&self, base_dir: &Path) -> Result<LoadedRepresentation> {
        let alg = match &self.algebra {
            AlgebraSource::Inline(a) => a.build()?,
            AlgebraSource::Path(p) => {
                let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
                load_algebra(&path)?
            }
        };
        let dim = self
            .action
            .first()
            .map(|m| m.len())
            .or_else(|| self.group.first().map(|g| g.matrix.len()))
            .unwrap_or(0);
        let action = self
            .action
            .iter()
            .enumerate()
            .map(|(i, m)| matrix_from_rows(m).map_err(|e| e.context(format!("action[{i}]"))))
            .collect::<Result<Vec<_>>>()?;
        let group = self
            .group
            .iter()
            .map(|g| {
                matrix_from_rows(&g.matrix)
                    .map(|m| GroupElement::new(g.label.clone(), m))
                    .map_err(|e| e.context(format!("F[{}]", g.label)))
            })
            .collect::<Result<Vec<_>>>()?;
        let theta = self.theta.as_ref().map(|t| matrix_from_rows(t)).transpose()?;
        let representation =
            Representation::new(Arc::new(alg), dim, action, group)?.with_connected(self.connected);
        Ok(LoadedRepresentation { representation, theta })
    }

    pub fn from_representation(rep: &Representation, theta: Option<&Mat>) -> Self {
        RepresentationFile {
            algebra: AlgebraSource::Inline(AlgebraFile::from_algebra(rep.algebra())),
            action: rep.action().iter().map(rows_of).collect(),
            group: rep
                .group()
                .iter()
                .map(|g| GroupEntry { label: g.label.clone(), matrix: rows_of(&g.matrix) })
                .collect(),
            connected: rep.connected(),
            theta: theta.map(rows_of),
        }
    }
}

/// Row-major nested vectors to a matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if let Some(bad) = rows.iter().find(|r| r.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: bad.len() });
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("matrix entries must be finite".into()));
    }
    Ok(Mat::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))
}

pub fn parse_algebra(text: &str) -> Result<LieAlgebra> {
    let file: AlgebraFile = serde_json::from_str(text)?;
    file.build()
}

pub fn load_algebra(path: &Path) -> Result<LieAlgebra> {
    parse_algebra(&read(path)?).map_err(|e| e.context(path.display().to_string()))
}

pub fn parse_representation(text: &str, base_dir: &Path) -> Result<LoadedRepresentation> {
    let file: RepresentationFile = serde_json::from_str(text)?;
    file.build(base_dir)
}

pub fn load_representation(path: &Path) -> Result<LoadedRepresentation> {
    let base = path.parent().unwrap_or(Path::new("."));
    parse_representation(&read(path)?, base).map_err(|e| e.context(path.display().to_string()))
}

/// Catalog export document; its `representation` member is itself a valid
/// representation file.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogExport {
    pub name: String,
    pub notes: String,
    pub scale: f64,
    pub generators: Vec<String>,
    pub adjoint: bool,
    pub algebra: AlgebraFile,
    pub representation: RepresentationFile,
}

impl CatalogExport {
    pub fn from_entry(e: &CatalogEntry) -> Self {
        CatalogExport {
            name: e.name.to_string(),
            notes: e.notes.to_string(),
            scale: e.scale,
            generators: e.generators.iter().map(|(n, _)| n.clone()).collect(),
            adjoint: e.adjoint,
            algebra: AlgebraFile::from_algebra(&e.algebra),
            representation: RepresentationFile::from_representation(&e.representation, e.involution.as_ref()),
        }
    }
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn heisenberg_file_round_trip() {
        let text = r#"{"dim":3,"basis":["X","Y","Z"],"brackets":[{"i":"X","j":1,"coeffs":{"Z":1.0}}]}"#;
        let alg = parse_algebra(text).unwrap();
        assert_eq!(alg.c(0, 1, 2), 1.0);
        assert_eq!(alg.c(1, 0, 2), -1.0);
        let again = AlgebraFile::from_algebra(&alg).build().unwrap();
        assert_eq!(again.structure(), alg.structure());
    }

    #[test]
    fn repeated_brackets_are_not_doubled() {
        let text = r#"{"dim":2,"basis":["a","x"],"brackets":[
            {"i":0,"j":1,"coeffs":{"x":1.0}},{"i":1,"j":0,"coeffs":{"x":-1.0}}]}"#;
        assert_eq!(parse_algebra(text).unwrap().c(0, 1, 1), 1.0);
        let bad = r#"{"dim":2,"basis":["a","x"],"brackets":[
            {"i":0,"j":1,"coeffs":{"x":1.0}},{"i":1,"j":0,"coeffs":{"x":1.0}}]}"#;
        assert!(matches!(parse_algebra(bad), Err(Error::Invalid(_))));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_algebra("{\n\"dim\": 3,\n\"basis\": [\n}").unwrap_err();
        match err {
            Error::Json { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jacobi_violation_on_load() {
        let text = r#"{"dim":3,"basis":["a","b","c"],"brackets":[
            {"i":"a","j":"b","coeffs":{"c":1.0}},{"i":"b","j":"c","coeffs":{"b":1.0}}]}"#;
        assert!(matches!(parse_algebra(text), Err(Error::JacobiViolation { .. })));
    }

    #[test]
    fn exported_entries_reload() {
        for name in catalog::NAMES {
            let e = catalog::get(name).unwrap();
            let export = CatalogExport::from_entry(&e);
            let text = serde_json::to_string(&export.representation).unwrap();
            let loaded = parse_representation(&text, Path::new(".")).unwrap();
            let rep = loaded.representation;
            assert_eq!(rep.dim(), e.representation.dim());
            assert_eq!(rep.group().len(), e.representation.group().len());
            assert_eq!(rep.connected(), e.representation.connected());
            assert_eq!(loaded.theta.is_some(), e.involution.is_some());
        }
    }

    #[test]
    fn algebra_path_is_relative_to_rep_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("alg.json"),
            r#"{"dim":1,"basis":["t"],"brackets":[]}"#,
        )
        .unwrap();
        let rep = r#"{"algebra":"alg.json","action":[[[1.0,0.0],[0.0,-1.0]]],
            "F":[{"label":"a","matrix":[[2.0,0.0],[0.0,0.5]]}]}"#;
        let path = dir.path().join("rep.json");
        std::fs::write(&path, rep).unwrap();
        let loaded = load_representation(&path).unwrap();
        // The inverse is adjoined on load.
        assert_eq!(loaded.representation.group().len(), 2);
    }
}
