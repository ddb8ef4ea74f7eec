//! Command-line front end. All numerics live in the library; this module
//! parses arguments, loads inputs and formats results.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{self, BoundCertificate, InnerProduct};
use crate::catalog::{self, MatrixRealization};
use crate::io::{self as dio, CatalogExport};
use crate::lie::{LieAlgebra, Subspace};
use crate::linalg::{expm, Mat, Vector};
use crate::oracle::{self, McEstimate, NeighborhoodSpec, SweepRow};
use crate::rep::{format_weight, Character, Representation};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "delta-bounds", version, about = "Certified almost-invariance bounds and Monte Carlo checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Csv,
}

/// Where the algebra and representation come from.
#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Lie algebra JSON file.
    #[arg(long)]
    pub algebra: Option<PathBuf>,
    /// Representation JSON file.
    #[arg(long)]
    pub rep: Option<PathBuf>,
    /// Built-in catalog entry.
    #[arg(long)]
    pub entry: Option<String>,
    /// Generator scale t for catalog entries (F = {I, exp(±t x_i)}).
    #[arg(long)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct Sampling {
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1000..))]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleChoice {
    /// Pick the strongest applicable rule.
    Auto,
    Trivial,
    /// Rescaled split at the default invariant subspace.
    Split,
    /// Character shift at the default invariant subspace.
    Shift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChiChoice {
    /// The determinant character of the sub-representation.
    Det,
    Trivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Eps,
    ChartScale,
    R,
    Logvol,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structure report: derived series, radical, unimodularity, weights.
    Analyze {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certified lower bound on δ with its proof tree.
    Bound {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value_t = RuleChoice::Auto)]
        rule: RuleChoice,
        #[arg(long, value_enum, default_value_t = ChiChoice::Det)]
        chi: ChiChoice,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Certificate JSON output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of δ for one neighbourhood.
    Estimate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        family: String,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compares estimates against certified values.
    Verify {
        #[command(flatten)]
        source: Source,
        /// Repeatable; defaults depend on the representation.
        #[arg(long)]
        family: Vec<String>,
        /// Certificate to test instead of the computed references.
        #[arg(long)]
        cert: Option<PathBuf>,
        #[arg(long, default_value_t = 3.0, value_parser = parse_sigma)]
        sigma: f64,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One estimate per grid point, as CSV.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        #[arg(long)]
        family: Option<String>,
        /// Number of random parameter draws for the logvol axis.
        #[arg(long, default_value_t = 10)]
        draws: usize,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Catalog {
        #[command(subcommand)]
        command: CatalogCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum CatalogCommand {
    List,
    /// Writes an entry as algebra and representation JSON.
    Export {
        name: String,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_sigma(s: &str) -> std::result::Result<f64, String> {
    let k: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (1.0..=6.0).contains(&k) {
        Ok(k)
    } else {
        Err(format!("sigma must lie in [1, 6], got {k}"))
    }
}

/// Inputs resolved from a [`Source`].
pub struct Loaded {
    pub name: String,
    pub algebra: Arc<LieAlgebra>,
    pub representation: Option<Representation>,
    pub theta: Option<Mat>,
    pub realization: Option<MatrixRealization>,
}

impl Loaded {
    fn rep(&self) -> Result<&Representation> {
        self.representation
            .as_ref()
            .ok_or_else(|| Error::Invalid("this command needs --rep or --entry".into()))
    }
}

pub fn load_source(source: &Source) -> Result<Loaded> {
    let given = [source.algebra.is_some(), source.rep.is_some(), source.entry.is_some()];
    if given.iter().filter(|g| **g).count() != 1 {
        return Err(Error::Invalid("give exactly one of --algebra, --rep, --entry".into()));
    }
    if source.scale.is_some() && source.entry.is_none() {
        return Err(Error::Invalid("--scale applies to --entry only".into()));
    }
    if let Some(name) = &source.entry {
        let e = match source.scale {
            Some(t) => catalog::get_scaled(name, t)?,
            None => catalog::get(name)?,
        };
        return Ok(Loaded {
            name: e.name.to_string(),
            algebra: e.algebra,
            representation: Some(e.representation),
            theta: e.involution,
            realization: e.realization,
        });
    }
    if let Some(path) = &source.rep {
        let l = dio::load_representation(path)?;
        return Ok(Loaded {
            name: path.display().to_string(),
            algebra: l.representation.algebra_arc(),
            representation: Some(l.representation),
            theta: l.theta,
            realization: None,
        });
    }
    let path = source.algebra.as_ref().expect("checked above");
    Ok(Loaded {
        name: path.display().to_string(),
        algebra: Arc::new(dio::load_algebra(path)?),
        representation: None,
        theta: None,
        realization: None,
    })
}

/// A parsed `--family` specification such as `logprod:R1=1,R2=1,eps=0.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub kind: String,
    params: BTreeMap<String, Vec<String>>,
}

const FAMILY_KINDS: [&str; 6] = ["ball", "box", "split", "logprod", "hyper", "orbitcap"];

impl Family {
    pub fn parse(text: &str) -> Result<Self> {
        let (kind, rest) = match text.split_once(':') {
            Some((k, r)) => (k.trim(), r),
            None => (text.trim(), ""),
        };
        if !FAMILY_KINDS.contains(&kind) {
            return Err(Error::InvalidNeighborhood(format!(
                "unknown family '{kind}' (expected one of {})",
                FAMILY_KINDS.join(", ")
            )));
        }
        let mut params: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut last: Option<String> = None;
        for token in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match token.split_once('=') {
                Some((k, v)) => {
                    let k = k.trim().to_string();
                    params.entry(k.clone()).or_default().push(v.trim().to_string());
                    last = Some(k);
                }
                // Bare values continue the previous list, as in `box:w=1,2`.
                None => match &last {
                    Some(k) => params.get_mut(k).expect("present").push(token.to_string()),
                    None => return Err(Error::InvalidNeighborhood(format!("value '{token}' has no key"))),
                },
            }
        }
        Ok(Family { kind: kind.to_string(), params })
    }

    fn number(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.params.get(key) {
            Some(v) if v.len() == 1 => v[0]
                .parse()
                .map_err(|_| Error::InvalidNeighborhood(format!("{}: '{key}' is not a number", self.kind))),
            Some(_) => Err(Error::InvalidNeighborhood(format!("{}: '{key}' takes one value", self.kind))),
            None => default.ok_or_else(|| Error::InvalidNeighborhood(format!("{}: missing '{key}'", self.kind))),
        }
    }

    fn numbers(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.params
            .get(key)
            .map(|v| {
                v.iter()
                    .map(|s| {
                        s.parse()
                            .map_err(|_| Error::InvalidNeighborhood(format!("{}: '{s}' is not a number", self.kind)))
                    })
                    .collect()
            })
            .transpose()
    }

    fn shape(&self) -> Result<&str> {
        match self.params.get("u").map(|v| v.as_slice()) {
            None => Ok(if self.kind == "split" { "ball" } else { "box" }),
            Some([s]) if s == "ball" || s == "box" => Ok(s.as_str()),
            Some(_) => Err(Error::InvalidNeighborhood("u must be 'ball' or 'box'".into())),
        }
    }

    /// Whether the family is indexed by `eps`, so its certified value is a limit.
    pub fn is_eps_family(&self) -> bool {
        matches!(self.kind.as_str(), "split" | "logprod" | "hyper")
    }

    /// Copy with `eps` replaced.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        if !self.is_eps_family() {
            return Err(Error::InvalidNeighborhood(format!("family '{}' has no eps parameter", self.kind)));
        }
        let mut f = self.clone();
        f.params.insert("eps".into(), vec![format!("{eps:e}")]);
        Ok(f)
    }

    /// Canonical text form.
    pub fn describe(&self) -> String {
        if self.params.is_empty() {
            return self.kind.clone();
        }
        let parts: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={}", v.join(","))).collect();
        format!("{}:{}", self.kind, parts.join(","))
    }

    pub fn build(&self, rep: &Representation, seed: u64) -> Result<NeighborhoodSpec> {
        let n = rep.dim();
        let spec = match self.kind.as_str() {
            "ball" => NeighborhoodSpec::ball(n, self.number("r", Some(1.0))?),
            "box" => {
                let w = self.numbers("w")?.unwrap_or_else(|| vec![1.0]);
                let half_widths = match w.len() {
                    1 => vec![w[0]; n],
                    _ => w,
                };
                NeighborhoodSpec::Box { half_widths }
            }
            "split" | "logprod" | "hyper" => {
                let w = bounds::default_split(rep).ok_or_else(|| {
                    Error::InvalidNeighborhood(format!("{}: no proper invariant subspace to split at", self.kind))
                })?;
                let (k, frame) = split_frame(&w);
                let shape = self.shape()?;
                let unit = |d: usize| match shape {
                    "ball" => NeighborhoodSpec::ball(d, 1.0),
                    _ => NeighborhoodSpec::cube(d, 1.0),
                };
                let eps = self.number("eps", None)?;
                match self.kind.as_str() {
                    "split" => NeighborhoodSpec::split_chain(unit(k), unit(n - k), eps, Some(frame)),
                    "logprod" => NeighborhoodSpec::log_product(
                        unit(k),
                        unit(n - k),
                        self.number("R1", Some(1.0))?,
                        self.number("R2", Some(1.0))?,
                        eps,
                    )
                    .with_frame(frame),
                    _ => {
                        let r = eps.sqrt();
                        NeighborhoodSpec::log_product(unit(k), unit(n - k), r, r, eps * eps / 2.0).with_frame(frame)
                    }
                }
            }
            "orbitcap" => {
                let count = self.number("H", Some(16.0))?;
                if !(count >= 1.0 && count.fract() == 0.0) {
                    return Err(Error::InvalidNeighborhood("orbitcap: H must be a positive integer".into()));
                }
                let orbit = orbit_samples(rep, count as usize, self.number("hr", Some(1.0))?, seed)?;
                NeighborhoodSpec::orbit_capped(self.number("r", Some(1.0))?, self.number("R", Some(2.0))?, &orbit)?
            }
            _ => unreachable!("kind checked at parse time"),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Orthogonal frame `[W | W⊥]` and `dim W`.
fn split_frame(w: &Subspace) -> (usize, Mat) {
    let comp = w.complement();
    let n = w.ambient_dim();
    let mut frame = Mat::zeros(n, n);
    frame.view_mut((0, 0), (n, w.rank())).copy_from(w.basis());
    frame.view_mut((0, w.rank()), (n, comp.rank())).copy_from(comp.basis());
    (w.rank(), frame)
}

/// `I` followed by `exp(π(x))` for `x` uniform in the algebra ball of radius `hr`.
pub fn orbit_samples(rep: &Representation, count: usize, hr: f64, seed: u64) -> Result<Vec<Mat>> {
    let n = rep.dim();
    let m = rep.algebra().dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(oracle::STREAMS + 1);
    let ball = NeighborhoodSpec::ball(m.max(1), hr);
    let mut out = vec![Mat::identity(n, n)];
    while out.len() < count {
        let x = if m == 0 { Vector::zeros(0) } else { ball.sample(&mut rng)? };
        out.push(expm(&rep.action_of(&x)?));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct WeightRow {
    weight: String,
    multiplicity: usize,
    real: bool,
}

#[derive(Debug, Serialize)]
struct LevelReport {
    level: usize,
    dim: usize,
    weights: Vec<WeightRow>,
}

#[derive(Debug, Serialize)]
struct RepReport {
    dim: usize,
    group_size: usize,
    rho: f64,
    connected: bool,
    adjoint: bool,
    det_character: Vec<f64>,
    trivial_bound: f64,
}

#[derive(Debug, Serialize)]
struct AnalysisReport {
    name: String,
    dim: usize,
    basis: Vec<String>,
    derived_ranks: Vec<usize>,
    solvable: bool,
    semisimple: bool,
    radical_rank: usize,
    radical_basis: Vec<Vec<f64>>,
    unimodular: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    nilpotent_orbit_dim: Option<usize>,
    weights: Vec<LevelReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    representation: Option<RepReport>,
    warnings: Vec<String>,
}

fn analyze(loaded: &Loaded) -> Result<AnalysisReport> {
    let alg = loaded.algebra.clone();
    let mut warnings = Vec::new();
    let series = alg.derived_series();
    let rad = alg.radical()?;
    let uni = alg.is_unimodular();
    if let Some((i, tr)) = uni.witness {
        warnings.push(format!("NotUnimodular: trace(ad {}) = {tr}", alg.names()[i]));
    }
    let semisimple = rad.rank() == 0;
    let nilpotent_orbit_dim = if semisimple && alg.dim() > 0 { Some(alg.max_nilpotent_orbit_dim()?) } else { None };
    let n = alg.dim();
    let adjoint = Representation::adjoint(alg.clone(), vec![crate::rep::GroupElement::new("I", Mat::identity(n, n))])?;
    let mut weights = Vec::new();
    if rad.rank() > 0 {
        match bounds::radical_analysis(&adjoint) {
            Ok(ra) => {
                for lvl in &ra.levels {
                    weights.push(LevelReport {
                        level: lvl.level,
                        dim: lvl.level_dim(),
                        weights: lvl
                            .weights
                            .iter()
                            .map(|w| WeightRow {
                                weight: format_weight(&w.values),
                                multiplicity: w.multiplicity(),
                                real: w.is_real(1e-9),
                            })
                            .collect(),
                    });
                }
            }
            Err(e) => warnings.push(format!("weight decomposition failed: {e}")),
        }
    }
    let representation = match &loaded.representation {
        Some(rep) => {
            let rho = rep.operator_norm_sup(None)?.max(1.0);
            let det_character = match rep.determinant_character() {
                Ok(c) => c.values,
                Err(e) => {
                    warnings.push(format!("{e}"));
                    Vec::new()
                }
            };
            Some(RepReport {
                dim: rep.dim(),
                group_size: rep.group().len(),
                rho,
                connected: rep.connected(),
                adjoint: bounds::is_adjoint(rep),
                det_character,
                trivial_bound: rho.powi(-(rep.dim() as i32)),
            })
        }
        None => None,
    };
    Ok(AnalysisReport {
        name: loaded.name.clone(),
        dim: n,
        basis: alg.names().to_vec(),
        derived_ranks: series.ranks(),
        solvable: series.solvable,
        semisimple,
        radical_rank: rad.rank(),
        radical_basis: dio::rows_of(&rad.basis().transpose()),
        unimodular: uni.unimodular,
        nilpotent_orbit_dim,
        weights,
        representation,
        warnings,
    })
}

fn render_analysis(r: &AnalysisReport) -> String {
    let mut s = String::new();
    let kind = if r.semisimple {
        "semisimple"
    } else if r.solvable {
        "solvable"
    } else {
        "mixed (nonzero radical, not solvable)"
    };
    s += &format!("algebra: {} (dim {}, basis {})\n", r.name, r.dim, r.basis.join(", "));
    s += &format!("type: {kind}\n");
    s += &format!("derived series ranks: {:?}\n", r.derived_ranks);
    s += &format!("radical rank: {}\n", r.radical_rank);
    s += &format!("unimodular: {}\n", r.unimodular);
    if let Some(d) = r.nilpotent_orbit_dim {
        s += &format!("max nilpotent orbit dimension d: {d}\n");
    }
    for lvl in &r.weights {
        s += &format!("level {} (dim {}):\n", lvl.level, lvl.dim);
        for w in &lvl.weights {
            s += &format!("  weight {}  multiplicity {}{}\n", w.weight, w.multiplicity, if w.real { "" } else { "  (complex)" });
        }
    }
    if let Some(rep) = &r.representation {
        s += &format!(
            "representation: dim {}, |F| = {}, rho = {:.12}, connected {}, adjoint {}\n",
            rep.dim, rep.group_size, rep.rho, rep.connected, rep.adjoint
        );
        s += &format!("trivial bound: {:.12e}\n", rep.trivial_bound);
    }
    for w in &r.warnings {
        s += &format!("warning: {w}\n");
    }
    s
}

pub fn compute_bound(loaded: &Loaded, rule: RuleChoice, chi: ChiChoice) -> Result<BoundCertificate> {
    let rep = loaded.rep()?;
    let split = || {
        bounds::default_split(rep).ok_or_else(|| Error::Invalid("no proper invariant subspace to split at".into()))
    };
    let cert = match rule {
        RuleChoice::Auto => bounds::bound_representation(rep, loaded.theta.as_ref()),
        RuleChoice::Trivial => bounds::trivial_bound(rep, &InnerProduct::Euclidean),
        RuleChoice::Split => bounds::rescaled_split_bound(rep, &split()?),
        RuleChoice::Shift => {
            let w = split()?;
            let chi = match chi {
                ChiChoice::Det => None,
                ChiChoice::Trivial => Some(Character::trivial(rep)),
            };
            bounds::character_shift_bound(rep, &w, chi.as_ref())
        }
    }
    .map_err(|e| e.context(format!("bound for {}", loaded.name)))?;
    cert.validate()?;
    Ok(cert)
}

/// The value a family is checked against when no certificate is given.
fn family_reference(rep: &Representation, family: &Family, spec: &NeighborhoodSpec, cert: &BoundCertificate) -> Result<BoundCertificate> {
    match (family.kind.as_str(), spec) {
        ("box", NeighborhoodSpec::Box { half_widths }) => bounds::box_trivial_bound(rep, half_widths),
        ("ball", _) | ("orbitcap", _) => bounds::trivial_bound(rep, &InnerProduct::Euclidean),
        _ => Ok(cert.clone()),
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyRow {
    pub family: String,
    pub estimate: McEstimate,
    pub reference: f64,
    pub reference_rule: String,
    pub sigma: f64,
    pub pass: bool,
}

fn default_families(rep: &Representation) -> Vec<String> {
    let mut out = vec!["ball:r=1".to_string()];
    if let Some(w) = bounds::default_split(rep) {
        let unimodular_factors = [crate::rep::InducedMode::Sub, crate::rep::InducedMode::Quotient]
            .iter()
            .all(|m| rep.induced(&w, *m).map(|r| dets_one(&r)).unwrap_or(false));
        if unimodular_factors {
            out.push("split:eps=1e-9".to_string());
        }
    }
    out
}

fn dets_one(rep: &Representation) -> bool {
    rep.group().iter().all(|g| (g.matrix.determinant() - 1.0).abs() <= 1e-9)
}

fn read_certificate(path: &Path) -> Result<BoundCertificate> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    // Deliberately unvalidated: verify must be able to test any claimed value.
    serde_json::from_str(&text).map_err(|e| Error::from(e).context(path.display().to_string()))
}

fn emit(out: &Option<PathBuf>, content: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, content).map_err(|e| Error::from(e).context(p.display().to_string())),
        None => {
            stdout.write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

/// Draws for the log-product volume check: factor dims up to 3, ball or box
/// factors, `ε` between a twentieth of and the full `R1^{d1} R2^{d2}`.
pub fn log_product_draws(count: usize, seed: u64) -> Vec<NeighborhoodSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(oracle::STREAMS + 2);
    (0..count)
        .map(|_| {
            let factor = |rng: &mut ChaCha8Rng| {
                let d = rng.random_range(1..=3usize);
                if rng.random_bool(0.5) {
                    NeighborhoodSpec::ball(d, 1.0)
                } else {
                    NeighborhoodSpec::cube(d, 1.0)
                }
            };
            let first = factor(&mut rng);
            let second = factor(&mut rng);
            let r1 = rng.random_range(0.5..2.0f64);
            let r2 = rng.random_range(0.5..2.0f64);
            let max = r1.powi(first.dim() as i32) * r2.powi(second.dim() as i32);
            let eps = max * rng.random_range(0.05..1.0f64);
            NeighborhoodSpec::log_product(first, second, r1, r2, eps)
        })
        .collect()
}

/// Runs one parsed command, writing results to `stdout`; returns the exit code.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Analyze { source, format, out } => {
            let loaded = load_source(&source)?;
            let report = analyze(&loaded)?;
            let text = match format {
                Format::Json => dio::to_pretty_json(&report)?,
                Format::Text => render_analysis(&report),
                Format::Csv => return Err(Error::Invalid("analyze supports json and text".into())),
            };
            emit(&out, &text, stdout)?;
            for w in &report.warnings {
                if format == Format::Json || out.is_some() {
                    eprintln!("warning: {w}");
                }
            }
            Ok(EXIT_OK)
        }
        Command::Bound { source, rule, chi, format, out } => {
            let loaded = load_source(&source)?;
            let cert = compute_bound(&loaded, rule, chi)?;
            if let Some(p) = &out {
                std::fs::write(p, cert.to_json()).map_err(|e| Error::from(e).context(p.display().to_string()))?;
            }
            match format {
                Format::Json => {
                    if out.is_none() {
                        stdout.write_all(cert.to_json().as_bytes())?;
                    }
                }
                Format::Text => {
                    writeln!(stdout, "value: {:.12e}", cert.value)?;
                    writeln!(stdout, "c_lower: {:.12e}", cert.c_lower())?;
                    stdout.write_all(cert.render_tree().as_bytes())?;
                }
                Format::Csv => return Err(Error::Invalid("bound supports json and text".into())),
            }
            Ok(EXIT_OK)
        }
        Command::Estimate { source, family, sampling, format, out } => {
            let loaded = load_source(&source)?;
            let rep = loaded.rep()?;
            let fam = Family::parse(&family)?;
            let spec = fam.build(rep, sampling.seed)?;
            let est = oracle::mc_delta(rep, &spec, sampling.samples, sampling.seed)?;
            let text = match format {
                Format::Json => dio::to_pretty_json(&est)?,
                Format::Text => format!(
                    "family: {}\ndelta: {:.12e}\nstderr: {:.12e}\nsamples: {}\nhits: {}\nseed: {}\n",
                    fam.describe(),
                    est.value,
                    est.stderr,
                    est.samples,
                    est.hits,
                    est.seed
                ),
                Format::Csv => oracle::sweep_csv(&[SweepRow::new(f64::NAN, &est, None)], "param", "reference")?,
            };
            emit(&out, &text, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Verify { source, family, cert, sigma, sampling, format, out } => {
            let loaded = load_source(&source)?;
            let rep = loaded.rep()?;
            let given = cert.as_deref().map(read_certificate).transpose()?;
            let computed = match &given {
                Some(c) => c.clone(),
                None => compute_bound(&loaded, RuleChoice::Auto, ChiChoice::Det)?,
            };
            let families = if family.is_empty() { default_families(rep) } else { family };
            let mut rows = Vec::new();
            for text in &families {
                let fam = Family::parse(text)?;
                let spec = fam.build(rep, sampling.seed)?;
                let est = oracle::mc_delta(rep, &spec, sampling.samples, sampling.seed)?;
                let reference = match &given {
                    Some(c) => c.clone(),
                    None => family_reference(rep, &fam, &spec, &computed)?,
                };
                let pass = est.value >= reference.value - sigma * est.stderr;
                rows.push(VerifyRow {
                    family: fam.describe(),
                    estimate: est,
                    reference: reference.value,
                    reference_rule: format!("{:?} ({})", reference.rule, reference.rule.lemma()),
                    sigma,
                    pass,
                });
            }
            let text = match format {
                Format::Json => dio::to_pretty_json(&rows)?,
                _ => {
                    let mut s = String::new();
                    for r in &rows {
                        s += &format!(
                            "{}  {}  estimate {:.6e} ± {:.2e}  reference {:.6e}  [{}]\n",
                            if r.pass { "PASS" } else { "FAIL" },
                            r.family,
                            r.estimate.value,
                            r.estimate.stderr,
                            r.reference,
                            r.reference_rule
                        );
                    }
                    s
                }
            };
            emit(&out, &text, stdout)?;
            Ok(if rows.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Command::Sweep { source, axis, grid, family, draws, sampling, out } => {
            let csv = sweep(&source, axis, &grid, family.as_deref(), draws, &sampling)?;
            emit(&out, &csv, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Catalog { command } => match command {
            CatalogCommand::List => {
                for name in catalog::NAMES {
                    let e = catalog::get(name)?;
                    writeln!(stdout, "{name}\tdim {}\tscale {}\t{}", e.representation.dim(), e.scale, e.notes)?;
                }
                Ok(EXIT_OK)
            }
            CatalogCommand::Export { name, scale, out } => {
                let e = match scale {
                    Some(t) => catalog::get_scaled(&name, t)?,
                    None => catalog::get(&name)?,
                };
                emit(&out, &dio::to_pretty_json(&CatalogExport::from_entry(&e))?, stdout)?;
                Ok(EXIT_OK)
            }
        },
    }
}

fn sweep(source: &Source, axis: Axis, grid: &[f64], family: Option<&str>, draws: usize, s: &Sampling) -> Result<String> {
    if axis == Axis::Logvol {
        let mut rows = Vec::new();
        for (i, spec) in log_product_draws(draws, s.seed).iter().enumerate() {
            let est = oracle::mc_volume(spec, s.samples, s.seed)?;
            rows.push(SweepRow::new(i as f64, &est, spec.exact_volume()));
        }
        return oracle::sweep_csv(&rows, "draw", "exact");
    }
    if grid.is_empty() {
        return Err(Error::Invalid("--grid must list at least one value".into()));
    }
    let loaded = load_source(source)?;
    let rep = loaded.rep()?;
    match axis {
        Axis::Eps => {
            let fam = Family::parse(family.unwrap_or("hyper:eps=0.1"))?;
            let trivial = bounds::trivial_bound(rep, &InnerProduct::Euclidean)?.value;
            let mut rows = Vec::new();
            for &eps in grid {
                let spec = fam.with_eps(eps)?.build(rep, s.seed)?;
                let est = oracle::mc_delta(rep, &spec, s.samples, s.seed)?;
                rows.push(SweepRow::new(eps, &est, Some(trivial)));
            }
            oracle::sweep_csv(&rows, "eps", "trivial_bound")
        }
        Axis::ChartScale => {
            let real = loaded
                .realization
                .as_ref()
                .ok_or_else(|| Error::Invalid("chart_scale sweeps need a catalog entry with a matrix realization".into()))?;
            let spec = Family::parse(family.unwrap_or("ball:r=1"))?.build(rep, s.seed)?;
            let algebra_level = oracle::mc_delta(rep, &spec, s.samples, s.seed)?;
            let mut rows = Vec::new();
            for &scale in grid {
                let est = oracle::group_level_delta(real, &spec, scale, s.samples, s.seed)?;
                rows.push(SweepRow::new(scale, &est, Some(algebra_level.value)));
            }
            oracle::sweep_csv(&rows, "chart_scale", "algebra_level")
        }
        Axis::R => {
            let spec = Family::parse(family.unwrap_or("ball:r=1"))?.build(rep, s.seed)?;
            let mut radii = grid.to_vec();
            radii.push(0.0);
            let ests = oracle::shrink_set_delta(rep, &spec, &radii, s.samples, s.seed)?;
            let base = ests[grid.len()].value;
            let rows: Vec<SweepRow> = grid.iter().zip(&ests).map(|(r, e)| SweepRow::new(*r, e, Some(base))).collect();
            oracle::sweep_csv(&rows, "r", "unshrunk")
        }
        Axis::Logvol => unreachable!("handled above"),
    }
}

/// Entry point for the binary: parses `std::env::args`, runs, and maps
/// errors to exit code 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
    }
}
