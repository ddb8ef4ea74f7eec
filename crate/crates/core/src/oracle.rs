//! Monte Carlo volume oracle.
//!
//! Every estimator draws from 16 ChaCha8 streams derived from one `u64`
//! seed, so results are bit-identical for a fixed seed regardless of the
//! rayon thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::MatrixRealization;
use crate::linalg::{expm, logm, Mat, Vector};
use crate::rep::Representation;
use crate::{Error, Result};

/// Number of independent RNG streams an estimate is split over.
pub const STREAMS: u64 = 16;
/// Smallest sample count the estimators accept.
pub const MIN_SAMPLES: u64 = 1000;
const GAUGE_BISECTIONS: usize = 80;
const REJECTION_TRIES: usize = 1_000_000;
/// Relative exp/log round-trip residual above which a chart is rejected.
pub const CHART_TOL: f64 = 1e-8;

/// A bounded, balanced, star-shaped neighbourhood of zero.
///
/// `frame`, where present, is an orthogonal matrix whose columns give the
/// local coordinates: `x` is tested through `frameᵀ x`, with the first
/// factor's coordinates first.
#[derive(Debug, Clone)]
pub enum NeighborhoodSpec {
    Ball { dim: usize, radius: f64 },
    Box { half_widths: Vec<f64> },
    /// `U ×_{R1,R2,ε} V`: pairs `(a, b)` with gauges `α ≤ R1`, `β ≤ R2`,
    /// `α^{d1} β^{d2} ≤ ε`.
    LogProduct {
        first: Box<NeighborhoodSpec>,
        second: Box<NeighborhoodSpec>,
        r1: f64,
        r2: f64,
        eps: f64,
        frame: Option<Mat>,
    },
    /// `U_W × ε U_Q`.
    SplitChain {
        first: Box<NeighborhoodSpec>,
        second: Box<NeighborhoodSpec>,
        eps: f64,
        frame: Option<Mat>,
    },
    /// `{|x| < cap} ∩ ⋃_h π(h) B_radius`, stored through the inverses `π(h)⁻¹`.
    OrbitCapped { radius: f64, cap: f64, orbit_inv: Vec<Mat> },
}

impl NeighborhoodSpec {
    pub fn ball(dim: usize, radius: f64) -> Self {
        NeighborhoodSpec::Ball { dim, radius }
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        NeighborhoodSpec::Box { half_widths: vec![half_width; dim] }
    }

    pub fn log_product(first: NeighborhoodSpec, second: NeighborhoodSpec, r1: f64, r2: f64, eps: f64) -> Self {
        NeighborhoodSpec::LogProduct { first: Box::new(first), second: Box::new(second), r1, r2, eps, frame: None }
    }

    /// The planar set `U_{√ε,ε} = {|x|,|y| < √ε, |xy| < ε²/2}`.
    pub fn hyperbolic(eps: f64) -> Self {
        let r = eps.sqrt();
        Self::log_product(Self::cube(1, 1.0), Self::cube(1, 1.0), r, r, eps * eps / 2.0)
    }

    pub fn split_chain(first: NeighborhoodSpec, second: NeighborhoodSpec, eps: f64, frame: Option<Mat>) -> Self {
        NeighborhoodSpec::SplitChain { first: Box::new(first), second: Box::new(second), eps, frame }
    }

    /// Orbit-capped set from the matrices `π(h)` of a finite sample of `H`.
    pub fn orbit_capped(radius: f64, cap: f64, orbit: &[Mat]) -> Result<Self> {
        let orbit_inv = orbit
            .iter()
            .enumerate()
            .map(|(i, m)| {
                m.clone()
                    .try_inverse()
                    .ok_or_else(|| Error::SingularGroupMatrix { label: format!("h{i}") })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NeighborhoodSpec::OrbitCapped { radius, cap, orbit_inv })
    }

    pub fn with_frame(self, frame: Mat) -> Self {
        match self {
            NeighborhoodSpec::LogProduct { first, second, r1, r2, eps, .. } => {
                NeighborhoodSpec::LogProduct { first, second, r1, r2, eps, frame: Some(frame) }
            }
            NeighborhoodSpec::SplitChain { first, second, eps, .. } => {
                NeighborhoodSpec::SplitChain { first, second, eps, frame: Some(frame) }
            }
            other => other,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NeighborhoodSpec::Ball { dim, .. } => *dim,
            NeighborhoodSpec::Box { half_widths } => half_widths.len(),
            NeighborhoodSpec::LogProduct { first, second, .. } | NeighborhoodSpec::SplitChain { first, second, .. } => {
                first.dim() + second.dim()
            }
            NeighborhoodSpec::OrbitCapped { orbit_inv, .. } => orbit_inv.first().map_or(0, |m| m.nrows()),
        }
    }

    pub fn frame(&self) -> Option<&Mat> {
        match self {
            NeighborhoodSpec::LogProduct { frame, .. } | NeighborhoodSpec::SplitChain { frame, .. } => frame.as_ref(),
            _ => None,
        }
    }

    /// Checks parameters and frame shape.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidNeighborhood(m));
        match self {
            NeighborhoodSpec::Ball { dim, radius } => {
                if *dim == 0 || !(*radius > 0.0 && radius.is_finite()) {
                    return bad(format!("ball needs dim >= 1 and a positive radius, got dim {dim}, radius {radius}"));
                }
            }
            NeighborhoodSpec::Box { half_widths } => {
                if half_widths.is_empty() || half_widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return bad("box needs positive finite half-widths".into());
                }
            }
            NeighborhoodSpec::LogProduct { first, second, r1, r2, eps, frame } => {
                first.validate()?;
                second.validate()?;
                if !(*r1 > 0.0 && *r2 > 0.0) {
                    return bad(format!("log-product radii must be positive, got {r1}, {r2}"));
                }
                let max = r1.powi(first.dim() as i32) * r2.powi(second.dim() as i32);
                if !(*eps > 0.0 && *eps <= max * (1.0 + 1e-12)) {
                    return Err(Error::EpsilonOutOfRange { eps: *eps, max });
                }
                check_frame(frame.as_ref(), self.dim())?;
            }
            NeighborhoodSpec::SplitChain { first, second, eps, frame } => {
                first.validate()?;
                second.validate()?;
                if !(*eps > 0.0 && eps.is_finite()) {
                    return bad(format!("split-chain eps must be positive, got {eps}"));
                }
                check_frame(frame.as_ref(), self.dim())?;
            }
            NeighborhoodSpec::OrbitCapped { radius, cap, orbit_inv } => {
                if orbit_inv.is_empty() {
                    return bad("orbit-capped set needs at least one orbit element".into());
                }
                if !(*radius > 0.0 && *cap > 0.0) {
                    return bad(format!("orbit-capped radius and cap must be positive, got {radius}, {cap}"));
                }
                let n = orbit_inv[0].nrows();
                if orbit_inv.iter().any(|m| m.nrows() != n || m.ncols() != n) {
                    return bad("orbit matrices must be square of one size".into());
                }
            }
        }
        Ok(())
    }

    fn to_local(&self, x: &Vector) -> Vector {
        match self.frame() {
            Some(f) => f.tr_mul(x),
            None => x.clone(),
        }
    }

    fn to_ambient(&self, y: Vector) -> Vector {
        match self.frame() {
            Some(f) => f * y,
            None => y,
        }
    }

    pub fn contains(&self, x: &Vector) -> bool {
        self.contains_local(&self.to_local(x))
    }

    fn contains_local(&self, y: &Vector) -> bool {
        match self {
            NeighborhoodSpec::Ball { radius, .. } => y.norm_squared() < radius * radius,
            NeighborhoodSpec::Box { half_widths } => y.iter().zip(half_widths).all(|(v, w)| v.abs() < *w),
            NeighborhoodSpec::LogProduct { first, second, r1, r2, eps, .. } => {
                let (a, b) = split(y, first.dim());
                let alpha = first.gauge(&a);
                let beta = second.gauge(&b);
                alpha < *r1
                    && beta < *r2
                    && alpha.powi(first.dim() as i32) * beta.powi(second.dim() as i32) < *eps
            }
            NeighborhoodSpec::SplitChain { first, second, eps, .. } => {
                let (a, b) = split(y, first.dim());
                first.contains(&a) && second.contains(&(b / *eps))
            }
            NeighborhoodSpec::OrbitCapped { radius, cap, orbit_inv } => {
                y.norm_squared() < cap * cap
                    && orbit_inv.iter().any(|m| (m * y).norm_squared() < radius * radius)
            }
        }
    }

    /// Minkowski gauge `inf{t > 0 : y ∈ tU}`.
    pub fn gauge(&self, y: &Vector) -> f64 {
        match self {
            NeighborhoodSpec::Ball { radius, .. } => y.norm() / radius,
            NeighborhoodSpec::Box { half_widths } => {
                y.iter().zip(half_widths).map(|(v, w)| v.abs() / w).fold(0.0, f64::max)
            }
            _ => {
                if y.iter().all(|v| *v == 0.0) {
                    return 0.0;
                }
                let mut hi = 1.0;
                while !self.contains(&(y / hi)) {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return f64::INFINITY;
                    }
                }
                let mut lo = 0.0;
                for _ in 0..GAUGE_BISECTIONS {
                    let mid = 0.5 * (lo + hi);
                    if mid > 0.0 && self.contains(&(y / mid)) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    }

    /// Half-widths of an axis-aligned box containing the set in local coordinates.
    fn local_bbox(&self) -> Vec<f64> {
        match self {
            NeighborhoodSpec::Ball { dim, radius } => vec![*radius; *dim],
            NeighborhoodSpec::Box { half_widths } => half_widths.clone(),
            NeighborhoodSpec::LogProduct { first, second, r1, r2, .. } => first
                .local_bbox()
                .into_iter()
                .map(|w| w * r1)
                .chain(second.local_bbox().into_iter().map(|w| w * r2))
                .collect(),
            NeighborhoodSpec::SplitChain { first, second, eps, .. } => first
                .local_bbox()
                .into_iter()
                .chain(second.local_bbox().into_iter().map(|w| w * eps))
                .collect(),
            NeighborhoodSpec::OrbitCapped { cap, orbit_inv, .. } => vec![*cap; orbit_inv[0].nrows()],
        }
    }

    /// Half-widths of an axis-aligned box containing the set in ambient coordinates.
    pub fn bbox(&self) -> Vec<f64> {
        let local = self.local_bbox();
        match self.frame() {
            None => local,
            Some(f) => {
                // |x_i| <= Σ_j |F_ij| w_j, and never beyond the half-diagonal.
                let diag = local.iter().map(|w| w * w).sum::<f64>().sqrt();
                f.row_iter()
                    .map(|row| row.iter().zip(&local).map(|(c, w)| c.abs() * w).sum::<f64>().min(diag))
                    .collect()
            }
        }
    }

    /// Closed-form Lebesgue measure, where one is known.
    pub fn exact_volume(&self) -> Option<f64> {
        match self {
            NeighborhoodSpec::Ball { dim, radius } => Some(unit_ball_volume(*dim) * radius.powi(*dim as i32)),
            NeighborhoodSpec::Box { half_widths } => Some(half_widths.iter().map(|w| 2.0 * w).product()),
            NeighborhoodSpec::LogProduct { first, second, r1, r2, eps, .. } => {
                let lu = first.exact_volume()?;
                let lv = second.exact_volume()?;
                exact_log_product_volume(first.dim(), second.dim(), lu, lv, *r1, *r2, *eps).ok()
            }
            NeighborhoodSpec::SplitChain { first, second, eps, .. } => {
                Some(first.exact_volume()? * second.exact_volume()? * eps.powi(second.dim() as i32))
            }
            NeighborhoodSpec::OrbitCapped { .. } => None,
        }
    }

    /// Radius of a Euclidean ball about zero inside the set.
    pub fn inradius(&self) -> f64 {
        match self {
            NeighborhoodSpec::Ball { radius, .. } => *radius,
            NeighborhoodSpec::Box { half_widths } => half_widths.iter().copied().fold(f64::INFINITY, f64::min),
            NeighborhoodSpec::LogProduct { first, second, r1, r2, eps, .. } => {
                let (iu, iv) = (first.inradius(), second.inradius());
                let (d1, d2) = (first.dim() as f64, second.dim() as f64);
                let joint = (eps * iu.powf(d1) * iv.powf(d2)).powf(1.0 / (d1 + d2));
                (r1 * iu).min(r2 * iv).min(joint)
            }
            NeighborhoodSpec::SplitChain { first, second, eps, .. } => first.inradius().min(eps * second.inradius()),
            NeighborhoodSpec::OrbitCapped { radius, cap, orbit_inv } => {
                let best = orbit_inv
                    .iter()
                    .map(|m| radius / crate::linalg::spectral_norm(m))
                    .fold(0.0, f64::max);
                best.min(*cap)
            }
        }
    }

    /// Whether the open ball of radius `r` about `x` lies in the set.
    ///
    /// Exact for balls and boxes. For composite sets the test is
    /// conservative: it may answer `false` for points that qualify.
    pub fn inner_margin_contains(&self, x: &Vector, r: f64) -> Result<bool> {
        self.inner_local(&self.to_local(x), r)
    }

    fn inner_local(&self, y: &Vector, r: f64) -> Result<bool> {
        Ok(match self {
            NeighborhoodSpec::Ball { radius, .. } => y.norm() + r <= *radius,
            NeighborhoodSpec::Box { half_widths } => y.iter().zip(half_widths).all(|(v, w)| v.abs() + r <= *w),
            NeighborhoodSpec::SplitChain { first, second, eps, .. } => {
                let (a, b) = split(y, first.dim());
                first.inner_local(&a, r)? && second.inner_local(&(b / *eps), r / eps)?
            }
            NeighborhoodSpec::LogProduct { first, second, r1, r2, eps, .. } => {
                for f in [first, second] {
                    if !matches!(**f, NeighborhoodSpec::Ball { .. } | NeighborhoodSpec::Box { .. }) {
                        return Err(Error::InvalidNeighborhood(
                            "inner margins of log-products need ball or box factors".into(),
                        ));
                    }
                }
                let (a, b) = split(y, first.dim());
                // For convex factors g(a + z) <= g(a) + |z| / inradius.
                let alpha = first.gauge(&a) + r / first.inradius();
                let beta = second.gauge(&b) + r / second.inradius();
                alpha <= *r1
                    && beta <= *r2
                    && alpha.powi(first.dim() as i32) * beta.powi(second.dim() as i32) <= *eps
            }
            NeighborhoodSpec::OrbitCapped { radius, cap, orbit_inv } => {
                y.norm() + r <= *cap
                    && orbit_inv
                        .iter()
                        .any(|m| (m * y).norm() + crate::linalg::spectral_norm(m) * r <= *radius)
            }
        })
    }

    /// One uniform draw from the set.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector> {
        let y = self.sample_local(rng)?;
        Ok(self.to_ambient(y))
    }

    fn sample_local<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector> {
        Ok(match self {
            NeighborhoodSpec::Ball { dim, radius } => {
                let mut g = Vector::from_fn(*dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                while g.norm() == 0.0 {
                    g = Vector::from_fn(*dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                }
                let u: f64 = rng.sample(Open01);
                let len = radius * u.powf(1.0 / *dim as f64);
                let norm = g.norm();
                g * (len / norm)
            }
            NeighborhoodSpec::Box { half_widths } => Vector::from_iterator(
                half_widths.len(),
                half_widths.iter().map(|w| {
                    let u: f64 = rng.sample(Open01);
                    w * (2.0 * u - 1.0)
                }),
            ),
            NeighborhoodSpec::LogProduct { first, second, r1, r2, eps, .. } => {
                // Gauge powers s = α^{d1}, t = β^{d2} are uniform on
                // {s < S, t < T, st < ε}; directions follow the cone measure.
                let (d1, d2) = (first.dim() as i32, second.dim() as i32);
                let big_s = r1.powi(d1);
                let big_t = r2.powi(d2);
                let total = eps * (1.0 + (big_s * big_t / eps).ln());
                let w = rng.sample::<f64, _>(Open01) * total;
                let s = if w <= *eps { w / big_t } else { (eps / big_t) * ((w - eps) / eps).exp() };
                let t = rng.sample::<f64, _>(Open01) * big_t.min(eps / s);
                let a = first.sample_direction(rng)? * s.powf(1.0 / d1 as f64);
                let b = second.sample_direction(rng)? * t.powf(1.0 / d2 as f64);
                concat(&a, &b)
            }
            NeighborhoodSpec::SplitChain { first, second, eps, .. } => {
                let a = first.sample(rng)?;
                let b = second.sample(rng)? * *eps;
                concat(&a, &b)
            }
            NeighborhoodSpec::OrbitCapped { cap, orbit_inv, .. } => {
                let bbox = vec![*cap; orbit_inv[0].nrows()];
                let mut tries = 0;
                loop {
                    let y = uniform_in_box(rng, &bbox);
                    if self.contains_local(&y) {
                        break y;
                    }
                    tries += 1;
                    if tries >= REJECTION_TRIES {
                        return Err(Error::InvalidNeighborhood(
                            "orbit-capped set too thin for rejection sampling".into(),
                        ));
                    }
                }
            }
        })
    }

    /// `u / g(u)` for `u` uniform in the set.
    fn sample_direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector> {
        loop {
            let u = self.sample(rng)?;
            let g = self.gauge(&u);
            if g > 0.0 && g.is_finite() {
                return Ok(u / g);
            }
        }
    }
}

fn check_frame(frame: Option<&Mat>, n: usize) -> Result<()> {
    if let Some(f) = frame {
        if f.nrows() != n || f.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: f.nrows() });
        }
        let defect = (f.tr_mul(f) - Mat::identity(n, n)).amax();
        if defect > 1e-9 {
            return Err(Error::InvalidNeighborhood(format!("frame is not orthogonal (defect {defect:.3e})")));
        }
    }
    Ok(())
}

fn split(y: &Vector, k: usize) -> (Vector, Vector) {
    (y.rows(0, k).into_owned(), y.rows(k, y.len() - k).into_owned())
}

fn concat(a: &Vector, b: &Vector) -> Vector {
    Vector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

fn uniform_in_box<R: Rng + ?Sized>(rng: &mut R, half_widths: &[f64]) -> Vector {
    Vector::from_iterator(
        half_widths.len(),
        half_widths.iter().map(|w| {
            let u: f64 = rng.sample(Open01);
            w * (2.0 * u - 1.0)
        }),
    )
}

/// Volume of the Euclidean unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

/// `ε (1 + log(R1^{d1} R2^{d2} / ε)) Λ(U) Λ(V)`.
pub fn exact_log_product_volume(d1: usize, d2: usize, lu: f64, lv: f64, r1: f64, r2: f64, eps: f64) -> Result<f64> {
    let max = r1.powi(d1 as i32) * r2.powi(d2 as i32);
    if !(eps > 0.0 && eps <= max * (1.0 + 1e-12)) {
        return Err(Error::EpsilonOutOfRange { eps, max });
    }
    Ok(eps * (1.0 + (max / eps).ln().max(0.0)) * lu * lv)
}

/// A Monte Carlo estimate of a probability or ratio with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub hits: u64,
    pub seed: u64,
}

impl McEstimate {
    fn from_hits(hits: u64, samples: u64, seed: u64) -> Self {
        let p = hits as f64 / samples as f64;
        McEstimate { value: p, stderr: (p * (1.0 - p) / samples as f64).sqrt(), samples, hits, seed }
    }

    fn scaled(self, k: f64) -> Self {
        McEstimate { value: self.value * k, stderr: self.stderr * k, ..self }
    }

    /// `|value - target| <= sigma * stderr`.
    pub fn within(&self, target: f64, sigma: f64) -> bool {
        (self.value - target).abs() <= sigma * self.stderr
    }
}

fn check_samples(samples: u64) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::Invalid(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    Ok(())
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `trial` `samples` times across the fixed streams and sums its counts.
///
/// `trial` returns one count per tracked event, so several nested events can
/// share the same draws.
fn run_counts<F>(samples: u64, seed: u64, events: usize, trial: F) -> Result<Vec<u64>>
where
    F: Fn(&mut ChaCha8Rng, &mut [u64]) -> Result<()> + Sync,
{
    let per = samples / STREAMS;
    let extra = samples % STREAMS;
    let parts = (0..STREAMS)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s);
            let n = per + u64::from(s < extra);
            let mut counts = vec![0u64; events];
            for _ in 0..n {
                trial(&mut rng, &mut counts)?;
            }
            Ok(counts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![0u64; events];
    for part in parts {
        for (t, c) in total.iter_mut().zip(part) {
            *t += c;
        }
    }
    Ok(total)
}

/// Volume estimate by rejection from the bounding box.
pub fn mc_volume(spec: &NeighborhoodSpec, samples: u64, seed: u64) -> Result<McEstimate> {
    spec.validate()?;
    check_samples(samples)?;
    let bbox = spec.bbox();
    let box_volume: f64 = bbox.iter().map(|w| 2.0 * w).product();
    let counts = run_counts(samples, seed, 1, |rng, c| {
        let x = uniform_in_box(rng, &bbox);
        if spec.contains(&x) {
            c[0] += 1;
        }
        Ok(())
    })?;
    Ok(McEstimate::from_hits(counts[0], samples, seed).scaled(box_volume))
}

/// Local-coordinate matrices of `π(g)⁻¹` for every `g ∈ F`.
fn inverse_actions(rep: &Representation, spec: &NeighborhoodSpec) -> Result<Vec<Mat>> {
    if spec.dim() != rep.dim() {
        return Err(Error::DimensionMismatch { expected: rep.dim(), got: spec.dim() });
    }
    rep.group()
        .iter()
        .map(|g| {
            g.matrix
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::SingularGroupMatrix { label: g.label.clone() })
        })
        .collect()
}

fn in_intersection(spec: &NeighborhoodSpec, inverses: &[Mat], x: &Vector) -> bool {
    inverses.iter().all(|m| spec.contains(&(m * x)))
}

/// Estimate of `δ = Λ(∩_{g∈F} π(g)U) / Λ(U)`, drawing uniformly from `U`.
pub fn mc_delta(rep: &Representation, spec: &NeighborhoodSpec, samples: u64, seed: u64) -> Result<McEstimate> {
    spec.validate()?;
    check_samples(samples)?;
    let inverses = inverse_actions(rep, spec)?;
    let counts = run_counts(samples, seed, 1, |rng, c| {
        let x = spec.sample(rng)?;
        if in_intersection(spec, &inverses, &x) {
            c[0] += 1;
        }
        Ok(())
    })?;
    Ok(McEstimate::from_hits(counts[0], samples, seed))
}

/// `Λ((A^r)^F) / Λ(A)` for each `r`, all from the same draws, where
/// `A^r = {x : B_r(x) ⊆ A}`. A zero radius gives `Λ(A^F) / Λ(A)`.
pub fn shrink_set_delta(
    rep: &Representation,
    spec: &NeighborhoodSpec,
    radii: &[f64],
    samples: u64,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    spec.validate()?;
    check_samples(samples)?;
    if radii.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(Error::Invalid("shrink radii must be finite and nonnegative".into()));
    }
    let inverses = inverse_actions(rep, spec)?;
    let counts = run_counts(samples, seed, radii.len(), |rng, c| {
        let x = spec.sample(rng)?;
        let images: Vec<Vector> = inverses.iter().map(|m| m * &x).collect();
        for (slot, &r) in c.iter_mut().zip(radii) {
            let mut inside = true;
            for y in &images {
                let ok = if r == 0.0 { spec.contains(y) } else { spec.inner_margin_contains(y, r)? };
                if !ok {
                    inside = false;
                    break;
                }
            }
            if inside {
                *slot += 1;
            }
        }
        Ok(())
    })?;
    Ok(counts.into_iter().map(|h| McEstimate::from_hits(h, samples, seed)).collect())
}

/// Group-level ratio `Haar(∩_g g exp(sU) g⁻¹) / Haar(exp(sU))` in the
/// exponential chart of a matrix realization.
///
/// The Haar density is taken to be constant on the chart, which is exact for
/// nilpotent groups and correct to first order in `s` in general.
pub fn group_level_delta(
    realization: &MatrixRealization,
    spec: &NeighborhoodSpec,
    scale: f64,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    spec.validate()?;
    check_samples(samples)?;
    let n = realization.basis.len();
    if spec.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: spec.dim() });
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Invalid(format!("chart scale must be positive, got {scale}")));
    }
    // Coordinates of a matrix in the basis, by least squares on vec().
    let m = realization.basis[0].nrows();
    let vec_basis = Mat::from_fn(m * m, n, |r, c| realization.basis[c][(r % m, r / m)]);
    let pinv = vec_basis
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Invalid(format!("basis pseudo-inverse failed: {e}")))?;
    let coords = |a: &Mat| -> Vector { &pinv * Vector::from_column_slice(a.as_slice()) };
    let inverses: Vec<(Mat, Mat)> = realization
        .group
        .iter()
        .enumerate()
        .map(|(i, g)| {
            g.clone()
                .try_inverse()
                .map(|gi| (g.clone(), gi))
                .ok_or_else(|| Error::SingularGroupMatrix { label: format!("g{i}") })
        })
        .collect::<Result<_>>()?;
    check_chart(realization, spec, scale, &coords)?;
    let counts = run_counts(samples, seed, 1, |rng, c| {
        let x = spec.sample(rng)?;
        let element = expm(&(realization.element(&x) * scale));
        let mut inside = true;
        for (g, gi) in &inverses {
            let conj = gi * &element * g;
            let y = match logm(&conj) {
                Ok(l) => coords(&l) / scale,
                Err(_) => {
                    inside = false;
                    break;
                }
            };
            if !spec.contains(&y) {
                inside = false;
                break;
            }
        }
        if inside {
            c[0] += 1;
        }
        Ok(())
    })?;
    Ok(McEstimate::from_hits(counts[0], samples, seed))
}

/// Probes `log(exp(sX)) = sX` at the corners of the bounding box.
fn check_chart(
    realization: &MatrixRealization,
    spec: &NeighborhoodSpec,
    scale: f64,
    coords: &dyn Fn(&Mat) -> Vector,
) -> Result<()> {
    let bbox = spec.bbox();
    let n = bbox.len();
    let corners = 1usize << n.min(10);
    let mut worst = 0.0f64;
    for mask in 0..corners {
        let x = Vector::from_fn(n, |i, _| if mask >> i & 1 == 1 { bbox[i] } else { -bbox[i] });
        let target = &x * scale;
        let back = logm(&expm(&(realization.element(&x) * scale)))
            .map(|l| coords(&l))
            .map_err(|_| Error::ChartNotInjective { residual: f64::INFINITY })?;
        worst = worst.max((back - &target).norm() / target.norm().max(1e-300));
    }
    if worst > CHART_TOL {
        return Err(Error::ChartNotInjective { residual: worst });
    }
    Ok(())
}

/// `δ` of an orbit-capped set built from a finite sample of the orbit group.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitEstimate {
    pub estimate: McEstimate,
    /// Always true: a finite orbit sample under-covers the union.
    pub approximate: bool,
    pub orbit_samples: usize,
}

pub fn orbit_capped_delta(
    rep: &Representation,
    orbit: &[Mat],
    radius: f64,
    cap: f64,
    samples: u64,
    seed: u64,
) -> Result<OrbitEstimate> {
    let spec = NeighborhoodSpec::orbit_capped(radius, cap, orbit)?;
    let estimate = mc_delta(rep, &spec, samples, seed)?;
    Ok(OrbitEstimate { estimate, approximate: true, orbit_samples: orbit.len() })
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
    /// Comparison value whose meaning depends on the sweep axis.
    pub reference: Option<f64>,
}

impl SweepRow {
    pub fn new(param: f64, est: &McEstimate, reference: Option<f64>) -> Self {
        SweepRow { param, value: est.value, stderr: est.stderr, samples: est.samples, seed: est.seed, reference }
    }
}

/// CSV with header `<param_name>,value,stderr,samples,seed,<reference_name>`.
pub fn sweep_csv(rows: &[SweepRow], param_name: &str, reference_name: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    w.write_record([param_name, "value", "stderr", "samples", "seed", reference_name]).map_err(io)?;
    for r in rows {
        let reference = r.reference.map(|b| format!("{b:.12e}")).unwrap_or_default();
        w.write_record([
            format!("{:.12e}", r.param),
            format!("{:.12e}", r.value),
            format!("{:.12e}", r.stderr),
            r.samples.to_string(),
            r.seed.to_string(),
            reference,
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Invalid(format!("csv: {e}")))
}

/// Independent draw sequence used by tests and callers that need raw samples.
pub fn sample_many(spec: &NeighborhoodSpec, count: usize, seed: u64) -> Result<Vec<Vector>> {
    spec.validate()?;
    let mut rng = stream_rng(seed, 0);
    (0..count).map(|_| spec.sample(&mut rng)).collect()
}
