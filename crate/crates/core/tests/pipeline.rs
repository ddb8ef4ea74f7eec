use std::sync::Arc;

use delta_bounds::bounds::{self, BoundCertificate, InnerProduct, Rule};
use delta_bounds::catalog;
use delta_bounds::cli::Family;
use delta_bounds::linalg::Mat;
use delta_bounds::oracle::{self, NeighborhoodSpec};
use delta_bounds::rep::{GroupElement, Representation};

const SAMPLES: u64 = 100_000;

#[test]
fn catalog_certificates_use_expected_rules() {
    let expect = [
        ("heisenberg3", Rule::SolvableSharp, 1.0),
        ("se2", Rule::SolvableSharp, 1.0),
        ("sl2_adjoint", Rule::SemisimpleOrbit, 0.25),
        ("tangent_sl2", Rule::Reduction, 2f64.powi(-8)),
        ("so3", Rule::SemisimpleOrbit, 1.0),
    ];
    for (name, rule, value) in expect {
        let e = catalog::get(name).unwrap();
        let cert = bounds::full_pipeline(&e.representation, e.involution.as_ref()).unwrap();
        assert_eq!(cert.rule, rule, "{name}");
        assert!((cert.value - value).abs() <= 1e-9, "{name}: {}", cert.value);
        cert.validate().unwrap();
    }
}

#[test]
fn every_entry_certificate_in_unit_interval() {
    for name in catalog::NAMES {
        let e = catalog::get(name).unwrap();
        let cert = bounds::bound_representation(&e.representation, e.involution.as_ref()).unwrap();
        assert!(cert.value > 0.0 && cert.value <= 1.0, "{name}: {}", cert.value);
        let trivial = bounds::trivial_bound(&e.representation, &InnerProduct::Euclidean).unwrap();
        assert!(cert.value >= trivial.value - 1e-15, "{name}");
    }
}

#[test]
fn certificates_serialize_identically() {
    let e = catalog::get("tangent_sl2").unwrap();
    let a = bounds::full_pipeline(&e.representation, e.involution.as_ref()).unwrap().to_json();
    let b = bounds::full_pipeline(&e.representation, e.involution.as_ref()).unwrap().to_json();
    assert_eq!(a, b);
    let back = BoundCertificate::from_json(&a).unwrap();
    assert_eq!(back.to_json(), a);
}

/// Estimates never fall below the bound that applies to their family: the
/// trivial bound for balls and boxes, the certificate for split families.
#[test]
fn oracle_is_consistent_with_family_bounds() {
    for name in catalog::NAMES {
        let e = catalog::get(name).unwrap();
        let rep = &e.representation;
        let ball = NeighborhoodSpec::ball(rep.dim(), 1.0);
        let est = oracle::mc_delta(rep, &ball, SAMPLES, 7).unwrap();
        let trivial = bounds::trivial_bound(rep, &InnerProduct::Euclidean).unwrap().value;
        assert!(est.value >= trivial - 3.0 * est.stderr, "{name}: {est:?} vs {trivial}");

        let widths = vec![1.0; rep.dim()];
        let est = oracle::mc_delta(rep, &NeighborhoodSpec::Box { half_widths: widths.clone() }, SAMPLES, 7).unwrap();
        let boxed = bounds::box_trivial_bound(rep, &widths).unwrap().value;
        assert!(est.value >= boxed - 3.0 * est.stderr, "{name} box: {est:?} vs {boxed}");
    }
    for name in ["heisenberg3", "se2", "tangent_sl2"] {
        let e = catalog::get(name).unwrap();
        let rep = &e.representation;
        let cert = bounds::bound_representation(rep, e.involution.as_ref()).unwrap();
        let spec = Family::parse("split:eps=1e-9").unwrap().build(rep, 0).unwrap();
        let est = oracle::mc_delta(rep, &spec, SAMPLES, 7).unwrap();
        assert!(est.value >= cert.value - 3.0 * est.stderr, "{name}: {est:?} vs {}", cert.value);
    }
}

#[test]
fn identity_group_gives_delta_one() {
    let e = catalog::get("sl2_adjoint").unwrap();
    let rep = e.representation.with_group(vec![GroupElement::new("I", Mat::identity(3, 3))]).unwrap();
    let est = oracle::mc_delta(&rep, &NeighborhoodSpec::ball(3, 1.0), 5000, 3).unwrap();
    assert_eq!((est.value, est.stderr), (1.0, 0.0));
    let real = e.realization.as_ref().unwrap();
    let identity_only = delta_bounds::catalog::MatrixRealization {
        basis: real.basis.clone(),
        group: vec![Mat::identity(2, 2)],
    };
    let g = oracle::group_level_delta(&identity_only, &NeighborhoodSpec::ball(3, 1.0), 0.1, 5000, 3).unwrap();
    assert_eq!(g.value, 1.0);
}

#[test]
fn inverting_f_leaves_delta_unchanged() {
    let e = catalog::get("heisenberg3").unwrap();
    let rep = &e.representation;
    let inverted: Vec<GroupElement> = rep
        .group()
        .iter()
        .rev()
        .map(|g| GroupElement::new(format!("{}^-1", g.label), g.matrix.clone().try_inverse().unwrap()))
        .collect();
    let inv_rep = rep.with_group(inverted).unwrap();
    let spec = NeighborhoodSpec::ball(3, 1.0);
    let a = oracle::mc_delta(rep, &spec, 20_000, 5).unwrap();
    let b = oracle::mc_delta(&inv_rep, &spec, 20_000, 5).unwrap();
    assert_eq!(a.hits, b.hits);
}

#[test]
fn enlarging_f_does_not_increase_delta() {
    let small = catalog::get_scaled("sl2_adjoint", 0.3).unwrap();
    let rep = &small.representation;
    let mut group = rep.group().to_vec();
    let extra = catalog::get_scaled("sl2_adjoint", 0.6).unwrap();
    group.extend(extra.representation.group().iter().cloned());
    let big = rep.with_group(group).unwrap();
    let spec = NeighborhoodSpec::ball(3, 1.0);
    let a = oracle::mc_delta(rep, &spec, SAMPLES, 11).unwrap();
    let b = oracle::mc_delta(&big, &spec, SAMPLES, 11).unwrap();
    assert!(b.value <= a.value + 3.0 * a.stderr);
}

#[test]
fn orbit_cap_with_identity_is_a_ball() {
    let e = catalog::get("sl2_adjoint").unwrap();
    let spec = NeighborhoodSpec::orbit_capped(0.5, 2.0, &[Mat::identity(3, 3)]).unwrap();
    let vol = oracle::mc_volume(&spec, 200_000, 1).unwrap();
    let exact = NeighborhoodSpec::ball(3, 0.5).exact_volume().unwrap();
    assert!(vol.within(exact, 4.0), "{vol:?} vs {exact}");
    let est = oracle::orbit_capped_delta(&e.representation, &[Mat::identity(3, 3)], 0.5, 0.4, 20_000, 1).unwrap();
    assert!(est.approximate);
    // Ball(min(r, R)) = Ball(0.4) against the same F as a plain ball.
    let plain = oracle::mc_delta(&e.representation, &NeighborhoodSpec::ball(3, 0.4), 20_000, 1).unwrap();
    assert!((est.estimate.value - plain.value).abs() <= 4.0 * (plain.stderr * 2f64.sqrt()));
}

#[test]
fn orbit_cap_on_diag_tracks_hyperbolic_volume() {
    // H = {diag(a, 1/a)} on a fine grid approximates the hyperbolic region.
    let r = 0.1f64;
    let cap = 1.0f64;
    let orbit: Vec<Mat> = (-400..=400)
        .map(|k| {
            let a = (k as f64 * 0.01).exp();
            Mat::from_row_slice(2, 2, &[a, 0.0, 0.0, 1.0 / a])
        })
        .collect();
    let spec = NeighborhoodSpec::orbit_capped(r, cap, &orbit).unwrap();
    let est = oracle::mc_volume(&spec, 200_000, 2).unwrap();
    // Square of side 2R/√2 inscribed in the cap against the closed form
    // 2ε²(1 + log(2R²/ε²)) with ε = r: the capped region sits between them.
    let side = cap / 2f64.sqrt();
    let inner = 2.0 * r * r * (1.0 + (2.0 * side * side / (r * r)).ln());
    let outer = 2.0 * r * r * (1.0 + (2.0 * cap * cap / (r * r)).ln());
    assert!(est.value > 0.9 * inner && est.value < 1.05 * outer, "{} not in [{inner}, {outer}]", est.value);
}

#[test]
fn sl2_orbit_family_beats_trivial_bound() {
    let e = catalog::get("sl2_adjoint").unwrap();
    let rep = &e.representation;
    let spec = Family::parse("orbitcap:r=0.3,R=1,H=32,hr=1").unwrap().build(rep, 4).unwrap();
    let est = oracle::mc_delta(rep, &spec, 20_000, 4).unwrap();
    let trivial = bounds::trivial_bound(rep, &InnerProduct::Euclidean).unwrap().value;
    assert!(est.value >= trivial - 3.0 * est.stderr, "{est:?} vs {trivial}");
}

#[test]
fn split_chain_tightens_on_heisenberg() {
    let e = catalog::get("heisenberg3").unwrap();
    let rep = &e.representation;
    let fam = Family::parse("split:eps=0.1").unwrap();
    let values: Vec<f64> = [1e-1, 1e-2, 1e-3]
        .iter()
        .map(|&eps| oracle::mc_delta(rep, &fam.with_eps(eps).unwrap().build(rep, 0).unwrap(), 50_000, 9).unwrap().value)
        .collect();
    assert!(values[0] < values[1] && values[1] < values[2], "{values:?}");
}

#[test]
fn user_defined_algebra_flows_through_the_pipeline() {
    let alg = Arc::new(
        delta_bounds::lie::LieAlgebra::from_brackets(&["a", "b"], &[]).unwrap(),
    );
    let action = vec![Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), Mat::zeros(2, 2)];
    let rep = Representation::from_exponentials(
        alg,
        2,
        action,
        &[("a".into(), delta_bounds::linalg::Vector::from_vec(vec![1.0, 0.0]))],
        0.5,
    )
    .unwrap();
    let cert = bounds::bound_representation(&rep, None).unwrap();
    assert_eq!(cert.rule, Rule::SolvableSharp);
}
