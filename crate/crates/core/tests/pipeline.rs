mod common;

use cmi_core::pipeline::{self, sample_surface, to_csv, to_obj};
use common::*;
use std::f64::consts::PI;

fn parse(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn fixed_disk_report_passes_its_own_checks() {
    let (imm, report) = pipeline::run(&config(FIXED_DISK)).unwrap();
    assert_eq!(report.theorem, "fixed_components");
    assert!(report.checks().unwrap().iter().all(|c| c.1), "{:?}", report.checks());
    assert_eq!(report.identity_method.as_deref(), Some("primitive"));
    assert!(grid_nullity(&imm.data, 48) <= 1e-10);
    // every stage moves the pair by at most its epsilon on the previous disk
    for b in &report.stage_distance_bounds {
        assert!(parse(&b.drift) <= parse(&b.epsilon), "{b:?}");
    }
}

#[test]
fn jet_order_is_reported_as_achieved() {
    let json = FIXED_DISK.replace(r#""value":[1,2,1]"#, r#""value":[1,2,1],"jet_order":1"#);
    let (_, report) = pipeline::run(&config(&json)).unwrap();
    let jet = &report.jet_orders_achieved[0];
    assert_eq!(jet.configured, 1);
    assert!(jet.achieved >= 1);
}

#[test]
fn laurent_component_carries_its_flux() {
    // h3 = 1 + 0.05/(z - 1.5): Im∮ h3 = 0.1π and X3(0.5) = 1 + 0.1 ln(2/3)
    let json = r#"{"schema_version":1,"domain":{"outer":{"center":[0,0],"radius":3},"holes":[{"center":[1.5,0],"radius":0.3}]},"dimension":3,
 "lambda":[{"point":[0.5,0],"value":[1,2,0.9594534891891835]}],"flux":[[0.2,0.1,0.3141592653589793]],"components":["1 + 0.05(z-1.5)^-1"],"stages":2}"#;
    let (imm, report) = pipeline::run(&config(json)).unwrap();
    assert!(report.checks().unwrap().iter().all(|c| c.1), "{:?}", report.checks());
    let hole = imm.data.domain.holes[0];
    let per = circle_integral(hole.center, hole.radius + 0.2, 1024, |z| imm.data.eval(z));
    for (p, want) in per.iter().zip([0.2, 0.1, 0.1 * PI]) {
        assert!((p.im - want).abs() <= 1e-8 && p.re.abs() <= 1e-8, "{per:?}");
    }
    let x = value_at(&imm, c(0.5, 0.0));
    assert!(max_diff(&x, &[1.0, 2.0, 0.9594534891891835]) <= 1e-6, "{x:?}");
}

#[test]
fn incompatible_flux_is_rejected_before_solving() {
    let json = FIXED_HOLE.replace("[[0.5,-0.25,0]]", "[[0.5,-0.25,0.3]]");
    let e = pipeline::run(&config(&json)).unwrap_err();
    assert_eq!(e.code(), "CONFIG_INVALID");
    assert!(e.to_string().contains("flux of coordinate 3"), "{e}");
}

#[test]
fn value_fixed_by_the_prescription_is_checked() {
    let json = FIXED_DISK.replace(r#""value":[1,2,1]"#, r#""value":[1,2,0]"#);
    assert_eq!(pipeline::run(&config(&json)).unwrap_err().code(), "CONFIG_INVALID");
}

#[test]
fn vanishing_h_is_rejected() {
    let json = r#"{"schema_version":1,"domain":{"outer":{"center":[0,0],"radius":3}},"dimension":4,
 "lambda":[],"components":["1","i"],"stages":1}"#;
    assert_eq!(pipeline::run(&config(json)).unwrap_err().code(), "H_IDENTICALLY_ZERO");
}

#[test]
fn two_values_eta_has_no_zeros() {
    let (imm, report) = pipeline::run(&config(TWO_VALUES)).unwrap();
    assert!(parse(report.eta_zero_count.as_deref().unwrap()).abs() < 0.5);
    // argument principle for f1 - i f2 along the outer circle
    let d = &imm.data.domain;
    let n = 4096;
    let mut turn = 0.0;
    let eta = |k: usize| {
        let z = d.outer.center + cmi_core::Point::from_polar(d.outer.radius, 2.0 * PI * k as f64 / n as f64);
        let v = imm.data.eval(z);
        v[0] - c(0.0, 1.0) * v[1]
    };
    for k in 0..n {
        turn += (eta(k + 1) / eta(k)).arg();
    }
    assert!((turn / (2.0 * PI)).abs() < 0.5, "{turn}");
}

#[test]
fn gauss_avoiding_margins_match_their_closed_form() {
    for json in [AUTO_FOUR, AUTO_THREE] {
        let (_, report, planes) = pipeline::run_theorem_gauss_avoiding(&config(json)).unwrap();
        assert_eq!(report.hyperplane_margins.len(), planes.linear_forms.len());
        assert!(parse(report.margin_identity_error.as_deref().unwrap()) <= 1e-10);
        assert!(report.checks().unwrap().iter().all(|c| c.1), "{:?}", report.checks());
    }
}

#[test]
fn five_dimensional_run_avoids_five_planes() {
    let json = r#"{"schema_version":1,"domain":{"outer":{"center":[0,0],"radius":3}},"dimension":5,
 "lambda":[{"point":[0.5,0],"value":[1,2,0.5,-1,0.3]}],"components":"auto","stages":2}"#;
    let (imm, report, planes) = pipeline::run_theorem_gauss_avoiding(&config(json)).unwrap();
    assert_eq!(planes.linear_forms.len(), 5);
    assert!(planes.in_general_position());
    assert_eq!(report.rank, 5);
    assert!(report.checks().unwrap().iter().all(|c| c.1), "{:?}", report.checks());
    assert!(max_diff(&value_at(&imm, c(0.5, 0.0)), &[1.0, 2.0, 0.5, -1.0, 0.3]) <= 1e-6);
}

#[test]
fn exports_cover_the_final_disk() {
    let (imm, _) = pipeline::run(&config(FIXED_DISK)).unwrap();
    let s = sample_surface(&imm, 16).unwrap();
    let obj = to_obj(&s);
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), s.points.len());
    // mesh values agree with direct integration from the base point
    let k = s.points.len() / 2;
    assert!(max_diff(&s.values[k], &value_at(&imm, s.points[k])) <= 1e-8);
    let csv = to_csv(&imm, 8).unwrap();
    assert!(csv.starts_with("re,im,X1,X2,X3,G1,G2,G3\n"));
    assert_eq!(csv.lines().count() - 1, interior_grid(&imm.data.domain, 8).len());
}
