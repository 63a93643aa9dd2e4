use hlab::mesh::{DomainMesh, Shape};
use hlab::solver::DiscreteField;
use hlab::verify::{
    boundary_trace_in_cone, fit_rate, holder_seminorm, nontangential_max, norm, run_experiment, Config, ExperimentKind, NormInput,
    NormKind, Profile, REPORT_SCHEMA,
};
use proptest::prelude::*;

fn disk() -> DomainMesh {
    DomainMesh::new(Shape::Disk, 96).unwrap()
}

fn wave(mesh: &DomainMesh, c: f64) -> DiscreteField {
    DiscreteField::from_fn(mesh, mesh.nodes(), 2, |p| [c * (3.0 * p[0]).sin() * p[1], c * (p[0] - p[1] * p[1])])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn norms_are_absolutely_homogeneous(c in -5.0f64..5.0, p in 1.0f64..6.0) {
        let mesh = disk();
        let (u, cu) = (wave(&mesh, 1.0), wave(&mesh, c));
        for kind in [NormKind::Lp(p), NormKind::W1p(p), NormKind::GradientLp(p), NormKind::SupGradient, NormKind::LpBoundary(p)] {
            let a = norm(NormInput::Field { mesh: &mesh, field: &u }, kind).unwrap();
            let b = norm(NormInput::Field { mesh: &mesh, field: &cu }, kind).unwrap();
            prop_assert!((b - c.abs() * a).abs() <= 1e-10 * (1.0 + b), "{kind:?}: {b} vs {}", c.abs() * a);
        }
    }

    #[test]
    fn fit_recovers_exact_power_laws(slope in -3.0f64..3.0, scale in 0.01f64..100.0) {
        let points: Vec<(f64, f64)> = [0.5, 0.25, 0.125, 0.0625].iter().map(|&e: &f64| (e, scale * e.powf(slope))).collect();
        let (s, r) = fit_rate(&points).unwrap();
        prop_assert!((s - slope).abs() <= 1e-10);
        prop_assert!(r <= 1e-10);
    }
}

#[test]
fn ntmf_dominates_the_boundary_trace() {
    let mesh = disk();
    let u = wave(&mesh, 1.0);
    let grad = u.gradient(&mesh).unwrap();
    for c0 in [1.5, 2.0, 4.0] {
        let ntmf = nontangential_max(&mesh, grad, c0).unwrap();
        let mut seen = 0;
        for k in 0..ntmf.values.len() {
            if let Some(trace) = boundary_trace_in_cone(&mesh, grad, c0, k) {
                assert!(ntmf.values[k] >= trace);
                seen += 1;
            }
        }
        assert!(seen > 0);
    }
    assert!(nontangential_max(&mesh, grad, 1.0).is_err());
}

#[test]
fn holder_seminorm_is_seed_deterministic() {
    let mesh = disk();
    let u = wave(&mesh, 1.0);
    let a = holder_seminorm(&mesh, &u, 0.5, 400, 3).unwrap();
    assert_eq!(a, holder_seminorm(&mesh, &u, 0.5, 400, 3).unwrap());
    assert!(holder_seminorm(&mesh, &u, 0.5, 800, 3).unwrap() >= a);
    assert!(holder_seminorm(&mesh, &u, 0.5, 3, 3).is_err());
}

#[test]
fn homogenize_laminate_report() {
    let config = Config::parse("experiment.kind = homogenize\ncoeff.name = laminate\ncell.n = 64\n").unwrap();
    let report = run_experiment(&config, Profile::Fast, None).unwrap();
    assert_eq!(report.schema, REPORT_SCHEMA);
    assert_eq!(report.records.len(), 3);
    assert!(report.passed(), "{:?}", report.checks);
    let hat = report.homogenized.as_ref().unwrap();
    // harmonic mean across the layers, arithmetic mean along them
    assert!((hat[0] - 3f64.sqrt()).abs() < 1e-3 && (hat[3] - 2.0).abs() < 1e-3);
}

#[test]
fn two_scale_with_constant_coefficients_has_no_rate() {
    let config = Config::parse(
        "experiment.kind = two-scale\ncoeff.name = constant\nsweep.eps = 1/4, 1/8, 1/16\nsolver.hrule = 6\ncell.n = 16\n",
    )
    .unwrap();
    let report = run_experiment(&config, Profile::Fast, None).unwrap();
    assert!(report.column("l2_difference").iter().all(|v| *v <= 1e-9));
    let fit = &report.fits[0];
    assert!(fit.slope.is_none() && fit.note.is_some());
    assert!(report.check("l2_difference_slope").is_none());
}

#[test]
fn lipschitz_report_files_are_deterministic() {
    let text = "experiment.kind = lipschitz-sweep\nsweep.eps = 1/4, 1/8, 1/16\nsolver.hrule = 6\ncell.n = 64\nholder.samples = 300\n";
    let config = Config::parse(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&config, Profile::Fast, Some(dir.path())).unwrap();
    assert_eq!(report.experiment, ExperimentKind::LipschitzSweep);
    assert_eq!(report.records.len(), 3);
    assert!(report.records.windows(2).all(|w| w[0].eps > w[1].eps));
    let csv = std::fs::read_to_string(dir.path().join("lipschitz-sweep.csv")).unwrap();
    assert!(csv.starts_with("eps,h,sup_gradient,holder_seminorm,iterations,status"));
    assert_eq!(csv.lines().count(), 4);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("lipschitz-sweep.json")).unwrap()).unwrap();
    assert_eq!(json["schema"], "hlab-report/1");
    assert_eq!(json["experiment"], "lipschitz-sweep");
    let again = run_experiment(&config, Profile::Fast, None).unwrap();
    let mut buf = Vec::new();
    again.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), csv);
}
