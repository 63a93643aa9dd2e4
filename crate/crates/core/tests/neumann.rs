use hlab::cell::solve_correctors;
use hlab::coefficients::CoefficientTensor;
use hlab::mesh::{DomainMesh, Shape};
use hlab::neumann::{solve_homogenized, two_scale_remainder, BoundarySpec, DataSpec, NeumannOperator};
use hlab::solver::SolveOptions;
use hlab::verify::{run_experiment, Config, Profile};

#[test]
fn two_scale_of_homogenized_solution_against_itself_vanishes() {
    let a = CoefficientTensor::builtin("constant", &[1.7]).unwrap();
    let cs = solve_correctors(&a, 16, &SolveOptions::default()).unwrap();
    let mesh = DomainMesh::new(Shape::Flower, 96).unwrap();
    let data = DataSpec { g: BoundarySpec::Sin3Theta, ..Default::default() }.build(&mesh, 1);
    let u0 = solve_homogenized(cs.homogenized(), &mesh, &data, SolveOptions::default()).unwrap().field;
    for eps in [0.5, 0.1, 0.013] {
        let ts = two_scale_remainder(&mesh, &u0, &u0, &cs, eps).unwrap();
        assert_eq!(ts.remainder.max_abs(), 0.0);
    }
}

#[test]
fn energy_ratio_is_stable_across_eps() {
    let config = Config::parse(
        "experiment.kind = ntmf-sweep\nsweep.eps = 1/4, 1/8, 1/16\nsolver.hrule = 6\ncell.n = 64\ndata.g = gaussian-bump\n",
    )
    .unwrap();
    let report = run_experiment(&config, Profile::Fast, None).unwrap();
    let ratios = report.column("gradient_l2_ratio");
    assert_eq!(ratios.len(), 3);
    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max / min <= 2.0, "{ratios:?}");
}

#[test]
fn unresolved_eps_is_rejected() {
    let a = CoefficientTensor::builtin("laminate", &[2.0, 1.0]).unwrap();
    let mesh = DomainMesh::new(Shape::Disk, 32).unwrap();
    assert!(NeumannOperator::eps(&a, 0.05, &mesh, SolveOptions::default()).is_err());
}
