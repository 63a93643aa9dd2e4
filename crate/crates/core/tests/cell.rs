use hlab::cell::{flux_correctors, solve_correctors, weak_divergence, CorrectorSet, PeriodicMode};
use hlab::coefficients::CoefficientTensor;
use hlab::solver::SolveOptions;

#[test]
fn rotated_laminate_matches_closed_form() {
    // layers normal to k = (1, 1): Â = c0·I − (c0 − √(c0² − c1²))·k kᵀ/2
    let a = CoefficientTensor::builtin("rotated-laminate", &[2.0, 1.0, 1.0]).unwrap();
    let cs = solve_correctors(&a, 128, &SolveOptions::default()).unwrap();
    let hat = cs.homogenized();
    let d = 2.0 - 3f64.sqrt();
    let exact = [[2.0 - d / 2.0, -d / 2.0], [-d / 2.0, 2.0 - d / 2.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((hat.get(i, j, 0, 0) - exact[i][j]).abs() < 1e-3, "({i},{j}): {}", hat.get(i, j, 0, 0));
        }
    }
    assert!(hat.asymmetry() < 1e-12);
}

#[test]
fn corrector_file_round_trip() {
    let a = CoefficientTensor::builtin("separable", &[2.0, 0.5]).unwrap().with_system(2, 0.2).unwrap();
    let opts = SolveOptions::default();
    let cs = flux_correctors(solve_correctors(&a, 16, &opts).unwrap(), &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cell.hlcs");
    cs.write_to(std::fs::File::create(&path).unwrap()).unwrap();
    let back = CorrectorSet::read_from(std::fs::File::open(&path).unwrap(), &a).unwrap();
    assert_eq!(back.homogenized(), cs.homogenized());
    for j in 0..2 {
        for beta in 0..2 {
            assert_eq!(back.chi(j, beta).values(), cs.chi(j, beta).values());
        }
    }
    let modes = PeriodicMode::family(20);
    assert_eq!(weak_divergence(&back, &modes).unwrap(), weak_divergence(&cs, &modes).unwrap());
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] ^= 0xff;
    assert!(CorrectorSet::read_from(bytes.as_slice(), &a).is_err());
}

#[test]
fn coupled_system_correctors() {
    let a = CoefficientTensor::builtin("laminate", &[2.0, 1.0]).unwrap().with_system(2, 0.5).unwrap();
    let cs = solve_correctors(&a, 64, &SolveOptions::default()).unwrap();
    let hat = cs.homogenized();
    assert!(hat.asymmetry() < 1e-10);
    let (lo, hi) = hat.form_bounds();
    let (alo, ahi) = a.form_range();
    assert!(lo >= alo - 1e-9 && hi <= ahi + 1e-9);
}
