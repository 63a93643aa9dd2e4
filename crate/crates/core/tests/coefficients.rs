use hlab::coefficients::{CoefficientTensor, CATALOG, DIM};
use proptest::prelude::*;

fn builtin(name: &str) -> CoefficientTensor {
    let params: &[f64] = if name == "constant" { &[1.5] } else { &[2.0, 1.0] };
    CoefficientTensor::builtin(name, params).unwrap()
}

fn dyadic() -> impl Strategy<Value = [f64; 2]> {
    (0u32..1024, 0u32..1024).prop_map(|(a, b)| [a as f64 / 1024.0, b as f64 / 1024.0])
}

proptest! {
    #[test]
    fn integer_shifts_leave_values_unchanged(y in dyadic(), zx in -2i32..=2, zy in -2i32..=2, idx in 0usize..CATALOG.len()) {
        let a = builtin(CATALOG[idx]);
        let shifted = [y[0] + zx as f64, y[1] + zy as f64];
        prop_assert_eq!(a.evaluate(y), a.evaluate(shifted));
    }

    #[test]
    fn symmetric_builtins_are_symmetric(y0 in 0.0f64..1.0, y1 in 0.0f64..1.0, idx in 0usize..CATALOG.len()) {
        let a = builtin(CATALOG[idx]).with_system(2, 0.3).unwrap();
        prop_assert!(a.is_symmetric());
        let v = a.evaluate([y0, y1]);
        prop_assert!(v.asymmetry() == 0.0);
    }

    #[test]
    fn quadratic_form_within_declared_bounds(y0 in 0.0f64..1.0, y1 in 0.0f64..1.0, xi in prop::array::uniform4(-1.0f64..1.0)) {
        for name in CATALOG {
            let a = builtin(name).with_system(2, 0.25).unwrap();
            let (lo, hi) = a.form_range();
            let v = a.evaluate([y0, y1]);
            let mut q = 0.0;
            let mut n2 = 0.0;
            for i in 0..DIM {
                for alpha in 0..2 {
                    n2 += xi[alpha * 2 + i] * xi[alpha * 2 + i];
                    for j in 0..DIM {
                        for beta in 0..2 {
                            q += v.get(i, j, alpha, beta) * xi[alpha * 2 + i] * xi[beta * 2 + j];
                        }
                    }
                }
            }
            prop_assert!(q >= lo * n2 - 1e-12 && q <= hi * n2 + 1e-12, "{name}: {q} vs [{lo}, {hi}]·{n2}");
        }
    }
}

#[test]
fn sampled_ellipticity_covers_declared_mu() {
    for name in CATALOG {
        let a = builtin(name);
        let report = a.estimate_ellipticity(4096).unwrap();
        assert!(report.lower >= 0.99 * a.form_range().0, "{name}: {report:?}");
        assert!(report.violation.is_none());
    }
}

#[test]
fn laminate_and_separable_extrema() {
    for name in ["laminate", "separable"] {
        let r = builtin(name).estimate_ellipticity(4096).unwrap();
        assert!((r.lower - 1.0).abs() <= 1e-2 && (r.upper - 3.0).abs() <= 1e-2, "{name}: {r:?}");
    }
    let lam = builtin("laminate");
    assert_eq!(lam.evaluate([0.25, 0.9]).get(0, 0, 0, 0), 3.0);
    assert_eq!(lam.evaluate([1.25, 0.0]), lam.evaluate([0.25, 0.0]));
}

#[test]
fn adjoint_is_an_involution() {
    for name in CATALOG {
        let a = builtin(name).with_system(2, 0.2).unwrap();
        let back = a.adjoint().adjoint();
        for k in 0..10 {
            let y = [0.1 * k as f64, 0.37 * k as f64];
            assert_eq!(back.evaluate(y), a.evaluate(y));
        }
    }
}
