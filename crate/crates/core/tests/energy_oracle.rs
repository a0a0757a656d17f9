//! Discrete energy against an independent evaluation with compensated summation.

use aronsson::coefficients::{CoefficientField, CoefficientPreset};
use aronsson::grid::{Grid2D, ScalarField};
use aronsson::mat::Sym2;
use aronsson::solver;
use twofloat::TwoFloat;

/// Bilinear gradients on each cell, bilinear `A`, 2×2 Gauss rule, double-double accumulation.
fn reference_energy(u: &ScalarField, a: &CoefficientField, eps: f64) -> f64 {
    let g = *u.grid();
    let h = g.h();
    let d = 0.5 / 3f64.sqrt();
    let nodes = [0.5 - d, 0.5 + d];
    let mut total = TwoFloat::from(0.0);
    for cj in 0..g.ny() - 1 {
        for ci in 0..g.nx() - 1 {
            let u00 = u.get(ci, cj);
            let u10 = u.get(ci + 1, cj);
            let u01 = u.get(ci, cj + 1);
            let u11 = u.get(ci + 1, cj + 1);
            let (a00, a10, a01, a11) = (
                a.at(ci, cj),
                a.at(ci + 1, cj),
                a.at(ci, cj + 1),
                a.at(ci + 1, cj + 1),
            );
            for &s in &nodes {
                for &t in &nodes {
                    let ux = ((u10 - u00) * (1.0 - t) + (u11 - u01) * t) / h;
                    let uy = ((u01 - u00) * (1.0 - s) + (u11 - u10) * s) / h;
                    let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t];
                    let entry = |f: fn(&Sym2) -> f64| {
                        w[0] * f(&a00) + w[1] * f(&a10) + w[2] * f(&a01) + w[3] * f(&a11)
                    };
                    let (m11, m12, m22) = (entry(|m| m.a11), entry(|m| m.a12), entry(|m| m.a22));
                    let hq = m11 * ux * ux + 2.0 * m12 * ux * uy + m22 * uy * uy;
                    total += TwoFloat::from(0.25 * h * h * (hq / eps).exp());
                }
            }
        }
    }
    f64::from(total)
}

fn wavy(grid: Grid2D, k: f64) -> ScalarField {
    ScalarField::from_fn(grid, |p| {
        (k * p[0]).sin() * (0.7 * k * p[1]).cos() + 0.3 * p[0] * p[1]
    })
    .unwrap()
}

#[test]
fn energy_matches_compensated_reference() {
    for (n, lambda, eps, k) in [
        (17, 0.0, 1.0, 1.0),
        (33, 0.3, 0.5, 2.0),
        (33, 0.1, 0.2, 1.5),
        (65, 0.2, 0.4, 2.5),
    ] {
        let grid = Grid2D::from_bounds(0.0, 1.0, 0.0, 1.0, n).unwrap();
        let a = if lambda == 0.0 {
            CoefficientField::identity(grid).unwrap()
        } else {
            CoefficientPreset::Smooth { lambda }.build(grid).unwrap()
        };
        let u = wavy(grid, k);
        let got = solver::energy(&u, &a, eps).unwrap().value();
        let want = reference_energy(&u, &a, eps);
        assert!(
            ((got - want) / want).abs() <= 1e-12,
            "n={n} eps={eps}: {got} vs {want}"
        );
    }
}

#[test]
fn stabilized_form_survives_overflow() {
    let grid = Grid2D::from_bounds(0.0, 1.0, 0.0, 1.0, 17).unwrap();
    let a = CoefficientField::identity(grid).unwrap();
    let u = wavy(grid, 2.0);
    let small = solver::energy(&u, &a, 1e-4).unwrap();
    assert!(small.value().is_infinite());
    assert!(small.ln().is_finite());
    // ln E(ε) · ε tends to max H as ε → 0
    let big = solver::energy(&u, &a, 1.0).unwrap();
    assert!(small.scale * 1e-4 <= big.scale + 1e-9);
}
