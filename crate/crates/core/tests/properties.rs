use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;
use pwlab::ensemble::{sample_initial, subquantum_entropy, total_variation, DensitySpec, Histogram, Partition};
use pwlab::ergodic::TorusFlow;
use pwlab::fields::{
    measure_of_region, polar_decompose, quantum_potential, wrap_periodic, ComplexField, GridSpec, Position, Region,
    Spectral,
};
use pwlab::guidance::{build_divergence_free, velocity_from_psi};

const L: f64 = 10.0;

fn line() -> GridSpec {
    GridSpec::new(&[128], &[L]).unwrap()
}

/// Nodeless field: offset plus a few random Fourier modes.
fn smooth_field(grid: &GridSpec, modes: &[(f64, f64)]) -> ComplexField {
    let lengths = grid.lengths().to_vec();
    ComplexField::from_fn(grid, |x| {
        let mut z = Complex64::new(2.0, 0.0);
        for (m, &(re, im)) in modes.iter().enumerate() {
            let k = 2.0 * PI * (m + 1) as f64;
            let arg: f64 = (0..lengths.len()).map(|d| k * x[d] / lengths[d] * (d + 1) as f64).sum();
            z += Complex64::new(re, im) * Complex64::from_polar(1.0, arg);
        }
        z
    })
}

fn modes() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.4..0.4f64, -0.4..0.4f64), 1..4)
}

fn masses(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n).prop_map(|v| {
        let s: f64 = v.iter().sum::<f64>() + 1e-9;
        v.iter().map(|x| (x + 1e-9 / v.len() as f64) / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn polar_round_trip(m in modes()) {
        let psi = smooth_field(&line(), &m);
        let back = polar_decompose(&psi).unwrap().recompose();
        prop_assert!(psi.sup_distance(&back).unwrap() < 1e-12 * psi.max_abs());
    }

    #[test]
    fn region_measure_is_additive_and_monotone(m in modes(), a in 0.0..3.0f64, w1 in 0.1..3.0f64, w2 in 0.1..3.0f64) {
        let grid = line();
        let psi = smooth_field(&grid, &m).normalize().unwrap();
        let b = a + w1;
        let c = b + w2;
        let mu = |lo: f64, hi: f64| measure_of_region(&psi, &Region::on_grid(&[(lo, hi)], &grid).unwrap()).unwrap();
        let (ab, bc, ac) = (mu(a, b), mu(b, c), mu(a, c));
        prop_assert!((ab + bc - ac).abs() < 1e-12);
        prop_assert!(ab <= ac + 1e-15 && ac <= 1.0 + 1e-12);
    }

    #[test]
    fn quantum_potential_ignores_scale(m in modes(), r in 0.01..100.0f64, theta in -PI..PI) {
        let psi = smooth_field(&line(), &m);
        let q1 = quantum_potential(&psi).unwrap();
        let q2 = quantum_potential(&psi.scale(Complex64::from_polar(r, theta))).unwrap();
        for ((a, b), d) in q1.values.iter().zip(&q2.values).zip(&q1.defined) {
            if *d {
                prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn laplacian_of_plane_wave(m in -20i64..20) {
        let grid = line();
        let k = 2.0 * PI * m as f64 / L;
        let psi = ComplexField::from_fn(&grid, |x| Complex64::from_polar(1.0, k * x[0]));
        let lap = Spectral::new(&grid).laplacian(psi.values());
        for (l, z) in lap.iter().zip(psi.values()) {
            prop_assert!((l + z * k * k).norm() < 1e-9 * (1.0 + k * k));
        }
    }

    #[test]
    fn entropy_is_never_positive(p in masses(16), q in masses(16)) {
        let grid = GridSpec::new(&[64], &[L]).unwrap();
        let part = Partition::new(&grid, &[4]).unwrap();
        let s = subquantum_entropy(&Histogram::from_masses(&part, p).unwrap(), &Histogram::from_masses(&part, q).unwrap()).unwrap();
        prop_assert!(s.value() <= 1e-12);
    }

    #[test]
    fn total_variation_is_a_symmetric_distance(p in masses(8), q in masses(8)) {
        let grid = GridSpec::new(&[32], &[L]).unwrap();
        let part = Partition::new(&grid, &[4]).unwrap();
        let hp = Histogram::from_masses(&part, p).unwrap();
        let hq = Histogram::from_masses(&part, q).unwrap();
        let ab = total_variation(&hp, &hq).unwrap();
        prop_assert_eq!(ab, total_variation(&hq, &hp).unwrap());
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert_eq!(total_variation(&hp, &hp).unwrap(), 0.0);
    }

    #[test]
    fn velocity_matches_phase_gradient(k in -3.0..3.0f64, a in -0.5..0.5f64, amp in 0.0..0.5f64) {
        let grid = line();
        let kk = 2.0 * PI * (k * L / (2.0 * PI)).round() / L;
        let q = 2.0 * PI / L;
        let psi = ComplexField::from_fn(&grid, |x| {
            let r = 1.0 + amp * (q * x[0]).cos();
            Complex64::from_polar(r, kk * x[0] + a * (q * x[0]).sin())
        });
        let v = velocity_from_psi(&psi);
        for j in 0..grid.len() {
            let x = grid.coord(0, j);
            let expected = kk + a * q * (q * x).cos();
            prop_assert!((v.component(0)[j] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_prefix_stable(seed in any::<u64>(), n in 1usize..200, extra in 0usize..50) {
        let grid = GridSpec::new(&[64], &[L]).unwrap();
        let psi = smooth_field(&grid, &[(0.3, -0.2)]);
        let spec = DensitySpec::Equilibrium(psi);
        let a = sample_initial(&spec, &grid, n, seed).unwrap();
        let b = sample_initial(&spec, &grid, n, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let longer = sample_initial(&spec, &grid, n + extra, seed).unwrap();
        prop_assert_eq!(&a.points[..], &longer.points[..n]);
        prop_assert!(a.points.iter().all(|x| (0.0..L).contains(&x[0])));
    }

    #[test]
    fn torus_flow_is_a_group(x0 in 0.0..1.0f64, y0 in 0.0..1.3f64, t1 in 0.0..50.0f64, t2 in 0.0..50.0f64, n in 1i64..4) {
        let flow = TorusFlow::unit(&[n, 1], &[1.0, 1.3]);
        let start: Position = [x0, y0, 0.0];
        let two = flow.position(&flow.position(&start, t1), t2);
        let one = flow.position(&start, t1 + t2);
        for (d, l) in [1.0, 1.3].into_iter().enumerate() {
            let diff = (two[d] - one[d]).rem_euclid(l);
            prop_assert!(diff.min(l - diff) < 1e-9);
        }
    }

    #[test]
    fn wrap_lands_in_the_period(x in -1e6..1e6f64, l in 1e-3..1e3f64) {
        let w = wrap_periodic(x, l);
        prop_assert!((0.0..l).contains(&w));
        let k = ((x - w) / l).round();
        prop_assert!((x - w - k * l).abs() < 1e-9 * (1.0 + x.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn modified_flux_is_divergence_free(m in modes(), c in prop::collection::vec(-1.0..1.0f64, 4), eps in 0.1..2.0f64) {
        let grid = GridSpec::new(&[32, 32], &[8.0, 8.0]).unwrap();
        let psi = smooth_field(&grid, &m).normalize().unwrap();
        let q = 2.0 * PI / 8.0;
        let chi: Vec<f64> = (0..grid.len())
            .map(|j| {
                let x = grid.node_position(j);
                c[0] * (q * x[0]).sin() + c[1] * (q * x[1]).cos() + c[2] * (q * (x[0] + x[1])).sin() + c[3] * (2.0 * q * x[0]).cos()
            })
            .collect();
        let g = build_divergence_free(&psi, &chi, eps).unwrap();
        let residual = g.divergence_residual(&Spectral::new(&grid), &psi).unwrap();
        prop_assert!(residual < 1e-9, "residual {}", residual);
    }
}

#[test]
fn real_field_has_no_velocity() {
    let grid = line();
    let psi = ComplexField::from_fn(&grid, |x| Complex64::new(1.5 + (2.0 * PI * x[0] / L).cos(), 0.0));
    let v = velocity_from_psi(&psi);
    for &u in v.component(0) {
        assert_abs_diff_eq!(u, 0.0, epsilon = 1e-12);
    }
}
