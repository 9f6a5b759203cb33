use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use thinlayer::confinement::{helical_profile, ConfinementProfile, HelicalSpec, TransverseWell};
use thinlayer::geometry::{DomainBox, SurfaceChart};
use thinlayer::operator::{
    assemble_2d, assemble_closed_segment, assemble_coupled_channel, fourier_couplings, lead_modes, AxisBoundary,
    ChannelBasis, GridParams, SurfaceGrid,
};
use thinlayer::Error;

fn helix(epsilon: f64, omega: f64, kappa: f64, ditches: u32) -> ConfinementProfile {
    helical_profile(&HelicalSpec {
        epsilon,
        omega,
        kappa,
        radius: 1.0,
        ditch_count: Some(ditches),
        round_harmonic: false,
    })
    .unwrap()
}

/// Adaptive Simpson quadrature of a complex integrand.
fn simpson(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    fn step(
        f: &dyn Fn(f64) -> Complex64,
        a: f64,
        b: f64,
        fa: Complex64,
        fm: Complex64,
        fb: Complex64,
        whole: Complex64,
        tol: f64,
        depth: u32,
    ) -> Complex64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.norm() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[test]
fn fft_couplings_match_quadrature() {
    // smooth, non-separable profile with harmonics up to 3
    let c = [0.3, -0.2, 0.15, 0.1];
    let eps = 0.12;
    let norm: f64 = c.iter().map(|x: &f64| x.abs()).sum::<f64>() + 0.2;
    let s = move |t: f64, z: f64| {
        1.0 - eps / norm
            * (c[0] * (t - 0.7 * z).cos()
                + c[1] * (2.0 * t + 0.4 * z).sin()
                + c[2] * (3.0 * t).cos() * (0.3 * z).cos()
                + c[3] * (t + 1.1).sin()
                + 0.2 * (0.5 * z).cos())
    };
    let profile = ConfinementProfile::custom(eps, 3, Arc::new(s)).unwrap();
    let e0 = 55.0;
    let well = TransverseWell::GroundEnergy(e0);
    let basis = ChannelBasis::new(4, 1.0).unwrap();
    for z in [0.0, 0.83, 2.4] {
        let v = fourier_couplings(&profile, &well, &basis, z, None).unwrap();
        for (i, l) in basis.modes().enumerate() {
            for (j, lp) in basis.modes().enumerate() {
                let f = |t: f64| Complex64::from_polar((s(t, z) - 1.0) * e0, -((l - lp) as f64) * t) / (2.0 * PI);
                let exact = simpson(&f, 0.0, 2.0 * PI, 1e-13);
                assert!((v[(i, j)] - exact).norm() <= 1e-10, "({l},{lp}) at z={z}: {} vs {exact}", v[(i, j)]);
            }
        }
    }
}

#[test]
fn helical_couplings_have_closed_form_entries() {
    let basis = ChannelBasis::new(5, 1.0).unwrap();
    let well = TransverseWell::GroundEnergy(70.0);
    for ditches in [1, 2] {
        let v = fourier_couplings(&helix(0.1, 8.0, 1.0, ditches), &well, &basis, 0.3, None).unwrap();
        for (i, l) in basis.modes().enumerate() {
            for (j, lp) in basis.modes().enumerate() {
                let d = (l - lp).unsigned_abs();
                let x = v[(i, j)];
                if d == 0 {
                    assert!((x.re + 3.5).abs() < 1e-12 && x.im == 0.0);
                } else if d == ditches {
                    assert!((x.norm() - 1.75).abs() < 1e-12);
                    let phase = Complex64::from_polar(1.0, -((l - lp).signum() as f64) * 8.0 * 0.3);
                    assert!((x + 1.75 * phase).norm() < 1e-12, "{x} at ({l},{lp})");
                } else {
                    assert!(x.norm() < 1e-13);
                }
            }
        }
    }
    let zero = fourier_couplings(&ConfinementProfile::homogeneous(), &well, &basis, 1.0, None).unwrap();
    assert!(zero.iter().all(|x| *x == Complex64::new(0.0, 0.0)));
}

#[test]
fn homogeneous_operator_is_block_diagonal() {
    let basis = ChannelBasis::new(1, 1.0).unwrap();
    let op = assemble_coupled_channel(&ConfinementProfile::homogeneous(), &TransverseWell::default(), &basis, &GridParams::default()).unwrap();
    let kinetic = 2.0 / (op.dz() * op.dz());
    for n in 0..op.slices() {
        let h = op.onsite(n);
        for (i, l) in basis.modes().enumerate() {
            for j in 0..basis.len() {
                let expected = if i == j { kinetic + (l * l) as f64 - 0.25 } else { 0.0 };
                assert_eq!(h[(i, j)], Complex64::new(expected, 0.0));
            }
        }
    }
    assert_eq!(op.coupling_bandwidth(), 0);
    assert_eq!(op.hopping(), -1.0 / (op.dz() * op.dz()));
}

#[test]
fn bandwidth_equals_ditch_count_and_leads_are_clean() {
    for ditches in [1, 2] {
        let basis = ChannelBasis::new(ditches + 4, 1.0).unwrap();
        let op = assemble_coupled_channel(&helix(0.1, 8.0, 1.0, ditches), &TransverseWell::default(), &basis, &GridParams::default())
            .unwrap();
        assert_eq!(op.coupling_bandwidth(), ditches as usize);
        let grid = op.grid();
        let outside: Vec<usize> = (0..op.slices()).filter(|&n| grid.window.weight(grid.z(n)) == 0.0).collect();
        assert!(!outside.is_empty());
        let reference = op.onsite(outside[0]);
        for &n in &outside {
            let h = op.onsite(n);
            assert_eq!(h, reference);
            for i in 0..basis.len() {
                for j in 0..basis.len() {
                    if i != j {
                        assert_eq!(h[(i, j)], Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
        // diagonal inside the window: kinetic + l^2 + V_g - eps E_0 w(z) / 2
        let kinetic = 2.0 / (op.dz() * op.dz());
        for n in (0..op.slices()).step_by(17) {
            let w = grid.window.weight(grid.z(n));
            for (i, l) in basis.modes().enumerate() {
                let expected = kinetic + (l * l) as f64 - 0.25 - 3.5 * w;
                assert!((op.onsite(n)[(i, i)].re - expected).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn coarse_grid_names_the_required_step() {
    let basis = ChannelBasis::new(6, 1.0).unwrap();
    let params = GridParams {
        dz: Some(0.1),
        ..GridParams::default()
    };
    let err = assemble_coupled_channel(&helix(0.1, 8.0, 1.0, 2), &TransverseWell::default(), &basis, &params).unwrap_err();
    assert!(matches!(err, Error::Resolution { .. }));
    assert!(err.to_string().contains("dz <="), "{err}");
}

#[test]
fn lattice_leads_track_the_continuum() {
    let basis = ChannelBasis::new(2, 1.0).unwrap();
    let dz = 0.04;
    for e in [0.3, 1.5, 4.4, 20.0] {
        let leads = lead_modes(e, &basis, true, -0.25, dz);
        for (_, m) in leads.open_modes() {
            let kc = m.continuum_k(e);
            if kc * dz <= 0.2 {
                assert!((m.k - kc).abs() / kc < 5e-3, "l = {} E = {e}: {} vs {kc}", m.l, m.k);
            }
        }
    }
}

fn segment_profile() -> (ConfinementProfile, TransverseWell) {
    (helix(0.05, 8.0, 0.5, 2), TransverseWell::GroundEnergy(20.0))
}

#[test]
fn closed_segment_matches_real_space_grid() {
    let (profile, well) = segment_profile();
    let length = 2.0;
    let intervals = 160;
    let seg = assemble_closed_segment(&profile, &well, &ChannelBasis::new(10, 1.0).unwrap(), length, intervals, true).unwrap();
    let coupled = seg.eigenvalues(10).unwrap();
    let chart = SurfaceChart::cylinder(1.0)
        .unwrap()
        .with_domain(DomainBox::new([0.0, 0.0], [2.0 * PI, length], [true, false]).unwrap());
    // same z nodes: a Dirichlet axis with n nodes has n + 1 intervals
    let grid = SurfaceGrid::new(96, intervals - 1);
    let real = assemble_2d(&chart, &profile, &well, &grid).unwrap().eigenvalues(10).unwrap();
    for (a, b) in coupled.iter().zip(&real) {
        assert!(*a > 0.5);
        assert!((a - b).abs() / a.abs() <= 5e-3, "{coupled:?} vs {real:?}");
    }
}

#[test]
fn closed_segment_converges_at_second_order() {
    let (profile, well) = segment_profile();
    let basis = ChannelBasis::new(8, 1.0).unwrap();
    let ev = |n| assemble_closed_segment(&profile, &well, &basis, 2.0, n, true).unwrap().eigenvalues(5).unwrap();
    let (a, b, c) = (ev(40), ev(80), ev(160));
    for k in 0..5 {
        let order = ((a[k] - b[k]) / (b[k] - c[k])).log2();
        assert!((order - 2.0).abs() <= 0.2, "level {k}: order {order}");
    }
}

#[test]
fn sphere_spectrum_has_angular_momentum_multiplets() {
    let sphere = SurfaceChart::sphere(1.0).unwrap();
    let mut worst = Vec::new();
    for (n1, n2) in [(40, 80), (80, 160)] {
        let grid = SurfaceGrid::new(n1, n2).with_boundary([AxisBoundary::ZeroFlux, AxisBoundary::Periodic]);
        let op = assemble_2d(&sphere, &ConfinementProfile::homogeneous(), &TransverseWell::default(), &grid).unwrap();
        let vals = op.eigenvalues(9).unwrap();
        assert!(vals[0].abs() < 1e-8);
        let exact = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0];
        let err = vals[1..]
            .iter()
            .zip(&exact[1..])
            .map(|(v, e)| (v - e).abs() / e)
            .fold(0.0, f64::max);
        worst.push(err);
    }
    assert!(worst[1] <= 1e-2, "{worst:?}");
    assert!(worst[1] < worst[0] / 3.0, "{worst:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn assembled_operators_are_hermitian(
        eps in 0.0f64..0.5,
        omega in 1.0f64..12.0,
        kappa in -2.0f64..2.0,
        ditches in 1u32..=2,
        l_extra in 0u32..5,
        length in 1.0f64..6.0,
    ) {
        let basis = ChannelBasis::new(ditches + l_extra, 1.0).unwrap();
        let params = GridParams { length: Some(length), taper: Some(0.2 * length), ..GridParams::default() };
        let op = assemble_coupled_channel(&helix(eps, omega, kappa, ditches), &TransverseWell::default(), &basis, &params).unwrap();
        prop_assert!(op.hermiticity_residual() < 1e-13);
        let h = op.block_tridiagonal(None);
        for (u, l) in h.upper.iter().zip(&h.lower) {
            prop_assert_eq!(*u, l.conj());
        }
    }
}
