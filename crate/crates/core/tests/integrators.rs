use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermolag::autodiff::{DiffScalarField, Var};
use thermolag::integrators::*;
use thermolag::state::{Layout, ObservableState, PhaseState, ReducedObservable};
use thermolag::systems::{System, Tolerance};

/// G = ½|v|² + c·T for a free particle.
struct Free {
    n: usize,
    c: f64,
}

impl DiffScalarField for Free {
    fn input_dim(&self) -> usize {
        2 * self.n + 1
    }
    fn params(&self) -> &[f64] {
        &[]
    }
    fn eval<'t>(&self, _p: Var<'t>, x: Var<'t>) -> Var<'t> {
        let mut g = x.col(2 * self.n).scale(self.c);
        for j in 0..self.n {
            g = g + x.col(self.n + j).square().scale(0.5);
        }
        g
    }
}

fn opts() -> IntegratorOptions {
    IntegratorOptions::default()
}

#[test]
fn free_flight_has_zero_residuals() {
    let g = Free { n: 2, c: 0.3 };
    let f = ZeroForce { layout: Layout::thermal(2, 1) };
    let h = 0.25;
    let a = ObservableState::new(vec![0.1, -0.2], vec![1.0, 2.0], vec![1.5]).unwrap();
    let b = ObservableState::new(vec![0.1 + h, -0.2 + 2.0 * h], vec![1.0, 2.0], vec![1.5]).unwrap();
    let r = residuals_thermal(&g, &f, &a, &b, h, &opts()).unwrap();
    assert!(r.max_abs() < 1e-15);
    let b2 = step_thermal(&g, &f, &a, h, &opts()).unwrap();
    for (x, y) in b2.to_vec().iter().zip(b.to_vec()) {
        assert_abs_diff_eq!(*x, y, epsilon = 1e-14);
    }
}

#[test]
fn stationary_pair_leaves_force_terms() {
    let sys = System::by_name("piston").unwrap();
    let (g, f) = (sys.exact_g(), sys.exact_force());
    let x = vec![0.2, 0.3, 0.9, 1.1];
    let r = residuals_flat(g.as_ref(), f.as_ref(), &sys.layout(), &x, &x, 0.1, &opts()).unwrap();
    let (_, grad) = g.value_and_grad(&x).unwrap();
    let forces = f.eval(&x).unwrap();
    assert_abs_diff_eq!(r.r_momentum[0], -grad[0] - forces[0][0] - forces[1][0], epsilon = 1e-14);
    for i in 0..2 {
        assert_abs_diff_eq!(r.r_entropy[i], forces[i][0] * x[1], epsilon = 1e-15);
    }
}

#[test]
fn round_trip_residuals_vanish() {
    for name in ["piston", "rigid_body"] {
        let sys = System::by_name(name).unwrap();
        let (g, f) = (sys.exact_g(), sys.exact_force());
        let layout = sys.layout();
        let x0 = sys.phase_to_observable(&sys.validation_phase()).unwrap();
        let x1 = step_flat(g.as_ref(), f.as_ref(), &layout, &x0, 0.1, &opts()).unwrap();
        let r = residuals_flat(g.as_ref(), f.as_ref(), &layout, &x0, &x1, 0.1, &opts()).unwrap();
        assert!(r.max_abs() < 1e-11, "{name}: {}", r.max_abs());
    }
}

#[test]
fn long_runs_conserve_energy_and_produce_entropy() {
    for name in ["piston", "rigid_body"] {
        let sys = System::by_name(name).unwrap();
        let (g, f) = (sys.exact_g(), sys.exact_force());
        let y0 = sys.validation_phase();
        let x0 = sys.phase_to_observable(&y0).unwrap();
        let tr = rollout(g.as_ref(), f.as_ref(), &sys.layout(), &x0, 0.1, 500, &opts(), Some(&y0)).unwrap();
        println!("{name}: band {:e} min dS {:e}", tr.energy_band(), tr.min_entropy_increment());
        assert!(tr.energy_band() < 1e-2);
        assert!(tr.min_entropy_increment() >= -1e-12);
        assert_eq!(tr.entropy[0], y0[y0.len() - sys.layout().n_t..].to_vec());
    }
}

#[test]
fn tracks_reference_solution() {
    for (name, tol) in [("piston", 1e-2), ("rigid_body", 1e-2)] {
        let sys = System::by_name(name).unwrap();
        let (g, f) = (sys.exact_g(), sys.exact_force());
        let y0 = sys.validation_phase();
        let x0 = sys.phase_to_observable(&y0).unwrap();
        let h = 0.1;
        let steps = 500;
        let tr = rollout(g.as_ref(), f.as_ref(), &sys.layout(), &x0, h, steps, &opts(), None).unwrap();
        let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
        let refs = sys.reference_integrate(&y0, &grid, Tolerance::default()).unwrap();
        let mut mae = 0.0;
        let mut count = 0.0;
        for (x, y) in tr.states.iter().zip(&refs) {
            let xr = sys.phase_to_observable(y).unwrap();
            for (a, b) in x.iter().zip(&xr) {
                mae += (a - b).abs();
                count += 1.0;
            }
        }
        mae /= count;
        println!("{name}: MAE {mae:e}");
        assert!(mae < tol);
    }
}

fn one_step_error(sys: &System, h: f64) -> f64 {
    let (g, f) = (sys.exact_g(), sys.exact_force());
    let y0 = sys.validation_phase();
    let x0 = sys.phase_to_observable(&y0).unwrap();
    let x1 = step_flat(g.as_ref(), f.as_ref(), &sys.layout(), &x0, h, &IntegratorOptions { newton_tol: 1e-13, ..opts() }).unwrap();
    let tol = Tolerance { rel: 1e-13, abs: 1e-15 };
    let y1 = &sys.reference_integrate(&y0, &[0.0, h], tol).unwrap()[1];
    let xr = sys.phase_to_observable(y1).unwrap();
    x1.iter().zip(&xr).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn local_error_is_second_order() {
    for name in ["piston", "rigid_body"] {
        let sys = System::by_name(name).unwrap();
        let hs = [1e-2, 5e-3, 2.5e-3];
        let errs: Vec<f64> = hs.iter().map(|&h| one_step_error(&sys, h)).collect();
        let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        println!("{name}: errs {errs:?} orders {orders:?}");
        for p in orders {
            assert!((1.8..=2.2).contains(&p), "{name}: order {p}");
        }
    }
}

#[test]
fn rigid_temperature_nearly_constant() {
    let sys = System::by_name("rigid_body").unwrap();
    let (g, f) = (sys.exact_g(), sys.exact_force());
    let a0 = ReducedObservable::new([0.5, -0.25, -0.5 / 3.0], 1.229167).unwrap();
    let mut a = a0;
    let mut drift: f64 = 0.0;
    for _ in 0..200 {
        a = step_so3(g.as_ref(), f.as_ref(), &a, 0.1, &opts()).unwrap();
        drift = drift.max((a.t() - a0.t()).abs());
    }
    println!("rigid T drift {drift:e}");
    assert!(drift < 1e-3);
}

#[test]
fn frictionless_rigid_body_keeps_discrete_casimir_and_entropy() {
    // Each step maps M + (h/2)M×Ω + (h²/4)(Ω·M)Ω at the new point onto
    // M − (h/2)M×Ω + (h²/4)(Ω·M)Ω at the old one; both have the same norm,
    // so that norm is an exact invariant of the frictionless scheme.
    let sys = System::by_name("rigid_body").unwrap();
    let g = sys.exact_g();
    let f = ZeroForce { layout: Layout::reduced() };
    let h = 0.1;
    let mut x = sys.phase_to_observable(&[0.3, -0.6, 0.4, 0.2]).unwrap();
    let invariant = |x: &[f64]| {
        let (_, m) = g.value_and_grad(x).unwrap();
        let w = &x[..3];
        let c = [m[1] * w[2] - m[2] * w[1], m[2] * w[0] - m[0] * w[2], m[0] * w[1] - m[1] * w[0]];
        let p: f64 = (0..3).map(|j| m[j] * w[j]).sum();
        let mm: f64 = (0..3).map(|j| m[j] * m[j]).sum();
        let cc: f64 = c.iter().map(|c| c * c).sum();
        let ww: f64 = w.iter().map(|w| w * w).sum();
        (mm, mm + h * h / 4.0 * cc + h * h / 2.0 * p * p + h.powi(4) / 16.0 * p * p * ww)
    };
    let (m0, n0) = invariant(&x);
    let s0 = g.value_and_grad(&x).unwrap().1[3];
    for _ in 0..100 {
        x = step_flat(g.as_ref(), &f, &Layout::reduced(), &x, h, &opts()).unwrap();
        let (m, n) = invariant(&x);
        assert_abs_diff_eq!(n, n0, epsilon = 1e-12);
        assert!((m - m0).abs() < h * h * m0);
    }
    assert_abs_diff_eq!(g.value_and_grad(&x).unwrap().1[3], s0, epsilon = 1e-10);
}

#[test]
fn principal_axis_is_relative_equilibrium() {
    let sys = System::by_name("rigid_body").unwrap();
    let g = sys.exact_g();
    let f = ZeroForce { layout: Layout::reduced() };
    let a = ReducedObservable::new([0.0, 0.4, 0.0], 1.3).unwrap();
    let r = residuals_so3(g.as_ref(), &f, &a, &a, 0.1, &opts()).unwrap();
    assert!(r.max_abs() < 1e-15);
    let b = step_so3(g.as_ref(), &f, &a, 0.1, &opts()).unwrap();
    assert_abs_diff_eq!(b.omega()[1], 0.4, epsilon = 1e-12);
    assert_abs_diff_eq!(b.t(), 1.3, epsilon = 1e-12);
}

#[test]
fn canonical_step_produces_entropy_and_matches_thermal() {
    let sys = System::by_name("piston").unwrap();
    let (hf, g, f) = (sys.hamiltonian(), sys.exact_g(), sys.exact_force());
    let y0 = sys.validation_phase();
    let a = PhaseState::from_slice(1, &y0).unwrap();
    let b = step_canonical(hf.as_ref(), f.as_ref(), &a, 0.1, &opts()).unwrap();
    assert!(b.s[0] > a.s[0] && b.s[1] > a.s[1]);

    let mut diffs = Vec::new();
    for h in [1e-2, 5e-3] {
        let b = step_canonical(hf.as_ref(), f.as_ref(), &a, h, &opts()).unwrap();
        let xc = sys.phase_to_observable(&b.to_vec()).unwrap();
        let x0 = sys.phase_to_observable(&y0).unwrap();
        let xt = step_flat(g.as_ref(), f.as_ref(), &sys.layout(), &x0, h, &opts()).unwrap();
        diffs.push(xc.iter().zip(&xt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    println!("canonical vs thermal {diffs:?}");
    let order = (diffs[0] / diffs[1]).log2();
    assert!(order > 1.7, "order {order}");
}

#[test]
fn canonical_free_flight() {
    let hf = Free { n: 1, c: 1.0 };
    let f = ZeroForce { layout: Layout::thermal(1, 1) };
    // H(q, p, S) with the same form: ½p² + S
    let a = PhaseState::new(vec![0.0], vec![2.0], vec![0.4]).unwrap();
    let b = step_canonical(&hf, &f, &a, 0.5, &opts()).unwrap();
    assert_eq!(b, PhaseState::new(vec![1.0], vec![2.0], vec![0.4]).unwrap());
}

#[test]
fn hat_vee_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let w = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        assert_eq!(vee(&hat(w)).unwrap(), w);
    }
}

#[test]
fn newton_divergence_is_reported() {
    let sys = System::by_name("piston").unwrap();
    let (g, f) = (sys.exact_g(), sys.exact_force());
    let x0 = sys.phase_to_observable(&sys.validation_phase()).unwrap();
    let o = IntegratorOptions { max_iter: 1, newton_tol: 1e-300, ..opts() };
    let err = step_flat(g.as_ref(), f.as_ref(), &sys.layout(), &x0, 0.1, &o).unwrap_err();
    assert!(matches!(err, thermolag::Error::NewtonDiverged { .. }));
}
