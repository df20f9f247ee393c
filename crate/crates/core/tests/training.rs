use thermolag::autodiff::DiffScalarField;
use thermolag::integrators::{rollout, ChannelNet, EntropyVelocity, ForceField, IntegratorOptions, NetForce};
use thermolag::nets::{dissipative_output_dim, DissipativeForceModel, MlpArchitecture, MlpModel};
use thermolag::parallel::Execution;
use thermolag::state::{validate_dataset, Pair, TrajectoryDataset};
use thermolag::systems::{SamplingBox, System};
use thermolag::training::gauge::*;
use thermolag::training::*;
use thermolag::Error;

fn spec(n_traj: usize, traj_len: usize) -> DatasetSpec {
    DatasetSpec { n_traj, traj_len, h: 0.1, sampling_box: None, rtol: 1e-10, atol: 1e-12 }
}

fn piston() -> System {
    System::by_name("piston").unwrap()
}

fn rigid() -> System {
    System::by_name("rigid_body").unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Pairs produced by the integrator itself from the first state of each trajectory in `d`.
fn self_generated(g: &dyn DiffScalarField, f: &dyn ForceField, d: &TrajectoryDataset, steps: usize) -> TrajectoryDataset {
    let opts = IntegratorOptions { newton_tol: 1e-13, ..Default::default() };
    let mut pairs = Vec::new();
    let mut last = usize::MAX;
    for p in &d.pairs {
        if p.traj_id == last {
            continue;
        }
        last = p.traj_id;
        let t = rollout(g, f, &d.layout, &p.start, p.h, steps, &opts, None).unwrap();
        for w in t.states.windows(2) {
            pairs.push(Pair { traj_id: p.traj_id, h: p.h, start: w[0].clone(), end: w[1].clone() });
        }
    }
    TrajectoryDataset { layout: d.layout, pairs, meta: d.meta.clone() }
}

#[test]
fn dataset_pair_counts() {
    let d = generate_dataset(&piston(), &spec(200, 21), 0, Execution::Parallel).unwrap();
    assert_eq!(d.len(), 4000);
    assert!(validate_dataset(&d).is_empty());
    let d = generate_dataset(&rigid(), &spec(100, 21), 0, Execution::Parallel).unwrap();
    assert_eq!(d.len(), 2000);
    assert!(validate_dataset(&d).is_empty());
    let d = generate_dataset(&piston(), &spec(7, 2), 0, Execution::Serial).unwrap();
    assert_eq!(d.len(), 7);
}

#[test]
fn dataset_is_deterministic_and_thread_independent() {
    let a = generate_dataset(&rigid(), &spec(12, 6), 5, Execution::Serial).unwrap();
    let b = generate_dataset(&rigid(), &spec(12, 6), 5, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    let c = generate_dataset(&rigid(), &spec(12, 6), 6, Execution::Serial).unwrap();
    assert_ne!(a.pairs, c.pairs);
}

#[test]
fn dataset_respects_box_and_rejects_bad_specs() {
    let s = piston();
    let d = generate_dataset(&s, &spec(30, 2), 1, Execution::Serial).unwrap();
    for p in &d.pairs {
        assert!(p.start[0].abs() <= 1.0);
    }
    let mut bad = spec(3, 5);
    bad.sampling_box = Some(SamplingBox { q: [-3.0, 0.0], p: [-1.0, 1.0], s: [0.0, 1.0] });
    assert!(generate_dataset(&s, &bad, 1, Execution::Serial).is_err());
    assert!(generate_dataset(&s, &spec(3, 1), 1, Execution::Serial).is_err());
}

#[test]
fn csv_round_trip_keeps_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let d = generate_dataset(&piston(), &spec(4, 5), 3, Execution::Serial).unwrap();
    let path = dir.path().join("d.csv");
    d.write_csv(&path).unwrap();
    let back = TrajectoryDataset::read_csv(&path).unwrap();
    assert_eq!(back, d);
}

#[test]
fn zero_loss_fixpoint_with_exact_models() {
    for sys in [piston(), rigid()] {
        let seed = generate_dataset(&sys, &spec(10, 2), 2, Execution::Serial).unwrap();
        let (g, f) = (sys.exact_g(), sys.exact_force());
        let d = self_generated(g.as_ref(), f.as_ref(), &seed, 10);
        let l = loss(g.as_ref(), f.as_ref(), &d, &IntegratorOptions::default(), Execution::Serial).unwrap();
        println!("{}: {} pairs, loss {l:e}", sys.name(), d.len());
        assert!(l < 1e-18);
    }
}

#[test]
fn zero_loss_fixpoint_has_zero_parameter_gradient() {
    // learned side is a network; the data come from integrating with that same network
    let sys = piston();
    let layout = sys.layout();
    let nets = (0..2)
        .map(|c| {
            let arch = MlpArchitecture::new(4, vec![6], dissipative_output_dim(1, false));
            ChannelNet::Dissipative(DissipativeForceModel::new(MlpModel::random(arch, 20 + c).unwrap(), 1, false).unwrap())
        })
        .collect();
    let f = NetForce::new(layout, nets).unwrap();
    let g = sys.exact_g();
    let seed = generate_dataset(&sys, &spec(8, 2), 4, Execution::Serial).unwrap();
    let d = self_generated(g.as_ref(), &f, &seed, 8);
    let m = LossModel::new(g.as_ref(), &f, false, true);
    let (l, grad) = loss_and_grad(&m, &m.params(), &d, &IntegratorOptions::default(), Execution::Serial).unwrap();
    let norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
    println!("piston net F: loss {l:e}, |grad| {norm:e}");
    assert!(l < 1e-18 && norm < 1e-10);

    let sys = rigid();
    let mut arch = MlpArchitecture::new(4, vec![8, 8], 1);
    arch.activation = thermolag::nets::Activation::Tanh;
    // a convex-enough G keeps Newton well posed: add the exact G
    struct Sum<'a>(&'a dyn DiffScalarField, MlpModel);
    impl DiffScalarField for Sum<'_> {
        fn input_dim(&self) -> usize {
            4
        }
        fn params(&self) -> &[f64] {
            self.1.params()
        }
        fn eval<'t>(&self, p: thermolag::autodiff::Var<'t>, x: thermolag::autodiff::Var<'t>) -> thermolag::autodiff::Var<'t> {
            let e = self.0.eval(x.tape().zeros(1, 0), x);
            e + self.1.eval_tape(p, x).scale(0.01)
        }
    }
    let exact = sys.exact_g();
    let g = Sum(exact.as_ref(), MlpModel::random(arch, 3).unwrap());
    let f = sys.exact_force();
    let seed = generate_dataset(&sys, &spec(8, 2), 4, Execution::Serial).unwrap();
    let d = self_generated(&g, f.as_ref(), &seed, 8);
    let m = LossModel::new(&g, f.as_ref(), true, false);
    let (l, grad) = loss_and_grad(&m, &m.params(), &d, &IntegratorOptions::default(), Execution::Serial).unwrap();
    let norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
    println!("rigid net G: loss {l:e}, |grad| {norm:e}");
    assert!(l < 1e-18 && norm < 1e-10);
}

fn central_difference(m: &mut dyn FnMut(&[f64]) -> f64, theta: &[f64]) -> Vec<f64> {
    (0..theta.len())
        .map(|i| {
            let h = 1e-6 * theta[i].abs().max(1.0);
            let mut t = theta.to_vec();
            t[i] += h;
            let up = m(&t);
            t[i] -= 2.0 * h;
            (up - m(&t)) / (2.0 * h)
        })
        .collect()
}

fn assert_gradients_close(ad: &[f64], fd: &[f64]) {
    let diff = ad.iter().zip(fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
    println!("gradient relative error {:e}", diff / norm);
    assert!(diff / norm < 1e-5);
}

#[test]
fn gradient_matches_finite_differences_on_two_neuron_models() {
    let started = std::time::Instant::now();
    let sys = piston();
    let mut d = generate_dataset(&sys, &spec(10, 2), 9, Execution::Serial).unwrap();
    assert_eq!(d.len(), 10);
    let opts = IntegratorOptions::default();
    let f = sys.exact_force();

    // learned G: 4 → [2] → 1
    let mut g = MlpModel::random(MlpArchitecture::new(4, vec![2], 1), 1).unwrap();
    let theta = g.params().to_vec();
    let (_, ad) = loss_and_grad(&LossModel::new(&g, f.as_ref(), true, false), &theta, &d, &opts, Execution::Serial).unwrap();
    let fd = central_difference(
        &mut |t| {
            g.set_params(t).unwrap();
            loss(&g, f.as_ref(), &d, &opts, Execution::Serial).unwrap()
        },
        &theta,
    );
    assert_gradients_close(&ad, &fd);

    // learned F: one 2-neuron dissipative net per channel
    let exact = sys.exact_g();
    let nets = (0..2)
        .map(|c| {
            let arch = MlpArchitecture::new(4, vec![2], 1);
            ChannelNet::Dissipative(DissipativeForceModel::new(MlpModel::random(arch, 7 + c).unwrap(), 1, false).unwrap())
        })
        .collect();
    let mut fnet = NetForce::new(sys.layout(), nets).unwrap();
    let theta = fnet.params();
    for velocity in [EntropyVelocity::State, EntropyVelocity::Difference] {
        let opts = IntegratorOptions { entropy_velocity: velocity, force_midpoint: velocity == EntropyVelocity::Difference, ..opts };
        let m = LossModel::new(exact.as_ref(), &fnet, false, true);
        let (_, ad) = loss_and_grad(&m, &theta, &d, &opts, Execution::Serial).unwrap();
        let fd = central_difference(
            &mut |t| {
                fnet.set_params(t).unwrap();
                loss(exact.as_ref(), &fnet, &d, &opts, Execution::Serial).unwrap()
            },
            &theta,
        );
        fnet.set_params(&theta).unwrap();
        assert_gradients_close(&ad, &fd);
    }

    // reduced kind, learned G
    d = generate_dataset(&rigid(), &spec(10, 2), 9, Execution::Serial).unwrap();
    let f = rigid().exact_force();
    let mut g = MlpModel::random(MlpArchitecture::new(4, vec![2], 1), 2).unwrap();
    let theta = g.params().to_vec();
    let (_, ad) = loss_and_grad(&LossModel::new(&g, f.as_ref(), true, false), &theta, &d, &opts, Execution::Serial).unwrap();
    let fd = central_difference(
        &mut |t| {
            g.set_params(t).unwrap();
            loss(&g, f.as_ref(), &d, &opts, Execution::Serial).unwrap()
        },
        &theta,
    );
    assert_gradients_close(&ad, &fd);
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn tape_loss_equals_numeric_loss_and_is_thread_independent() {
    let sys = rigid();
    let d = generate_dataset(&sys, &spec(20, 11), 1, Execution::Serial).unwrap();
    let g = MlpModel::random(MlpArchitecture::new(4, vec![8, 8], 1), 4).unwrap();
    let f = sys.exact_force();
    let opts = IntegratorOptions::default();
    let m = LossModel::new(&g, f.as_ref(), true, false);
    let serial = loss_and_grad(&m, g.params(), &d, &opts, Execution::Serial).unwrap();
    let parallel = loss_and_grad(&m, g.params(), &d, &opts, Execution::Parallel).unwrap();
    assert_eq!(serial.0.to_bits(), parallel.0.to_bits());
    assert!(serial.1.iter().zip(&parallel.1).all(|(a, b)| a.to_bits() == b.to_bits()));
    let numeric = loss(&g, f.as_ref(), &d, &opts, Execution::Serial).unwrap();
    assert!(rel(serial.0, numeric) < 1e-12);
}

#[test]
fn loss_kind_is_checked() {
    let d = generate_dataset(&rigid(), &spec(2, 3), 1, Execution::Serial).unwrap();
    let (g, f) = (rigid().exact_g(), rigid().exact_force());
    assert!(loss_thermal(g.as_ref(), f.as_ref(), &d, &IntegratorOptions::default()).is_err());
    assert!(loss_so3(g.as_ref(), f.as_ref(), &d, &IntegratorOptions::default()).is_ok());
}

#[test]
fn nonpositive_temperature_in_data_is_reported() {
    let mut d = generate_dataset(&piston(), &spec(2, 3), 1, Execution::Serial).unwrap();
    d.pairs[1].end[3] = -0.5;
    let (g, f) = (piston().exact_g(), piston().exact_force());
    let err = loss_thermal(g.as_ref(), f.as_ref(), &d, &IntegratorOptions::default()).unwrap_err();
    assert!(matches!(err, Error::NonpositiveTemperature { .. }), "{err}");
}

fn gauge_data(sys: &System) -> TrajectoryDataset {
    generate_dataset(sys, &spec(10, 6), 11, Execution::Serial).unwrap()
}

#[test]
fn affine_shift_of_g_leaves_loss_unchanged() {
    let opts = IntegratorOptions::default();
    for sys in [piston(), rigid()] {
        let layout = sys.layout();
        let d = gauge_data(&sys);
        let (g, f) = (sys.exact_g(), sys.exact_force());
        let base = loss(g.as_ref(), f.as_ref(), &d, &opts, Execution::Serial).unwrap();
        // momentum shifts are a symmetry of the flat scheme only
        let p0 = match layout.kind() {
            thermolag::state::StateKind::Thermal => vec![0.37; layout.n_v],
            thermolag::state::StateKind::Reduced => vec![0.0; layout.n_v],
        };
        let shifted = AffineShift { inner: g.as_ref(), layout, g0: 2.5, s0: vec![-0.8; layout.n_t], p0 };
        let l = loss(&shifted, f.as_ref(), &d, &opts, Execution::Serial).unwrap();
        println!("{}: affine {:e}", sys.name(), rel(l, base));
        assert!(rel(l, base) < 1e-14);
    }
}

#[test]
fn scaling_g_and_f_scales_loss_quadratically() {
    let opts = IntegratorOptions::default();
    for sys in [piston(), rigid()] {
        let d = gauge_data(&sys);
        let (g, f) = (sys.exact_g(), sys.exact_force());
        let base = loss(g.as_ref(), f.as_ref(), &d, &opts, Execution::Serial).unwrap();
        for k in [0.5, 3.0] {
            let l = loss(&ScaledG { inner: g.as_ref(), k }, &ScaledForce { inner: f.as_ref(), k }, &d, &opts, Execution::Serial)
                .unwrap();
            println!("{}: scale {k} {:e}", sys.name(), rel(l, k * k * base));
            assert!(rel(l, k * k * base) < 1e-12);
        }
    }
}

#[test]
fn coordinate_temperature_shift_leaves_loss_unchanged() {
    let sys = piston();
    let layout = sys.layout();
    let (g, f) = (sys.exact_g(), sys.exact_force());
    let a = vec![vec![0.3], vec![-0.45]];
    let sg = TemperatureShiftG { inner: g.as_ref(), layout, a: a.clone() };
    let sf = TemperatureShiftForce { inner: f.as_ref(), a };

    // data whose velocities satisfy the velocity line
    let opts = IntegratorOptions::default();
    let d = self_generated(g.as_ref(), f.as_ref(), &gauge_data(&sys), 6);
    let base = loss(g.as_ref(), f.as_ref(), &d, &opts, Execution::Serial).unwrap();
    let l = loss(&sg, &sf, &d, &opts, Execution::Serial).unwrap();
    println!("self-generated data: {base:e} vs {l:e}");
    assert!((l - base).abs() < 1e-20);

    // reference data with the difference-quotient velocity in the entropy line
    let opts = IntegratorOptions { entropy_velocity: EntropyVelocity::Difference, ..Default::default() };
    let d = gauge_data(&sys);
    let base = loss(g.as_ref(), f.as_ref(), &d, &opts, Execution::Serial).unwrap();
    let l = loss(&sg, &sf, &d, &opts, Execution::Serial).unwrap();
    println!("reference data: {:e}", rel(l, base));
    assert!(rel(l, base) < 1e-12);
}

#[test]
fn adam_zero_gradient_keeps_parameters() {
    let mut p = vec![1.0, -2.0];
    let mut s = AdamState::new(2);
    s.m = vec![0.5, 0.5];
    s.v = vec![1.0, 1.0];
    let before = p.clone();
    // moments decay but a bias-corrected step still moves; only a fresh state stays put
    let mut fresh = AdamState::new(2);
    adam_step(&mut p, &[0.0, 0.0], &mut fresh, 0.1).unwrap();
    assert_eq!(p, before);
    assert_eq!(fresh.t, 1);
    let mut q = before.clone();
    adam_step(&mut q, &[0.0, 0.0], &mut s, 0.1).unwrap();
    assert_eq!(s.m, vec![0.45, 0.45]);
    assert!((s.v[0] - 0.999).abs() < 1e-15);
}

#[test]
fn adam_constant_gradient_moves_by_lr() {
    let mut p = vec![0.0];
    let mut s = AdamState::new(1);
    let mut last = 0.0;
    for _ in 0..2000 {
        let before = p[0];
        adam_step(&mut p, &[3.7], &mut s, 0.01).unwrap();
        last = before - p[0];
    }
    assert!((last - 0.01).abs() < 1e-6);
}

#[test]
fn adam_minimises_quadratic() {
    let mut p = vec![5.0f64];
    let mut s = AdamState::new(1);
    let mut steps = 0;
    while (p[0] - 1.5).abs() >= 1e-6 && steps < 5000 {
        let g = [2.0 * (p[0] - 1.5)];
        adam_step(&mut p, &g, &mut s, 0.01).unwrap();
        steps += 1;
    }
    println!("converged in {steps} steps to {}", p[0]);
    assert!((p[0] - 1.5).abs() < 1e-6);
    assert!(adam_step(&mut p, &[1.0, 2.0], &mut s, 0.01).is_err());
}

fn small_config(system: &str, regime: Regime) -> TrainConfig {
    let mut cfg = TrainConfig::preset(system, regime, Preset::Desk).unwrap();
    cfg.epochs = 12;
    cfg.hidden = vec![5];
    cfg.dataset.n_traj = 4;
    cfg.dataset.traj_len = 6;
    cfg.checkpoint_every = 5;
    cfg.grad_check = false;
    cfg
}

#[test]
fn training_is_deterministic_and_resumable() {
    for batch in [None, Some(7)] {
        let mut cfg = small_config("piston", Regime::LearnF);
        cfg.batch = batch;
        let d = generate_dataset(&cfg.system().unwrap(), &cfg.dataset, 0, Execution::Serial).unwrap();
        let (a, ma) = train(&cfg, &d, Execution::Serial).unwrap();
        let (b, mb) = train(&cfg, &d, Execution::Parallel).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(ma.theta(), mb.theta());

        // stop after the first checkpoint, then resume from it
        let mut models = Models::for_config(&cfg).unwrap();
        let mut saved = Vec::new();
        let start = TrainState::new(models.theta());
        train_from(&cfg, &d, Execution::Serial, &mut models, start, &mut |s| {
            saved.push(s.clone());
            Ok(())
        })
        .unwrap();
        let mid = saved[0].clone();
        assert_eq!(mid.epoch, 5);
        let json = serde_json::to_string(&mid).unwrap();
        let mid: TrainState = serde_json::from_str(&json).unwrap();
        let mut resumed = Models::for_config(&cfg).unwrap();
        let r = train_from(&cfg, &d, Execution::Serial, &mut resumed, mid, &mut |_| Ok(())).unwrap();
        assert_eq!(r.history, a.history);
        assert_eq!(resumed.theta(), ma.theta());
    }
}

#[test]
fn best_loss_is_tracked_and_reported() {
    let cfg = small_config("rigid_body", Regime::LearnG);
    let d = generate_dataset(&cfg.system().unwrap(), &cfg.dataset, 0, Execution::Serial).unwrap();
    let (r, models) = train(&cfg, &d, Execution::Serial).unwrap();
    assert_eq!(r.history.len(), cfg.epochs);
    assert!(r.history.iter().all(|e| e.loss.is_finite()));
    let running_min: Vec<f64> = r
        .history
        .iter()
        .scan(f64::INFINITY, |m, e| {
            *m = m.min(e.loss);
            Some(*m)
        })
        .collect();
    assert!(running_min.windows(2).all(|w| w[1] <= w[0]));
    let best = running_min.last().unwrap().min(r.final_loss);
    assert_eq!(r.best_loss, best);
    let l = loss(models.g(), models.f(), &d, &cfg.integrator_options(), Execution::Serial).unwrap();
    assert!(rel(l, r.best_loss) < 1e-12);
    assert!(r.warning.is_none());
    assert!(r.g_model.is_some() && r.f_models.is_empty());
    let lr: Vec<f64> = r.history.iter().map(|e| e.lr).collect();
    assert_eq!(lr[0], cfg.lr_init);
    assert!((lr[cfg.epochs - 1] - cfg.lr_final).abs() < 1e-15);
}

#[test]
fn zero_epochs_keep_initial_models() {
    let mut cfg = small_config("piston", Regime::LearnF);
    cfg.epochs = 0;
    let d = generate_dataset(&cfg.system().unwrap(), &cfg.dataset, 0, Execution::Serial).unwrap();
    let (r, models) = train(&cfg, &d, Execution::Serial).unwrap();
    assert!(r.history.is_empty());
    assert_eq!(models.theta(), Models::for_config(&cfg).unwrap().theta());
    assert_eq!(r.initial_loss, r.final_loss);
}

#[test]
fn learn_both_carries_warning() {
    let cfg = small_config("piston", Regime::LearnBoth);
    let d = generate_dataset(&cfg.system().unwrap(), &cfg.dataset, 0, Execution::Serial).unwrap();
    let (r, _) = train(&cfg, &d, Execution::Serial).unwrap();
    assert_eq!(r.warning.as_deref(), Some(LEARN_BOTH_WARNING));
    assert!(r.g_model.is_some());
    assert_eq!(r.f_models.len(), 2);
}

#[test]
fn nonfinite_loss_aborts_with_checkpoint() {
    let cfg = small_config("rigid_body", Regime::LearnG);
    let mut d = generate_dataset(&cfg.system().unwrap(), &cfg.dataset, 0, Execution::Serial).unwrap();
    d.pairs[3].end[0] = 1e200;
    let mut models = Models::for_config(&cfg).unwrap();
    let mut saved = Vec::new();
    let start = TrainState::new(models.theta());
    let err = train_from(&cfg, &d, Execution::Serial, &mut models, start, &mut |s| {
        saved.push(s.clone());
        Ok(())
    })
    .unwrap_err();
    assert_eq!(err, Error::NonfiniteLoss { epoch: 0 });
    assert_eq!(saved.len(), 1);
    assert!(saved[0].theta.iter().all(|x| x.is_finite()));
}

#[test]
fn config_presets_and_toml() {
    let p = TrainConfig::preset("piston", Regime::LearnG, Preset::Paper).unwrap();
    assert_eq!((p.epochs, p.dataset.n_traj, p.dataset.traj_len), (100_000, 200, 21));
    let r = TrainConfig::preset("rigid_body", Regime::LearnF, Preset::Paper).unwrap();
    assert_eq!((r.epochs, r.lr_init, r.lr_final, r.dataset.n_traj), (300_000, 1e-2, 1e-4, 100));
    let desk = TrainConfig::preset("rigid_body", Regime::LearnG, Preset::Desk).unwrap();
    assert_eq!(desk.dataset.n_traj * (desk.dataset.traj_len - 1), 500);
    assert_eq!(desk.epochs, 5000);

    let text = toml::to_string(&desk).unwrap();
    let back: TrainConfig = toml::from_str(&text).unwrap();
    assert_eq!(back, desk);

    let src = r#"
        system = "piston"
        regime = "learn_F"
        epochs = 10
        lr_init = 1e-2
        lr_final = 1e-3
        [params]
        m = 2.0
        nu = [0.1, 0.2]
        [dataset]
        n_traj = 3
        traj_len = 4
        h = 0.05
    "#;
    let cfg: TrainConfig = toml::from_str(src).unwrap();
    cfg.validate().unwrap();
    match cfg.system().unwrap() {
        System::Piston(p) => assert_eq!((p.m, p.nu, p.a2), (2.0, [0.1, 0.2], 2.0)),
        _ => unreachable!(),
    }
    assert!(toml::from_str::<TrainConfig>(&format!("{src}\nunknown_key = 1")).is_err());
    let mut bad = cfg.clone();
    bad.lr_final = 1.0;
    assert!(bad.validate().is_err());
    bad = cfg.clone();
    bad.params = Some(serde_json::json!({ "mass": 1.0 }));
    assert!(bad.validate().is_err());
}

#[test]
fn evaluation_metrics() {
    let sys = piston();
    let y0 = sys.validation_phase();
    let reference = reference_trajectory(&sys, &y0, 0.1, 500, Default::default()).unwrap();
    let rt = Table::from_trajectory(&reference);
    let same = compare_tables(&rt, &rt).unwrap();
    assert!(same.mae.iter().all(|m| *m == 0.0));

    let models = Models::exact(&sys);
    let m = reconstruction(&models, 0.1, 500, &IntegratorOptions::default(), Default::default()).unwrap();
    println!("exact piston over 500 steps: {:?}", m);
    assert!(m.max_observable_mae < 2e-2);
    assert_eq!(m.entropy_violations, 0);
    assert!(m.energy_drift.unwrap() < 1e-2);

    let short = reference_trajectory(&sys, &y0, 0.1, 10, Default::default()).unwrap();
    let err = compare_tables(&Table::from_trajectory(&short), &rt).unwrap_err();
    assert!(matches!(err, Error::GridMismatch(_)));
}
