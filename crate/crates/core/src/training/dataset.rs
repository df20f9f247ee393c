use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::DatasetSpec;
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, Execution};
use crate::state::{DatasetMeta, Pair, TrajectoryDataset};
use crate::systems::{SamplingBox, System, Tolerance};

fn check_box(system: &System, b: &SamplingBox) -> Result<()> {
    let ok = |r: [f64; 2]| r[0] <= r[1] && r[0].is_finite() && r[1].is_finite();
    if !(ok(b.q) && ok(b.p) && ok(b.s)) {
        return Err(Error::Invalid(format!("sampling box bounds must be ordered and finite: {b:?}")));
    }
    if let System::Piston(p) = system {
        if b.q[0] <= -p.l || b.q[1] >= p.l {
            return Err(Error::Invalid(format!("sampling box x range must lie inside (-{0}, {0})", p.l)));
        }
    }
    Ok(())
}

/// Samples initial phase states, integrates each with the reference solver and
/// emits consecutive observable pairs. Phase data is dropped.
///
/// Initial conditions are drawn sequentially from one seeded stream, so the
/// result does not depend on the thread count.
pub fn generate_dataset(system: &System, spec: &DatasetSpec, seed: u64, exec: Execution) -> Result<TrajectoryDataset> {
    system.validate()?;
    if spec.n_traj == 0 || spec.traj_len < 2 || !(spec.h > 0.0) {
        return Err(Error::Invalid("dataset needs n_traj >= 1, traj_len >= 2 and h > 0".into()));
    }
    let bx = spec.sampling_box.unwrap_or_else(|| system.default_box());
    check_box(system, &bx)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ics: Vec<Vec<f64>> = (0..spec.n_traj).map(|_| system.sample_phase(&mut rng, &bx)).collect();
    let grid: Vec<f64> = (0..spec.traj_len).map(|k| k as f64 * spec.h).collect();
    let tol = Tolerance { rel: spec.rtol, abs: spec.atol };
    let runs = map_indexed(exec, spec.n_traj, |i| -> Result<Vec<Vec<f64>>> {
        let wrap = |e: Error| Error::Invalid(format!("trajectory {i} (seed {seed}, initial state {:?}): {e}", ics[i]));
        let phases = system.reference_integrate(&ics[i], &grid, tol).map_err(wrap)?;
        phases.iter().map(|y| system.phase_to_observable(y).map_err(wrap)).collect()
    });
    let mut pairs = Vec::with_capacity(spec.n_traj * (spec.traj_len - 1));
    for (traj_id, run) in runs.into_iter().enumerate() {
        let obs = run?;
        for w in obs.windows(2) {
            pairs.push(Pair { traj_id, h: spec.h, start: w[0].clone(), end: w[1].clone() });
        }
    }
    let layout = system.layout();
    Ok(TrajectoryDataset {
        layout,
        pairs,
        meta: DatasetMeta {
            system: system.name().to_string(),
            kind: layout.kind(),
            layout,
            n_traj: spec.n_traj,
            traj_len: spec.traj_len,
            h: spec.h,
            rtol: spec.rtol,
            atol: spec.atol,
            seed,
        },
    })
}
