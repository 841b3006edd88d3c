//! Simulation driver: the uniform reference trajectory (cached) and the
//! adaptive run measured against it.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use crate::adaptive::{adaptive_step, AdaptiveState};
use crate::config::RunConfig;
use crate::diagnostics::{component_errors, compression_factor};
use crate::error::{MrError, Result};
use crate::lbm::{conserved_moments, step_uniform, SchemeSpec, UniformState};
use crate::multiresolution::LeafField;

/// Environment variable naming the on-disk reference cache directory.
pub const CACHE_ENV: &str = "MRLBM_CACHE";

/// Conserved moments of the uniform reference solution at every step, plus
/// the errors against the exact solution when it is known.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub key: String,
    pub q_cons: usize,
    pub cells: usize,
    pub dt: f64,
    /// `moments[n]`: cell-major conserved moments at `t^n`.
    pub moments: Vec<Vec<f64>>,
    /// `exact_error[n][h]`: `E^{h,n}`.
    pub exact_error: Option<Vec<Vec<f64>>>,
}

impl ReferenceTrajectory {
    pub fn steps(&self) -> usize {
        self.moments.len() - 1
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(b"MRLBMREF1")?;
        let key = self.key.as_bytes();
        w.write_all(&(key.len() as u64).to_le_bytes())?;
        w.write_all(key)?;
        for v in [self.q_cons as u64, self.cells as u64, self.moments.len() as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&[self.exact_error.is_some() as u8])?;
        for snapshot in &self.moments {
            for v in snapshot {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        if let Some(errs) = &self.exact_error {
            for row in errs {
                for v in row {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    fn read_from(r: &mut impl Read) -> std::io::Result<Self> {
        fn u64_of(r: &mut impl Read) -> std::io::Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        }
        fn f64s(r: &mut impl Read, n: usize) -> std::io::Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
        }
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut magic = [0u8; 9];
        r.read_exact(&mut magic)?;
        if &magic != b"MRLBMREF1" {
            return Err(bad("not a reference trajectory file"));
        }
        let klen = u64_of(r)? as usize;
        let mut key = vec![0u8; klen];
        r.read_exact(&mut key)?;
        let key = String::from_utf8(key).map_err(|_| bad("key is not utf-8"))?;
        let q_cons = u64_of(r)? as usize;
        let cells = u64_of(r)? as usize;
        let snaps = u64_of(r)? as usize;
        let dt = f64s(r, 1)?[0];
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let moments = (0..snaps).map(|_| f64s(r, cells * q_cons)).collect::<std::io::Result<Vec<_>>>()?;
        let exact_error = if flag[0] == 1 {
            Some((0..snaps).map(|_| f64s(r, q_cons)).collect::<std::io::Result<Vec<_>>>()?)
        } else {
            None
        };
        Ok(Self { key, q_cons, cells, dt, moments, exact_error })
    }
}

/// Runs the uniform reference scheme from the equilibrium initial state.
pub fn compute_reference(config: &RunConfig) -> Result<ReferenceTrajectory> {
    config.validate()?;
    let geometry = config.geometry()?;
    let spec = config.build_scheme()?;
    let steps = config.steps()?;
    let dt = spec.time_step(&geometry);
    let initial = config.datum.datum().finest_averages(&geometry);
    let mut state = UniformState::at_equilibrium(geometry, &spec, &initial)?;
    let mut moments = Vec::with_capacity(steps + 1);
    let mut exact_error = config.exact.map(|_| Vec::with_capacity(steps + 1));
    for n in 0..=steps {
        let m = state.conserved_moments(&spec);
        if let (Some(test), Some(errs)) = (config.exact, exact_error.as_mut()) {
            let exact = test.exact_finest_averages(n as f64 * dt, &geometry)?;
            errs.push(component_errors(&exact, &m, 1, geometry.dx(), config.norm_p)?);
        }
        moments.push(m);
        if n < steps {
            step_uniform(&mut state, &spec, config.boundary)?;
        }
    }
    Ok(ReferenceTrajectory {
        key: config.reference_key(),
        q_cons: spec.q_cons(),
        cells: geometry.finest_cells(),
        dt,
        moments,
        exact_error,
    })
}

fn memory_cache() -> &'static Mutex<HashMap<String, Arc<ReferenceTrajectory>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<ReferenceTrajectory>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn disk_path(dir: &Path, hash: &str) -> PathBuf {
    dir.join(format!("reference-{hash}.bin"))
}

fn load_from_disk(dir: &Path, config: &RunConfig) -> Option<ReferenceTrajectory> {
    let file = std::fs::File::open(disk_path(dir, &config.reference_hash())).ok()?;
    let traj = ReferenceTrajectory::read_from(&mut std::io::BufReader::new(file)).ok()?;
    (traj.key == config.reference_key()).then_some(traj)
}

fn store_on_disk(dir: &Path, config: &RunConfig, traj: &ReferenceTrajectory) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let hash = config.reference_hash();
    let tmp = dir.join(format!(".reference-{hash}.{}.tmp", std::process::id()));
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        traj.write_to(&mut w)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, disk_path(dir, &hash))?;
    Ok(())
}

/// The reference trajectory for `config`, computed once per content hash
/// and shared; persisted under `$MRLBM_CACHE` when that variable is set.
pub fn reference_trajectory(config: &RunConfig) -> Result<Arc<ReferenceTrajectory>> {
    let hash = config.reference_hash();
    if let Some(t) = memory_cache().lock().expect("cache lock").get(&hash) {
        return Ok(t.clone());
    }
    let dir = std::env::var_os(CACHE_ENV).map(PathBuf::from);
    let traj = match dir.as_deref().and_then(|d| load_from_disk(d, config)) {
        Some(t) => t,
        None => {
            let t = compute_reference(config)?;
            if let Some(d) = dir.as_deref() {
                if let Err(e) = store_on_disk(d, config, &t) {
                    log::warn!("could not store reference trajectory: {e}");
                }
            }
            t
        }
    };
    let traj = Arc::new(traj);
    Ok(memory_cache().lock().expect("cache lock").entry(hash).or_insert(traj).clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Measure `e^{h,n}` against the uniform reference.
    pub reference: bool,
    /// Record the per-step population error `‖L f̂ⁿ − f̂ⁿ⁺¹‖` injected by the
    /// adaptive step.
    pub injection: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    /// `e^{h,n}`; empty without a reference run.
    pub error: Vec<f64>,
    /// `E^{h,n}`; empty without an exact solution.
    pub exact_error: Vec<f64>,
    pub compression: f64,
    pub leaves: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: RunConfig,
    pub spec: Arc<SchemeSpec>,
    pub dt: f64,
    pub records: Vec<StepRecord>,
    pub final_field: LeafField,
    /// Reconstructed conserved moments on the finest lattice at `T`.
    pub final_moments: Vec<f64>,
    /// Largest `max_k |M_ref − m̂| / max_k |M_ref|` over all steps.
    pub max_relative_deviation: Option<f64>,
    /// Per-step injected population error (length `N`).
    pub injection: Option<Vec<f64>>,
}

impl RunResult {
    pub fn last(&self) -> &StepRecord {
        self.records.last().expect("at least the initial record")
    }

    /// Whether the adaptive run reproduced the reference to `1e−12`.
    pub fn matches_reference(&self) -> bool {
        self.max_relative_deviation.is_some_and(|d| d <= 1e-12)
    }
}

fn relative_deviation(reference: &[f64], adaptive: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    reference.iter().zip(adaptive).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

/// Runs the adaptive scheme from the full tree `Λ⁰ = ∇` to `T`.
pub fn run(config: &RunConfig, options: RunOptions) -> Result<RunResult> {
    config.validate()?;
    let geometry = config.geometry()?;
    let spec = config.build_scheme()?;
    let steps = config.steps()?;
    let dt = spec.time_step(&geometry);
    let qc = spec.q_cons();
    let dx = geometry.dx();
    let reference = if options.reference { Some(reference_trajectory(config)?) } else { None };

    let initial = config.datum.datum().finest_averages(&geometry);
    let start = UniformState::at_equilibrium(geometry, &spec, &initial)?;
    let mut state = AdaptiveState {
        field: LeafField::on_full_tree(geometry, spec.q(), start.into_values())?,
        step: 0,
        policy: config.policy()?,
        spec: spec.clone(),
        prediction: config.prediction()?,
        collision: config.collision,
        boundary: config.boundary,
    };
    let mut records = Vec::with_capacity(steps + 1);
    let mut deviation: Option<f64> = reference.as_ref().map(|_| 0.0);
    let mut injection = options.injection.then(|| Vec::with_capacity(steps));
    let mut finest = state.finest_populations();
    let mut final_moments = Vec::new();
    for n in 0..=steps {
        let moments = conserved_moments(&spec, &finest);
        let mut error = Vec::new();
        if let Some(r) = &reference {
            error = component_errors(&r.moments[n], &moments, qc, dx, config.norm_p)?;
            let d = relative_deviation(&r.moments[n], &moments);
            deviation = deviation.map(|m| m.max(d));
        }
        let exact_error =
            reference.as_ref().and_then(|r| r.exact_error.as_ref()).map(|e| e[n].clone()).unwrap_or_default();
        records.push(StepRecord {
            n,
            t: n as f64 * dt,
            error,
            exact_error,
            compression: compression_factor(state.field.tree()),
            leaves: state.field.len(),
        });
        if n == steps {
            final_moments = moments;
            break;
        }
        let before = finest;
        adaptive_step(&mut state)?;
        finest = state.finest_populations();
        if let Some(inj) = injection.as_mut() {
            let mut uniform = UniformState::new(geometry, spec.q(), before)?;
            step_uniform(&mut uniform, &spec, config.boundary)?;
            inj.push(crate::diagnostics::weighted_lp(uniform.values(), &finest, dx, config.norm_p)?);
        }
    }
    if !options.reference && !options.injection {
        log::debug!("run without reference: only compression is reported");
    }
    Ok(RunResult {
        config: config.clone(),
        spec,
        dt,
        records,
        final_field: state.field,
        final_moments,
        max_relative_deviation: deviation,
        injection,
    })
}

/// Validation failure for a run that cannot be compared against anything.
pub fn require_reference(result: &RunResult) -> Result<&[f64]> {
    result
        .records
        .last()
        .map(|r| r.error.as_slice())
        .filter(|e| !e.is_empty())
        .ok_or_else(|| MrError::Config("run was not paired with a reference".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(test: &str) -> RunConfig {
        let mut c = RunConfig::preset(test).unwrap();
        c.max_level = 7;
        c
    }

    #[test]
    fn zero_final_time_has_no_steps() {
        let mut c = small("I");
        c.final_time = 0.0;
        let r = run(&c, RunOptions { reference: true, injection: false }).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.records[0].error, vec![0.0]);
        assert_eq!(r.records[0].compression, 0.0);
    }

    #[test]
    fn zero_epsilon_matches_reference() {
        let mut c = small("III");
        c.epsilon = 0.0;
        let r = run(&c, RunOptions { reference: true, injection: false }).unwrap();
        assert!(r.matches_reference());
        assert_eq!(r.last().error, vec![0.0]);
    }

    #[test]
    fn reference_cache_round_trip() {
        let c = small("II");
        let t = compute_reference(&c).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = ReferenceTrajectory::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, t);
        let dir = tempfile::tempdir().unwrap();
        store_on_disk(dir.path(), &c, &t).unwrap();
        assert_eq!(load_from_disk(dir.path(), &c).unwrap(), t);
        let mut other = c.clone();
        other.s = 1.5;
        assert!(load_from_disk(dir.path(), &other).is_none());
        let shared = reference_trajectory(&c).unwrap();
        assert!(Arc::ptr_eq(&shared, &reference_trajectory(&c).unwrap()));
    }

    #[test]
    fn adaptive_run_stays_close_to_reference() {
        let c = small("I");
        let r = run(&c, RunOptions { reference: true, injection: true }).unwrap();
        let last = r.last();
        assert!(last.error[0] > 0.0 && last.error[0] < 10.0 * c.epsilon);
        assert!(last.compression > 50.0);
        assert_eq!(r.injection.as_ref().unwrap().len(), r.records.len() - 1);
        assert!(last.exact_error[0] > last.error[0]);
    }
}
