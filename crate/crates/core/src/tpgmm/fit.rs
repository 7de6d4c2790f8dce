use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
#[allow(unused_imports)]
use num_traits::Float as _;
use serde::{Deserialize, Serialize};

use super::{FrameInstance, StateLayout, TpGmmModel};
use crate::error::{Error, Result};
use crate::gmm::{kmeans, weighted_moments, EmConfig, EmTrace, GaussianComponent, Samples};
use crate::linalg::{log_sum_exp, GaussianEval};
use crate::trajectory::{normalized_time, Trajectory};

/// How EM picks its starting partition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Seeded k-means++ on the global states.
    KMeans,
    /// K equal slices of normalized time.
    #[default]
    TimeBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub em: EmConfig,
    /// Every demonstration is resampled to this many states.
    pub resample_len: usize,
    pub init: Init,
}

impl FitConfig {
    /// k-means initialization, matching [`crate::gmm::Gmm::fit`].
    pub fn new(k: usize, regularization: f64, seed: u64) -> Self {
        FitConfig {
            em: EmConfig::new(k, regularization, seed),
            resample_len: 100,
            init: Init::KMeans,
        }
    }
}

/// Slice index of each state for time-based initialization; time is the
/// first coordinate.
fn time_slices(samples: &Samples<'_>, k: usize) -> Vec<usize> {
    (0..samples.len())
        .map(|i| ((samples.row(i)[0] * k as f64) as usize).min(k - 1))
        .collect()
}

/// Resample a trajectory to `n` states `(t, position..., [gripper])` with
/// normalized time.
pub fn encode_demonstration(traj: &Trajectory, n: usize) -> (StateLayout, Vec<f64>) {
    let layout = StateLayout {
        position_dim: traj.dim(),
        gripper: traj.has_gripper(),
    };
    let mut out = Vec::with_capacity(n * layout.state_dim());
    for i in 0..n {
        let u = normalized_time(i, n);
        out.push(u);
        out.extend_from_slice(traj.position_at_normalized(u).as_slice());
        if let Some(g) = traj.gripper_at_normalized(u) {
            out.push(g);
        }
    }
    (layout, out)
}

/// Fit a TP-GMM to demonstrations, each observed through its own frame instance.
pub fn fit(
    demos: &[Trajectory],
    frames: &[FrameInstance],
    config: &FitConfig,
) -> Result<(TpGmmModel, EmTrace)> {
    if demos.is_empty() {
        return Err(Error::NoDemonstrations);
    }
    if demos.len() != frames.len() {
        return Err(Error::contract("one frame instance per demonstration"));
    }
    if config.resample_len < 2 {
        return Err(Error::InvalidConfig(
            "resample length must be at least 2".into(),
        ));
    }
    let frame_count = frames[0].len();
    if frame_count == 0 || frames.iter().any(|f| f.len() != frame_count) {
        return Err(Error::contract(
            "every demonstration needs the same number of frames",
        ));
    }

    let mut layout = None;
    let mut global = Vec::new();
    for d in demos {
        let (l, states) = encode_demonstration(d, config.resample_len);
        match layout {
            None => layout = Some(l),
            Some(prev) if prev != l => {
                return Err(Error::contract("demonstrations disagree on state layout"))
            }
            _ => {}
        }
        global.extend(states);
    }
    let layout = layout.expect("nonempty");
    let dim = layout.state_dim();
    let n = global.len() / dim;
    config.em.validate(n)?;

    // local[f] holds every state expressed in frame f
    let mut local: Vec<Vec<f64>> = vec![Vec::with_capacity(global.len()); frame_count];
    let per_demo = config.resample_len;
    for (di, inst) in frames.iter().enumerate() {
        for (fi, frame) in inst.frames.iter().enumerate() {
            if frame.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: frame.dim(),
                });
            }
            let inv = frame
                .a()
                .try_inverse()
                .ok_or(Error::SingularFrame { frame: fi })?;
            for s in 0..per_demo {
                let row = &global[(di * per_demo + s) * dim..(di * per_demo + s + 1) * dim];
                let centered =
                    DVector::from_iterator(dim, row.iter().zip(frame.b()).map(|(x, b)| x - b));
                local[fi].extend((&inv * centered).iter());
            }
        }
    }

    let k = config.em.k;
    let floor = config.em.regularization;
    let global_samples = Samples::new(&global, dim);
    let assign = match config.init {
        Init::KMeans => kmeans(&global_samples, k, config.em.seed)?,
        Init::TimeBased if config.resample_len < k => {
            return Err(Error::InvalidConfig(
                "time-based initialization needs resample_len >= K".into(),
            ))
        }
        Init::TimeBased => time_slices(&global_samples, k),
    };

    let mut priors = vec![1.0 / k as f64; k];
    let mut components: Vec<Vec<GaussianComponent>> = Vec::with_capacity(k);
    for j in 0..k {
        let w: Vec<f64> = assign
            .iter()
            .map(|&a| if a == j { 1.0 } else { 0.0 })
            .collect();
        components.push(
            local
                .iter()
                .map(|data| {
                    let (mean, cov) = weighted_moments(&Samples::new(data, dim), &w, floor);
                    GaussianComponent::new(mean, &cov)
                })
                .collect(),
        );
    }

    let mut trace = EmTrace::default();
    let mut resp = vec![0.0; n * k];
    let mut weights = vec![0.0; n];
    loop {
        let ll = e_step(&priors, &components, &local, dim, &mut resp)?;
        let done = trace
            .log_likelihood
            .last()
            .is_some_and(|prev| (ll - prev) / (n as f64) < config.em.tolerance);
        trace.log_likelihood.push(ll);
        if done {
            trace.converged = true;
            break;
        }
        if trace.log_likelihood.len() > config.em.max_iterations {
            break;
        }
        for j in 0..k {
            for (i, w) in weights.iter_mut().enumerate() {
                *w = resp[i * k + j];
            }
            let nk: f64 = weights.iter().sum();
            priors[j] = nk / n as f64;
            if nk > 0.0 {
                for (fi, data) in local.iter().enumerate() {
                    let (mean, cov) = weighted_moments(&Samples::new(data, dim), &weights, floor);
                    components[j][fi] = GaussianComponent::new(mean, &cov);
                }
            }
        }
        let total: f64 = priors.iter().sum();
        for p in &mut priors {
            *p /= total;
        }
    }

    let model = TpGmmModel {
        k,
        frame_count,
        state_dim: dim,
        layout,
        priors,
        components,
        regularization: floor,
        seed: config.em.seed,
        iterations: trace.log_likelihood.len() - 1,
        log_likelihood: *trace.log_likelihood.last().expect("at least one E-step"),
    };
    Ok((model, trace))
}

fn e_step(
    priors: &[f64],
    components: &[Vec<GaussianComponent>],
    local: &[Vec<f64>],
    dim: usize,
    resp: &mut [f64],
) -> Result<f64> {
    let k = priors.len();
    let evals = components
        .iter()
        .enumerate()
        .map(|(j, per_frame)| {
            per_frame
                .iter()
                .map(|c| {
                    GaussianEval::new(&c.mean, &c.covariance_matrix())
                        .ok_or(Error::SingularComponent { component: j })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n = local[0].len() / dim;
    let mut row = vec![0.0; k];
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..k {
            let mut l = priors[j].ln();
            for (fi, data) in local.iter().enumerate() {
                l += evals[j][fi].log_pdf(&data[i * dim..(i + 1) * dim]);
            }
            row[j] = l;
        }
        let lse = log_sum_exp(&row);
        for j in 0..k {
            resp[i * k + j] = (row[j] - lse).exp();
        }
        total += lse;
    }
    Ok(total)
}
