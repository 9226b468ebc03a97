//! Mutable intention filter: a particle filter over the task intention.
//!
//! Each particle carries one intention hypothesis. A step mutates every
//! particle through the sticky transition matrix, reweights by the GILM
//! trajectory likelihood of its goal, normalises, and resamples
//! systematically when the effective sample size drops below `N/2`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::intent::{
    scaled_likelihoods, FilterConfig, FilterError, IntentionSpace, Posterior, Result,
    TransitionModel,
};
use crate::prediction::gilm::{gilm_log_likelihood, GilmParams, GoalRegion, ObservationWindow};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    /// Index into the intention space.
    pub intention: usize,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct ParticleSet {
    space: Arc<IntentionSpace>,
    particles: Vec<Particle>,
    rng: ChaCha8Rng,
    step: u64,
}

/// Output of one [`mif_step`].
#[derive(Debug, Clone)]
pub struct MifOutput {
    /// Weight mass per intention after mutation, before reweighting.
    pub predicted: Posterior,
    pub posterior: Posterior,
    pub log_likelihoods: Vec<f64>,
    pub resampled: bool,
    pub reset: bool,
}

impl ParticleSet {
    /// `n` particles spread evenly over the intentions, equal weights.
    pub fn uniform(space: Arc<IntentionSpace>, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(FilterError::InvalidParameter("particle count must be >= 1".into()));
        }
        let m = space.m();
        let w = 1.0 / n as f64;
        let particles = (0..n)
            .map(|i| Particle {
                intention: i % m,
                weight: w,
            })
            .collect();
        Ok(Self {
            space,
            particles,
            rng: ChaCha8Rng::seed_from_u64(seed),
            step: 0,
        })
    }

    pub fn from_particles(space: Arc<IntentionSpace>, particles: Vec<Particle>, seed: u64) -> Result<Self> {
        if particles.is_empty() {
            return Err(FilterError::InvalidParameter("particle count must be >= 1".into()));
        }
        if let Some(p) = particles.iter().find(|p| p.intention >= space.m()) {
            return Err(FilterError::InvalidParameter(format!(
                "particle intention index {} outside space of {}",
                p.intention,
                space.m()
            )));
        }
        let mut set = Self {
            space,
            particles,
            rng: ChaCha8Rng::seed_from_u64(seed),
            step: 0,
        };
        let total: f64 = set.particles.iter().map(|p| p.weight).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(FilterError::InvalidDistribution("particle weights".into()));
        }
        set.particles.iter_mut().for_each(|p| p.weight /= total);
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn space(&self) -> &Arc<IntentionSpace> {
        &self.space
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn effective_sample_size(&self) -> f64 {
        let sq: f64 = self.particles.iter().map(|p| p.weight * p.weight).sum();
        1.0 / sq
    }

    fn reset_uniform(&mut self) {
        let m = self.space.m();
        let w = 1.0 / self.particles.len() as f64;
        for (i, p) in self.particles.iter_mut().enumerate() {
            p.intention = i % m;
            p.weight = w;
        }
    }

    fn mutate(&mut self, transition: &TransitionModel) {
        let m = self.space.m();
        let alpha = transition.alpha();
        for p in &mut self.particles {
            let u: f64 = self.rng.random();
            if u >= alpha {
                // Uniform over the other m - 1 intentions.
                let k = self.rng.random_range(0..m - 1);
                p.intention = if k >= p.intention { k + 1 } else { k };
            }
        }
    }

    fn systematic_resample(&mut self) {
        let n = self.particles.len();
        let u0: f64 = self.rng.random::<f64>() / n as f64;
        let mut out = Vec::with_capacity(n);
        let mut cum = self.particles[0].weight;
        let mut i = 0;
        for k in 0..n {
            let u = u0 + k as f64 / n as f64;
            while u > cum && i < n - 1 {
                i += 1;
                cum += self.particles[i].weight;
            }
            out.push(Particle {
                intention: self.particles[i].intention,
                weight: 1.0 / n as f64,
            });
        }
        self.particles = out;
    }
}

/// Per-intention weight sums.
pub fn mif_posterior(ps: &ParticleSet) -> Posterior {
    let mut mass = vec![0.0; ps.space.m()];
    for p in &ps.particles {
        mass[p.intention] += p.weight;
    }
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|v| *v /= total);
    Posterior::new(ps.space.clone(), mass, ps.step).expect("particle weights are normalised")
}

/// Mutation, reweighting with precomputed per-intention log-likelihoods,
/// normalisation and conditional resampling.
pub fn mif_step_with_log_likelihoods(
    ps: &mut ParticleSet,
    log_likelihoods: &[f64],
    transition: &TransitionModel,
) -> Result<MifOutput> {
    let m = ps.space.m();
    if log_likelihoods.len() != m {
        return Err(FilterError::DimensionMismatch {
            expected: m,
            got: log_likelihoods.len(),
        });
    }
    if transition.m() != m {
        return Err(FilterError::DimensionMismatch {
            expected: m,
            got: transition.m(),
        });
    }
    ps.mutate(transition);
    ps.step += 1;
    let predicted = mif_posterior(ps);

    let lik = scaled_likelihoods(log_likelihoods);
    let mut total = 0.0;
    for p in &mut ps.particles {
        p.weight *= lik[p.intention];
        total += p.weight;
    }
    let mut reset = false;
    if !(total > 0.0) || !total.is_finite() {
        log::warn!("all particle weights vanished at step {}; resetting to uniform", ps.step);
        ps.reset_uniform();
        reset = true;
    } else {
        ps.particles.iter_mut().for_each(|p| p.weight /= total);
    }

    let posterior = mif_posterior(ps);
    let n = ps.particles.len() as f64;
    let resampled = !reset && ps.effective_sample_size() < n / 2.0;
    if resampled {
        ps.systematic_resample();
    }
    Ok(MifOutput {
        predicted,
        posterior,
        log_likelihoods: log_likelihoods.to_vec(),
        resampled,
        reset,
    })
}

/// GILM log-likelihood of the first `tp` new samples under each goal.
pub fn goal_log_likelihoods(
    window: &ObservationWindow,
    goals: &[GoalRegion],
    tp: usize,
    params: &GilmParams,
) -> Result<Vec<f64>> {
    goals
        .iter()
        .map(|g| gilm_log_likelihood(window, g, tp, params))
        .collect()
}

/// One low-level tracking step over `cfg.tp` new observations.
pub fn mif_step(
    ps: &mut ParticleSet,
    window: &ObservationWindow,
    goals: &[GoalRegion],
    cfg: &FilterConfig,
    transition: &TransitionModel,
    params: &GilmParams,
) -> Result<MifOutput> {
    if goals.len() != ps.space.m() {
        return Err(FilterError::DimensionMismatch {
            expected: ps.space.m(),
            got: goals.len(),
        });
    }
    let ll = goal_log_likelihoods(window, goals, cfg.tp, params)?;
    mif_step_with_log_likelihoods(ps, &ll, transition)
}
