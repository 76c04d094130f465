//! The bootstrap particle filter: selection by multinomial resampling at
//! every step, mutation through the signal kernel, and the running
//! normalizing-constant estimate
//!
//! ```text
//! Z_n^N = Z_{n-1}^N * (1/N) sum_j G_{n-1}(xi_{n-1}^j).
//! ```
//!
//! The engine is generic over a [`ParticleModel`] substrate so the same loop
//! runs on finite state spaces (states stored as indices) and on continuous
//! ones (flat per-coordinate storage, mutation into a double buffer).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{FiniteModel, HmmModel};
use crate::stats::log_sum_exp;
use crate::{Error, Result};

/// A reproducible random stream: a master seed plus a stream id. Distinct
/// stream ids give statistically independent streams; the same pair replays
/// the same draws.
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RandomStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Position of the stream in units of 32-bit draws.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random(&mut self.rng)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl std::fmt::Debug for RandomStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "RandomStream(seed={}, stream={}, counter={})",
            self.seed,
            self.stream_id,
            self.counter()
        )
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// What the particle engine needs from a model: initial draws, per-step log
/// potentials `log G_n` and mutation through `M_n`. States are flattened to
/// `state_dim` coordinates; finite models store the state index.
pub trait ParticleModel: Sync {
    fn state_dim(&self) -> usize;
    /// Check that steps `0..n` have defined potentials and kernels.
    fn validate_horizon(&self, n: usize) -> Result<()>;
    fn init_particle(&self, rng: &mut RandomStream, out: &mut [f64]);
    /// `log G_step(x)`; `step` counts from 0.
    fn log_weight(&self, step: usize, x: &[f64]) -> f64;
    /// Draw `X_step ~ M_step(from, .)`; `step` counts from 1.
    fn mutate(&self, step: usize, from: &[f64], rng: &mut RandomStream, out: &mut [f64]);
}

impl ParticleModel for FiniteModel {
    fn state_dim(&self) -> usize {
        1
    }

    fn validate_horizon(&self, n: usize) -> Result<()> {
        if let Some(max) = self.max_horizon() {
            if n > max {
                return Err(Error::InvalidArgument(format!(
                    "horizon {n} exceeds the {max} steps the model defines"
                )));
            }
        }
        Ok(())
    }

    fn init_particle(&self, rng: &mut RandomStream, out: &mut [f64]) {
        let u = rng.uniform();
        let mut acc = 0.0;
        let k = self.dim();
        for (i, &p) in self.initial.iter().enumerate() {
            acc += p;
            if u < acc || i == k - 1 {
                out[0] = i as f64;
                return;
            }
        }
    }

    fn log_weight(&self, step: usize, x: &[f64]) -> f64 {
        self.log_potential(step).expect("validated horizon")[x[0] as usize]
    }

    fn mutate(&self, step: usize, from: &[f64], rng: &mut RandomStream, out: &mut [f64]) {
        let row = self
            .transition(step)
            .expect("validated horizon")
            .row(from[0] as usize);
        let u = rng.uniform();
        let mut acc = 0.0;
        let k = row.len();
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc || j == k - 1 {
                out[0] = j as f64;
                return;
            }
        }
    }
}

/// An [`HmmModel`] bound to a frozen observation record: `G_n(x) = g(x, y_n)`.
pub struct HmmSubstrate<'a> {
    pub model: &'a HmmModel,
    pub ys: &'a [Vec<f64>],
}

impl<'a> HmmSubstrate<'a> {
    pub fn new(model: &'a HmmModel, ys: &'a [Vec<f64>]) -> Self {
        HmmSubstrate { model, ys }
    }
}

impl ParticleModel for HmmSubstrate<'_> {
    fn state_dim(&self) -> usize {
        self.model.dim
    }

    fn validate_horizon(&self, n: usize) -> Result<()> {
        if self.ys.len() < n {
            return Err(Error::InvalidArgument(format!(
                "observation record has {} entries, horizon {n} needs at least {n}",
                self.ys.len()
            )));
        }
        for (i, y) in self.ys.iter().take(n).enumerate() {
            if !self.model.y_star.contains(y) {
                return Err(Error::ObservationSupport(format!(
                    "observation {i} = {y:?} is outside {}",
                    self.model.y_star.describe()
                )));
            }
        }
        Ok(())
    }

    fn init_particle(&self, rng: &mut RandomStream, out: &mut [f64]) {
        self.model.sample_initial(rng, out);
    }

    fn log_weight(&self, step: usize, x: &[f64]) -> f64 {
        self.model.obs_log_lik(x, &self.ys[step])
    }

    fn mutate(&self, _step: usize, from: &[f64], rng: &mut RandomStream, out: &mut [f64]) {
        self.model.sample_signal(from, rng, out);
    }
}

/// One generation of the particle system.
#[derive(Debug, Clone)]
pub struct ParticleState {
    /// Flat positions, `n_particles * dim` coordinates.
    pub positions: Vec<f64>,
    pub dim: usize,
    pub n_particles: usize,
    /// Generation index `n`.
    pub time: usize,
    /// Running `log Z_n^N`.
    pub log_z: f64,
}

impl ParticleState {
    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// `pi_n^N(phi) = (1/N) sum_i phi(xi_n^i)`.
    pub fn estimate(&self, phi: &dyn Fn(&[f64]) -> f64) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n_particles {
            s += phi(self.particle(i));
        }
        s / self.n_particles as f64
    }
}

/// Draw `N` iid particles from the initial law; `Z_0^N = 1`.
pub fn init_particles<M: ParticleModel + ?Sized>(
    model: &M,
    n_particles: usize,
    stream: &mut RandomStream,
) -> Result<ParticleState> {
    if n_particles == 0 {
        return Err(Error::InvalidArgument(
            "particle count must be positive".into(),
        ));
    }
    let dim = model.state_dim();
    let mut positions = vec![0.0; n_particles * dim];
    for i in 0..n_particles {
        model.init_particle(stream, &mut positions[i * dim..(i + 1) * dim]);
    }
    Ok(ParticleState {
        positions,
        dim,
        n_particles,
        time: 0,
        log_z: 0.0,
    })
}

/// Multinomial selection: `n_draws` ancestor indices, iid categorical with
/// probabilities proportional to `exp(log_weights - max)`.
///
/// Implemented by inverse CDF over a single sorted batch of uniforms, so the
/// returned indices are nondecreasing; the multiset has the exact multinomial
/// law.
pub fn multinomial_resample(
    log_weights: &[f64],
    n_draws: usize,
    stream: &mut RandomStream,
) -> Result<Vec<usize>> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical(format!(
            "all {} resampling weights vanished (max log-weight = {max})",
            log_weights.len()
        )));
    }
    let mut cum = Vec::with_capacity(log_weights.len());
    let mut acc = 0.0;
    for &lw in log_weights {
        acc += (lw - max).exp();
        cum.push(acc);
    }
    let total = acc;
    let mut thresholds: Vec<f64> = (0..n_draws).map(|_| stream.uniform() * total).collect();
    thresholds.sort_unstable_by(f64::total_cmp);
    let mut ancestors = Vec::with_capacity(n_draws);
    let mut j = 0;
    let last = log_weights.len() - 1;
    for t in thresholds {
        while j < last && cum[j] <= t {
            j += 1;
        }
        ancestors.push(j);
    }
    Ok(ancestors)
}

/// Advance one step: update `Z^N` with the mean potential of the current
/// generation, select ancestors by multinomial resampling, then mutate.
pub fn step<M: ParticleModel + ?Sized>(
    state: &ParticleState,
    model: &M,
    stream: &mut RandomStream,
) -> Result<ParticleState> {
    let n = state.n_particles;
    let dim = state.dim;
    let log_weights: Vec<f64> = (0..n)
        .map(|i| model.log_weight(state.time, state.particle(i)))
        .collect();
    let lse = log_sum_exp(&log_weights);
    if !lse.is_finite() {
        let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::Numerical(format!(
            "potential underflow at step {}: max log-potential = {max}",
            state.time
        )));
    }
    let log_z = state.log_z + lse - (n as f64).ln();
    let ancestors = multinomial_resample(&log_weights, n, stream)?;
    let mut positions = vec![0.0; n * dim];
    let next_time = state.time + 1;
    for (i, &a) in ancestors.iter().enumerate() {
        model.mutate(
            next_time,
            state.particle(a),
            stream,
            &mut positions[i * dim..(i + 1) * dim],
        );
    }
    Ok(ParticleState {
        positions,
        dim,
        n_particles: n,
        time: next_time,
        log_z,
    })
}

/// Per-step output of [`run_filter`]: `pi_p^N(phi)` for each test function and
/// the running `log Z_p^N`, for `p = 0..=horizon`.
#[derive(Debug, Clone)]
pub struct FilterTrajectory {
    /// `estimates[k][p]` is the estimate of test function `k` at step `p`.
    pub estimates: Vec<Vec<f64>>,
    pub log_z: Vec<f64>,
}

/// Run the filter to `horizon`, reporting estimates at every step. Memory is
/// `O(N)`: positions are overwritten each step.
pub fn run_filter<M: ParticleModel + ?Sized>(
    model: &M,
    n_particles: usize,
    horizon: usize,
    stream: &mut RandomStream,
    phis: &[&(dyn Fn(&[f64]) -> f64 + Sync)],
) -> Result<FilterTrajectory> {
    model.validate_horizon(horizon)?;
    let mut state = init_particles(model, n_particles, stream)?;
    let mut estimates = vec![Vec::with_capacity(horizon + 1); phis.len()];
    let mut log_z = Vec::with_capacity(horizon + 1);
    for (k, phi) in phis.iter().enumerate() {
        estimates[k].push(state.estimate(phi));
    }
    log_z.push(0.0);
    for _ in 0..horizon {
        state = step(&state, model, stream)?;
        for (k, phi) in phis.iter().enumerate() {
            estimates[k].push(state.estimate(phi));
        }
        log_z.push(state.log_z);
    }
    Ok(FilterTrajectory { estimates, log_z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_finite_model, Steps};
    use ndarray::{array, Array1, Array2};

    fn two_state(g: [f64; 2]) -> FiniteModel {
        build_finite_model(
            Steps::Homogeneous(array![[0.9, 0.1], [0.2, 0.8]]),
            Steps::Homogeneous(Array1::from(g.to_vec())),
            array![0.5, 0.5],
            None,
        )
        .unwrap()
    }

    #[test]
    fn streams_replay_and_differ() {
        let mut a = RandomStream::new(42, 0);
        let mut b = RandomStream::new(42, 0);
        let mut c = RandomStream::new(42, 1);
        let xa: Vec<f64> = (0..5).map(|_| a.uniform()).collect();
        let xb: Vec<f64> = (0..5).map(|_| b.uniform()).collect();
        let xc: Vec<f64> = (0..5).map(|_| c.uniform()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn init_point_mass_and_single_particle() {
        let m = build_finite_model(
            Steps::Homogeneous(array![[0.9, 0.1], [0.2, 0.8]]),
            Steps::Homogeneous(array![1.0, 1.0]),
            array![1.0, 0.0],
            None,
        )
        .unwrap();
        let mut s = RandomStream::new(1, 0);
        let st = init_particles(&m, 64, &mut s).unwrap();
        assert!(st.positions.iter().all(|&p| p == 0.0));
        assert_eq!(st.log_z, 0.0);
        let single = init_particles(&m, 1, &mut s).unwrap();
        assert_eq!(single.n_particles, 1);
        assert!(init_particles(&m, 0, &mut s).is_err());
    }

    #[test]
    fn init_replays_identically() {
        let m = two_state([1.0, 1.0]);
        let a = init_particles(&m, 100, &mut RandomStream::new(9, 3)).unwrap();
        let b = init_particles(&m, 100, &mut RandomStream::new(9, 3)).unwrap();
        assert_eq!(a.positions, b.positions);
    }

    #[test]
    fn unit_potential_keeps_log_z_zero() {
        let m = two_state([1.0, 1.0]);
        for n_particles in [1usize, 7, 100] {
            let mut s = RandomStream::new(5, 0);
            let traj = run_filter(&m, n_particles, 25, &mut s, &[]).unwrap();
            assert!(traj.log_z.iter().all(|&z| z == 0.0));
        }
    }

    #[test]
    fn single_particle_log_z_sums_potentials() {
        let m = two_state([2.0, 1.0]);
        let mut s = RandomStream::new(11, 0);
        let mut state = init_particles(&m, 1, &mut s).unwrap();
        let mut expect = 0.0;
        for _ in 0..10 {
            let g = m.potential(state.time).unwrap()[state.positions[0] as usize];
            expect += g.ln();
            state = step(&state, &m, &mut s).unwrap();
            assert!((state.log_z - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_is_exact() {
        let m = two_state([2.0, 1.0]);
        let one: &(dyn Fn(&[f64]) -> f64 + Sync) = &|_x: &[f64]| 1.0;
        let mut s = RandomStream::new(3, 0);
        let traj = run_filter(&m, 50, 20, &mut s, &[one]).unwrap();
        assert!(traj.estimates[0].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn trajectory_is_deterministic() {
        let m = two_state([2.0, 1.0]);
        let phi: &(dyn Fn(&[f64]) -> f64 + Sync) = &|x: &[f64]| x[0];
        let t1 = run_filter(&m, 200, 15, &mut RandomStream::new(1, 4), &[phi]).unwrap();
        let t2 = run_filter(&m, 200, 15, &mut RandomStream::new(1, 4), &[phi]).unwrap();
        assert_eq!(t1.log_z, t2.log_z);
        assert_eq!(t1.estimates, t2.estimates);
    }

    #[test]
    fn resample_uniform_weights_are_symmetric() {
        let mut s = RandomStream::new(17, 0);
        let lw = [0.0, 0.0, 0.0, 0.0];
        let mut counts = [0usize; 4];
        let rounds = 25_000; // 1e5 draws of N = 4
        for _ in 0..rounds {
            for a in multinomial_resample(&lw, 4, &mut s).unwrap() {
                counts[a] += 1;
            }
        }
        let total = (4 * rounds) as f64;
        let p = 0.25;
        let sigma = (p * (1.0 - p) / total).sqrt();
        for &c in &counts {
            let freq = c as f64 / total;
            assert!((freq - p).abs() < 3.0 * sigma, "freq {freq}");
        }
    }

    #[test]
    fn resample_never_selects_zero_weight() {
        let mut s = RandomStream::new(2, 0);
        let lw = [0.0, f64::NEG_INFINITY, -0.5];
        for _ in 0..200 {
            for a in multinomial_resample(&lw, 8, &mut s).unwrap() {
                assert_ne!(a, 1);
            }
        }
        assert!(multinomial_resample(&[f64::NEG_INFINITY; 3], 4, &mut s).is_err());
    }

    #[test]
    fn resample_two_to_one_frequency() {
        // weights proportional to [2, 1]; 1e5 draws of N = 1
        let mut s = RandomStream::new(23, 0);
        let lw = [2.0f64.ln(), 0.0];
        let mut hit = 0usize;
        let draws = 100_000;
        for _ in 0..draws {
            if multinomial_resample(&lw, 1, &mut s).unwrap()[0] == 0 {
                hit += 1;
            }
        }
        let p = 2.0 / 3.0;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        let freq = hit as f64 / draws as f64;
        assert!((freq - p).abs() < 3.0 * sigma, "freq {freq}");
    }

    #[test]
    fn resampled_generation_has_mixture_mean() {
        // Conditional expectation of (1/N) sum phi(xi_n) given the previous
        // generation is  eta^N Q(phi) / eta^N(G).
        let m = two_state([2.0, 1.0]);
        let phi = |x: &[f64]| x[0];
        let prev = ParticleState {
            positions: vec![0.0, 0.0, 1.0, 0.0],
            dim: 1,
            n_particles: 4,
            time: 0,
            log_z: 0.0,
        };
        // Exact conditional expectation from the fixed generation [0,0,1,0].
        let g = m.potential(0).unwrap();
        let tr: &Array2<f64> = m.transition(1).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in [0usize, 0, 1, 0] {
            den += g[i];
            num += g[i] * (tr[(i, 0)] * 0.0 + tr[(i, 1)] * 1.0);
        }
        let expect = num / den;
        let replicates = 100_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for r in 0..replicates {
            let mut s = RandomStream::new(31, r as u64);
            let next = step(&prev, &m, &mut s).unwrap();
            let v = next.estimate(&phi);
            acc += v;
            acc2 += v * v;
        }
        let mean = acc / replicates as f64;
        let var = (acc2 / replicates as f64 - mean * mean).max(0.0);
        let sigma = (var / replicates as f64).sqrt();
        assert!(
            (mean - expect).abs() < 3.0 * sigma.max(1e-6),
            "mean {mean} expect {expect}"
        );
    }

    #[test]
    fn z_mean_matches_exact_lambda0() {
        // E[Z_1^N] = mu(G_0) = 1.5 on the two-state model.
        let m = two_state([2.0, 1.0]);
        let replicates = 10_000usize;
        let n_particles = 100;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for r in 0..replicates {
            let mut s = RandomStream::new(77, r as u64);
            let t = run_filter(&m, n_particles, 1, &mut s, &[]).unwrap();
            let z = t.log_z[1].exp();
            acc += z;
            acc2 += z * z;
        }
        let mean = acc / replicates as f64;
        let var = (acc2 / replicates as f64 - mean * mean).max(0.0);
        let se = (var / replicates as f64).sqrt();
        assert!((mean - 1.5).abs() < 3.0 * se, "mean {mean}, se {se}");
    }
}
