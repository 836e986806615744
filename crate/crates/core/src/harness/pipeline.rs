//! One communication round of each aggregation method.
//!
//! A round has a client phase (local training, packing, residual update,
//! sparsification, encoding) and an air phase (pilots, channel estimation,
//! transmission, combining, recovery). New residuals are committed only after
//! the air phase succeeds, so a failed round leaves the state untouched.

use rand::Rng;
use rayon::prelude::*;

use crate::airlink::{power_full, power_sum, transmit};
use crate::channel::{
    generate_channel, make_orthogonal_pilots, pilot_rx_orthogonal, pilot_rx_sum, ChannelRealization, FadingProfile,
};
use crate::coding::{
    carrier, choose_pattern_from_client, encode, make_measurement_matrix, project_onto_pattern, sparsify, split,
    unsplit_to_len, ClientResidual, MeasurementMatrix, PackedUpdate, SparseUpdate,
};
use crate::combining::{blue_combine, genie_aggregate, sum_combine};
use crate::estimation::{estimate_per_client, estimate_sum, SumEstimate};
use crate::harness::config::{ExperimentConfig, MatrixKind, Method};
use crate::harness::partition::{beta_profile_paired, partition_heterogeneous};
use crate::learning::{global_update, local_sgd, Dataset, GlobalSchedule, Model};
use crate::recovery::{recover, RecoveryProblem};
use crate::rng::{Role, SeedTree, SimRng, SERVER};
use crate::{CVec, Error, Result};

/// Radio-side parameters shared by the air phases.
#[derive(Clone, Debug)]
pub struct AirContext {
    pub antennas: usize,
    pub rho: f64,
    pub pilot_len: usize,
    pub profile: FadingProfile,
    pub noiseless: bool,
    pub perfect_csi: bool,
}

impl AirContext {
    pub fn from_config(config: &ExperimentConfig, profile: FadingProfile) -> Self {
        Self {
            antennas: config.antennas,
            rho: config.rho(),
            pilot_len: config.pilot_len,
            profile,
            noiseless: config.noiseless,
            perfect_csi: config.perfect_csi,
        }
    }

    fn clients(&self) -> usize {
        self.profile.len()
    }

    fn noise(&self, seeds: &SeedTree, round: u64, role: Role) -> Option<SimRng> {
        (!self.noiseless).then(|| seeds.stream(round, SERVER, role))
    }

    fn channel(&self, seeds: &SeedTree, round: u64) -> Result<ChannelRealization> {
        let mut rng = seeds.stream(round, SERVER, Role::Channel);
        generate_channel(self.antennas, self.clients(), &self.profile, &mut rng)
    }
}

/// Everything that evolves across rounds.
#[derive(Clone, Debug)]
pub struct FlState {
    pub method: Method,
    pub model: Model,
    pub theta: Vec<f64>,
    pub residuals: Vec<ClientResidual>,
    pub shards: Vec<Dataset>,
    pub weights: Vec<f64>,
    pub air: AirContext,
    pub seeds: SeedTree,
    pub schedule: GlobalSchedule,
    pub sparsity: usize,
    pub samples: usize,
    pub matrix_kind: MatrixKind,
    pub local_iters: usize,
    pub batch_size: usize,
    pub local_lr: f64,
    /// Rounds completed so far; the next round has index `completed + 1`.
    pub completed: u64,
}

/// What one round did.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    pub round: u64,
    /// False when the round was aborted and the model left unchanged.
    pub applied: bool,
    /// Euclidean norm of the aggregated update `Δθ̂`.
    pub update_norm: f64,
}

impl FlState {
    /// Builds the initial state: model from the seed, zero residuals, paired
    /// single-digit shards and the paired fading profile.
    pub fn new(config: &ExperimentConfig, train: &Dataset) -> Result<Self> {
        config.validate()?;
        let shards = partition_heterogeneous(train, config.clients)?;
        let profile = beta_profile_paired(config.clients, config.beta_db_low, config.beta_db_high)?;
        Self::with_shards(config, shards, profile)
    }

    /// Like [`FlState::new`] with caller-provided shards and profile.
    pub fn with_shards(config: &ExperimentConfig, shards: Vec<Dataset>, profile: FadingProfile) -> Result<Self> {
        let k = shards.len();
        if profile.len() != k {
            return Err(Error::dims("fading profile length", k, profile.len()));
        }
        let model = config.build_model()?;
        let seeds = SeedTree::new(config.seed);
        let theta = model.init(&mut seeds.stream(0, SERVER, Role::ModelInit));
        let d = model.num_params();
        let (sparsity, samples) = config.sparsity_and_samples(d);
        let half = d.div_ceil(2);
        Ok(Self {
            method: config.method,
            model,
            theta,
            residuals: vec![ClientResidual::zeros(half); k],
            shards,
            weights: vec![1.0 / k as f64; k],
            air: AirContext::from_config(config, profile),
            seeds,
            schedule: GlobalSchedule::default(),
            sparsity,
            samples,
            matrix_kind: config.measurement,
            local_iters: config.local_iters,
            batch_size: config.batch_size,
            local_lr: config.local_lr,
            completed: 0,
        })
    }

    pub fn clients(&self) -> usize {
        self.shards.len()
    }

    pub fn half_len(&self) -> usize {
        self.theta.len().div_ceil(2)
    }

    /// Runs the next round of the configured method.
    pub fn step(&mut self) -> Result<RoundOutcome> {
        match self.method {
            Method::Blue => run_round_blue(self),
            Method::SumSame => run_round_sum(self, true),
            Method::SumDiff => run_round_sum(self, false),
            Method::Genie => run_round_genie(self),
        }
    }

    fn local_updates(&self, round: u64) -> Result<Vec<Vec<f64>>> {
        (0..self.clients())
            .into_par_iter()
            .map(|k| {
                let mut rng = self.seeds.stream(round, k as u64, Role::LocalTraining);
                local_sgd(
                    &self.model,
                    &self.theta,
                    &self.shards[k],
                    self.local_iters,
                    self.batch_size,
                    self.local_lr,
                    &mut rng,
                )
                .map(|u| u.delta)
            })
            .collect()
    }

    fn measurement_matrix(&self, round: u64, client: u64) -> Result<MeasurementMatrix> {
        let mut rng = self.seeds.stream(round, client, Role::Measurement);
        match self.matrix_kind {
            MatrixKind::Gaussian => make_measurement_matrix(self.samples, self.half_len(), &mut rng),
            MatrixKind::ScaledUnitary => MeasurementMatrix::scaled_unitary(self.half_len(), &mut rng),
        }
    }

    /// Applies `Δθ̂` and the new residuals, or logs and skips an aborted round.
    fn finish(
        &mut self,
        round: u64,
        outcome: Result<(Vec<f64>, Option<Vec<ClientResidual>>)>,
    ) -> Result<RoundOutcome> {
        self.completed = round;
        match outcome {
            Ok((delta_hat, residuals)) => {
                global_update(&mut self.theta, &delta_hat, round, &self.schedule)?;
                if let Some(r) = residuals {
                    self.residuals = r;
                }
                Ok(RoundOutcome {
                    round,
                    applied: true,
                    update_norm: delta_hat.iter().map(|v| v * v).sum::<f64>().sqrt(),
                })
            }
            Err(e @ Error::CombiningFailure { .. }) => {
                log::warn!("round {round} aborted: {e}");
                Ok(RoundOutcome {
                    round,
                    applied: false,
                    update_norm: 0.0,
                })
            }
            Err(e) => Err(e),
        }
    }
}

/// Sparsifies every client on its own top-`S` pattern.
fn sparsify_individually(
    packed: &[PackedUpdate],
    residuals: &[ClientResidual],
    s: usize,
) -> Result<(Vec<SparseUpdate>, Vec<ClientResidual>)> {
    packed
        .iter()
        .zip(residuals)
        .map(|(p, r)| sparsify(p, r, s))
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

/// Sparse BLUE: individual pilots, matrices and full-power transmission;
/// zero-forcing and one recovery per client at the server.
pub fn run_round_blue(state: &mut FlState) -> Result<RoundOutcome> {
    let round = state.completed + 1;
    let deltas = state.local_updates(round)?;
    let real_len = state.theta.len();
    let packed: Vec<PackedUpdate> = deltas.iter().map(|d| split(d)).collect();
    let (sparse, residuals) = sparsify_individually(&packed, &state.residuals, state.sparsity)?;
    let matrices: Vec<MeasurementMatrix> = (0..state.clients())
        .into_par_iter()
        .map(|k| state.measurement_matrix(round, k as u64))
        .collect::<Result<_>>()?;
    let outcome = blue_air_round(&state.air, &sparse, &matrices, state.sparsity, &state.seeds, round).and_then(
        |estimates| {
            let updates: Vec<Vec<f64>> = estimates
                .iter()
                .map(|e| match e {
                    Some(x) => unsplit_to_len(x.as_slice(), real_len),
                    None => vec![0.0; real_len],
                })
                .collect();
            Ok((genie_aggregate(&updates, &state.weights)?, Some(residuals)))
        },
    );
    state.finish(round, outcome)
}

/// Server side of a BLUE round given the clients' sparse vectors and their
/// matrices. Returns the recovered sparse vector of every client, `None` for
/// silent ones.
pub fn blue_air_round(
    air: &AirContext,
    sparse: &[SparseUpdate],
    matrices: &[MeasurementMatrix],
    budget: usize,
    seeds: &SeedTree,
    round: u64,
) -> Result<Vec<Option<CVec>>> {
    let k = air.clients();
    if sparse.len() != k || matrices.len() != k {
        return Err(Error::dims("client count", k, sparse.len().min(matrices.len())));
    }
    let xs: Vec<CVec> = sparse
        .iter()
        .zip(matrices)
        .map(|(s, a)| encode(s, a))
        .collect::<Result<_>>()?;
    let samples = matrices.first().map_or(0, |a| a.samples());
    let alloc = power_full(&xs, samples);

    let channel = air.channel(seeds, round)?;
    let pilots = make_orthogonal_pilots(air.pilot_len, k)?;
    let g_hat = if air.perfect_csi {
        channel.g.clone()
    } else {
        let mut noise = air.noise(seeds, round, Role::PilotNoise);
        let y_p = pilot_rx_orthogonal(&channel, &pilots, air.rho, noise.as_mut())?;
        estimate_per_client(&y_p, &pilots, air.rho, &air.profile)?.g_hat
    };
    let mut noise = air.noise(seeds, round, Role::DataNoise);
    let y = transmit(&xs, &alloc, &channel, air.rho, noise.as_mut())?;
    let combined = blue_combine(&y, &g_hat, &alloc, air.rho)?;

    combined
        .x_hats
        .par_iter()
        .zip(matrices)
        .map(|(x_hat, a)| match x_hat {
            Some(x_hat) => {
                let prob = RecoveryProblem::new(a, x_hat, budget)?;
                Ok(Some(recover(&prob)?.x))
            }
            None => Ok(None),
        })
        .collect()
}

/// Sparse SUM: common pilot, one shared matrix, coordinated power control,
/// conjugate combining and a single recovery of `Σ_k w_k x_k`.
pub fn run_round_sum(state: &mut FlState, same_pattern: bool) -> Result<RoundOutcome> {
    let round = state.completed + 1;
    let deltas = state.local_updates(round)?;
    let real_len = state.theta.len();
    let packed: Vec<PackedUpdate> = deltas.iter().map(|d| split(d)).collect();
    let (sparse, residuals) = if same_pattern {
        let chooser = state
            .seeds
            .stream(round, SERVER, Role::PatternChooser)
            .random_range(0..state.clients());
        let pattern = choose_pattern_from_client(&carrier(&packed[chooser], &state.residuals[chooser])?, state.sparsity);
        packed
            .iter()
            .zip(&state.residuals)
            .map(|(p, r)| project_onto_pattern(p, r, &pattern))
            .collect::<Result<Vec<_>>>()
            .map(|v| v.into_iter().unzip())?
    } else {
        sparsify_individually(&packed, &state.residuals, state.sparsity)?
    };
    let a = state.measurement_matrix(round, SERVER)?;
    let budget = if same_pattern {
        state.sparsity
    } else {
        state.sparsity * state.clients()
    }
    .min(state.half_len());
    let outcome = sum_air_round(&state.air, &sparse, &a, &state.weights, budget, &state.seeds, round)
        .map(|x| (unsplit_to_len(x.as_slice(), real_len), Some(residuals)));
    state.finish(round, outcome)
}

/// Server side of a SUM round. Returns the recovered estimate of
/// `Σ_k w_k x_k^sparse`; a round where nobody transmits yields zero.
pub fn sum_air_round(
    air: &AirContext,
    sparse: &[SparseUpdate],
    a: &MeasurementMatrix,
    weights: &[f64],
    budget: usize,
    seeds: &SeedTree,
    round: u64,
) -> Result<CVec> {
    let k = air.clients();
    if sparse.len() != k {
        return Err(Error::dims("client count", k, sparse.len()));
    }
    let xs: Vec<CVec> = sparse.iter().map(|s| encode(s, a)).collect::<Result<_>>()?;
    let (alloc, eta) = match power_sum(&xs, weights, &air.profile, a.samples()) {
        Ok(v) => v,
        Err(Error::NoTransmission) => return Ok(CVec::zeros(a.half_len())),
        Err(e) => return Err(e),
    };

    let channel = air.channel(seeds, round)?;
    let est = if air.perfect_csi {
        let h_hat_sum = (0..k).fold(CVec::zeros(air.antennas), |acc, i| acc + channel.normalized(i, &air.profile));
        SumEstimate {
            h_hat_sum,
            gamma_bar: k as f64,
        }
    } else {
        let phi = make_orthogonal_pilots(air.pilot_len, 1)?.column(0);
        let mut noise = air.noise(seeds, round, Role::PilotNoise);
        let y_p = pilot_rx_sum(&channel, &phi, air.rho, &air.profile, noise.as_mut())?;
        estimate_sum(&y_p, &phi, air.rho, &air.profile, k)?
    };
    let mut noise = air.noise(seeds, round, Role::DataNoise);
    let y = transmit(&xs, &alloc, &channel, air.rho, noise.as_mut())?;
    let combined = sum_combine(&y, &est, eta, air.rho, k)?;
    let prob = RecoveryProblem::new(a, &combined.x_hat, budget)?;
    Ok(recover(&prob)?.x)
}

/// The genie: exact weighted average of the full local updates.
pub fn run_round_genie(state: &mut FlState) -> Result<RoundOutcome> {
    let round = state.completed + 1;
    let deltas = state.local_updates(round)?;
    let outcome = genie_aggregate(&deltas, &state.weights).map(|d| (d, None));
    state.finish(round, outcome)
}
