//! Block-fading Rayleigh channels and pilot reception.
//!
//! Client `k` sees `g_k ~ CN(0, β_k I_M)` for one coherence block. Pilots are
//! either mutually orthonormal columns `φ_k` (one per client) or a single
//! shared column `φ`, in which case every client scales its pilot power by
//! `β_min / β_k` so that the base station observes the normalized channels.

use num_complex::Complex64;
use rand::Rng;

use crate::linalg::{complex_gaussian, gaussian_matrix};
use crate::rng::SimRng;
use crate::{CMat, CVec, Error, Result};

/// Large-scale fading coefficients, linear power gains.
#[derive(Clone, Debug, PartialEq)]
pub struct FadingProfile {
    betas: Vec<f64>,
    beta_min: f64,
}

impl FadingProfile {
    /// Coefficients must be finite and nonnegative. Operations that divide by
    /// `β_k` check strict positivity themselves.
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::invalid("fading profile needs at least one client"));
        }
        if let Some(b) = betas.iter().find(|b| !b.is_finite() || **b < 0.0) {
            return Err(Error::invalid(format!("fading coefficient {b} is not a nonnegative number")));
        }
        let beta_min = betas.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(Self { betas, beta_min })
    }

    pub fn from_db(db: &[f64]) -> Result<Self> {
        Self::new(db.iter().map(|d| 10f64.powf(d / 10.0)).collect())
    }

    pub fn uniform(k: usize, beta: f64) -> Result<Self> {
        Self::new(vec![beta; k])
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn beta(&self, k: usize) -> f64 {
        self.betas[k]
    }

    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub(crate) fn require_positive(&self) -> Result<()> {
        if self.beta_min > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid("operation requires all fading coefficients to be positive"))
        }
    }
}

/// The `M × K` channel matrix `G = [g_1, ..., g_K]` of one coherence block.
#[derive(Clone, Debug)]
pub struct ChannelRealization {
    pub g: CMat,
}

impl ChannelRealization {
    pub fn antennas(&self) -> usize {
        self.g.nrows()
    }

    pub fn clients(&self) -> usize {
        self.g.ncols()
    }

    /// `h_k = g_k / √β_k`, the small-scale part of the channel.
    pub fn normalized(&self, k: usize, profile: &FadingProfile) -> CVec {
        self.g.column(k).unscale(profile.beta(k).sqrt())
    }
}

/// Pilot matrix `Φ` (`τ_p × K`) with orthonormal columns.
#[derive(Clone, Debug)]
pub struct PilotSet {
    pub phi: CMat,
}

impl PilotSet {
    pub fn len(&self) -> usize {
        self.phi.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.nrows() == 0
    }

    pub fn clients(&self) -> usize {
        self.phi.ncols()
    }

    pub fn column(&self, k: usize) -> CVec {
        self.phi.column(k).into_owned()
    }
}

pub fn generate_channel<R: Rng + ?Sized>(
    antennas: usize,
    clients: usize,
    profile: &FadingProfile,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if antennas == 0 || clients == 0 {
        return Err(Error::invalid("channel needs at least one antenna and one client"));
    }
    if profile.len() != clients {
        return Err(Error::dims("fading profile length", clients, profile.len()));
    }
    let mut g = gaussian_matrix(antennas, clients, 1.0, rng);
    for (k, mut col) in g.column_iter_mut().enumerate() {
        col.scale_mut(profile.beta(k).sqrt());
    }
    Ok(ChannelRealization { g })
}

/// Orthonormal pilots from the first `K` columns of the unitary DFT matrix of
/// size `τ_p`.
pub fn make_orthogonal_pilots(tau_p: usize, clients: usize) -> Result<PilotSet> {
    if clients == 0 {
        return Err(Error::invalid("need at least one client"));
    }
    if tau_p < clients {
        return Err(Error::invalid(format!(
            "{clients} orthogonal pilots do not fit in {tau_p} symbols"
        )));
    }
    let scale = 1.0 / (tau_p as f64).sqrt();
    let phi = CMat::from_fn(tau_p, clients, |n, k| {
        // reduce the exponent modulo τ_p before forming the angle
        let e = (n * k) % tau_p;
        Complex64::from_polar(scale, -2.0 * std::f64::consts::PI * e as f64 / tau_p as f64)
    });
    Ok(PilotSet { phi })
}

fn add_noise(y: &mut CMat, noise: Option<&mut SimRng>) {
    if let Some(rng) = noise {
        for z in y.iter_mut() {
            *z += complex_gaussian(rng, 1.0);
        }
    }
}

/// `Y_p = Σ_k √(ρ τ_p) g_k φ_k^H + N_p`. Passing `None` for `noise`
/// suppresses `N_p`.
pub fn pilot_rx_orthogonal(
    channel: &ChannelRealization,
    pilots: &PilotSet,
    rho: f64,
    noise: Option<&mut SimRng>,
) -> Result<CMat> {
    if pilots.clients() != channel.clients() {
        return Err(Error::dims("pilot count", channel.clients(), pilots.clients()));
    }
    let amp = (rho * pilots.len() as f64).sqrt();
    let mut y = (&channel.g * pilots.phi.adjoint()).scale(amp);
    add_noise(&mut y, noise);
    Ok(y)
}

/// Common-pilot reception with client `k` scaling its power by `β_min/β_k`:
/// `Y_p = Σ_k √(ρ τ_p β_min / β_k) g_k φ^H + N_p`.
pub fn pilot_rx_sum(
    channel: &ChannelRealization,
    phi: &CVec,
    rho: f64,
    profile: &FadingProfile,
    noise: Option<&mut SimRng>,
) -> Result<CMat> {
    profile.require_positive()?;
    if profile.len() != channel.clients() {
        return Err(Error::dims("fading profile length", channel.clients(), profile.len()));
    }
    let tau_p = phi.len() as f64;
    let mut sum = CVec::zeros(channel.antennas());
    for k in 0..channel.clients() {
        let amp = (rho * tau_p * profile.beta_min() / profile.beta(k)).sqrt();
        sum.axpy(Complex64::new(amp, 0.0), &channel.g.column(k), Complex64::new(1.0, 0.0));
    }
    let mut y = &sum * phi.adjoint();
    add_noise(&mut y, noise);
    Ok(y)
}
