//! Single-excitation Hamiltonian of the coupled BEC-cavity system and its
//! eigenspectrum.
//!
//! The model keeps two cavity modes (TEM00 plus one effective higher-order
//! transverse mode at offset Delta_t with relative coupling r), both
//! polarizations, and the full Rb-87 D2 Zeeman structure. Everything lives
//! in the single-excitation subspace: one photon in some mode, or one atom
//! promoted out of ground state i into excited state j.
//!
//! Conventions:
//! - Circular channel labels follow the observed splittings: the channel
//!   driven out of |1,-1> by the q = -1 spherical component is the stronger
//!   one and is labeled sigma+. The physical helicity sign relative to the
//!   quantization axis drops out of every observable handled here.
//! - Per-channel couplings are quoted as channel-effective rates: dipole
//!   coefficients are normalized by the quadrature sum of the |1,-1>
//!   reference channel, so g_sigma+- multiplies sqrt(N) directly in the
//!   collective splitting.
//! - The overall -i phase of the interaction is removed by a diagonal gauge
//!   transformation; couplings are stored real in the circular basis.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::atomic::{
    dipole_coefficient, effective_cg, excited_states, ground_states, transition_detuning_mhz,
    HyperfineState,
};
use crate::eigen::{eigensolve_hermitian, EigenDecomposition};
use crate::geometry::CavityGeometry;
use crate::gpe::u0_empirical;
use crate::{Error, Result};

/// Circular detection channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    SigmaPlus,
    SigmaMinus,
}

impl Channel {
    /// Spherical component of the field that drives this channel.
    pub fn q(self) -> i32 {
        match self {
            Channel::SigmaPlus => -1,
            Channel::SigmaMinus => 1,
        }
    }

    pub fn of_q(q: i32) -> Result<Channel> {
        match q {
            -1 => Ok(Channel::SigmaPlus),
            1 => Ok(Channel::SigmaMinus),
            _ => Err(Error::invalid(format!("no circular channel for q = {q}"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Channel::SigmaPlus => "sigma_plus",
            Channel::SigmaMinus => "sigma_minus",
        }
    }
}

/// Photon polarization basis of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarizationBasis {
    /// Circular modes; birefringence ignored (it is three orders below every
    /// other scale in the spectrum).
    Circular,
    /// Linear eigenmodes split by +/- b/2.
    Linear,
}

/// How the condensate-mode overlap entering the couplings is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OverlapModel {
    Fixed(f64),
    /// Evaluate the empirical closed form at the total atom number.
    FromTotalAtomNumber,
}

/// Ground-state populations, indexed by (F, mF) over the eight Zeeman levels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Populations {
    counts: [f64; 8],
}

impl Populations {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Index in the fixed (F, mF) ordering of [`ground_states`].
    fn index(f: u32, m_f: i32) -> Result<usize> {
        let idx = match (f, m_f) {
            (1, -1) => 0,
            (1, 0) => 1,
            (1, 1) => 2,
            (2, m) if (-2..=2).contains(&m) => (5 + m) as usize,
            _ => return Err(Error::invalid(format!("no ground state |{f},{m_f}>"))),
        };
        Ok(idx)
    }

    pub fn set(&mut self, f: u32, m_f: i32, n: f64) -> Result<()> {
        if !(n >= 0.0) || !n.is_finite() {
            return Err(Error::invalid(format!(
                "population of |{f},{m_f}> must be finite and nonnegative, got {n}"
            )));
        }
        self.counts[Self::index(f, m_f)?] = n;
        Ok(())
    }

    pub fn get(&self, f: u32, m_f: i32) -> f64 {
        Self::index(f, m_f).map(|i| self.counts[i]).unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn max_single(&self) -> f64 {
        self.counts.iter().cloned().fold(0.0, f64::max)
    }

    /// Populated states with their counts, in (F, mF) order.
    pub fn occupied(&self) -> Vec<(HyperfineState, f64)> {
        ground_states()
            .into_iter()
            .zip(self.counts)
            .filter(|(_, n)| *n > 0.0)
            .collect()
    }
}

/// Full parameter set of the coupled system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub populations: Populations,
    /// Channel-effective maximum coupling of the sigma+ channel, MHz.
    pub g_sigma_plus_mhz: f64,
    /// Channel-effective maximum coupling of the sigma- channel, MHz.
    pub g_sigma_minus_mhz: f64,
    pub overlap: OverlapModel,
    pub geometry: CavityGeometry,
    /// Cavity detuning from the F=1 -> F'=2 transition, MHz.
    pub delta_c_mhz: f64,
    pub basis: PolarizationBasis,
    pub include_transverse: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        // The reference configuration of the experiment: 154,000 atoms in
        // |1,-1>, 2,700 atoms in |2,-1>, fitted couplings (14.4, 11.3) MHz,
        // transverse mode at 18.5 GHz with relative coupling 1.2.
        let mut populations = Populations::zero();
        populations.set(1, -1, 154_000.0).unwrap();
        populations.set(2, -1, 2_700.0).unwrap();
        SystemConfig {
            populations,
            g_sigma_plus_mhz: 14.4,
            g_sigma_minus_mhz: 11.3,
            overlap: OverlapModel::Fixed(u0_empirical(154_000.0).unwrap()),
            geometry: CavityGeometry::default(),
            delta_c_mhz: 0.0,
            basis: PolarizationBasis::Circular,
            include_transverse: true,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.g_sigma_plus_mhz > 0.0 && self.g_sigma_minus_mhz > 0.0) {
            return Err(Error::invalid("channel couplings must be positive"));
        }
        if let OverlapModel::Fixed(u0) = self.overlap {
            if !(u0 > 0.0 && u0 <= 1.0) {
                return Err(Error::invalid(format!(
                    "overlap must be in (0, 1], got {u0}"
                )));
            }
        }
        Ok(())
    }

    pub fn g_for(&self, channel: Channel) -> f64 {
        match channel {
            Channel::SigmaPlus => self.g_sigma_plus_mhz,
            Channel::SigmaMinus => self.g_sigma_minus_mhz,
        }
    }

    /// Overlap factor used in the couplings.
    pub fn effective_u0(&self) -> Result<f64> {
        match self.overlap {
            OverlapModel::Fixed(u0) => Ok(u0),
            OverlapModel::FromTotalAtomNumber => u0_empirical(self.populations.total().max(1.0)),
        }
    }
}

/// One basis vector of the single-excitation subspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisVector {
    /// One photon in cavity mode `mode` (0 = TEM00, 1 = transverse) with
    /// polarization index `pol` (meaning depends on the polarization basis).
    Photon { mode: u8, pol: u8 },
    /// One atom moved from `ground` to `excited`, all photons in vacuum.
    Atom {
        ground: HyperfineState,
        excited: HyperfineState,
    },
}

/// Ordered single-excitation basis: photons first, then atomic excitations
/// sorted by (ground, excited).
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationBasis {
    pub vectors: Vec<BasisVector>,
    pub photon_count: usize,
}

impl ExcitationBasis {
    pub fn dimension(&self) -> usize {
        self.vectors.len()
    }

    /// Index of the photon state (mode, pol), if present.
    pub fn photon_index(&self, mode: u8, pol: u8) -> Option<usize> {
        self.vectors[..self.photon_count].iter().position(
            |v| matches!(v, BasisVector::Photon { mode: m, pol: p } if *m == mode && *p == pol),
        )
    }
}

/// Enumerate the single-excitation basis for a configuration.
pub fn enumerate_basis(config: &SystemConfig) -> Result<ExcitationBasis> {
    config.validate()?;
    let modes: &[u8] = if config.include_transverse {
        &[0, 1]
    } else {
        &[0]
    };
    let mut vectors = Vec::new();
    for &mode in modes {
        for pol in 0..2u8 {
            vectors.push(BasisVector::Photon { mode, pol });
        }
    }
    let photon_count = vectors.len();

    let mut atomic = Vec::new();
    for (ground, _n) in config.populations.occupied() {
        for excited in excited_states() {
            let coupled = [-1, 1].iter().any(|&q| {
                dipole_coefficient(&ground, &excited, q)
                    .map(|c| c != 0.0)
                    .unwrap_or(false)
            });
            if coupled {
                atomic.push(BasisVector::Atom { ground, excited });
            }
        }
    }
    atomic.sort_by_key(|v| match v {
        BasisVector::Atom { ground, excited } => (ground.key(), excited.key()),
        _ => unreachable!(),
    });
    vectors.extend(atomic);
    Ok(ExcitationBasis {
        vectors,
        photon_count,
    })
}

/// Dipole coefficient normalized so that the |1,-1> reference channel has
/// unit quadrature strength at q, making the configured g values
/// channel-effective rates.
fn normalized_coefficient(ground: &HyperfineState, excited: &HyperfineState, q: i32) -> f64 {
    let reference = HyperfineState::ground(1, -1).unwrap();
    let c = dipole_coefficient(ground, excited, q).unwrap_or(0.0);
    c / effective_cg(&reference, q).unwrap()
}

/// Build the Hamiltonian matrix in MHz at cavity detuning `delta_c_mhz`.
pub fn build_hamiltonian(
    config: &SystemConfig,
    basis: &ExcitationBasis,
    delta_c_mhz: f64,
) -> Result<Array2<Complex64>> {
    let expected = enumerate_basis(config)?;
    if expected != *basis {
        return Err(Error::invalid(
            "basis does not match the configuration it was built from",
        ));
    }
    let n = basis.dimension();
    let mut h = Array2::<Complex64>::zeros((n, n));
    let u0 = config.effective_u0()?;
    let geom = &config.geometry;

    // Diagonal.
    for (idx, vector) in basis.vectors.iter().enumerate() {
        let value = match vector {
            BasisVector::Photon { mode, pol } => {
                let mut v = delta_c_mhz;
                if *mode == 1 {
                    v += geom.transverse_offset_mhz;
                }
                if config.basis == PolarizationBasis::Linear {
                    v += if *pol == 0 { 0.5 } else { -0.5 } * geom.birefringence_mhz;
                }
                v
            }
            BasisVector::Atom { ground, excited } => transition_detuning_mhz(ground, excited),
        };
        h[(idx, idx)] = Complex64::new(value, 0.0);
    }

    // Couplings. In the circular basis, polarization index 0 carries q = -1
    // (the sigma+ channel) and index 1 carries q = +1.
    for (a_idx, vector) in basis.vectors.iter().enumerate().skip(basis.photon_count) {
        let BasisVector::Atom { ground, excited } = vector else {
            continue;
        };
        let n_i = config.populations.get(ground.f, ground.m_f);
        for (p_idx, photon) in basis.vectors[..basis.photon_count].iter().enumerate() {
            let BasisVector::Photon { mode, pol } = photon else {
                continue;
            };
            let mode_scale = if *mode == 1 {
                geom.transverse_coupling_ratio
            } else {
                1.0
            };
            let circular = |q: i32| -> f64 {
                let channel = Channel::of_q(q).unwrap();
                u0 * config.g_for(channel)
                    * normalized_coefficient(ground, excited, q)
                    * n_i.sqrt()
                    * mode_scale
            };
            let coupling = match config.basis {
                PolarizationBasis::Circular => {
                    let q = if *pol == 0 { -1 } else { 1 };
                    Complex64::new(circular(q), 0.0)
                }
                PolarizationBasis::Linear => {
                    // |1_h> = (|1_+> + |1_->)/sqrt(2), |1_v> = -i(|1_+> - |1_->)/sqrt(2)
                    let c_plus = circular(1);
                    let c_minus = circular(-1);
                    let inv = std::f64::consts::FRAC_1_SQRT_2;
                    if *pol == 0 {
                        Complex64::new((c_plus + c_minus) * inv, 0.0)
                    } else {
                        Complex64::new(0.0, -(c_plus - c_minus) * inv)
                    }
                }
            };
            h[(a_idx, p_idx)] = coupling;
            h[(p_idx, a_idx)] = coupling.conj();
        }
    }
    Ok(h)
}

/// Photonic weight of one eigenstate, resolved by circular channel and by
/// the transverse mode.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhotonWeights {
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub transverse: f64,
}

impl PhotonWeights {
    pub fn channel(&self) -> Channel {
        if self.sigma_plus >= self.sigma_minus {
            Channel::SigmaPlus
        } else {
            Channel::SigmaMinus
        }
    }

    pub fn for_channel(&self, channel: Channel) -> f64 {
        match channel {
            Channel::SigmaPlus => self.sigma_plus,
            Channel::SigmaMinus => self.sigma_minus,
        }
    }

    pub fn total_photonic(&self) -> f64 {
        self.sigma_plus + self.sigma_minus + self.transverse
    }
}

/// Circular-channel amplitudes of the photon content of eigenvector `col`.
fn photon_weights(
    config: &SystemConfig,
    basis: &ExcitationBasis,
    vectors: &Array2<Complex64>,
    col: usize,
) -> PhotonWeights {
    let amp = |mode: u8, pol: u8| -> Complex64 {
        basis
            .photon_index(mode, pol)
            .map(|i| vectors[(i, col)])
            .unwrap_or_default()
    };
    let circular_pair = |mode: u8| -> (f64, f64) {
        match config.basis {
            PolarizationBasis::Circular => {
                // pol 0 = q = -1 (sigma+), pol 1 = q = +1 (sigma-).
                (amp(mode, 0).norm_sqr(), amp(mode, 1).norm_sqr())
            }
            PolarizationBasis::Linear => {
                let h = amp(mode, 0);
                let v = amp(mode, 1);
                let inv = std::f64::consts::FRAC_1_SQRT_2;
                let plus = (h - Complex64::i() * v) * inv; // q = +1 amplitude
                let minus = (h + Complex64::i() * v) * inv; // q = -1 amplitude
                (minus.norm_sqr(), plus.norm_sqr())
            }
        }
    };
    let (w_plus0, w_minus0) = circular_pair(0);
    let mut weights = PhotonWeights {
        sigma_plus: w_plus0,
        sigma_minus: w_minus0,
        transverse: 0.0,
    };
    if config.include_transverse {
        let (wp1, wm1) = circular_pair(1);
        weights.transverse = wp1 + wm1;
    }
    weights
}

/// Eigenvalues and photonic weights at one cavity detuning.
#[derive(Debug, Clone)]
pub struct SpectrumPoint {
    pub delta_c_mhz: f64,
    pub values: Vec<f64>,
    pub weights: Vec<PhotonWeights>,
    pub decomposition: EigenDecomposition,
}

/// Solve the coupled system at a single cavity detuning.
pub fn solve_at(
    config: &SystemConfig,
    basis: &ExcitationBasis,
    delta_c_mhz: f64,
) -> Result<SpectrumPoint> {
    let h = build_hamiltonian(config, basis, delta_c_mhz)?;
    let decomposition = eigensolve_hermitian(&h)?;
    let weights = (0..basis.dimension())
        .map(|col| photon_weights(config, basis, &decomposition.vectors, col))
        .collect();
    Ok(SpectrumPoint {
        delta_c_mhz,
        values: decomposition.values.clone(),
        weights,
        decomposition,
    })
}

/// One eigenvalue track across the cavity-detuning grid.
#[derive(Debug, Clone)]
pub struct SpectrumBranch {
    pub branch_id: usize,
    pub delta_c_mhz: Vec<f64>,
    pub delta_p_mhz: Vec<f64>,
    pub weights: Vec<PhotonWeights>,
    pub channel: Channel,
}

/// Minimum-separation report of an avoided crossing.
#[derive(Debug, Clone, Copy)]
pub struct AvoidedCrossing {
    pub channel: Channel,
    /// Cavity detuning at the point of closest approach, MHz.
    pub center_delta_c_mhz: f64,
    /// Minimum branch separation, MHz.
    pub gap_mhz: f64,
    /// Probe detuning at the midpoint of the two branches, MHz.
    pub center_delta_p_mhz: f64,
    /// Horizontal displacement from the bare intersection of the empty-cavity
    /// line with the atomic lines, MHz.
    pub shift_mhz: f64,
}

/// Spectrum over a grid of cavity detunings, organized into branches.
#[derive(Debug, Clone)]
pub struct SpectrumSweep {
    pub branches: Vec<SpectrumBranch>,
}

/// Window in probe detuning holding the F=2 avoided-crossing feature, MHz.
pub const F2_CROSSING_WINDOW_MHZ: (f64, f64) = (-7500.0, -6000.0);

/// Diagonalize across a sorted grid and connect branches by eigenvector
/// overlap between adjacent grid points.
pub fn spectrum_sweep(config: &SystemConfig, grid_mhz: &[f64]) -> Result<SpectrumSweep> {
    if grid_mhz.is_empty() {
        return Err(Error::invalid("cavity-detuning grid is empty"));
    }
    if grid_mhz.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(
            "cavity-detuning grid must be strictly increasing",
        ));
    }
    let basis = enumerate_basis(config)?;
    let points: Result<Vec<SpectrumPoint>> = grid_mhz
        .par_iter()
        .map(|&dc| solve_at(config, &basis, dc))
        .collect();
    let points = points?;
    let dim = basis.dimension();

    // branch_order[t][slot] = eigenstate index at grid point t carried by branch `slot`.
    let mut branch_order: Vec<Vec<usize>> = Vec::with_capacity(points.len());
    branch_order.push((0..dim).collect());
    for t in 1..points.len() {
        let prev = &points[t - 1].decomposition.vectors;
        let next = &points[t].decomposition.vectors;
        // Overlap magnitudes |<v_i(t-1) | v_j(t)>|.
        let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut dot = Complex64::new(0.0, 0.0);
                for k in 0..dim {
                    dot += prev[(k, i)].conj() * next[(k, j)];
                }
                pairs.push((i, j, dot.norm()));
            }
        }
        pairs.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .unwrap()
                .then(a.0.cmp(&b.0))
                .then(a.1.cmp(&b.1))
        });
        let mut from_used = vec![false; dim];
        let mut to_used = vec![false; dim];
        let mut map = vec![usize::MAX; dim];
        for (i, j, _) in pairs {
            if !from_used[i] && !to_used[j] {
                from_used[i] = true;
                to_used[j] = true;
                map[i] = j;
            }
        }
        let prev_order = branch_order.last().unwrap().clone();
        branch_order.push(prev_order.iter().map(|&i| map[i]).collect());
    }

    let mut branches = Vec::with_capacity(dim);
    for slot in 0..dim {
        let mut delta_c = Vec::with_capacity(points.len());
        let mut delta_p = Vec::with_capacity(points.len());
        let mut weights = Vec::with_capacity(points.len());
        let mut w_plus = 0.0;
        let mut w_minus = 0.0;
        for (t, point) in points.iter().enumerate() {
            let idx = branch_order[t][slot];
            delta_c.push(point.delta_c_mhz);
            delta_p.push(point.values[idx]);
            let w = point.weights[idx];
            w_plus += w.sigma_plus;
            w_minus += w.sigma_minus;
            weights.push(w);
        }
        branches.push(SpectrumBranch {
            branch_id: slot,
            delta_c_mhz: delta_c,
            delta_p_mhz: delta_p,
            weights,
            channel: if w_plus >= w_minus {
                Channel::SigmaPlus
            } else {
                Channel::SigmaMinus
            },
        });
    }
    Ok(SpectrumSweep { branches })
}

impl SpectrumSweep {
    /// Locate the avoided crossing of `channel` inside a probe-detuning
    /// window. The crossing pair is identified first: the two adjacent
    /// branches that share the channel's photon weight most evenly (bare
    /// atomic lines carry almost none, so plain minimum-distance search
    /// would lock onto the constant hyperfine spacings instead). The center
    /// and gap are then the minimum separation of that pair.
    pub fn avoided_crossing(
        &self,
        channel: Channel,
        window_mhz: (f64, f64),
    ) -> Option<AvoidedCrossing> {
        let in_channel: Vec<&SpectrumBranch> = self
            .branches
            .iter()
            .filter(|b| b.channel == channel)
            .collect();
        let n_points = self.branches.first()?.delta_c_mhz.len();
        let in_window = |v: f64| v >= window_mhz.0 && v <= window_mhz.1;

        // Most strongly hybridized branch pair anywhere in the window. Weak
        // lines sitting inside the gap would break an adjacency rule, so all
        // pairs compete.
        let mut best_score = 0.0;
        let mut pair: Option<(usize, usize)> = None;
        for t in 0..n_points {
            let states: Vec<(usize, f64, f64)> = in_channel
                .iter()
                .enumerate()
                .map(|(i, b)| (i, b.delta_p_mhz[t], b.weights[t].for_channel(channel)))
                .filter(|(_, v, _)| in_window(*v))
                .collect();
            for (k, a) in states.iter().enumerate() {
                for b in states.iter().skip(k + 1) {
                    let score = a.2.min(b.2);
                    if score > best_score {
                        best_score = score;
                        pair = Some((a.0, b.0));
                    }
                }
            }
        }
        let (ia, ib) = pair?;

        // Closest approach of that branch pair.
        let mut best: Option<AvoidedCrossing> = None;
        for t in 0..n_points {
            let a = in_channel[ia].delta_p_mhz[t];
            let b = in_channel[ib].delta_p_mhz[t];
            if !(in_window(a) && in_window(b)) {
                continue;
            }
            let gap = (a - b).abs();
            if best.map(|x| gap < x.gap_mhz).unwrap_or(true) {
                let center_dc = in_channel[ia].delta_c_mhz[t];
                let mid = 0.5 * (a + b);
                best = Some(AvoidedCrossing {
                    channel,
                    center_delta_c_mhz: center_dc,
                    gap_mhz: gap,
                    center_delta_p_mhz: mid,
                    shift_mhz: center_dc - mid,
                });
            }
        }
        best
    }

    /// The F=2 avoided-crossing feature in its standard window.
    pub fn f2_crossing(&self, channel: Channel) -> Option<AvoidedCrossing> {
        self.avoided_crossing(channel, F2_CROSSING_WINDOW_MHZ)
    }
}

/// Lower resonance branch at zero cavity detuning: full diagonalization next
/// to the closed form U0(N) g sqrt(N) + (U0(N) r g)^2 N / (2 Delta_t).
#[derive(Debug, Clone, Copy)]
pub struct LowerBranch {
    pub channel: Channel,
    pub full_mhz: f64,
    pub closed_form_mhz: f64,
}

pub fn lower_branch_detuning(config: &SystemConfig, channel: Channel) -> Result<LowerBranch> {
    let total = config.populations.total();
    if total <= 0.0 {
        return Err(Error::domain("no atoms: the lower branch is undefined"));
    }
    let dominant = config.populations.max_single();
    if dominant < 0.9 * total {
        return Err(Error::domain(
            "closed form requires a single dominant ground-state population",
        ));
    }
    let basis = enumerate_basis(config)?;
    let point = solve_at(config, &basis, 0.0)?;

    // The measured lower branch is the most photonic eigenstate (in this
    // channel) below the reference transition.
    let mut best: Option<(f64, f64)> = None; // (weight, value)
    for (value, weight) in point.values.iter().zip(&point.weights) {
        if *value < 0.0 {
            let w = weight.for_channel(channel);
            if best.map(|(bw, _)| w > bw).unwrap_or(true) {
                best = Some((w, *value));
            }
        }
    }
    let (_, lower) = best.ok_or_else(|| Error::numeric("no eigenvalue below the reference"))?;

    let u0 = config.effective_u0()?;
    let g = config.g_for(channel);
    let r = config.geometry.transverse_coupling_ratio;
    let delta_t = config.geometry.transverse_offset_mhz;
    let sqrt_term = u0 * g * dominant.sqrt();
    let transverse_term = if config.include_transverse {
        (u0 * r * g).powi(2) * dominant / (2.0 * delta_t)
    } else {
        0.0
    };
    Ok(LowerBranch {
        channel,
        full_mhz: lower.abs(),
        closed_form_mhz: sqrt_term + transverse_term,
    })
}
