//! Cavity mode geometry, figures of merit and optical-conveyor kinematics.

use crate::constants::{LIGHT_SPEED, PLANCK, RB87_MASS};
use crate::{Error, Result};

/// Geometry and rates of the symmetric near-planar cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityGeometry {
    /// Mirror separation, m.
    pub length_m: f64,
    /// Mirror radius of curvature, m.
    pub mirror_radius_m: f64,
    /// Probe wavelength (mode geometry), m.
    pub probe_wavelength_m: f64,
    /// Stabilization/lattice wavelength, m.
    pub stabilization_wavelength_m: f64,
    /// Birefringent splitting of the two principal linear polarizations, MHz.
    pub birefringence_mhz: f64,
    /// Cavity field amplitude decay rate, MHz.
    pub kappa_mhz: f64,
    /// Atomic amplitude decay rate, MHz.
    pub gamma_mhz: f64,
    /// Offset of the effective higher-order transverse mode, MHz.
    pub transverse_offset_mhz: f64,
    /// Coupling of the effective transverse mode relative to the TEM00 mode.
    pub transverse_coupling_ratio: f64,
}

impl Default for CavityGeometry {
    fn default() -> Self {
        CavityGeometry {
            length_m: 176e-6,
            mirror_radius_m: 75e-3,
            probe_wavelength_m: 780e-9,
            stabilization_wavelength_m: 830e-9,
            birefringence_mhz: 1.7,
            kappa_mhz: 1.3,
            gamma_mhz: 3.0,
            transverse_offset_mhz: 18_500.0,
            transverse_coupling_ratio: 1.2,
        }
    }
}

impl CavityGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_m > 0.0 && self.length_m < 2.0 * self.mirror_radius_m) {
            return Err(Error::domain(format!(
                "unstable resonator: need 0 < L < 2R, got L = {} m, R = {} m",
                self.length_m, self.mirror_radius_m
            )));
        }
        if !(self.kappa_mhz > 0.0 && self.gamma_mhz > 0.0) {
            return Err(Error::invalid("kappa and gamma must be positive"));
        }
        if !(self.transverse_offset_mhz > 0.0) {
            return Err(Error::invalid("transverse mode offset must be positive"));
        }
        if !(self.probe_wavelength_m > 0.0 && self.stabilization_wavelength_m > 0.0) {
            return Err(Error::invalid("wavelengths must be positive"));
        }
        Ok(())
    }
}

/// Quantities derived from the resonator geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityDerived {
    /// TEM00 mode waist radius, m.
    pub waist_m: f64,
    /// Free spectral range, MHz.
    pub free_spectral_range_mhz: f64,
    /// Transverse mode spacing from the Gouy phase, MHz.
    pub transverse_spacing_mhz: f64,
}

/// Waist, free spectral range and Gouy-phase transverse spacing.
pub fn cavity_derived(geom: &CavityGeometry) -> Result<CavityDerived> {
    geom.validate()?;
    let l = geom.length_m;
    let r = geom.mirror_radius_m;
    let waist_sq =
        geom.probe_wavelength_m / (2.0 * std::f64::consts::PI) * (l * (2.0 * r - l)).sqrt();
    let fsr_mhz = LIGHT_SPEED / (2.0 * l) / 1e6;
    let gouy = (1.0 - l / r).acos();
    Ok(CavityDerived {
        waist_m: waist_sq.sqrt(),
        free_spectral_range_mhz: fsr_mhz,
        transverse_spacing_mhz: fsr_mhz * gouy / std::f64::consts::PI,
    })
}

/// Critical photon number, collective cooperativity and recoil frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiguresOfMerit {
    /// Critical photon number gamma^2 / (2 g0^2).
    pub critical_photon_number: f64,
    /// Collective cooperativity N g^2 / (2 gamma kappa).
    pub cooperativity: f64,
    /// Recoil energy divided by h, Hz.
    pub recoil_frequency_hz: f64,
}

pub fn figures_of_merit(
    g0_mhz: f64,
    g_eff_mhz: f64,
    atom_number: f64,
    kappa_mhz: f64,
    gamma_mhz: f64,
    wavelength_m: f64,
) -> Result<FiguresOfMerit> {
    for (v, name) in [
        (g0_mhz, "g0"),
        (g_eff_mhz, "g_eff"),
        (atom_number, "N"),
        (kappa_mhz, "kappa"),
        (gamma_mhz, "gamma"),
        (wavelength_m, "wavelength"),
    ] {
        if !(v > 0.0) {
            return Err(Error::invalid(format!("{name} must be positive")));
        }
    }
    Ok(FiguresOfMerit {
        critical_photon_number: gamma_mhz * gamma_mhz / (2.0 * g0_mhz * g0_mhz),
        cooperativity: atom_number * g_eff_mhz * g_eff_mhz / (2.0 * gamma_mhz * kappa_mhz),
        recoil_frequency_hz: PLANCK / (2.0 * RB87_MASS * wavelength_m * wavelength_m),
    })
}

/// Frequency ramp of the moving-lattice transport.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportProfile {
    /// Ramp duration, s.
    pub duration_s: f64,
    /// Peak frequency difference between the two lattice beams, Hz.
    pub delta_max_hz: f64,
    /// Lattice wavelength, m.
    pub wavelength_m: f64,
    /// Number of uniformly spaced trajectory samples.
    pub samples: usize,
}

impl Default for TransportProfile {
    fn default() -> Self {
        TransportProfile {
            duration_s: 0.1,
            delta_max_hz: 1.670e6,
            wavelength_m: 852e-9,
            samples: 1000,
        }
    }
}

/// One sampled point of the transport trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t_s: f64,
    pub delta_hz: f64,
    pub velocity_m_per_s: f64,
    pub acceleration_m_per_s2: f64,
    pub position_m: f64,
}

/// Kinematics of the v = lambda * delta / 2 conveyor under the raised-cosine
/// ramp delta(t) = [1 - cos(2 pi t / T)] delta_max / 2.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportKinematics {
    pub v_max_m_per_s: f64,
    pub a_max_m_per_s2: f64,
    pub distance_m: f64,
    pub trajectory: Vec<TrajectoryPoint>,
}

pub fn transport_kinematics(profile: &TransportProfile) -> Result<TransportKinematics> {
    if !(profile.duration_s > 0.0) {
        return Err(Error::invalid("transport duration must be positive"));
    }
    if profile.delta_max_hz < 0.0 {
        return Err(Error::invalid("delta_max must be nonnegative"));
    }
    if profile.samples < 2 {
        return Err(Error::invalid("need at least two trajectory samples"));
    }
    let (t_total, dmax, lambda) = (
        profile.duration_s,
        profile.delta_max_hz,
        profile.wavelength_m,
    );
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut trajectory = Vec::with_capacity(profile.samples);
    for i in 0..profile.samples {
        let t = t_total * i as f64 / (profile.samples - 1) as f64;
        let phase = two_pi * t / t_total;
        let delta = (1.0 - phase.cos()) * dmax / 2.0;
        let v = lambda * delta / 2.0;
        let a = lambda * dmax / 2.0 * (std::f64::consts::PI / t_total) * phase.sin();
        // x(t) = (lambda dmax / 4) [t - T sin(2 pi t / T) / (2 pi)]
        let x = lambda * dmax / 4.0 * (t - t_total * phase.sin() / two_pi);
        trajectory.push(TrajectoryPoint {
            t_s: t,
            delta_hz: delta,
            velocity_m_per_s: v,
            acceleration_m_per_s2: a,
            position_m: x,
        });
    }
    Ok(TransportKinematics {
        v_max_m_per_s: lambda * dmax / 2.0,
        a_max_m_per_s2: std::f64::consts::PI * lambda * dmax / (2.0 * t_total),
        distance_m: lambda * dmax * t_total / 4.0,
        trajectory,
    })
}
