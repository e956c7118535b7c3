//! Condensate ground states and the condensate-mode overlap factor.
//!
//! The ground state of the Gross-Pitaevskii equation in the crossed dipole
//! trap plus the intracavity standing-wave lattice is found by imaginary-time
//! split-step propagation: the kinetic half acts in momentum space through
//! FFTs, the potential and interaction halves act pointwise, and the state
//! is renormalized after every step.
//!
//! Coordinate convention: the cavity/lattice/probe axis is x, the weak trap
//! axis (horizontal dipole beam) is y. Energies are quoted as ordinary
//! frequencies in Hz (E/h); lengths are in meters.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::constants::{HBAR, PLANCK, RB87_MASS, RB87_SCATTERING_LENGTH};
use crate::{Error, Result};

/// Trap, lattice and probe-mode parameters for one ground-state solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapConfig {
    /// Trap frequencies omega/2pi along (x, y, z), Hz.
    pub frequencies_hz: [f64; 3],
    /// Lattice depth in units of the recoil energy at the lattice wavelength.
    pub lattice_depth_erec: f64,
    /// Lattice (stabilization) wavelength, m. The lattice lies along x.
    pub lattice_wavelength_m: f64,
    /// Probe mode waist, m.
    pub probe_waist_m: f64,
    /// Probe wavelength, m.
    pub probe_wavelength_m: f64,
    pub atom_number: f64,
    pub scattering_length_m: f64,
    pub grid: GridSpec,
}

impl Default for TrapConfig {
    fn default() -> Self {
        TrapConfig {
            frequencies_hz: [290.0, 43.0, 277.0],
            lattice_depth_erec: 2.4,
            lattice_wavelength_m: 830e-9,
            probe_waist_m: 25e-6,
            probe_wavelength_m: 780e-9,
            atom_number: 2.2e5,
            scattering_length_m: RB87_SCATTERING_LENGTH,
            grid: GridSpec::Auto,
        }
    }
}

impl TrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frequencies_hz.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::invalid("trap frequencies must be positive"));
        }
        if self.lattice_depth_erec < 0.0 {
            return Err(Error::invalid("lattice depth must be nonnegative"));
        }
        if !(self.atom_number > 0.0) {
            return Err(Error::invalid("atom number must be positive"));
        }
        if self.scattering_length_m < 0.0 {
            return Err(Error::invalid("scattering length must be nonnegative"));
        }
        if !(self.probe_waist_m > 0.0 && self.lattice_wavelength_m > 0.0) {
            return Err(Error::invalid("lengths must be positive"));
        }
        Ok(())
    }

    /// Recoil frequency h / (2 m lambda^2) at the lattice wavelength, Hz.
    pub fn recoil_frequency_hz(&self) -> f64 {
        PLANCK / (2.0 * RB87_MASS * self.lattice_wavelength_m * self.lattice_wavelength_m)
    }
}

/// Grid selection: automatic sizing from a Thomas-Fermi pre-estimate, pinned
/// point counts with automatic extents, or everything explicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    Auto,
    Points([usize; 3]),
    Explicit {
        points: [usize; 3],
        extents_m: [f64; 3],
    },
}

/// Concrete simulation grid; extents are full widths centered on the trap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub points: [usize; 3],
    pub extents_m: [f64; 3],
}

impl Grid {
    pub fn steps_m(&self) -> [f64; 3] {
        [
            self.extents_m[0] / self.points[0] as f64,
            self.extents_m[1] / self.points[1] as f64,
            self.extents_m[2] / self.points[2] as f64,
        ]
    }

    pub fn len(&self) -> usize {
        self.points[0] * self.points[1] * self.points[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume_element_m3(&self) -> f64 {
        let d = self.steps_m();
        d[0] * d[1] * d[2]
    }

    /// Coordinate of index i along an axis, centered on the grid.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let d = self.steps_m()[axis];
        (i as f64 - (self.points[axis] / 2) as f64) * d
    }
}

/// Default point counts (x, y, z); x is finest because it must resolve the
/// lattice period.
const DEFAULT_POINTS: [usize; 3] = [192, 64, 64];
/// Sizes with only 2, 3, 5 factors keep the FFTs fast.
const NICE_SIZES: [usize; 26] = [
    16, 20, 24, 30, 32, 36, 40, 48, 54, 60, 64, 72, 80, 90, 96, 108, 120, 128, 144, 160, 180, 192,
    216, 240, 256, 288,
];
/// Minimum sampling of the standing-wave period.
const MIN_POINTS_PER_LATTICE_PERIOD: f64 = 4.0;

fn nice_at_least(n: usize) -> Result<usize> {
    NICE_SIZES
        .iter()
        .copied()
        .find(|&s| s >= n)
        .ok_or_else(|| Error::invalid(format!("grid axis would need {n} points (max 288)")))
}

/// Harmonic-trap Thomas-Fermi chemical potential, Hz.
pub fn thomas_fermi_mu_hz(trap: &TrapConfig) -> f64 {
    let omega_bar = 2.0
        * std::f64::consts::PI
        * (trap.frequencies_hz[0] * trap.frequencies_hz[1] * trap.frequencies_hz[2])
            .powf(1.0 / 3.0);
    let a_bar = (HBAR / (RB87_MASS * omega_bar)).sqrt();
    let parameter = 15.0 * trap.atom_number * trap.scattering_length_m / a_bar;
    if parameter <= 0.0 {
        return 0.0;
    }
    omega_bar / (4.0 * std::f64::consts::PI) * parameter.powf(0.4)
}

/// Resolve a [`GridSpec`] against the trap: extents cover at least four
/// Thomas-Fermi radii (with an oscillator-length floor) and the lattice axis
/// keeps at least four points per standing-wave period.
pub fn resolve_grid(trap: &TrapConfig) -> Result<Grid> {
    trap.validate()?;
    // Pre-estimate of the chemical potential, including the mean lattice
    // offset, to size the box.
    let mu_est_hz = thomas_fermi_mu_hz(trap).max(trap.frequencies_hz.iter().sum::<f64>() / 2.0)
        + 0.5 * trap.lattice_depth_erec * trap.recoil_frequency_hz();
    let mut extents = [0.0; 3];
    for axis in 0..3 {
        let omega = 2.0 * std::f64::consts::PI * trap.frequencies_hz[axis];
        let r_tf = (2.0 * PLANCK * mu_est_hz / (RB87_MASS * omega * omega)).sqrt();
        let a_ho = (HBAR / (RB87_MASS * omega)).sqrt();
        extents[axis] = (4.0 * r_tf).max(10.0 * a_ho);
    }

    let lattice_period = trap.lattice_wavelength_m / 2.0;
    let max_dx = lattice_period / MIN_POINTS_PER_LATTICE_PERIOD;

    let grid = match trap.grid {
        GridSpec::Auto => {
            let mut points = DEFAULT_POINTS;
            if trap.lattice_depth_erec > 0.0 {
                let needed = (extents[0] / max_dx).ceil() as usize;
                points[0] = nice_at_least(points[0].max(needed))?;
            }
            Grid {
                points,
                extents_m: extents,
            }
        }
        GridSpec::Points(points) => Grid {
            points,
            extents_m: extents,
        },
        GridSpec::Explicit { points, extents_m } => Grid { points, extents_m },
    };

    if grid.points.iter().any(|&p| p < 8) {
        return Err(Error::invalid("each grid axis needs at least 8 points"));
    }
    if trap.lattice_depth_erec > 0.0 {
        let dx = grid.steps_m()[0];
        let per_period = lattice_period / dx;
        if per_period < MIN_POINTS_PER_LATTICE_PERIOD {
            return Err(Error::invalid(format!(
                "grid too coarse: {per_period:.2} points per lattice period (need >= 4)"
            )));
        }
    }
    Ok(grid)
}

/// Convergence and stepping controls for the imaginary-time evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative chemical-potential plateau target over [`Self::window_steps`].
    pub mu_rel_tol: f64,
    pub max_steps: usize,
    /// Large step used to burn in from the Thomas-Fermi start.
    pub coarse_dtau_s: f64,
    /// Step used for the converged phase.
    pub fine_dtau_s: f64,
    /// Steps between chemical-potential evaluations.
    pub check_interval: usize,
    /// Plateau window, in steps.
    pub window_steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mu_rel_tol: 1e-9,
            max_steps: 100_000,
            coarse_dtau_s: 1.2e-5,
            fine_dtau_s: 3.0e-6,
            check_interval: 5,
            window_steps: 50,
        }
    }
}

/// Energy breakdown of a converged state, Hz per particle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub kinetic_hz: f64,
    pub harmonic_hz: f64,
    pub lattice_hz: f64,
    pub interaction_hz: f64,
}

/// Iteration diagnostics attached to a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub steps: usize,
    pub final_mu_change_rel: f64,
}

/// Ground-state solution on its grid.
#[derive(Debug, Clone)]
pub struct CondensateSolution {
    pub grid: Grid,
    /// |psi|^2, normalized so that sum * dV = 1.
    pub density: Vec<f64>,
    pub mu_hz: f64,
    pub energy_per_particle_hz: f64,
    pub energies: EnergyBreakdown,
    pub report: ConvergenceReport,
    pub atom_number: f64,
}

struct Workspace {
    grid: Grid,
    /// Static external potential, Hz.
    potential_hz: Vec<f64>,
    /// Kinetic frequencies h k^2 / (8 pi^2 m) on the FFT grid, Hz.
    kinetic_hz: Vec<f64>,
    /// Interaction scale gamma = 2 hbar a N / m, Hz m^3.
    gamma_int: f64,
    ffts: Fft3,
}

impl Workspace {
    fn new(trap: &TrapConfig, grid: Grid) -> Self {
        let [nx, ny, nz] = grid.points;
        let e_rec = trap.recoil_frequency_hz();
        let k_lattice = 2.0 * std::f64::consts::PI / trap.lattice_wavelength_m;
        let mut potential = vec![0.0f64; grid.len()];
        let omegas: Vec<f64> = trap
            .frequencies_hz
            .iter()
            .map(|f| 2.0 * std::f64::consts::PI * f)
            .collect();
        let harm = |axis: usize, coord: f64| -> f64 {
            RB87_MASS * omegas[axis] * omegas[axis] * coord * coord / (2.0 * PLANCK)
        };
        for ix in 0..nx {
            let x = grid.coord(0, ix);
            let vx = harm(0, x) + trap.lattice_depth_erec * e_rec * (k_lattice * x).sin().powi(2);
            for iy in 0..ny {
                let vy = harm(1, grid.coord(1, iy));
                for iz in 0..nz {
                    let vz = harm(2, grid.coord(2, iz));
                    potential[(ix * ny + iy) * nz + iz] = vx + vy + vz;
                }
            }
        }

        let d = grid.steps_m();
        let freq = |n: usize, i: usize, dx: f64| -> f64 {
            let signed = if i <= n / 2 {
                i as f64
            } else {
                i as f64 - n as f64
            };
            2.0 * std::f64::consts::PI * signed / (n as f64 * dx)
        };
        let mut kinetic = vec![0.0f64; grid.len()];
        for ix in 0..nx {
            let kx = freq(nx, ix, d[0]);
            for iy in 0..ny {
                let ky = freq(ny, iy, d[1]);
                for iz in 0..nz {
                    let kz = freq(nz, iz, d[2]);
                    let k2 = kx * kx + ky * ky + kz * kz;
                    kinetic[(ix * ny + iy) * nz + iz] =
                        HBAR * k2 / (4.0 * std::f64::consts::PI * RB87_MASS);
                }
            }
        }

        Workspace {
            grid,
            potential_hz: potential,
            kinetic_hz: kinetic,
            gamma_int: 2.0 * HBAR * trap.scattering_length_m * trap.atom_number / RB87_MASS,
            ffts: Fft3::new(grid.points),
        }
    }

    /// Thomas-Fermi start in the full potential; falls back to a Gaussian
    /// when interactions vanish.
    fn initial_state(&self) -> Vec<Complex64> {
        let dv = self.grid.volume_element_m3();
        if self.gamma_int > 0.0 {
            // Bisect mu so that the TF density integrates to one.
            let norm_at = |mu: f64| -> f64 {
                self.potential_hz
                    .iter()
                    .map(|&v| (mu - v).max(0.0))
                    .sum::<f64>()
                    * dv
                    / self.gamma_int
            };
            let mut lo = *self
                .potential_hz
                .iter()
                .min_by(|a, b| a.partial_cmp(b).unwrap())
                .unwrap();
            let mut hi = lo + 1.0;
            while norm_at(hi) < 1.0 {
                hi = lo + (hi - lo) * 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if norm_at(mid) < 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mu = 0.5 * (lo + hi);
            self.potential_hz
                .iter()
                .map(|&v| Complex64::new(((mu - v).max(0.0) / self.gamma_int).sqrt(), 0.0))
                .collect()
        } else {
            // Non-interacting case: a broad Gaussian-like seed from the
            // potential itself. The width is deliberately loose; imaginary
            // time contracts it onto the oscillator ground state.
            self.potential_hz
                .iter()
                .map(|&v| Complex64::new((-v * 2e-3).exp(), 0.0))
                .collect()
        }
    }

    fn normalize(&self, psi: &mut [Complex64]) {
        let dv = self.grid.volume_element_m3();
        let norm: f64 = psi.par_iter().map(|z| z.norm_sqr()).sum::<f64>() * dv;
        let scale = 1.0 / norm.sqrt();
        psi.par_iter_mut().for_each(|z| *z *= scale);
    }

    /// Chemical potential and energy split of the current (normalized) state.
    fn observables(
        &self,
        psi: &[Complex64],
        scratch: &mut Vec<Complex64>,
    ) -> (f64, f64, EnergyBreakdown) {
        let dv = self.grid.volume_element_m3();
        let (mut v_tot, mut e_int) = (0.0f64, 0.0f64);
        for (z, &v) in psi.iter().zip(&self.potential_hz) {
            let n = z.norm_sqr();
            v_tot += v * n;
            e_int += n * n;
        }
        v_tot *= dv;
        e_int *= 0.5 * self.gamma_int * dv;

        scratch.clear();
        scratch.extend_from_slice(psi);
        self.ffts.forward(scratch);
        let mut t_num = 0.0f64;
        let mut t_den = 0.0f64;
        for (z, &t) in scratch.iter().zip(&self.kinetic_hz) {
            let n = z.norm_sqr();
            t_num += t * n;
            t_den += n;
        }
        let kinetic = t_num / t_den;

        // Split the external potential into its harmonic and lattice parts
        // for the virial diagnostics: recompute the lattice part directly.
        let mu = kinetic + v_tot + 2.0 * e_int;
        let energy = kinetic + v_tot + e_int;
        (
            mu,
            energy,
            EnergyBreakdown {
                kinetic_hz: kinetic,
                harmonic_hz: v_tot, // refined by the caller when a lattice is present
                lattice_hz: 0.0,
                interaction_hz: e_int,
            },
        )
    }
}

/// Solve for the ground state with default stepping options.
pub fn solve_ground_state(trap: &TrapConfig) -> Result<CondensateSolution> {
    solve_ground_state_with(trap, &SolveOptions::default())
}

pub fn solve_ground_state_with(
    trap: &TrapConfig,
    options: &SolveOptions,
) -> Result<CondensateSolution> {
    let grid = resolve_grid(trap)?;
    let ws = Workspace::new(trap, grid);
    let mut psi = ws.initial_state();
    ws.normalize(&mut psi);

    let mut scratch = Vec::with_capacity(psi.len());
    let mut steps_done = 0usize;
    let mut last_change = f64::INFINITY;
    let mut converged = false;

    // Two stages: a coarse burn-in to a loose plateau, then the fine step to
    // the requested tolerance.
    let stages = [
        (options.coarse_dtau_s, options.mu_rel_tol.max(1e-7) * 100.0),
        (options.fine_dtau_s, options.mu_rel_tol),
    ];
    'stages: for &(dtau, tol) in &stages {
        let exp_v: Vec<f64> = ws
            .potential_hz
            .par_iter()
            .map(|&v| (-std::f64::consts::PI * v * dtau).exp()) // half step: 2 pi v dtau / 2
            .collect();
        let exp_t: Vec<f64> = ws
            .kinetic_hz
            .par_iter()
            .map(|&t| (-2.0 * std::f64::consts::PI * t * dtau).exp())
            .collect();
        let int_scale = std::f64::consts::PI * ws.gamma_int * dtau;

        let mut history: Vec<(usize, f64)> = Vec::new();
        loop {
            if steps_done >= options.max_steps {
                break 'stages;
            }
            // Potential + interaction half step.
            psi.par_iter_mut().zip(&exp_v).for_each(|(z, &ev)| {
                let factor = ev * (-int_scale * z.norm_sqr()).exp();
                *z *= factor;
            });
            // Kinetic full step in momentum space.
            ws.ffts.forward(&mut psi);
            psi.par_iter_mut().zip(&exp_t).for_each(|(z, &et)| *z *= et);
            ws.ffts.inverse(&mut psi);
            // Second potential half step.
            psi.par_iter_mut().zip(&exp_v).for_each(|(z, &ev)| {
                let factor = ev * (-int_scale * z.norm_sqr()).exp();
                *z *= factor;
            });
            ws.normalize(&mut psi);
            steps_done += 1;

            if steps_done % options.check_interval == 0 {
                let (mu, _, _) = ws.observables(&psi, &mut scratch);
                history.push((steps_done, mu));
                if let Some(&(old_step, old_mu)) = history
                    .iter()
                    .rev()
                    .find(|(s, _)| steps_done - s >= options.window_steps)
                {
                    debug_assert!(steps_done - old_step >= options.window_steps);
                    last_change = ((mu - old_mu) / mu).abs();
                    if last_change < tol {
                        if tol <= options.mu_rel_tol {
                            converged = true;
                            break 'stages;
                        }
                        break; // burn-in stage done
                    }
                }
                if !mu.is_finite() {
                    return Err(Error::numeric(format!(
                        "chemical potential became non-finite after {steps_done} steps"
                    )));
                }
            }
        }
    }

    if !converged {
        return Err(Error::numeric(format!(
            "imaginary-time evolution did not reach a relative mu plateau of {:.1e} within {} steps (last change {:.3e})",
            options.mu_rel_tol, options.max_steps, last_change
        )));
    }

    let (mu, energy, mut energies) = ws.observables(&psi, &mut scratch);
    // Separate harmonic and lattice contributions for the diagnostics.
    if trap.lattice_depth_erec > 0.0 {
        let e_rec = trap.recoil_frequency_hz();
        let k_lattice = 2.0 * std::f64::consts::PI / trap.lattice_wavelength_m;
        let [_, ny, nz] = [grid.points[0], grid.points[1], grid.points[2]];
        let dv = grid.volume_element_m3();
        let mut lattice = 0.0f64;
        for (idx, z) in psi.iter().enumerate() {
            let ix = idx / (ny * nz);
            let x = grid.coord(0, ix);
            lattice +=
                trap.lattice_depth_erec * e_rec * (k_lattice * x).sin().powi(2) * z.norm_sqr();
        }
        lattice *= dv;
        energies.lattice_hz = lattice;
        energies.harmonic_hz -= lattice;
    }

    let dv = grid.volume_element_m3();
    let density: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = density.iter().sum::<f64>() * dv;
    debug_assert!((total - 1.0).abs() < 1e-10);

    Ok(CondensateSolution {
        grid,
        density,
        mu_hz: mu,
        energy_per_particle_hz: energy,
        energies,
        report: ConvergenceReport {
            converged,
            steps: steps_done,
            final_mu_change_rel: last_change,
        },
        atom_number: trap.atom_number,
    })
}

/// Condensate-mode overlap U0 = sqrt(0.5 * integral |psi|^2 exp(-2 rho^2/w^2)),
/// with rho the distance from the cavity axis. The factor 0.5 is the axial
/// average of cos^2 over the incommensurate probe standing wave. The cavity
/// axis is x by construction, so `axis` must be 0.
pub fn overlap_factor(solution: &CondensateSolution, waist_m: f64, axis: usize) -> Result<f64> {
    if axis != 0 {
        return Err(Error::invalid(
            "the cavity axis is x (axis 0) in this geometry",
        ));
    }
    if !(waist_m > 0.0) {
        return Err(Error::invalid("waist must be positive"));
    }
    let grid = &solution.grid;
    let [nx, ny, nz] = grid.points;
    let dv = grid.volume_element_m3();
    let mut acc = 0.0f64;
    for ix in 0..nx {
        for iy in 0..ny {
            let y = grid.coord(1, iy);
            for iz in 0..nz {
                let z = grid.coord(2, iz);
                let rho2 = y * y + z * z;
                let envelope = (-2.0 * rho2 / (waist_m * waist_m)).exp();
                acc += solution.density[(ix * ny + iy) * nz + iz] * envelope;
            }
        }
    }
    Ok((0.5 * acc * dv).sqrt())
}

/// Empirical overlap law sqrt(0.5) (1 - 0.0017 N^0.34).
pub fn u0_empirical(atom_number: f64) -> Result<f64> {
    if !(atom_number >= 1.0) {
        return Err(Error::invalid("atom number must be at least 1"));
    }
    let value = 0.5f64.sqrt() * (1.0 - 0.0017 * atom_number.powf(0.34));
    if value <= 0.0 {
        return Err(Error::domain(format!(
            "empirical overlap law leaves its validity range at N = {atom_number:.3e}"
        )));
    }
    Ok(value)
}

/// Solve the ground state over a list of atom numbers and report the solver
/// overlap next to the empirical law.
pub fn u0_sweep(
    base: &TrapConfig,
    options: &SolveOptions,
    atom_numbers: &[f64],
) -> Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::with_capacity(atom_numbers.len());
    for &n in atom_numbers {
        let trap = TrapConfig {
            atom_number: n,
            ..base.clone()
        };
        let solution = solve_ground_state_with(&trap, options)?;
        let u0 = overlap_factor(&solution, trap.probe_waist_m, 0)?;
        rows.push((n, u0, u0_empirical(n)?));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// 3D FFT on a flat row-major array.

struct Fft3 {
    points: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    fn new(points: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = [
            planner.plan_fft_forward(points[0]),
            planner.plan_fft_forward(points[1]),
            planner.plan_fft_forward(points[2]),
        ];
        let inverse = [
            planner.plan_fft_inverse(points[0]),
            planner.plan_fft_inverse(points[1]),
            planner.plan_fft_inverse(points[2]),
        ];
        Fft3 {
            points,
            forward,
            inverse,
        }
    }

    /// Unnormalized forward transform along all three axes.
    fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, true);
    }

    /// Inverse transform including the 1/(nx ny nz) normalization, so that
    /// inverse(forward(x)) == x.
    fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, false);
        let scale = 1.0 / self.points.iter().product::<usize>() as f64;
        data.par_iter_mut().for_each(|z| *z *= scale);
    }

    fn apply(&self, data: &mut [Complex64], fwd: bool) {
        let [nx, ny, nz] = self.points;
        let plans = if fwd { &self.forward } else { &self.inverse };

        // Axis 2: contiguous lines.
        data.par_chunks_mut(nz).for_each_init(
            || vec![Complex64::default(); plans[2].get_inplace_scratch_len()],
            |scratch, line| plans[2].process_with_scratch(line, scratch),
        );

        // Axis 1: stride nz within each x-slab.
        data.par_chunks_mut(ny * nz).for_each_init(
            || {
                (
                    vec![Complex64::default(); ny],
                    vec![Complex64::default(); plans[1].get_inplace_scratch_len()],
                )
            },
            |(line, scratch), slab| {
                for iz in 0..nz {
                    for iy in 0..ny {
                        line[iy] = slab[iy * nz + iz];
                    }
                    plans[1].process_with_scratch(line, scratch);
                    for iy in 0..ny {
                        slab[iy * nz + iz] = line[iy];
                    }
                }
            },
        );

        // Axis 0: stride ny*nz; parallelize over the (y, z) plane by handing
        // each thread its own gathered lines.
        let plane = ny * nz;
        let data_ptr = SendPtr(data.as_mut_ptr());
        (0..plane).into_par_iter().for_each_init(
            || {
                (
                    vec![Complex64::default(); nx],
                    vec![Complex64::default(); plans[0].get_inplace_scratch_len()],
                )
            },
            |(line, scratch), yz| {
                let base = data_ptr;
                // Safety: each yz index touches a disjoint set of elements
                // (base + yz + ix*plane), so the mutable accesses never alias.
                unsafe {
                    for ix in 0..nx {
                        line[ix] = *base.0.add(yz + ix * plane);
                    }
                    plans[0].process_with_scratch(line, scratch);
                    for ix in 0..nx {
                        *base.0.add(yz + ix * plane) = line[ix];
                    }
                }
            },
        );
    }
}

#[derive(Clone, Copy)]
struct SendPtr(*mut Complex64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_options() -> SolveOptions {
        SolveOptions {
            mu_rel_tol: 1e-9,
            max_steps: 60_000,
            coarse_dtau_s: 1.5e-5,
            fine_dtau_s: 4e-6,
            ..SolveOptions::default()
        }
    }

    #[test]
    fn fft_round_trip() {
        let points = [12, 8, 10];
        let ffts = Fft3::new(points);
        let n = points.iter().product::<usize>();
        let mut data: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let original = data.clone();
        ffts.forward(&mut data);
        ffts.inverse(&mut data);
        for (a, b) in data.iter().zip(&original) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn ideal_gas_ground_state() {
        // No interactions, no lattice: mu is the oscillator zero point.
        let trap = TrapConfig {
            atom_number: 1.0,
            scattering_length_m: 0.0,
            lattice_depth_erec: 0.0,
            grid: GridSpec::Points([32, 32, 32]),
            ..TrapConfig::default()
        };
        let sol = solve_ground_state_with(&trap, &small_options()).unwrap();
        let expected = trap.frequencies_hz.iter().sum::<f64>() / 2.0;
        assert_abs_diff_eq!(sol.mu_hz, expected, epsilon = 0.02 * expected);
        assert_abs_diff_eq!(
            sol.energy_per_particle_hz,
            expected,
            epsilon = 0.02 * expected
        );
    }

    #[test]
    fn virial_relation_harmonic() {
        // An isotropic trap keeps the kinetic term well resolved, which the
        // 2T - 2V + 3E_int cancellation is sensitive to.
        let trap = TrapConfig {
            atom_number: 2e3,
            frequencies_hz: [150.0, 150.0, 150.0],
            lattice_depth_erec: 0.0,
            grid: GridSpec::Points([48, 48, 48]),
            ..TrapConfig::default()
        };
        let sol = solve_ground_state_with(&trap, &small_options()).unwrap();
        let e = &sol.energies;
        let virial = 2.0 * e.kinetic_hz - 2.0 * e.harmonic_hz + 3.0 * e.interaction_hz;
        assert!(
            virial.abs() < 0.01 * sol.mu_hz,
            "virial {} vs mu {}",
            virial,
            sol.mu_hz
        );
    }

    #[test]
    fn thomas_fermi_limit() {
        // Large N without the lattice: mu approaches the analytic
        // Thomas-Fermi value (hbar omega_bar / 2)(15 N a / a_bar)^(2/5).
        let trap = TrapConfig {
            atom_number: 1e6,
            lattice_depth_erec: 0.0,
            grid: GridSpec::Points([48, 96, 48]),
            ..TrapConfig::default()
        };
        let options = SolveOptions {
            mu_rel_tol: 1e-8,
            ..small_options()
        };
        let sol = solve_ground_state_with(&trap, &options).unwrap();
        let mu_tf = thomas_fermi_mu_hz(&trap);
        let rel = (sol.mu_hz - mu_tf).abs() / mu_tf;
        assert!(
            rel < 0.05,
            "mu {} vs TF {} ({:.2}%)",
            sol.mu_hz,
            mu_tf,
            100.0 * rel
        );
    }

    #[test]
    fn grid_refinement_stability() {
        // Doubling every axis moves mu by < 0.5% and U0 by < 0.005. (The
        // lattice-axis sampling is pinned separately by the four-points-per-
        // period rule; this exercises the smooth-trap discretization.)
        let base = TrapConfig {
            atom_number: 2e4,
            lattice_depth_erec: 0.0,
            grid: GridSpec::Points([28, 40, 28]),
            ..TrapConfig::default()
        };
        let fine = TrapConfig {
            grid: GridSpec::Points([56, 80, 56]),
            ..base.clone()
        };
        let a = solve_ground_state_with(&base, &small_options()).unwrap();
        let b = solve_ground_state_with(&fine, &small_options()).unwrap();
        assert_eq!(a.grid.extents_m, b.grid.extents_m);
        let mu_rel = (a.mu_hz - b.mu_hz).abs() / b.mu_hz;
        assert!(mu_rel < 0.005, "mu moved {:.3}%", 100.0 * mu_rel);
        let u_a = overlap_factor(&a, base.probe_waist_m, 0).unwrap();
        let u_b = overlap_factor(&b, base.probe_waist_m, 0).unwrap();
        assert!((u_a - u_b).abs() < 0.005, "U0 moved {}", (u_a - u_b).abs());
    }

    #[test]
    fn empirical_overlap_values() {
        assert_abs_diff_eq!(u0_empirical(2e5).unwrap(), 0.631, epsilon = 5e-4);
        assert_abs_diff_eq!(u0_empirical(154_000.0).unwrap(), 0.6373, epsilon = 5e-4);
        assert_abs_diff_eq!(u0_empirical(1.0).unwrap(), 0.706, epsilon = 1e-3);
        assert!(u0_empirical(2e8).is_err());
        assert!(u0_empirical(0.5).is_err());
    }

    #[test]
    fn overlap_limits() {
        // A tight on-axis cloud sees the full mode: U0 -> sqrt(0.5). The box
        // is wide enough along y to also hold the same cloud displaced by a
        // full waist off the axis.
        let grid = Grid {
            points: [8, 160, 48],
            extents_m: [4e-6, 80e-6, 12e-6],
        };
        let (ny, nz) = (grid.points[1], grid.points[2]);
        let sigma = 1.0e-6f64;
        let mut density = vec![0.0; grid.len()];
        let mut on_axis = density.clone();
        let dv = grid.volume_element_m3();
        for ix in 0..grid.points[0] {
            for iy in 0..ny {
                let y = grid.coord(1, iy);
                for iz in 0..nz {
                    let z = grid.coord(2, iz);
                    let idx = (ix * ny + iy) * nz + iz;
                    let r2 = y * y + z * z;
                    on_axis[idx] = (-r2 / (sigma * sigma)).exp();
                    // Displaced by one waist along y.
                    let yd = y - 25e-6;
                    density[idx] = (-(yd * yd + z * z) / (sigma * sigma)).exp();
                }
            }
        }
        let normalize = |d: &mut Vec<f64>| {
            let total: f64 = d.iter().sum::<f64>() * dv;
            d.iter_mut().for_each(|v| *v /= total);
        };
        normalize(&mut on_axis);
        normalize(&mut density);
        let base = CondensateSolution {
            grid,
            density: on_axis,
            mu_hz: 0.0,
            energy_per_particle_hz: 0.0,
            energies: EnergyBreakdown::default(),
            report: ConvergenceReport {
                converged: true,
                steps: 0,
                final_mu_change_rel: 0.0,
            },
            atom_number: 1.0,
        };
        let u_on = overlap_factor(&base, 25e-6, 0).unwrap();
        assert_abs_diff_eq!(u_on, 0.5f64.sqrt(), epsilon = 2e-3);
        let displaced = CondensateSolution {
            density,
            ..base.clone()
        };
        let u_off = overlap_factor(&displaced, 25e-6, 0).unwrap();
        assert!(u_off < u_on);
        assert!(overlap_factor(&base, 25e-6, 1).is_err());
    }

    #[test]
    fn grid_rules() {
        // Pinned points that cannot resolve the lattice are rejected.
        let trap = TrapConfig {
            grid: GridSpec::Points([32, 64, 64]),
            ..TrapConfig::default()
        };
        let err = resolve_grid(&trap).unwrap_err();
        assert!(err.to_string().contains("lattice period"));
        // The automatic grid satisfies both the coverage and the sampling
        // constraints.
        let auto = resolve_grid(&TrapConfig::default()).unwrap();
        let dx = auto.steps_m()[0];
        assert!(830e-9 / 2.0 / dx >= 4.0);
        assert!(auto.extents_m[0] > 15e-6);
    }

    #[test]
    fn norm_is_conserved_and_energy_decreases() {
        let trap = TrapConfig {
            atom_number: 5e3,
            lattice_depth_erec: 0.0,
            grid: GridSpec::Points([24, 24, 24]),
            ..TrapConfig::default()
        };
        let grid = resolve_grid(&trap).unwrap();
        let ws = Workspace::new(&trap, grid);
        let mut psi = ws.initial_state();
        ws.normalize(&mut psi);
        let dv = grid.volume_element_m3();
        let dtau = 5e-6;
        let exp_v: Vec<f64> = ws
            .potential_hz
            .iter()
            .map(|&v| (-std::f64::consts::PI * v * dtau).exp())
            .collect();
        let exp_t: Vec<f64> = ws
            .kinetic_hz
            .iter()
            .map(|&t| (-2.0 * std::f64::consts::PI * t * dtau).exp())
            .collect();
        let int_scale = std::f64::consts::PI * ws.gamma_int * dtau;
        let mut scratch = Vec::new();
        let mut last_energy = f64::INFINITY;
        for step in 0..400 {
            for (z, &ev) in psi.iter_mut().zip(&exp_v) {
                *z *= ev * (-int_scale * z.norm_sqr()).exp();
            }
            ws.ffts.forward(&mut psi);
            for (z, &et) in psi.iter_mut().zip(&exp_t) {
                *z *= et;
            }
            ws.ffts.inverse(&mut psi);
            for (z, &ev) in psi.iter_mut().zip(&exp_v) {
                *z *= ev * (-int_scale * z.norm_sqr()).exp();
            }
            ws.normalize(&mut psi);
            let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dv;
            assert!((norm - 1.0).abs() < 1e-12);
            if step % 10 == 0 {
                let (_, energy, _) = ws.observables(&psi, &mut scratch);
                assert!(energy <= last_energy + 1e-10 * energy.abs());
                last_energy = energy;
            }
        }
    }
}
