//! Flat key=value run configuration with validated defaults.
//!
//! One `key = value` pair per line, `#` comments, dotted keys namespacing the
//! subsystems. Every key has a default carrying the reference experiment's
//! value, so an empty file reproduces the published configuration. Unknown
//! keys, malformed values and invariant violations are rejected with the
//! offending key and line number.

use std::collections::BTreeMap;

use crate::fit::FitOptions;
use crate::geometry::{CavityGeometry, TransportProfile};
use crate::gpe::{GridSpec, TrapConfig};
use crate::hamiltonian::{OverlapModel, PolarizationBasis, Populations, SystemConfig};
use crate::scan::ScanConfig;
use crate::{Error, Result};

/// Fully resolved configuration for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub trap: TrapConfig,
    pub scan: ScanConfig,
    pub transport: TransportProfile,
    /// Quoted single-atom coupling used for the critical photon number, MHz.
    /// Stored alongside the fitted channel couplings; the two use different
    /// conventions and neither is derived from the other.
    pub g0_mhz: f64,
    pub fit: FitOptions,
    pub fit_noise_mhz: f64,
    /// Every key with its resolved value, for the run manifest.
    pub resolved: Vec<(String, String)>,
}

const POPULATION_KEYS: [(&str, u32, i32); 8] = [
    ("populations.1,-1", 1, -1),
    ("populations.1,0", 1, 0),
    ("populations.1,+1", 1, 1),
    ("populations.2,-2", 2, -2),
    ("populations.2,-1", 2, -1),
    ("populations.2,0", 2, 0),
    ("populations.2,+1", 2, 1),
    ("populations.2,+2", 2, 2),
];

/// The default value of every configuration key. The values are the
/// reference experiment's parameters: populations 154,000 in |1,-1> and
/// 2,700 in |2,-1>, fitted channel couplings (14.4, 11.3) MHz, cavity
/// (L, R) = (176 um, 75 mm), rates (kappa, gamma) = (1.3, 3.0) MHz,
/// transverse mode at 18.5 GHz with relative coupling 1.2, trap frequencies
/// (290, 43, 277) Hz with a 2.4 recoil lattice at 830 nm, and the scan
/// settings of the transmission measurements.
pub fn default_entries() -> BTreeMap<&'static str, String> {
    let mut map = BTreeMap::new();
    for (key, _, _) in POPULATION_KEYS {
        map.insert(key, "0".to_string());
    }
    map.insert("populations.1,-1", "154000".into());
    map.insert("populations.2,-1", "2700".into());

    map.insert("coupling.g_sigma_plus_MHz", "14.4".into());
    map.insert("coupling.g_sigma_minus_MHz", "11.3".into());
    map.insert("coupling.u0_mode", "fixed".into());
    // Empirical overlap law evaluated at N = 154,000.
    map.insert("coupling.u0_value", "0.63733".into());
    map.insert("coupling.g0_MHz", "10.6".into());

    map.insert("cavity.length_m", "176e-6".into());
    map.insert("cavity.mirror_radius_m", "75e-3".into());
    map.insert("cavity.probe_wavelength_m", "780e-9".into());
    map.insert("cavity.stabilization_wavelength_m", "830e-9".into());
    map.insert("cavity.birefringence_MHz", "1.7".into());
    map.insert("cavity.kappa_MHz", "1.3".into());
    map.insert("cavity.gamma_MHz", "3.0".into());
    map.insert("cavity.delta_t_MHz", "18500".into());
    map.insert("cavity.transverse_ratio", "1.2".into());

    map.insert("spectrum.delta_c_MHz", "0".into());
    map.insert("spectrum.basis", "circular".into());
    map.insert("spectrum.include_transverse", "true".into());

    map.insert("trap.omega_x_Hz", "290".into());
    map.insert("trap.omega_y_Hz", "43".into());
    map.insert("trap.omega_z_Hz", "277".into());
    map.insert("trap.lattice_depth_Erec", "2.4".into());
    map.insert("trap.atom_number", "220000".into());
    map.insert("trap.scattering_length_m", "5.31e-9".into());
    map.insert("trap.probe_waist_m", "25e-6".into());
    map.insert("trap.grid_points", "auto".into());

    map.insert("scan.speed_MHz_per_ms", "25".into());
    map.insert("scan.window_MHz", "-4500:-2800".into());
    map.insert("scan.bin_time_s", "4e-7".into());
    map.insert("scan.average_window_s", "2e-3".into());
    map.insert("scan.efficiency", "0.05".into());
    map.insert("scan.dark_rate_hz", "60".into());
    map.insert("scan.nbar", "0.04".into());
    map.insert("scan.seed", "1".into());

    map.insert("transport.duration_s", "0.1".into());
    map.insert("transport.delta_max_Hz", "1.67e6".into());
    map.insert("transport.wavelength_m", "852e-9".into());
    map.insert("transport.samples", "1000".into());

    map.insert("fit.noise_MHz", "25".into());
    map.insert("fit.max_iterations", "200".into());
    map.insert("fit.gradient_tol", "1e-9".into());
    map.insert("fit.step_tol", "1e-12".into());
    map
}

struct Resolver {
    values: BTreeMap<String, (String, Option<usize>)>,
}

impl Resolver {
    fn get(&self, key: &str) -> (&str, Option<usize>) {
        let (v, line) = &self.values[key];
        (v.as_str(), *line)
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let (v, line) = self.get(key);
        v.parse::<f64>().map_err(|_| {
            Error::config(
                format!("{key}: cannot parse {v:?} as a number"),
                Some(key),
                line,
            )
        })
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let x = self.f64(key)?;
        if !(x > 0.0) {
            let (_, line) = self.get(key);
            return Err(Error::config(
                format!("{key} must be positive, got {x}"),
                Some(key),
                line,
            ));
        }
        Ok(x)
    }

    fn nonnegative(&self, key: &str) -> Result<f64> {
        let x = self.f64(key)?;
        if x < 0.0 {
            let (_, line) = self.get(key);
            return Err(Error::config(
                format!("{key} must be nonnegative, got {x}"),
                Some(key),
                line,
            ));
        }
        Ok(x)
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let (v, line) = self.get(key);
        v.parse::<usize>().map_err(|_| {
            Error::config(
                format!("{key}: cannot parse {v:?} as an integer"),
                Some(key),
                line,
            )
        })
    }

    fn u64(&self, key: &str) -> Result<u64> {
        let (v, line) = self.get(key);
        v.parse::<u64>().map_err(|_| {
            Error::config(
                format!("{key}: cannot parse {v:?} as an integer"),
                Some(key),
                line,
            )
        })
    }

    fn bool(&self, key: &str) -> Result<bool> {
        let (v, line) = self.get(key);
        match v {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(Error::config(
                format!("{key}: expected true or false, got {other:?}"),
                Some(key),
                line,
            )),
        }
    }
}

/// Parse configuration text and apply defaults.
pub fn parse_config_text(text: &str) -> Result<RunConfig> {
    let defaults = default_entries();
    let mut values: BTreeMap<String, (String, Option<usize>)> = defaults
        .iter()
        .map(|(k, v)| (k.to_string(), (v.clone(), None)))
        .collect();

    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(
                format!("expected key = value, got {raw_line:?}"),
                None,
                Some(line_no),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        if !defaults.contains_key(key) {
            return Err(Error::config(
                format!("unknown key {key:?}"),
                Some(key),
                Some(line_no),
            ));
        }
        values.insert(key.to_string(), (value.to_string(), Some(line_no)));
    }

    let resolver = Resolver { values };
    build(&resolver)
}

/// Parse a configuration file from disk.
pub fn parse_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_text(&text)
}

fn build(r: &Resolver) -> Result<RunConfig> {
    let mut populations = Populations::zero();
    for (key, f, m_f) in POPULATION_KEYS {
        let n = r.nonnegative(key)?;
        populations.set(f, m_f, n).map_err(|e| {
            let (_, line) = r.get(key);
            Error::config(e.to_string(), Some(key), line)
        })?;
    }

    let geometry = CavityGeometry {
        length_m: r.positive("cavity.length_m")?,
        mirror_radius_m: r.positive("cavity.mirror_radius_m")?,
        probe_wavelength_m: r.positive("cavity.probe_wavelength_m")?,
        stabilization_wavelength_m: r.positive("cavity.stabilization_wavelength_m")?,
        birefringence_mhz: r.nonnegative("cavity.birefringence_MHz")?,
        kappa_mhz: r.positive("cavity.kappa_MHz")?,
        gamma_mhz: r.positive("cavity.gamma_MHz")?,
        transverse_offset_mhz: r.positive("cavity.delta_t_MHz")?,
        transverse_coupling_ratio: r.nonnegative("cavity.transverse_ratio")?,
    };
    geometry.validate().map_err(|e| {
        Error::config(
            format!("cavity geometry: {e}"),
            Some("cavity.length_m"),
            None,
        )
    })?;

    let overlap = {
        let (mode, line) = r.get("coupling.u0_mode");
        match mode {
            "fixed" => OverlapModel::Fixed(r.positive("coupling.u0_value")?),
            "from_n" => OverlapModel::FromTotalAtomNumber,
            other => {
                return Err(Error::config(
                    format!("coupling.u0_mode: expected fixed or from_n, got {other:?}"),
                    Some("coupling.u0_mode"),
                    line,
                ))
            }
        }
    };

    let basis = {
        let (b, line) = r.get("spectrum.basis");
        match b {
            "circular" => PolarizationBasis::Circular,
            "linear" => PolarizationBasis::Linear,
            other => {
                return Err(Error::config(
                    format!("spectrum.basis: expected circular or linear, got {other:?}"),
                    Some("spectrum.basis"),
                    line,
                ))
            }
        }
    };

    let system = SystemConfig {
        populations,
        g_sigma_plus_mhz: r.positive("coupling.g_sigma_plus_MHz")?,
        g_sigma_minus_mhz: r.positive("coupling.g_sigma_minus_MHz")?,
        overlap,
        geometry,
        delta_c_mhz: r.f64("spectrum.delta_c_MHz")?,
        basis,
        include_transverse: r.bool("spectrum.include_transverse")?,
    };
    system
        .validate()
        .map_err(|e| Error::config(e.to_string(), None, None))?;

    let grid = {
        let (g, line) = r.get("trap.grid_points");
        if g == "auto" {
            GridSpec::Auto
        } else {
            let parts: Vec<&str> = g.split('x').collect();
            let parse_axis = |s: &str| -> Result<usize> {
                s.parse::<usize>().map_err(|_| {
                    Error::config(
                        format!("trap.grid_points: expected auto or NXxNYxNZ, got {g:?}"),
                        Some("trap.grid_points"),
                        line,
                    )
                })
            };
            if parts.len() != 3 {
                return Err(Error::config(
                    format!("trap.grid_points: expected auto or NXxNYxNZ, got {g:?}"),
                    Some("trap.grid_points"),
                    line,
                ));
            }
            GridSpec::Points([
                parse_axis(parts[0])?,
                parse_axis(parts[1])?,
                parse_axis(parts[2])?,
            ])
        }
    };

    let trap = TrapConfig {
        frequencies_hz: [
            r.positive("trap.omega_x_Hz")?,
            r.positive("trap.omega_y_Hz")?,
            r.positive("trap.omega_z_Hz")?,
        ],
        lattice_depth_erec: r.nonnegative("trap.lattice_depth_Erec")?,
        lattice_wavelength_m: r.positive("cavity.stabilization_wavelength_m")?,
        probe_waist_m: r.positive("trap.probe_waist_m")?,
        probe_wavelength_m: r.positive("cavity.probe_wavelength_m")?,
        atom_number: r.positive("trap.atom_number")?,
        scattering_length_m: r.nonnegative("trap.scattering_length_m")?,
        grid,
    };
    trap.validate()
        .map_err(|e| Error::config(e.to_string(), None, None))?;

    let window = {
        let (w, line) = r.get("scan.window_MHz");
        let parts: Vec<&str> = w.split(':').collect();
        let bad = || {
            Error::config(
                format!("scan.window_MHz: expected lo:hi, got {w:?}"),
                Some("scan.window_MHz"),
                line,
            )
        };
        if parts.len() != 2 {
            return Err(bad());
        }
        let lo = parts[0].parse::<f64>().map_err(|_| bad())?;
        let hi = parts[1].parse::<f64>().map_err(|_| bad())?;
        (lo, hi)
    };

    let scan = ScanConfig {
        speed_mhz_per_ms: r.positive("scan.speed_MHz_per_ms")?,
        window_mhz: window,
        bin_time_s: r.positive("scan.bin_time_s")?,
        average_window_s: r.positive("scan.average_window_s")?,
        efficiency: r.positive("scan.efficiency")?,
        dark_rate_hz: r.nonnegative("scan.dark_rate_hz")?,
        nbar: r.nonnegative("scan.nbar")?,
        critical_photon_number: {
            let g0 = r.positive("coupling.g0_MHz")?;
            let gamma = r.positive("cavity.gamma_MHz")?;
            gamma * gamma / (2.0 * g0 * g0)
        },
        kappa_mhz: r.positive("cavity.kappa_MHz")?,
        gamma_mhz: r.positive("cavity.gamma_MHz")?,
        seed: r.u64("scan.seed")?,
    };
    scan.validate()
        .map_err(|e| Error::config(e.to_string(), None, None))?;

    let transport = TransportProfile {
        duration_s: r.positive("transport.duration_s")?,
        delta_max_hz: r.nonnegative("transport.delta_max_Hz")?,
        wavelength_m: r.positive("transport.wavelength_m")?,
        samples: r.usize("transport.samples")?,
    };

    let fit = FitOptions {
        gradient_tol: r.positive("fit.gradient_tol")?,
        step_tol: r.positive("fit.step_tol")?,
        max_iterations: r.usize("fit.max_iterations")?,
    };

    let resolved = r
        .values
        .iter()
        .map(|(k, (v, _))| (k.clone(), v.clone()))
        .collect();

    Ok(RunConfig {
        system,
        trap,
        scan,
        transport,
        g0_mhz: r.positive("coupling.g0_MHz")?,
        fit,
        fit_noise_mhz: r.positive("fit.noise_MHz")?,
        resolved,
    })
}

impl RunConfig {
    /// Spectrum-style commands need at least one atom.
    pub fn require_populated_system(&self) -> Result<()> {
        if self.system.populations.total() <= 0.0 {
            return Err(Error::config(
                "all populations are zero: spectrum commands need atoms (set populations.F,mF)",
                Some("populations.1,-1"),
                None,
            ));
        }
        Ok(())
    }
}

/// Parse a grid shorthand: `start:stop:count` for linear spacing or
/// `start:stop:logN` for logarithmic spacing.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.trim().split(':').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::invalid(format!(
            "grid {spec:?}: expected start:stop:count or start:stop:logN"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| Error::invalid(format!("grid start {:?} is not a number", parts[0])))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| Error::invalid(format!("grid stop {:?} is not a number", parts[1])))?;
    if stop <= start {
        return Err(Error::invalid("grid stop must exceed start"));
    }
    let (log, count_str) = match parts[2].strip_prefix("log") {
        Some(rest) => (true, rest),
        None => (false, parts[2]),
    };
    let count: usize = count_str
        .parse()
        .map_err(|_| Error::invalid(format!("grid count {:?} is not an integer", parts[2])))?;
    if count < 2 {
        return Err(Error::invalid("grid needs at least 2 points"));
    }
    if log && start <= 0.0 {
        return Err(Error::invalid("log grids need a positive start"));
    }
    let points = (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            if log {
                start * (stop / start).powf(t)
            } else {
                start + (stop - start) * t
            }
        })
        .collect();
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn empty_text_gives_reference_configuration() {
        let config = parse_config_text("").unwrap();
        assert_abs_diff_eq!(config.system.populations.get(1, -1), 154_000.0);
        assert_abs_diff_eq!(config.system.populations.get(2, -1), 2_700.0);
        assert_abs_diff_eq!(config.system.g_sigma_plus_mhz, 14.4);
        assert_abs_diff_eq!(config.system.g_sigma_minus_mhz, 11.3);
        assert_abs_diff_eq!(config.system.geometry.transverse_offset_mhz, 18_500.0);
        assert_abs_diff_eq!(config.system.geometry.transverse_coupling_ratio, 1.2);
        assert_abs_diff_eq!(config.trap.frequencies_hz[1], 43.0);
        assert_abs_diff_eq!(config.g0_mhz, 10.6);
        config.require_populated_system().unwrap();
    }

    #[test]
    fn comments_and_overrides() {
        let text = "\n# comment\npopulations.1,-1 = 1000  # trailing comment\nscan.seed = 99\n";
        let config = parse_config_text(text).unwrap();
        assert_abs_diff_eq!(config.system.populations.get(1, -1), 1000.0);
        assert_eq!(config.scan.seed, 99);
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let err = parse_config_text("nope.key = 3\n").unwrap_err();
        match err {
            Error::Config { line, .. } => assert_eq!(line, Some(1)),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_system_rejected_for_spectrum() {
        let mut text = String::new();
        for (key, _, _) in POPULATION_KEYS {
            text.push_str(&format!("{key} = 0\n"));
        }
        let config = parse_config_text(&text).unwrap();
        assert!(config.require_populated_system().is_err());
    }

    #[test]
    fn invariant_violation_names_the_key() {
        let err = parse_config_text("cavity.delta_t_MHz = -1\n").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("cavity.delta_t_MHz"), "{message}");
    }

    #[test]
    fn grid_shorthand() {
        let linear = parse_grid("0:10:5").unwrap();
        assert_eq!(linear, vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        let log = parse_grid("2500:200000:log12").unwrap();
        assert_eq!(log.len(), 12);
        assert_abs_diff_eq!(log[0], 2500.0, epsilon = 1e-9);
        assert_abs_diff_eq!(log[11], 200_000.0, epsilon = 1e-6);
        let ratio = log[1] / log[0];
        for w in log.windows(2) {
            assert_abs_diff_eq!(w[1] / w[0], ratio, epsilon = 1e-9);
        }
        assert!(parse_grid("5:1:3").is_err());
        assert!(parse_grid("0:10:log4").is_err());
        assert!(parse_grid("1:2").is_err());
    }

    #[test]
    fn resolved_pairs_cover_all_keys() {
        let config = parse_config_text("scan.seed = 5\n").unwrap();
        assert_eq!(config.resolved.len(), default_entries().len());
        let seed = config
            .resolved
            .iter()
            .find(|(k, _)| k == "scan.seed")
            .unwrap();
        assert_eq!(seed.1, "5");
    }
}
