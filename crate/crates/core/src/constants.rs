//! Embedded physical reference data.
//!
//! CODATA fundamental constants plus Rb-87 D2-line structure data (ground
//! hyperfine splitting, 5P3/2 hyperfine intervals, scattering length, mass).
//! All frequencies are ordinary frequencies in MHz unless noted; angular
//! factors of 2pi cancel in every ratio and detuning the crate computes.

/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum light speed, m/s.
pub const LIGHT_SPEED: f64 = 2.997_924_58e8;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Rb-87 atomic mass, kg.
pub const RB87_MASS: f64 = 1.4432e-25;
/// Rb-87 s-wave scattering length, m.
pub const RB87_SCATTERING_LENGTH: f64 = 5.31e-9;

/// 5S1/2 F=1 to F=2 hyperfine splitting, MHz.
pub const RB87_GROUND_SPLITTING_MHZ: f64 = 6834.683;
/// 5P3/2 hyperfine intervals F'=0->1, 1->2, 2->3, MHz.
pub const RB87_EXCITED_SPLITTINGS_MHZ: [f64; 3] = [72.218, 156.947, 266.650];

/// Bundle of the constants above, for code that passes them around as a value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub atomic_mass_kg: f64,
    pub planck_js: f64,
    pub hbar_js: f64,
    pub light_speed_m_per_s: f64,
    pub scattering_length_m: f64,
    pub epsilon0_f_per_m: f64,
    pub ground_splitting_mhz: f64,
    pub excited_splittings_mhz: [f64; 3],
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            atomic_mass_kg: RB87_MASS,
            planck_js: PLANCK,
            hbar_js: HBAR,
            light_speed_m_per_s: LIGHT_SPEED,
            scattering_length_m: RB87_SCATTERING_LENGTH,
            epsilon0_f_per_m: EPSILON_0,
            ground_splitting_mhz: RB87_GROUND_SPLITTING_MHZ,
            excited_splittings_mhz: RB87_EXCITED_SPLITTINGS_MHZ,
        }
    }
}

impl PhysicalConstants {
    /// Every entry must be strictly positive and the excited intervals must
    /// increase with F'.
    pub fn validate(&self) -> crate::Result<()> {
        let all = [
            self.atomic_mass_kg,
            self.planck_js,
            self.hbar_js,
            self.light_speed_m_per_s,
            self.scattering_length_m,
            self.epsilon0_f_per_m,
            self.ground_splitting_mhz,
            self.excited_splittings_mhz[0],
            self.excited_splittings_mhz[1],
            self.excited_splittings_mhz[2],
        ];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(crate::Error::invalid("physical constants must be positive"));
        }
        if !(self.excited_splittings_mhz[0] < self.excited_splittings_mhz[1]
            && self.excited_splittings_mhz[1] < self.excited_splittings_mhz[2])
        {
            return Err(crate::Error::invalid(
                "excited hyperfine intervals must increase with F'",
            ));
        }
        Ok(())
    }
}
