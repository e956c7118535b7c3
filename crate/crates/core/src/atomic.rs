//! Rb-87 D2 level structure and dimensionless dipole coupling coefficients.
//!
//! Level offsets are ordinary frequencies in MHz, referenced so that the
//! F=1 -> F'=2 transition has detuning exactly zero: excited levels are
//! quoted relative to F'=2 and ground levels relative to F=1. A transition
//! detuning is then simply excited offset minus ground offset, which puts
//! the F=2 -> F' lines near -6835 MHz in probe detuning.
//!
//! Coupling coefficients follow c = sqrt(S_FF') * <F m; 1 q | F' m'> with
//! S_FF' = (2F'+1)(2J+1) {J J' 1; F' F I}^2, so the hyperfine strength
//! fractions satisfy sum_F' S_FF' = 1 for each ground F.

use crate::constants::{RB87_EXCITED_SPLITTINGS_MHZ, RB87_GROUND_SPLITTING_MHZ};
use crate::wigner::{clebsch_gordan, wigner6j};
use crate::{Error, Result};

/// Fine-structure manifold of the D2 line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Manifold {
    /// 5S1/2 ground manifold (F = 1, 2).
    Ground,
    /// 5P3/2 excited manifold (F' = 0..3).
    Excited,
}

/// One hyperfine Zeeman level |F, mF> with its frequency offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperfineState {
    pub manifold: Manifold,
    pub f: u32,
    pub m_f: i32,
    /// Offset in MHz from the module reference (ground F=1 / excited F'=2).
    pub detuning_mhz: f64,
}

impl HyperfineState {
    pub fn ground(f: u32, m_f: i32) -> Result<Self> {
        if !(1..=2).contains(&f) {
            return Err(Error::invalid(format!("ground F must be 1 or 2, got {f}")));
        }
        if m_f.unsigned_abs() > f {
            return Err(Error::invalid(format!("|mF| = {m_f} exceeds F = {f}")));
        }
        let detuning_mhz = if f == 1 {
            0.0
        } else {
            RB87_GROUND_SPLITTING_MHZ
        };
        Ok(HyperfineState {
            manifold: Manifold::Ground,
            f,
            m_f,
            detuning_mhz,
        })
    }

    pub fn excited(f: u32, m_f: i32) -> Result<Self> {
        if f > 3 {
            return Err(Error::invalid(format!("excited F' must be 0..3, got {f}")));
        }
        if m_f.unsigned_abs() > f {
            return Err(Error::invalid(format!("|mF'| = {m_f} exceeds F' = {f}")));
        }
        Ok(HyperfineState {
            manifold: Manifold::Excited,
            f,
            m_f,
            detuning_mhz: excited_offset_mhz(f),
        })
    }

    /// Sort key (manifold, F, mF) for deterministic orderings.
    pub fn key(&self) -> (Manifold, u32, i32) {
        (self.manifold, self.f, self.m_f)
    }
}

/// Excited-level offset from F'=2 built from the embedded intervals.
fn excited_offset_mhz(f_prime: u32) -> f64 {
    let [s01, s12, s23] = RB87_EXCITED_SPLITTINGS_MHZ;
    match f_prime {
        0 => -(s01 + s12),
        1 => -s12,
        2 => 0.0,
        3 => s23,
        _ => unreachable!(),
    }
}

/// All eight ground Zeeman levels, ordered by (F, mF).
pub fn ground_states() -> Vec<HyperfineState> {
    let mut out = Vec::with_capacity(8);
    for f in 1..=2u32 {
        for m in -(f as i32)..=(f as i32) {
            out.push(HyperfineState::ground(f, m).unwrap());
        }
    }
    out
}

/// All sixteen excited Zeeman levels, ordered by (F', mF').
pub fn excited_states() -> Vec<HyperfineState> {
    let mut out = Vec::with_capacity(16);
    for f in 0..=3u32 {
        for m in -(f as i32)..=(f as i32) {
            out.push(HyperfineState::excited(f, m).unwrap());
        }
    }
    out
}

/// Level offset in MHz such that the F=1 -> F'=2 transition has detuning 0.
pub fn level_detuning(state: &HyperfineState) -> f64 {
    state.detuning_mhz
}

/// Probe detuning of the transition ground -> excited, MHz.
pub fn transition_detuning_mhz(ground: &HyperfineState, excited: &HyperfineState) -> f64 {
    excited.detuning_mhz - ground.detuning_mhz
}

/// Hyperfine strength fraction S_FF' for J=1/2 -> J'=3/2 with I=3/2.
pub fn strength_fraction(f_ground: u32, f_excited: u32) -> f64 {
    let (j, jp, i) = (0.5, 1.5, 1.5);
    let six = wigner6j(j, jp, 1.0, f_excited as f64, f_ground as f64, i)
        .expect("integer-F arguments are always valid");
    (2.0 * f_excited as f64 + 1.0) * (2.0 * j + 1.0) * six * six
}

/// Dimensionless dipole coefficient c for ground -> excited driven by the
/// spherical field component q; zero whenever selection rules forbid it.
pub fn dipole_coefficient(
    ground: &HyperfineState,
    excited: &HyperfineState,
    q: i32,
) -> Result<f64> {
    if ground.manifold != Manifold::Ground || excited.manifold != Manifold::Excited {
        return Err(Error::invalid(
            "dipole_coefficient expects (ground, excited)",
        ));
    }
    if !(-1..=1).contains(&q) {
        return Err(Error::invalid(format!("q must be -1, 0 or +1, got {q}")));
    }
    if excited.m_f != ground.m_f + q {
        return Ok(0.0);
    }
    let df = excited.f as i32 - ground.f as i32;
    if df.abs() > 1 {
        return Ok(0.0);
    }
    let cg = clebsch_gordan(
        ground.f as f64,
        ground.m_f as f64,
        1.0,
        q as f64,
        excited.f as f64,
        excited.m_f as f64,
    )?;
    Ok(strength_fraction(ground.f, excited.f).sqrt() * cg)
}

/// Quadrature-sum effective coupling sqrt(sum_F' c^2) out of `ground` for the
/// circular component q. Valid when the collective splitting dominates the
/// excited hyperfine structure. q = 0 is rejected: the cavity supports only
/// the two transverse polarizations.
pub fn effective_cg(ground: &HyperfineState, q: i32) -> Result<f64> {
    if q == 0 {
        return Err(Error::invalid(
            "q = 0 is not a cavity polarization; only q = +/-1 are supported",
        ));
    }
    let mut sum = 0.0;
    for excited in excited_states() {
        let c = dipole_coefficient(ground, &excited, q)?;
        sum += c * c;
    }
    Ok(sum.sqrt())
}

/// Tag recording the coupling normalization used by [`DipoleTable`].
pub const NORMALIZATION_TAG: &str = "c = sqrt(S_FF') * CG, sum_F' S_FF' = 1";

/// One allowed ground -> excited transition with its coupling coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleEntry {
    pub ground: HyperfineState,
    pub excited: HyperfineState,
    pub q: i32,
    pub c: f64,
}

/// All allowed Zeeman transitions of the D2 line.
#[derive(Debug, Clone)]
pub struct DipoleTable {
    pub entries: Vec<DipoleEntry>,
    pub normalization: &'static str,
}

impl DipoleTable {
    /// Enumerate every (ground, excited, q) with a nonzero coefficient,
    /// ordered by (ground, excited, q).
    pub fn build() -> Self {
        let mut entries = Vec::new();
        for ground in ground_states() {
            for excited in excited_states() {
                for q in [-1, 0, 1] {
                    let c = dipole_coefficient(&ground, &excited, q).unwrap();
                    if c != 0.0 {
                        entries.push(DipoleEntry {
                            ground,
                            excited,
                            q,
                            c,
                        });
                    }
                }
            }
        }
        DipoleTable {
            entries,
            normalization: NORMALIZATION_TAG,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn strength_fractions_match_closed_forms() {
        // S_1F': 1/6, 5/12, 5/12 and S_2F': 1/20, 1/4, 7/10.
        assert_abs_diff_eq!(strength_fraction(1, 0), 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(strength_fraction(1, 1), 5.0 / 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(strength_fraction(1, 2), 5.0 / 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(strength_fraction(2, 1), 1.0 / 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(strength_fraction(2, 2), 1.0 / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(strength_fraction(2, 3), 7.0 / 10.0, epsilon = 1e-12);
    }

    #[test]
    fn strength_fractions_sum_to_one() {
        for f in 1..=2u32 {
            let sum: f64 = (0..=3u32).map(|fp| strength_fraction(f, fp)).sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn coefficient_examples() {
        let g = HyperfineState::ground(1, -1).unwrap();
        // |1,-1> -> |2,-2>, q=-1: stretched path, c^2 = S_12 = 5/12.
        let e = HyperfineState::excited(2, -2).unwrap();
        let c = dipole_coefficient(&g, &e, -1).unwrap();
        assert_abs_diff_eq!(c * c, 5.0 / 12.0, epsilon = 1e-12);
        // |1,-1> -> |1,0>, q=+1: c^2 = S_11 * 1/2 = 5/24.
        let e = HyperfineState::excited(1, 0).unwrap();
        let c = dipole_coefficient(&g, &e, 1).unwrap();
        assert_abs_diff_eq!(c * c, 5.0 / 24.0, epsilon = 1e-12);
        // Delta F = 2 forbidden.
        let e = HyperfineState::excited(3, 0).unwrap();
        for q in [-1, 0, 1] {
            assert_eq!(dipole_coefficient(&g, &e, q).unwrap(), 0.0);
        }
    }

    #[test]
    fn effective_cg_examples() {
        let g = HyperfineState::ground(1, -1).unwrap();
        let minus = effective_cg(&g, -1).unwrap();
        let plus = effective_cg(&g, 1).unwrap();
        assert_abs_diff_eq!(minus, (5.0f64 / 12.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(plus, (1.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(minus / plus, 1.25f64.sqrt(), epsilon = 1e-12);
        assert!(effective_cg(&g, 0).is_err());
    }

    #[test]
    fn level_detunings() {
        assert_eq!(level_detuning(&HyperfineState::excited(2, 0).unwrap()), 0.0);
        assert_abs_diff_eq!(
            level_detuning(&HyperfineState::excited(3, 0).unwrap()),
            266.650,
            epsilon = 1e-12
        );
        // F=2 -> F'=2 probe detuning sits at minus the ground splitting.
        let g = HyperfineState::ground(2, 0).unwrap();
        let e = HyperfineState::excited(2, 0).unwrap();
        assert_abs_diff_eq!(transition_detuning_mhz(&g, &e), -6834.683, epsilon = 1e-12);
        // Detunings increase with F within each manifold.
        let ex = excited_states();
        for f in 0..3u32 {
            assert!(excited_offset_mhz(f) < excited_offset_mhz(f + 1));
        }
        assert_eq!(ex.len(), 16);
        assert_eq!(ground_states().len(), 8);
    }

    #[test]
    fn table_selection_rules_and_isotropy() {
        let table = DipoleTable::build();
        for entry in &table.entries {
            assert_eq!(entry.excited.m_f, entry.ground.m_f + entry.q);
            assert!((entry.excited.f as i32 - entry.ground.f as i32).abs() <= 1);
        }
        // Total line strength is the same constant for every ground state in
        // the same F manifold.
        let total = |g: &HyperfineState| -> f64 {
            table
                .entries
                .iter()
                .filter(|e| e.ground == *g)
                .map(|e| e.c * e.c)
                .sum()
        };
        for f in 1..=2u32 {
            let states: Vec<_> = ground_states().into_iter().filter(|s| s.f == f).collect();
            let first = total(&states[0]);
            for s in &states {
                assert_abs_diff_eq!(total(s), first, epsilon = 1e-12);
            }
        }
    }
}
