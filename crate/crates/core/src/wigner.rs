//! Wigner 3-j and 6-j symbols via the Racah sum formula.
//!
//! Arguments are half-integers passed as `f64` (validated). Factorials enter
//! only through their logarithms, so the sums stay finite well past j = 10.
//! Selection-rule failures (triangle, m-sum, parity) return exactly 0;
//! malformed arguments (negative j, non-half-integral values) are errors.

use crate::{Error, Result};

/// ln(n!) for n up to 300, precomputed once.
fn ln_factorial(n: i64) -> f64 {
    debug_assert!(n >= 0);
    static TABLE: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(301);
        t.push(0.0);
        for k in 1..=300u32 {
            t.push(t[k as usize - 1] + (k as f64).ln());
        }
        t
    });
    table[n as usize]
}

/// Doubled value of a half-integer, or an error if `x` is not half-integral.
fn doubled(x: f64, what: &str) -> Result<i64> {
    let two = 2.0 * x;
    let r = two.round();
    if (two - r).abs() > 1e-9 || !r.is_finite() {
        return Err(Error::invalid(format!("{what} = {x} is not half-integral")));
    }
    Ok(r as i64)
}

fn check_j(x: f64, what: &str) -> Result<i64> {
    let d = doubled(x, what)?;
    if d < 0 {
        return Err(Error::invalid(format!("{what} = {x} is negative")));
    }
    Ok(d)
}

/// Triangle rule on doubled arguments, including integer-perimeter parity.
fn triangle_ok(dj1: i64, dj2: i64, dj3: i64) -> bool {
    dj3 <= dj1 + dj2 && dj1 <= dj2 + dj3 && dj2 <= dj3 + dj1 && (dj1 + dj2 + dj3) % 2 == 0
}

/// ln of the triangle coefficient Delta(j1 j2 j3), doubled arguments.
fn ln_triangle(dj1: i64, dj2: i64, dj3: i64) -> f64 {
    ln_factorial((dj1 + dj2 - dj3) / 2)
        + ln_factorial((dj1 - dj2 + dj3) / 2)
        + ln_factorial((-dj1 + dj2 + dj3) / 2)
        - ln_factorial((dj1 + dj2 + dj3) / 2 + 1)
}

/// Wigner 3-j symbol (j1 j2 j3; m1 m2 m3).
pub fn wigner3j(j1: f64, j2: f64, j3: f64, m1: f64, m2: f64, m3: f64) -> Result<f64> {
    let dj1 = check_j(j1, "j1")?;
    let dj2 = check_j(j2, "j2")?;
    let dj3 = check_j(j3, "j3")?;
    let dm1 = doubled(m1, "m1")?;
    let dm2 = doubled(m2, "m2")?;
    let dm3 = doubled(m3, "m3")?;

    for (dj, dm, name) in [(dj1, dm1, "1"), (dj2, dm2, "2"), (dj3, dm3, "3")] {
        if dm.abs() > dj {
            return Err(Error::invalid(format!("|m{name}| exceeds j{name}")));
        }
        if (dj - dm) % 2 != 0 {
            return Err(Error::invalid(format!(
                "m{name} is not of the same half-integer class as j{name}"
            )));
        }
    }

    if dm1 + dm2 + dm3 != 0 || !triangle_ok(dj1, dj2, dj3) {
        return Ok(0.0);
    }

    // Racah sum over t; all factorial arguments below are halves of even numbers.
    let t_min = 0.max((dj2 - dj3 - dm1) / 2).max((dj1 - dj3 + dm2) / 2);
    let t_max = ((dj1 + dj2 - dj3) / 2)
        .min((dj1 - dm1) / 2)
        .min((dj2 + dm2) / 2);
    if t_min > t_max {
        return Ok(0.0);
    }

    let ln_pref = 0.5
        * (ln_triangle(dj1, dj2, dj3)
            + ln_factorial((dj1 + dm1) / 2)
            + ln_factorial((dj1 - dm1) / 2)
            + ln_factorial((dj2 + dm2) / 2)
            + ln_factorial((dj2 - dm2) / 2)
            + ln_factorial((dj3 + dm3) / 2)
            + ln_factorial((dj3 - dm3) / 2));

    let mut sum = 0.0f64;
    for t in t_min..=t_max {
        let ln_den = ln_factorial(t)
            + ln_factorial((dj1 + dj2 - dj3) / 2 - t)
            + ln_factorial((dj1 - dm1) / 2 - t)
            + ln_factorial((dj2 + dm2) / 2 - t)
            + ln_factorial((dj3 - dj2 + dm1) / 2 + t)
            + ln_factorial((dj3 - dj1 - dm2) / 2 + t);
        let term = (ln_pref - ln_den).exp();
        sum += if t % 2 == 0 { term } else { -term };
    }

    // Overall phase (-1)^(j1 - j2 - m3).
    let phase_exp = (dj1 - dj2 - dm3) / 2;
    Ok(if phase_exp.rem_euclid(2) == 0 {
        sum
    } else {
        -sum
    })
}

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | j3 m3>.
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, j3: f64, m3: f64) -> Result<f64> {
    let w = wigner3j(j1, j2, j3, m1, m2, -m3)?;
    let dj1 = check_j(j1, "j1")?;
    let dj2 = check_j(j2, "j2")?;
    let dj3 = check_j(j3, "j3")?;
    let dm3 = doubled(m3, "m3")?;
    let phase_exp = (dj1 - dj2 + dm3) / 2;
    let sign = if phase_exp.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    Ok(sign * ((dj3 + 1) as f64).sqrt() * w)
}

/// Wigner 6-j symbol {j1 j2 j3; j4 j5 j6}.
pub fn wigner6j(j1: f64, j2: f64, j3: f64, j4: f64, j5: f64, j6: f64) -> Result<f64> {
    let dj = [
        check_j(j1, "j1")?,
        check_j(j2, "j2")?,
        check_j(j3, "j3")?,
        check_j(j4, "j4")?,
        check_j(j5, "j5")?,
        check_j(j6, "j6")?,
    ];
    let triads = [
        (dj[0], dj[1], dj[2]),
        (dj[0], dj[4], dj[5]),
        (dj[3], dj[1], dj[5]),
        (dj[3], dj[4], dj[2]),
    ];
    if triads.iter().any(|&(a, b, c)| !triangle_ok(a, b, c)) {
        return Ok(0.0);
    }

    let ln_pref: f64 = triads
        .iter()
        .map(|&(a, b, c)| ln_triangle(a, b, c))
        .sum::<f64>()
        * 0.5;

    // Sum limits from the four triad sums and three opposing-pair sums.
    let a: Vec<i64> = triads.iter().map(|&(x, y, z)| (x + y + z) / 2).collect();
    let b1 = (dj[0] + dj[1] + dj[3] + dj[4]) / 2;
    let b2 = (dj[0] + dj[2] + dj[3] + dj[5]) / 2;
    let b3 = (dj[1] + dj[2] + dj[4] + dj[5]) / 2;

    let t_min = *a.iter().max().unwrap();
    let t_max = b1.min(b2).min(b3);
    let mut sum = 0.0f64;
    for t in t_min..=t_max {
        let ln_num = ln_factorial(t + 1);
        let ln_den = a.iter().map(|&ai| ln_factorial(t - ai)).sum::<f64>()
            + ln_factorial(b1 - t)
            + ln_factorial(b2 - t)
            + ln_factorial(b3 - t);
        let term = (ln_pref + ln_num - ln_den).exp();
        sum += if t % 2 == 0 { term } else { -term };
    }
    Ok(sum)
}
