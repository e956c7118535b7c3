//! Synthetic photon-count transmission scans and resonance extraction.
//!
//! A probe-frequency scan over the coupled system's resonances is modelled
//! as a sum of Lorentzian lines: each eigenstate contributes a line whose
//! half-width mixes the cavity and atomic decay rates by its photonic and
//! atomic weights. The detected rate converts the intracavity photon number
//! through the energy decay rate 2*kappa and the detection efficiency, on
//! top of a flat dark-count floor; per-bin counts are Poissonian. This
//! lineshape model is a stand-in on top of the eigenvalue calculation: the
//! static model itself carries no transmission amplitudes.

use crate::hamiltonian::Channel;
use crate::io::{csv_line, csv_rows, expect_header, fmt_f64, parse_field};
use crate::rng::{poisson, seeded};
use crate::{Error, Result};

/// Scan settings; the defaults mirror the reference measurement (25 MHz/ms,
/// 0.4 us bins, 2 ms sliding average, 5% detection efficiency, 60/s dark
/// counts per channel).
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub speed_mhz_per_ms: f64,
    /// Probe-detuning window (start, end), MHz; the scan runs start -> end.
    pub window_mhz: (f64, f64),
    pub bin_time_s: f64,
    pub average_window_s: f64,
    /// Overall detection efficiency for an intracavity photon.
    pub efficiency: f64,
    /// Dark-count rate per channel, counts/s.
    pub dark_rate_hz: f64,
    /// Mean intracavity photon number on resonance.
    pub nbar: f64,
    /// Critical photon number used as the weak-drive warning threshold.
    pub critical_photon_number: f64,
    pub kappa_mhz: f64,
    pub gamma_mhz: f64,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            speed_mhz_per_ms: 25.0,
            window_mhz: (-4500.0, -2800.0),
            bin_time_s: 0.4e-6,
            average_window_s: 2e-3,
            efficiency: 0.05,
            dark_rate_hz: 60.0,
            nbar: 0.04,
            critical_photon_number: 0.04,
            kappa_mhz: 1.3,
            gamma_mhz: 3.0,
            seed: 1,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_time_s > 0.0 && self.average_window_s > self.bin_time_s) {
            return Err(Error::invalid(
                "bin time must be positive and smaller than the averaging window",
            ));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid("efficiency must be in (0, 1]"));
        }
        if !(self.speed_mhz_per_ms > 0.0) {
            return Err(Error::invalid("scan speed must be positive"));
        }
        if self.window_mhz.1 <= self.window_mhz.0 {
            return Err(Error::invalid("scan window must have positive width"));
        }
        if self.dark_rate_hz < 0.0 || self.nbar < 0.0 {
            return Err(Error::invalid("rates must be nonnegative"));
        }
        Ok(())
    }

    pub fn speed_mhz_per_s(&self) -> f64 {
        self.speed_mhz_per_ms * 1e3
    }

    pub fn duration_s(&self) -> f64 {
        (self.window_mhz.1 - self.window_mhz.0) / self.speed_mhz_per_s()
    }

    /// Photon energy-decay rate out of the cavity, 1/s.
    pub fn output_rate_hz(&self) -> f64 {
        2.0 * 2.0 * std::f64::consts::PI * self.kappa_mhz * 1e6
    }
}

/// One resonance to synthesize: position, detection channel and the weight
/// split that sets its linewidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub center_mhz: f64,
    pub channel: Channel,
    pub photon_weight: f64,
    pub atomic_weight: f64,
}

impl Resonance {
    /// Lorentzian half-width: kappa and gamma mixed by the state weights.
    pub fn half_width_mhz(&self, scan: &ScanConfig) -> f64 {
        scan.kappa_mhz * self.photon_weight + scan.gamma_mhz * self.atomic_weight
    }
}

/// Photon-count record of one scan; counts are stored per bin and per
/// polarization channel, with the probe detuning an affine function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanTrace {
    pub start_delta_mhz: f64,
    pub speed_mhz_per_s: f64,
    pub bin_time_s: f64,
    pub counts_plus: Vec<u32>,
    pub counts_minus: Vec<u32>,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl ScanTrace {
    pub fn bins(&self) -> usize {
        self.counts_plus.len()
    }

    pub fn time_s(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.bin_time_s
    }

    pub fn delta_mhz(&self, bin: usize) -> f64 {
        self.start_delta_mhz + self.speed_mhz_per_s * self.time_s(bin)
    }

    pub fn counts(&self, channel: Channel) -> &[u32] {
        match channel {
            Channel::SigmaPlus => &self.counts_plus,
            Channel::SigmaMinus => &self.counts_minus,
        }
    }

    /// CSV with the mandatory header t_s,delta_p_MHz,counts_plus,counts_minus.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.bins() * 48 + 64);
        out.push_str("t_s,delta_p_MHz,counts_plus,counts_minus\n");
        for bin in 0..self.bins() {
            out.push_str(&csv_line(&[
                fmt_f64(self.time_s(bin)),
                fmt_f64(self.delta_mhz(bin)),
                self.counts_plus[bin].to_string(),
                self.counts_minus[bin].to_string(),
            ]));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<ScanTrace> {
        let rows = csv_rows(text);
        expect_header(
            &rows,
            &["t_s", "delta_p_MHz", "counts_plus", "counts_minus"],
        )?;
        let data = &rows[1..];
        if data.len() < 2 {
            return Err(Error::config("trace needs at least two bins", None, None));
        }
        let mut times = Vec::with_capacity(data.len());
        let mut deltas = Vec::with_capacity(data.len());
        let mut counts_plus = Vec::with_capacity(data.len());
        let mut counts_minus = Vec::with_capacity(data.len());
        for (line, fields) in data {
            if fields.len() != 4 {
                return Err(Error::config(
                    format!("expected 4 fields, got {}", fields.len()),
                    None,
                    Some(*line),
                ));
            }
            times.push(parse_field(&fields[0], "t_s", *line)?);
            deltas.push(parse_field(&fields[1], "delta_p_MHz", *line)?);
            counts_plus.push(parse_field(&fields[2], "counts_plus", *line)? as u32);
            counts_minus.push(parse_field(&fields[3], "counts_minus", *line)? as u32);
        }
        let bin_time = times[1] - times[0];
        let speed = (deltas[1] - deltas[0]) / bin_time;
        // The detuning must stay affine in time across the whole trace.
        for i in 0..times.len() {
            let expected = deltas[0] + speed * (times[i] - times[0]);
            if (deltas[i] - expected).abs()
                > 1e-6 * speed.abs().max(1.0) * bin_time.max(1e-9) * 10.0
            {
                return Err(Error::config(
                    "detuning column is not an affine function of time",
                    None,
                    Some(i + 2),
                ));
            }
        }
        Ok(ScanTrace {
            start_delta_mhz: deltas[0] - speed * times[0],
            speed_mhz_per_s: speed,
            bin_time_s: bin_time,
            counts_plus,
            counts_minus,
            seed: 0,
            warnings: Vec::new(),
        })
    }
}

/// Synthesize the Poissonian photon-count trace of one scan over the given
/// resonances. Deterministic for a fixed seed.
pub fn synthesize_scan(resonances: &[Resonance], scan: &ScanConfig) -> Result<ScanTrace> {
    scan.validate()?;
    for resonance in resonances {
        if resonance.center_mhz < scan.window_mhz.0 || resonance.center_mhz > scan.window_mhz.1 {
            return Err(Error::invalid(format!(
                "resonance at {} MHz lies outside the scan window {:?}",
                resonance.center_mhz, scan.window_mhz
            )));
        }
    }
    let mut warnings = Vec::new();
    if scan.nbar > scan.critical_photon_number {
        warnings.push(format!(
            "nbar = {} exceeds the critical photon number {}; the weak-drive picture degrades",
            scan.nbar, scan.critical_photon_number
        ));
    }

    let bins = (scan.duration_s() / scan.bin_time_s).round() as usize;
    let dark_per_bin = scan.dark_rate_hz * scan.bin_time_s;
    let amp = scan.nbar * scan.output_rate_hz() * scan.efficiency * scan.bin_time_s;
    let speed = scan.speed_mhz_per_s();

    let mut rng = seeded(scan.seed);
    let mut counts_plus = Vec::with_capacity(bins);
    let mut counts_minus = Vec::with_capacity(bins);
    for bin in 0..bins {
        let delta = scan.window_mhz.0 + speed * (bin as f64 + 0.5) * scan.bin_time_s;
        let mut mean_plus = dark_per_bin;
        let mut mean_minus = dark_per_bin;
        for resonance in resonances {
            let hw = resonance.half_width_mhz(scan);
            let x = delta - resonance.center_mhz;
            let lorentz = hw * hw / (x * x + hw * hw);
            match resonance.channel {
                Channel::SigmaPlus => mean_plus += amp * lorentz,
                Channel::SigmaMinus => mean_minus += amp * lorentz,
            }
        }
        counts_plus.push(poisson(&mut rng, mean_plus));
        counts_minus.push(poisson(&mut rng, mean_minus));
    }
    Ok(ScanTrace {
        start_delta_mhz: scan.window_mhz.0,
        speed_mhz_per_s: speed,
        bin_time_s: scan.bin_time_s,
        counts_plus,
        counts_minus,
        seed: scan.seed,
        warnings,
    })
}

/// Expected detected count rate (counts/s) at one detuning for a channel;
/// the noiseless version of [`synthesize_scan`].
pub fn expected_rate_hz(
    resonances: &[Resonance],
    scan: &ScanConfig,
    channel: Channel,
    delta_mhz: f64,
) -> f64 {
    let mut rate = scan.dark_rate_hz;
    for resonance in resonances.iter().filter(|r| r.channel == channel) {
        let hw = resonance.half_width_mhz(scan);
        let x = delta_mhz - resonance.center_mhz;
        rate += scan.nbar * scan.output_rate_hz() * scan.efficiency * hw * hw / (x * x + hw * hw);
    }
    rate
}

/// Centered boxcar mean; edges use the truncated window.
pub fn sliding_average(counts: &[u32], window_bins: usize) -> Vec<f64> {
    let n = counts.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0u64);
    for &c in counts {
        prefix.push(prefix.last().unwrap() + c as u64);
    }
    let half = window_bins / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) as f64 / (hi - lo) as f64
        })
        .collect()
}

/// One detected resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub center_mhz: f64,
    pub channel: Channel,
    /// Smoothed count rate at the peak, counts/s.
    pub peak_rate_hz: f64,
    pub uncertainty_mhz: f64,
}

/// Smooth both channels with the configured sliding average and extract
/// resonance centers: threshold detection on the smoothed trace, a parabolic
/// seed at the smoothed maximum, then a Lorentzian-weighted centroid
/// refinement on the raw bins (the smoothing window is orders of magnitude
/// wider than the lines, so the smoothed apex alone cannot localize a peak).
pub fn smooth_and_detect(trace: &ScanTrace, scan: &ScanConfig) -> Result<Vec<Detection>> {
    let window_bins = (scan.average_window_s / trace.bin_time_s).round() as usize;
    if window_bins == 0 || window_bins > trace.bins() {
        return Err(Error::invalid(format!(
            "averaging window of {window_bins} bins does not fit a trace of {} bins",
            trace.bins()
        )));
    }
    let dark_per_bin = scan.dark_rate_hz * trace.bin_time_s;
    let threshold = dark_per_bin + 5.0 * (dark_per_bin / window_bins as f64).sqrt();

    let mut detections = Vec::new();
    for channel in [Channel::SigmaPlus, Channel::SigmaMinus] {
        let raw = trace.counts(channel);
        let smoothed = sliding_average(raw, window_bins);

        // Contiguous above-threshold runs, merged when closer than a window.
        let mut runs: Vec<(usize, usize)> = Vec::new();
        let mut start: Option<usize> = None;
        for (i, &s) in smoothed.iter().enumerate() {
            if s > threshold {
                if start.is_none() {
                    start = Some(i);
                }
            } else if let Some(s0) = start.take() {
                runs.push((s0, i - 1));
            }
        }
        if let Some(s0) = start {
            runs.push((s0, smoothed.len() - 1));
        }
        let mut merged: Vec<(usize, usize)> = Vec::new();
        for run in runs {
            match merged.last_mut() {
                Some(last) if run.0 <= last.1 + window_bins => last.1 = run.1,
                _ => merged.push(run),
            }
        }

        for (lo, hi) in merged {
            let apex = (lo..=hi)
                .max_by(|&a, &b| smoothed[a].partial_cmp(&smoothed[b]).unwrap())
                .unwrap();
            // Three-point parabolic interpolation of the smoothed maximum.
            let mut center = trace.delta_mhz(apex);
            if apex > 0 && apex + 1 < smoothed.len() {
                let (ym, y0, yp) = (smoothed[apex - 1], smoothed[apex], smoothed[apex + 1]);
                let denom = ym - 2.0 * y0 + yp;
                if denom.abs() > f64::EPSILON {
                    let shift = 0.5 * (ym - yp) / denom;
                    center += shift.clamp(-1.0, 1.0)
                        * (trace.delta_mhz(apex + 1) - trace.delta_mhz(apex));
                }
            }

            // Refinement region: the run plus one window on each side.
            let r_lo = lo.saturating_sub(window_bins);
            let r_hi = (hi + window_bins).min(raw.len() - 1);
            let half_width = scan.kappa_mhz + scan.gamma_mhz;
            let mut excess = 0.0;
            for bin in r_lo..=r_hi {
                excess += (raw[bin] as f64 - dark_per_bin).max(0.0);
            }
            for _ in 0..40 {
                let mut num = 0.0;
                let mut den = 0.0;
                for bin in r_lo..=r_hi {
                    let weight_count = (raw[bin] as f64 - dark_per_bin).max(0.0);
                    if weight_count == 0.0 {
                        continue;
                    }
                    let x = trace.delta_mhz(bin) - center;
                    let w = half_width * half_width / (x * x + half_width * half_width);
                    num += w * weight_count * trace.delta_mhz(bin);
                    den += w * weight_count;
                }
                if den <= 0.0 {
                    break;
                }
                let next = num / den;
                let moved = (next - center).abs();
                center = next;
                if moved < 1e-4 {
                    break;
                }
            }

            let bin_mhz = trace.speed_mhz_per_s * trace.bin_time_s;
            let counting = if excess > 0.0 {
                half_width * std::f64::consts::SQRT_2 / excess.sqrt()
            } else {
                f64::INFINITY
            };
            detections.push(Detection {
                center_mhz: center,
                channel,
                peak_rate_hz: smoothed[apex] / trace.bin_time_s,
                uncertainty_mhz: counting.max(bin_mhz),
            });
        }
    }
    detections.sort_by(|a, b| a.center_mhz.partial_cmp(&b.center_mhz).unwrap());
    Ok(detections)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn test_scan(window: (f64, f64), nbar: f64, seed: u64) -> ScanConfig {
        ScanConfig {
            window_mhz: window,
            nbar,
            seed,
            ..ScanConfig::default()
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let scan = test_scan((-50.0, 50.0), 0.04, 9);
        let resonances = [Resonance {
            center_mhz: 0.0,
            channel: Channel::SigmaPlus,
            photon_weight: 1.0,
            atomic_weight: 0.0,
        }];
        let a = synthesize_scan(&resonances, &scan).unwrap();
        let b = synthesize_scan(&resonances, &scan).unwrap();
        assert_eq!(a, b);
        let c = synthesize_scan(
            &resonances,
            &ScanConfig {
                seed: 10,
                ..scan.clone()
            },
        )
        .unwrap();
        assert_ne!(a.counts_plus, c.counts_plus);
    }

    #[test]
    fn dark_counts_only() {
        // An empty resonance list yields a pure dark-count trace; over 8 s at
        // 60/s each channel collects about 480 counts.
        let scan = ScanConfig {
            window_mhz: (0.0, 25_000.0 * 8.0),
            seed: 4,
            ..ScanConfig::default()
        };
        let trace = synthesize_scan(&[], &scan).unwrap();
        assert_abs_diff_eq!(trace.bin_time_s * trace.bins() as f64, 8.0, epsilon = 1e-6);
        for channel in [Channel::SigmaPlus, Channel::SigmaMinus] {
            let total: u64 = trace.counts(channel).iter().map(|&c| c as u64).sum();
            let expected = 480.0f64;
            let sigma = expected.sqrt();
            assert!(
                (total as f64 - expected).abs() < 5.0 * sigma,
                "{channel:?}: {total}"
            );
        }
        // Zero efficiency is the same thing with resonances present.
        let scan = ScanConfig {
            window_mhz: (-100.0, 100.0),
            efficiency: f64::MIN_POSITIVE,
            ..ScanConfig::default()
        };
        let resonances = [Resonance {
            center_mhz: 0.0,
            channel: Channel::SigmaPlus,
            photon_weight: 1.0,
            atomic_weight: 0.0,
        }];
        let trace = synthesize_scan(&resonances, &scan).unwrap();
        let total: u64 = trace.counts_plus.iter().map(|&c| c as u64).sum();
        assert!((total as f64) < 60.0 * trace.duration_ish() * 3.0);
    }

    impl ScanTrace {
        fn duration_ish(&self) -> f64 {
            self.bins() as f64 * self.bin_time_s
        }
    }

    #[test]
    fn mean_trace_converges_to_expected_rate() {
        // Average many short synthetic traces against the analytic rate.
        let scan = test_scan((-6.0, 6.0), 0.5, 0);
        let resonances = [Resonance {
            center_mhz: 0.0,
            channel: Channel::SigmaPlus,
            photon_weight: 0.7,
            atomic_weight: 0.3,
        }];
        let reps = 1000;
        let bins = synthesize_scan(&resonances, &scan).unwrap().bins();
        let mut sums = vec![0.0f64; bins];
        for seed in 0..reps {
            let trace = synthesize_scan(
                &resonances,
                &ScanConfig {
                    seed,
                    ..scan.clone()
                },
            )
            .unwrap();
            for (s, &c) in sums.iter_mut().zip(&trace.counts_plus) {
                *s += c as f64;
            }
        }
        let template = synthesize_scan(&resonances, &scan).unwrap();
        for bin in (0..bins).step_by(97) {
            let mean = sums[bin] / reps as f64;
            let expected = expected_rate_hz(
                &resonances,
                &scan,
                Channel::SigmaPlus,
                template.delta_mhz(bin),
            ) * scan.bin_time_s;
            let tol = 3.0 * (expected / reps as f64).sqrt() + 1e-12;
            assert!(
                (mean - expected).abs() <= tol,
                "bin {bin}: {mean} vs {expected} (tol {tol})"
            );
        }
    }

    #[test]
    fn purely_photonic_line_has_cavity_width() {
        // A resonance with full photonic weight carries the cavity linewidth:
        // FWHM of the expected trace is 2 kappa = 2.6 MHz.
        let scan = test_scan((-40.0, 40.0), 0.1, 0);
        let resonances = [Resonance {
            center_mhz: 0.0,
            channel: Channel::SigmaPlus,
            photon_weight: 1.0,
            atomic_weight: 0.0,
        }];
        let dark = scan.dark_rate_hz;
        let peak = expected_rate_hz(&resonances, &scan, Channel::SigmaPlus, 0.0) - dark;
        let half = |delta: f64| {
            expected_rate_hz(&resonances, &scan, Channel::SigmaPlus, delta) - dark - peak / 2.0
        };
        // Bisect the half-maximum crossing on the positive side.
        let (mut lo, mut hi) = (0.0f64, 20.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if half(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let fwhm = 2.0 * 0.5 * (lo + hi);
        assert_abs_diff_eq!(fwhm, 2.0 * scan.kappa_mhz, epsilon = 1e-6);
    }

    #[test]
    fn sliding_average_preserves_interior_mass() {
        let counts: Vec<u32> = (0..500).map(|i| (i * 7919) as u32 % 5).collect();
        let window = 11;
        let smoothed = sliding_average(&counts, window);
        // On the interior the boxcar redistributes but conserves the total.
        let lo = window;
        let hi = counts.len() - window;
        let raw_sum: f64 = counts[lo..hi].iter().map(|&c| c as f64).sum();
        let smooth_sum: f64 = smoothed[lo..hi].iter().sum();
        assert!((raw_sum - smooth_sum).abs() <= (window as f64) * 4.0 * 2.0);
        // Exact for a constant trace, including edges.
        let flat = vec![3u32; 100];
        for v in sliding_average(&flat, 9) {
            assert_abs_diff_eq!(v, 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn noiseless_peak_center_is_exact() {
        // Noise-free synthetic trace built from the expected rates.
        let scan = test_scan((-60.0, 60.0), 0.5, 0);
        let resonances = [Resonance {
            center_mhz: 7.3,
            channel: Channel::SigmaMinus,
            photon_weight: 1.0,
            atomic_weight: 0.0,
        }];
        let bins = (scan.duration_s() / scan.bin_time_s).round() as usize;
        let mut counts = vec![0u32; bins];
        // Amplify to make rounding negligible.
        for (bin, count) in counts.iter_mut().enumerate() {
            let delta =
                scan.window_mhz.0 + scan.speed_mhz_per_s() * (bin as f64 + 0.5) * scan.bin_time_s;
            let rate = expected_rate_hz(&resonances, &scan, Channel::SigmaMinus, delta);
            *count = (rate * scan.bin_time_s * 1e4).round() as u32;
        }
        let trace = ScanTrace {
            start_delta_mhz: scan.window_mhz.0,
            speed_mhz_per_s: scan.speed_mhz_per_s(),
            bin_time_s: scan.bin_time_s,
            counts_plus: vec![0; bins],
            counts_minus: counts,
            seed: 0,
            warnings: Vec::new(),
        };
        // The dark floor in the detector is scaled up by the same factor.
        let detect_scan = ScanConfig {
            dark_rate_hz: scan.dark_rate_hz * 1e4,
            ..scan
        };
        let detections = smooth_and_detect(&trace, &detect_scan).unwrap();
        assert_eq!(detections.len(), 1);
        assert_eq!(detections[0].channel, Channel::SigmaMinus);
        let bin_mhz = trace.speed_mhz_per_s * trace.bin_time_s;
        assert!(
            (detections[0].center_mhz - 7.3).abs() <= bin_mhz,
            "center {}",
            detections[0].center_mhz
        );
    }

    #[test]
    fn close_peaks_merge() {
        // 1.7 MHz apart with 2.6 MHz widths: unresolvable, one detection.
        let scan = test_scan((-60.0, 60.0), 2.0, 3);
        let resonances = [
            Resonance {
                center_mhz: -0.85,
                channel: Channel::SigmaPlus,
                photon_weight: 1.0,
                atomic_weight: 0.0,
            },
            Resonance {
                center_mhz: 0.85,
                channel: Channel::SigmaPlus,
                photon_weight: 1.0,
                atomic_weight: 0.0,
            },
        ];
        let trace = synthesize_scan(&resonances, &scan).unwrap();
        let detections = smooth_and_detect(&trace, &scan).unwrap();
        let plus: Vec<_> = detections
            .iter()
            .filter(|d| d.channel == Channel::SigmaPlus)
            .collect();
        assert_eq!(plus.len(), 1);
        assert!(plus[0].center_mhz.abs() < 1.0);
    }

    #[test]
    fn recovered_centers_are_unbiased() {
        // Monte-Carlo over seeds at reference noise settings: the mean
        // recovered center must sit on the configured one.
        let scan = test_scan((-80.0, 40.0), 5.0, 0);
        let truth = -23.4;
        let resonances = [Resonance {
            center_mhz: truth,
            channel: Channel::SigmaPlus,
            photon_weight: 0.55,
            atomic_weight: 0.45,
        }];
        let mut errors = Vec::new();
        for seed in 0..100 {
            let trace = synthesize_scan(
                &resonances,
                &ScanConfig {
                    seed,
                    ..scan.clone()
                },
            )
            .unwrap();
            let detections = smooth_and_detect(&trace, &scan).unwrap();
            let best = detections
                .iter()
                .filter(|d| d.channel == Channel::SigmaPlus)
                .min_by(|a, b| {
                    (a.center_mhz - truth)
                        .abs()
                        .partial_cmp(&(b.center_mhz - truth).abs())
                        .unwrap()
                })
                .expect("peak detected");
            errors.push(best.center_mhz - truth);
        }
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        assert!(mean.abs() < 0.1, "mean error {mean}");
        let worst = errors.iter().cloned().fold(0.0f64, |a, e| a.max(e.abs()));
        assert!(worst < 0.5, "worst error {worst}");
    }

    #[test]
    fn csv_round_trip() {
        let scan = test_scan((-30.0, 30.0), 0.2, 11);
        let resonances = [Resonance {
            center_mhz: 5.0,
            channel: Channel::SigmaPlus,
            photon_weight: 0.5,
            atomic_weight: 0.5,
        }];
        let trace = synthesize_scan(&resonances, &scan).unwrap();
        let text = trace.to_csv();
        let back = ScanTrace::from_csv(&text).unwrap();
        assert_eq!(back.counts_plus, trace.counts_plus);
        assert_eq!(back.counts_minus, trace.counts_minus);
        assert_abs_diff_eq!(back.start_delta_mhz, trace.start_delta_mhz, epsilon = 1e-9);
        assert_abs_diff_eq!(
            back.speed_mhz_per_s,
            trace.speed_mhz_per_s,
            epsilon = 1e-6 * trace.speed_mhz_per_s
        );
        assert_abs_diff_eq!(back.bin_time_s, trace.bin_time_s, epsilon = 1e-15);
    }

    #[test]
    fn window_checks() {
        let scan = test_scan((-10.0, 10.0), 0.04, 0);
        let outside = [Resonance {
            center_mhz: 50.0,
            channel: Channel::SigmaPlus,
            photon_weight: 1.0,
            atomic_weight: 0.0,
        }];
        assert!(synthesize_scan(&outside, &scan).is_err());
        // Averaging window longer than the trace is rejected.
        let trace = synthesize_scan(&[], &scan).unwrap();
        let bad = ScanConfig {
            average_window_s: 10.0,
            ..scan
        };
        assert!(smooth_and_detect(&trace, &bad).is_err());
        // Above-critical drive raises a warning.
        let hot = ScanConfig {
            nbar: 1.0,
            ..test_scan((-10.0, 10.0), 1.0, 0)
        };
        let trace = synthesize_scan(&[], &hot).unwrap();
        assert!(!trace.warnings.is_empty());
    }
}
