//! Command-line front end tying the simulation modules together.
//!
//! Every run resolves one configuration (defaults = the reference
//! experiment's parameters, overridable through a flat key=value file),
//! executes a module pipeline, writes CSV outputs plus a manifest with
//! SHA-256 digests, and exits 0 on success, 1 on configuration errors and
//! 2 on numeric failures.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use becqed::atomic::DipoleTable;
use becqed::config::{parse_config, parse_config_text, parse_grid, RunConfig};
use becqed::fit::{fit_spectrum, fit_sqrt_law, SpectrumFitOptions, SqrtLawMode};
use becqed::geometry::{cavity_derived, figures_of_merit, transport_kinematics};
use becqed::gpe::{overlap_factor, solve_ground_state, u0_empirical, u0_sweep, SolveOptions};
use becqed::hamiltonian::{
    enumerate_basis, lower_branch_detuning, solve_at, spectrum_sweep, Channel, OverlapModel,
    Populations, SystemConfig,
};
use becqed::io::{csv_line, csv_rows, expect_header, fmt_f64, parse_field};
use becqed::scan::{smooth_and_detect, synthesize_scan, Resonance};

use manifest::Manifest;

#[derive(Parser)]
#[command(
    name = "becqed",
    about = "Coupled BEC-cavity spectra, condensate overlap, transmission scans and fits",
    version
)]
struct Cli {
    /// Configuration file (key = value lines); defaults reproduce the
    /// reference experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the random seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the full dipole-coupling table as CSV.
    Atom,
    /// Derived cavity geometry and figures of merit.
    Geometry {
        /// Also write the record as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Optical-conveyor transport kinematics and trajectory.
    Transport,
    /// Eigenspectrum of the coupled system over a cavity-detuning grid.
    Spectrum {
        /// Grid start:stop:count (linear) or start:stop:logN.
        #[arg(long, default_value = "-8000:4000:481", allow_hyphen_values = true)]
        grid: String,
    },
    /// Lower-branch detuning versus atom number, full solve next to the
    /// closed form, per polarization channel.
    Normalmode {
        /// Atom-number grid start:stop:count or start:stop:logN.
        #[arg(long = "N", default_value = "2500:200000:log12")]
        n_grid: String,
    },
    /// Condensate ground state: chemical potential and mode overlap.
    Gpe {
        /// Comma-separated atom numbers: sweep U0(N) instead of one solve.
        #[arg(long)]
        sweep: Option<String>,
        /// Write central density slices as CSV.
        #[arg(long)]
        slices: bool,
    },
    /// Synthesize a transmission scan at the configured cavity detuning and
    /// extract the resonances back out of it.
    Scan,
    /// Least-squares fits of measured data.
    Fit {
        /// CSV data file.
        #[arg(long)]
        data: PathBuf,
        /// sqrt: N,delta_p_MHz,channel against the normal-mode law.
        /// spectrum: delta_c_MHz,delta_p_MHz,channel against the full model.
        #[arg(long)]
        mode: FitMode,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum FitMode {
    Sqrt,
    Spectrum,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Usage problems are configuration errors: exit 1.
            eprintln!("{err}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<becqed::Error>() {
                Some(becqed::Error::Numeric(_)) | Some(becqed::Error::Fit(_)) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => parse_config(path)?,
        None => parse_config_text("")?,
    };
    if let Some(seed) = cli.seed {
        config.scan.seed = seed;
        for entry in config.resolved.iter_mut() {
            if entry.0 == "scan.seed" {
                entry.1 = seed.to_string();
            }
        }
    }
    Ok(config)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = load_config(&cli)?;
    let out = cli.out.clone();
    match &cli.command {
        Command::Atom => cmd_atom(&config, &out),
        Command::Geometry { csv } => cmd_geometry(&config, &out, *csv),
        Command::Transport => cmd_transport(&config, &out),
        Command::Spectrum { grid } => cmd_spectrum(&config, &out, grid),
        Command::Normalmode { n_grid } => cmd_normalmode(&config, &out, n_grid),
        Command::Gpe { sweep, slices } => cmd_gpe(&config, &out, sweep.as_deref(), *slices),
        Command::Scan => cmd_scan(&config, &out, cli.config.as_deref()),
        Command::Fit { data, mode } => cmd_fit(&config, &out, data, *mode),
    }
}

fn cmd_atom(config: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let table = DipoleTable::build();
    let mut csv = String::from("F,mF,Fp,mFp,q,c,c_squared,detuning_MHz\n");
    for entry in &table.entries {
        csv.push_str(&csv_line(&[
            entry.ground.f.to_string(),
            entry.ground.m_f.to_string(),
            entry.excited.f.to_string(),
            entry.excited.m_f.to_string(),
            entry.q.to_string(),
            fmt_f64(entry.c),
            fmt_f64(entry.c * entry.c),
            fmt_f64(becqed::atomic::transition_detuning_mhz(
                &entry.ground,
                &entry.excited,
            )),
        ]));
        csv.push('\n');
    }
    let mut manifest = Manifest::new("atom", &config.resolved);
    manifest.note("entries", table.entries.len());
    manifest.note("normalization", table.normalization);
    manifest.write_output(&out.join("atom_table.csv"), &csv)?;
    manifest.finish(&out.join("atom_manifest.txt"))?;
    println!(
        "wrote {} transitions to {}",
        table.entries.len(),
        out.join("atom_table.csv").display()
    );
    Ok(())
}

fn cmd_geometry(config: &RunConfig, out: &Path, csv: bool) -> anyhow::Result<()> {
    let geom = &config.system.geometry;
    let derived = cavity_derived(geom)?;
    let n = config.system.populations.total().max(1.0);
    let g_eff = config.system.effective_u0()? * config.system.g_sigma_plus_mhz;
    let merit = figures_of_merit(
        config.g0_mhz,
        g_eff,
        n,
        geom.kappa_mhz,
        geom.gamma_mhz,
        geom.stabilization_wavelength_m,
    )?;
    let rows: Vec<(&str, f64)> = vec![
        ("waist_m", derived.waist_m),
        ("free_spectral_range_MHz", derived.free_spectral_range_mhz),
        ("transverse_spacing_MHz", derived.transverse_spacing_mhz),
        ("critical_photon_number", merit.critical_photon_number),
        ("cooperativity", merit.cooperativity),
        ("recoil_frequency_Hz", merit.recoil_frequency_hz),
        ("g_effective_MHz", g_eff),
        ("atom_number", n),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap();
    let mut text = String::new();
    for (key, value) in &rows {
        text.push_str(&format!("{key:width$} = {}\n", fmt_f64(*value)));
    }
    print!("{text}");
    let mut manifest = Manifest::new("geometry", &config.resolved);
    manifest.write_output(&out.join("geometry.txt"), &text)?;
    if csv {
        let mut csv_text = String::from("quantity,value\n");
        for (key, value) in &rows {
            csv_text.push_str(&format!("{key},{}\n", fmt_f64(*value)));
        }
        manifest.write_output(&out.join("geometry.csv"), &csv_text)?;
    }
    manifest.finish(&out.join("geometry_manifest.txt"))?;
    Ok(())
}

fn cmd_transport(config: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let kinematics = transport_kinematics(&config.transport)?;
    let mut csv = String::from("t_s,delta_Hz,v_m_per_s,a_m_per_s2,x_m\n");
    for p in &kinematics.trajectory {
        csv.push_str(&csv_line(&[
            fmt_f64(p.t_s),
            fmt_f64(p.delta_hz),
            fmt_f64(p.velocity_m_per_s),
            fmt_f64(p.acceleration_m_per_s2),
            fmt_f64(p.position_m),
        ]));
        csv.push('\n');
    }
    let mut manifest = Manifest::new("transport", &config.resolved);
    manifest.note("v_max_m_per_s", fmt_f64(kinematics.v_max_m_per_s));
    manifest.note("a_max_m_per_s2", fmt_f64(kinematics.a_max_m_per_s2));
    manifest.note("distance_m", fmt_f64(kinematics.distance_m));
    manifest.write_output(&out.join("transport.csv"), &csv)?;
    manifest.finish(&out.join("transport_manifest.txt"))?;
    println!(
        "v_max = {:.4} m/s, a_max = {:.3} m/s^2, distance = {:.4} m",
        kinematics.v_max_m_per_s, kinematics.a_max_m_per_s2, kinematics.distance_m
    );
    Ok(())
}

fn cmd_spectrum(config: &RunConfig, out: &Path, grid_spec: &str) -> anyhow::Result<()> {
    config.require_populated_system()?;
    let grid = parse_grid(grid_spec)?;
    let sweep = spectrum_sweep(&config.system, &grid)?;
    let mut csv =
        String::from("delta_c_MHz,delta_p_MHz,w_sigma_plus,w_sigma_minus,w_transverse,branch_id\n");
    for branch in &sweep.branches {
        for i in 0..branch.delta_c_mhz.len() {
            csv.push_str(&csv_line(&[
                fmt_f64(branch.delta_c_mhz[i]),
                fmt_f64(branch.delta_p_mhz[i]),
                fmt_f64(branch.weights[i].sigma_plus),
                fmt_f64(branch.weights[i].sigma_minus),
                fmt_f64(branch.weights[i].transverse),
                branch.branch_id.to_string(),
            ]));
            csv.push('\n');
        }
    }
    let mut manifest = Manifest::new("spectrum", &config.resolved);
    manifest.note("grid", grid_spec);
    manifest.note("branches", sweep.branches.len());
    for channel in [Channel::SigmaPlus, Channel::SigmaMinus] {
        if let Some(crossing) = sweep.f2_crossing(channel) {
            manifest.note(
                &format!("f2_crossing.{}", channel.label()),
                format!(
                    "center_dc_MHz={} gap_MHz={} shift_MHz={}",
                    fmt_f64(crossing.center_delta_c_mhz),
                    fmt_f64(crossing.gap_mhz),
                    fmt_f64(crossing.shift_mhz)
                ),
            );
            println!(
                "{} F=2 crossing: center {:.1} MHz, gap {:.1} MHz, shift {:.1} MHz",
                channel.label(),
                crossing.center_delta_c_mhz,
                crossing.gap_mhz,
                crossing.shift_mhz
            );
        }
    }
    manifest.write_output(&out.join("spectrum.csv"), &csv)?;
    manifest.finish(&out.join("spectrum_manifest.txt"))?;
    println!(
        "wrote {} branches x {} grid points to {}",
        sweep.branches.len(),
        grid.len(),
        out.join("spectrum.csv").display()
    );
    Ok(())
}

fn cmd_normalmode(config: &RunConfig, out: &Path, n_spec: &str) -> anyhow::Result<()> {
    let atom_numbers = parse_grid(n_spec)?;
    let mut csv = String::from("N,channel,delta_p_full_MHz,delta_p_closed_MHz\n");
    for &n in &atom_numbers {
        // The normal-mode protocol: the condensate sits entirely in |1,-1>
        // and the overlap follows the empirical N dependence.
        let mut populations = Populations::zero();
        populations.set(1, -1, n)?;
        let system = SystemConfig {
            populations,
            overlap: OverlapModel::FromTotalAtomNumber,
            ..config.system.clone()
        };
        for channel in [Channel::SigmaPlus, Channel::SigmaMinus] {
            let lower = lower_branch_detuning(&system, channel)?;
            csv.push_str(&csv_line(&[
                fmt_f64(n),
                channel.label().to_string(),
                fmt_f64(lower.full_mhz),
                fmt_f64(lower.closed_form_mhz),
            ]));
            csv.push('\n');
        }
    }
    let mut manifest = Manifest::new("normalmode", &config.resolved);
    manifest.note("N_grid", n_spec);
    manifest.write_output(&out.join("normalmode.csv"), &csv)?;
    manifest.finish(&out.join("normalmode_manifest.txt"))?;
    println!(
        "wrote lower-branch detunings for {} atom numbers to {}",
        atom_numbers.len(),
        out.join("normalmode.csv").display()
    );
    Ok(())
}

fn cmd_gpe(
    config: &RunConfig,
    out: &Path,
    sweep: Option<&str>,
    slices: bool,
) -> anyhow::Result<()> {
    let mut manifest = Manifest::new("gpe", &config.resolved);
    if let Some(list) = sweep {
        let atom_numbers: Vec<f64> = list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| becqed::Error::invalid(format!("bad atom number {s:?}")))
            })
            .collect::<Result<_, _>>()?;
        let rows = u0_sweep(&config.trap, &SolveOptions::default(), &atom_numbers)?;
        let mut csv = String::from("N,U0_solver,U0_empirical\n");
        for (n, solver, empirical) in &rows {
            csv.push_str(&csv_line(&[
                fmt_f64(*n),
                fmt_f64(*solver),
                fmt_f64(*empirical),
            ]));
            csv.push('\n');
            println!("N = {n:>10.0}: U0 = {solver:.4} (empirical {empirical:.4})");
        }
        manifest.write_output(&out.join("gpe_sweep.csv"), &csv)?;
        manifest.finish(&out.join("gpe_manifest.txt"))?;
        return Ok(());
    }

    let solution = solve_ground_state(&config.trap)?;
    let u0 = overlap_factor(&solution, config.trap.probe_waist_m, 0)?;
    let e_rec = config.trap.recoil_frequency_hz();
    let rows: Vec<(&str, String)> = vec![
        ("mu_Hz", fmt_f64(solution.mu_hz)),
        ("mu_over_Erec", fmt_f64(solution.mu_hz / e_rec)),
        (
            "energy_per_particle_Hz",
            fmt_f64(solution.energy_per_particle_hz),
        ),
        ("U0", fmt_f64(u0)),
        (
            "U0_empirical",
            fmt_f64(u0_empirical(config.trap.atom_number)?),
        ),
        (
            "grid",
            format!(
                "{}x{}x{}",
                solution.grid.points[0], solution.grid.points[1], solution.grid.points[2]
            ),
        ),
        (
            "extents_m",
            format!(
                "{},{},{}",
                fmt_f64(solution.grid.extents_m[0]),
                fmt_f64(solution.grid.extents_m[1]),
                fmt_f64(solution.grid.extents_m[2])
            ),
        ),
        ("iterations", solution.report.steps.to_string()),
        ("converged", solution.report.converged.to_string()),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap();
    let mut text = String::new();
    for (key, value) in &rows {
        text.push_str(&format!("{key:width$} = {value}\n"));
    }
    print!("{text}");
    manifest.write_output(&out.join("gpe_summary.txt"), &text)?;

    if slices {
        let grid = &solution.grid;
        let [nx, ny, nz] = grid.points;
        let planes: [(&str, usize, usize, usize); 3] = [
            ("gpe_slice_xy.csv", 0, 1, nz / 2),
            ("gpe_slice_xz.csv", 0, 2, ny / 2),
            ("gpe_slice_yz.csv", 1, 2, nx / 2),
        ];
        for (name, a, b, fixed) in planes {
            let mut csv = format!(
                "{}_m,{}_m,density_per_m3\n",
                ["x", "y", "z"][a],
                ["x", "y", "z"][b]
            );
            let (na, nb) = (grid.points[a], grid.points[b]);
            for ia in 0..na {
                for ib in 0..nb {
                    let idx = match (a, b) {
                        (0, 1) => (ia * ny + ib) * nz + fixed,
                        (0, 2) => (ia * ny + fixed) * nz + ib,
                        (1, 2) => (fixed * ny + ia) * nz + ib,
                        _ => unreachable!(),
                    };
                    csv.push_str(&csv_line(&[
                        fmt_f64(grid.coord(a, ia)),
                        fmt_f64(grid.coord(b, ib)),
                        fmt_f64(solution.density[idx] * solution.atom_number),
                    ]));
                    csv.push('\n');
                }
            }
            manifest.write_output(&out.join(name), &csv)?;
        }
    }
    manifest.finish(&out.join("gpe_manifest.txt"))?;
    Ok(())
}

fn cmd_scan(config: &RunConfig, out: &Path, config_path: Option<&Path>) -> anyhow::Result<()> {
    config.require_populated_system()?;
    // Resonances of the coupled system at the configured cavity detuning.
    let basis = enumerate_basis(&config.system)?;
    let point = solve_at(&config.system, &basis, config.system.delta_c_mhz)?;
    let mut resonances = Vec::new();
    for (value, weights) in point.values.iter().zip(&point.weights) {
        let photonic = weights.total_photonic();
        if photonic < 1e-3 {
            continue;
        }
        if *value < config.scan.window_mhz.0 || *value > config.scan.window_mhz.1 {
            continue;
        }
        resonances.push(Resonance {
            center_mhz: *value,
            channel: weights.channel(),
            photon_weight: photonic,
            atomic_weight: 1.0 - photonic,
        });
    }
    let trace = synthesize_scan(&resonances, &config.scan)?;
    for warning in &trace.warnings {
        eprintln!("warning: {warning}");
    }
    let detections = smooth_and_detect(&trace, &config.scan)?;

    let mut manifest = Manifest::new("scan", &config.resolved);
    if let Some(path) = config_path {
        manifest.record_input(path)?;
    }
    manifest.note("delta_c_MHz", fmt_f64(config.system.delta_c_mhz));
    manifest.note("resonances", resonances.len());
    manifest.note("seed", config.scan.seed);
    manifest.write_output(&out.join("scan_trace.csv"), &trace.to_csv())?;

    let mut csv = String::from("center_MHz,channel,peak_rate_hz,uncertainty_MHz\n");
    for d in &detections {
        csv.push_str(&csv_line(&[
            fmt_f64(d.center_mhz),
            d.channel.label().to_string(),
            fmt_f64(d.peak_rate_hz),
            fmt_f64(d.uncertainty_mhz),
        ]));
        csv.push('\n');
        println!(
            "detected {} resonance at {:.2} MHz (+/- {:.2} MHz)",
            d.channel.label(),
            d.center_mhz,
            d.uncertainty_mhz
        );
    }
    manifest.write_output(&out.join("scan_detections.csv"), &csv)?;
    manifest.finish(&out.join("scan_manifest.txt"))?;
    println!(
        "synthesized {} resonances, detected {}",
        resonances.len(),
        detections.len()
    );
    Ok(())
}

fn parse_channel(label: &str, line: usize) -> anyhow::Result<Channel> {
    match label {
        "sigma_plus" => Ok(Channel::SigmaPlus),
        "sigma_minus" => Ok(Channel::SigmaMinus),
        other => Err(becqed::Error::config(
            format!("unknown channel {other:?} (use sigma_plus or sigma_minus)"),
            Some("channel"),
            Some(line),
        )
        .into()),
    }
}

fn cmd_fit(config: &RunConfig, out: &Path, data: &Path, mode: FitMode) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(data).map_err(|e| {
        becqed::Error::config(format!("cannot read {}: {e}", data.display()), None, None)
    })?;
    let rows = csv_rows(&text);
    let mut manifest = Manifest::new("fit", &config.resolved);
    manifest.record_input(data)?;

    let mut result_text = String::new();
    let mut residual_csv = String::new();
    match mode {
        FitMode::Sqrt => {
            expect_header(&rows, &["N", "delta_p_MHz", "channel"])?;
            let mut points = Vec::new();
            for (line, fields) in &rows[1..] {
                if fields.len() != 3 {
                    return Err(becqed::Error::config(
                        format!("expected 3 fields, got {}", fields.len()),
                        None,
                        Some(*line),
                    )
                    .into());
                }
                points.push((
                    parse_field(&fields[0], "N", *line)?,
                    parse_field(&fields[1], "delta_p_MHz", *line)?,
                    parse_channel(&fields[2], *line)?,
                ));
            }
            let geom = &config.system.geometry;
            let fits = fit_sqrt_law(
                &points,
                SqrtLawMode::FullFormula,
                geom.transverse_coupling_ratio,
                geom.transverse_offset_mhz,
                &config.fit,
            )?;
            residual_csv.push_str("N,channel,measured_MHz,model_MHz,residual_MHz\n");
            for fit in &fits {
                result_text.push_str(&format!(
                    "g_{} = {}\ng_{}_std = {}\n",
                    fit.channel.label(),
                    fmt_f64(fit.coupling_mhz),
                    fit.channel.label(),
                    fmt_f64(fit.coupling_std_mhz)
                ));
                let g = fit.coupling_mhz;
                for (n, dp, channel) in points.iter().filter(|(_, _, c)| *c == fit.channel) {
                    let u0 = u0_empirical(*n)?;
                    let model = u0 * g * n.sqrt()
                        + (u0 * geom.transverse_coupling_ratio * g).powi(2) * n
                            / (2.0 * geom.transverse_offset_mhz);
                    residual_csv.push_str(&csv_line(&[
                        fmt_f64(*n),
                        channel.label().to_string(),
                        fmt_f64(*dp),
                        fmt_f64(model),
                        fmt_f64(dp - model),
                    ]));
                    residual_csv.push('\n');
                }
            }
            if fits.len() == 2 {
                result_text.push_str(&format!(
                    "coupling_ratio = {}\n",
                    fmt_f64(fits[0].coupling_mhz / fits[1].coupling_mhz)
                ));
            }
        }
        FitMode::Spectrum => {
            expect_header(&rows, &["delta_c_MHz", "delta_p_MHz", "channel"])?;
            let mut points = Vec::new();
            for (line, fields) in &rows[1..] {
                if fields.len() != 3 {
                    return Err(becqed::Error::config(
                        format!("expected 3 fields, got {}", fields.len()),
                        None,
                        Some(*line),
                    )
                    .into());
                }
                points.push((
                    parse_field(&fields[0], "delta_c_MHz", *line)?,
                    parse_field(&fields[1], "delta_p_MHz", *line)?,
                    parse_channel(&fields[2], *line)?,
                ));
            }
            let options = SpectrumFitOptions {
                noise_mhz: config.fit_noise_mhz,
                fit: config.fit,
                ..SpectrumFitOptions::default()
            };
            let fit = fit_spectrum(&points, &config.system, &options)?;
            for ((f, m, n), (_, _, s)) in fit.populations.iter().zip(&fit.population_std) {
                result_text.push_str(&format!(
                    "N_{f}_{m} = {}\nN_{f}_{m}_std = {}\n",
                    fmt_f64(*n),
                    fmt_f64(*s)
                ));
            }
            result_text.push_str(&format!(
                "r = {}\nr_std = {}\n",
                fmt_f64(fit.transverse_ratio),
                fmt_f64(fit.transverse_ratio_std)
            ));
            result_text.push_str(&format!(
                "excluded_points = {}\n",
                fit.excluded_points
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
            ));
            result_text.push_str(&format!(
                "iterations = {}\nfinal_cost = {}\nstatus = {:?}\n",
                fit.result.iterations,
                fmt_f64(fit.result.final_cost),
                fit.result.status
            ));
            residual_csv.push_str("delta_c_MHz,channel,measured_MHz\n");
            for (dc, dp, channel) in &points {
                residual_csv.push_str(&csv_line(&[
                    fmt_f64(*dc),
                    channel.label().to_string(),
                    fmt_f64(*dp),
                ]));
                residual_csv.push('\n');
            }
        }
    }
    print!("{result_text}");
    manifest.write_output(&out.join("fit_result.txt"), &result_text)?;
    manifest.write_output(&out.join("fit_residuals.csv"), &residual_csv)?;
    manifest.finish(&out.join("fit_manifest.txt"))?;
    Ok(())
}
