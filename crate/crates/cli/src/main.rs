//! chb: batch computations for conserved-field droplet barriers on the
//! torus. Subcommands expose closed-form constants, the reduced
//! volume-energy curve, droplet certificates, barrier paths, saddle
//! refinement, and the small-phi convergence sweep. Every run prints a
//! one-line JSON summary with fixed key order; CSV outputs start with a
//! provenance line so identical invocations are byte-identical.

mod config;

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chb_core::construction::{
    barrier_path, default_clamp_halfwidth, droplet_radius, droplet_state, eta_for_radius,
    PathProfile,
};
use chb_core::field::{
    lower_bound_certificate, plus_phase_volume, TorusField, DEFAULT_EPSILON0,
};
use chb_core::io::{provenance_line, write_chf1, write_csv, JsonObject};
use chb_core::numerics::{c0, golden_max};
use chb_core::params::{Dim, ModelParams};
use chb_core::reduced::{
    barrier_constant_critical, barrier_constant_offcritical, cbar1, critical_xi, reduced_energy,
    sample_curve, Xi,
};
use chb_core::saddle::{string_relax, SaddleOpts};

use config::{parse_config, resolve, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "chb",
    version,
    about = "Droplet barrier computations for conserved fields on the torus"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Shared flags; which ones matter depends on the subcommand.
#[derive(Args, Debug, Default, Clone)]
struct Common {
    /// Space dimension, at least 2 [default: 2]
    #[arg(long)]
    dim: Option<u32>,
    /// Excess volume fraction in (0, 1)
    #[arg(long)]
    phi: Option<f64>,
    /// Torus side length L (alternative to --xi)
    #[arg(long)]
    length: Option<f64>,
    /// Rescaled parameter xi = phi L^{d/(d+1)} (alternative to --length)
    #[arg(long)]
    xi: Option<f64>,
    /// Grid points per axis [default: side/0.4, rounded up to even]
    #[arg(long)]
    grid: Option<usize>,
    /// Path images [default: 32]
    #[arg(long)]
    images: Option<usize>,
    /// Clamp half-width for droplets and paths; rescaled droplet radius
    /// for gamma [default: policy min(phi^{1/d-1}/3, 3 phi^{-1/2}); 1.0 for gamma]
    #[arg(long = "R")]
    r: Option<f64>,
    /// Partition width for reported +1-phase volumes [default: phi^{1/3}]
    #[arg(long)]
    kappa: Option<f64>,
    /// Sample count: curve points, certify droplets, sweep length
    #[arg(long)]
    samples: Option<usize>,
    /// Worker threads [default: CHB_THREADS, then all cores]
    #[arg(long)]
    threads: Option<usize>,
    /// Output CSV file, or output directory for path and saddle
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file supplying defaults for the flags above
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write each image as a field snapshot (path, saddle)
    #[arg(long)]
    snapshots: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form constants of the reduced description
    Constants(Common),
    /// Reduced volume-energy curve and its zero and maximum
    Reduced(Common),
    /// Droplet family with energy-gap lower-bound certificates
    Certify(Common),
    /// Constructed barrier path from the uniform state to a lower one
    Path(Common),
    /// Barrier path relaxed by the string method with a climbing polish
    Saddle(Common),
    /// Convergence of recovery states toward the sharp-interface limit
    Gamma(Common),
}

enum RunError {
    Usage(String),
    Domain(String),
}

fn usage(msg: impl Into<String>) -> RunError {
    RunError::Usage(msg.into())
}

fn domain(err: impl std::fmt::Display) -> RunError {
    RunError::Domain(err.to_string())
}

fn main() -> ExitCode {
    ExitCode::from(dispatch(std::env::args().skip(1)))
}

fn dispatch<I>(argv: I) -> u8
where
    I: IntoIterator,
    I::Item: Into<std::ffi::OsString> + Clone,
{
    let with_name = std::iter::once(std::ffi::OsString::from("chb"))
        .chain(argv.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(with_name) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version surface as non-error output.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return code;
        }
    };
    let (name, common) = match &cli.cmd {
        Cmd::Constants(c) => ("constants", c),
        Cmd::Reduced(c) => ("reduced", c),
        Cmd::Certify(c) => ("certify", c),
        Cmd::Path(c) => ("path", c),
        Cmd::Saddle(c) => ("saddle", c),
        Cmd::Gamma(c) => ("gamma", c),
    };
    match run(name, common) {
        Ok(()) => 0,
        Err(RunError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(RunError::Domain(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn run(name: &str, common: &Common) -> Result<(), RunError> {
    let file = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| usage(e.to_string()))?
        }
        None => config::FileConfig::default(),
    };
    let flags = Overrides {
        dim: common.dim,
        phi: common.phi,
        length: common.length,
        xi: common.xi,
        grid: common.grid,
        images: common.images,
        r: common.r,
        kappa: common.kappa,
        samples: common.samples,
        threads: common.threads,
        out: common.out.as_ref().map(|p| p.display().to_string()),
        snapshots: common.snapshots,
    };
    let cfg = resolve(name, &flags, &file);
    if cfg.threads > 0 {
        // A second initialization in the same process is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    match name {
        "constants" => cmd_constants(&cfg),
        "reduced" => cmd_reduced(&cfg),
        "certify" => cmd_certify(&cfg),
        "path" => cmd_path(&cfg, false),
        "saddle" => cmd_path(&cfg, true),
        "gamma" => cmd_gamma(&cfg),
        _ => unreachable!("unknown subcommand {name}"),
    }
}

fn dim_of(cfg: &RunConfig) -> Result<Dim, RunError> {
    Dim::new(cfg.dim).map_err(domain)
}

fn params_of(cfg: &RunConfig) -> Result<ModelParams, RunError> {
    let d = dim_of(cfg)?;
    let phi = cfg.phi.ok_or_else(|| usage("--phi is required"))?;
    match (cfg.length, cfg.xi) {
        (Some(_), Some(_)) => Err(usage("--length and --xi are mutually exclusive")),
        (Some(l), None) => ModelParams::new(d, l, phi).map_err(domain),
        (None, Some(xi)) => ModelParams::from_xi(d, phi, xi).map_err(domain),
        (None, None) => Err(usage("--length or --xi is required")),
    }
}

/// Default per-axis resolution: cells near 0.4 wide, even count so the
/// torus center falls on a node.
fn auto_grid(l: f64) -> usize {
    let mut n = (l / 0.4).ceil() as usize;
    if n % 2 == 1 {
        n += 1;
    }
    n.max(32)
}

fn grid_of(cfg: &RunConfig, params: &ModelParams) -> usize {
    cfg.grid.unwrap_or_else(|| auto_grid(params.l()))
}

fn csv_to(path: &Path, provenance: &str, header: &str, rows: Vec<Vec<f64>>) -> Result<(), RunError> {
    let file = fs::File::create(path)
        .map_err(|e| domain(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    write_csv(&mut w, provenance, header, rows).map_err(domain)?;
    w.flush().map_err(domain)
}

fn snapshot_to(path: &Path, u: &TorusField, phi: f64) -> Result<(), RunError> {
    let file = fs::File::create(path)
        .map_err(|e| domain(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    write_chf1(&mut w, u, phi).map_err(domain)?;
    w.flush().map_err(domain)
}

fn cmd_constants(cfg: &RunConfig) -> Result<(), RunError> {
    let d = dim_of(cfg)?;
    let (nu_m, c_star) = barrier_constant_offcritical(d);
    let line = JsonObject::new()
        .num("c0", c0())
        .num("cbar1", cbar1(d))
        .num("xi_d", critical_xi(d))
        .num("c_star", c_star)
        .num("nu_m", nu_m)
        .to_line();
    println!("{line}");
    Ok(())
}

fn cmd_reduced(cfg: &RunConfig) -> Result<(), RunError> {
    let d = dim_of(cfg)?;
    let xi = cfg.xi.ok_or_else(|| usage("--xi is required for reduced"))?;
    let samples = cfg.samples.unwrap_or(1000);
    let (nu_zero, f_max) = barrier_constant_critical(xi, d).map_err(domain)?;
    let (nu_max, _) = golden_max(|nu| reduced_energy(nu, Xi::Finite(xi), d), 0.0, nu_zero, 1e-10);
    if let Some(out) = &cfg.out {
        let rows: Vec<Vec<f64>> = sample_curve(Xi::Finite(xi), d, 1.25 * nu_zero, samples)
            .into_iter()
            .map(|(nu, f)| vec![nu, f])
            .collect();
        let prov = provenance_line(
            "reduced",
            &[
                ("dim", cfg.dim.to_string()),
                ("xi", format!("{xi}")),
                ("samples", samples.to_string()),
            ],
        );
        csv_to(Path::new(out), &prov, "nu,f", rows)?;
    }
    let line = JsonObject::new()
        .num("xi", xi)
        .int("d", i64::from(cfg.dim))
        .num("nu_zero", nu_zero)
        .num("nu_max", nu_max)
        .num("f_max", f_max)
        .to_line();
    println!("{line}");
    Ok(())
}

fn cmd_certify(cfg: &RunConfig) -> Result<(), RunError> {
    let params = params_of(cfg)?;
    let n = grid_of(cfg, &params);
    let r = cfg
        .r
        .unwrap_or_else(|| {
            default_clamp_halfwidth(&params).min(0.5 * droplet_radius(1.0, &params))
        });
    let count = cfg.samples.unwrap_or(12).max(2);
    let eta_lo = eta_for_radius(r, &params);
    if eta_lo >= 1.0 {
        return Err(RunError::Domain(format!(
            "clamp half-width {r} exceeds the largest droplet radius"
        )));
    }
    let mut rows = Vec::with_capacity(count);
    let mut all_sound = true;
    for i in 0..count {
        let eta = eta_lo + (1.0 - eta_lo) * i as f64 / (count - 1) as f64;
        let (u, _) = droplet_state(eta, r, &params, n).map_err(domain)?;
        let cert = lower_bound_certificate(&u, &params, DEFAULT_EPSILON0).map_err(domain)?;
        let gap = u.energy_gap(&params).map_err(domain)?;
        let v = match cfg.kappa {
            Some(k) => plus_phase_volume(&u, k),
            None => cert.v,
        };
        let tol = 1e-9 * (1.0 + gap.abs());
        let sound = cert.bound_offcritical <= gap + tol
            && cert.bound_critical.is_none_or(|b| b <= gap + tol);
        all_sound &= sound;
        rows.push(vec![
            eta,
            v,
            gap,
            cert.bound_offcritical,
            cert.bound_critical.unwrap_or(f64::NAN),
            f64::from(u8::from(sound)),
        ]);
    }
    if let Some(out) = &cfg.out {
        let prov = provenance_line(
            "certify",
            &[
                ("dim", cfg.dim.to_string()),
                ("phi", format!("{}", params.phi())),
                ("length", format!("{}", params.l())),
                ("grid", n.to_string()),
                ("R", format!("{r}")),
                ("samples", count.to_string()),
            ],
        );
        csv_to(
            Path::new(out),
            &prov,
            "eta,V,gap,bound_offcritical,bound_critical,sound",
            rows,
        )?;
    }
    let line = JsonObject::new()
        .num("phi", params.phi())
        .int("d", i64::from(cfg.dim))
        .num("l", params.l())
        .int("n", n as i64)
        .int("count", count as i64)
        .bool("all_sound", all_sound)
        .to_line();
    println!("{line}");
    Ok(())
}

fn profile_rows(profile: &PathProfile, kappa: Option<f64>) -> Vec<Vec<f64>> {
    let v: Vec<f64> = match kappa {
        Some(k) => profile.images.iter().map(|u| plus_phase_volume(u, k)).collect(),
        None => profile.v.clone(),
    };
    (0..profile.images.len())
        .map(|i| vec![i as f64, profile.t[i], profile.gap[i], v[i]])
        .collect()
}

fn write_profile(
    dir: &Path,
    base: &str,
    prov: &str,
    profile: &PathProfile,
    kappa: Option<f64>,
    snapshots: bool,
    phi: f64,
) -> Result<(), RunError> {
    fs::create_dir_all(dir)
        .map_err(|e| domain(format!("cannot create {}: {e}", dir.display())))?;
    csv_to(&dir.join(format!("{base}.csv")), prov, "index,t,gap,v", profile_rows(profile, kappa))?;
    if snapshots {
        for (i, u) in profile.images.iter().enumerate() {
            snapshot_to(&dir.join(format!("{base}_{i:03}.chf1")), u, phi)?;
        }
    }
    Ok(())
}

fn cmd_path(cfg: &RunConfig, relax: bool) -> Result<(), RunError> {
    let params = params_of(cfg)?;
    let n = grid_of(cfg, &params);
    let r = cfg.r.unwrap_or_else(|| default_clamp_halfwidth(&params));
    let images = cfg.images;
    let profile = barrier_path(&params, n, r, images).map_err(domain)?;
    let prov_params = [
        ("dim", cfg.dim.to_string()),
        ("phi", format!("{}", params.phi())),
        ("length", format!("{}", params.l())),
        ("grid", n.to_string()),
        ("images", images.to_string()),
        ("R", format!("{r}")),
    ];
    if !relax {
        if let Some(out) = &cfg.out {
            let prov = provenance_line("path", &prov_params);
            write_profile(
                Path::new(out),
                "profile",
                &prov,
                &profile,
                cfg.kappa,
                cfg.snapshots,
                params.phi(),
            )?;
        }
        let line = JsonObject::new()
            .int("d", i64::from(cfg.dim))
            .num("phi", params.phi())
            .num("l", params.l())
            .int("n", n as i64)
            .int("images", images as i64)
            .num("r", r)
            .num("max_gap", profile.max_gap)
            .int("max_index", profile.max_index as i64)
            .num("end_gap", profile.end_gap)
            .to_line();
        println!("{line}");
        return Ok(());
    }
    let opts = SaddleOpts::stable_for(&profile.images[0]);
    let (relaxed, saddle) = string_relax(&profile, &params, &opts).map_err(domain)?;
    if let Some(out) = &cfg.out {
        let dir = Path::new(out);
        let prov = provenance_line("saddle", &prov_params);
        write_profile(dir, "relaxed", &prov, &relaxed, cfg.kappa, cfg.snapshots, params.phi())?;
        snapshot_to(&dir.join("saddle.chf1"), &saddle.field, params.phi())?;
    }
    let line = JsonObject::new()
        .num("gap", saddle.gap)
        .num("lambda", saddle.lambda)
        .num("residual", saddle.residual)
        .int("iterations", saddle.iterations as i64)
        .bool("converged", saddle.converged)
        .to_line();
    println!("{line}");
    Ok(())
}

fn cmd_gamma(cfg: &RunConfig) -> Result<(), RunError> {
    let d = dim_of(cfg)?;
    let xi = cfg.xi.ok_or_else(|| usage("--xi is required for gamma"))?;
    let r = cfg.r.unwrap_or(1.0);
    let phi0 = cfg.phi.unwrap_or(0.2);
    let count = cfg.samples.unwrap_or(3).max(2);
    let phis: Vec<f64> = (0..count).map(|i| phi0 / f64::powi(2.0, i as i32)).collect();
    let sweep = chb_core::gamma::convergence_sweep(&phis, xi, r, d).map_err(domain)?;
    if let Some(out) = &cfg.out {
        let prov = provenance_line(
            "gamma",
            &[
                ("dim", cfg.dim.to_string()),
                ("xi", format!("{xi}")),
                ("R", format!("{r}")),
                ("phi", format!("{phi0}")),
                ("samples", count.to_string()),
            ],
        );
        let rows: Vec<Vec<f64>> = sweep
            .rows
            .iter()
            .map(|row| vec![row.phi, row.n as f64, row.gap, row.error, row.alpha_ratio])
            .collect();
        csv_to(Path::new(out), &prov, "phi,n,gap,error,alpha_ratio", rows)?;
    }
    let line = JsonObject::new()
        .num("xi", xi)
        .num("r", r)
        .num("limit", sweep.limit)
        .num("fitted_exponent", sweep.fitted_exponent)
        .bool("monotone", sweep.monotone)
        .to_line();
    println!("{line}");
    Ok(())
}
