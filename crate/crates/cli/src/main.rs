//! Batch entry point: seeded ensemble runs, the verification suite, and
//! plot-ready CSV emission.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use preytaxis::config::{FileFormat, RunConfig};
use preytaxis::ensemble::{
    run_ensemble, stability_experiment, Perturbation,
};
use preytaxis::trajfile::{read_trajectory, write_trajectory, TrajHeader, FORMAT_VERSION};
use preytaxis::verify::{run_all, VerifyScale};

use preytaxis_core::diagnostics::{energy_scan, positivity_scan, translation_scan};
use preytaxis_core::galerkin::dt_ceiling;
use preytaxis_core::noise::SeedPolicy;

#[derive(Parser)]
#[command(name = "preytaxis", version, about = "Spectral ensemble solver for a stochastic predator-prey taxis system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Run configuration (TOML). Defaults to the built-in desk scale.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Trajectory file format override.
    #[arg(long, value_parser = parse_format)]
    format: Option<FileFormat>,
    /// Worker thread count; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_format(s: &str) -> Result<FileFormat, String> {
    match s {
        "csv" => Ok(FileFormat::Csv),
        "bin" => Ok(FileFormat::Bin),
        other => Err(format!("unknown format {other:?}, expected csv or bin")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured ensemble and write trajectory files.
    Simulate(CommonOpts),
    /// Run the verification suite; exits nonzero on any failing criterion.
    Verify(CommonOpts),
    /// Run the ensemble and emit diagnostic report CSVs.
    Ensemble(CommonOpts),
    /// Paired-run stability experiment over a perturbation sweep.
    Stability {
        #[command(flatten)]
        common: CommonOpts,
        /// Initial-data perturbation sizes.
        #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 5e-3, 2.5e-3, 0.0])]
        eps: Vec<f64>,
        /// Perturbation direction: constant_shift or first_mode_bump.
        #[arg(long, default_value = "constant_shift", value_parser = parse_perturbation)]
        perturbation: Perturbation,
    },
    /// Time-translation statistic over the recorded grid.
    Translate {
        #[command(flatten)]
        common: CommonOpts,
        /// Lags as multiples of the recorded time spacing.
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8, 16, 32])]
        lags: Vec<usize>,
    },
    /// Convert trajectory files into a long-format CSV for plotting.
    Plotdata {
        /// Trajectory files to read.
        paths: Vec<PathBuf>,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_perturbation(s: &str) -> Result<Perturbation, String> {
    match s {
        "constant_shift" => Ok(Perturbation::ConstantShift),
        "first_mode_bump" => Ok(Perturbation::FirstModeBump),
        other => Err(format!(
            "unknown perturbation {other:?}, expected constant_shift or first_mode_bump"
        )),
    }
}

/// Everything a subcommand needs, built once from the (possibly overridden)
/// configuration. Refuses time steps above the stability ceiling before any
/// compute happens.
struct Prepared {
    cfg: RunConfig,
    basis: preytaxis_core::BasisSet,
    noise: preytaxis_core::NoiseModel,
    policy: SeedPolicy,
    out_dir: PathBuf,
}

fn prepare(opts: &CommonOpts) -> anyhow::Result<Prepared> {
    if let Some(jobs) = opts.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("worker pool already initialized")?;
    }
    let mut cfg = match &opts.config {
        Some(path) => RunConfig::load(path)
            .with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::desk_scale(),
    };
    if let Some(seed) = opts.seed {
        cfg.ensemble.master_seed = seed;
    }
    if let Some(format) = opts.format {
        cfg.output.format = format;
    }
    if let Some(out) = &opts.out {
        cfg.output.directory = out.clone();
    }
    let basis = cfg.build_basis()?;
    let noise = cfg.build_noise()?;
    let ceiling = dt_ceiling(&basis, &cfg.model);
    if cfg.step.dt > ceiling {
        bail!(
            "time step {} exceeds the diffusion stability ceiling {:.6e} for {} modes; refusing to run",
            cfg.step.dt,
            ceiling,
            basis.n_modes
        );
    }
    let policy = SeedPolicy::new(cfg.ensemble.master_seed);
    let out_dir = cfg.output.directory.clone();
    Ok(Prepared { cfg, basis, noise, policy, out_dir })
}

impl Prepared {
    fn ensure_out(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))
    }

    fn run(&self) -> anyhow::Result<Vec<preytaxis_core::Trajectory>> {
        Ok(run_ensemble(
            &self.cfg.ensemble.initial,
            &self.cfg.step,
            &self.basis,
            &self.cfg.model,
            &self.noise,
            &self.policy,
            self.cfg.ensemble.n_traj,
        )?)
    }

    /// Manifest: self-describing header, config hash, seed, config echo.
    fn write_manifest(&self) -> anyhow::Result<()> {
        let text = format!(
            "preytaxis-manifest v{FORMAT_VERSION}\nconfig_hash = {}\nmaster_seed = {}\nn_traj = {}\n\n{}",
            self.cfg.content_hash(),
            self.cfg.ensemble.master_seed,
            self.cfg.ensemble.n_traj,
            self.cfg.canonical_toml()
        );
        std::fs::write(self.out_dir.join("manifest.toml"), text)?;
        Ok(())
    }

    fn header_for(&self, trajectory: u64, n_states: usize) -> TrajHeader {
        TrajHeader {
            config_hash: self.cfg.content_hash(),
            master_seed: self.cfg.ensemble.master_seed,
            trajectory,
            dt: self.cfg.step.dt,
            record_every: self.cfg.step.record_every,
            n_modes: self.basis.n_modes,
            lengths: self.basis.domain.lengths.clone(),
            grid_points: self.basis.domain.grid_points.clone(),
            format: self.cfg.output.format,
            n_states,
        }
    }
}

fn cmd_simulate(opts: &CommonOpts) -> anyhow::Result<()> {
    let prep = prepare(opts)?;
    prep.ensure_out()?;
    let trajs = prep.run()?;
    prep.write_manifest()?;
    for (i, traj) in trajs.iter().enumerate() {
        let header = prep.header_for(i as u64, traj.states.len());
        let path = prep.out_dir.join(format!("traj_{i:04}.traj"));
        write_trajectory(&path, &header, traj)?;
    }
    let final_norms: Vec<f64> = trajs
        .iter()
        .map(|t| prep.basis.norms(&t.final_state().c1).map(|n| n.l2))
        .collect::<Result<_, _>>()?;
    let mean = final_norms.iter().sum::<f64>() / final_norms.len() as f64;
    println!(
        "wrote {} trajectories to {} ({} recorded states each, mean final ||u1|| = {mean:.6})",
        trajs.len(),
        prep.out_dir.display(),
        trajs[0].states.len()
    );
    Ok(())
}

fn cmd_verify(opts: &CommonOpts) -> anyhow::Result<()> {
    let prep = prepare(opts)?;
    let scale = VerifyScale {
        n_traj: prep.cfg.ensemble.n_traj,
        dt: prep.cfg.step.dt,
        t_end: prep.cfg.step.t_end,
        n_modes: prep.cfg.basis.n_modes,
        grid: prep.cfg.domain.grid_points[0],
        master_seed: prep.cfg.ensemble.master_seed,
    };
    let outcomes = run_all(&scale)?;
    let mut csv = String::from("id,name,pass,detail\n");
    for o in &outcomes {
        println!("{o}");
        csv.push_str(&format!("{},{},{},\"{}\"\n", o.id, o.name, o.pass, o.detail));
    }
    prep.ensure_out()?;
    std::fs::write(prep.out_dir.join("verify_report.csv"), csv)?;
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    if failed > 0 {
        bail!("{failed} of {} criteria failed", outcomes.len());
    }
    println!("all {} criteria passed", outcomes.len());
    Ok(())
}

fn cmd_ensemble(opts: &CommonOpts) -> anyhow::Result<()> {
    let prep = prepare(opts)?;
    prep.ensure_out()?;
    let trajs = prep.run()?;
    prep.write_manifest()?;

    let energy = energy_scan(&trajs, &prep.basis, 4.0)?;
    let mut csv = String::from("time,equation,mean_l2_sq\n");
    let dt_rec = trajs[0].recorded_dt();
    for i in 0..2 {
        for (m, v) in energy.mean_l2_sq_at[i].iter().enumerate() {
            csv.push_str(&format!("{:.12e},{},{v:.12e}\n", m as f64 * dt_rec, i + 1));
        }
    }
    std::fs::write(prep.out_dir.join("energy.csv"), csv)?;

    // ensemble means of the per-trajectory positivity masses
    let mut masses = [[0.0f64; 4]; 2];
    for traj in &trajs {
        let p = positivity_scan(traj, 1e-3, &prep.basis, &prep.cfg.model)?;
        for i in 0..2 {
            masses[i][0] += p.neg_mass_sq[i];
            masses[i][1] += p.excess_mass_sq[i];
            masses[i][2] += p.smoothed_neg_mass[i];
            masses[i][3] += p.smoothed_excess_mass[i];
        }
    }
    let mut csv = String::from(
        "equation,neg_mass_sq,excess_mass_sq,smoothed_neg_mass,smoothed_excess_mass\n",
    );
    for (i, row) in masses.iter().enumerate() {
        let n = trajs.len() as f64;
        csv.push_str(&format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            i + 1,
            row[0] / n,
            row[1] / n,
            row[2] / n,
            row[3] / n
        ));
    }
    std::fs::write(prep.out_dir.join("positivity.csv"), csv)?;

    println!(
        "ensemble of {} done: sup ||u1||^2 = {:.6} +- {:.6}, sup ||u2||^2 = {:.6} +- {:.6}",
        trajs.len(),
        energy.sup_l2_sq[0],
        energy.sup_l2_sq_se[0],
        energy.sup_l2_sq[1],
        energy.sup_l2_sq_se[1]
    );
    Ok(())
}

fn cmd_stability(
    common: &CommonOpts,
    eps: &[f64],
    perturbation: Perturbation,
) -> anyhow::Result<()> {
    let prep = prepare(common)?;
    prep.ensure_out()?;
    let mut csv = String::from("eps_ic,lhs,rhs,ratio\n");
    for &e in eps {
        let r = stability_experiment(
            &prep.cfg.ensemble.initial,
            perturbation,
            e,
            &prep.cfg.step,
            &prep.basis,
            &prep.cfg.model,
            &prep.noise,
            &prep.policy,
            prep.cfg.ensemble.n_traj,
        )?;
        println!("eps = {e:.3e}: ratio = {:.6} (lhs {:.6e}, rhs {:.6e})", r.ratio, r.lhs, r.rhs);
        csv.push_str(&format!("{e:.12e},{:.12e},{:.12e},{:.12e}\n", r.lhs, r.rhs, r.ratio));
    }
    std::fs::write(prep.out_dir.join("stability.csv"), csv)?;
    Ok(())
}

fn cmd_translate(common: &CommonOpts, lags: &[usize]) -> anyhow::Result<()> {
    let prep = prepare(common)?;
    prep.ensure_out()?;
    let trajs = prep.run()?;
    let dt_rec = trajs[0].recorded_dt();
    let deltas: Vec<f64> = lags.iter().map(|&l| l as f64 * dt_rec).collect();
    let report = translation_scan(&trajs, &prep.basis, &deltas)?;
    let mut csv = String::from("delta,equation,mean_sup_dual_gap\n");
    for i in 0..2 {
        for (d, s) in report.deltas.iter().zip(&report.stat[i]) {
            csv.push_str(&format!("{d:.12e},{},{s:.12e}\n", i + 1));
        }
    }
    std::fs::write(prep.out_dir.join("translate.csv"), csv)?;
    println!(
        "translation exponents: u1 = {:.4}, u2 = {:.4}",
        report.fitted_exponent[0], report.fitted_exponent[1]
    );
    Ok(())
}

fn cmd_plotdata(paths: &[PathBuf], out: Option<&Path>) -> anyhow::Result<()> {
    let mut csv = String::from("time,quantity,equation,trajectory,value\n");
    for path in paths {
        let (header, traj) =
            read_trajectory(path).with_context(|| format!("reading {}", path.display()))?;
        let domain = match (header.lengths.as_slice(), header.grid_points.as_slice()) {
            ([l], [g]) => preytaxis_core::Domain::new_1d(*l, *g)?,
            ([la, lb], [ga, gb]) => preytaxis_core::Domain::new_2d([*la, *lb], [*ga, *gb])?,
            _ => bail!("{}: bad domain shape in header", path.display()),
        };
        let basis = preytaxis_core::spectral::build_basis(&domain, header.n_modes)?;
        for state in &traj.states {
            for (i, coeffs) in [&state.c1, &state.c2].into_iter().enumerate() {
                let norms = basis.norms(coeffs)?;
                for (quantity, value) in
                    [("l2", norms.l2), ("h1_semi", norms.h1_semi), ("h1_dual", norms.h1_dual)]
                {
                    csv.push_str(&format!(
                        "{:.12e},{quantity},{},{},{value:.12e}\n",
                        state.time,
                        i + 1,
                        header.trajectory
                    ));
                }
            }
        }
    }
    match out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(opts) => cmd_simulate(opts),
        Command::Verify(opts) => cmd_verify(opts),
        Command::Ensemble(opts) => cmd_ensemble(opts),
        Command::Stability { common, eps, perturbation } => {
            cmd_stability(common, eps, *perturbation)
        }
        Command::Translate { common, lags } => cmd_translate(common, lags),
        Command::Plotdata { paths, out } => cmd_plotdata(paths, out.as_deref()),
    }
}
