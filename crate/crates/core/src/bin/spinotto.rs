use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use spinotto::cycle::{
    record_csv, record_series, run_cycle_with, simulate_trajectory, sweep, threads_from_env,
    trajectory_csv, CycleOptions,
};
use spinotto::io::{fmt_sci, manifest_path, write_atomic, CsvTable, RunManifest};
use spinotto::modes::{frequency_shift_phi, memory_kernel, SpectralDensity};
use spinotto::otto::otto_cycle;
use spinotto::params::{config_snapshot, ConfigMap};
use spinotto::Config;

#[derive(Parser, Debug)]
#[command(
    name = "spinotto",
    version,
    about = "Spin-1/2 measurement engine in the electromagnetic vacuum"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one key, applied after the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ideal thermal Otto cycle.
    Otto,
    /// Decay rate, frequency shift and kernel moments.
    Xi {
        /// Also write J(ω) as CSV.
        #[arg(long)]
        spectrum: Option<PathBuf>,
        /// Also write H(τ) as CSV.
        #[arg(long)]
        kernel: Option<PathBuf>,
    },
    /// Spin trajectory from the thermal state.
    Dynamics,
    /// One measurement-engine cycle.
    Cycle,
    /// Cycle metrics over the (λ, γ) grid.
    Sweep,
    /// Radiated energy, record norm and up/down record overlap.
    Record,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Otto => "otto",
            Command::Xi { .. } => "xi",
            Command::Dynamics => "dynamics",
            Command::Cycle => "cycle",
            Command::Sweep => "sweep",
            Command::Record => "record",
        }
    }
}

fn load_config(cli: &Cli) -> spinotto::Result<Config> {
    let mut map = match &cli.config {
        Some(path) => ConfigMap::parse(&std::fs::read_to_string(path)?)?,
        None => ConfigMap::default(),
    };
    for o in &cli.overrides {
        map.apply_override(o)?;
    }
    map.to_config()
}

fn key_values(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sci).unwrap_or_else(|| "none".into())
}

struct Emitter<'a> {
    manifest: RunManifest,
    start: Instant,
    out: Option<&'a Path>,
}

impl Emitter<'_> {
    fn write(&mut self, path: Option<&Path>, text: &str) -> spinotto::Result<()> {
        match path {
            Some(p) => {
                write_atomic(p, text.as_bytes())?;
                self.manifest.outputs.push(p.to_path_buf());
                self.manifest.duration = self.start.elapsed();
                write_atomic(&manifest_path(p), self.manifest.render().as_bytes())?;
            }
            None => print!("{text}"),
        }
        Ok(())
    }

    fn main_output(&mut self, text: &str) -> spinotto::Result<()> {
        let out = self.out;
        self.write(out, text)
    }
}

fn run(cli: &Cli) -> spinotto::Result<()> {
    let cfg = load_config(cli)?;
    let mut em = Emitter {
        manifest: RunManifest::new(cli.command.name(), config_snapshot(&cfg)),
        start: Instant::now(),
        out: cli.out.as_deref(),
    };
    match &cli.command {
        Command::Otto => {
            let p = cfg.derive()?;
            let m = otto_cycle(&p);
            let text = key_values(&[
                ("eta_O", opt(m.eta_o)),
                ("W01_J", fmt_sci(m.w01)),
                ("Q12_J", fmt_sci(m.q12)),
                ("Q30_J", fmt_sci(m.q30)),
                ("Delta", fmt_sci(p.delta)),
                ("lambda", fmt_sci(p.lambda)),
            ]);
            em.main_output(&text)
        }
        Command::Xi { spectrum, kernel } => {
            let p = cfg.derive()?;
            let j = if cfg.numerics.coupling {
                SpectralDensity::from_params(&p)
            } else {
                SpectralDensity::zero(p.cutoff_time())
            };
            let pole = frequency_shift_phi(&j, p.omega, cfg.numerics.quad_rel_tol)?;
            let h0 = j.total_weight_closed();
            let h1 = j.first_moment_closed() - 2.0 * p.omega * h0;
            let ratio = |a: f64, b: f64| if b == 0.0 { f64::NAN } else { a / b };
            let text = key_values(&[
                ("xi_per_s", fmt_sci(pole.xi)),
                ("phi_per_s", fmt_sci(pole.phi)),
                ("H0_per_s2", fmt_sci(h0)),
                ("H1_im_per_s2", fmt_sci(h1)),
                ("phi_quad_error", fmt_sci(pole.phi_error)),
                ("phi_iterations", pole.iterations.to_string()),
                ("phi_over_xi", fmt_sci(ratio(pole.phi, pole.xi))),
                ("phi_over_omega", fmt_sci(pole.phi / p.omega)),
                ("omega_per_s", fmt_sci(p.omega)),
                ("two_omega_s", fmt_sci(2.0 * p.omega * p.cutoff_time())),
            ]);
            let n = cfg.numerics.history_grid.max(2);
            if let Some(path) = spectrum {
                let mut t = CsvTable::new(&["omega_per_s", "J"]);
                let top = j.support_max();
                for i in 0..n {
                    let w = top * i as f64 / (n - 1) as f64;
                    t.push(vec![fmt_sci(w), fmt_sci(j.eval(w))]);
                }
                em.write(Some(path), &t.render())?;
            }
            if let Some(path) = kernel {
                // sixty memory times reaches the 1e-6 tail level
                let table = memory_kernel(
                    &j,
                    p.omega,
                    60.0 * j.cutoff_time,
                    n,
                    cfg.numerics.quad_rel_tol,
                )?;
                let mut t = CsvTable::new(&["tau_s", "re_H", "im_H"]);
                for (i, h) in table.values.iter().enumerate() {
                    t.push(vec![
                        fmt_sci(table.dtau * i as f64),
                        fmt_sci(h.re),
                        fmt_sci(h.im),
                    ]);
                }
                em.write(Some(path), &t.render())?;
            }
            em.main_output(&text)
        }
        Command::Dynamics => {
            let trace = simulate_trajectory(&cfg)?;
            em.main_output(&trajectory_csv(&trace).render())
        }
        Command::Cycle => {
            let opts = CycleOptions {
                with_record: true,
                ..CycleOptions::from_config(&cfg)
            };
            let m = run_cycle_with(&cfg, &opts)?;
            let text = key_values(&[
                ("W1_J", fmt_sci(m.w1)),
                ("W2_J", fmt_sci(m.w2)),
                ("W_J", fmt_sci(m.w)),
                ("E_off_J", fmt_sci(m.e_off)),
                ("Q_J", fmt_sci(m.q)),
                ("eta", opt(m.eta)),
                ("eta_c", fmt_sci(m.eta_c)),
                ("eta_loss", fmt_sci(m.eta_loss)),
                ("ln_eta_loss", fmt_sci(m.ln_eta_loss)),
                ("xi_per_s", fmt_sci(m.xi)),
                ("t_c_s", fmt_sci(m.t_c)),
                ("xi_tc", fmt_sci(m.xi_tc)),
                ("W_dim", fmt_sci(m.w_dim)),
                ("P_dim", fmt_sci(m.p_dim)),
                ("Delta0_at_tc", fmt_sci(m.delta0_at_tc)),
                ("E_rad_at_tc_J", opt(m.e_rad_at_tc)),
                ("first_law_residual_J", opt(m.first_law_residual)),
                ("energy_balance_J", opt(m.energy_balance)),
                ("full_solver_delta", opt(m.full_solver_delta)),
            ]);
            em.main_output(&text)
        }
        Command::Sweep => {
            let n = &cfg.numerics;
            let table = sweep(&cfg, &n.lambda_grid, &n.gamma_grid, threads_from_env())?;
            em.main_output(&table.to_csv().render())
        }
        Command::Record => {
            let rows = record_series(&cfg)?;
            em.main_output(&record_csv(&rows).render())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spinotto: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
