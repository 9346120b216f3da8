//! The `lbmforge` command line.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dambreak_run, tgv_run, DamBreakConfig, DamBreakMethod, HarnessError, ResolvedSpec, SpecFile, TgvConfig};
use crate::equilibrium::random_state;
use crate::kernelgen::{apply_streaming, emit_c, StreamingPattern};
use crate::lattice::StencilName;
use crate::method::{derive_collision_rule, MethodPreset, StorageFormat};
use crate::simplify::{opcount_table, regularization_savings, render_savings, SimplificationConfig};
use crate::symexpr::rational_to_f64;

#[derive(Debug, Parser)]
#[command(name = "lbmforge", version, about = "Derive, simplify, run and emit lattice Boltzmann collision kernels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive and simplify the rule of a spec file and print its operation counts.
    Derive {
        #[arg(long)]
        spec: PathBuf,
        /// Also print the simplified assignments.
        #[arg(long)]
        print: bool,
        /// Emit the summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Operation counts of the built-in methods at each simplification level.
    OpcountTable {
        /// Highest simplification level to show (N, S or S+CSE).
        #[arg(long, default_value = "S+CSE")]
        simplify: String,
        #[arg(long, value_delimiter = ',', default_value = "D2Q9,D3Q19,D3Q27")]
        stencils: Vec<String>,
        /// Also print regularization savings on this stencil.
        #[arg(long)]
        savings: Option<String>,
        /// Order from which higher-order regularization resets rates.
        #[arg(long, default_value_t = 5)]
        higher_order: u32,
        /// Write the table as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Emit a C implementation of the kernel.
    EmitC {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        name: Option<String>,
        /// Streaming pattern; overrides the spec file.
        #[arg(long)]
        pattern: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Taylor-Green vortex decay; writes step, E/E0 and the analytic ratio.
    Tgv {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long = "L", default_value_t = 64)]
        l: usize,
        #[arg(long, default_value_t = 0.25)]
        u0: f64,
        #[arg(long, default_value_t = 1.0 / 6.0)]
        nu: f64,
        #[arg(long, default_value_t = 15_000)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(short, long, default_value = "tgv.csv")]
        output: PathBuf,
    },
    /// Circular dam break with a shallow-water method.
    Dambreak {
        /// cm or k.
        #[arg(long, default_value = "cm")]
        method: String,
        /// JSON file overriding the physical setup.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "dambreak")]
        out_dir: PathBuf,
    },
    /// Checks a spec on random states: simplification preserves outputs and
    /// mass and momentum are conserved.
    Check {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Value used for every runtime parameter without one in the spec.
        #[arg(long, default_value_t = 1.3)]
        rate: f64,
    },
}

fn resolve(path: &PathBuf) -> Result<ResolvedSpec, HarnessError> {
    SpecFile::load(path)?.resolve()
}

fn config_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(e.to_string())
}

pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), HarnessError> {
    match cli.command {
        Command::Derive { spec, print, json } => {
            let spec = resolve(&spec)?;
            let raw = derive_collision_rule(&spec.method).map_err(|e| HarnessError::Derivation(e.to_string()))?;
            let rule = spec.rule()?;
            let (n, s) = (raw.op_count(), rule.op_count());
            if json {
                let v = serde_json::json!({
                    "name": spec.name,
                    "simplification": spec.simplification.to_string(),
                    "unsimplified": n,
                    "simplified": s,
                    "parameters": rule.parameters().iter().map(|p| p.name().to_string()).collect::<Vec<_>>(),
                });
                writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
            } else {
                writeln!(out, "{}: {} assignments", spec.name, rule.assignments.len())?;
                writeln!(out, "unsimplified: {n}")?;
                writeln!(out, "{:<12}  {s}", spec.simplification.to_string() + ":")?;
                let params: Vec<String> = rule.parameters().iter().map(|p| p.name().to_string()).collect();
                writeln!(out, "parameters: {}", params.join(", "))?;
            }
            if print {
                writeln!(out, "{}", rule.assignments)?;
            }
        }
        Command::OpcountTable { simplify, stencils, savings, higher_order, json } => {
            let level: SimplificationConfig = simplify.parse().map_err(config_err)?;
            let columns = if level == SimplificationConfig::none() {
                1
            } else if level == SimplificationConfig::standard() {
                2
            } else {
                3
            };
            let names = stencils
                .iter()
                .map(|s| s.parse::<StencilName>().map_err(config_err))
                .collect::<Result<Vec<_>, _>>()?;
            let table =
                opcount_table(&names, &MethodPreset::ALL).map_err(|e| HarnessError::Derivation(e.to_string()))?;
            let heads = ["N", "S", "S+CSE"];
            write!(out, "{:<8} {:<7}", "stencil", "method")?;
            for h in &heads[..columns] {
                write!(out, " {h:>8}")?;
            }
            writeln!(out)?;
            for r in &table.rows {
                write!(out, "{:<8} {:<7}", r.stencil, r.method)?;
                for c in [r.n.total, r.s.total, r.s_cse.total].iter().take(columns) {
                    write!(out, " {c:>8}")?;
                }
                writeln!(out)?;
            }
            if let Some(path) = json {
                std::fs::write(path, table.to_json())?;
            }
            if let Some(st) = savings {
                let st: StencilName = st.parse().map_err(config_err)?;
                let methods = &MethodPreset::ALL[1..];
                let rows = regularization_savings(st, methods, higher_order)
                    .map_err(|e| HarnessError::Derivation(e.to_string()))?;
                writeln!(out)?;
                write!(out, "{}", render_savings(&rows))?;
            }
        }
        Command::EmitC { spec, name, pattern, output } => {
            let mut spec = resolve(&spec)?;
            if let Some(p) = pattern {
                spec.streaming = p.parse::<StreamingPattern>().map_err(config_err)?;
            }
            let rule = spec.rule()?;
            let src = emit_c(&apply_streaming(&rule, spec.streaming), name.as_deref().unwrap_or(&spec.name));
            match output {
                Some(p) => std::fs::write(p, src)?,
                None => write!(out, "{src}")?,
            }
        }
        Command::Tgv { spec, l, u0, nu, steps, stride, output } => {
            let spec = resolve(&spec)?;
            let cfg = TgvConfig { l, u0, nu, steps, stride };
            cfg.validate()?;
            let series = tgv_run(&cfg, &spec)?;
            series.write_csv(&output)?;
            writeln!(
                out,
                "{}: omega = {}, max deviation (E/E0 > 1e-6) = {:.3e}, plateau = {:.3e}",
                spec.name,
                cfg.omega(),
                series.max_relative_error(1e-6),
                series.plateau(1000)
            )?;
        }
        Command::Dambreak { method, config, out_dir } => {
            let mut cfg = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                    let de = &mut serde_json::Deserializer::from_str(&text);
                    serde_path_to_error::deserialize(de)
                        .map_err(|e| config_err(format!("{}: at `{}`: {}", p.display(), e.path(), e.inner())))?
                }
                None => DamBreakConfig::default(),
            };
            cfg.method = match method.to_ascii_lowercase().as_str() {
                "cm" | "central-moment" => DamBreakMethod::CentralMoment,
                "k" | "cumulant" => DamBreakMethod::Cumulant,
                other => return Err(config_err(format!("unknown dam-break method `{other}` (expected cm or k)"))),
            };
            let res = dambreak_run(&cfg)?;
            res.write_all(&out_dir)?;
            let drift = (res.final_volume - res.initial_volume).abs() / res.initial_volume;
            writeln!(out, "omega_s = {:.6}, relative volume drift = {drift:.3e}", cfg.omega_s())?;
            for s in &res.snapshots {
                let min = s.cross_section(res.cells).into_iter().fold(f64::INFINITY, f64::min);
                writeln!(out, "t = {} s: min depth on cross-section = {min:.6} m", s.time)?;
            }
        }
        Command::Check { spec, seed, samples, rate } => {
            let spec = resolve(&spec)?;
            let raw = derive_collision_rule(&spec.method).map_err(|e| HarnessError::Derivation(e.to_string()))?;
            let rule = spec.rule()?;
            let mut params = spec.parameters.clone();
            for p in raw.parameters() {
                params.entry(p).or_insert(rate);
            }
            let st = &spec.method.stencil;
            let zc = spec.method.storage == StorageFormat::ZeroCentered;
            let w: Vec<f64> = st.weights.iter().map(rational_to_f64).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut dev, mut cons) = (0.0f64, 0.0f64);
            for _ in 0..samples {
                let mut x = random_state(st, 0.05, &mut rng);
                if zc {
                    x.iter_mut().zip(&w).for_each(|(v, w)| *v -= w);
                }
                let eval = |r: &crate::method::CollisionRule| {
                    r.evaluate(&x, &params).map_err(|e| HarnessError::Derivation(e.to_string()))
                };
                let (a, b) = (eval(&raw)?, eval(&rule)?);
                for (p, q) in a.iter().zip(&b) {
                    dev = dev.max((p - q).abs());
                }
                for k in 0..=st.dim {
                    let moment = |v: &[f64]| -> f64 {
                        v.iter()
                            .enumerate()
                            .map(|(i, f)| if k == 0 { *f } else { f64::from(st.velocities[i][k - 1]) * f })
                            .sum()
                    };
                    cons = cons.max((moment(&x) - moment(&b)).abs());
                }
            }
            writeln!(out, "{}: seed {seed}, {samples} states", spec.name)?;
            writeln!(out, "max |simplified - unsimplified| = {dev:.3e}")?;
            writeln!(out, "max conservation defect = {cons:.3e}")?;
            if dev > 1e-12 || cons > 1e-12 {
                return Err(HarnessError::Derivation("check failed: deviation above 1e-12".into()));
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
