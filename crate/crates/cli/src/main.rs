//! `mrlbm`: command line driver for the adaptive multiresolution lattice
//! Boltzmann solver. Every command writes CSV files into `--out`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mrlbm_core::diagnostics::{compare_collision, detail_decay_study, epsilon_sweep, DecayField, Sweep};
use mrlbm_core::{run, RunConfig, RunOptions, RunResult};

#[derive(Parser, Debug)]
#[command(name = "mrlbm", version, about = "Fully adaptive multiresolution lattice Boltzmann schemes in 1D")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One adaptive run paired with the uniform reference.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Final errors and compression over a list of thresholds.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Thresholds, comma separated.
        #[arg(long = "eps-list", value_delimiter = ',', default_values_t = [1e-2, 1e-3, 1e-4, 1e-5])]
        eps_list: Vec<f64>,
        /// Relaxation rates, comma separated; one sweep file per value.
        #[arg(long = "s-list", value_delimiter = ',')]
        s_list: Vec<f64>,
    },
    /// Maximal details per level for the analytic test fields.
    DecayStudy {
        /// Field ids 0-3 (Gaussian, hat, square root, jump); all by default.
        #[arg(long, value_delimiter = ',')]
        field: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        first: u32,
        #[arg(long, default_value_t = 17)]
        finest: u32,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Leaves against reconstructed collision over a list of thresholds.
    CompareCollision {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long = "eps-list", value_delimiter = ',', default_values_t = [1e-4, 1e-5, 1e-6, 1e-7])]
        eps_list: Vec<f64>,
    },
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Flat `key = value` configuration file, applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// I, II, III, IV, V, sw-d1q3, sw-d1q5 or sod.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    /// A number or `inf`.
    #[arg(long = "mu-bar")]
    mu_bar: Option<String>,
    #[arg(long)]
    gamma: Option<usize>,
    #[arg(long = "min-level")]
    min_level: Option<u32>,
    #[arg(long = "max-level")]
    max_level: Option<u32>,
    /// leaves or reconstructed.
    #[arg(long)]
    collision: Option<String>,
    /// copy or periodic.
    #[arg(long)]
    boundary: Option<String>,
    /// dyadic or unit.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long = "T")]
    final_time: Option<f64>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl ConfigArgs {
    fn build(&self, default_preset: &str) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                RunConfig::parse(&text)?
            }
            None => RunConfig::preset(default_preset)?,
        };
        if let Some(p) = &self.preset {
            cfg = RunConfig::preset(p)?;
        }
        let mut pairs: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k.to_string(), v));
            }
        };
        push("scheme", self.scheme.clone());
        push("epsilon", self.epsilon.map(|v| v.to_string()));
        push("s", self.s.map(|v| v.to_string()));
        push("mu_bar", self.mu_bar.clone());
        push("gamma", self.gamma.map(|v| v.to_string()));
        push("min_level", self.min_level.map(|v| v.to_string()));
        push("max_level", self.max_level.map(|v| v.to_string()));
        push("collision", self.collision.clone());
        push("boundary", self.boundary.clone());
        push("grid", self.grid.clone());
        push("T", self.final_time.map(|v| v.to_string()));
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("expected KEY=VALUE, got '{kv}'"))?;
            pairs.push((k.to_string(), v.to_string()));
        }
        for (k, v) in pairs {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn errors_csv(r: &RunResult) -> String {
    let q = r.spec.q_cons();
    let mut out = String::from("n,t");
    for h in 0..q {
        let _ = write!(out, ",e_h{h}");
    }
    for h in 0..q {
        let _ = write!(out, ",E_h{h}");
    }
    out.push_str(",compression,leaves\n");
    for rec in &r.records {
        let _ = write!(out, "{},{}", rec.n, sci(rec.t));
        for h in 0..q {
            out.push(',');
            if let Some(e) = rec.error.get(h) {
                out.push_str(&sci(*e));
            }
        }
        for h in 0..q {
            out.push(',');
            if let Some(e) = rec.exact_error.get(h) {
                out.push_str(&sci(*e));
            }
        }
        let _ = writeln!(out, ",{},{}", sci(rec.compression), rec.leaves);
    }
    out
}

fn solution_csv(r: &RunResult) -> String {
    let q = r.spec.q_cons();
    let g = *r.final_field.geometry();
    let mut out = String::from("j,k,x_center,width");
    for h in 0..q {
        let _ = write!(out, ",m{h}");
    }
    out.push('\n');
    let mut m = vec![0.0; q];
    for (c, f) in r.final_field.iter() {
        r.spec.conserved(f, &mut m);
        let _ = write!(out, "{},{},{},{}", c.level, c.pos, sci(g.cell_center(c)), sci(g.cell_width(c.level)));
        for v in &m {
            let _ = write!(out, ",{}", sci(*v));
        }
        out.push('\n');
    }
    out
}

fn summary_txt(r: &RunResult) -> String {
    let last = r.last();
    let mut out = String::new();
    let _ = writeln!(out, "scheme = {}", r.config.scheme.name());
    let _ = writeln!(out, "preset = {}", r.config.preset.as_deref().unwrap_or("none"));
    let _ = writeln!(out, "epsilon = {}", sci(r.config.epsilon));
    let _ = writeln!(out, "steps = {}", last.n);
    let _ = writeln!(out, "dt = {}", sci(r.dt));
    for (h, e) in last.error.iter().enumerate() {
        let _ = writeln!(out, "e_h{h} = {}", sci(*e));
    }
    for (h, e) in last.exact_error.iter().enumerate() {
        let _ = writeln!(out, "E_h{h} = {}", sci(*e));
        if let Some(a) = last.error.get(h) {
            let _ = writeln!(out, "E_h{h}/e_h{h} = {}", sci(e / a));
        }
    }
    let _ = writeln!(out, "compression = {}", sci(last.compression));
    let _ = writeln!(out, "leaves = {}", last.leaves);
    if let Some(d) = r.max_relative_deviation {
        let _ = writeln!(out, "max_relative_deviation = {}", sci(d));
    }
    let _ = writeln!(out, "matches_reference = {}", r.matches_reference());
    out
}

fn sweep_csv(sw: &Sweep) -> String {
    let q = sw.fits.len();
    let mut out = String::from("epsilon");
    for h in 0..q {
        let _ = write!(out, ",e_final_h{h}");
    }
    out.push_str(",compression_final,leaves_final\n");
    for r in &sw.rows {
        out.push_str(&sci(r.epsilon));
        for e in &r.error {
            let _ = write!(out, ",{}", sci(*e));
        }
        let _ = writeln!(out, ",{},{}", sci(r.compression), r.leaves);
    }
    out.push_str("# slope");
    for f in &sw.fits {
        match f {
            Some(f) => {
                let _ = write!(out, " {}", sci(f.slope));
            }
            None => out.push_str(" nan"),
        }
    }
    out.push('\n');
    out
}

fn cmd_run(args: &ConfigArgs) -> Result<()> {
    let cfg = args.build("I")?;
    let r = run(&cfg, RunOptions { reference: true, injection: false })?;
    write_file(&args.out, "errors.csv", &errors_csv(&r))?;
    write_file(&args.out, "solution.csv", &solution_csv(&r))?;
    write_file(&args.out, "config.txt", &cfg.to_text())?;
    let summary = summary_txt(&r);
    write_file(&args.out, "summary.txt", &summary)?;
    print!("{summary}");
    Ok(())
}

fn cmd_sweep(args: &ConfigArgs, eps: &[f64], s_list: &[f64]) -> Result<()> {
    if eps.is_empty() {
        bail!("empty threshold list");
    }
    let cfg = args.build("I")?;
    if s_list.is_empty() {
        let sw = epsilon_sweep(&cfg, eps)?;
        let body = sweep_csv(&sw);
        write_file(&args.out, "sweep.csv", &body)?;
        print!("{body}");
        return Ok(());
    }
    for &s in s_list {
        let mut c = cfg.clone();
        c.s = s;
        c.validate()?;
        let sw = epsilon_sweep(&c, eps)?;
        write_file(&args.out, &format!("sweep_s{s}.csv"), &sweep_csv(&sw))?;
        println!("s = {s}: slope {:?}", sw.fits.iter().map(|f| f.map(|f| f.slope)).collect::<Vec<_>>());
    }
    Ok(())
}

fn cmd_decay(fields: &[usize], first: u32, finest: u32, out: &Path) -> Result<()> {
    let fields: Vec<DecayField> = if fields.is_empty() {
        DecayField::ALL.to_vec()
    } else {
        fields
            .iter()
            .map(|&i| DecayField::from_index(i).with_context(|| format!("unknown field {i}")))
            .collect::<Result<_>>()?
    };
    let mut body = String::from("field,j,detail,ratio\n");
    for f in fields {
        for row in detail_decay_study(f, first, finest)? {
            let ratio = row.ratio.map(sci).unwrap_or_default();
            let _ = writeln!(body, "{},{},{},{}", f.index(), row.level, sci(row.detail), ratio);
        }
    }
    write_file(out, "decay.csv", &body)?;
    print!("{body}");
    Ok(())
}

fn cmd_compare(args: &ConfigArgs, eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        bail!("empty threshold list");
    }
    let cfg = args.build("V")?;
    let cmp = compare_collision(&cfg, eps)?;
    let q = cmp.leaves.fits.len();
    let mut body = String::from("epsilon");
    for mode in ["leaves", "reconstructed"] {
        for h in 0..q {
            let _ = write!(body, ",e_{mode}_h{h}");
        }
    }
    body.push_str(",compression_leaves,compression_reconstructed\n");
    for (l, r) in cmp.leaves.rows.iter().zip(&cmp.reconstructed.rows) {
        body.push_str(&sci(l.epsilon));
        for e in l.error.iter().chain(&r.error) {
            let _ = write!(body, ",{}", sci(*e));
        }
        let _ = writeln!(body, ",{},{}", sci(l.compression), sci(r.compression));
    }
    for (mode, sw) in [("leaves", &cmp.leaves), ("reconstructed", &cmp.reconstructed)] {
        let _ = write!(body, "# slope {mode}");
        for f in &sw.fits {
            match f {
                Some(f) => {
                    let _ = write!(body, " {}", sci(f.slope));
                }
                None => body.push_str(" nan"),
            }
        }
        body.push('\n');
    }
    write_file(&args.out, "compare.csv", &body)?;
    print!("{body}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Sweep { config, eps_list, s_list } => cmd_sweep(config, eps_list, s_list),
        Command::DecayStudy { field, first, finest, out } => cmd_decay(field, *first, *finest, out),
        Command::CompareCollision { config, eps_list } => cmd_compare(config, eps_list),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
