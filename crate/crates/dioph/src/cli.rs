//! Command-line entry point: config resolution (flags over config file over
//! defaults), per-command key validation, manifest emission, dispatch, and
//! the exit-code contract (0 success, 2 precondition/user error, 3 internal
//! invariant violation).

use crate::point::{PointSpec, Shift};
use crate::report::{self, atomic_write};
use crate::{covering, curve, exponent, measure, transfer, Error, Result};
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "dioph", version, about = "Diophantine approximation experiments on curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Args, Default, Clone)]
pub struct GlobalOpts {
    /// Working precision in bits (default 128)
    #[arg(long, global = true)]
    pub precision: Option<u32>,
    /// Seed for every randomized draw (default 0)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default "out")
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Manifest path (default <out-dir>/manifest.txt)
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Flat key-value config file; explicit flags win on conflict
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Estimate a Diophantine exponent by finite-height scan
    Exponent {
        #[command(flatten)]
        global: GlobalOpts,
        /// sim | dual
        #[arg(long)]
        kind: Option<String>,
        /// estimate the uniform exponent on the dyadic grid
        #[arg(long)]
        uniform: bool,
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        shift: Option<String>,
        #[arg(long)]
        qmax: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the transference inequality checks and write a JSON report
    Transfer {
        #[command(flatten)]
        global: GlobalOpts,
        #[arg(long)]
        point: Option<String>,
        #[arg(long)]
        shift: Option<String>,
        #[arg(long)]
        qmax: Option<i64>,
        #[arg(long)]
        slack: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate dyadic ball families and the disjoint-sum decay
    Cover {
        #[command(flatten)]
        global: GlobalOpts,
        #[arg(long)]
        curve: Option<String>,
        #[arg(long)]
        shift: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        tmin: Option<u32>,
        #[arg(long)]
        tmax: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo tail fractions of the truncated limsup set
    Measure {
        #[command(flatten)]
        global: GlobalOpts,
        #[arg(long)]
        curve: Option<String>,
        #[arg(long)]
        shift: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        qmax: Option<i64>,
        /// comma-separated window starts, e.g. 1,10,100,1000
        #[arg(long)]
        sgrid: Option<String>,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Slice a 2-D surface patch into Monge curve patches
    Slice {
        #[command(flatten)]
        global: GlobalOpts,
        #[arg(long)]
        surface: Option<String>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a previous invocation from its manifest
    Rerun {
        manifest: PathBuf,
    },
}

/// Fully resolved configuration: command plus flat key-value map.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub command: String,
    pub values: BTreeMap<String, String>,
}

fn allowed_keys(command: &str) -> Option<&'static [&'static str]> {
    let common: &[&str] = &["precision", "seed", "out_dir", "manifest_path", "out"];
    let _ = common;
    match command {
        "exponent" => Some(&["kind", "uniform", "point", "shift", "qmax", "precision", "seed", "out_dir", "manifest_path", "out"]),
        "transfer" => Some(&["point", "shift", "qmax", "slack", "precision", "seed", "out_dir", "manifest_path", "out"]),
        "cover" => Some(&["curve", "shift", "eps", "tmin", "tmax", "precision", "seed", "out_dir", "manifest_path", "out"]),
        "measure" => Some(&["curve", "shift", "eps", "qmax", "sgrid", "samples", "precision", "seed", "out_dir", "manifest_path", "out"]),
        "slice" => Some(&["surface", "count", "precision", "seed", "out_dir", "manifest_path", "out"]),
        _ => None,
    }
}

fn merge(cli_vals: BTreeMap<String, String>, global: &GlobalOpts, command: &str) -> Result<ResolvedConfig> {
    let mut values = BTreeMap::new();
    if let Some(cfg_path) = &global.config {
        let text = std::fs::read_to_string(cfg_path)?;
        let file_vals = report::parse_keyvalue(&text);
        for (k, v) in file_vals {
            if k == "command" || k == "version" {
                continue;
            }
            values.insert(k, v);
        }
    }
    for (k, v) in cli_vals {
        values.insert(k, v);
    }
    if let Some(p) = global.precision {
        values.insert("precision".into(), p.to_string());
    }
    if let Some(s) = global.seed {
        values.insert("seed".into(), s.to_string());
    }
    if let Some(d) = &global.out_dir {
        values.insert("out_dir".into(), d.display().to_string());
    }
    if let Some(m) = &global.manifest {
        values.insert("manifest_path".into(), m.display().to_string());
    }
    let allowed = allowed_keys(command).ok_or_else(|| Error::Precondition(format!("unknown command `{command}`")))?;
    for k in values.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Precondition(format!("unknown config key `{k}` for command `{command}`")));
        }
    }
    Ok(ResolvedConfig {
        command: command.to_string(),
        values,
    })
}

impl ResolvedConfig {
    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Precondition(format!("missing required option `{key}` for `{}`", self.command)))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| Error::Precondition(format!("option `{key}` has malformed value `{s}`"))),
        }
    }

    fn precision(&self) -> Result<u32> {
        Ok(self.parse::<u32>("precision")?.unwrap_or(128))
    }

    fn seed(&self) -> Result<u64> {
        Ok(self.parse::<u64>("seed")?.unwrap_or(0))
    }

    fn out_dir(&self) -> PathBuf {
        self.get("out_dir").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
    }

    fn out_path(&self, default_name: &str) -> PathBuf {
        match self.get("out") {
            Some(p) => {
                let p = PathBuf::from(p);
                if p.is_absolute() {
                    p
                } else {
                    self.out_dir().join(p)
                }
            }
            None => self.out_dir().join(default_name),
        }
    }

    fn manifest_path(&self) -> PathBuf {
        match self.get("manifest_path") {
            Some(p) => PathBuf::from(p),
            None => self.out_dir().join("manifest.txt"),
        }
    }
}

fn cmd_to_config(cmd: &Cmd) -> Result<(ResolvedConfig, GlobalOpts)> {
    let mut v = BTreeMap::new();
    macro_rules! put {
        ($key:literal, $val:expr) => {
            if let Some(x) = $val {
                v.insert($key.to_string(), x.to_string());
            }
        };
    }
    match cmd {
        Cmd::Exponent {
            global,
            kind,
            uniform,
            point,
            shift,
            qmax,
            out,
        } => {
            put!("kind", kind.clone());
            if *uniform {
                v.insert("uniform".into(), "true".into());
            }
            put!("point", point.clone());
            put!("shift", shift.clone());
            put!("qmax", *qmax);
            put!("out", out.clone().map(|p| p.display().to_string()));
            Ok((merge(v, global, "exponent")?, global.clone()))
        }
        Cmd::Transfer {
            global,
            point,
            shift,
            qmax,
            slack,
            out,
        } => {
            put!("point", point.clone());
            put!("shift", shift.clone());
            put!("qmax", *qmax);
            put!("slack", *slack);
            put!("out", out.clone().map(|p| p.display().to_string()));
            Ok((merge(v, global, "transfer")?, global.clone()))
        }
        Cmd::Cover {
            global,
            curve,
            shift,
            eps,
            tmin,
            tmax,
            out,
        } => {
            put!("curve", curve.clone());
            put!("shift", shift.clone());
            put!("eps", *eps);
            put!("tmin", *tmin);
            put!("tmax", *tmax);
            put!("out", out.clone().map(|p| p.display().to_string()));
            Ok((merge(v, global, "cover")?, global.clone()))
        }
        Cmd::Measure {
            global,
            curve,
            shift,
            eps,
            qmax,
            sgrid,
            samples,
            out,
        } => {
            put!("curve", curve.clone());
            put!("shift", shift.clone());
            put!("eps", *eps);
            put!("qmax", *qmax);
            put!("sgrid", sgrid.clone());
            put!("samples", *samples);
            put!("out", out.clone().map(|p| p.display().to_string()));
            Ok((merge(v, global, "measure")?, global.clone()))
        }
        Cmd::Slice {
            global,
            surface,
            count,
            out,
        } => {
            put!("surface", surface.clone());
            put!("count", *count);
            put!("out", out.clone().map(|p| p.display().to_string()));
            Ok((merge(v, global, "slice")?, global.clone()))
        }
        Cmd::Rerun { manifest } => {
            let text = std::fs::read_to_string(manifest)?;
            let mut map = report::parse_keyvalue(&text);
            let command = map
                .remove("command")
                .ok_or_else(|| Error::Precondition("manifest has no command line".into()))?;
            map.remove("version");
            let allowed = allowed_keys(&command)
                .ok_or_else(|| Error::Precondition(format!("manifest names unknown command `{command}`")))?;
            for k in map.keys() {
                if !allowed.contains(&k.as_str()) {
                    return Err(Error::Precondition(format!("unknown manifest key `{k}`")));
                }
            }
            Ok((
                ResolvedConfig {
                    command,
                    values: map,
                },
                GlobalOpts::default(),
            ))
        }
    }
}

fn parse_shift_or_zero(cfg: &ResolvedConfig, dim: usize) -> Result<Shift> {
    match cfg.get("shift") {
        Some(s) => {
            let sh = Shift::parse(s)?;
            Ok(sh)
        }
        None => Ok(Shift::zero(dim)),
    }
}

/// Execute one resolved configuration; writes outputs and the manifest.
pub fn run(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    let mut written = vec![];
    match cfg.command.as_str() {
        "exponent" => {
            let point = PointSpec::parse(cfg.require("point")?)?;
            let qmax: i64 = cfg
                .parse("qmax")?
                .ok_or_else(|| Error::Precondition("missing required option `qmax`".into()))?;
            let bits = cfg.precision()?;
            let kind = cfg.get("kind").unwrap_or("sim");
            let uniform = cfg.get("uniform") == Some("true");
            let est = match (kind, uniform) {
                ("sim", false) => exponent::estimate_w0(&point, &parse_shift_or_zero(cfg, point.dimension())?, qmax, bits)?,
                ("sim", true) => exponent::estimate_w0_uniform(&point, &parse_shift_or_zero(cfg, point.dimension())?, qmax, bits)?,
                ("dual", false) => exponent::estimate_w_dual(&point, &parse_shift_or_zero(cfg, 1)?, qmax, bits)?,
                ("dual", true) => exponent::estimate_w_dual_uniform(&point, &parse_shift_or_zero(cfg, 1)?, qmax, bits)?,
                (other, _) => return Err(Error::Precondition(format!("kind must be sim or dual, got `{other}`"))),
            };
            let out = cfg.out_path("exponent.csv");
            atomic_write(&out, report::exponent_csv(&[est]).as_bytes())?;
            written.push(out);
        }
        "transfer" => {
            let point = PointSpec::parse(cfg.require("point")?)?;
            let shift = parse_shift_or_zero(cfg, point.dimension())?;
            let qmax: i64 = cfg
                .parse("qmax")?
                .ok_or_else(|| Error::Precondition("missing required option `qmax`".into()))?;
            let slack = cfg.parse::<f64>("slack")?.unwrap_or(0.15);
            let rep = transfer::run_transfer(&point, &shift, qmax, slack, cfg.precision()?)?;
            let out = cfg.out_path("transfer.json");
            let json = serde_json::to_string_pretty(&rep).expect("report serializes");
            atomic_write(&out, json.as_bytes())?;
            written.push(out);
            if rep.verdict == transfer::Verdict::HardViolation {
                return Err(Error::Invariant("transfer report contains a hard violation".into()));
            }
        }
        "cover" => {
            let cv = curve::parse_curve(cfg.require("curve")?)?;
            let shift = parse_shift_or_zero(cfg, cv.dimension())?;
            let theta = shift.to_f64_vec();
            let eps: f64 = cfg
                .parse("eps")?
                .ok_or_else(|| Error::Precondition("missing required option `eps`".into()))?;
            let tmin: u32 = cfg
                .parse("tmin")?
                .ok_or_else(|| Error::Precondition("missing required option `tmin`".into()))?;
            let tmax: u32 = cfg
                .parse("tmax")?
                .ok_or_else(|| Error::Precondition("missing required option `tmax`".into()))?;
            if tmin > tmax {
                return Err(Error::Precondition("tmin must not exceed tmax".into()));
            }
            let (decay, families) = covering::disjoint_sum_decay(&cv, &theta, eps, tmin..=tmax)?;
            let out = cfg.out_path("cover.csv");
            atomic_write(&out, report::cover_balls_csv(&families).as_bytes())?;
            written.push(out.clone());
            let summary = out.with_extension("summary.csv");
            atomic_write(&summary, report::cover_summary_csv(&decay).as_bytes())?;
            written.push(summary);
            let series: Vec<(f64, f64)> = decay
                .rows
                .iter()
                .filter(|r| r.s_disjoint > 0.0)
                .map(|r| (r.t as f64, r.s_disjoint))
                .collect();
            written.extend(report::emit_plotdata(
                &series,
                &out.with_extension("decay.txt"),
                "t",
                "s_disjoint",
                true,
            )?);
        }
        "measure" => {
            let cv = curve::parse_curve(cfg.require("curve")?)?;
            let shift = parse_shift_or_zero(cfg, cv.dimension())?;
            let eps: f64 = cfg
                .parse("eps")?
                .ok_or_else(|| Error::Precondition("missing required option `eps`".into()))?;
            let qmax: i64 = cfg
                .parse("qmax")?
                .ok_or_else(|| Error::Precondition("missing required option `qmax`".into()))?;
            let samples = cfg.parse::<u64>("samples")?.unwrap_or(10_000);
            let sgrid: Vec<i64> = cfg
                .get("sgrid")
                .unwrap_or("1,10,100,1000")
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<i64>()
                        .map_err(|_| Error::Precondition(format!("malformed sgrid entry `{t}`")))
                })
                .collect::<Result<_>>()?;
            let min_s = sgrid.iter().copied().min().unwrap_or(1);
            let mc = measure::TruncatedLimsupConfig {
                curve: cv,
                theta: shift.to_f64_vec(),
                eps,
                s_low: min_s,
                qmax,
                samples,
                seed: cfg.seed()?,
            };
            let points = measure::tail_fraction_curve(&mc, &sgrid)?;
            let out = cfg.out_path("measure.csv");
            atomic_write(&out, report::measure_csv(&points).as_bytes())?;
            written.push(out.clone());
            let series: Vec<(f64, f64)> = points.iter().map(|p| (p.s as f64, p.fraction)).collect();
            written.extend(report::emit_plotdata(
                &series,
                &out.with_extension("fractions.txt"),
                "s",
                "fraction",
                false,
            )?);
        }
        "slice" => {
            let surf = curve::parse_surface(cfg.require("surface")?)?;
            let count = cfg.parse::<usize>("count")?.unwrap_or(8);
            let outcomes = surf.slice_grid(count)?;
            let out = cfg.out_path("slice.csv");
            atomic_write(&out, report::slices_csv(&outcomes).as_bytes())?;
            written.push(out);
        }
        other => return Err(Error::Precondition(format!("unknown command `{other}`"))),
    }
    let manifest = cfg.manifest_path();
    atomic_write(&manifest, report::manifest_text(&cfg.command, &cfg.values).as_bytes())?;
    written.push(manifest);
    Ok(written)
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Invariant(_) => 3,
        _ => 2,
    }
}

fn error_record(err: &Error) -> String {
    let kind = match err {
        Error::Grammar { .. } => "grammar",
        Error::Descriptor(_) => "descriptor",
        Error::Precondition(_) => "precondition",
        Error::Budget(_) => "budget",
        Error::Precision { .. } => "precision",
        Error::Quadrature { .. } => "quadrature",
        Error::Invariant(_) => "invariant",
        Error::Io(_) => "io",
    };
    serde_json::json!({ "error": err.to_string(), "kind": kind }).to_string()
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version with its own success exit
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match cmd_to_config(&cli.command) {
        Ok((cfg, _)) => cfg,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            return exit_code_for(&e);
        }
    };
    match run(&cfg) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            exit_code_for(&e)
        }
    }
}

/// Convenience for tests: run a full command line in-process.
pub fn run_from_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = report::parse_keyvalue(&text);
    let command = map
        .remove("command")
        .ok_or_else(|| Error::Precondition("manifest has no command line".into()))?;
    map.remove("version");
    run(&ResolvedConfig {
        command,
        values: map,
    })
}
