//! Run configuration: plain-text `key = value` lines, `#` starts a comment.
//!
//! ```text
//! # reference run
//! P = 1
//! R = 50000
//! tau = 500
//! Pm = 2
//! e_r = 0, 1, 1
//! N1 = 16
//! N2 = 16
//! N3 = 14
//! dt = 1e-4
//! steps = 5000
//! scheme = rk4
//! ```
//!
//! Unknown or repeated keys are errors. `eta` defaults to `P / Pm`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::fields::InsulatingMatch;
use crate::mhd::{Amplitudes, Params, Scheme, SimOptions};
use crate::transforms::Dims;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    Random { seed: u64, amplitudes: Amplitudes },
    Roll { seed: u64, amplitudes: Amplitudes },
    Checkpoint(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: Params,
    pub dims: Dims,
    pub dt: f64,
    pub steps: u64,
    pub scheme: Scheme,
    /// Energy sample every this many steps (and at step 0).
    pub output_interval: u64,
    /// Checkpoint every this many steps; 0 writes only the final state.
    pub checkpoint_interval: u64,
    pub output_dir: PathBuf,
    pub initial_condition: InitialCondition,
    pub options: SimOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: Params::reference(),
            dims: Dims::new(4, 4, 6),
            dt: 1e-4,
            steps: 100,
            scheme: Scheme::Rk4,
            output_interval: 1,
            checkpoint_interval: 0,
            output_dir: PathBuf::from("out"),
            initial_condition: InitialCondition::Random {
                seed: 0,
                amplitudes: Amplitudes::default(),
            },
            options: SimOptions::default(),
        }
    }
}

const KEYS: &[&str] = &[
    "P",
    "R",
    "tau",
    "Pm",
    "eta",
    "e_r",
    "L1",
    "L2",
    "N1",
    "N2",
    "N3",
    "dt",
    "steps",
    "scheme",
    "output_interval",
    "checkpoint_interval",
    "output_dir",
    "initial_condition",
    "checkpoint_path",
    "seed",
    "amplitudes",
    "linear_only",
    "insulating_match",
];

fn value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config {
        line,
        msg: format!("invalid value {v:?} for {key}"),
    })
}

fn floats<const K: usize>(line: usize, key: &str, v: &str) -> Result<[f64; K]> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != K {
        return Err(Error::Config {
            line,
            msg: format!("{key} needs {K} comma-separated numbers, got {}", parts.len()),
        });
    }
    let mut out = [0.0; K];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = value(line, key, p)?;
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    /// Semantic checks that the line parser cannot do.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let d = self.dims;
        if d.n1 == 0 && d.n2 == 0 {
            return Err(Error::InvalidConfig("N1 and N2 cannot both be zero".into()));
        }
        if d.n3 < 2 {
            return Err(Error::InvalidConfig(format!("N3 must be at least 2, got {}", d.n3)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.output_interval == 0 {
            return Err(Error::InvalidConfig("output_interval must be at least 1".into()));
        }
        if let InitialCondition::Random { amplitudes: a, .. } | InitialCondition::Roll { amplitudes: a, .. } =
            self.initial_condition
        {
            if [a.theta, a.v, a.b].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidConfig("amplitudes must be finite and non-negative".into()));
            }
        }
        Ok(())
    }

    /// Serialises to the text format (round-trips through `parse`).
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("P", format!("{:?}", p.p));
        kv("R", format!("{:?}", p.r));
        kv("tau", format!("{:?}", p.tau));
        kv("Pm", format!("{:?}", p.pm));
        kv("eta", format!("{:?}", p.eta));
        kv("e_r", format!("{:?}, {:?}, {:?}", p.e_r[0], p.e_r[1], p.e_r[2]));
        kv("L1", format!("{:?}", p.l1));
        kv("L2", format!("{:?}", p.l2));
        kv("N1", self.dims.n1.to_string());
        kv("N2", self.dims.n2.to_string());
        kv("N3", self.dims.n3.to_string());
        kv("dt", format!("{:?}", self.dt));
        kv("steps", self.steps.to_string());
        let scheme = match self.scheme {
            Scheme::Euler => "euler",
            Scheme::Rk4 => "rk4",
            Scheme::Imex => "imex",
        };
        kv("scheme", scheme.into());
        kv("output_interval", self.output_interval.to_string());
        kv("checkpoint_interval", self.checkpoint_interval.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        match &self.initial_condition {
            InitialCondition::Random { seed, amplitudes: a } | InitialCondition::Roll { seed, amplitudes: a } => {
                let name = if matches!(self.initial_condition, InitialCondition::Random { .. }) {
                    "random"
                } else {
                    "roll"
                };
                kv("initial_condition", name.into());
                kv("seed", seed.to_string());
                kv("amplitudes", format!("{:?}, {:?}, {:?}", a.theta, a.v, a.b));
            }
            InitialCondition::Checkpoint(path) => {
                kv("initial_condition", "checkpoint".into());
                kv("checkpoint_path", path.display().to_string());
            }
        }
        kv("linear_only", self.options.linear_only.to_string());
        let m = match self.options.matching {
            InsulatingMatch::AsPrinted => "printed",
            InsulatingMatch::Decaying => "decaying",
        };
        kv("insulating_match", m.into());
        s
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        let mut eta = None;
        let mut ic = "random".to_string();
        let mut ic_line = 0;
        let mut seed = 0u64;
        let mut amplitudes = Amplitudes::default();
        let mut checkpoint_path = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, v) = body.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected `key = value`, got {body:?}"),
            })?;
            let (key, v) = (key.trim(), v.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config {
                    line,
                    msg: format!("unknown key {key:?}"),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    line,
                    msg: format!("duplicate key {key:?}"),
                });
            }
            if v.is_empty() {
                return Err(Error::Config {
                    line,
                    msg: format!("missing value for {key}"),
                });
            }
            let p = &mut cfg.params;
            match key {
                "P" => p.p = value(line, key, v)?,
                "R" => p.r = value(line, key, v)?,
                "tau" => p.tau = value(line, key, v)?,
                "Pm" => p.pm = value(line, key, v)?,
                "eta" => eta = Some(value(line, key, v)?),
                "e_r" => p.e_r = floats::<3>(line, key, v)?,
                "L1" => p.l1 = value(line, key, v)?,
                "L2" => p.l2 = value(line, key, v)?,
                "N1" => cfg.dims.n1 = value(line, key, v)?,
                "N2" => cfg.dims.n2 = value(line, key, v)?,
                "N3" => cfg.dims.n3 = value(line, key, v)?,
                "dt" => cfg.dt = value(line, key, v)?,
                "steps" => cfg.steps = value(line, key, v)?,
                "scheme" => cfg.scheme = v.parse().map_err(|msg| Error::Config { line, msg })?,
                "output_interval" => cfg.output_interval = value(line, key, v)?,
                "checkpoint_interval" => cfg.checkpoint_interval = value(line, key, v)?,
                "output_dir" => cfg.output_dir = PathBuf::from(v),
                "initial_condition" => {
                    if !["random", "roll", "checkpoint"].contains(&v) {
                        return Err(Error::Config {
                            line,
                            msg: format!("initial_condition must be random, roll or checkpoint, got {v:?}"),
                        });
                    }
                    ic = v.to_string();
                    ic_line = line;
                }
                "checkpoint_path" => checkpoint_path = Some(PathBuf::from(v)),
                "seed" => seed = value(line, key, v)?,
                "amplitudes" => {
                    let [theta, vv, b] = floats::<3>(line, key, v)?;
                    amplitudes = Amplitudes { theta, v: vv, b };
                }
                "linear_only" => cfg.options.linear_only = value(line, key, v)?,
                "insulating_match" => {
                    cfg.options.matching = match v {
                        "printed" => InsulatingMatch::AsPrinted,
                        "decaying" => InsulatingMatch::Decaying,
                        _ => {
                            return Err(Error::Config {
                                line,
                                msg: format!("insulating_match must be printed or decaying, got {v:?}"),
                            })
                        }
                    }
                }
                _ => unreachable!("key list checked above"),
            }
        }
        cfg.params.eta = eta.unwrap_or(cfg.params.p / cfg.params.pm);
        cfg.initial_condition = match ic.as_str() {
            "random" => InitialCondition::Random { seed, amplitudes },
            "roll" => InitialCondition::Roll { seed, amplitudes },
            _ => InitialCondition::Checkpoint(checkpoint_path.ok_or_else(|| Error::Config {
                line: ic_line,
                msg: "initial_condition = checkpoint needs checkpoint_path".into(),
            })?),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
