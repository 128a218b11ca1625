use crate::error::CliError;
use clap::{Args, ValueEnum};
use disjhh::disj::Label;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StreamFormat {
    Text,
    Binary,
}

/// Parameters shared by all commands. Each may come from `--config` or a
/// flag; flags win.
#[derive(Clone, Debug, Default, Args)]
pub struct Params {
    /// JSON file with default values for any of the parameters below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Universe size
    #[arg(short, long)]
    pub n: Option<usize>,
    /// Number of players
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Number of players sharing the star element
    #[arg(short, long)]
    pub l: Option<usize>,
    /// Fraction of players sharing the star (l = ceil(c·k) when --l is absent)
    #[arg(short, long)]
    pub c: Option<f64>,
    /// Accuracy parameter
    #[arg(long)]
    pub eps: Option<f64>,
    /// Norm exponent
    #[arg(short, long)]
    pub p: Option<f64>,
    /// Power-law exponent
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Stream length bound L
    #[arg(long = "length-bound", short = 'L')]
    pub length_bound: Option<u64>,
    /// Sketch capacity S
    #[arg(long, short = 'S')]
    pub sparsity: Option<usize>,
    /// Random seed (mandatory for randomized commands)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of trials
    #[arg(long)]
    pub trials: Option<usize>,
    /// Dimension for low-rank instances
    #[arg(short, long)]
    pub d: Option<usize>,
    /// Instance label: YES or NO
    #[arg(long)]
    pub label: Option<Label>,
    /// Sketch rows for the adversary
    #[arg(short, long)]
    pub r: Option<usize>,
    /// CountSketch width
    #[arg(long)]
    pub width: Option<usize>,
    /// CountSketch depth
    #[arg(long)]
    pub depth: Option<usize>,
    /// Stream file format
    #[arg(long, value_enum)]
    pub format: Option<StreamFormat>,
    /// Player index
    #[arg(long)]
    pub player: Option<usize>,
    /// Input file (stream, spec or matrix depending on the command)
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// Output path; reports also write a JSON mirror next to it
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Strict-turnstile query (default is the l_inf query)
    #[arg(long)]
    pub strict: bool,
}

/// The JSON config file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub l: Option<usize>,
    pub c: Option<f64>,
    pub eps: Option<f64>,
    pub p: Option<f64>,
    pub zeta: Option<f64>,
    #[serde(alias = "L")]
    pub length_bound: Option<u64>,
    #[serde(alias = "S")]
    pub sparsity: Option<usize>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub d: Option<usize>,
    pub label: Option<Label>,
    pub r: Option<usize>,
    pub width: Option<usize>,
    pub depth: Option<usize>,
    pub format: Option<StreamFormat>,
    pub player: Option<usize>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub strict: Option<bool>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Config values overridden by any flag that was given.
    pub fn resolve(params: &Params) -> Result<Self, CliError> {
        let base = match &params.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        let p = params.clone();
        let cfg = ExperimentConfig {
            n: p.n.or(base.n),
            k: p.k.or(base.k),
            l: p.l.or(base.l),
            c: p.c.or(base.c),
            eps: p.eps.or(base.eps),
            p: p.p.or(base.p),
            zeta: p.zeta.or(base.zeta),
            length_bound: p.length_bound.or(base.length_bound),
            sparsity: p.sparsity.or(base.sparsity),
            seed: p.seed.or(base.seed),
            trials: p.trials.or(base.trials),
            d: p.d.or(base.d),
            label: p.label.or(base.label),
            r: p.r.or(base.r),
            width: p.width.or(base.width),
            depth: p.depth.or(base.depth),
            format: p.format.or(base.format),
            player: p.player.or(base.player),
            input: p.input.or(base.input),
            out: p.out.or(base.out),
            strict: Some(p.strict || base.strict.unwrap_or(false)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(eps) = self.eps {
            if !(eps > 0.0 && eps <= 1.0) {
                return bad(format!("eps must lie in (0, 1], got {eps}"));
            }
        }
        if let Some(c) = self.c {
            if !(c > 0.0 && c <= 1.0) {
                return bad(format!("c must lie in (0, 1], got {c}"));
            }
        }
        if let Some(p) = self.p {
            if !(p >= 1.0 && p.is_finite()) {
                return bad(format!("p must be a finite value >= 1, got {p}"));
            }
        }
        if let Some(zeta) = self.zeta {
            if !(zeta > 0.0 && zeta <= 1.0) {
                return bad(format!("zeta must lie in (0, 1], got {zeta}"));
            }
        }
        if let (Some(l), Some(k)) = (self.l, self.k) {
            if l == 0 || l > k {
                return bad(format!("l must satisfy 1 <= l <= k, got l = {l}, k = {k}"));
            }
        }
        if self.trials == Some(0) {
            return bad("trials must be positive".into());
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or(CliError::MissingSeed)
    }

    pub fn strict(&self) -> bool {
        self.strict.unwrap_or(false)
    }

    /// `l` from `--l`, else `ceil(c·k)`.
    pub fn l_or_from_c(&self, k: usize) -> Result<usize, CliError> {
        match (self.l, self.c) {
            (Some(l), _) => Ok(l),
            (None, Some(c)) => Ok(disjhh::disj::popular_multiplicity(k, c)),
            (None, None) => Err(CliError::Missing("l (or c)")),
        }
    }
}

macro_rules! required {
    ($($name:ident: $t:ty),* $(,)?) => {
        impl ExperimentConfig {
            $(
                pub fn $name(&self) -> Result<$t, CliError> {
                    self.$name.clone().ok_or(CliError::Missing(stringify!($name)))
                }
            )*
        }
    };
}

required! {
    n: usize,
    k: usize,
    eps: f64,
    p: f64,
    zeta: f64,
    d: usize,
    r: usize,
    label: Label,
    input: PathBuf,
    sparsity: usize,
    trials: usize,
}
