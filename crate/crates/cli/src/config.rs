use std::fs;
use std::path::{Path, PathBuf};

use aberrsim::classifier::TrainConfig;
use aberrsim::datasetgen::{coefficients_for, PairSplit, SingleType};
use aberrsim::optics::{OpticalConfig, ZernikeCoefficients};
use aberrsim::synth::BlobParams;
use clap::{Args, ValueEnum};
use serde::Deserialize;

use crate::CliError;

/// JSON run configuration. Flags given on the command line take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    /// Full optical parameters; overrides `preset`.
    pub optics: Option<OpticalConfig>,
    pub seed: Option<u64>,
    pub schedule: Option<ScheduleConfig>,
    pub train: Option<TrainConfig>,
    pub blobs: Option<BlobParams>,
    #[serde(default)]
    pub paths: PathConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub out: Option<PathBuf>,
    pub image: Option<PathBuf>,
    pub sources: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: Option<ScheduleKind>,
    pub mixed_per_range: Option<usize>,
    pub singles_per_type: Option<usize>,
    pub jitters: Option<usize>,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// 192 fine-sampled single records plus mixed records per order range.
    PlcmTrain,
    /// 5 single records per type plus 50 mixed per range.
    PlcmTest,
    /// Exact-level single records plus mixed records, test namespace.
    Heldout,
    /// Every type and level repeated with small amplitude offsets.
    Jittered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Equal,
    RootTwo,
}

impl From<Split> for PairSplit {
    fn from(s: Split) -> Self {
        match s {
            Split::Equal => PairSplit::Equal,
            Split::RootTwo => PairSplit::RootTwo,
        }
    }
}

impl RunConfig {
    /// Reads `path` and resolves every relative path against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Core(aberrsim::Error::Io {
                path: path.into(),
                source: e,
            })
        })?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut cfg.paths;
        for slot in [
            &mut p.out,
            &mut p.image,
            &mut p.sources,
            &mut p.manifest,
            &mut p.model,
            &mut p.truth,
        ] {
            if let Some(v) = slot.as_mut() {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        }
        Ok(cfg)
    }
}

/// Flag value, else config value, else a config error naming the flag.
pub fn required(
    flag: Option<PathBuf>,
    cfg: &Option<PathBuf>,
    name: &str,
) -> Result<PathBuf, CliError> {
    flag.or_else(|| cfg.clone()).ok_or_else(|| {
        CliError::Config(format!(
            "--{name} is required (flag or config paths.{name})"
        ))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Dnn,
    Livecell,
}

#[derive(Debug, Clone, Args)]
pub struct OpticsArgs {
    /// Built-in microscope parameters.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// PSF grid side in pixels (even, >= 32).
    #[arg(long)]
    pub grid: Option<usize>,
}

impl OpticsArgs {
    /// Flag preset, else config optics, else config preset, else `dnn`.
    pub fn resolve(&self, cfg: &RunConfig) -> Result<OpticalConfig, CliError> {
        let mut optics = match (self.preset, &cfg.optics, &cfg.preset) {
            (Some(Preset::Dnn), _, _) => OpticalConfig::dnn(),
            (Some(Preset::Livecell), _, _) => OpticalConfig::livecell(),
            (None, Some(o), _) => o.clone(),
            (None, None, Some(name)) => OpticalConfig::preset(name)
                .ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?,
            (None, None, None) => OpticalConfig::dnn(),
        };
        if let Some(g) = self.grid {
            optics.grid = g;
        }
        optics.validate()?;
        Ok(optics)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TypeArg {
    Astigmatism,
    Coma,
    Spherical,
    Trefoil,
}

impl From<TypeArg> for SingleType {
    fn from(t: TypeArg) -> Self {
        match t {
            TypeArg::Astigmatism => SingleType::Astigmatism,
            TypeArg::Coma => SingleType::Coma,
            TypeArg::Spherical => SingleType::Spherical,
            TypeArg::Trefoil => SingleType::Trefoil,
        }
    }
}

pub fn type_name(t: SingleType) -> &'static str {
    match t {
        SingleType::Astigmatism => "astigmatism",
        SingleType::Coma => "coma",
        SingleType::Spherical => "spherical",
        SingleType::Trefoil => "trefoil",
    }
}

#[derive(Debug, Clone, Args)]
pub struct AberrationArgs {
    /// Single aberration family (needs --amp).
    #[arg(long = "type", value_enum, requires = "amp", conflicts_with = "coef")]
    pub kind: Option<TypeArg>,
    /// Amplitude in micrometers for --type.
    #[arg(long, requires = "kind")]
    pub amp: Option<f64>,
    /// Explicit coefficient INDEX=AMP (Wyant index 4..=18); repeatable.
    #[arg(long, value_parser = parse_coef)]
    pub coef: Vec<(u32, f64)>,
}

impl AberrationArgs {
    pub fn coefficients(&self) -> Result<ZernikeCoefficients, CliError> {
        match (self.kind, self.amp) {
            (Some(t), Some(a)) => Ok(coefficients_for(t.into(), a)),
            _ => Ok(ZernikeCoefficients::from_pairs(self.coef.iter().copied())?),
        }
    }
}

fn parse_coef(s: &str) -> Result<(u32, f64), String> {
    let (i, a) = s
        .split_once('=')
        .ok_or_else(|| format!("expected INDEX=AMP, got {s:?}"))?;
    let i: u32 = i.trim().parse().map_err(|e| format!("index {i:?}: {e}"))?;
    let a: f64 = a
        .trim()
        .parse()
        .map_err(|e| format!("amplitude {a:?}: {e}"))?;
    Ok((i, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coef_parsing() {
        assert_eq!(parse_coef("8=0.4").unwrap(), (8, 0.4));
        assert!(parse_coef("8:0.4").is_err());
        assert!(parse_coef("x=1").is_err());
    }

    #[test]
    fn config_rejects_unknown_keys_and_resolves_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        fs::write(&p, r#"{"preset": "livecell", "paths": {"out": "o"}}"#).unwrap();
        let cfg = RunConfig::load(&p).unwrap();
        assert_eq!(cfg.paths.out.unwrap(), dir.path().join("o"));
        fs::write(&p, r#"{"presets": "dnn"}"#).unwrap();
        assert!(matches!(RunConfig::load(&p), Err(CliError::Config(_))));
    }
}
