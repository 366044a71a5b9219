//! Flat key-value run configuration with `[section]` headers.
//!
//! Every key is `section.name`; file lines and `--set` overrides feed the
//! same map, and unknown keys are rejected after all known keys have been
//! consumed. Values are scalars or comma lists.

use bottlenet_core::harness::{
    BoundSuiteConfig, CurvesConfig, DirectionMode, HessianScanConfig, SpecTemplate, SweepConfig,
};
use bottlenet_core::net::Activation;
use bottlenet_core::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Default, Clone)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let mut map = ConfigMap::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    lineno + 1
                )));
            };
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            map.entries.insert(full, value.trim().to_string());
        }
        Ok(map)
    }

    /// Apply a `--set section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "--set expects `section.key=value`, got `{assignment}`"
            )));
        };
        self.entries
            .insert(key.trim().to_string(), value.trim().to_string());
        Ok(())
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn take_parse<T: std::str::FromStr>(&mut self, key: &str, into: &mut T) -> Result<()> {
        if let Some(v) = self.take(key) {
            *into = v
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("key `{key}`: cannot parse `{v}`")))?;
        }
        Ok(())
    }

    fn take_list(&mut self, key: &str, into: &mut Vec<usize>) -> Result<()> {
        if let Some(v) = self.take(key) {
            *into = v
                .split(',')
                .map(|p| {
                    p.trim().parse().map_err(|_| {
                        Error::InvalidConfig(format!("key `{key}`: bad list entry `{p}`"))
                    })
                })
                .collect::<Result<_>>()?;
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if let Some((key, _)) = self.entries.into_iter().next() {
            return Err(Error::InvalidConfig(format!("unknown config key `{key}`")));
        }
        Ok(())
    }
}

/// Fully resolved run configuration for every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub sweep: SweepConfig,
    pub curves: CurvesConfig,
    pub hessian: HessianScanConfig,
    pub verify: BoundSuiteConfig,
    pub network: SpecTemplate,
    pub hidden: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sweep: SweepConfig::default(),
            curves: CurvesConfig::default(),
            hessian: HessianScanConfig::default(),
            verify: BoundSuiteConfig::default(),
            network: SpecTemplate::single_bottleneck(2, 1, 1),
            hidden: 4096,
        }
    }
}

impl RunConfig {
    /// Resolve from a config map, a preset, and a master seed.
    pub fn resolve(
        mut map: ConfigMap,
        preset: Option<&str>,
        master_seed: Option<u64>,
    ) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        match preset {
            None | Some("default") => {}
            Some("curves-large") => {
                // figure-scale widths; fewer seeds keep the run tractable
                cfg.curves.hidden = 10_000;
                cfg.curves.seeds = 5;
            }
            Some(other) => {
                return Err(Error::InvalidConfig(format!("unknown preset `{other}`")));
            }
        }

        // [network]
        map.take_list("network.depths", &mut cfg.network.depths)?;
        map.take_list("network.widths", &mut cfg.network.widths)?;
        if let Some(v) = map.take("network.activation") {
            cfg.network.activation = Activation::parse(&v)?;
        }
        map.take_parse("network.hidden", &mut cfg.hidden)?;
        cfg.sweep.template = cfg.network.clone();
        cfg.hessian.template = cfg.network.clone();
        cfg.verify.template = cfg.network.clone();

        // [sweep]
        map.take_list("sweep.widths", &mut cfg.sweep.widths)?;
        map.take_parse("sweep.seeds", &mut cfg.sweep.seeds)?;
        map.take_parse("sweep.directions", &mut cfg.sweep.directions)?;
        map.take_parse("sweep.radius", &mut cfg.sweep.radius)?;
        if let Some(v) = map.take("sweep.jet-degree") {
            let deg: usize = v
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("sweep.jet-degree: `{v}`")))?;
            cfg.sweep.jet_degree = Some(deg);
        }
        map.take_parse("sweep.t-points", &mut cfg.sweep.t_points)?;
        map.take_parse("sweep.t-max", &mut cfg.sweep.t_max)?;
        if let Some(v) = map.take("sweep.direction-mode") {
            cfg.sweep.direction_mode = match v.as_str() {
                "random" => DirectionMode::Random,
                "maximize" => DirectionMode::Maximize,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "sweep.direction-mode: `{other}` (random|maximize)"
                    )))
                }
            };
        }
        map.take_parse("sweep.input-norm", &mut cfg.sweep.input_norm)?;
        if let Some(v) = map.take("sweep.slope-band") {
            let parts: Vec<&str> = v.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(Error::InvalidConfig(
                    "sweep.slope-band expects `lo,hi`".into(),
                ));
            }
            let lo = parts[0]
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("slope band: `{v}`")))?;
            let hi = parts[1]
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("slope band: `{v}`")))?;
            cfg.sweep.slope_band = (lo, hi);
        }

        // [curves]
        map.take_parse("curves.hidden", &mut cfg.curves.hidden)?;
        map.take_parse("curves.seeds", &mut cfg.curves.seeds)?;
        map.take_parse("curves.directions", &mut cfg.curves.directions)?;
        map.take_parse("curves.radius", &mut cfg.curves.radius)?;
        map.take_parse("curves.t-points", &mut cfg.curves.t_points)?;
        map.take_parse("curves.t-max", &mut cfg.curves.t_max)?;
        map.take_parse("curves.input-norm", &mut cfg.curves.input_norm)?;
        map.take_parse("curves.jet-overlay", &mut cfg.curves.jet_overlay)?;
        if let Some(v) = map.take("curves.activation") {
            cfg.curves.activation_filter = match v.as_str() {
                "both" => None,
                other => Some(Activation::parse(other)?),
            };
        }

        // [hessian]
        map.take_list("hessian.widths", &mut cfg.hessian.widths)?;
        map.take_parse("hessian.seeds", &mut cfg.hessian.seeds)?;
        map.take_parse("hessian.input-norm", &mut cfg.hessian.input_norm)?;
        map.take_parse("hessian.power-restarts", &mut cfg.hessian.power_restarts)?;
        map.take_parse("hessian.power-iters", &mut cfg.hessian.power_iters)?;

        // [verify]
        map.take_parse("verify.width", &mut cfg.verify.width)?;
        map.take_parse("verify.seeds", &mut cfg.verify.seeds)?;
        map.take_parse("verify.radius", &mut cfg.verify.radius)?;
        map.take_parse("verify.input-norm", &mut cfg.verify.input_norm)?;
        map.take_parse("verify.directions", &mut cfg.verify.directions)?;
        map.take_parse("verify.t-points", &mut cfg.verify.t_points)?;
        map.take_parse("verify.t-max", &mut cfg.verify.t_max)?;
        map.take_parse("verify.tail-trials", &mut cfg.verify.tail_trials)?;
        map.take_parse("verify.ball-samples", &mut cfg.verify.ball_samples)?;
        map.take_parse("verify.tuple-samples", &mut cfg.verify.tuple_samples)?;
        map.take_parse("verify.min-pass-rate", &mut cfg.verify.min_pass_rate)?;
        map.take_parse(
            "verify.min-pass-rate-within",
            &mut cfg.verify.min_pass_rate_within,
        )?;

        map.finish()?;

        if let Some(seed) = master_seed {
            cfg.sweep.master_seed = seed;
            cfg.curves.master_seed = seed;
            cfg.hessian.master_seed = seed;
            cfg.verify.master_seed = seed;
        }
        Ok(cfg)
    }
}
