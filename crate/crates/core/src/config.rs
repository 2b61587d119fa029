//! Plain-text `key = value` configuration.
//!
//! Blank lines and `#` comments are ignored. Recognized keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `alpha1` | census weight | 1 |
//! | `alpha2` | smoothness weight | 4 |
//! | `alpha3` | non-intersection weight | 0.01 |
//! | `alpha4` | non-blocking weight | 0.01 |
//! | `k` | smoothness order (1 or 2) | 1 |
//! | `mu` | smoothness edge sensitivity | 150 |
//! | `epsilon` | robust penalty offset | 0.01 |
//! | `q` | robust penalty exponent | 0.4 |
//! | `occ_alpha` | occlusion relative tolerance | 0.01 |
//! | `occ_beta` | occlusion absolute tolerance (px²) | 0.5 |
//! | `lr` | Adam learning rate (px/step) | 0.05 |
//! | `beta1`, `beta2` | Adam moment decay | 0.9, 0.999 |
//! | `adam_epsilon` | Adam denominator offset | 1e-8 |
//! | `iters` | steps per pyramid level | 500 |
//! | `levels` | pyramid levels | 3 |
//! | `refresh` | steps between occlusion re-estimation | 25 |

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::objective::LossConfig;
use crate::optimize::OptimizeConfig;
use crate::photometric::SmoothnessOrder;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Config {
    pub loss: LossConfig,
    pub optimize: OptimizeConfig,
}

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Config { line, reason: format!("cannot parse {raw:?} for {key}") })
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config { line, reason: format!("expected key = value, got {content:?}") })?;
            let l = &mut cfg.loss;
            let o = &mut cfg.optimize;
            match key {
                "alpha1" => l.census_weight = parse_value(line, key, value)?,
                "alpha2" => l.smoothness_weight = parse_value(line, key, value)?,
                "alpha3" => l.non_intersection_weight = parse_value(line, key, value)?,
                "alpha4" => l.non_blocking_weight = parse_value(line, key, value)?,
                "k" => {
                    l.smoothness.order = SmoothnessOrder::from_k(parse_value(line, key, value)?)
                        .map_err(|e| Error::Config { line, reason: e.to_string() })?
                }
                "mu" => l.smoothness.mu = parse_value(line, key, value)?,
                "epsilon" => l.robust.epsilon = parse_value(line, key, value)?,
                "q" => l.robust.q = parse_value(line, key, value)?,
                "occ_alpha" => l.occlusion.alpha_consistency = parse_value(line, key, value)?,
                "occ_beta" => l.occlusion.beta_offset = parse_value(line, key, value)?,
                "lr" => o.adam.learning_rate = parse_value(line, key, value)?,
                "beta1" => o.adam.beta1 = parse_value(line, key, value)?,
                "beta2" => o.adam.beta2 = parse_value(line, key, value)?,
                "adam_epsilon" => o.adam.epsilon = parse_value(line, key, value)?,
                "iters" => o.iterations_per_level = parse_value(line, key, value)?,
                "levels" => o.levels = parse_value(line, key, value)?,
                "refresh" => o.occlusion_refresh = parse_value(line, key, value)?,
                other => return Err(Error::Config { line, reason: format!("unknown key {other:?}") }),
            }
        }
        cfg.loss.validate().map_err(|e| Error::Config { line: 0, reason: e.to_string() })?;
        cfg.optimize.validate().map_err(|e| Error::Config { line: 0, reason: e.to_string() })?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
