use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ops::PoolStatistic;

/// Which modulation paths are active inside each block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Paths {
    pub csi: bool,
    pub icd: bool,
    pub csd: bool,
}

impl Paths {
    pub const NONE: Paths = Paths { csi: false, icd: false, csd: false };
    pub const ALL: Paths = Paths { csi: true, icd: true, csd: true };

    pub fn any(&self) -> bool {
        self.csi || self.icd || self.csd
    }
}

impl Default for Paths {
    fn default() -> Self {
        Paths::ALL
    }
}

impl fmt::Display for Paths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [(self.csi, "csi"), (self.icd, "icd"), (self.csd, "csd")]
            .into_iter()
            .filter_map(|(on, n)| on.then_some(n))
            .collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

impl FromStr for Paths {
    type Err = Error;

    /// `none` or a comma-separated subset of `csi,icd,csd`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut p = Paths::NONE;
        if s.eq_ignore_ascii_case("none") || s.is_empty() {
            return Ok(p);
        }
        for part in s.split(',') {
            match part.trim().to_ascii_lowercase().as_str() {
                "csi" => p.csi = true,
                "icd" => p.icd = true,
                "csd" => p.csd = true,
                other => return Err(Error::Config(format!("unknown modulation path {other:?}"))),
            }
        }
        Ok(p)
    }
}

/// Statistic fed to the two fully-connected layers of the ICD path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IcdStatistic {
    Pool(PoolStatistic),
    /// Shared FC stack applied to both the max- and avg-pooled vectors, the
    /// two outputs summed.
    MaxAvg,
}

impl Default for IcdStatistic {
    fn default() -> Self {
        IcdStatistic::Pool(PoolStatistic::StdVar)
    }
}

impl fmt::Display for IcdStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IcdStatistic::Pool(p) => p.fmt(f),
            IcdStatistic::MaxAvg => f.write_str("maxavg"),
        }
    }
}

impl FromStr for IcdStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("maxavg") {
            Ok(IcdStatistic::MaxAvg)
        } else {
            s.parse().map(IcdStatistic::Pool)
        }
    }
}

/// Architecture hyper-parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    /// Number of modulation blocks `R`.
    pub blocks: usize,
    /// Feature channels `C`.
    pub channels: usize,
    pub scale: usize,
    pub paths: Paths,
    pub csi_stat: PoolStatistic,
    pub icd_stat: IcdStatistic,
    /// ICD bottleneck is `channels / reduction` wide.
    pub reduction: usize,
    /// Added to the standard deviation when standardizing channel statistics.
    pub eps: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            blocks: 16,
            channels: 64,
            scale: 2,
            paths: Paths::ALL,
            csi_stat: PoolStatistic::StdVar,
            icd_stat: IcdStatistic::default(),
            reduction: 16,
            eps: 1e-5,
        }
    }
}

impl NetworkConfig {
    pub fn new(blocks: usize, channels: usize, scale: usize, paths: Paths) -> Self {
        Self { blocks, channels, scale, paths, ..Self::default() }
    }

    pub fn with_reduction(mut self, reduction: usize) -> Self {
        self.reduction = reduction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 {
            return Err(Error::Config("at least one block is required".into()));
        }
        if self.channels == 0 {
            return Err(Error::Config("channel count must be positive".into()));
        }
        if !matches!(self.scale, 2..=4) {
            return Err(Error::Config(format!("scale must be 2, 3 or 4, got {}", self.scale)));
        }
        if self.paths.icd && (self.reduction == 0 || self.channels % self.reduction != 0) {
            return Err(Error::Config(format!(
                "{} channels are not divisible by ICD reduction {}",
                self.channels, self.reduction
            )));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }

    /// Sub-pixel stages as `(conv output channels, shuffle factor)`.
    pub fn upscale_stages(&self) -> Vec<(usize, usize)> {
        let c = self.channels;
        match self.scale {
            3 => vec![(9 * c, 3)],
            4 => vec![(4 * c, 2), (4 * c, 2)],
            _ => vec![(4 * c, 2)],
        }
    }

    pub fn icd_hidden(&self) -> usize {
        self.channels / self.reduction.max(1)
    }
}

impl fmt::Display for NetworkConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "R{}C{} x{} paths={} csi_stat={} icd_stat={} reduction={} eps={:e}",
            self.blocks,
            self.channels,
            self.scale,
            self.paths,
            self.csi_stat,
            self.icd_stat,
            self.reduction,
            self.eps
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_round_trip() {
        assert_eq!("none".parse::<Paths>().unwrap(), Paths::NONE);
        assert_eq!("csi,icd,csd".parse::<Paths>().unwrap(), Paths::ALL);
        let p: Paths = "CSD, icd".parse().unwrap();
        assert_eq!(p.to_string(), "icd,csd");
        assert!("csi,foo".parse::<Paths>().is_err());
    }

    #[test]
    fn validation() {
        assert!(NetworkConfig::default().validate().is_ok());
        assert!(NetworkConfig::new(2, 8, 2, Paths::ALL).validate().is_err());
        assert!(NetworkConfig::new(2, 8, 2, Paths::ALL).with_reduction(4).validate().is_ok());
        assert!(NetworkConfig::new(2, 8, 2, "csi,csd".parse().unwrap()).validate().is_ok());
        assert!(NetworkConfig::new(0, 16, 2, Paths::ALL).validate().is_err());
        assert!(NetworkConfig::new(1, 16, 5, Paths::ALL).validate().is_err());
    }

    #[test]
    fn icd_statistic_names() {
        assert_eq!("maxavg".parse::<IcdStatistic>().unwrap(), IcdStatistic::MaxAvg);
        assert_eq!(
            "var".parse::<IcdStatistic>().unwrap(),
            IcdStatistic::Pool(PoolStatistic::Var)
        );
        assert_eq!(IcdStatistic::default().to_string(), "stdvar");
    }
}
