//! The 3×3 grid of visual × haptic noise conditions.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VisualLevel {
    /// Sharp disk.
    V0,
    /// Weak cloud, σ_c = 21.32 mm.
    V1,
    /// Strong cloud, σ_c = 52.78 mm.
    V2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HapticLevel {
    H0,
    /// σ_p = 0.08 Nm.
    H1,
    /// σ_p = 0.19 Nm.
    H2,
}

impl VisualLevel {
    pub const ALL: [VisualLevel; 3] = [VisualLevel::V0, VisualLevel::V1, VisualLevel::V2];

    /// Cloud angular deviation in mm.
    pub fn sigma_c(self) -> f64 {
        match self {
            VisualLevel::V0 => 0.0,
            VisualLevel::V1 => 21.32,
            VisualLevel::V2 => 52.78,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["sharp", "weak", "strong"][self.index()]
    }
}

impl HapticLevel {
    pub const ALL: [HapticLevel; 3] = [HapticLevel::H0, HapticLevel::H1, HapticLevel::H2];

    /// Perturbation amplitude in Nm.
    pub fn sigma_p(self) -> f64 {
        match self {
            HapticLevel::H0 => 0.0,
            HapticLevel::H1 => 0.08,
            HapticLevel::H2 => 0.19,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["sharp", "weak", "strong"][self.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NoiseCondition {
    pub visual: VisualLevel,
    pub haptic: HapticLevel,
}

impl NoiseCondition {
    pub const fn new(visual: VisualLevel, haptic: HapticLevel) -> Self {
        Self { visual, haptic }
    }

    /// All nine cells, visual-major.
    pub fn all() -> [NoiseCondition; 9] {
        let mut out = [NoiseCondition::new(VisualLevel::V0, HapticLevel::H0); 9];
        for (i, v) in VisualLevel::ALL.into_iter().enumerate() {
            for (j, h) in HapticLevel::ALL.into_iter().enumerate() {
                out[3 * i + j] = NoiseCondition::new(v, h);
            }
        }
        out
    }

    pub fn sigma_c(self) -> f64 {
        self.visual.sigma_c()
    }

    pub fn sigma_p(self) -> f64 {
        self.haptic.sigma_p()
    }
}

impl fmt::Display for VisualLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", self.index())
    }
}

impl fmt::Display for HapticLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H{}", self.index())
    }
}

impl fmt::Display for NoiseCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.visual, self.haptic)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown noise level {0:?}")]
pub struct ParseLevelError(pub String);

impl FromStr for VisualLevel {
    type Err = ParseLevelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v0" | "sharp" | "0" => Ok(VisualLevel::V0),
            "v1" | "weak" | "1" => Ok(VisualLevel::V1),
            "v2" | "strong" | "2" => Ok(VisualLevel::V2),
            _ => Err(ParseLevelError(s.to_string())),
        }
    }
}

impl FromStr for HapticLevel {
    type Err = ParseLevelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "h0" | "sharp" | "0" => Ok(HapticLevel::H0),
            "h1" | "weak" | "1" => Ok(HapticLevel::H1),
            "h2" | "strong" | "2" => Ok(HapticLevel::H2),
            _ => Err(ParseLevelError(s.to_string())),
        }
    }
}

impl FromStr for NoiseCondition {
    type Err = ParseLevelError;
    /// Parses `V1H2`-style labels.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let upper = t.to_ascii_uppercase();
        let h = upper.find('H').ok_or_else(|| ParseLevelError(s.to_string()))?;
        let (v, hh) = upper.split_at(h);
        let visual = v.parse().map_err(|_| ParseLevelError(s.to_string()))?;
        let haptic = hh.parse().map_err(|_| ParseLevelError(s.to_string()))?;
        Ok(NoiseCondition { visual, haptic })
    }
}

/// A 3×3 table indexed `[visual][haptic]`.
pub type Grid3 = [[f64; 3]; 3];
