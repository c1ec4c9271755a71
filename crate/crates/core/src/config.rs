//! Run configuration: every constant of the algorithm, with the derived
//! defaults and the desk-scale overrides.

use std::fmt;
use std::str::FromStr;

use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::classify::{default_bad_fraction, default_delta};
use crate::error::{Error, Result};
use crate::estimate::{BisectMode, EstimateParams};
use crate::lp::{LpMode, DEFAULT_SIMPLEX_CAP};
use crate::rational::{dyadic_floor, parse_rational, show, to_f64};
use crate::tree::{Depth, TreeParams};

/// High-degree threshold Δ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum DeltaSetting {
    /// `max(2, ceil(2^(k/300)))`.
    Paper,
    Fixed(usize),
}

/// Truncation depth L.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum DepthSetting {
    Infinite,
    /// `C0 * 3k^2 Δ * ceil(ln(n/ε))`.
    Paper,
    Fixed(usize),
}

/// Damping parameter s.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SSetting {
    /// `min(2^(k/4) / (e k Δ), 1)`.
    PaperCapped,
    /// `2^(k/4) / (e k Δ)` without the cap.
    Paper,
    Value(BigRational),
}

macro_rules! string_serde {
    ($t:ty) => {
        impl From<$t> for String {
            fn from(x: $t) -> String {
                x.to_string()
            }
        }

        impl TryFrom<String> for $t {
            type Error = Error;

            fn try_from(s: String) -> Result<Self> {
                s.parse()
            }
        }
    };
}

impl fmt::Display for DeltaSetting {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            DeltaSetting::Paper => f.write_str("paper"),
            DeltaSetting::Fixed(d) => write!(f, "{d}"),
        }
    }
}

impl FromStr for DeltaSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(DeltaSetting::Paper),
            _ => match s.parse::<usize>() {
                Ok(d) if d >= 1 => Ok(DeltaSetting::Fixed(d)),
                _ => Err(Error::InvalidConfig(format!(
                    "Δ must be \"paper\" or a positive integer, got {s:?}"
                ))),
            },
        }
    }
}

impl fmt::Display for DepthSetting {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            DepthSetting::Infinite => f.write_str("infinite"),
            DepthSetting::Paper => f.write_str("paper"),
            DepthSetting::Fixed(l) => write!(f, "{l}"),
        }
    }
}

impl FromStr for DepthSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "infinite" | "inf" => Ok(DepthSetting::Infinite),
            "paper" => Ok(DepthSetting::Paper),
            _ => s.parse().map(DepthSetting::Fixed).map_err(|_| {
                Error::InvalidConfig(format!("L must be \"infinite\", \"paper\" or an integer, got {s:?}"))
            }),
        }
    }
}

impl fmt::Display for SSetting {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            SSetting::PaperCapped => f.write_str("paper-capped"),
            SSetting::Paper => f.write_str("paper"),
            SSetting::Value(x) => f.write_str(&show(x)),
        }
    }
}

impl FromStr for SSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-capped" => Ok(SSetting::PaperCapped),
            "paper" => Ok(SSetting::Paper),
            _ => match parse_rational(s) {
                Some(x) if x.is_positive() => Ok(SSetting::Value(x)),
                _ => Err(Error::InvalidConfig(format!(
                    "s must be \"paper-capped\", \"paper\" or a positive rational, got {s:?}"
                ))),
            },
        }
    }
}

string_serde!(DeltaSetting);
string_serde!(DepthSetting);
string_serde!(SSetting);

mod fraction {
    use num_rational::Ratio;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(f: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", f.numer(), f.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio<u64>, D::Error> {
        let text = String::deserialize(d)?;
        let (a, b) = text.split_once('/').unwrap_or((&text, "1"));
        match (a.trim().parse::<u64>(), b.trim().parse::<u64>()) {
            (Ok(a), Ok(b)) if b > 0 => Ok(Ratio::new(a, b)),
            _ => Err(serde::de::Error::custom(format!("not a fraction: {text:?}"))),
        }
    }
}

/// Algorithm parameters. Thread count is deliberately absent: it never
/// changes results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    #[serde(with = "crate::rational::serde_str")]
    pub eps: BigRational,
    pub delta: DeltaSetting,
    #[serde(with = "fraction")]
    pub bad_fraction: Ratio<u64>,
    pub depth: DepthSetting,
    pub c0: usize,
    pub s: SSetting,
    pub bisect: BisectMode,
    pub lp: LpMode,
    /// Largest coupling tree built.
    pub node_cap: usize,
    /// Largest component counted by enumeration.
    pub component_cap: usize,
    /// Largest `|V_I \ V_set|` enumerated at a leaf.
    pub enumeration_cap: usize,
    /// Largest dense simplex tableau, in cells.
    pub simplex_cap: usize,
    /// Resampling steps for the marking search.
    pub marking_steps: usize,
    /// Components up to this many variables are solved exhaustively when
    /// searching for Λ*; larger ones by resampling.
    pub local_cap: usize,
    /// Resampling steps for Λ*.
    pub local_steps: usize,
    /// Fresh (marking, Λ*) attempts before giving up.
    pub retries: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            eps: crate::rational::ratio(1, 5),
            delta: DeltaSetting::Paper,
            bad_fraction: default_bad_fraction(),
            depth: DepthSetting::Infinite,
            c0: 1,
            s: SSetting::PaperCapped,
            bisect: BisectMode::Geometric,
            lp: LpMode::Exact,
            node_cap: 200_000,
            component_cap: crate::counter::DEFAULT_COMPONENT_CAP,
            enumeration_cap: 25,
            simplex_cap: DEFAULT_SIMPLEX_CAP,
            marking_steps: 10_000,
            local_cap: 20,
            local_steps: 10_000,
            retries: 200,
        }
    }
}

/// Constants after derivation for a particular formula.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Resolved {
    pub delta: usize,
    pub depth: Depth,
    #[serde(with = "crate::rational::serde_str")]
    pub s: BigRational,
    /// Where a desk-scale floor or cap replaced a derived value.
    pub notes: Vec<String>,
}

/// `2^(k/4) / (e k Δ)` as a float.
pub fn paper_s(k: usize, delta: usize) -> f64 {
    2f64.powf(k as f64 / 4.0) / (std::f64::consts::E * k as f64 * delta as f64)
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if !self.eps.is_positive() {
            return Err(Error::InvalidConfig("eps must be positive".into()));
        }
        if *self.bad_fraction.numer() == 0 || self.bad_fraction > Ratio::from_integer(1) {
            return Err(Error::InvalidConfig("bad fraction must lie in (0, 1]".into()));
        }
        if self.component_cap > crate::enumerate::MAX_FREE || self.enumeration_cap > crate::enumerate::MAX_FREE {
            return Err(Error::InvalidConfig(format!(
                "enumeration caps cannot exceed {}",
                crate::enumerate::MAX_FREE
            )));
        }
        Ok(())
    }

    pub fn resolve(&self, k: usize, n: usize) -> Result<Resolved> {
        self.validate()?;
        let mut notes = Vec::new();
        let delta = match self.delta {
            DeltaSetting::Paper => default_delta(k),
            DeltaSetting::Fixed(d) => d,
        };
        let depth = match self.depth {
            DepthSetting::Infinite => Depth::Infinite,
            DepthSetting::Fixed(l) => Depth::Finite(l),
            DepthSetting::Paper => Depth::paper(self.c0, k, delta, n, to_f64(&self.eps)),
        };
        let s = match &self.s {
            SSetting::Value(x) => x.clone(),
            setting => {
                let raw = paper_s(k, delta);
                let mut s = dyadic_floor(raw, 30);
                if !s.is_positive() {
                    return Err(Error::InvalidConfig(format!("derived s = {raw:e} rounds to zero")));
                }
                notes.push(format!(
                    "s = 2^(k/4)/(e k Δ) = {raw:.6} rounded down to a multiple of 2^-30"
                ));
                if *setting == SSetting::PaperCapped && s > BigRational::one() {
                    s = BigRational::one();
                    notes.push("s capped at 1".into());
                }
                s
            }
        };
        Ok(Resolved { delta, depth, s, notes })
    }

    pub fn tree_params(&self, resolved: &Resolved) -> TreeParams {
        TreeParams {
            depth: resolved.depth,
            node_cap: self.node_cap,
            leaf_counts: true,
            enumeration_cap: self.enumeration_cap,
        }
    }

    pub fn estimate_params(&self, resolved: &Resolved) -> EstimateParams {
        EstimateParams {
            eps: self.eps.clone(),
            s: resolved.s.clone(),
            bisect: self.bisect,
            lp: self.lp,
            simplex_cap: self.simplex_cap,
            tree: self.tree_params(resolved),
        }
    }
}
