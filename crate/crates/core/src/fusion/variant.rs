use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param_err, MbafError};

/// Which fusion layer sits between the encoders and the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FusionVariant {
    /// Plain concatenation baseline.
    #[serde(rename = "naive_fusion")]
    NaiveFusion,
    /// The memory layer with the concatenated input as composer query.
    #[serde(rename = "mbaf_naive_attention")]
    NaiveAttention,
    /// Composer query is the order-swapped concatenation `m2 ⊕ m1`.
    #[serde(rename = "mbaf_cross_attention")]
    CrossAttention,
    /// The memory layer over one modality alone (1 or 2).
    #[serde(rename = "mbaf_single_mode")]
    SingleMode(u8),
    /// Naive-attention layer followed by a learned projection to `d_out`.
    #[serde(rename = "mbaf_resampled")]
    Resampled(usize),
}

impl FusionVariant {
    pub fn validate(&self) -> crate::Result<()> {
        match *self {
            FusionVariant::SingleMode(m) if m != 1 && m != 2 => {
                Err(param_err(format!("single-mode index must be 1 or 2, got {m}")))
            }
            FusionVariant::Resampled(0) => Err(param_err("resampled output dimension must be >= 1")),
            _ => Ok(()),
        }
    }

    pub fn uses_memory(&self) -> bool {
        !matches!(self, FusionVariant::NaiveFusion)
    }

    /// Short label used in ablation tables.
    pub fn label(&self) -> String {
        match self {
            FusionVariant::NaiveFusion => "NF".into(),
            FusionVariant::NaiveAttention => "NA".into(),
            FusionVariant::CrossAttention => "CA".into(),
            FusionVariant::SingleMode(m) => format!("SM{m}"),
            FusionVariant::Resampled(d) => format!("RS{d}"),
        }
    }

    /// One representative of every variant, for exhaustive checks.
    pub fn all_kinds(d_out: usize) -> [FusionVariant; 5] {
        [
            FusionVariant::NaiveFusion,
            FusionVariant::NaiveAttention,
            FusionVariant::CrossAttention,
            FusionVariant::SingleMode(1),
            FusionVariant::Resampled(d_out),
        ]
    }
}

impl fmt::Display for FusionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionVariant::NaiveFusion => write!(f, "naive_fusion"),
            FusionVariant::NaiveAttention => write!(f, "mbaf_naive_attention"),
            FusionVariant::CrossAttention => write!(f, "mbaf_cross_attention"),
            FusionVariant::SingleMode(m) => write!(f, "mbaf_single_mode:{m}"),
            FusionVariant::Resampled(d) => write!(f, "mbaf_resampled:{d}"),
        }
    }
}

impl FromStr for FusionVariant {
    type Err = MbafError;

    /// Accepts the `Display` form plus the short labels `nf`, `na`, `ca`,
    /// `sm1`, `sm2` and `rs<d_out>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let (head, arg) = match lower.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (lower.as_str(), None),
        };
        let parse_arg = |a: Option<&str>| -> Result<usize, MbafError> {
            a.ok_or_else(|| param_err(format!("variant `{s}` needs an argument")))?
                .parse::<usize>()
                .map_err(|e| param_err(format!("variant `{s}`: {e}")))
        };
        let v = match head {
            "naive_fusion" | "nf" => FusionVariant::NaiveFusion,
            "mbaf_naive_attention" | "naive_attention" | "na" => FusionVariant::NaiveAttention,
            "mbaf_cross_attention" | "cross_attention" | "ca" => FusionVariant::CrossAttention,
            "mbaf_single_mode" | "single_mode" => FusionVariant::SingleMode(parse_arg(arg)? as u8),
            "sm1" => FusionVariant::SingleMode(1),
            "sm2" => FusionVariant::SingleMode(2),
            "mbaf_resampled" | "resampled" => FusionVariant::Resampled(parse_arg(arg)?),
            other if other.starts_with("rs") => FusionVariant::Resampled(parse_arg(Some(&other[2..]))?),
            _ => return Err(param_err(format!("unknown fusion variant `{s}`"))),
        };
        v.validate()?;
        Ok(v)
    }
}
