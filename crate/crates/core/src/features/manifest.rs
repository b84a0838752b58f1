use std::ops::Range;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::stats::DescStats;

pub const N_FEATURES: usize = 120;
pub const VERGENCE: Range<usize> = 0..17;
pub const FIXATION: Range<usize> = 17..30;
pub const SACCADE: Range<usize> = 30..116;
pub const BLINK: Range<usize> = 116..120;

const VERGENCE_NAMES: [&str; 17] = [
    "pair_disparity_mean",
    "pair_disparity_sd",
    "focus_dist_mean",
    "focus_dist_sd",
    "fix_centroid_dist_mean",
    "fix_centroid_dist_sd",
    "circle_center_dist_mean",
    "circle_center_dist_sd",
    "norm_center_dist_mean",
    "norm_center_dist_sd",
    "pair_angle_mean",
    "pair_angle_sd",
    "fix_centroid_angle_mean",
    "circle_center_angle_mean",
    "eye_screen_dist_mean",
    "pd_mean",
    "pd_sd",
];

/// Names of all 120 features in their canonical order.
pub fn feature_manifest() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut v: Vec<String> = VERGENCE_NAMES.iter().map(|s| s.to_string()).collect();

        v.push("left_circle_radius_mean".into());
        v.push("right_circle_radius_mean".into());
        v.extend(DescStats::NAMES.iter().map(|s| format!("fix_dur_{s}")));
        v.extend(["fix_total_dur", "fix_count", "fix_sacc_dur_ratio"].map(String::from));

        for eye in ["left", "right"] {
            for q in ["dur", "len", "vel"] {
                v.extend(DescStats::NAMES.iter().map(|s| format!("sacc_{eye}_{q}_{s}")));
            }
        }
        for eye in ["left", "right"] {
            v.push(format!("sacc_{eye}_total_dur"));
            v.push(format!("sacc_{eye}_count"));
        }
        for eye in ["left", "right"] {
            for q in ["angle", "angle_prev"] {
                v.extend(DescStats::NAMES.iter().map(|s| format!("sacc_{eye}_{q}_{s}")));
            }
        }
        for eye in ["left", "right"] {
            v.push(format!("sacc_{eye}_horizontal_prop"));
        }

        v.extend(["blink_dur_mean", "blink_dur_sd", "blink_total_dur", "blink_count"].map(String::from));
        debug_assert_eq!(v.len(), N_FEATURES);
        v
    })
}

/// Feature groups compared in evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSubset {
    /// All 120 features.
    Full,
    /// The 17 vergence and distance features.
    Vergence,
    /// Fixation, saccade and blink features.
    Classic,
}

impl FeatureSubset {
    pub const ALL: [FeatureSubset; 3] = [FeatureSubset::Full, FeatureSubset::Vergence, FeatureSubset::Classic];

    pub fn indices(self) -> Range<usize> {
        match self {
            FeatureSubset::Full => 0..N_FEATURES,
            FeatureSubset::Vergence => VERGENCE,
            FeatureSubset::Classic => FIXATION.start..BLINK.end,
        }
    }

    pub fn names(self) -> &'static [String] {
        &feature_manifest()[self.indices()]
    }

    pub fn select(self, values: &[f64]) -> Vec<f64> {
        values[self.indices()].to_vec()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSubset::Full => "full",
            FeatureSubset::Vergence => "vergence",
            FeatureSubset::Classic => "classic",
        }
    }
}

impl FromStr for FeatureSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "full" => Ok(FeatureSubset::Full),
            "vergence" | "vergence_only" => Ok(FeatureSubset::Vergence),
            "classic" | "classic_only" => Ok(FeatureSubset::Classic),
            other => Err(Error::InvalidArgument(format!("unknown feature subset {other:?}"))),
        }
    }
}

impl std::fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn manifest_layout() {
        let m = feature_manifest();
        assert_eq!(m.len(), 120);
        assert_eq!(VERGENCE.len(), 17);
        assert_eq!(FIXATION.len(), 13);
        assert_eq!(SACCADE.len(), 86);
        assert_eq!(BLINK.len(), 4);
        assert_eq!(m.iter().collect::<HashSet<_>>().len(), 120);
        assert_eq!(m[FIXATION.start], "left_circle_radius_mean");
        assert_eq!(m[SACCADE.start], "sacc_left_dur_mean");
        assert_eq!(m[BLINK.start], "blink_dur_mean");
        assert_eq!(FeatureSubset::Classic.names().len(), 103);
    }
}
