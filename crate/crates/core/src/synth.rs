//! Synthetic registry cohorts with controlled class imbalance.
//!
//! Features are sampled independently given the label. Continuous features
//! get a class-conditional mean shift of `shift` standard deviations between
//! the classes; categorical features get a class-conditional tilt of their
//! code frequencies. Survival months, cause of death, race and origin fields
//! are emitted so the generated rows pass through the same labeling and
//! cohort rules as real records, reproducing the ground truth exactly.

use std::collections::HashSet;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::CohortTag;
use crate::error::{Error, Result};
use crate::ingest::{is_representable, RawCell, RawDataset};
use crate::schema::{FieldKind, FieldSpec, Schema};
use crate::seed::rng_from_seed;

pub const SURVIVAL_FIELD: &str = "survival_months";
pub const CAUSE_FIELD: &str = "cause_of_death";
pub const RACE_FIELD: &str = "race";
pub const ORIGIN_FIELD: &str = "hispanic_origin";

/// Fields the generator appends after the predictors.
pub const BOOKKEEPING_FIELDS: [&str; 4] = [SURVIVAL_FIELD, CAUSE_FIELD, RACE_FIELD, ORIGIN_FIELD];

const CONTINUOUS_WIDTH: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureGenerator {
    Categorical {
        name: String,
        frequencies: Vec<f64>,
        /// Defaults to `1..=K`, zero padded.
        #[serde(default)]
        codes: Option<Vec<String>>,
        #[serde(default)]
        tilt: f64,
    },
    Continuous {
        name: String,
        mean: f64,
        sd: f64,
        #[serde(default)]
        missing_probability: f64,
        #[serde(default)]
        shift: f64,
        #[serde(default)]
        min: Option<f64>,
        #[serde(default)]
        decimals: u32,
    },
}

impl FeatureGenerator {
    pub fn name(&self) -> &str {
        match self {
            FeatureGenerator::Categorical { name, .. } | FeatureGenerator::Continuous { name, .. } => name,
        }
    }

    /// Categorical generator with Zipf-shaped code frequencies.
    pub fn zipf_categorical(name: impl Into<String>, n_categories: usize, tilt: f64) -> Self {
        let raw: Vec<f64> = (0..n_categories).map(|j| 1.0 / (j as f64 + 1.0)).collect();
        let total: f64 = raw.iter().sum();
        FeatureGenerator::Categorical {
            name: name.into(),
            frequencies: raw.iter().map(|f| f / total).collect(),
            codes: None,
            tilt,
        }
    }

    pub fn continuous(name: impl Into<String>, mean: f64, sd: f64, shift: f64) -> Self {
        FeatureGenerator::Continuous {
            name: name.into(),
            mean,
            sd,
            missing_probability: 0.0,
            shift,
            min: None,
            decimals: 0,
        }
    }

    fn scale_signal(&mut self, factor: f64) {
        match self {
            FeatureGenerator::Categorical { tilt, .. } => *tilt *= factor,
            FeatureGenerator::Continuous { shift, .. } => *shift *= factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_rows: usize,
    #[serde(default = "default_positive_fraction")]
    pub positive_fraction: f64,
    #[serde(default = "default_hispanic_fraction")]
    pub hispanic_fraction: f64,
    #[serde(default)]
    pub excluded_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    pub features: Vec<FeatureGenerator>,
}

fn default_positive_fraction() -> f64 {
    0.806
}

fn default_hispanic_fraction() -> f64 {
    // 37575 Hispanic of 313122 White + Hispanic patients
    0.12
}

impl SynthSpec {
    /// Sixteen categorical and four continuous predictors shaped like the
    /// colorectal registry extract: category counts, continuous means and
    /// standard deviations, and an 80.6% positive rate.
    pub fn registry_default(n_rows: usize, seed: u64) -> Self {
        let categorical = [
            ("marital_status", 7, 0.3),
            ("sex", 2, 0.1),
            ("primary_site", 13, 0.3),
            ("histology", 139, 0.4),
            ("behavior", 2, 0.0),
            ("grade", 5, 0.5),
            ("diagnostic_confirmation", 8, 0.4),
            ("extension", 65, 1.0),
            ("lymph_nodes", 18, 0.8),
            ("metastasis", 25, 1.4),
            ("tumor_size_evaluation", 7, 0.2),
            ("node_evaluation", 7, 0.2),
            ("metastasis_evaluation", 7, 0.2),
            ("surgery_site", 34, 1.0),
            ("reason_no_surgery", 8, 0.8),
            ("summary_stage", 5, 1.2),
        ];
        let mut features: Vec<FeatureGenerator> = categorical
            .iter()
            .map(|&(name, k, tilt)| FeatureGenerator::zipf_categorical(name, k, tilt))
            .collect();
        let continuous = [
            ("age", 68.3, 14.0, 0.0, -0.6, Some(18.0)),
            ("positive_nodes", 1.57, 4.26, 0.3, -0.4, Some(0.0)),
            ("number_of_tumors", 1.4, 0.717, 0.0, 0.1, Some(1.0)),
            ("tumor_size", 43.1, 37.3, 0.3, -0.4, Some(1.0)),
        ];
        features.extend(continuous.iter().map(|&(name, mean, sd, missing, shift, min)| {
            FeatureGenerator::Continuous {
                name: name.into(),
                mean,
                sd,
                missing_probability: missing,
                shift,
                min,
                decimals: 0,
            }
        }));
        SynthSpec {
            n_rows,
            positive_fraction: default_positive_fraction(),
            hispanic_fraction: default_hispanic_fraction(),
            excluded_fraction: 0.0,
            seed,
            features,
        }
    }

    /// Multiplies every shift and tilt; `0.0` removes all signal.
    pub fn with_signal_scale(mut self, factor: f64) -> Self {
        for feature in &mut self.features {
            feature.scale_signal(factor);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSynthSpec(msg));
        if self.n_rows == 0 {
            return bad("n_rows must be positive".into());
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return bad(format!("positive_fraction {} is not in (0, 1)", self.positive_fraction));
        }
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(self.hispanic_fraction)
            || !in_unit(self.excluded_fraction)
            || self.hispanic_fraction + self.excluded_fraction > 1.0
        {
            return bad("cohort fractions must lie in [0, 1] and sum to at most 1".into());
        }
        let mut names: HashSet<&str> = BOOKKEEPING_FIELDS.into_iter().collect();
        for feature in &self.features {
            if !names.insert(feature.name()) {
                return bad(format!("feature name `{}` is duplicated or reserved", feature.name()));
            }
            match feature {
                FeatureGenerator::Categorical {
                    name,
                    frequencies,
                    codes,
                    tilt,
                } => {
                    if frequencies.is_empty() {
                        return bad(format!("categorical `{name}` has zero categories"));
                    }
                    if frequencies.iter().any(|f| !f.is_finite() || *f < 0.0) {
                        return bad(format!("categorical `{name}` has a negative frequency"));
                    }
                    let total: f64 = frequencies.iter().sum();
                    if (total - 1.0).abs() > 1e-9 {
                        return bad(format!("frequencies of `{name}` sum to {total}, not 1"));
                    }
                    if let Some(codes) = codes {
                        let unique: HashSet<&String> = codes.iter().collect();
                        if codes.len() != frequencies.len() || unique.len() != codes.len() {
                            return bad(format!("`{name}` needs one distinct code per frequency"));
                        }
                        if codes.iter().any(|c| !is_representable(c) || c.trim() != c) {
                            return bad(format!("`{name}` has a code that cannot be stored"));
                        }
                    }
                    if !tilt.is_finite() {
                        return bad(format!("tilt of `{name}` is not finite"));
                    }
                }
                FeatureGenerator::Continuous {
                    name,
                    mean,
                    sd,
                    missing_probability,
                    shift,
                    min,
                    ..
                } => {
                    if !mean.is_finite() || !shift.is_finite() || !sd.is_finite() || *sd < 0.0 {
                        return bad(format!("continuous `{name}` needs finite mean/shift and sd >= 0"));
                    }
                    if !(0.0..1.0).contains(missing_probability) {
                        return bad(format!("missing_probability of `{name}` must be in [0, 1)"));
                    }
                    if min.is_some_and(|m| !m.is_finite()) {
                        return bad(format!("min of `{name}` is not finite"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Output of [`generate_synthetic`]: the raw records plus the generator's
/// own bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub raw: RawDataset,
    pub labels: Vec<bool>,
    pub cohorts: Vec<CohortTag>,
}

fn default_codes(k: usize) -> Vec<String> {
    let width = k.to_string().len();
    (1..=k).map(|c| format!("{c:0width$}")).collect()
}

enum Sampler {
    Categorical {
        codes: Vec<String>,
        positive: WeightedIndex<f64>,
        negative: WeightedIndex<f64>,
    },
    Continuous {
        mean: f64,
        sd: f64,
        missing: f64,
        shift: f64,
        min: Option<f64>,
        decimals: u32,
    },
}

impl Sampler {
    fn new(feature: &FeatureGenerator) -> Result<Self> {
        Ok(match feature {
            FeatureGenerator::Categorical {
                frequencies,
                codes,
                tilt,
                ..
            } => {
                let k = frequencies.len();
                // category score runs linearly from -1 to +1
                let score = |j: usize| if k == 1 { 0.0 } else { 2.0 * j as f64 / (k - 1) as f64 - 1.0 };
                let tilted = |sign: f64| -> Result<WeightedIndex<f64>> {
                    let weights: Vec<f64> = frequencies
                        .iter()
                        .enumerate()
                        .map(|(j, f)| f * (sign * tilt * score(j) / 2.0).exp())
                        .collect();
                    WeightedIndex::new(weights)
                        .map_err(|e| Error::InvalidSynthSpec(format!("`{}`: {e}", feature.name())))
                };
                Sampler::Categorical {
                    codes: codes.clone().unwrap_or_else(|| default_codes(k)),
                    positive: tilted(1.0)?,
                    negative: tilted(-1.0)?,
                }
            }
            FeatureGenerator::Continuous {
                mean,
                sd,
                missing_probability,
                shift,
                min,
                decimals,
                ..
            } => Sampler::Continuous {
                mean: *mean,
                sd: *sd,
                missing: *missing_probability,
                shift: *shift,
                min: *min,
                decimals: *decimals,
            },
        })
    }

    fn draw(&self, positive: bool, rng: &mut ChaCha8Rng) -> RawCell {
        match self {
            Sampler::Categorical {
                codes,
                positive: pos,
                negative: neg,
            } => {
                let dist = if positive { pos } else { neg };
                Some(codes[dist.sample(rng)].clone())
            }
            Sampler::Continuous {
                mean,
                sd,
                missing,
                shift,
                min,
                decimals,
            } => {
                // draw both values so the stream position does not depend on missingness
                let is_missing = rng.random::<f64>() < *missing;
                let z: f64 = rng.sample(StandardNormal);
                if is_missing {
                    return None;
                }
                let half = if positive { 0.5 } else { -0.5 };
                let mut value = mean + sd * (z + shift * half);
                if let Some(lo) = min {
                    value = value.max(*lo);
                }
                Some(format_number(value, *decimals))
            }
        }
    }
}

fn format_number(value: f64, decimals: u32) -> String {
    let text = format!("{:.*}", decimals as usize, value);
    // "-0" and "-0.00" would not survive a numeric round trip as written
    if text.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        text.trim_start_matches('-').to_string()
    } else {
        text
    }
}

/// Schema of the records produced for `spec`: predictors in declaration
/// order followed by the bookkeeping fields, packed back to back.
pub fn synthetic_schema(spec: &SynthSpec) -> Result<Schema> {
    let mut fields: Vec<FieldSpec> = spec
        .features
        .iter()
        .map(|feature| match feature {
            FeatureGenerator::Categorical {
                name,
                frequencies,
                codes,
                ..
            } => {
                let codes = codes.clone().unwrap_or_else(|| default_codes(frequencies.len()));
                let width = codes.iter().map(String::len).max().unwrap_or(1);
                FieldSpec::new(name.as_str(), FieldKind::Categorical, 0, width).with_categories(codes)
            }
            FeatureGenerator::Continuous { name, .. } => {
                FieldSpec::new(name.as_str(), FieldKind::Continuous, 0, CONTINUOUS_WIDTH)
            }
        })
        .collect();
    fields.push(FieldSpec::new(SURVIVAL_FIELD, FieldKind::Continuous, 0, 4));
    fields.push(FieldSpec::new(CAUSE_FIELD, FieldKind::Categorical, 0, 5));
    fields.push(FieldSpec::new(RACE_FIELD, FieldKind::Categorical, 0, 1));
    fields.push(FieldSpec::new(ORIGIN_FIELD, FieldKind::Categorical, 0, 1));
    let mut offset = 0;
    for field in &mut fields {
        field.offset = offset;
        offset += field.length;
    }
    Schema::new(offset, fields)
}

fn shuffled_tags<T: Clone>(n: usize, counts: &[(T, usize)], fill: T, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut tags = Vec::with_capacity(n);
    for (tag, count) in counts {
        tags.extend(std::iter::repeat_n(tag.clone(), *count));
    }
    tags.resize(n, fill);
    tags.shuffle(rng);
    tags
}

/// Generates a labeled synthetic cohort. Output is a pure function of `spec`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticCohort> {
    spec.validate()?;
    let schema = Arc::new(synthetic_schema(spec)?);
    let samplers = spec
        .features
        .iter()
        .map(Sampler::new)
        .collect::<Result<Vec<_>>>()?;
    let mut rng = rng_from_seed(spec.seed);
    let n = spec.n_rows;

    let n_pos = (n as f64 * spec.positive_fraction).round() as usize;
    let labels = shuffled_tags(n, &[(true, n_pos)], false, &mut rng);
    let n_hisp = (n as f64 * spec.hispanic_fraction).round() as usize;
    let n_excl = ((n as f64 * spec.excluded_fraction).round() as usize).min(n - n_hisp);
    let cohorts = shuffled_tags(
        n,
        &[(CohortTag::Hispanic, n_hisp), (CohortTag::Excluded, n_excl)],
        CohortTag::White,
        &mut rng,
    );

    let mut rows = Vec::with_capacity(n);
    for (&positive, &cohort) in labels.iter().zip(&cohorts) {
        let mut row: Vec<RawCell> = samplers.iter().map(|s| s.draw(positive, &mut rng)).collect();
        let (months, cause) = survival_outcome(positive, &mut rng);
        row.push(Some(months.to_string()));
        row.push(Some(cause.to_string()));
        let (race, origin) = match cohort {
            CohortTag::White => ("1", "0"),
            CohortTag::Hispanic => ("1", ["1", "2", "3", "5"][rng.random_range(0..4)]),
            CohortTag::Excluded => ("2", "0"),
        };
        row.push(Some(race.to_string()));
        row.push(Some(origin.to_string()));
        rows.push(row);
    }

    Ok(SyntheticCohort {
        raw: RawDataset::new(schema, rows)?,
        labels,
        cohorts,
    })
}

/// Survival months and cause-of-death code consistent with the label under
/// the default 24-month rule.
fn survival_outcome(positive: bool, rng: &mut ChaCha8Rng) -> (u32, &'static str) {
    if !positive {
        let cause = if rng.random::<f64>() < 0.7 { "21040" } else { "21050" };
        return (rng.random_range(0..24), cause);
    }
    if rng.random::<f64>() < 0.12 {
        // early death from another cause still counts as positive
        return (rng.random_range(0..24), "50000");
    }
    let cause = if rng.random::<f64>() < 0.8 { "00000" } else { "21040" };
    (rng.random_range(24..144), cause)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{decode, LabelRule};
    use crate::ingest::write_delimited;

    #[test]
    fn positive_fraction_within_two_points() {
        let cohort = generate_synthetic(&SynthSpec::registry_default(10_000, 5)).unwrap();
        let frac = cohort.labels.iter().filter(|&&l| l).count() as f64 / 10_000.0;
        assert!((0.786..=0.826).contains(&frac), "{frac}");
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SynthSpec::registry_default(500, 9);
        let a = write_delimited(&generate_synthetic(&spec).unwrap().raw).unwrap();
        let b = write_delimited(&generate_synthetic(&spec).unwrap().raw).unwrap();
        assert_eq!(a, b);
        let c = write_delimited(&generate_synthetic(&SynthSpec { seed: 10, ..spec }).unwrap().raw).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn label_rule_recovers_ground_truth() {
        let cohort = generate_synthetic(&SynthSpec::registry_default(2_000, 1)).unwrap();
        let labeled = decode(&cohort.raw).unwrap().derive_labels(&LabelRule::default()).unwrap();
        assert_eq!(labeled.labels().unwrap(), cohort.labels.as_slice());
    }

    #[test]
    fn zero_categories_is_degenerate() {
        let mut spec = SynthSpec::registry_default(10, 1);
        spec.features.push(FeatureGenerator::Categorical {
            name: "empty".into(),
            frequencies: vec![],
            codes: None,
            tilt: 0.0,
        });
        assert!(matches!(generate_synthetic(&spec), Err(Error::InvalidSynthSpec(_))));
    }

    #[test]
    fn frequencies_must_sum_to_one() {
        let spec = SynthSpec {
            n_rows: 10,
            positive_fraction: 0.5,
            hispanic_fraction: 0.0,
            excluded_fraction: 0.0,
            seed: 0,
            features: vec![FeatureGenerator::Categorical {
                name: "g".into(),
                frequencies: vec![0.5, 0.4],
                codes: None,
                tilt: 0.0,
            }],
        };
        assert!(spec.validate().is_err());
        assert!(SynthSpec { positive_fraction: 1.0, ..spec }.validate().is_err());
    }

    #[test]
    fn spec_file_round_trip() {
        let spec = SynthSpec::registry_default(100, 3);
        let text = toml::to_string(&spec).unwrap();
        assert_eq!(toml::from_str::<SynthSpec>(&text).unwrap(), spec);
    }

    #[test]
    fn format_avoids_negative_zero() {
        assert_eq!(format_number(-0.2, 0), "0");
        assert_eq!(format_number(2.5, 1), "2.5");
        assert_eq!(format_number(-3.4, 0), "-3");
    }
}
