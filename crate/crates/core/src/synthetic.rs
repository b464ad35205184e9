//! Seeded generator of schema-conformant screening datasets.
//!
//! Answers are independent Bernoulli draws, the Q-chat score is their sum,
//! and the screening flag is `Yes` when the score reaches
//! `class_rule_threshold`. Demographics are drawn independently of the
//! answers.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::{AVector, Dataset, DatasetSchema, Record};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weighted {
    pub value: String,
    pub weight: f64,
}

fn vocab(items: &[(&str, f64)]) -> Vec<Weighted> {
    items
        .iter()
        .map(|&(value, weight)| Weighted {
            value: value.to_string(),
            weight,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    pub seed: u64,
    pub a_prevalence: [f64; 10],
    pub age_months_min: u32,
    pub age_months_max: u32,
    pub sex: Vec<Weighted>,
    pub ethnicity: Vec<Weighted>,
    pub who_completed: Vec<Weighted>,
    pub jaundice_rate: f64,
    pub family_asd_rate: f64,
    pub class_rule_threshold: u8,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n: 3043,
            seed: 0,
            a_prevalence: [0.5; 10],
            age_months_min: 12,
            age_months_max: 36,
            sex: vocab(&[("f", 0.3), ("m", 0.7)]),
            ethnicity: vocab(&[
                ("White European", 0.33),
                ("asian", 0.28),
                ("middle eastern", 0.17),
                ("south asian", 0.06),
                ("black", 0.05),
                ("Hispanic", 0.04),
                ("Latino", 0.03),
                ("mixed", 0.02),
                ("Others", 0.01),
                ("Pacifica", 0.01),
            ]),
            who_completed: vocab(&[
                ("family member", 0.9),
                ("Health Care Professional", 0.06),
                ("Self", 0.03),
                ("Others", 0.01),
            ]),
            jaundice_rate: 0.27,
            family_asd_rate: 0.16,
            class_rule_threshold: 4,
        }
    }
}

impl SynthSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        SynthSpec {
            n,
            seed,
            ..SynthSpec::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        let probs = self
            .a_prevalence
            .iter()
            .chain([&self.jaundice_rate, &self.family_asd_rate]);
        for p in probs {
            if !(0.0..=1.0).contains(p) {
                return bad(format!("probability {p} outside [0,1]"));
            }
        }
        if self.age_months_min == 0 || self.age_months_min > self.age_months_max {
            return bad(format!(
                "age range [{}, {}] is invalid",
                self.age_months_min, self.age_months_max
            ));
        }
        if self.class_rule_threshold > 10 {
            return bad("class_rule_threshold must be within [0,10]".into());
        }
        for (name, v) in [
            ("sex", &self.sex),
            ("ethnicity", &self.ethnicity),
            ("who_completed", &self.who_completed),
        ] {
            if v.is_empty() {
                return bad(format!("{name} vocabulary is empty"));
            }
            if let Some(w) = v.iter().find(|w| !(w.weight > 0.0 && w.weight.is_finite())) {
                return bad(format!("{name} weight for `{}` must be positive", w.value));
            }
            if let Some(w) = v.iter().find(|w| w.value.trim().is_empty()) {
                return bad(format!("{name} contains an empty value `{}`", w.value));
            }
        }
        Ok(())
    }
}

struct Picker<'a> {
    values: &'a [Weighted],
    dist: WeightedIndex<f64>,
}

impl<'a> Picker<'a> {
    fn new(values: &'a [Weighted]) -> Result<Self> {
        let dist = WeightedIndex::new(values.iter().map(|w| w.weight))
            .map_err(|e| Error::InvalidParam(e.to_string()))?;
        Ok(Picker { values, dist })
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> String {
        self.values[self.dist.sample(rng)].value.clone()
    }
}

pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sex = Picker::new(&spec.sex)?;
    let ethnicity = Picker::new(&spec.ethnicity)?;
    let who = Picker::new(&spec.who_completed)?;
    let yes_no = |b: bool| if b { "yes" } else { "no" }.to_string();

    let mut rows = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let mut a = [0u8; 10];
        for (slot, &p) in a.iter_mut().zip(&spec.a_prevalence) {
            *slot = u8::from(rng.gen_bool(p));
        }
        let a = AVector::new(a)?;
        let score = a.score();
        rows.push(Record {
            case_no: i as u32 + 1,
            a,
            qchat_score: score,
            age_months: rng.gen_range(spec.age_months_min..=spec.age_months_max),
            sex: sex.pick(&mut rng),
            ethnicity: ethnicity.pick(&mut rng),
            jaundice: yes_no(rng.gen_bool(spec.jaundice_rate)),
            family_asd: yes_no(rng.gen_bool(spec.family_asd_rate)),
            who_completed: who.pick(&mut rng),
            class_asd: if score >= spec.class_rule_threshold {
                "Yes"
            } else {
                "No"
            }
            .to_string(),
            preferred_education: None,
        });
    }
    Dataset::new(
        DatasetSchema::canonical(),
        rows,
        vec![format!("synthetic(n={}, seed={})", spec.n, spec.seed)],
    )
}
