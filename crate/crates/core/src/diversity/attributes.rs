use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    M,
    F,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgeBucket {
    #[serde(rename = "18-30")]
    Age18To30,
    #[serde(rename = "31-50")]
    Age31To50,
    #[serde(rename = "50+")]
    Age50Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Ethnicity {
    Asian,
    Black,
    Indian,
    Latino,
    MiddleEastern,
    White,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::M, Gender::F];
    pub fn label(self) -> &'static str {
        match self {
            Gender::M => "M",
            Gender::F => "F",
        }
    }
}

impl AgeBucket {
    pub const ALL: [AgeBucket; 3] = [AgeBucket::Age18To30, AgeBucket::Age31To50, AgeBucket::Age50Plus];
    pub fn label(self) -> &'static str {
        match self {
            AgeBucket::Age18To30 => "18-30",
            AgeBucket::Age31To50 => "31-50",
            AgeBucket::Age50Plus => "50+",
        }
    }
}

impl Ethnicity {
    pub const ALL: [Ethnicity; 6] = [
        Ethnicity::Asian,
        Ethnicity::Black,
        Ethnicity::Indian,
        Ethnicity::Latino,
        Ethnicity::MiddleEastern,
        Ethnicity::White,
    ];
    pub fn label(self) -> &'static str {
        match self {
            Ethnicity::Asian => "Asian",
            Ethnicity::Black => "Black",
            Ethnicity::Indian => "Indian",
            Ethnicity::Latino => "Latino",
            Ethnicity::MiddleEastern => "MiddleEastern",
            Ethnicity::White => "White",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeRecord {
    pub perceived_gender: Gender,
    pub age_bucket: AgeBucket,
    pub ethnicity: Ethnicity,
}

pub const GENDER: &str = "perceived_gender";
pub const AGE: &str = "age_bucket";
pub const ETHNICITY: &str = "ethnicity";

/// Per attribute, the share of each category, in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeDistribution {
    attributes: BTreeMap<String, Vec<(String, f64)>>,
}

impl AttributeDistribution {
    /// Validates that every attribute's proportions are nonnegative and sum to 1 within 1e-9.
    pub fn from_proportions(attributes: BTreeMap<String, Vec<(String, f64)>>) -> Result<Self> {
        for (name, cats) in &attributes {
            let sum: f64 = cats.iter().map(|c| c.1).sum();
            if cats.iter().any(|c| !(c.1 >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("proportions of {name} must be >= 0 and sum to 1, got {sum}")));
            }
        }
        Ok(Self { attributes })
    }

    pub fn attributes(&self) -> impl Iterator<Item = (&str, &[(String, f64)])> {
        self.attributes.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn get(&self, attribute: &str) -> Option<&[(String, f64)]> {
        self.attributes.get(attribute).map(Vec::as_slice)
    }

    pub fn proportion(&self, attribute: &str, category: &str) -> Option<f64> {
        self.get(attribute)?.iter().find(|c| c.0 == category).map(|c| c.1)
    }
}

/// `count(category) / N` for every category of every attribute.
pub fn summarize_distribution(records: &[AttributeRecord]) -> Result<AttributeDistribution> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = records.len() as f64;
    let share = |count: usize| count as f64 / n;
    let mut attributes = BTreeMap::new();
    attributes.insert(
        GENDER.to_string(),
        Gender::ALL
            .iter()
            .map(|&g| (g.label().to_string(), share(records.iter().filter(|r| r.perceived_gender == g).count())))
            .collect(),
    );
    attributes.insert(
        AGE.to_string(),
        AgeBucket::ALL
            .iter()
            .map(|&a| (a.label().to_string(), share(records.iter().filter(|r| r.age_bucket == a).count())))
            .collect(),
    );
    attributes.insert(
        ETHNICITY.to_string(),
        Ethnicity::ALL
            .iter()
            .map(|&e| (e.label().to_string(), share(records.iter().filter(|r| r.ethnicity == e).count())))
            .collect(),
    );
    AttributeDistribution::from_proportions(attributes)
}

/// Total-variation distance `0.5 * sum |a_i - b_i|` per attribute.
pub fn compare_distributions(a: &AttributeDistribution, b: &AttributeDistribution) -> Result<BTreeMap<String, f64>> {
    if a.attributes.len() != b.attributes.len() {
        let name = a.attributes.keys().chain(b.attributes.keys()).find(|k| !(a.attributes.contains_key(*k) && b.attributes.contains_key(*k)));
        return Err(Error::CategoryMismatch(name.cloned().unwrap_or_default()));
    }
    let mut out = BTreeMap::new();
    for (name, ca) in &a.attributes {
        let cb = b.attributes.get(name).ok_or_else(|| Error::CategoryMismatch(name.clone()))?;
        let mut keys_a: Vec<&str> = ca.iter().map(|c| c.0.as_str()).collect();
        let mut keys_b: Vec<&str> = cb.iter().map(|c| c.0.as_str()).collect();
        keys_a.sort_unstable();
        keys_b.sort_unstable();
        if keys_a != keys_b {
            return Err(Error::CategoryMismatch(name.clone()));
        }
        let tv: f64 = ca
            .iter()
            .map(|(k, pa)| {
                let pb = cb.iter().find(|c| &c.0 == k).map(|c| c.1).unwrap_or(0.0);
                (pa - pb).abs()
            })
            .sum::<f64>()
            * 0.5;
        out.insert(name.clone(), tv.clamp(0.0, 1.0));
    }
    Ok(out)
}

/// Records whose marginal counts are the given per-category counts.
///
/// The three count lists must share one total; attributes are paired index by
/// index after expanding each list in category order.
pub fn records_from_counts(gender: &[usize; 2], age: &[usize; 3], ethnicity: &[usize; 6]) -> Result<Vec<AttributeRecord>> {
    let expand = |counts: &[usize]| -> Vec<usize> {
        counts.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i, c)).collect()
    };
    let (g, a, e) = (expand(gender), expand(age), expand(ethnicity));
    if g.len() != a.len() || g.len() != e.len() {
        return Err(Error::Config(format!("count totals differ: {} / {} / {}", g.len(), a.len(), e.len())));
    }
    Ok((0..g.len())
        .map(|i| AttributeRecord {
            perceived_gender: Gender::ALL[g[i]],
            age_bucket: AgeBucket::ALL[a[i]],
            ethnicity: Ethnicity::ALL[e[i]],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(g: usize, a: usize, e: usize) -> AttributeRecord {
        AttributeRecord { perceived_gender: Gender::ALL[g], age_bucket: AgeBucket::ALL[a], ethnicity: Ethnicity::ALL[e] }
    }

    #[test]
    fn gender_shares() {
        let recs = records_from_counts(&[73, 27], &[100, 0, 0], &[0, 0, 0, 0, 0, 100]).unwrap();
        let d = summarize_distribution(&recs).unwrap();
        assert_eq!(d.proportion(GENDER, "M"), Some(0.73));
        assert_eq!(d.proportion(GENDER, "F"), Some(0.27));
        assert_eq!(d.proportion(AGE, "18-30"), Some(1.0));
        assert_eq!(d.proportion(AGE, "50+"), Some(0.0));
        assert!(matches!(summarize_distribution(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn tv_cases() {
        let two = |m: f64| {
            let mut t = BTreeMap::new();
            t.insert(GENDER.to_string(), vec![("M".to_string(), m), ("F".to_string(), 1.0 - m)]);
            AttributeDistribution::from_proportions(t).unwrap()
        };
        assert_eq!(compare_distributions(&two(1.0), &two(0.0)).unwrap()[GENDER], 1.0);
        assert_eq!(compare_distributions(&two(0.3), &two(0.3)).unwrap()[GENDER], 0.0);
        assert!((compare_distributions(&two(0.73), &two(0.60)).unwrap()[GENDER] - 0.13).abs() < 1e-12);
        let mut t = BTreeMap::new();
        t.insert(GENDER.to_string(), vec![("X".to_string(), 1.0)]);
        let odd = AttributeDistribution::from_proportions(t).unwrap();
        assert!(matches!(compare_distributions(&two(0.5), &odd), Err(Error::CategoryMismatch(_))));
    }

    proptest! {
        #[test]
        fn proportions_sum_to_one_and_tv_is_a_metric(
            a in prop::collection::vec((0usize..2, 0usize..3, 0usize..6), 1..80),
            b in prop::collection::vec((0usize..2, 0usize..3, 0usize..6), 1..80),
        ) {
            let ra: Vec<_> = a.iter().map(|&(g, x, e)| rec(g, x, e)).collect();
            let rb: Vec<_> = b.iter().map(|&(g, x, e)| rec(g, x, e)).collect();
            let (da, db) = (summarize_distribution(&ra).unwrap(), summarize_distribution(&rb).unwrap());
            for (_, cats) in da.attributes() {
                prop_assert!((cats.iter().map(|c| c.1).sum::<f64>() - 1.0).abs() <= 1e-9);
            }
            let ab = compare_distributions(&da, &db).unwrap();
            let ba = compare_distributions(&db, &da).unwrap();
            for (k, v) in &ab {
                prop_assert_eq!(*v, ba[k]);
                prop_assert!((0.0..=1.0).contains(v));
                let equal = da.get(k) == db.get(k);
                prop_assert_eq!(*v == 0.0, equal);
            }
        }
    }
}
