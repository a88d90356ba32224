use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Parameters of a target/train split built from household-structured
/// auxiliary data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_target_households: usize,
    pub min_household_size: usize,
    pub train_size: usize,
    pub member_fraction_of_households: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            n_target_households: 100,
            min_household_size: 5,
            train_size: 10_000,
            member_fraction_of_households: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SnakeSplit {
    pub train: Dataset,
    /// All records of the selected households, with household ids and
    /// membership labels attached.
    pub target: Dataset,
    /// Per target row: was its household included in `train`.
    pub target_labels: Vec<bool>,
    /// Row indices into the auxiliary dataset.
    pub train_rows: Vec<usize>,
    pub target_rows: Vec<usize>,
    pub target_households: Vec<u64>,
    pub member_households: Vec<u64>,
}

impl SnakeSplit {
    /// Membership label of every auxiliary row.
    pub fn aux_labels(&self, n_aux: usize) -> Vec<bool> {
        let mut labels = vec![false; n_aux];
        for &r in &self.train_rows {
            labels[r] = true;
        }
        labels
    }
}

/// Selects target households, includes a fraction of them in full in the
/// training set and pads it with random non-target records.
pub fn make_snake_split(aux: &Dataset, spec: &SplitSpec) -> Result<SnakeSplit> {
    if !(0.0..=1.0).contains(&spec.member_fraction_of_households) {
        return Err(Error::Config(format!(
            "member fraction {} outside [0, 1]",
            spec.member_fraction_of_households
        )));
    }
    let groups = aux
        .household_groups()
        .ok_or_else(|| Error::Config("auxiliary data has no household ids".into()))?;
    let qualifying: Vec<u64> = groups
        .iter()
        .filter(|(_, rows)| rows.len() >= spec.min_household_size)
        .map(|(&id, _)| id)
        .collect();
    if qualifying.len() < spec.n_target_households {
        return Err(Error::Config(format!(
            "{} households of size >= {} available, {} requested",
            qualifying.len(),
            spec.min_household_size,
            spec.n_target_households
        )));
    }

    let mut rng = rng_from_seed(spec.seed);
    let target_households: Vec<u64> = sample(&mut rng, qualifying.len(), spec.n_target_households)
        .into_iter()
        .map(|i| qualifying[i])
        .collect();
    let n_members =
        (spec.member_fraction_of_households * spec.n_target_households as f64).floor() as usize;
    let mut member_households: Vec<u64> =
        sample(&mut rng, target_households.len(), n_members)
            .into_iter()
            .map(|i| target_households[i])
            .collect();
    member_households.sort_unstable();

    let mut in_target = vec![false; aux.n_rows()];
    let mut target_rows = Vec::new();
    let mut member_rows = Vec::new();
    for id in &target_households {
        let rows = &groups[id];
        let member = member_households.binary_search(id).is_ok();
        for &r in rows {
            in_target[r] = true;
            target_rows.push(r);
            if member {
                member_rows.push(r);
            }
        }
    }
    target_rows.sort_unstable();

    if member_rows.len() > spec.train_size {
        return Err(Error::Config(format!(
            "member households contribute {} records, more than train size {}",
            member_rows.len(),
            spec.train_size
        )));
    }
    let pool: Vec<usize> = (0..aux.n_rows()).filter(|&r| !in_target[r]).collect();
    let n_pad = spec.train_size - member_rows.len();
    if pool.len() < n_pad {
        return Err(Error::Config(format!(
            "{} non-target records available to pad the training set, {} needed",
            pool.len(),
            n_pad
        )));
    }
    let mut train_rows = member_rows;
    train_rows.extend(sample(&mut rng, pool.len(), n_pad).into_iter().map(|i| pool[i]));
    train_rows.sort_unstable();

    let ids = aux.households().expect("checked above");
    let target_labels: Vec<bool> = target_rows
        .iter()
        .map(|&r| member_households.binary_search(&ids[r]).is_ok())
        .collect();
    let target = aux
        .select_rows(&target_rows)
        .with_membership(target_labels.clone())?;
    let train = aux.select_rows(&train_rows);

    Ok(SnakeSplit {
        train,
        target,
        target_labels,
        train_rows,
        target_rows,
        target_households,
        member_households,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Domain;

    /// `n_house` households of sizes cycling through 1..=8.
    fn aux(n_house: u64) -> Dataset {
        let mut rows = Vec::new();
        let mut ids = Vec::new();
        for h in 0..n_house {
            for k in 0..(h % 8 + 1) {
                rows.push(vec![((h + k) % 3) as u32]);
                ids.push(h);
            }
        }
        Dataset::from_rows(Domain::from_cardinalities(&[3]).unwrap(), &rows)
            .unwrap()
            .with_households(ids)
            .unwrap()
    }

    fn spec(frac: f64, seed: u64) -> SplitSpec {
        SplitSpec {
            n_target_households: 10,
            min_household_size: 5,
            train_size: 200,
            member_fraction_of_households: frac,
            seed,
        }
    }

    #[test]
    fn split_contract() {
        let aux = aux(400);
        let s = make_snake_split(&aux, &spec(0.5, 3)).unwrap();
        assert_eq!(s.target_households.len(), 10);
        assert_eq!(s.member_households.len(), 5);
        assert_eq!(s.train.n_rows(), 200);
        let ids = aux.households().unwrap();
        for &r in &s.target_rows {
            let member = s.member_households.contains(&ids[r]);
            assert_eq!(s.train_rows.binary_search(&r).is_ok(), member);
            assert!(s.target_households.contains(&ids[r]));
        }
        for id in &s.target_households {
            assert!(aux.household_groups().unwrap()[id].len() >= 5);
        }
    }

    #[test]
    fn zero_fraction_has_no_members() {
        let aux = aux(400);
        let s = make_snake_split(&aux, &spec(0.0, 1)).unwrap();
        assert!(s.target_labels.iter().all(|&l| !l));
        for r in &s.train_rows {
            assert!(s.target_rows.binary_search(r).is_err());
        }
    }

    #[test]
    fn same_seed_same_split() {
        let aux = aux(400);
        let a = make_snake_split(&aux, &spec(0.5, 9)).unwrap();
        let b = make_snake_split(&aux, &spec(0.5, 9)).unwrap();
        assert_eq!(a.train_rows, b.train_rows);
        assert_eq!(a.target_rows, b.target_rows);
        let c = make_snake_split(&aux, &spec(0.5, 10)).unwrap();
        assert_ne!(a.train_rows, c.train_rows);
    }

    #[test]
    fn too_few_households() {
        let aux = aux(20);
        let err = make_snake_split(&aux, &spec(0.5, 0)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
