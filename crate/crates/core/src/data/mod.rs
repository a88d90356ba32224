//! Categorical tabular data: domains, encoded datasets, CSV ingestion and
//! experiment splits.

mod csv_io;
pub mod population;
mod split;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_csv, read_csv, write_csv, HOUSEHOLD_COLUMN, MEMBER_COLUMN};
pub use split::{make_snake_split, SnakeSplit, SplitSpec};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub categories: Vec<String>,
}

impl Attribute {
    pub fn cardinality(&self) -> usize {
        self.categories.len()
    }
}

/// Ordered attribute list with the categories of each attribute. The
/// position of a category in `categories` is its encoded index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Domain {
    attributes: Vec<Attribute>,
}

impl Domain {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for a in &attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(Error::Config(format!("duplicate attribute `{}`", a.name)));
            }
            let mut cats = std::collections::HashSet::new();
            for c in &a.categories {
                if !cats.insert(c.as_str()) {
                    return Err(Error::Config(format!(
                        "duplicate category `{c}` in attribute `{}`",
                        a.name
                    )));
                }
            }
        }
        Ok(Domain { attributes })
    }

    /// Domain with attributes named `x0, x1, ...` and categories `0..n_i`.
    pub fn from_cardinalities(cards: &[usize]) -> Result<Self> {
        Domain::new(
            cards
                .iter()
                .enumerate()
                .map(|(i, &n)| Attribute {
                    name: format!("x{i}"),
                    categories: (0..n).map(|v| v.to_string()).collect(),
                })
                .collect(),
        )
    }

    /// Fails if some attribute has no category. Inferred domains of empty
    /// files are the only way to get one.
    pub fn ensure_nondegenerate(&self) -> Result<()> {
        match self.attributes.iter().find(|a| a.categories.is_empty()) {
            Some(a) => Err(Error::Config(format!(
                "attribute `{}` has no categories",
                a.name
            ))),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn cardinality(&self, attr: usize) -> usize {
        self.attributes[attr].cardinality()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.attributes.iter().map(Attribute::cardinality).collect()
    }

    /// Natural log of the number of cells in the full joint domain.
    pub fn log_size(&self) -> f64 {
        self.attributes
            .iter()
            .map(|a| (a.cardinality() as f64).ln())
            .sum()
    }

    /// Number of cells over a subset of attributes, or `None` on overflow.
    pub fn subset_size(&self, attrs: &[usize]) -> Option<usize> {
        attrs
            .iter()
            .try_fold(1usize, |acc, &a| acc.checked_mul(self.cardinality(a)))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn decode(&self, attr: usize, value: u32) -> Option<&str> {
        self.attributes
            .get(attr)?
            .categories
            .get(value as usize)
            .map(String::as_str)
    }
}

/// Encoded categorical records, stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    domain: Domain,
    columns: Vec<Vec<u32>>,
    n_rows: usize,
    household: Option<Vec<u64>>,
    membership: Option<Vec<bool>>,
}

impl Dataset {
    /// Builds a dataset from row-major records.
    pub fn from_rows(domain: Domain, rows: &[Vec<u32>]) -> Result<Self> {
        let d = domain.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); d];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Parse(format!(
                    "row {r} has {} values, expected {d}",
                    row.len()
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                columns[c].push(v);
            }
        }
        Dataset::from_columns(domain, columns)
    }

    pub fn from_columns(domain: Domain, columns: Vec<Vec<u32>>) -> Result<Self> {
        if columns.len() != domain.len() {
            return Err(Error::Parse(format!(
                "{} columns for a domain of {} attributes",
                columns.len(),
                domain.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        for (a, col) in columns.iter().enumerate() {
            if col.len() != n_rows {
                return Err(Error::Parse(format!("column {a} is ragged")));
            }
            let card = domain.cardinality(a) as u32;
            if let Some(&bad) = col.iter().find(|&&v| v >= card) {
                return Err(Error::Bounds(format!(
                    "value {bad} outside attribute {a} of cardinality {card}"
                )));
            }
        }
        Ok(Dataset {
            domain,
            columns,
            n_rows,
            household: None,
            membership: None,
        })
    }

    pub fn with_households(mut self, ids: Vec<u64>) -> Result<Self> {
        if ids.len() != self.n_rows {
            return Err(Error::Parse("household id column length mismatch".into()));
        }
        self.household = Some(ids);
        Ok(self)
    }

    pub fn with_membership(mut self, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != self.n_rows {
            return Err(Error::Parse("membership column length mismatch".into()));
        }
        self.membership = Some(labels);
        Ok(self)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_attrs(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn column(&self, attr: usize) -> &[u32] {
        &self.columns[attr]
    }

    pub fn columns(&self) -> &[Vec<u32>] {
        &self.columns
    }

    #[inline]
    pub fn value(&self, row: usize, attr: usize) -> u32 {
        self.columns[attr][row]
    }

    pub fn record(&self, row: usize) -> Vec<u32> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    pub fn households(&self) -> Option<&[u64]> {
        self.household.as_deref()
    }

    pub fn membership(&self) -> Option<&[bool]> {
        self.membership.as_deref()
    }

    /// New dataset made of the given rows, in the given order. Household and
    /// membership columns follow the rows.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&r| c[r]).collect())
            .collect();
        Dataset {
            domain: self.domain.clone(),
            columns,
            n_rows: rows.len(),
            household: self
                .household
                .as_ref()
                .map(|h| rows.iter().map(|&r| h[r]).collect()),
            membership: self
                .membership
                .as_ref()
                .map(|m| rows.iter().map(|&r| m[r]).collect()),
        }
    }

    /// Rows grouped by household id, in ascending id order.
    pub fn household_groups(&self) -> Option<std::collections::BTreeMap<u64, Vec<usize>>> {
        let ids = self.household.as_ref()?;
        let mut groups = std::collections::BTreeMap::<u64, Vec<usize>>::new();
        for (row, &id) in ids.iter().enumerate() {
            groups.entry(id).or_default().push(row);
        }
        Some(groups)
    }
}
