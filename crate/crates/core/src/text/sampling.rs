use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::RngState;

use super::corpus::{CleanExample, RawRecord};

/// Something with a stable id and a class key, as needed for seeded sampling.
pub trait Sample: Clone {
    fn id(&self) -> &str;
    fn class_key(&self) -> String;
}

impl Sample for RawRecord {
    fn id(&self) -> &str {
        &self.id
    }
    fn class_key(&self) -> String {
        self.label.clone()
    }
}

impl Sample for CleanExample {
    fn id(&self) -> &str {
        &self.id
    }
    fn class_key(&self) -> String {
        self.label.to_string()
    }
}

fn sorted_by_id<S: Sample>(records: &[S]) -> Vec<S> {
    let mut v = records.to_vec();
    v.sort_by(|a, b| a.id().cmp(b.id()));
    v
}

/// Draws exactly `per_class` records from every class present, then shuffles
/// the result.
pub fn balanced_subsample<S: Sample>(
    records: &[S],
    per_class: usize,
    rng: &mut RngState,
) -> Result<Vec<S>> {
    let mut by_class: BTreeMap<String, Vec<S>> = BTreeMap::new();
    for r in sorted_by_id(records) {
        by_class.entry(r.class_key()).or_default().push(r);
    }
    if per_class == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(per_class * by_class.len());
    for (class, mut members) in by_class {
        if members.len() < per_class {
            return Err(Error::InsufficientData {
                class,
                requested: per_class,
                available: members.len(),
            });
        }
        rng.shuffle(&mut members);
        members.truncate(per_class);
        out.extend(members);
    }
    rng.shuffle(&mut out);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits<S> {
    pub train: Vec<S>,
    pub val: Vec<S>,
    pub test: Vec<S>,
    /// Records not assigned to any split.
    pub leftover: Vec<S>,
}

/// Seeded disjoint train/validation/test partition of the requested sizes.
pub fn split<S: Sample>(
    records: &[S],
    sizes: (usize, usize, usize),
    rng: &mut RngState,
) -> Result<Splits<S>> {
    let (tr, va, te) = sizes;
    let requested = tr + va + te;
    if requested > records.len() {
        return Err(Error::invalid(format!(
            "split sizes sum to {requested} but only {} records are available",
            records.len()
        )));
    }
    let mut pool = sorted_by_id(records);
    rng.shuffle(&mut pool);
    let leftover = pool.split_off(requested);
    let test = pool.split_off(tr + va);
    let val = pool.split_off(tr);
    if !leftover.is_empty() {
        log::info!("{} records left over after split", leftover.len());
    }
    Ok(Splits {
        train: pool,
        val,
        test,
        leftover,
    })
}
