use rand::seq::index::sample;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::seed;

/// An N-way K-shot task with labels remapped to `0..way`.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub way: usize,
    pub shot: usize,
    pub query_shot: usize,
    /// Dataset class id behind each episode label.
    pub classes: Vec<usize>,
    pub support: Matrix,
    pub support_labels: Vec<usize>,
    pub query: Matrix,
    pub query_labels: Vec<usize>,
    /// Dataset row of each support / query sample.
    pub support_index: Vec<usize>,
    pub query_index: Vec<usize>,
}

pub fn sample_episode(ds: &Dataset, way: usize, shot: usize, query_shot: usize, seed: u64) -> Result<Episode> {
    if way == 0 || shot == 0 || query_shot == 0 {
        return Err(Error::config("episode", "way, shot and query_shot must be at least 1"));
    }
    if way > ds.class_count() {
        return Err(Error::InsufficientClasses(format!(
            "{way}-way episode from {} classes",
            ds.class_count()
        )));
    }
    let mut rng = seed::rng(seed);
    let by_class = ds.indices_by_class();
    let classes = sample(&mut rng, ds.class_count(), way).into_vec();

    let mut support_index = Vec::with_capacity(way * shot);
    let mut query_index = Vec::with_capacity(way * query_shot);
    let mut support_labels = Vec::with_capacity(way * shot);
    let mut query_labels = Vec::with_capacity(way * query_shot);
    for (label, &class) in classes.iter().enumerate() {
        let members = &by_class[class];
        if members.len() < shot + query_shot {
            return Err(Error::InsufficientSamples(format!(
                "class {class} has {} samples, episode needs {}",
                members.len(),
                shot + query_shot
            )));
        }
        let picked = sample(&mut rng, members.len(), shot + query_shot).into_vec();
        for (k, p) in picked.into_iter().enumerate() {
            if k < shot {
                support_index.push(members[p]);
                support_labels.push(label);
            } else {
                query_index.push(members[p]);
                query_labels.push(label);
            }
        }
    }
    Ok(Episode {
        way,
        shot,
        query_shot,
        classes,
        support: ds.features().select_rows(&support_index),
        support_labels,
        query: ds.features().select_rows(&query_index),
        query_labels,
        support_index,
        query_index,
    })
}
