//! Episode selection for the five instruction subsets.

use oevla_core::Form;
use oevla_sim::derive_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

pub const DEFAULT_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetDraw {
    pub form: Form,
    /// Drawn episode ids, in archive order.
    pub episodes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixPlan {
    pub fraction: f64,
    pub seed: u64,
    pub n_episodes: usize,
    pub per_subset: usize,
    pub subsets: Vec<SubsetDraw>,
}

impl MixPlan {
    /// Episode draws summed over subsets (an episode may appear in several).
    pub fn total_draws(&self) -> usize {
        self.subsets.iter().map(|s| s.episodes.len()).sum()
    }

    pub fn subset(&self, form: Form) -> Option<&SubsetDraw> {
        self.subsets.iter().find(|s| s.form == form)
    }
}

/// `ceil(fraction * n)`, tolerant of float noise such as `0.4 * 1000`.
pub fn subset_size(n: usize, fraction: f64) -> usize {
    let exact = fraction * n as f64;
    let rounded = exact.round();
    let k = if (exact - rounded).abs() < 1e-9 {
        rounded
    } else {
        exact.ceil()
    };
    (k as usize).min(n)
}

/// Five independent draws without replacement of `ceil(fraction * N)`
/// episodes, one per form. The LANG subset later passes annotations through
/// unchanged.
pub fn mix_dataset(episode_ids: &[String], fraction: f64, seed: u64) -> Result<MixPlan> {
    if episode_ids.is_empty() {
        return Err(ForgeError::Config("no episodes to mix".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(ForgeError::Config(format!("fraction {fraction} outside (0, 1]")));
    }
    let n = episode_ids.len();
    let k = subset_size(n, fraction);
    let subsets = Form::ALL
        .into_iter()
        .map(|form| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "mix", form as u64));
            let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
            idx.sort_unstable();
            SubsetDraw {
                form,
                episodes: idx.into_iter().map(|i| episode_ids[i].clone()).collect(),
            }
        })
        .collect();
    Ok(MixPlan {
        fraction,
        seed,
        n_episodes: n,
        per_subset: k,
        subsets,
    })
}
