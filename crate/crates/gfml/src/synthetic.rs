//! Fabricated oracle datasets: inputs sampled uniformly in-domain, targets
//! labeled by a chosen controller, optional Gaussian label noise. Used where
//! real per-move bot outputs are unavailable.

use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::dataset::{Dataset, GameRecord, NormalizationMode, Provenance};
use crate::inference::{CompiledController, InferScratch};
use crate::model::{FuzzyController, VariableKind};

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SyntheticConfig {
    pub games: u32,
    pub moves_per_game: u32,
    /// Gaussian noise sigma added to the labels (0 disables).
    pub noise_sigma: f64,
    pub seed: u64,
    /// Output-grid sample count used while labeling.
    pub sample_count: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            games: 60,
            moves_per_game: 10,
            noise_sigma: 0.0,
            seed: 0,
            sample_count: crate::inference::DEFAULT_SAMPLE_COUNT,
        }
    }
}

/// Labels `games * moves_per_game` uniformly sampled input rows with the
/// controller's prediction as EBWR (EWWR mirrors it). Deterministic per seed.
pub fn generate_synthetic(
    fc: &FuzzyController,
    cfg: &SyntheticConfig,
) -> Result<Dataset, crate::inference::InferenceError> {
    let compiled = CompiledController::compile(fc)?;
    let mut scratch = InferScratch::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let domains: Vec<(f64, f64)> = fc
        .knowledge_base
        .iter()
        .filter(|v| v.kind == VariableKind::Input)
        .map(|v| (v.domain_left, v.domain_right))
        .collect();
    let noise = if cfg.noise_sigma > 0.0 {
        Some(Normal::new(0.0, cfg.noise_sigma).unwrap())
    } else {
        None
    };

    let mut records = Vec::with_capacity((cfg.games * cfg.moves_per_game) as usize);
    for game_no in 1..=cfg.games {
        for move_no in 1..=cfg.moves_per_game {
            let mut inputs = [0.0; 6];
            for (slot, &(left, right)) in inputs.iter_mut().zip(&domains) {
                *slot = rng.gen_range(left..=right);
            }
            let mut ebwr = compiled.infer_ordered(&inputs, cfg.sample_count, &mut scratch);
            if let Some(n) = &noise {
                ebwr += n.sample(&mut rng);
            }
            let ebwr = ebwr.clamp(0.0, 1.0);
            records.push(GameRecord {
                game_no,
                move_no,
                dbsn: inputs[0],
                dwsn: inputs[1],
                dbwr: inputs[2],
                dwwr: inputs[3],
                dbtmr: inputs[4],
                dwtmr: inputs[5],
                ebwr,
                ewwr: 1.0 - ebwr,
            });
        }
    }
    Ok(Dataset {
        records,
        provenance: Provenance {
            source: format!("synthetic(seed={})", cfg.seed),
            normalization: NormalizationMode::PreNormalized,
        },
    })
}
