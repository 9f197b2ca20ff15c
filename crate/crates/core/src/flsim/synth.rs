//! Synthetic multi-client tabular data with an optional degenerate client.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::FlError;
use crate::dataset::{Column, Dataset};

/// Name of the generated 0/1 target column.
pub const LABEL: &str = "label";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegenerateClient {
    pub index: usize,
    /// Every row gets label 1.
    pub single_class: bool,
    /// This feature is set to 0 on every row.
    pub zero_feature: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFedSpec {
    pub num_clients: usize,
    pub features: usize,
    pub rows_per_client: usize,
    pub degenerate: Option<DegenerateClient>,
    pub seed: u64,
}

impl Default for SyntheticFedSpec {
    fn default() -> Self {
        SyntheticFedSpec {
            num_clients: 4,
            features: 13,
            rows_per_client: 400,
            degenerate: Some(DegenerateClient {
                index: 3,
                single_class: true,
                zero_feature: Some(0),
            }),
            seed: 0,
        }
    }
}

impl SyntheticFedSpec {
    pub fn validate(&self) -> Result<(), FlError> {
        let bad = |why: &str| Err(FlError::InvalidSpec(why.into()));
        if self.num_clients == 0 || self.features == 0 || self.rows_per_client < 2 {
            return bad("clients, features and rows_per_client must be positive (at least 2 rows)");
        }
        if let Some(g) = &self.degenerate {
            if g.index >= self.num_clients {
                return bad("degenerate client index out of range");
            }
            if g.zero_feature.is_some_and(|f| f >= self.features) {
                return bad("zero_feature index out of range");
            }
        }
        Ok(())
    }
}

pub fn feature_name(j: usize) -> String {
    format!("f{j:02}")
}

/// Two-class Gaussian mixture. Class means are `±a_j` per feature with `a_j`
/// drawn once per seed; each client adds its own mean shift. Labels are
/// balanced Bernoulli draws except on a single-class degenerate client.
pub fn generate_synthetic(spec: &SyntheticFedSpec) -> Result<Vec<Dataset>, FlError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let shift = Normal::new(0.0, 0.3).expect("valid normal");
    let separation: Vec<f64> = (0..spec.features).map(|_| rng.random_range(0.05..0.35)).collect();

    let mut out = Vec::with_capacity(spec.num_clients);
    for c in 0..spec.num_clients {
        let degenerate = spec.degenerate.filter(|g| g.index == c);
        let offsets: Vec<f64> = (0..spec.features).map(|_| shift.sample(&mut rng)).collect();
        let mut features = vec![Vec::with_capacity(spec.rows_per_client); spec.features];
        let mut labels = Vec::with_capacity(spec.rows_per_client);
        for _ in 0..spec.rows_per_client {
            // The degenerate client skips the draw, so other clients see the same stream.
            let positive = degenerate.is_some_and(|g| g.single_class) || rng.random_bool(0.5);
            let y = if positive { 1.0 } else { 0.0 };
            let sign = if y == 1.0 { 1.0 } else { -1.0 };
            for (j, col) in features.iter_mut().enumerate() {
                let v = sign * separation[j] + offsets[j] + unit.sample(&mut rng);
                let zeroed = degenerate.is_some_and(|g| g.zero_feature == Some(j));
                col.push(Some(if zeroed { 0.0 } else { v }));
            }
            labels.push(Some(y));
        }
        let mut columns: Vec<Column> = features
            .into_iter()
            .enumerate()
            .map(|(j, v)| Column::numeric(feature_name(j), v).expect("finite samples"))
            .collect();
        columns.push(Column::numeric(LABEL, labels).expect("finite labels"));
        out.push(Dataset::new(format!("client-{c}"), columns).expect("equal-length columns"));
    }
    Ok(out)
}
