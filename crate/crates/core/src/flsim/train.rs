//! Logistic regression trained with federated averaging.
//!
//! Weights are laid out as `[w_0, .., w_{d-1}, bias]`.

use serde::{Deserialize, Serialize};

use super::FlError;
use crate::dataset::{ColumnKind, Dataset};

/// Design matrix and 0/1 labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Samples {
        Samples {
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn extend(&mut self, other: &Samples) {
        self.x.extend(other.x.iter().cloned());
        self.y.extend_from_slice(&other.y);
    }

    /// Numeric non-target columns become features; the target must be 0/1
    /// (numeric or boolean) with no missing cells.
    pub fn from_dataset(d: &Dataset, target: &str) -> Result<(Vec<String>, Samples), FlError> {
        let t = d
            .column(target)
            .ok_or_else(|| FlError::SchemaMismatch(format!("missing target column `{target}`")))?;
        let feats: Vec<_> = d
            .columns()
            .iter()
            .filter(|c| c.kind() == ColumnKind::Numeric && c.name() != target)
            .collect();
        let mut s = Samples::default();
        for row in 0..d.row_count() {
            let y = t.cells()[row]
                .as_ref()
                .and_then(|c| c.as_f64())
                .filter(|v| *v == 0.0 || *v == 1.0)
                .ok_or(FlError::NonBinaryTarget)?;
            let x = feats
                .iter()
                .map(|c| c.cells()[row].as_ref().and_then(|v| v.as_f64()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| FlError::MissingValues(d.source_id().to_string()))?;
            s.x.push(x);
            s.y.push(y);
        }
        Ok((feats.iter().map(|c| c.name().to_string()).collect(), s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedTrainConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for FedTrainConfig {
    fn default() -> Self {
        FedTrainConfig {
            rounds: 30,
            local_epochs: 5,
            learning_rate: 0.1,
            test_fraction: 0.3,
            seed: 0,
        }
    }
}

impl FedTrainConfig {
    pub fn validate(&self) -> Result<(), FlError> {
        if self.rounds == 0
            || self.local_epochs == 0
            || self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
            || !(0.0..1.0).contains(&self.test_fraction)
            || self.test_fraction == 0.0
        {
            return Err(FlError::InvalidConfig(
                "rounds and local_epochs must be positive, learning_rate > 0, test_fraction in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedOutcome {
    pub weights: Vec<f64>,
    pub test_accuracy: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(w: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d]
}

/// Mean binary cross-entropy.
pub fn logistic_loss(w: &[f64], s: &Samples) -> f64 {
    let total: f64 = s
        .x
        .iter()
        .zip(&s.y)
        .map(|(x, y)| {
            let z = logit(w, x);
            // log(1 + e^z) - y z, computed stably
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            softplus - y * z
        })
        .sum();
    total / s.len() as f64
}

/// Gradient of [`logistic_loss`].
pub fn logistic_gradient(w: &[f64], s: &Samples) -> Vec<f64> {
    let d = w.len() - 1;
    let mut g = vec![0.0; d + 1];
    for (x, y) in s.x.iter().zip(&s.y) {
        let err = sigmoid(logit(w, x)) - y;
        for j in 0..d {
            g[j] += err * x[j];
        }
        g[d] += err;
    }
    let n = s.len() as f64;
    g.iter_mut().for_each(|v| *v /= n);
    g
}

/// Full-batch gradient descent starting from `w`.
pub fn local_train(w: &[f64], s: &Samples, epochs: usize, lr: f64) -> Vec<f64> {
    let mut w = w.to_vec();
    for _ in 0..epochs {
        let g = logistic_gradient(&w, s);
        w.iter_mut().zip(&g).for_each(|(a, b)| *a -= lr * b);
    }
    w
}

pub fn accuracy(w: &[f64], s: &Samples) -> f64 {
    let hits = s
        .x
        .iter()
        .zip(&s.y)
        .filter(|(x, y)| (logit(w, x) >= 0.0) == (**y == 1.0))
        .count();
    hits as f64 / s.len() as f64
}

/// FedAvg over pre-split client samples. Each round every client trains from
/// the global weights; the server takes the sample-weighted mean.
pub fn fedavg(clients: &[Samples], test: &Samples, cfg: &FedTrainConfig) -> Result<FedOutcome, FlError> {
    cfg.validate()?;
    let first = clients.iter().find(|c| !c.is_empty()).ok_or(FlError::NoClients)?;
    let dim = first.x[0].len();
    if clients.iter().flat_map(|c| &c.x).chain(&test.x).any(|x| x.len() != dim) {
        return Err(FlError::SchemaMismatch("feature counts differ".into()));
    }
    if test.is_empty() {
        return Err(FlError::EmptyTestSet);
    }
    let total: usize = clients.iter().map(Samples::len).sum();
    let mut global = vec![0.0; dim + 1];
    for _ in 0..cfg.rounds {
        let mut next = vec![0.0; dim + 1];
        for c in clients.iter().filter(|c| !c.is_empty()) {
            let w = local_train(&global, c, cfg.local_epochs, cfg.learning_rate);
            let share = c.len() as f64 / total as f64;
            next.iter_mut().zip(&w).for_each(|(a, b)| *a += share * b);
        }
        global = next;
    }
    Ok(FedOutcome {
        test_accuracy: accuracy(&global, test),
        weights: global,
    })
}

/// FedAvg over client datasets sharing one schema, scored on `test`.
pub fn train_fedavg(
    clients: &[Dataset],
    test: &Dataset,
    target: &str,
    cfg: &FedTrainConfig,
) -> Result<FedOutcome, FlError> {
    if clients.is_empty() {
        return Err(FlError::NoClients);
    }
    let (names, test) = Samples::from_dataset(test, target)?;
    let mut samples = Vec::with_capacity(clients.len());
    for d in clients {
        let (n, s) = Samples::from_dataset(d, target)?;
        if n != names {
            return Err(FlError::SchemaMismatch(format!("client `{}` has different features", d.source_id())));
        }
        samples.push(s);
    }
    fedavg(&samples, &test, cfg)
}
