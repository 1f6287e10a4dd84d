use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::components::max_normalize;
use super::ExplainError;
use crate::graph::{ComputationalGraph, WeightedDigraph};
use crate::model::{EdgeInput, GnnModel};
use crate::tensor::{softmax_rows, DenseMatrix, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMethod {
    Mmi,
    Pda,
    Ggd,
}

impl FeatureMethod {
    pub const ALL: [FeatureMethod; 3] = [Self::Mmi, Self::Pda, Self::Ggd];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mmi => "mmi",
            Self::Pda => "pda",
            Self::Ggd => "ggd",
        }
    }
}

impl std::str::FromStr for FeatureMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mmi" => Ok(Self::Mmi),
            "pda" => Ok(Self::Pda),
            "ggd" => Ok(Self::Ggd),
            other => Err(format!("unknown feature method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub values: Vec<f64>,
    pub method: FeatureMethod,
    #[serde(default)]
    pub all_zero: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskInit {
    /// Uniform on [0, 1) from the run seed.
    #[default]
    Uniform,
    Ones,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureHyper {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Soft bound on `Σ M_T`; `None` means `ceil(d / 2)`.
    pub budget: Option<f64>,
    pub lambda_budget: f64,
    pub init: MaskInit,
    pub seed: u64,
}

impl Default for FeatureHyper {
    fn default() -> Self {
        Self {
            iterations: 300,
            learning_rate: 0.1,
            budget: None,
            lambda_budget: 0.1,
            init: MaskInit::Uniform,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMaskRun {
    pub values: Vec<f64>,
    pub loss_history: Vec<f64>,
    /// The reference sample the masked features are pulled towards.
    pub z: DenseMatrix,
}

impl FeatureMaskRun {
    pub fn importance(&self) -> FeatureImportance {
        FeatureImportance {
            values: self.values.clone(),
            method: FeatureMethod::Mmi,
            all_zero: self.values.iter().all(|&v| v == 0.0),
        }
    }
}

/// Per-feature Gaussian sample matching each column's mean and population
/// standard deviation; zero-variance columns are copied as their mean.
pub fn sample_reparam_z<R: Rng>(xs: &DenseMatrix, rng: &mut R) -> DenseMatrix {
    let (n, d) = xs.shape();
    let mut z = DenseMatrix::zeros(n, d);
    for j in 0..d {
        let col = xs.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std > 0.0 {
            let normal = Normal::new(mean, std).expect("finite positive std");
            for i in 0..n {
                z.set(i, j, normal.sample(rng));
            }
        } else {
            for i in 0..n {
                z.set(i, j, col[i]);
            }
        }
    }
    z
}

/// Learns one mask entry per feature, shared by all nodes of `sub`, with
/// features reparametrized as `Z + (X − Z) ⊙ M_T`.
pub fn mmi_feature_mask(
    model: &GnnModel,
    sub: &ComputationalGraph,
    label: usize,
    hyper: &FeatureHyper,
) -> Result<FeatureMaskRun, ExplainError> {
    mmi_feature_mask_observed(model, sub, label, hyper, |_| {})
}

/// [`mmi_feature_mask`] calling `on_step` with the projected mask after
/// every update.
pub fn mmi_feature_mask_observed(
    model: &GnnModel,
    sub: &ComputationalGraph,
    label: usize,
    hyper: &FeatureHyper,
    mut on_step: impl FnMut(&[f64]),
) -> Result<FeatureMaskRun, ExplainError> {
    let g = sub.graph();
    let (n, d) = g.features().shape();
    if n == 0 {
        return Err(ExplainError::EmptySubgraph);
    }
    if !(hyper.learning_rate.is_finite() && hyper.learning_rate > 0.0 && hyper.lambda_budget >= 0.0)
    {
        return Err(ExplainError::InvalidHyper(format!("{hyper:?}")));
    }
    let budget = hyper.budget.unwrap_or(d.div_ceil(2) as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let z = sample_reparam_z(g.features(), &mut rng);
    let mut mask: Vec<f64> = match hyper.init {
        MaskInit::Uniform => (0..d).map(|_| rng.random::<f64>()).collect(),
        MaskInit::Ones => vec![1.0; d],
    };
    let mut diff = g.features().clone();
    for (v, zv) in diff.as_mut_slice().iter_mut().zip(z.as_slice()) {
        *v -= zv;
    }
    let weights = DenseMatrix::col_vector(&g.weights());
    let mut history = Vec::with_capacity(hyper.iterations);
    for _ in 0..hyper.iterations {
        let mut tape = Tape::new();
        let params = model.bind(&mut tape);
        let m = tape.leaf(DenseMatrix::row_vector(&mask));
        let zl = tape.leaf(z.clone());
        let dl = tape.leaf(diff.clone());
        let masked = tape.mul_row_vector(dl, m)?;
        let x = tape.add(zl, masked)?;
        let e = tape.leaf(weights.clone());
        let logits = model.logits_on_tape(&mut tape, &params, g, x, EdgeInput::Raw(e))?;
        let row = tape.gather_rows(logits, vec![sub.center()].into())?;
        let logp = tape.log_softmax_rows(row)?;
        let picked = tape.element(logp, 0, label)?;
        let mut loss = tape.scale(picked, -1.0)?;
        if hyper.lambda_budget > 0.0 {
            let s = tape.sum(m)?;
            let over = tape.add_scalar(s, -budget)?;
            let hinge = tape.relu(over)?;
            let pen = tape.scale(hinge, hyper.lambda_budget)?;
            loss = tape.add(loss, pen)?;
        }
        history.push(tape.value(loss).get(0, 0));
        let grads = tape.backward(loss)?;
        let gm = grads.get_or_zeros(m, (1, d));
        for (v, g) in mask.iter_mut().zip(gm.as_slice()) {
            *v = (*v - hyper.learning_rate * g).clamp(0.0, 1.0);
        }
        on_step(&mask);
    }
    Ok(FeatureMaskRun {
        values: mask,
        loss_history: history,
        z,
    })
}

/// Training feature vectors grouped by class. Rows inside a class are kept
/// in a canonical order so results depend only on the pool's contents.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePool {
    classes: Vec<Vec<Vec<f64>>>,
}

impl FeaturePool {
    pub fn new(mut classes: Vec<Vec<Vec<f64>>>) -> Self {
        for rows in &mut classes {
            rows.sort_by(|a, b| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        }
        Self { classes }
    }

    pub fn from_graph(graph: &WeightedDigraph, train_ids: &[usize]) -> Result<Self, ExplainError> {
        let labels = graph.labels().ok_or(ExplainError::EmptyPool)?;
        let mut classes = vec![Vec::new(); graph.class_count()];
        for &i in train_ids {
            classes[labels[i]].push(graph.features().row(i).to_vec());
        }
        Ok(Self::new(classes))
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.classes.iter().map(Vec::len).collect()
    }

    /// Class chosen with probability ∝ 1/N_k over nonempty classes, then a
    /// uniform member; returns its feature `i`.
    fn draw<R: Rng>(&self, feature: usize, cdf: &[(usize, f64)], rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let k = cdf
            .iter()
            .find(|(_, c)| u < *c)
            .map_or(cdf[cdf.len() - 1].0, |(k, _)| *k);
        let rows = &self.classes[k];
        rows[rng.random_range(0..rows.len())][feature]
    }

    fn class_cdf(&self) -> Vec<(usize, f64)> {
        let inv: Vec<(usize, f64)> = self
            .classes
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .map(|(k, r)| (k, 1.0 / r.len() as f64))
            .collect();
        let total: f64 = inv.iter().map(|(_, w)| w).sum();
        let mut acc = 0.0;
        inv.into_iter()
            .map(|(k, w)| {
                acc += w / total;
                (k, acc)
            })
            .collect()
    }
}

fn center_prob(
    model: &GnnModel,
    g: &WeightedDigraph,
    features: &DenseMatrix,
    center: usize,
    label: usize,
) -> Result<f64, ExplainError> {
    let logits = model.logits(g, features)?;
    let row = DenseMatrix::row_vector(logits.row(center));
    Ok(softmax_rows(&row).get(0, label))
}

/// Prediction difference analysis: the drop in the true-class probability
/// at the center when one of its features is resampled from the pool.
pub fn pda(
    model: &GnnModel,
    sub: &ComputationalGraph,
    label: usize,
    pool: &FeaturePool,
    samples: usize,
    seed: u64,
) -> Result<FeatureImportance, ExplainError> {
    if samples == 0 {
        return Err(ExplainError::InvalidHyper(
            "PDA needs at least one sample".into(),
        ));
    }
    let cdf = pool.class_cdf();
    if cdf.is_empty() {
        return Err(ExplainError::EmptyPool);
    }
    for (k, n) in pool.class_sizes().iter().enumerate() {
        if *n == 0 {
            log::warn!("class {k} has no training nodes; excluded from PDA sampling");
        }
    }
    let g = sub.graph();
    let center = sub.center();
    let d = g.feature_dim();
    let original = center_prob(model, g, g.features(), center, label)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(d);
    for i in 0..d {
        let mut x = g.features().clone();
        let mut acc = 0.0;
        for _ in 0..samples {
            x.set(center, i, pool.draw(i, &cdf, &mut rng));
            acc += center_prob(model, g, &x, center, label)?;
        }
        let p_bar = acc / samples as f64;
        values.push((original - p_bar).clamp(0.0, 1.0));
    }
    let all_zero = values.iter().all(|&v| v == 0.0);
    Ok(FeatureImportance {
        values,
        method: FeatureMethod::Pda,
        all_zero,
    })
}

/// ReLU of the true-class logit's gradient with respect to every feature
/// entry of the computational graph, summed over nodes and max-normalized.
pub fn ggd_feature_salience(
    model: &GnnModel,
    comp: &ComputationalGraph,
    label: usize,
) -> Result<FeatureImportance, ExplainError> {
    let g = comp.graph();
    let (n, d) = g.features().shape();
    let mut tape = Tape::new();
    let params = model.bind(&mut tape);
    let x = tape.leaf(g.features().clone());
    let e = tape.leaf(DenseMatrix::col_vector(&g.weights()));
    let logits = model.logits_on_tape(&mut tape, &params, g, x, EdgeInput::Raw(e))?;
    let target = tape.element(logits, comp.center(), label)?;
    let grads = tape.backward(target)?;
    let gx = grads.get_or_zeros(x, (n, d));
    let mut sums = vec![0.0; d];
    for r in 0..n {
        for (s, v) in sums.iter_mut().zip(gx.row(r)) {
            *s += v.max(0.0);
        }
    }
    let (values, all_zero) = max_normalize(sums);
    Ok(FeatureImportance {
        values,
        method: FeatureMethod::Ggd,
        all_zero,
    })
}

/// Descending ranks starting at 1; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankAggregate {
    pub methods: Vec<FeatureMethod>,
    /// `ranks[m][i]`: rank of feature `i` under method `m`.
    pub ranks: Vec<Vec<f64>>,
    pub rank_sum: Vec<f64>,
    /// Features, most important first.
    pub order: Vec<usize>,
}

/// Sums per-method ranks; smaller sums rank first, ties by feature index.
pub fn rank_aggregate(list: &[FeatureImportance]) -> Result<RankAggregate, ExplainError> {
    let d = list.first().map_or(0, |f| f.values.len());
    if let Some(bad) = list.iter().find(|f| f.values.len() != d) {
        return Err(ExplainError::LengthMismatch {
            expected: d,
            found: bad.values.len(),
        });
    }
    let ranks: Vec<Vec<f64>> = list.iter().map(|f| average_ranks(&f.values)).collect();
    let rank_sum: Vec<f64> = (0..d).map(|i| ranks.iter().map(|r| r[i]).sum()).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| rank_sum[a].total_cmp(&rank_sum[b]).then(a.cmp(&b)));
    Ok(RankAggregate {
        methods: list.iter().map(|f| f.method).collect(),
        ranks,
        rank_sum,
        order,
    })
}

impl RankAggregate {
    /// CSV with columns `feature,rank_<method>...,rank_sum`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature");
        for m in &self.methods {
            out.push_str(&format!(",rank_{}", m.name()));
        }
        out.push_str(",rank_sum\n");
        for i in 0..self.rank_sum.len() {
            out.push_str(&i.to_string());
            for r in &self.ranks {
                out.push_str(&format!(",{}", r[i]));
            }
            out.push_str(&format!(",{}\n", self.rank_sum[i]));
        }
        out
    }
}

/// Serializable feature-importance result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureExplanation {
    pub node: usize,
    pub method: FeatureMethod,
    pub scores: Vec<f64>,
    /// Features, most important first.
    pub ranking: Vec<usize>,
}

impl FeatureExplanation {
    pub fn new(node: usize, importance: &FeatureImportance) -> Self {
        let ranks = average_ranks(&importance.values);
        let mut ranking: Vec<usize> = (0..ranks.len()).collect();
        ranking.sort_by(|&a, &b| ranks[a].total_cmp(&ranks[b]).then(a.cmp(&b)));
        Self {
            node,
            method: importance.method,
            scores: importance.values.clone(),
            ranking,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, computational_graph, WeightedArc};
    use crate::model::{Gate, GnnConfig, Mode};

    fn graph() -> WeightedDigraph {
        let arcs = [
            (1, 0, 1.0),
            (2, 0, 0.5),
            (3, 1, 2.0),
            (0, 2, 1.0),
            (3, 2, 1.0),
            (0, 3, 1.0),
        ]
        .iter()
        .map(|&(s, d, w)| WeightedArc::new(s, d, w))
        .collect();
        let x = DenseMatrix::from_rows(&[
            [0.1, 0.3, -0.2],
            [0.5, -0.4, 0.9],
            [-0.3, 0.2, 0.0],
            [0.7, 0.1, -0.6],
        ])
        .unwrap();
        build_graph(arcs, x, Some(vec![0, 1, 1, 0]), 2).unwrap()
    }

    fn model(gate: Gate) -> GnnModel {
        let mut c = GnnConfig::new(Mode::TypeI, gate, 3, 4, 2, 2);
        c.seed = 9;
        GnnModel::init(&c).unwrap()
    }

    /// Zeroes input column `i` wherever the first layer reads the features.
    fn ignore_feature(m: &mut GnnModel, i: usize) {
        let names: Vec<String> = m.parameters().into_iter().map(|(n, _)| n).collect();
        for (name, p) in names.iter().zip(m.parameters_mut()) {
            if name.starts_with("layers[0]") && p.cols() == 3 {
                for r in 0..p.rows() {
                    p.set(r, i, 0.0);
                }
            }
        }
    }

    #[test]
    fn rank_aggregate_examples() {
        let imp = |v: &[f64], method| FeatureImportance {
            values: v.to_vec(),
            method,
            all_zero: false,
        };
        let same = [0.2, 0.9, 0.5];
        let agg = rank_aggregate(&[
            imp(&same, FeatureMethod::Mmi),
            imp(&same, FeatureMethod::Pda),
            imp(&same, FeatureMethod::Ggd),
        ])
        .unwrap();
        assert_eq!(agg.order, vec![1, 2, 0]);

        let agg = rank_aggregate(&[
            imp(&[0.9, 0.1], FeatureMethod::Mmi),
            imp(&[0.1, 0.9], FeatureMethod::Pda),
            imp(&[0.9, 0.1], FeatureMethod::Ggd),
        ])
        .unwrap();
        assert_eq!(agg.rank_sum, vec![4.0, 5.0]);
        assert_eq!(agg.order, vec![0, 1]);
        assert_eq!(
            agg.to_csv(),
            "feature,rank_mmi,rank_pda,rank_ggd,rank_sum\n0,1,2,1,4\n1,2,1,2,5\n"
        );

        let tied = rank_aggregate(&[
            imp(&[0.3; 4], FeatureMethod::Mmi),
            imp(&[0.0; 4], FeatureMethod::Ggd),
        ])
        .unwrap();
        assert_eq!(tied.order, vec![0, 1, 2, 3]);
        assert_eq!(tied.ranks[0], vec![2.5; 4]);

        assert!(matches!(
            rank_aggregate(&[
                imp(&[1.0], FeatureMethod::Mmi),
                imp(&[1.0, 2.0], FeatureMethod::Pda)
            ]),
            Err(ExplainError::LengthMismatch {
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn reparam_z() {
        let constant = DenseMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_reparam_z(&constant, &mut rng), constant);

        let g = graph();
        let a = sample_reparam_z(g.features(), &mut ChaCha8Rng::seed_from_u64(4));
        let b = sample_reparam_z(g.features(), &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
        assert_eq!(a.shape(), g.features().shape());
    }

    #[test]
    fn reparam_z_matches_column_moments() {
        // 10^4 draws from a column with mean 0 and population std 0.1
        let rows: Vec<[f64; 1]> = (0..10_000)
            .map(|i| [if i % 2 == 0 { 0.1 } else { -0.1 }])
            .collect();
        let x = DenseMatrix::from_rows(&rows).unwrap();
        let z = sample_reparam_z(&x, &mut ChaCha8Rng::seed_from_u64(2));
        let mean = z.as_slice().iter().sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.01, "{mean}");
    }

    #[test]
    fn ones_mask_is_identity() {
        let g = graph();
        let comp = computational_graph(&g, 0, 2).unwrap();
        let m = model(Gate::Sum);
        let hyper = FeatureHyper {
            iterations: 0,
            budget: Some(3.0),
            lambda_budget: 0.0,
            init: MaskInit::Ones,
            ..Default::default()
        };
        let run = mmi_feature_mask(&m, &comp, 1, &hyper).unwrap();
        assert_eq!(run.values, vec![1.0; 3]);
        let mut x = run.z.clone();
        for (v, (orig, z)) in x.as_mut_slice().iter_mut().zip(
            comp.graph()
                .features()
                .as_slice()
                .iter()
                .zip(run.z.as_slice()),
        ) {
            *v = z + (orig - z) * 1.0;
        }
        for (a, b) in x.as_slice().iter().zip(comp.graph().features().as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn feature_mask_stays_in_box() {
        let g = graph();
        let comp = computational_graph(&g, 0, 2).unwrap();
        let hyper = FeatureHyper {
            iterations: 40,
            learning_rate: 3.0,
            ..Default::default()
        };
        let mut steps = 0;
        mmi_feature_mask_observed(&model(Gate::Gru), &comp, 1, &hyper, |m| {
            steps += 1;
            assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
        })
        .unwrap();
        assert_eq!(steps, 40);
    }

    #[test]
    fn pda_ignores_dead_feature() {
        let g = graph();
        let comp = computational_graph(&g, 0, 2).unwrap();
        let mut m = model(Gate::Sum);
        ignore_feature(&mut m, 1);
        let pool = FeaturePool::from_graph(&g, &[0, 1, 2, 3]).unwrap();
        let p = pda(&m, &comp, 0, &pool, 50, 7).unwrap();
        assert_eq!(p.values[1], 0.0);
        assert!(p.values.iter().all(|v| (0.0..=1.0).contains(v)));
        let ggd = ggd_feature_salience(&m, &comp, 0).unwrap();
        assert_eq!(ggd.values[1], 0.0);
    }

    #[test]
    fn pda_with_original_value_is_zero() {
        let g = graph();
        let comp = computational_graph(&g, 0, 2).unwrap();
        // a pool holding only the center's own row
        let pool = FeaturePool::new(vec![vec![g.features().row(0).to_vec()], vec![]]);
        let p = pda(&model(Gate::Gru), &comp, 1, &pool, 1, 0).unwrap();
        assert_eq!(p.values, vec![0.0; 3]);
        assert!(p.all_zero);
    }

    #[test]
    fn pool_order_does_not_matter() {
        let g = graph();
        let comp = computational_graph(&g, 0, 2).unwrap();
        let m = model(Gate::Gru);
        let a = FeaturePool::from_graph(&g, &[0, 1, 2, 3]).unwrap();
        let b = FeaturePool::from_graph(&g, &[3, 2, 1, 0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            pda(&m, &comp, 1, &a, 20, 3).unwrap(),
            pda(&m, &comp, 1, &b, 20, 3).unwrap()
        );
    }

    #[test]
    fn ggd_is_deterministic() {
        let g = graph();
        let comp = computational_graph(&g, 0, 2).unwrap();
        let m = model(Gate::Gru);
        let a = ggd_feature_salience(&m, &comp, 1).unwrap();
        assert_eq!(a, ggd_feature_salience(&m, &comp, 1).unwrap());
        assert!(a.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn explanation_ranking() {
        let e = FeatureExplanation::new(
            4,
            &FeatureImportance {
                values: vec![0.2, 0.9, 0.2],
                method: FeatureMethod::Pda,
                all_zero: false,
            },
        );
        assert_eq!(e.ranking, vec![1, 0, 2]);
    }
}
