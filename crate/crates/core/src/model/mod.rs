//! Hierarchical point encoder with cluster, noise and agreement heads.

mod checkpoint;
mod sampling;

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use sampling::{ball_query, farthest_point_sampling};

pub use crate::data::cluster_count;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::data::Point2;
use crate::error::{Error, Result};
use crate::metrics::SimilarityMatrix;

/// Architecture hyperparameters. Every parameter shape follows from these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Point count required in training mode.
    pub train_points: usize,
    pub level_sizes: Vec<usize>,
    pub group_radii: Vec<f64>,
    pub group_max_neighbors: Vec<usize>,
    /// Shared MLP widths per abstraction level.
    pub sa_mlp_widths: Vec<Vec<usize>>,
    /// Output width of each propagation stage, coarse to fine.
    pub fp_feature_sizes: Vec<usize>,
    pub head_width: usize,
    pub max_clusters: usize,
    pub interpolation_neighbors: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            train_points: 512,
            level_sizes: vec![256, 128, 64, 8],
            group_radii: vec![0.1, 0.2, 0.4, 0.8],
            group_max_neighbors: vec![32; 4],
            sa_mlp_widths: vec![vec![32, 64], vec![64, 128], vec![128, 256], vec![256, 512]],
            fp_feature_sizes: vec![256, 256, 128, 128],
            head_width: 128,
            max_clusters: 20,
            interpolation_neighbors: 3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let levels = self.level_sizes.len();
        let bad = |msg: String| Err(Error::Config(msg));
        if levels == 0 {
            return bad("at least one abstraction level is required".into());
        }
        if self.group_radii.len() != levels
            || self.group_max_neighbors.len() != levels
            || self.sa_mlp_widths.len() != levels
            || self.fp_feature_sizes.len() != levels
        {
            return bad(format!(
                "per-level lists must all have {levels} entries (radii {}, neighbors {}, sa widths {}, fp sizes {})",
                self.group_radii.len(),
                self.group_max_neighbors.len(),
                self.sa_mlp_widths.len(),
                self.fp_feature_sizes.len()
            ));
        }
        if self.level_sizes.windows(2).any(|w| w[0] <= w[1]) || self.level_sizes[levels - 1] == 0 {
            return bad(format!("level sizes must be strictly decreasing and positive: {:?}", self.level_sizes));
        }
        if self.group_radii.windows(2).any(|w| w[0] >= w[1]) || self.group_radii.iter().any(|&r| !(r > 0.0)) {
            return bad(format!("group radii must be positive and strictly increasing: {:?}", self.group_radii));
        }
        if self.group_max_neighbors.contains(&0) {
            return bad("group_max_neighbors entries must be at least 1".into());
        }
        if self.sa_mlp_widths.iter().any(|w| w.is_empty() || w.contains(&0)) {
            return bad("every abstraction level needs a non-empty MLP with positive widths".into());
        }
        if self.fp_feature_sizes.contains(&0) {
            return bad("propagation sizes must be positive".into());
        }
        if self.max_clusters == 0 {
            return bad("max_clusters must be at least 1".into());
        }
        if self.head_width != self.fp_feature_sizes[levels - 1] {
            return bad(format!(
                "head_width {} must equal the last propagation size {}",
                self.head_width,
                self.fp_feature_sizes[levels - 1]
            ));
        }
        if self.interpolation_neighbors == 0 {
            return bad("interpolation_neighbors must be at least 1".into());
        }
        if self.train_points < 2 {
            return bad("train_points must be at least 2".into());
        }
        Ok(())
    }

    fn levels(&self) -> usize {
        self.level_sizes.len()
    }

    /// Output width of abstraction level `l` (1-based; level 0 is the raw
    /// input and carries no features).
    fn sa_width(&self, l: usize) -> usize {
        if l == 0 {
            0
        } else {
            *self.sa_mlp_widths[l - 1].last().expect("validated")
        }
    }

    /// `(name, shape)` of every parameter tensor in canonical order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for l in 1..=self.levels() {
            let mut fan_in = 2 + self.sa_width(l - 1);
            for (j, &w) in self.sa_mlp_widths[l - 1].iter().enumerate() {
                out.push((format!("sa{l}.{j}.weight"), vec![fan_in, w]));
                out.push((format!("sa{l}.{j}.bias"), vec![w]));
                fan_in = w;
            }
        }
        let levels = self.levels();
        for (s, &w) in self.fp_feature_sizes.iter().enumerate() {
            let coarse = if s == 0 { self.sa_width(levels) } else { self.fp_feature_sizes[s - 1] };
            let skip = self.skip_width(s);
            out.push((format!("fp{s}.weight"), vec![coarse + skip, w]));
            out.push((format!("fp{s}.bias"), vec![w]));
        }
        out.push(("head.weight".into(), vec![self.head_width, self.max_clusters + 2]));
        out.push(("head.bias".into(), vec![self.max_clusters + 2]));
        out
    }

    /// Skip features joined at propagation stage `s`: the abstraction
    /// features of the finer level, or raw positions at the last stage.
    fn skip_width(&self, s: usize) -> usize {
        let fine_level = self.levels() - 1 - s;
        if fine_level == 0 {
            2
        } else {
            self.sa_width(fine_level)
        }
    }
}

/// All trainable tensors, in the order given by [`ModelConfig::param_shapes`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
}

impl ModelParams {
    /// He-uniform weights and zero biases. The noise and agreement columns
    /// of the head start at zero so both outputs begin at exactly 0.5 and
    /// are shaped by their own losses rather than by a random projection.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape) in config.param_shapes() {
            let tensor = if shape.len() == 2 {
                let bound = (6.0 / shape[0] as f64).sqrt();
                let mut data: Vec<f64> = (0..shape[0] * shape[1]).map(|_| rng.random_range(-bound..bound)).collect();
                if name == "head.weight" {
                    let cols = shape[1];
                    for row in data.chunks_mut(cols) {
                        row[cols - 2] = 0.0;
                        row[cols - 1] = 0.0;
                    }
                }
                Tensor::new(shape, data)?
            } else {
                Tensor::zeros(shape)
            };
            names.push(name);
            tensors.push(tensor);
        }
        Ok(Self { names, tensors })
    }

    /// Checks that names and shapes match what `config` implies.
    pub fn check_against(&self, config: &ModelConfig) -> Result<()> {
        let expected = config.param_shapes();
        if expected.len() != self.tensors.len() || self.names.len() != self.tensors.len() {
            return Err(Error::Config(format!(
                "config implies {} parameter tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape), (have_name, t)) in expected.iter().zip(self.names.iter().zip(&self.tensors)) {
            if name != have_name || shape != &t.shape {
                return Err(Error::Config(format!(
                    "parameter {have_name} {:?} does not match expected {name} {shape:?}",
                    t.shape
                )));
            }
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Places every tensor on the tape, as trainable leaves or constants.
    pub fn attach(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) })
            .collect()
    }
}

/// How sampling behaves during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Fixed point count; FPS starts at the given index.
    Train { fps_start: usize },
    /// Any point count ≥ 2; FPS starts at index 0 and level sizes clamp.
    Infer,
}

/// Per-point model outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutput {
    pub n: usize,
    pub clusters: usize,
    /// Row-major N×C.
    pub cluster_probs: Vec<f64>,
    pub noise_prob: Vec<f64>,
    pub agreement: Vec<f64>,
}

impl PredictionOutput {
    pub fn cluster_row(&self, i: usize) -> &[f64] {
        &self.cluster_probs[i * self.clusters..(i + 1) * self.clusters]
    }
}

/// Tape handles of the three activated heads.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    /// N×C.
    pub cluster_probs: Var,
    /// N×1.
    pub noise_prob: Var,
    /// N×1.
    pub agreement: Var,
}

/// Sampling and grouping for one abstraction level; depends only on point
/// positions, never on parameters.
struct Level {
    positions: Vec<Point2>,
    /// Flattened member indices into the previous level, group by group.
    members: Vec<usize>,
    /// Row ranges of each group within `members`.
    groups: Vec<Vec<usize>>,
    /// Member positions relative to their center, scaled by the radius.
    relative: Tensor,
}

fn build_levels(points: &[Point2], config: &ModelConfig, fps_start: usize) -> Result<Vec<Level>> {
    let mut levels: Vec<Level> = Vec::with_capacity(config.levels());
    let mut prev: Vec<Point2> = points.to_vec();
    for l in 0..config.levels() {
        let m = config.level_sizes[l].min(prev.len());
        let start = if l == 0 { fps_start } else { 0 };
        let centers = farthest_point_sampling(&prev, m, start)?;
        let radius = config.group_radii[l];
        let groups_idx = ball_query(&prev, &centers, radius, config.group_max_neighbors[l]);
        let mut members = Vec::new();
        let mut groups = Vec::with_capacity(m);
        let mut rel = Vec::new();
        for (&c, group) in centers.iter().zip(&groups_idx) {
            let row0 = members.len();
            for &j in group {
                members.push(j);
                rel.push((prev[j].x - prev[c].x) / radius);
                rel.push((prev[j].y - prev[c].y) / radius);
            }
            groups.push((row0..members.len()).collect());
        }
        let positions: Vec<Point2> = centers.iter().map(|&c| prev[c]).collect();
        let relative = Tensor::matrix(members.len(), 2, rel)?;
        levels.push(Level {
            positions: positions.clone(),
            members,
            groups,
            relative,
        });
        prev = positions;
    }
    Ok(levels)
}

fn check_points(points: &[Point2], config: &ModelConfig, mode: Mode) -> Result<usize> {
    let n = points.len();
    if let Some(p) = points.iter().find(|p| !p.is_finite()) {
        return Err(Error::Data(format!("non-finite point ({}, {})", p.x, p.y)));
    }
    match mode {
        Mode::Train { fps_start } => {
            if n != config.train_points {
                return Err(Error::Data(format!(
                    "training requires exactly {} points, got {n}",
                    config.train_points
                )));
            }
            if fps_start >= n {
                return Err(Error::Config(format!("FPS start {fps_start} out of {n} points")));
            }
            Ok(fps_start)
        }
        Mode::Infer => {
            if n < 2 {
                return Err(Error::Data(format!("inference requires at least 2 points, got {n}")));
            }
            Ok(0)
        }
    }
}

/// Records the full forward pass on `tape`. `params` are the tape handles of
/// the parameter tensors, in canonical order.
pub fn record_forward(
    tape: &mut Tape,
    points: &[Point2],
    params: &[Var],
    config: &ModelConfig,
    mode: Mode,
) -> Result<ForwardVars> {
    let fps_start = check_points(points, config, mode)?;
    let expected = config.param_shapes().len();
    if params.len() != expected {
        return Err(Error::Config(format!("expected {expected} parameter handles, got {}", params.len())));
    }
    let levels = build_levels(points, config, fps_start)?;
    let mut next = params.iter().copied();
    let mut take = || next.next().expect("parameter count checked");

    // Abstraction: features per level, index 0 is the raw input (none).
    let mut features: Vec<Option<Var>> = vec![None];
    for (l, level) in levels.iter().enumerate() {
        let rel = tape.constant(level.relative.clone());
        let mut h = match features[l] {
            None => rel,
            Some(prev) => {
                let gathered = tape.gather(prev, &level.members)?;
                tape.concat_features(rel, gathered)?
            }
        };
        for _ in &config.sa_mlp_widths[l] {
            let (w, b) = (take(), take());
            let a = tape.affine(h, w, b)?;
            h = tape.relu(a);
        }
        features.push(Some(tape.max_over_group(h, &level.groups)?));
    }

    // Propagation back to the input resolution.
    let depth = levels.len();
    let mut coarse_feat = features[depth].expect("at least one level");
    for s in 0..depth {
        let coarse_level = depth - s;
        let fine_level = coarse_level - 1;
        let coarse_pos = &levels[coarse_level - 1].positions;
        let fine_pos: &[Point2] = if fine_level == 0 { points } else { &levels[fine_level - 1].positions };
        let interp = tape.idw_interpolate(coarse_pos, coarse_feat, fine_pos, config.interpolation_neighbors)?;
        let skip = match features[fine_level] {
            Some(f) => f,
            None => {
                let raw = fine_pos.iter().flat_map(|p| [p.x, p.y]).collect();
                tape.constant(Tensor::matrix(fine_pos.len(), 2, raw)?)
            }
        };
        let joined = tape.concat_features(interp, skip)?;
        let (w, b) = (take(), take());
        let a = tape.affine(joined, w, b)?;
        coarse_feat = tape.relu(a);
    }

    let (w, b) = (take(), take());
    let logits = tape.affine(coarse_feat, w, b)?;
    let c = config.max_clusters;
    let cluster_logits = tape.slice_cols(logits, 0, c)?;
    let cluster_probs = tape.softmax_rows(cluster_logits)?;
    let noise_logit = tape.slice_cols(logits, c, 1)?;
    let noise_prob = tape.sigmoid(noise_logit);
    let agree_logit = tape.slice_cols(logits, c + 1, 1)?;
    let agreement = tape.sigmoid(agree_logit);
    Ok(ForwardVars {
        cluster_probs,
        noise_prob,
        agreement,
    })
}

/// Runs the model without recording gradients.
pub fn model_forward(points: &[Point2], params: &ModelParams, config: &ModelConfig, mode: Mode) -> Result<PredictionOutput> {
    let mut tape = Tape::new();
    let vars = params.attach(&mut tape, false);
    let out = record_forward(&mut tape, points, &vars, config, mode)?;
    Ok(PredictionOutput {
        n: points.len(),
        clusters: config.max_clusters,
        cluster_probs: tape.value(out.cluster_probs).data.clone(),
        noise_prob: tape.value(out.noise_prob).data.clone(),
        agreement: tape.value(out.agreement).data.clone(),
    })
}

/// Inner products of cluster-probability rows.
pub fn estimated_similarity(output: &PredictionOutput) -> SimilarityMatrix {
    let n = output.n;
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let ri = output.cluster_row(i);
        for j in i..n {
            let v: f64 = ri.iter().zip(output.cluster_row(j)).map(|(a, b)| a * b).sum();
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    SimilarityMatrix { n, entries }
}

/// Hard labels: 0 where the noise probability strictly exceeds the
/// threshold, otherwise the 1-based index of the most likely cluster
/// (lowest channel on ties).
pub fn extract_clustering(output: &PredictionOutput, noise_threshold: f64) -> Vec<u32> {
    (0..output.n)
        .map(|i| {
            if output.noise_prob[i] > noise_threshold {
                return 0;
            }
            let row = output.cluster_row(i);
            let mut best = 0;
            for (c, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = c;
                }
            }
            best as u32 + 1
        })
        .collect()
}
