//! Synthetic benchmark logs with planted structure.
//!
//! Every example is given exactly one role (easy, contaminated, cluster
//! member, ...) and its predictions and embedding are generated to match, so
//! the filter's output can be checked against known ground truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use smartfilter_core::model::{
    io, Dataset, EloTable, EmbeddingSet, Example, PredictionSet, PromptMode, RunConfig,
};
use smartfilter_core::Result;

const OPTIONS: usize = 4;
const LETTERS: [char; OPTIONS] = ['A', 'B', 'C', 'D'];

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub examples: usize,
    pub models: usize,
    pub dim: usize,
    pub seed: u64,
    /// Extra copies of existing examples; each copy gets the larger id.
    pub duplicate_copies: usize,
    pub anomalous: usize,
    pub anomalous_subset: String,
    /// Unanimously easy examples, including the overlaps below.
    pub easy: usize,
    /// Choices-only contaminated examples, including the overlap with easy.
    pub contaminated: usize,
    pub easy_and_contaminated: usize,
    pub cluster_sizes: Vec<usize>,
    /// The first this-many clusters consist entirely of easy examples; the
    /// rest contain no easy or contaminated members.
    pub all_easy_clusters: usize,
    /// Hub-to-member cosine distance inside a cluster. Members are mutually
    /// orthogonal offsets of the hub, so member pairs sit near twice this.
    pub cluster_distance: f64,
    pub wrong_gt: usize,
    /// Confident for all models but one, which holds the gold answer below
    /// the threshold. These become easy for some model subsets.
    pub near_easy: usize,
    pub subsets: Vec<String>,
}

impl FixtureSpec {
    /// 2,000 examples: 1% duplicates, a 5% anomalous subset, 30% easy, 5%
    /// contaminated and 8% of examples in tight clusters.
    pub fn planted() -> Self {
        FixtureSpec {
            examples: 2000,
            models: 7,
            dim: 32,
            seed: 17,
            duplicate_copies: 20,
            anomalous: 100,
            anomalous_subset: "moral_scenarios".into(),
            easy: 600,
            contaminated: 100,
            easy_and_contaminated: 20,
            cluster_sizes: [vec![3; 20], vec![4; 10], vec![5; 12]].concat(),
            all_easy_clusters: 5,
            cluster_distance: 0.006,
            wrong_gt: 10,
            near_easy: 40,
            subsets: [
                "astronomy",
                "biology",
                "chemistry",
                "history",
                "law",
                "physics",
            ]
            .map(String::from)
            .to_vec(),
        }
    }

    /// 1,000 examples whose flag counts land on the nearest attainable
    /// percentages of the ARC row of the filtering table: 64.41% easy,
    /// 3.45% contaminated, 12.57% similar, 0.22% prefiltered, 68.92% total.
    pub fn arc_table_shape() -> Self {
        FixtureSpec {
            examples: 1000,
            models: 7,
            dim: 32,
            seed: 5,
            duplicate_copies: 2,
            anomalous: 0,
            anomalous_subset: "moral_scenarios".into(),
            easy: 644,
            contaminated: 35,
            easy_and_contaminated: 20,
            cluster_sizes: vec![3; 126],
            all_easy_clusters: 40,
            cluster_distance: 0.006,
            wrong_gt: 0,
            near_easy: 0,
            subsets: vec!["challenge".into()],
        }
    }

    /// A small, fast fixture for unit-level CLI tests.
    pub fn small() -> Self {
        FixtureSpec {
            examples: 300,
            models: 7,
            dim: 16,
            seed: 3,
            duplicate_copies: 3,
            anomalous: 15,
            anomalous_subset: "moral_scenarios".into(),
            easy: 90,
            contaminated: 15,
            easy_and_contaminated: 3,
            cluster_sizes: [vec![3; 4], vec![4; 3]].concat(),
            all_easy_clusters: 1,
            cluster_distance: 0.006,
            wrong_gt: 3,
            near_easy: 10,
            subsets: ["biology", "history"].map(String::from).to_vec(),
        }
    }

    pub fn model_names(&self) -> Vec<String> {
        (0..self.models)
            .map(|m| format!("model-{}", (b'a' + m as u8) as char))
            .collect()
    }

    fn clustered(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    fn easy_in_clusters(&self) -> usize {
        self.cluster_sizes[..self.all_easy_clusters].iter().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    /// Copy id -> original id.
    pub duplicate_of: BTreeMap<String, String>,
    pub anomalous: BTreeSet<String>,
    pub easy: BTreeSet<String>,
    pub contaminated: BTreeSet<String>,
    /// Sorted members per cluster, clusters sorted by first member.
    pub clusters: Vec<Vec<String>>,
    pub wrong_gt: BTreeSet<String>,
    pub near_easy: BTreeSet<String>,
}

impl GroundTruth {
    pub fn clustered(&self) -> BTreeSet<&str> {
        self.clusters.iter().flatten().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub spec: FixtureSpec,
    pub dataset: Dataset,
    pub predictions: Vec<PredictionSet>,
    pub embeddings: EmbeddingSet,
    pub elo: EloTable,
    pub config: RunConfig,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub dataset: PathBuf,
    pub predictions: PathBuf,
    pub embeddings: PathBuf,
    pub manifest: PathBuf,
    pub elo: PathBuf,
    pub config: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Plain,
    Easy,
    EasyContaminated,
    Contaminated,
    WrongGt,
    NearEasy,
    Anomalous,
}

/// A probability vector with `top` at index `top_index` and the remainder
/// spread so that no other entry exceeds half of it.
fn distribution(rng: &mut ChaCha8Rng, top_index: usize, top: f64) -> Vec<f64> {
    let weights: Vec<f64> = (0..OPTIONS).map(|_| rng.gen_range(1.0..2.0)).collect();
    let others: f64 = (0..OPTIONS)
        .filter(|&i| i != top_index)
        .map(|i| weights[i])
        .sum();
    (0..OPTIONS)
        .map(|i| {
            if i == top_index {
                top
            } else {
                (1.0 - top) * weights[i] / others
            }
        })
        .collect()
}

fn wrong_option(rng: &mut ChaCha8Rng, gold: usize) -> usize {
    (gold + rng.gen_range(1..OPTIONS)) % OPTIONS
}

fn confident(rng: &mut ChaCha8Rng, gold: usize) -> Vec<f64> {
    let p = rng.gen_range(0.82..0.99);
    distribution(rng, gold, p)
}

/// Below-threshold full-prompt answer: correct with probability `skill`.
fn ordinary(rng: &mut ChaCha8Rng, gold: usize, skill: f64) -> Vec<f64> {
    let p = rng.gen_range(0.40..0.78);
    if rng.gen_bool(skill) {
        distribution(rng, gold, p)
    } else {
        let w = wrong_option(rng, gold);
        distribution(rng, w, p)
    }
}

fn unit(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    unit(&mut v);
    v
}

/// Hub plus `size - 1` members offset along mutually orthogonal directions
/// that are also orthogonal to the hub.
fn star(rng: &mut ChaCha8Rng, dim: usize, size: usize, distance: f64) -> Vec<Vec<f64>> {
    let hub = gaussian(rng, dim);
    let r = (1.0 / (1.0 - distance).powi(2) - 1.0).sqrt();
    let mut basis: Vec<Vec<f64>> = vec![hub.clone()];
    let mut out = vec![hub.clone()];
    while out.len() < size {
        let mut d = gaussian(rng, dim);
        for b in &basis {
            let dot: f64 = d.iter().zip(b).map(|(x, y)| x * y).sum();
            d.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        unit(&mut d);
        let mut member: Vec<f64> = hub.iter().zip(&d).map(|(h, e)| h + r * e).collect();
        unit(&mut member);
        basis.push(d);
        out.push(member);
    }
    out
}

pub fn generate(spec: &FixtureSpec) -> Fixture {
    let n = spec.examples;
    let easy_outside = spec.easy - spec.easy_in_clusters();
    let needed = spec.clustered()
        + easy_outside
        + (spec.contaminated - spec.easy_and_contaminated)
        + spec.wrong_gt
        + spec.near_easy
        + spec.anomalous
        + 2 * spec.duplicate_copies;
    assert!(
        needed <= n,
        "fixture needs {needed} examples, spec allows {n}"
    );
    assert!(spec.easy_and_contaminated <= easy_outside);
    assert!(spec.models >= 2 && spec.dim >= 8);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ids: Vec<String> = (0..n).map(|i| format!("ex{i:05}")).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut take = |count: usize| {
        let slice = order[cursor..cursor + count].to_vec();
        cursor += count;
        slice
    };

    let mut roles = vec![Role::Plain; n];
    let mut truth = GroundTruth::default();
    let mut cluster_members: Vec<Vec<usize>> = Vec::new();
    for (c, &size) in spec.cluster_sizes.iter().enumerate() {
        let members = take(size);
        if c < spec.all_easy_clusters {
            members.iter().for_each(|&i| roles[i] = Role::Easy);
        }
        cluster_members.push(members);
    }
    for (k, i) in take(easy_outside).into_iter().enumerate() {
        roles[i] = if k < spec.easy_and_contaminated {
            Role::EasyContaminated
        } else {
            Role::Easy
        };
    }
    let assign = |roles: &mut Vec<Role>, idx: Vec<usize>, role| {
        idx.into_iter().for_each(|i| roles[i] = role)
    };
    assign(
        &mut roles,
        take(spec.contaminated - spec.easy_and_contaminated),
        Role::Contaminated,
    );
    assign(&mut roles, take(spec.wrong_gt), Role::WrongGt);
    assign(&mut roles, take(spec.near_easy), Role::NearEasy);
    assign(&mut roles, take(spec.anomalous), Role::Anomalous);
    let mut copies: BTreeMap<usize, usize> = BTreeMap::new();
    for _ in 0..spec.duplicate_copies {
        let pair = take(2);
        copies.insert(pair[0].max(pair[1]), pair[0].min(pair[1]));
    }

    // Content.
    let golds: Vec<usize> = (0..n).map(|_| rng.gen_range(0..OPTIONS)).collect();
    let subsets: Vec<Option<String>> = (0..n)
        .map(|i| match roles[i] {
            Role::Anomalous => Some(spec.anomalous_subset.clone()),
            _ => spec.subsets.choose(&mut rng).cloned(),
        })
        .collect();
    let mut examples: Vec<Example> = (0..n)
        .map(|i| Example {
            id: ids[i].clone(),
            question: format!("Question {i}: which option completes item {}?", i * 7 + 3),
            options: LETTERS
                .iter()
                .map(|l| format!("{l} for item {i}"))
                .collect(),
            gold_index: golds[i],
            subset: subsets[i].clone(),
        })
        .collect();
    for (&copy, &orig) in &copies {
        let mut dup = examples[orig].clone();
        dup.id = ids[copy].clone();
        // Extra whitespace must not hide a duplicate.
        dup.question = format!("  {}", dup.question.replace(' ', "  "));
        examples[copy] = dup;
    }

    // Predictions.
    let models = spec.model_names();
    let skills: Vec<f64> = (0..spec.models)
        .map(|m| 0.55 + 0.35 * m as f64 / (spec.models - 1) as f64)
        .collect();
    let dissenter: Vec<usize> = (0..n).map(|_| rng.gen_range(0..spec.models)).collect();
    let mut full: Vec<BTreeMap<String, Vec<f64>>> = vec![BTreeMap::new(); spec.models];
    let mut choices: Vec<BTreeMap<String, Vec<f64>>> = vec![BTreeMap::new(); spec.models];
    for i in 0..n {
        let gold = golds[i];
        for m in 0..spec.models {
            let fp = match roles[i] {
                Role::Easy | Role::EasyContaminated => confident(&mut rng, gold),
                Role::NearEasy if m == dissenter[i] => {
                    let p = rng.gen_range(0.45..0.75);
                    distribution(&mut rng, gold, p)
                }
                Role::NearEasy => confident(&mut rng, gold),
                Role::WrongGt => {
                    let w = wrong_option(&mut rng, gold);
                    let p = rng.gen_range(0.82..0.95);
                    distribution(&mut rng, w, p)
                }
                _ => ordinary(&mut rng, gold, skills[m]),
            };
            let co = match roles[i] {
                Role::Contaminated | Role::EasyContaminated => confident(&mut rng, gold),
                _ => ordinary(&mut rng, gold, 0.3),
            };
            full[m].insert(ids[i].clone(), fp);
            choices[m].insert(ids[i].clone(), co);
        }
    }
    for (&copy, &orig) in &copies {
        for m in 0..spec.models {
            let fp = full[m][&ids[orig]].clone();
            let co = choices[m][&ids[orig]].clone();
            full[m].insert(ids[copy].clone(), fp);
            choices[m].insert(ids[copy].clone(), co);
        }
    }
    let mut predictions = Vec::new();
    for (m, model) in models.iter().enumerate() {
        predictions.push(PredictionSet {
            model: model.clone(),
            mode: PromptMode::FullPrompt,
            entries: std::mem::take(&mut full[m]),
        });
        predictions.push(PredictionSet {
            model: model.clone(),
            mode: PromptMode::ChoicesOnly,
            entries: std::mem::take(&mut choices[m]),
        });
    }

    // Embeddings.
    let mut vectors: Vec<Option<Vec<f64>>> = vec![None; n];
    for members in &cluster_members {
        for (&i, v) in members.iter().zip(star(
            &mut rng,
            spec.dim,
            members.len(),
            spec.cluster_distance,
        )) {
            vectors[i] = Some(v);
        }
    }
    for slot in vectors.iter_mut().filter(|v| v.is_none()) {
        *slot = Some(gaussian(&mut rng, spec.dim));
    }
    for (&copy, &orig) in &copies {
        vectors[copy] = vectors[orig].clone();
    }
    let data: Vec<f32> = vectors
        .into_iter()
        .flat_map(|v| v.expect("filled"))
        .map(|x| x as f32)
        .collect();
    let embeddings = EmbeddingSet::new(spec.dim, ids.clone(), data).expect("valid embeddings");

    let elo = EloTable {
        scores: models
            .iter()
            .zip(&skills)
            .map(|(m, s)| {
                (
                    m.clone(),
                    (1000.0 + 400.0 * s + rng.gen_range(-15.0..15.0)).round(),
                )
            })
            .collect(),
    };

    for i in 0..n {
        let id = ids[i].clone();
        match roles[i] {
            Role::Easy => {
                truth.easy.insert(id);
            }
            Role::EasyContaminated => {
                truth.easy.insert(id.clone());
                truth.contaminated.insert(id);
            }
            Role::Contaminated => {
                truth.contaminated.insert(id);
            }
            Role::WrongGt => {
                truth.wrong_gt.insert(id);
            }
            Role::NearEasy => {
                truth.near_easy.insert(id);
            }
            Role::Anomalous => {
                truth.anomalous.insert(id);
            }
            Role::Plain => {}
        }
    }
    truth.duplicate_of = copies
        .iter()
        .map(|(&c, &o)| (ids[c].clone(), ids[o].clone()))
        .collect();
    truth.clusters = cluster_members
        .iter()
        .map(|m| {
            let mut v: Vec<String> = m.iter().map(|&i| ids[i].clone()).collect();
            v.sort();
            v
        })
        .collect();
    truth.clusters.sort();

    let config = RunConfig {
        anomalous_subsets: if spec.anomalous > 0 {
            vec![spec.anomalous_subset.clone()]
        } else {
            Vec::new()
        },
        ..RunConfig::default()
    };

    Fixture {
        spec: spec.clone(),
        dataset: Dataset::new(examples).expect("valid dataset"),
        predictions,
        embeddings,
        elo,
        config,
        truth,
    }
}

impl Fixture {
    /// Writes every input file under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<FixturePaths> {
        let paths = FixturePaths {
            dataset: dir.join("dataset.jsonl"),
            predictions: dir.join("predictions"),
            embeddings: dir.join("embeddings.emb1"),
            manifest: dir.join("embeddings.manifest"),
            elo: dir.join("elo.csv"),
            config: dir.join("config.toml"),
        };
        fs::create_dir_all(&paths.predictions).map_err(|e| io_err(&paths.predictions, e))?;
        io::write_file(&paths.dataset, |w| io::write_dataset(w, &self.dataset))?;
        for set in &self.predictions {
            let path = paths
                .predictions
                .join(format!("{}.{}.jsonl", set.model, set.mode));
            io::write_file(&path, |w| io::write_predictions(w, set))?;
        }
        io::write_embeddings(&self.embeddings, &paths.embeddings, &paths.manifest)?;
        io::write_file(&paths.elo, |w| {
            writeln!(w, "model,elo")?;
            for (model, score) in &self.elo.scores {
                writeln!(w, "{model},{score}")?;
            }
            Ok(())
        })?;
        io::write_file(&paths.config, |w| {
            w.write_all(self.config.to_toml().as_bytes())
        })?;
        Ok(paths)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> smartfilter_core::Error {
    smartfilter_core::Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
