use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::bucket::TensorShapes;
use crate::{Error, Result};

pub const CORPUS_CONFIG_VERSION: u32 = 1;

/// Where per-sample sizes come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SizeDistribution {
    /// `round(exp(N(mu, sigma)))` clipped to `[min, max]`.
    Lognormal { mu: f64, sigma: f64, min: u64, max: u64 },
    /// Sizes drawn uniformly with replacement from a file of positive
    /// integers, one per line (`#` starts a comment). A relative path is
    /// resolved against the config file's directory.
    Empirical { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub version: u32,
    pub n_samples: usize,
    pub seed: u64,
    /// Feature width of the per-node tensor.
    pub node_width: u64,
    pub sizes: SizeDistribution,
}

impl CorpusConfig {
    /// Clipped lognormal around 40 nodes, right-skewed like small-molecule
    /// graphs.
    pub fn reference() -> Self {
        Self {
            version: CORPUS_CONFIG_VERSION,
            n_samples: 10_000,
            seed: 7,
            node_width: 16,
            sizes: SizeDistribution::Lognormal { mu: 40f64.ln(), sigma: 0.35, min: 8, max: 160 },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: CorpusConfig = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if let SizeDistribution::Empirical { path: p } = &mut cfg.sizes {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CORPUS_CONFIG_VERSION {
            return Err(Error::UnsupportedVersion { found: self.version, supported: CORPUS_CONFIG_VERSION });
        }
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        if self.node_width == 0 {
            return Err(Error::Config("node_width must be positive".into()));
        }
        if let SizeDistribution::Lognormal { mu, sigma, min, max } = self.sizes {
            if !mu.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::Config(format!("lognormal needs finite mu and sigma > 0, got {mu}, {sigma}")));
            }
            if min == 0 || min > max {
                return Err(Error::Config(format!("size clip [{min}, {max}] must satisfy 1 <= min <= max")));
            }
        }
        Ok(())
    }
}

/// Sizes of a generated corpus plus the size → tensor shape template
/// `nodes: [n, node_width]`, `adj: [n, n]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticCorpus {
    pub sizes: Vec<u64>,
    pub node_width: u64,
    pub min_size: u64,
    pub max_size: u64,
    pub seed: u64,
}

fn read_empirical(path: &Path) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<u64>() {
            Ok(v) if v > 0 => out.push(v),
            _ => return Err(Error::Parse { line: i + 1, msg: format!("expected a positive integer size, got `{line}`") }),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("empirical size file"));
    }
    Ok(out)
}

impl SyntheticCorpus {
    pub fn generate(cfg: &CorpusConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (sizes, min_size, max_size) = match &cfg.sizes {
            SizeDistribution::Lognormal { mu, sigma, min, max } => {
                let dist = LogNormal::new(*mu, *sigma).map_err(|e| Error::Config(e.to_string()))?;
                let sizes = (0..cfg.n_samples)
                    .map(|_| {
                        let v: f64 = dist.sample(&mut rng);
                        (v.round().clamp(*min as f64, *max as f64)) as u64
                    })
                    .collect();
                (sizes, *min, *max)
            }
            SizeDistribution::Empirical { path } => {
                let pool = read_empirical(path)?;
                let lo = *pool.iter().min().expect("non-empty");
                let hi = *pool.iter().max().expect("non-empty");
                let sizes = (0..cfg.n_samples).map(|_| pool[rng.random_range(0..pool.len())]).collect();
                (sizes, lo, hi)
            }
        };
        Ok(Self { sizes, node_width: cfg.node_width, min_size, max_size, seed: cfg.seed })
    }

    /// A corpus with the given sizes, for tests and custom studies.
    pub fn from_sizes(sizes: Vec<u64>, node_width: u64) -> Result<Self> {
        let (Some(&min_size), Some(&max_size)) = (sizes.iter().min(), sizes.iter().max()) else {
            return Err(Error::EmptyInput("corpus sizes"));
        };
        if min_size == 0 {
            return Err(Error::Validation("corpus sizes must be positive".into()));
        }
        Ok(Self { sizes, node_width, min_size, max_size, seed: 0 })
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn shapes(&self, i: usize) -> TensorShapes {
        let n = self.sizes[i];
        TensorShapes::from([("adj".to_owned(), vec![n, n]), ("nodes".to_owned(), vec![n, self.node_width])])
    }

    /// Cost-model features of a sample: `[n, n^2]`.
    pub fn features(&self, i: usize) -> Vec<f64> {
        let n = self.sizes[i] as f64;
        vec![n, n * n]
    }

    pub fn feature_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.features(i)).collect()
    }

    pub fn histogram(&self) -> BTreeMap<u64, u64> {
        histogram(self.sizes.iter().copied())
    }

    /// Most frequent size; the smallest on ties.
    pub fn modal_size(&self) -> u64 {
        let h = self.histogram();
        let best = h.values().copied().max().unwrap_or(0);
        h.into_iter().find(|&(_, c)| c == best).map_or(0, |(s, _)| s)
    }

    /// Nearest-rank 90th percentile of the sizes.
    pub fn top_decile_threshold(&self) -> u64 {
        let mut s = self.sizes.clone();
        s.sort_unstable();
        let rank = (s.len() * 9).div_ceil(10).max(1);
        s[rank - 1]
    }
}

pub fn histogram(sizes: impl IntoIterator<Item = u64>) -> BTreeMap<u64, u64> {
    let mut h = BTreeMap::new();
    for s in sizes {
        *h.entry(s).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_seeded_and_clipped() {
        let cfg = CorpusConfig::reference();
        let a = SyntheticCorpus::generate(&cfg).unwrap();
        let b = SyntheticCorpus::generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10_000);
        assert!(a.sizes.iter().all(|&s| (8..=160).contains(&s)));
        let mut other = cfg.clone();
        other.seed = 8;
        assert_ne!(SyntheticCorpus::generate(&other).unwrap().sizes, a.sizes);
        // median of the lognormal is 40
        let mut s = a.sizes.clone();
        s.sort_unstable();
        assert!((38..=42).contains(&s[5000]), "{}", s[5000]);
    }

    #[test]
    fn shapes_and_features() {
        let c = SyntheticCorpus::from_sizes(vec![3, 5], 4).unwrap();
        assert_eq!(c.shapes(0)["nodes"], vec![3, 4]);
        assert_eq!(c.shapes(1)["adj"], vec![5, 5]);
        assert_eq!(c.features(1), vec![5.0, 25.0]);
    }

    #[test]
    fn mode_and_decile() {
        let c = SyntheticCorpus::from_sizes(vec![1, 2, 2, 3, 3, 4, 5, 6, 7, 8], 1).unwrap();
        assert_eq!(c.modal_size(), 2);
        assert_eq!(c.top_decile_threshold(), 7);
        assert_eq!(c.histogram()[&3], 2);
    }

    #[test]
    fn config_round_trip_and_empirical() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("sizes.txt"), "# sizes\n4\n9\n\n4\n").unwrap();
        let cfg_path = dir.path().join("c.json");
        std::fs::write(
            &cfg_path,
            r#"{"version":1,"n_samples":50,"seed":1,"node_width":2,"sizes":{"kind":"empirical","path":"sizes.txt"}}"#,
        )
        .unwrap();
        let cfg = CorpusConfig::load(&cfg_path).unwrap();
        let c = SyntheticCorpus::generate(&cfg).unwrap();
        assert!(c.sizes.iter().all(|&s| s == 4 || s == 9));
        assert_eq!((c.min_size, c.max_size), (4, 9));

        let text = serde_json::to_string(&CorpusConfig::reference()).unwrap();
        let back: CorpusConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, CorpusConfig::reference());

        std::fs::write(dir.path().join("sizes.txt"), "4\nx\n").unwrap();
        assert!(matches!(SyntheticCorpus::generate(&cfg), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = CorpusConfig::reference();
        cfg.n_samples = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = CorpusConfig::reference();
        cfg.sizes = SizeDistribution::Lognormal { mu: 1.0, sigma: 0.0, min: 1, max: 2 };
        assert!(cfg.validate().is_err());
        let mut cfg = CorpusConfig::reference();
        cfg.sizes = SizeDistribution::Lognormal { mu: 1.0, sigma: 1.0, min: 5, max: 2 };
        assert!(cfg.validate().is_err());
    }
}
