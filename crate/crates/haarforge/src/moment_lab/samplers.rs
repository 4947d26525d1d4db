use crate::error::{domain, Result};
use crate::matrix_engine::{build_v_matrix, haar_matrix, ginibre_matrix, DenseOperator, EnsembleConfig, C64};
use crate::perm_core::{sample_phased_permutation, sample_uniform_permutation};
use crate::rng::StreamRng;

/// Source of random N × N matrices for moment estimates.
pub trait MatrixSampler: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut StreamRng) -> Result<DenseOperator>;
    fn label(&self) -> String;
}

/// Always returns the same matrix.
#[derive(Clone, Debug)]
pub struct FixedSampler(DenseOperator);

impl FixedSampler {
    pub fn new(u: DenseOperator) -> Self {
        Self(u)
    }
}

impl MatrixSampler for FixedSampler {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn sample(&self, _rng: &mut StreamRng) -> Result<DenseOperator> {
        Ok(self.0.clone())
    }

    fn label(&self) -> String {
        "fixed".into()
    }
}

macro_rules! dim_sampler {
    ($name:ident, $label:literal, |$n:ident, $rng:ident| $body:expr) => {
        #[derive(Clone, Copy, Debug)]
        pub struct $name {
            n: usize,
        }

        impl $name {
            pub fn new(n: usize) -> Self {
                Self { n }
            }
        }

        impl MatrixSampler for $name {
            fn dim(&self) -> usize {
                self.n
            }

            fn sample(&self, $rng: &mut StreamRng) -> Result<DenseOperator> {
                let $n = self.n;
                $body
            }

            fn label(&self) -> String {
                $label.into()
            }
        }
    };
}

dim_sampler!(HaarSampler, "haar", |n, rng| Ok(DenseOperator::from_matrix(&haar_matrix(n, rng)?)));
dim_sampler!(GinibreSampler, "ginibre", |n, rng| Ok(DenseOperator::from_matrix(&ginibre_matrix(n, rng)?)));
dim_sampler!(PhasedPermutationSampler, "phased_permutation", |n, rng| Ok(sample_phased_permutation(n, rng)?.to_dense()));
dim_sampler!(PermutationSampler, "permutation", |n, rng| Ok(sample_uniform_permutation(n, rng)?.to_dense()));

/// Draws of V = Z_L (Π_j e^{iθA_m^{(j)}}) Z_R.
#[derive(Clone, Debug)]
pub struct VEnsembleSampler {
    cfg: EnsembleConfig,
    theta: f64,
}

impl VEnsembleSampler {
    pub fn new(cfg: EnsembleConfig) -> Result<Self> {
        cfg.validate()?;
        let theta = cfg.resolved_theta()?;
        Ok(Self { cfg, theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

impl MatrixSampler for VEnsembleSampler {
    fn dim(&self) -> usize {
        self.cfg.n
    }

    fn sample(&self, rng: &mut StreamRng) -> Result<DenseOperator> {
        let v = build_v_matrix(self.cfg.n, self.cfg.m, self.cfg.ell, self.theta, rng)?;
        Ok(DenseOperator::from_matrix(&v))
    }

    fn label(&self) -> String {
        format!("V(N={}, m={}, ell={})", self.cfg.n, self.cfg.m, self.cfg.ell)
    }
}

/// Σ_j w_j Z_j over independent phased permutations (not unitary in general).
#[derive(Clone, Debug)]
pub struct WeightedSumSampler {
    n: usize,
    weights: Vec<f64>,
}

impl WeightedSumSampler {
    pub fn new(n: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
            return domain("weights must be a non-empty list of finite numbers");
        }
        Ok(Self { n, weights })
    }
}

impl MatrixSampler for WeightedSumSampler {
    fn dim(&self) -> usize {
        self.n
    }

    fn sample(&self, rng: &mut StreamRng) -> Result<DenseOperator> {
        let mut out = DenseOperator::zeros(self.n);
        for &w in &self.weights {
            let z = sample_phased_permutation(self.n, rng)?;
            for (c, (&r, &p)) in z.perm().mapping().iter().zip(z.phases()).enumerate() {
                out.add_at(r, c, p * C64::new(w, 0.0));
            }
        }
        Ok(out)
    }

    fn label(&self) -> String {
        format!("weighted_sum(m={})", self.weights.len())
    }
}
