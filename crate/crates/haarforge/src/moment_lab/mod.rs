//! Moment operators M = E[U^{⊗k} ⊗ Ū^{⊗k}], vectorized row-major so that
//! M vec(X) = vec(E[U^{⊗k} X U^{†⊗k}]), with index (rows, cols) of X.
//!
//! Haar and Ginibre references live in the span of the permutation vectors
//! |σ)_{(r,c)} = Π_j δ(r_j, c_{σ(j)}) and are held as M = Φ C Φ^T, which keeps
//! norms cheap at N where N^{2k} × N^{2k} matrices would not fit.

mod experiments;
mod samplers;

pub use experiments::{
    design_report, freeness_exact, freeness_experiment, ginibre_norm_sq, lindeberg_bound, lindeberg_experiment,
    phased_permutation_distance_sq, trend_check, DesignCell, DesignReport, ExperimentRecord, TrendCheck,
};
pub use samplers::{
    FixedSampler, GinibreSampler, HaarSampler, MatrixSampler, PermutationSampler, PhasedPermutationSampler,
    VEnsembleSampler, WeightedSumSampler,
};

use std::str::FromStr;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::matrix_engine::{DenseOperator, C64};
use crate::partition_algebra::rational_to_f64;
use crate::perm_core::Permutation;
use crate::rng::{map_samples, mean_and_se, KahanSum};

/// Largest k for exact Weingarten and Wick references.
pub const MAX_EXACT_K: usize = 3;
/// Largest N^{2k} for materialized moment operators.
pub const DENSE_CAP: usize = 4096;
/// Largest N^{2k} for Monte-Carlo dense accumulation.
pub const MC_DENSE_CAP: usize = 1296;
/// Largest N^{2k} for dense spectral norms (full SVD).
pub const SPECTRAL_DENSE_CAP: usize = 1296;

fn superop_dim(k: usize, n: usize, cap: usize) -> Result<usize> {
    if n == 0 || k == 0 {
        return domain(format!("N and k must be positive (got N={n}, k={k})"));
    }
    n.checked_pow(2 * k as u32)
        .filter(|&d| d <= cap)
        .ok_or_else(|| Error::Resource(format!("N^(2k) = {n}^{} exceeds the cap {cap}", 2 * k)))
}

/// Exact Gram matrix N^{#cycles(σ^{-1}τ)} over `Permutation::all(k)`.
fn gram_exponents(perms: &[Permutation]) -> Vec<Vec<u32>> {
    perms
        .iter()
        .map(|s| {
            let si = s.invert();
            perms.iter().map(|t| si.compose(t).expect("same degree").cycle_count() as u32).collect()
        })
        .collect()
}

/// Exact Weingarten matrix Wg = G^{-1}, indexed by `Permutation::all(k)`.
/// Entry (σ, τ) is Wg(σ^{-1}τ, N).
pub fn weingarten_matrix(k: usize, n: usize) -> Result<Vec<Vec<BigRational>>> {
    if k == 0 || k > MAX_EXACT_K {
        return Err(Error::Resource(format!("exact Weingarten supports 1 <= k <= {MAX_EXACT_K}, got {k}")));
    }
    if n < k {
        return domain(format!("Gram matrix is singular for N < k (N={n}, k={k})"));
    }
    let perms = Permutation::all(k);
    let exps = gram_exponents(&perms);
    let size = perms.len();
    let nn = BigInt::from(n);
    let mut a: Vec<Vec<BigRational>> = exps
        .iter()
        .map(|row| row.iter().map(|&e| BigRational::from_integer(num_traits::pow(nn.clone(), e as usize))).collect())
        .collect();
    let mut inv: Vec<Vec<BigRational>> = (0..size)
        .map(|i| (0..size).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect())
        .collect();
    for col in 0..size {
        let Some(p) = (col..size).find(|&r| !a[r][col].is_zero()) else {
            return domain(format!("Gram matrix is singular at N={n}, k={k}"));
        };
        a.swap(col, p);
        inv.swap(col, p);
        let piv = a[col][col].clone();
        for j in 0..size {
            a[col][j] = &a[col][j] / &piv;
            inv[col][j] = &inv[col][j] / &piv;
        }
        for r in 0..size {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..size {
                let t = &f * &a[col][j];
                a[r][j] = &a[r][j] - t;
                let t = &f * &inv[col][j];
                inv[r][j] = &inv[r][j] - t;
            }
        }
    }
    Ok(inv)
}

/// Wg(σ, N) for σ ∈ S_k.
pub fn weingarten(sigma: &Permutation, n: usize) -> Result<BigRational> {
    let k = sigma.len();
    let wg = weingarten_matrix(k, n)?;
    let perms = Permutation::all(k);
    let j = perms.iter().position(|p| p == sigma).expect("all permutations listed");
    let e = perms.iter().position(|p| p.is_identity()).expect("identity listed");
    Ok(wg[e][j].clone())
}

/// Whether the index a = (r, c) lies in the support of |σ).
fn in_perm_vector(a: usize, k: usize, n: usize, sigma: &Permutation) -> bool {
    let mut digits = [0usize; 16];
    let mut x = a;
    for d in digits[..2 * k].iter_mut().rev() {
        *d = x % n;
        x /= n;
    }
    (0..k).all(|j| digits[j] == digits[k + sigma.image(j)])
}

/// M = Φ C Φ^T over the permutation vectors of S_k.
#[derive(Clone, Debug)]
pub struct PermBasisOperator {
    k: usize,
    n: usize,
    perms: Vec<Permutation>,
    coeffs: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl PermBasisOperator {
    pub fn new(k: usize, n: usize, coeffs: DMatrix<f64>) -> Result<Self> {
        if k == 0 || n == 0 {
            return domain("N and k must be positive");
        }
        if k > 6 {
            return Err(Error::Resource(format!("permutation basis supports k <= 6, got {k}")));
        }
        let perms = Permutation::all(k);
        if coeffs.nrows() != perms.len() || coeffs.ncols() != perms.len() {
            return domain(format!("coefficient matrix must be {0}x{0}", perms.len()));
        }
        let exps = gram_exponents(&perms);
        let gram = DMatrix::from_fn(perms.len(), perms.len(), |i, j| (n as f64).powi(exps[i][j] as i32));
        Ok(Self { k, n, perms, coeffs, gram })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn perms(&self) -> &[Permutation] {
        &self.perms
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.k != other.k || self.n != other.n {
            return domain(format!(
                "shape mismatch: (k={}, N={}) vs (k={}, N={})",
                self.k, self.n, other.k, other.n
            ));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { coeffs: &self.coeffs - &other.coeffs, ..self.clone() })
    }

    /// M² = Φ (C G C) Φ^T.
    pub fn square(&self) -> Self {
        Self { coeffs: &self.coeffs * &self.gram * &self.coeffs, ..self.clone() }
    }

    /// sqrt(tr(C^T G C G)).
    pub fn frobenius_norm(&self) -> f64 {
        let cg = &self.coeffs * &self.gram;
        let ctg = self.coeffs.transpose() * &self.gram;
        (ctg.component_mul(&cg.transpose())).sum().max(0.0).sqrt()
    }

    /// ‖L^T C L‖₂ with G = L L^T; Φ = Q L^T for an isometry Q.
    pub fn spectral_norm(&self) -> f64 {
        let eig = self.gram.clone().symmetric_eigen();
        let mut l = eig.eigenvectors.clone();
        for (j, &lam) in eig.eigenvalues.iter().enumerate() {
            let s = lam.max(0.0).sqrt();
            l.column_mut(j).scale_mut(s);
        }
        let core = l.transpose() * &self.coeffs * &l;
        core.singular_values().iter().copied().fold(0.0, f64::max)
    }

    /// ‖M^† vec(I) − vec(I)‖: the dual channel should fix the identity.
    pub fn trace_preservation_defect(&self) -> f64 {
        let e = self.perms.iter().position(|p| p.is_identity()).expect("identity listed");
        let mut y = self.coeffs.transpose() * self.gram.column(e);
        y[e] -= 1.0;
        (y.transpose() * &self.gram * &y)[(0, 0)].max(0.0).sqrt()
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        let ia: Vec<usize> = (0..self.perms.len()).filter(|&s| in_perm_vector(a, self.k, self.n, &self.perms[s])).collect();
        if ia.is_empty() {
            return 0.0;
        }
        let ib: Vec<usize> = (0..self.perms.len()).filter(|&s| in_perm_vector(b, self.k, self.n, &self.perms[s])).collect();
        ia.iter().flat_map(|&s| ib.iter().map(move |&t| (s, t))).map(|(s, t)| self.coeffs[(s, t)]).sum()
    }

    pub fn to_dense(&self) -> Result<DenseOperator> {
        let dim = superop_dim(self.k, self.n, DENSE_CAP)?;
        let support: Vec<(usize, Vec<usize>)> = (0..dim)
            .filter_map(|a| {
                let s: Vec<usize> =
                    (0..self.perms.len()).filter(|&s| in_perm_vector(a, self.k, self.n, &self.perms[s])).collect();
                (!s.is_empty()).then_some((a, s))
            })
            .collect();
        let mut out = DenseOperator::zeros(dim);
        for (a, sa) in &support {
            for (b, sb) in &support {
                let v: f64 = sa.iter().flat_map(|&s| sb.iter().map(move |&t| (s, t))).map(|(s, t)| self.coeffs[(s, t)]).sum();
                out.set(*a, *b, C64::new(v, 0.0));
            }
        }
        Ok(out)
    }
}

/// Vectorized k-th moment superoperator.
#[derive(Clone, Debug)]
pub enum MomentOperator {
    Dense { k: usize, n: usize, matrix: DenseOperator },
    PermBasis(PermBasisOperator),
}

impl MomentOperator {
    pub fn k(&self) -> usize {
        match self {
            Self::Dense { k, .. } => *k,
            Self::PermBasis(p) => p.k,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Dense { n, .. } => *n,
            Self::PermBasis(p) => p.n,
        }
    }

    pub fn to_dense(&self) -> Result<DenseOperator> {
        match self {
            Self::Dense { matrix, .. } => Ok(matrix.clone()),
            Self::PermBasis(p) => p.to_dense(),
        }
    }

    pub fn entry(&self, a: usize, b: usize) -> C64 {
        match self {
            Self::Dense { matrix, .. } => matrix.get(a, b),
            Self::PermBasis(p) => C64::new(p.entry(a, b), 0.0),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match self {
            Self::Dense { matrix, .. } => matrix.frobenius_norm(),
            Self::PermBasis(p) => p.frobenius_norm(),
        }
    }

    /// ‖M² − M‖_F.
    pub fn idempotence_defect(&self) -> Result<f64> {
        match self {
            Self::Dense { matrix, .. } => Ok(matrix.matmul(matrix)?.sub(matrix)?.frobenius_norm()),
            Self::PermBasis(p) => Ok(p.square().sub(p)?.frobenius_norm()),
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        match self {
            Self::Dense { matrix, .. } => matrix.hermiticity_defect(),
            Self::PermBasis(p) => (&p.coeffs - p.coeffs.transpose()).amax(),
        }
    }

    pub fn trace_preservation_defect(&self) -> Result<f64> {
        match self {
            Self::PermBasis(p) => Ok(p.trace_preservation_defect()),
            Self::Dense { k, n, matrix } => {
                let nk = n.pow(*k as u32);
                let vec_i: Vec<usize> = (0..nk).map(|r| r * nk + r).collect();
                let dim = matrix.dim();
                let mut sq = 0.0;
                for b in 0..dim {
                    let mut s: C64 = vec_i.iter().map(|&a| matrix.get(a, b).conj()).sum();
                    if vec_i.binary_search(&b).is_ok() {
                        s -= 1.0;
                    }
                    sq += s.norm_sqr();
                }
                Ok(sq.sqrt())
            }
        }
    }
}

/// Exact Haar moment Σ_{σ,τ} Wg(σ^{-1}τ, N) |σ)(τ|.
pub fn haar_moment_operator(k: usize, n: usize) -> Result<MomentOperator> {
    let wg = weingarten_matrix(k, n)?;
    let size = wg.len();
    let c = DMatrix::from_fn(size, size, |i, j| rational_to_f64(&wg[i][j]));
    Ok(MomentOperator::PermBasis(PermBasisOperator::new(k, n, c)?))
}

/// Exact Ginibre moment: each of the k! Wick pairings of G with Ḡ gives |π)(π|/N^k.
pub fn ginibre_moment_operator(k: usize, n: usize) -> Result<MomentOperator> {
    if k == 0 || k > MAX_EXACT_K {
        return Err(Error::Resource(format!("exact Ginibre moments support 1 <= k <= {MAX_EXACT_K}, got {k}")));
    }
    if n == 0 {
        return domain("N must be positive");
    }
    let size = (1..=k).product::<usize>();
    let c = DMatrix::from_diagonal_element(size, size, (n as f64).powi(-(k as i32)));
    Ok(MomentOperator::PermBasis(PermBasisOperator::new(k, n, c)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Frobenius,
    Spectral,
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frobenius" => Ok(Self::Frobenius),
            "spectral" => Ok(Self::Spectral),
            _ => domain(format!("unknown norm '{s}' (expected frobenius or spectral)")),
        }
    }
}

fn dense_spectral_norm(m: &DenseOperator) -> Result<f64> {
    if m.dim() > SPECTRAL_DENSE_CAP {
        return Err(Error::Resource(format!("dense spectral norm needs dim <= {SPECTRAL_DENSE_CAP}, got {}", m.dim())));
    }
    Ok(m.to_matrix().singular_values().iter().copied().fold(0.0, f64::max))
}

/// Norm of M1 − M2. Two permutation-basis operators never leave the basis.
pub fn moment_distance(m1: &MomentOperator, m2: &MomentOperator, kind: NormKind) -> Result<f64> {
    if m1.k() != m2.k() || m1.n() != m2.n() {
        return domain(format!(
            "shape mismatch: (k={}, N={}) vs (k={}, N={})",
            m1.k(),
            m1.n(),
            m2.k(),
            m2.n()
        ));
    }
    if let (MomentOperator::PermBasis(a), MomentOperator::PermBasis(b)) = (m1, m2) {
        let d = a.sub(b)?;
        return Ok(match kind {
            NormKind::Frobenius => d.frobenius_norm(),
            NormKind::Spectral => d.spectral_norm(),
        });
    }
    let d = m1.to_dense()?.sub(&m2.to_dense()?)?;
    match kind {
        NormKind::Frobenius => Ok(d.frobenius_norm()),
        NormKind::Spectral => dense_spectral_norm(&d),
    }
}

fn tensor_power(u: &DenseOperator, k: usize) -> DenseOperator {
    let mut w = u.clone();
    for _ in 1..k {
        w = w.kron(u);
    }
    w
}

/// Adds weight · W ⊗ W̄ into `acc` (row-major dim × dim), skipping zero entries of W.
fn accumulate_moment(acc: &mut [C64], w: &DenseOperator, weight: f64) {
    let d = w.dim();
    let dim = d * d;
    let nz: Vec<(usize, usize, C64)> = (0..d)
        .flat_map(|r| (0..d).map(move |c| (r, c)))
        .filter_map(|(r, c)| {
            let v = w.get(r, c);
            (v != C64::new(0.0, 0.0)).then_some((r, c, v))
        })
        .collect();
    for &(r, rp, x) in &nz {
        for &(c, cp, y) in &nz {
            acc[(r * d + c) * dim + rp * d + cp] += x * y.conj() * weight;
        }
    }
}

/// Exact average of W ⊗ W̄ over a finite ensemble with uniform weights.
pub fn ensemble_moment_operator(members: &[DenseOperator], k: usize) -> Result<MomentOperator> {
    let Some(first) = members.first() else {
        return domain("empty ensemble");
    };
    let n = first.dim();
    if members.iter().any(|u| u.dim() != n) {
        return domain("ensemble members have different dimensions");
    }
    let dim = superop_dim(k, n, DENSE_CAP)?;
    let mut acc = vec![C64::new(0.0, 0.0); dim * dim];
    let w = 1.0 / members.len() as f64;
    for u in members {
        accumulate_moment(&mut acc, &tensor_power(u, k), w);
    }
    Ok(MomentOperator::Dense { k, n, matrix: DenseOperator::from_entries(dim, acc)? })
}

/// Monte-Carlo moment with entrywise batch-means standard errors.
#[derive(Clone, Debug)]
pub struct McMoment {
    pub operator: MomentOperator,
    /// Row-major, same layout as the operator.
    pub std_error: Vec<f64>,
    pub n_samples: usize,
    pub n_batches: usize,
}

impl McMoment {
    pub fn max_std_error(&self) -> f64 {
        self.std_error.iter().copied().fold(0.0, f64::max)
    }
}

/// Batches used for standard errors.
pub const MC_BATCHES: usize = 32;

pub fn mc_moment_operator(sampler: &dyn MatrixSampler, k: usize, n_samples: usize, seed: u64) -> Result<McMoment> {
    if n_samples < 2 {
        return domain("n_samples must be at least 2");
    }
    let n = sampler.dim();
    let dim = superop_dim(k, n, MC_DENSE_CAP)?;
    let samples: Vec<DenseOperator> =
        map_samples(seed, n_samples, |rng| sampler.sample(rng)).into_iter().collect::<Result<_>>()?;
    let n_batches = n_samples.min(MC_BATCHES);
    let zero = C64::new(0.0, 0.0);
    let mut total = vec![zero; dim * dim];
    let mut mean_sum = vec![zero; dim * dim];
    let mut sq_sum = vec![0.0f64; dim * dim];
    let mut batch = vec![zero; dim * dim];
    for b in 0..n_batches {
        let lo = b * n_samples / n_batches;
        let hi = (b + 1) * n_samples / n_batches;
        batch.iter_mut().for_each(|x| *x = zero);
        for u in &samples[lo..hi] {
            accumulate_moment(&mut batch, &tensor_power(u, k), 1.0);
        }
        let inv = 1.0 / (hi - lo) as f64;
        for i in 0..dim * dim {
            total[i] += batch[i];
            let m = batch[i] * inv;
            mean_sum[i] += m;
            sq_sum[i] += m.norm_sqr();
        }
    }
    let nb = n_batches as f64;
    let std_error = (0..dim * dim)
        .map(|i| {
            let mbar = mean_sum[i] / nb;
            let var = ((sq_sum[i] / nb - mbar.norm_sqr()) * nb / (nb - 1.0)).max(0.0);
            (var / nb).sqrt()
        })
        .collect();
    let scale = 1.0 / n_samples as f64;
    let matrix = DenseOperator::from_entries(dim, total.into_iter().map(|x| x * scale).collect())?;
    Ok(McMoment { operator: MomentOperator::Dense { k, n, matrix }, std_error, n_samples, n_batches })
}

/// Monte-Carlo estimates of selected entries of the moment operator, with
/// plain standard errors. Works at any N since nothing of size N^{2k} is formed.
pub fn mc_moment_entries(
    sampler: &dyn MatrixSampler,
    k: usize,
    entries: &[(usize, usize)],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<(C64, f64)>> {
    if n_samples < 2 {
        return domain("n_samples must be at least 2");
    }
    let n = sampler.dim();
    let nk = n
        .checked_pow(k as u32)
        .ok_or_else(|| Error::Resource(format!("N^k overflows for N={n}, k={k}")))?;
    let dim = nk.checked_mul(nk).ok_or_else(|| Error::Resource("N^(2k) overflows".into()))?;
    if entries.iter().any(|&(a, b)| a >= dim || b >= dim) {
        return domain(format!("entry index out of range for dimension {dim}"));
    }
    let digits = |mut x: usize| {
        let mut d = vec![0usize; 2 * k];
        for v in d.iter_mut().rev() {
            *v = x % n;
            x /= n;
        }
        d
    };
    let idx: Vec<(Vec<usize>, Vec<usize>)> = entries.iter().map(|&(a, b)| (digits(a), digits(b))).collect();
    let draws: Vec<Vec<C64>> = map_samples(seed, n_samples, |rng| {
        let u = sampler.sample(rng)?;
        Ok(idx
            .iter()
            .map(|(a, b)| {
                (0..k).fold(C64::new(1.0, 0.0), |acc, j| acc * u.get(a[j], b[j]) * u.get(a[k + j], b[k + j]).conj())
            })
            .collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok((0..entries.len())
        .map(|e| {
            let re: Vec<f64> = draws.iter().map(|d| d[e].re).collect();
            let im: Vec<f64> = draws.iter().map(|d| d[e].im).collect();
            let (mr, sr) = mean_and_se(&re);
            let (mi, si) = mean_and_se(&im);
            (C64::new(mr, mi), sr.hypot(si))
        })
        .collect())
}

/// E|tr(U†V)|^{2k} over independent pairs: (value, standard error).
pub fn frame_potential(sampler: &dyn MatrixSampler, k: usize, n_pairs: usize, seed: u64) -> Result<(f64, f64)> {
    if n_pairs < 2 {
        return domain("n_pairs must be at least 2");
    }
    let vals: Vec<f64> = map_samples(seed, n_pairs, |rng| {
        let u = sampler.sample(rng)?;
        let v = sampler.sample(rng)?;
        let t: C64 = u.entries().iter().zip(v.entries()).map(|(a, b)| a.conj() * b).sum();
        Ok(t.norm_sqr().powi(k as i32))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(mean_and_se(&vals))
}

/// ‖M‖_F² = Σ_{σ,τ} N^{2 #cycles(σ^{-1}τ)} / N^{2k} for the Ginibre reference.
pub(crate) fn ginibre_norm_sq_impl(k: usize, n: usize) -> f64 {
    let perms = Permutation::all(k);
    let nf = n as f64;
    let s: KahanSum = perms.iter().map(|p| nf.powi(2 * p.cycle_count() as i32 - 2 * k as i32)).collect();
    s.value() * perms.len() as f64
}
