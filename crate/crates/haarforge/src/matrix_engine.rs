//! Dense complex linear algebra at desk scale: the generator A_m, matrix
//! exponentials, the product ensemble V and the Haar/Ginibre references.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::perm_core::{sample_phased_permutation, PhasedPermutation};
use crate::theta_select;

pub type C64 = Complex64;

/// Magic bytes opening the binary operator format.
pub const BINARY_MAGIC: &[u8; 8] = b"HFDENSE1";

/// Largest dimension accepted by the JSON debug format.
pub const JSON_MAX_DIM: usize = 8;

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    dim: usize,
    entries: Vec<C64>,
}

impl DenseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.entries[i * dim + i] = C64::new(1.0, 0.0);
        }
        out
    }

    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return domain("operator dimension must be positive");
        }
        if entries.len() != dim * dim {
            return domain(format!("{} entries for dimension {dim}", entries.len()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return domain("non-finite operator entry");
        }
        Ok(Self { dim, entries })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(f(r, c));
            }
        }
        Self { dim, entries }
    }

    pub fn from_matrix(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator must be square");
        Self::from_fn(m.nrows(), |r, c| m[(r, c)])
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.entries[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.entries[r * self.dim + c] = v;
    }

    pub fn add_at(&mut self, r: usize, c: usize, v: C64) {
        self.entries[r * self.dim + c] += v;
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return domain(format!("dimension mismatch {} vs {}", self.dim, other.dim));
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self::from_matrix(&(self.to_matrix() * other.to_matrix())))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.get(c, r).conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(Self { dim: self.dim, entries })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(Self { dim: self.dim, entries })
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// max |H - H†| entrywise.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// max |U†U - I| entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        let m = self.to_matrix();
        let g = m.adjoint() * &m;
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in 0..self.dim {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((g[(r, c)] - target).norm());
            }
        }
        worst
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        Self::from_fn(a * b, |r, c| self.get(r / b, c / b) * other.get(r % b, c % b))
    }

    /// Binary layout: magic, dim as little-endian u64, then row-major
    /// little-endian f64 (re, im) pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        for z in &self.entries {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let dim = u64::from_le_bytes(word) as usize;
        if dim == 0 || dim > 1 << 16 {
            return Err(Error::Format(format!("implausible dimension {dim}")));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for _ in 0..dim * dim {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            let im = f64::from_le_bytes(word);
            entries.push(C64::new(re, im));
        }
        Self::from_entries(dim, entries).map_err(|e| Error::Format(e.to_string()))
    }

    /// Debug JSON: `{"dim": d, "rows": [[[re, im], ...], ...]}`.
    pub fn to_json(&self) -> Result<serde_json::Value> {
        if self.dim > JSON_MAX_DIM {
            return Err(Error::Resource(format!("JSON output limited to dim <= {JSON_MAX_DIM}")));
        }
        let rows: Vec<Vec<[f64; 2]>> = (0..self.dim)
            .map(|r| (0..self.dim).map(|c| [self.get(r, c).re, self.get(r, c).im]).collect())
            .collect();
        Ok(serde_json::json!({ "dim": self.dim, "rows": rows }))
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Repr {
            dim: usize,
            rows: Vec<Vec<[f64; 2]>>,
        }
        let repr: Repr = serde_json::from_value(v.clone()).map_err(|e| Error::Format(e.to_string()))?;
        if repr.rows.len() != repr.dim || repr.rows.iter().any(|r| r.len() != repr.dim) {
            return Err(Error::Format("rows do not match dim".into()));
        }
        let entries = repr.rows.iter().flatten().map(|p| C64::new(p[0], p[1])).collect();
        Self::from_entries(repr.dim, entries)
    }
}

/// Parameters of the product ensemble V.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub m: usize,
    pub ell: usize,
    pub k: usize,
    /// Explicit angle; when absent the traceless angle for `m` generators is used.
    pub theta: Option<f64>,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { n: 16, m: 2, ell: 4, k: 2, theta: None, seed: 0 }
    }
}

impl EnsembleConfig {
    /// `ell = 0` is accepted and gives the bare Z_L Z_R ensemble.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.k == 0 {
            return domain(format!("N, m, k must be positive (got N={}, m={}, k={})", self.n, self.m, self.k));
        }
        if let Some(t) = self.theta {
            if !t.is_finite() {
                return domain("theta must be finite");
            }
        }
        Ok(())
    }

    pub fn resolved_theta(&self) -> Result<f64> {
        match self.theta {
            Some(t) => Ok(t),
            None => theta_select::generator_angle(self.m),
        }
    }
}

/// A_m = (1/sqrt(2m)) sum_a (Z_a + Z_a†).
pub fn build_a_m(zs: &[PhasedPermutation]) -> Result<DenseOperator> {
    let Some(first) = zs.first() else {
        return domain("need at least one phased permutation");
    };
    let n = first.len();
    if zs.iter().any(|z| z.len() != n) {
        return domain("phased permutations have different dimensions");
    }
    let scale = 1.0 / ((2 * zs.len()) as f64).sqrt();
    let mut a = DenseOperator::zeros(n);
    for z in zs {
        for (c, (&r, &p)) in z.perm().mapping().iter().zip(z.phases()).enumerate() {
            a.add_at(r, c, p * scale);
            a.add_at(c, r, p.conj() * scale);
        }
    }
    Ok(a)
}

/// e^{iθH} from the Hermitian eigendecomposition.
pub fn expm_hermitian(h: &DenseOperator, theta: f64) -> Result<DenseOperator> {
    let defect = h.hermiticity_defect();
    if defect > 1e-10 {
        return domain(format!("operator is not Hermitian (defect {defect:.3e})"));
    }
    let u = expm_hermitian_matrix(&h.to_matrix(), theta);
    let out = DenseOperator::from_matrix(&u);
    let ud = out.unitarity_defect();
    if ud > 1e-10 {
        return Err(Error::Numeric(format!("exponential not unitary (defect {ud:.3e})")));
    }
    Ok(out)
}

pub(crate) fn expm_hermitian_matrix(h: &DMatrix<C64>, theta: f64) -> DMatrix<C64> {
    let eig = h.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let ph = C64::from_polar(1.0, theta * lam);
        for r in 0..scaled.nrows() {
            scaled[(r, j)] *= ph;
        }
    }
    scaled * q.adjoint()
}

/// Degree-d Taylor polynomial of e^{iθH}, by Horner's rule.
pub fn truncated_taylor(h: &DenseOperator, theta: f64, d: usize) -> DenseOperator {
    let n = h.dim();
    let hm = h.to_matrix();
    let id = DMatrix::<C64>::identity(n, n);
    let mut acc = id.clone();
    for p in (1..=d).rev() {
        let coef = C64::new(0.0, theta / p as f64);
        acc = &id + (&hm * acc) * coef;
    }
    DenseOperator::from_matrix(&acc)
}

/// Tail bound ‖θH‖^{d+1}/(d+1)! for a given operator-norm bound.
pub fn taylor_tail_bound(norm_theta_h: f64, d: usize) -> f64 {
    let mut t = 1.0;
    for j in 1..=d + 1 {
        t *= norm_theta_h / j as f64;
    }
    t
}

/// Default truncation degree ceil(sqrt(m) ln(k ell / eps)) + 4 with eps = 1e-8.
pub fn default_taylor_degree(m: usize, k: usize, ell: usize) -> usize {
    let eps = 1e-8;
    let kl = (k.max(1) * ell.max(1)) as f64;
    ((m as f64).sqrt() * (kl / eps).ln()).ceil() as usize + 4
}

/// Left-multiplies `a` by a phased permutation in place of a dense product.
pub(crate) fn phased_left_mul(z: &PhasedPermutation, a: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (c, (&r, &p)) in z.perm().mapping().iter().zip(z.phases()).enumerate() {
        for j in 0..a.ncols() {
            out[(r, j)] = p * a[(c, j)];
        }
    }
    out
}

/// Right-multiplies `a` by a phased permutation.
pub(crate) fn phased_right_mul(a: &DMatrix<C64>, z: &PhasedPermutation) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (c, (&r, &p)) in z.perm().mapping().iter().zip(z.phases()).enumerate() {
        for i in 0..a.nrows() {
            out[(i, c)] = a[(i, r)] * p;
        }
    }
    out
}

/// One draw of V = Z_L (prod_j e^{iθ A_m^{(j)}}) Z_R.
///
/// Draw order: Z_L, then the m generators of each factor j = 1..ell, then Z_R.
pub fn build_v<R: Rng + ?Sized>(cfg: &EnsembleConfig, rng: &mut R) -> Result<DenseOperator> {
    cfg.validate()?;
    let theta = cfg.resolved_theta()?;
    let v = build_v_matrix(cfg.n, cfg.m, cfg.ell, theta, rng)?;
    Ok(DenseOperator::from_matrix(&v))
}

pub(crate) fn build_v_matrix<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    ell: usize,
    theta: f64,
    rng: &mut R,
) -> Result<DMatrix<C64>> {
    let zl = sample_phased_permutation(n, rng)?;
    let mut acc = phased_left_mul(&zl, &DMatrix::identity(n, n));
    for _ in 0..ell {
        let zs = (0..m).map(|_| sample_phased_permutation(n, rng)).collect::<Result<Vec<_>>>()?;
        let a = build_a_m(&zs)?;
        acc *= expm_hermitian_matrix(&a.to_matrix(), theta);
    }
    let zr = sample_phased_permutation(n, rng)?;
    Ok(phased_right_mul(&acc, &zr))
}

/// Ginibre matrix with entries (g + i g')/sqrt(2N).
pub fn sample_ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DenseOperator> {
    Ok(DenseOperator::from_matrix(&ginibre_matrix(n, rng)?))
}

pub(crate) fn ginibre_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DMatrix<C64>> {
    if n == 0 {
        return domain("dimension must be positive");
    }
    let s = 1.0 / ((2 * n) as f64).sqrt();
    Ok(DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    }))
}

/// Haar unitary: QR of a Ginibre matrix with the phases of diag(R) moved into Q.
pub fn sample_haar<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DenseOperator> {
    Ok(DenseOperator::from_matrix(&haar_matrix(n, rng)?))
}

pub(crate) fn haar_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DMatrix<C64>> {
    let g = ginibre_matrix(n, rng)?;
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    Ok(q)
}
