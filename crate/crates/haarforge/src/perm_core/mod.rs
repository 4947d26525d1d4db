//! Permutations, phased permutations Z = D_z S, and k-wise independent families.

mod kwise;

pub use kwise::{
    feistel_inverse, feistel_permutation, kwise_eval, kwise_l1_distance, kwise_l1_report, kwise_phase, Gf2n,
    KWiseFunctionFamily, KWisePhaseFamily, KeyBudget, L1Report, PermFamily, IRREDUCIBLE_POLYS,
};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::matrix_engine::{DenseOperator, C64};

/// A bijection of {0..N-1}; `mapping[i]` is the image of i.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.mapping
    }
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &x in &mapping {
            if x >= n || std::mem::replace(&mut seen[x], true) {
                return domain(format!("{mapping:?} is not a bijection"));
            }
        }
        Ok(Self { mapping })
    }

    pub fn identity(n: usize) -> Self {
        Self { mapping: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn image(&self, i: usize) -> usize {
        self.mapping[i]
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return domain("composing permutations of different sizes");
        }
        Ok(Self { mapping: other.mapping.iter().map(|&i| self.mapping[i]).collect() })
    }

    pub fn invert(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &j) in self.mapping.iter().enumerate() {
            inv[j] = i;
        }
        Self { mapping: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Sign via cycle count.
    pub fn sign(&self) -> i64 {
        let n = self.len();
        let cycles = self.cycle_count();
        if (n - cycles) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn cycle_count(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut cycles = 0;
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            cycles += 1;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                x = self.mapping[x];
            }
        }
        cycles
    }

    /// Dense S with S e_i = e_{mapping[i]}.
    pub fn to_dense(&self) -> DenseOperator {
        let n = self.len();
        let mut out = DenseOperator::zeros(n);
        for (i, &j) in self.mapping.iter().enumerate() {
            out.set(j, i, C64::new(1.0, 0.0));
        }
        out
    }

    /// All permutations of {0..n-1} in lexicographic order.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut cur: Vec<usize> = (0..n).collect();
        let mut out = vec![Self { mapping: cur.clone() }];
        // Standard next-permutation step.
        loop {
            let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
                return out;
            };
            let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
            cur.swap(i - 1, j);
            cur[i..].reverse();
            out.push(Self { mapping: cur.clone() });
        }
    }
}

/// Z = D_z S. Convention: Z e_i = phases[i] e_{perm[i]}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhasedRepr", into = "PhasedRepr")]
pub struct PhasedPermutation {
    perm: Permutation,
    phases: Vec<C64>,
}

// Phases travel as [re, im] pairs.
#[derive(Serialize, Deserialize)]
struct PhasedRepr {
    perm: Permutation,
    phases: Vec<[f64; 2]>,
}

impl TryFrom<PhasedRepr> for PhasedPermutation {
    type Error = Error;
    fn try_from(r: PhasedRepr) -> Result<Self> {
        PhasedPermutation::new(r.perm, r.phases.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

impl From<PhasedPermutation> for PhasedRepr {
    fn from(z: PhasedPermutation) -> Self {
        PhasedRepr { perm: z.perm, phases: z.phases.iter().map(|p| [p.re, p.im]).collect() }
    }
}

const PHASE_TOL: f64 = 1e-12;

impl PhasedPermutation {
    pub fn new(perm: Permutation, phases: Vec<C64>) -> Result<Self> {
        if perm.len() != phases.len() {
            return domain(format!("{} phases for a permutation of {}", phases.len(), perm.len()));
        }
        if let Some(z) = phases.iter().find(|z| (z.norm() - 1.0).abs() > PHASE_TOL) {
            return domain(format!("phase {z} is not of unit modulus"));
        }
        Ok(Self { perm, phases })
    }

    pub fn identity(n: usize) -> Self {
        Self { perm: Permutation::identity(n), phases: vec![C64::new(1.0, 0.0); n] }
    }

    /// Unit phases with the given permutation.
    pub fn from_perm(perm: Permutation) -> Self {
        let n = perm.len();
        Self { perm, phases: vec![C64::new(1.0, 0.0); n] }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    pub fn phases(&self) -> &[C64] {
        &self.phases
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.len() {
            return domain(format!("vector of length {} for dimension {}", v.len(), self.len()));
        }
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for (i, (&j, &p)) in self.perm.mapping.iter().zip(&self.phases).enumerate() {
            out[j] = p * v[i];
        }
        Ok(out)
    }

    pub fn apply_adjoint(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.len() {
            return domain(format!("vector of length {} for dimension {}", v.len(), self.len()));
        }
        Ok(self.perm.mapping.iter().zip(&self.phases).map(|(&j, &p)| p.conj() * v[j]).collect())
    }

    /// Image of a basis vector: Z e_i = phase * e_index.
    pub fn apply_basis(&self, i: usize) -> (usize, C64) {
        (self.perm.mapping[i], self.phases[i])
    }

    /// Operator product `self * other`.
    pub fn compose(&self, other: &PhasedPermutation) -> Result<PhasedPermutation> {
        let perm = self.perm.compose(&other.perm)?;
        let phases = other
            .perm
            .mapping
            .iter()
            .zip(&other.phases)
            .map(|(&j, &p)| p * self.phases[j])
            .collect();
        Ok(Self { perm, phases })
    }

    pub fn adjoint(&self) -> PhasedPermutation {
        let inv = self.perm.invert();
        let phases = inv.mapping.iter().map(|&i| self.phases[i].conj()).collect();
        Self { perm: inv, phases }
    }

    pub fn to_dense(&self) -> DenseOperator {
        let n = self.len();
        let mut out = DenseOperator::zeros(n);
        for (i, (&j, &p)) in self.perm.mapping.iter().zip(&self.phases).enumerate() {
            out.set(j, i, p);
        }
        out
    }
}

/// Fisher–Yates shuffle of the identity.
pub fn sample_uniform_permutation<R: Rng + ?Sized>(n_elems: usize, rng: &mut R) -> Result<Permutation> {
    if n_elems == 0 {
        return domain("cannot sample a permutation of zero elements");
    }
    let mut mapping: Vec<usize> = (0..n_elems).collect();
    mapping.shuffle(rng);
    Ok(Permutation { mapping })
}

/// Uniform permutation with i.i.d. uniform unit phases.
pub fn sample_phased_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PhasedPermutation> {
    let perm = sample_uniform_permutation(n, rng)?;
    let phases = (0..n)
        .map(|_| C64::from_polar(1.0, std::f64::consts::TAU * rng.random::<f64>()))
        .collect();
    Ok(PhasedPermutation { perm, phases })
}
