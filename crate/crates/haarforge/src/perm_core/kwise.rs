//! Exact k-wise independent functions over GF(2^n), the phases built from them,
//! a Feistel permutation family and the l1 tester for k-wise independence.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sample_uniform_permutation, Permutation};
use crate::error::{domain, Error, Result};
use crate::matrix_engine::C64;

/// Irreducible polynomial for GF(2^n), indexed by n (bit i = coefficient of x^i).
/// Low-weight choices from the standard tables; irreducibility is checked in tests.
pub const IRREDUCIBLE_POLYS: [u32; 17] = [
    0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x83, 0x11B, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443, 0x8003, 0x1100B,
];

pub const MAX_FIELD_DEGREE: u32 = 16;

/// Arithmetic in GF(2^n) modulo the tabulated polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gf2n {
    n: u32,
    poly: u32,
}

impl Gf2n {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 || n > MAX_FIELD_DEGREE {
            return domain(format!("field degree {n} outside 1..={MAX_FIELD_DEGREE}"));
        }
        Ok(Self { n, poly: IRREDUCIBLE_POLYS[n as usize] })
    }

    pub fn degree(&self) -> u32 {
        self.n
    }

    pub fn size(&self) -> u32 {
        1 << self.n
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        a ^ b
    }

    pub fn mul(&self, mut a: u32, mut b: u32) -> u32 {
        let top = 1u32 << self.n;
        let mut acc = 0;
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a;
            }
            b >>= 1;
            a <<= 1;
            if a & top != 0 {
                a ^= self.poly;
            }
        }
        acc
    }
}

/// Random polynomial of degree independence-1 over GF(2^n); `coefficients[0]` is the constant term.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KWiseFunctionFamily {
    pub field_degree: u32,
    pub independence: usize,
    pub coefficients: Vec<u32>,
}

impl KWiseFunctionFamily {
    pub fn new(field_degree: u32, independence: usize, coefficients: Vec<u32>) -> Result<Self> {
        let f = Gf2n::new(field_degree)?;
        if independence == 0 {
            return domain("independence must be at least 1");
        }
        if coefficients.len() != independence {
            return domain(format!("{} coefficients for independence {independence}", coefficients.len()));
        }
        if coefficients.iter().any(|&c| c >= f.size()) {
            return domain("coefficient outside the field");
        }
        Ok(Self { field_degree, independence, coefficients })
    }

    pub fn random<R: Rng + ?Sized>(field_degree: u32, independence: usize, rng: &mut R) -> Result<Self> {
        let size = Gf2n::new(field_degree)?.size();
        let coefficients = (0..independence).map(|_| rng.random_range(0..size)).collect();
        Self::new(field_degree, independence, coefficients)
    }

    /// Every key of the family, in lexicographic order of the coefficient vector.
    pub fn all_keys(field_degree: u32, independence: usize) -> Result<Vec<Self>> {
        let size = Gf2n::new(field_degree)?.size() as u64;
        let total = size.checked_pow(independence as u32).filter(|&t| t <= 1 << 22);
        let Some(total) = total else {
            return Err(Error::Resource(format!("GF(2^{field_degree}) with independence {independence} has too many keys")));
        };
        Ok((0..total)
            .map(|mut idx| {
                let coefficients = (0..independence)
                    .map(|_| {
                        let c = (idx % size) as u32;
                        idx /= size;
                        c
                    })
                    .collect();
                Self { field_degree, independence, coefficients }
            })
            .collect())
    }

    fn field(&self) -> Gf2n {
        Gf2n { n: self.field_degree, poly: IRREDUCIBLE_POLYS[self.field_degree as usize] }
    }
}

/// Horner evaluation. Only the low n bits of `x` are read.
pub fn kwise_eval(fam: &KWiseFunctionFamily, x: u32) -> u32 {
    let f = fam.field();
    let x = x & (f.size() - 1);
    fam.coefficients.iter().rev().fold(0, |acc, &c| f.add(f.mul(acc, x), c))
}

/// Phases exp(2πi f(i)/N) on the N-th roots of unity, N a power of two not exceeding 2^n.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KWisePhaseFamily {
    pub base: KWiseFunctionFamily,
    pub modulus: usize,
}

impl KWisePhaseFamily {
    pub fn new(base: KWiseFunctionFamily, modulus: usize) -> Result<Self> {
        if !modulus.is_power_of_two() || modulus > (1usize << base.field_degree) {
            return domain(format!(
                "modulus {modulus} must be a power of two at most 2^{}",
                base.field_degree
            ));
        }
        Ok(Self { base, modulus })
    }
}

pub fn kwise_phase(fam: &KWisePhaseFamily, i: usize) -> Result<C64> {
    if i >= fam.modulus {
        return domain(format!("index {i} outside 0..{}", fam.modulus));
    }
    let v = kwise_eval(&fam.base, i as u32) as usize & (fam.modulus - 1);
    Ok(C64::from_polar(1.0, std::f64::consts::TAU * v as f64 / fam.modulus as f64))
}

fn feistel_check(n_bits: u32, rounds: usize, round_keys: &[KWiseFunctionFamily], x: usize) -> Result<u32> {
    if n_bits == 0 || n_bits % 2 == 1 {
        return domain(format!("Feistel domain needs an even bit count, got {n_bits}"));
    }
    let half = n_bits / 2;
    if rounds == 0 {
        return domain("at least one round is required");
    }
    if round_keys.len() < rounds {
        return domain(format!("{} round keys for {rounds} rounds", round_keys.len()));
    }
    if round_keys[..rounds].iter().any(|k| k.field_degree != half) {
        return domain(format!("round functions must live on GF(2^{half})"));
    }
    if x >> n_bits != 0 {
        return domain(format!("input {x} outside 0..2^{n_bits}"));
    }
    Ok(half)
}

/// Balanced Feistel network on n-bit inputs; round j maps (L, R) to (R, L ⊕ F_j(R)).
pub fn feistel_permutation(n_bits: u32, rounds: usize, round_keys: &[KWiseFunctionFamily], x: usize) -> Result<usize> {
    let half = feistel_check(n_bits, rounds, round_keys, x)?;
    let mask = (1u32 << half) - 1;
    let (mut l, mut r) = ((x as u32) >> half, x as u32 & mask);
    for key in &round_keys[..rounds] {
        (l, r) = (r, l ^ kwise_eval(key, r));
    }
    Ok(((l << half) | r) as usize)
}

pub fn feistel_inverse(n_bits: u32, rounds: usize, round_keys: &[KWiseFunctionFamily], y: usize) -> Result<usize> {
    let half = feistel_check(n_bits, rounds, round_keys, y)?;
    let mask = (1u32 << half) - 1;
    let (mut l, mut r) = ((y as u32) >> half, y as u32 & mask);
    for key in round_keys[..rounds].iter().rev() {
        (l, r) = (r ^ kwise_eval(key, l), l);
    }
    Ok(((l << half) | r) as usize)
}

/// Permutation families fed to the k-wise tester.
#[derive(Clone, Debug, PartialEq)]
pub enum PermFamily {
    /// Uniform over S(N).
    Uniform { n: usize },
    /// A single fixed permutation.
    Fixed(Permutation),
    /// Feistel network with independent k'-wise round functions.
    Feistel { n_bits: u32, rounds: usize, independence: usize },
    /// Degree-(k'-1) polynomials over GF(2^n), restricted to the keys that happen to be bijective.
    Polynomial { field_degree: u32, independence: usize },
}

/// Largest member list materialized for exhaustive evaluation.
pub const MAX_EXHAUSTIVE_MEMBERS: usize = 1 << 20;

impl PermFamily {
    pub fn domain_size(&self) -> usize {
        match self {
            PermFamily::Uniform { n } => *n,
            PermFamily::Fixed(p) => p.len(),
            PermFamily::Feistel { n_bits, .. } => 1 << n_bits,
            PermFamily::Polynomial { field_degree, .. } => 1 << field_degree,
        }
    }

    /// All members, each equally likely.
    pub fn members(&self) -> Result<Vec<Permutation>> {
        match self {
            PermFamily::Uniform { n } => {
                if *n > 9 {
                    return Err(Error::Resource(format!("exhaustive S({n}) enumeration")));
                }
                Ok(Permutation::all(*n))
            }
            PermFamily::Fixed(p) => Ok(vec![p.clone()]),
            PermFamily::Feistel { n_bits, rounds, independence } => {
                let keys = KWiseFunctionFamily::all_keys(n_bits / 2, *independence)?;
                let total = keys.len().checked_pow(*rounds as u32).filter(|&t| t <= MAX_EXHAUSTIVE_MEMBERS);
                let Some(total) = total else {
                    return Err(Error::Resource("Feistel key space too large for exhaustive evaluation".into()));
                };
                (0..total)
                    .map(|mut idx| {
                        let ks: Vec<_> = (0..*rounds)
                            .map(|_| {
                                let k = keys[idx % keys.len()].clone();
                                idx /= keys.len();
                                k
                            })
                            .collect();
                        feistel_table(*n_bits, *rounds, &ks)
                    })
                    .collect()
            }
            PermFamily::Polynomial { field_degree, independence } => {
                let n = 1usize << field_degree;
                let mut out = Vec::new();
                for key in KWiseFunctionFamily::all_keys(*field_degree, *independence)? {
                    let mapping: Vec<usize> = (0..n).map(|x| kwise_eval(&key, x as u32) as usize).collect();
                    if let Ok(p) = Permutation::new(mapping) {
                        out.push(p);
                    }
                }
                if out.is_empty() {
                    return domain("no bijective polynomial in the family");
                }
                Ok(out)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Permutation> {
        match self {
            PermFamily::Uniform { n } => sample_uniform_permutation(*n, rng),
            PermFamily::Fixed(p) => Ok(p.clone()),
            PermFamily::Feistel { n_bits, rounds, independence } => {
                let ks = (0..*rounds)
                    .map(|_| KWiseFunctionFamily::random(n_bits / 2, *independence, rng))
                    .collect::<Result<Vec<_>>>()?;
                feistel_table(*n_bits, *rounds, &ks)
            }
            PermFamily::Polynomial { .. } => {
                let members = self.members()?;
                Ok(members[rng.random_range(0..members.len())].clone())
            }
        }
    }
}

fn feistel_table(n_bits: u32, rounds: usize, keys: &[KWiseFunctionFamily]) -> Result<Permutation> {
    let mapping = (0..1usize << n_bits)
        .map(|x| feistel_permutation(n_bits, rounds, keys, x))
        .collect::<Result<Vec<_>>>()?;
    Permutation::new(mapping)
}

/// How the family's key space is explored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyBudget {
    Exhaustive,
    Sampled(usize),
}

/// Per-tuple l1 distances and their maximum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L1Report {
    pub per_tuple: Vec<(Vec<usize>, f64)>,
    pub max: f64,
}

fn check_tuple(tuple: &[usize], n: usize) -> Result<()> {
    for (i, &a) in tuple.iter().enumerate() {
        if a >= n {
            return domain(format!("tuple entry {a} outside 0..{n}"));
        }
        if tuple[..i].contains(&a) {
            return domain(format!("tuple {tuple:?} has repeated entries"));
        }
    }
    Ok(())
}

fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

fn l1_from_hist(hist: &HashMap<Vec<usize>, f64>, total: f64, n: usize, k: usize) -> f64 {
    let outcomes = falling(n, k);
    let u = 1.0 / outcomes;
    let seen: f64 = hist.values().map(|&c| (c / total - u).abs()).sum();
    seen + (outcomes - hist.len() as f64) * u
}

/// l1 distance between the family's image law of `tuple` and that of a uniform permutation.
pub fn kwise_l1_distance<R: Rng + ?Sized>(
    family: &PermFamily,
    k: usize,
    tuple: &[usize],
    budget: KeyBudget,
    rng: &mut R,
) -> Result<f64> {
    if tuple.len() != k {
        return domain(format!("tuple of length {} for k = {k}", tuple.len()));
    }
    let report = kwise_l1_report(family, k, Some(&[tuple.to_vec()]), budget, rng)?;
    Ok(report.max)
}

/// Distances for the given tuples (all ordered k-tuples of distinct points when `None`).
pub fn kwise_l1_report<R: Rng + ?Sized>(
    family: &PermFamily,
    k: usize,
    tuples: Option<&[Vec<usize>]>,
    budget: KeyBudget,
    rng: &mut R,
) -> Result<L1Report> {
    let n = family.domain_size();
    if n > 64 {
        return Err(Error::Resource(format!("histogramming limited to N <= 64, got {n}")));
    }
    if k == 0 || k > n {
        return domain(format!("k = {k} outside 1..={n}"));
    }
    let tuples: Vec<Vec<usize>> = match tuples {
        Some(t) => t.to_vec(),
        None => all_distinct_tuples(n, k),
    };
    for t in &tuples {
        if t.len() != k {
            return domain(format!("tuple of length {} for k = {k}", t.len()));
        }
        check_tuple(t, n)?;
    }
    let members = match budget {
        KeyBudget::Exhaustive => family.members()?,
        KeyBudget::Sampled(s) => {
            if s == 0 {
                return domain("need at least one sampled key");
            }
            (0..s).map(|_| family.sample(rng)).collect::<Result<Vec<_>>>()?
        }
    };
    let total = members.len() as f64;
    let per_tuple: Vec<(Vec<usize>, f64)> = tuples
        .into_iter()
        .map(|t| {
            let mut hist: HashMap<Vec<usize>, f64> = HashMap::new();
            for p in &members {
                *hist.entry(t.iter().map(|&i| p.image(i)).collect()).or_insert(0.0) += 1.0;
            }
            let d = l1_from_hist(&hist, total, n, k);
            (t, d)
        })
        .collect();
    let max = per_tuple.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    Ok(L1Report { per_tuple, max })
}

fn all_distinct_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in 0..n {
            if !cur.contains(&x) {
                cur.push(x);
                rec(n, k, cur, out);
                cur.pop();
            }
        }
    }
    rec(n, k, &mut cur, &mut out);
    out
}
