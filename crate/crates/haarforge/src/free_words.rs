//! Expansion of e^{iθA_m} into reduced free words over {Z_a, Z_a†}.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::matrix_engine::{DenseOperator, C64};
use crate::perm_core::PhasedPermutation;

/// Largest number of words any expansion may hold.
pub const WORD_BUDGET: f64 = 1e7;

/// Reduced word stored as runs (generator, nonzero power); neighbouring runs
/// use different generators. Generators are labelled from 1. The word is the
/// operator product of its letters read left to right.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FreeWord {
    runs: Vec<(u32, i32)>,
}

impl FreeWord {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Builds a word from (generator, ±1) letters; rejects unreduced input.
    pub fn from_letters(letters: &[(u32, i8)]) -> Result<Self> {
        let mut w = Self::identity();
        for (i, &(a, s)) in letters.iter().enumerate() {
            if a == 0 || (s != 1 && s != -1) {
                return domain(format!("bad letter ({a}, {s})"));
            }
            if i > 0 && letters[i - 1] == (a, -s) {
                return domain(format!("letters {} and {} cancel; word is not reduced", i - 1, i));
            }
            w.push(a, s);
        }
        Ok(w)
    }

    /// Free reduction of an arbitrary letter sequence.
    pub fn reduce(letters: &[(u32, i8)]) -> Result<Self> {
        let mut w = Self::identity();
        for &(a, s) in letters {
            if a == 0 || (s != 1 && s != -1) {
                return domain(format!("bad letter ({a}, {s})"));
            }
            w.push(a, s);
        }
        Ok(w)
    }

    /// Right multiplication by one letter, cancelling if needed.
    pub fn push(&mut self, gen: u32, sign: i8) {
        match self.runs.last_mut() {
            Some((g, p)) if *g == gen => {
                *p += sign as i32;
                if *p == 0 {
                    self.runs.pop();
                }
            }
            _ => self.runs.push((gen, sign as i32)),
        }
    }

    fn with_letter(&self, gen: u32, sign: i8) -> Self {
        let mut w = self.clone();
        w.push(gen, sign);
        w
    }

    pub fn runs(&self) -> &[(u32, i32)] {
        &self.runs
    }

    pub fn letters(&self) -> Vec<(u32, i8)> {
        self.runs
            .iter()
            .flat_map(|&(g, p)| std::iter::repeat_n((g, p.signum() as i8), p.unsigned_abs() as usize))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.runs.iter().map(|&(_, p)| p.unsigned_abs() as usize).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_identity()
    }

    pub fn max_generator(&self) -> u32 {
        self.runs.iter().map(|&(g, _)| g).max().unwrap_or(0)
    }

    pub fn inverse(&self) -> Self {
        Self { runs: self.runs.iter().rev().map(|&(g, p)| (g, -p)).collect() }
    }

    fn shifted(&self, offset: u32) -> Self {
        Self { runs: self.runs.iter().map(|&(g, p)| (g + offset, p)).collect() }
    }

    fn concat(&self, other: &Self) -> Self {
        let mut w = self.clone();
        for (g, s) in other.letters() {
            w.push(g, s);
        }
        w
    }
}

/// Text form: letters separated by '.', a negative label denotes the adjoint,
/// e.g. "2.1" is Z_2 Z_1 and "1.-2" is Z_1 Z_2†. The identity is "e".
impl fmt::Display for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self.letters().iter().map(|&(g, s)| (g as i64 * s as i64).to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

impl FromStr for FreeWord {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "e" || s.is_empty() {
            return Ok(Self::identity());
        }
        let letters = s
            .split('.')
            .map(|t| {
                let v: i64 = t.trim().parse().map_err(|_| Error::Domain(format!("bad letter '{t}'")))?;
                if v == 0 {
                    return domain("generator labels start at 1");
                }
                Ok((v.unsigned_abs() as u32, v.signum() as i8))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_letters(&letters)
    }
}

impl Serialize for FreeWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// v(θ) I + Σ_i w_i W_i, with the words over a labelled alphabet.
#[derive(Clone, Debug)]
pub struct WordCoefficients {
    pub identity_coeff: C64,
    pub weights: HashMap<FreeWord, C64>,
    pub truncation_degree: usize,
    /// Sorted generator labels the words may use.
    pub alphabet: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightStats {
    pub sum_sq: f64,
    pub max_abs: f64,
    pub n_words: usize,
}

impl WordCoefficients {
    /// Relabels generators a -> a + offset.
    pub fn with_generator_offset(&self, offset: u32) -> Self {
        Self {
            identity_coeff: self.identity_coeff,
            weights: self.weights.iter().map(|(w, &c)| (w.shifted(offset), c)).collect(),
            truncation_degree: self.truncation_degree,
            alphabet: self.alphabet.iter().map(|g| g + offset).collect(),
        }
    }

    /// Σ|w_i|² + |v|².
    pub fn total_weight(&self) -> f64 {
        weight_stats(self).sum_sq + self.identity_coeff.norm_sqr()
    }
}

/// Number of reduced words of length at most d over m generators and inverses.
pub fn reduced_word_count(m: usize, d: usize) -> f64 {
    let q = (2 * m) as f64;
    1.0 + (1..=d).map(|l| q * (q - 1.0).powi(l as i32 - 1)).sum::<f64>()
}

/// Degree-d Taylor polynomial of exp(iθ Σ_a (Z_a + Z_a†)/sqrt(2m)), collected per reduced word.
pub fn expand_exponential(m: usize, theta: f64, d: usize) -> Result<WordCoefficients> {
    if m == 0 {
        return domain("need at least one generator");
    }
    if reduced_word_count(m, d) > WORD_BUDGET {
        return Err(Error::Resource(format!(
            "expansion with m={m}, d={d} needs {:.3e} words, budget is {WORD_BUDGET:.0e}",
            reduced_word_count(m, d)
        )));
    }
    let step = C64::new(0.0, theta / ((2 * m) as f64).sqrt());
    let mut term: HashMap<FreeWord, C64> = HashMap::from([(FreeWord::identity(), C64::new(1.0, 0.0))]);
    let mut total = term.clone();
    for p in 1..=d {
        let coef = step / p as f64;
        let mut next: HashMap<FreeWord, C64> = HashMap::with_capacity(term.len() * 3);
        for (w, c) in &term {
            let c = c * coef;
            for a in 1..=m as u32 {
                for s in [1i8, -1] {
                    *next.entry(w.with_letter(a, s)).or_default() += c;
                }
            }
        }
        for (w, c) in &next {
            *total.entry(w.clone()).or_default() += c;
        }
        term = next;
    }
    let identity_coeff = total.remove(&FreeWord::identity()).unwrap_or_default();
    Ok(WordCoefficients {
        identity_coeff,
        weights: total,
        truncation_degree: d,
        alphabet: (1..=m as u32).collect(),
    })
}

/// Statistics over the non-identity words.
pub fn weight_stats(wc: &WordCoefficients) -> WeightStats {
    let mut sum_sq = 0.0;
    let mut max_abs = 0.0f64;
    for c in wc.weights.values() {
        sum_sq += c.norm_sqr();
        max_abs = max_abs.max(c.norm());
    }
    WeightStats { sum_sq, max_abs, n_words: wc.weights.len() }
}

/// Coefficients of the product of blocks with disjoint alphabets, block 1 leftmost.
///
/// Each block contributes either one of its words or its identity term, so
/// Σ|w|² + |v|² of the product equals the product of the per-block totals.
pub fn product_words(blocks: &[WordCoefficients]) -> Result<WordCoefficients> {
    if blocks.is_empty() {
        return domain("need at least one block");
    }
    let mut alphabet: Vec<u32> = blocks.iter().flat_map(|b| b.alphabet.iter().copied()).collect();
    alphabet.sort_unstable();
    if alphabet.windows(2).any(|w| w[0] == w[1]) {
        return domain("blocks share generators; alphabets must be disjoint");
    }
    let count: f64 = blocks.iter().map(|b| (b.weights.len() + 1) as f64).product();
    if count > WORD_BUDGET {
        return Err(Error::Resource(format!("product of {} blocks has {count:.3e} words", blocks.len())));
    }
    let mut acc: Vec<(FreeWord, C64)> = vec![(FreeWord::identity(), C64::new(1.0, 0.0))];
    for b in blocks {
        let mut entries: Vec<(&FreeWord, C64)> = vec![];
        let id = FreeWord::identity();
        entries.push((&id, b.identity_coeff));
        entries.extend(b.weights.iter().map(|(w, &c)| (w, c)));
        let mut next = Vec::with_capacity(acc.len() * entries.len());
        for (w, c) in &acc {
            for (u, cu) in &entries {
                next.push((w.concat(u), c * cu));
            }
        }
        acc = next;
    }
    let mut weights = HashMap::with_capacity(acc.len());
    let mut identity_coeff = C64::default();
    for (w, c) in acc {
        if w.is_identity() {
            identity_coeff = c;
        } else if weights.insert(w.clone(), c).is_some() {
            return Err(Error::Numeric(format!("two products collapsed onto the word {w}")));
        }
    }
    Ok(WordCoefficients {
        identity_coeff,
        weights,
        truncation_degree: blocks.iter().map(|b| b.truncation_degree).sum(),
        alphabet,
    })
}

/// The word as a phased permutation, with generator a realized by `zs[a - 1]`.
pub fn word_phased(w: &FreeWord, zs: &[PhasedPermutation]) -> Result<PhasedPermutation> {
    let Some(first) = zs.first() else {
        return domain("no generators supplied");
    };
    if w.max_generator() as usize > zs.len() {
        return domain(format!("word {w} uses generator {} but only {} supplied", w.max_generator(), zs.len()));
    }
    let adjoints: Vec<PhasedPermutation> = zs.iter().map(|z| z.adjoint()).collect();
    let mut acc = PhasedPermutation::identity(first.len());
    for (g, s) in w.letters() {
        let z = if s > 0 { &zs[g as usize - 1] } else { &adjoints[g as usize - 1] };
        acc = acc.compose(z)?;
    }
    Ok(acc)
}

pub fn realize_word(w: &FreeWord, zs: &[PhasedPermutation]) -> Result<DenseOperator> {
    Ok(word_phased(w, zs)?.to_dense())
}

/// Dense v I + Σ_i w_i W_i.
pub fn realize_sum(wc: &WordCoefficients, zs: &[PhasedPermutation]) -> Result<DenseOperator> {
    let n = zs.first().map(|z| z.len()).ok_or_else(|| Error::Domain("no generators supplied".into()))?;
    let mut out = DenseOperator::identity(n).scale(wc.identity_coeff);
    for (w, &c) in &wc.weights {
        let z = word_phased(w, zs)?;
        for (col, (&row, &p)) in z.perm().mapping().iter().zip(z.phases()).enumerate() {
            out.add_at(row, col, c * p);
        }
    }
    Ok(out)
}
