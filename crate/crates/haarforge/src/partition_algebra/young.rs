//! Integer partitions, Young tableaux, the hook formula and the group algebra of S_m.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::matrix_engine::{DenseOperator, C64};
use crate::perm_core::Permutation;

/// Largest |μ| for group-algebra computations.
pub const GROUP_ALGEBRA_CAP: usize = 5;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IntegerPartition {
    parts: Vec<usize>,
}

impl TryFrom<Vec<usize>> for IntegerPartition {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<IntegerPartition> for Vec<usize> {
    fn from(p: IntegerPartition) -> Self {
        p.parts
    }
}

impl IntegerPartition {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.contains(&0) {
            return domain(format!("{parts:?} has a zero part"));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return domain(format!("{parts:?} is not nonincreasing"));
        }
        Ok(Self { parts })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn size(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn first(&self) -> usize {
        self.parts.first().copied().unwrap_or(0)
    }

    pub fn conjugate(&self) -> Self {
        let parts = (0..self.first()).map(|j| self.parts.iter().filter(|&&p| p > j).count()).collect();
        Self { parts }
    }

    /// All partitions of n, largest first part first.
    pub fn all(n: usize) -> Vec<Self> {
        fn rec(rest: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<IntegerPartition>) {
            if rest == 0 {
                out.push(IntegerPartition { parts: cur.clone() });
                return;
            }
            for p in (1..=rest.min(max)).rev() {
                cur.push(p);
                rec(rest - p, p, cur, out);
                cur.pop();
            }
        }
        let mut out = vec![];
        rec(n, n, &mut vec![], &mut out);
        out
    }
}

/// Number of standard Young tableaux of the shape, n! / Π hooks.
pub fn hook_length_count(shape: &IntegerPartition) -> BigUint {
    let conj = shape.conjugate();
    let mut hooks = BigUint::one();
    for (i, &row) in shape.parts.iter().enumerate() {
        for j in 0..row {
            hooks *= BigUint::from(row - j + conj.parts[j] - i - 1);
        }
    }
    let fact: BigUint = (1..=shape.size()).map(BigUint::from).product();
    fact / hooks
}

/// Dimension of the S_N irrep with shape (N - |λ*|, λ*).
pub fn hook_dim(lambda_star: &IntegerPartition, n: usize) -> Result<BigUint> {
    let s = lambda_star.size();
    if s + lambda_star.first() > n {
        return domain(format!("(N - {s}, {:?}) is not a partition for N={n}", lambda_star.parts));
    }
    let mut parts = vec![n - s];
    parts.extend_from_slice(&lambda_star.parts);
    parts.retain(|&p| p > 0);
    Ok(hook_length_count(&IntegerPartition { parts }))
}

/// Rows of entries 0..m.
pub type Tableau = Vec<Vec<usize>>;

/// Standard tableaux in the order produced by placing 0, 1, ... in the topmost admissible row.
pub fn standard_tableaux(mu: &IntegerPartition) -> Vec<Tableau> {
    fn rec(next: usize, total: usize, mu: &[usize], cur: &mut Tableau, out: &mut Vec<Tableau>) {
        if next == total {
            out.push(cur.clone());
            return;
        }
        for i in 0..mu.len() {
            if cur[i].len() < mu[i] && (i == 0 || cur[i - 1].len() > cur[i].len()) {
                cur[i].push(next);
                rec(next + 1, total, mu, cur, out);
                cur[i].pop();
            }
        }
    }
    let mut out = vec![];
    rec(0, mu.size(), &mu.parts, &mut vec![vec![]; mu.parts.len()], &mut out);
    out
}

/// Fills the diagram down each column, left to right.
pub fn column_reading_tableau(mu: &IntegerPartition) -> Tableau {
    let mut t: Tableau = mu.parts.iter().map(|&p| vec![0; p]).collect();
    let mut next = 0;
    for j in 0..mu.first() {
        for row in t.iter_mut().filter(|r| r.len() > j) {
            row[j] = next;
            next += 1;
        }
    }
    t
}

/// σ with σ(from[box]) = to[box] for every box.
pub fn tableau_permutation(from: &Tableau, to: &Tableau) -> Result<Permutation> {
    let m: usize = from.iter().map(Vec::len).sum();
    let mut map = vec![usize::MAX; m];
    for (rf, rt) in from.iter().zip(to) {
        if rf.len() != rt.len() {
            return domain("tableaux have different shapes");
        }
        for (&a, &b) in rf.iter().zip(rt) {
            if a >= m {
                return domain(format!("entry {a} out of range"));
            }
            map[a] = b;
        }
    }
    Permutation::new(map)
}

/// Σ_σ c_σ σ in Q[S_m]; multiplication follows composition, (στ)(i) = σ(τ(i)).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupAlgebraElement {
    m: usize,
    terms: BTreeMap<Permutation, BigRational>,
}

impl GroupAlgebraElement {
    pub fn zero(m: usize) -> Self {
        Self { m, terms: BTreeMap::new() }
    }

    pub fn identity(m: usize) -> Self {
        Self::basis(Permutation::identity(m))
    }

    pub fn basis(sigma: Permutation) -> Self {
        let m = sigma.len();
        Self { m, terms: BTreeMap::from([(sigma, BigRational::one())]) }
    }

    pub fn from_terms(m: usize, terms: impl IntoIterator<Item = (Permutation, BigRational)>) -> Result<Self> {
        let mut out = Self::zero(m);
        for (s, c) in terms {
            if s.len() != m {
                return domain(format!("permutation of {} points in S_{m}", s.len()));
            }
            out.add_term(s, c);
        }
        Ok(out)
    }

    fn add_term(&mut self, s: Permutation, c: BigRational) {
        let entry = self.terms.entry(s).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn terms(&self) -> &BTreeMap<Permutation, BigRational> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, s: &Permutation) -> BigRational {
        self.terms.get(s).cloned().unwrap_or_else(BigRational::zero)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.m != other.m {
            return domain(format!("S_{} vs S_{}", self.m, other.m));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        for (s, c) in &other.terms {
            out.add_term(s.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-BigRational::one()))
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.m);
        }
        Self { m: self.m, terms: self.terms.iter().map(|(s, v)| (s.clone(), v * c)).collect() }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut acc: BTreeMap<Permutation, BigRational> = BTreeMap::new();
        for (s, a) in &self.terms {
            for (t, b) in &other.terms {
                *acc.entry(s.compose(t)?).or_insert_with(BigRational::zero) += a * b;
            }
        }
        acc.retain(|_, v| !v.is_zero());
        Ok(Self { m: self.m, terms: acc })
    }

    /// σ -> σ^{-1}; coefficients are real.
    pub fn adjoint(&self) -> Self {
        Self { m: self.m, terms: self.terms.iter().map(|(s, c)| (s.invert(), c.clone())).collect() }
    }

    /// Σ_σ a_σ b_σ.
    pub fn coef_inner(&self, other: &Self) -> BigRational {
        self.terms.iter().filter_map(|(s, a)| other.terms.get(s).map(|b| a * b)).sum()
    }

    /// Σ_σ c_σ (P_σ ⊗ I) on k strands of dimension N, where P_σ moves strand j to σ(j).
    pub fn dense_on_strands(&self, k: usize, n: usize, scale: f64) -> Result<DenseOperator> {
        if self.m > k {
            return domain(format!("S_{} does not act on {k} strands", self.m));
        }
        let dim = n.pow(k as u32);
        let mut out = DenseOperator::zeros(dim);
        for (s, c) in &self.terms {
            let w = C64::new(c.to_f64().unwrap_or(f64::NAN) * scale, 0.0);
            for col in 0..dim {
                out.add_at(permute_strands(col, s, k, n), col, w);
            }
        }
        Ok(out)
    }
}

/// Image of a basis index under P_σ: digit j of the input lands at position σ(j).
pub(crate) fn permute_strands(index: usize, sigma: &Permutation, k: usize, n: usize) -> usize {
    let mut digits = vec![0usize; k];
    let mut x = index;
    for d in digits.iter_mut().rev() {
        *d = x % n;
        x /= n;
    }
    let mut out = digits.clone();
    for j in 0..sigma.len() {
        out[sigma.image(j)] = digits[j];
    }
    out.iter().fold(0, |acc, &d| acc * n + d)
}

/// p_μ = Σ_{c ∈ C(t_c)} Σ_{r ∈ R(t_c)} sgn(c) c r for the column-reading tableau.
pub fn young_symmetrizer(mu: &IntegerPartition) -> Result<GroupAlgebraElement> {
    let m = mu.size();
    if m > GROUP_ALGEBRA_CAP {
        return Err(Error::Resource(format!("|μ| = {m} exceeds the group-algebra cap {GROUP_ALGEBRA_CAP}")));
    }
    let t = column_reading_tableau(mu);
    let mut row_of = vec![0; m];
    let mut col_of = vec![0; m];
    for (i, row) in t.iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            row_of[e] = i;
            col_of[e] = j;
        }
    }
    let all = Permutation::all(m);
    let rows: Vec<_> = all.iter().filter(|s| (0..m).all(|x| row_of[s.image(x)] == row_of[x])).collect();
    let cols: Vec<_> = all.iter().filter(|s| (0..m).all(|x| col_of[s.image(x)] == col_of[x])).collect();
    let mut out = GroupAlgebraElement::zero(m);
    for c in &cols {
        let sign = BigRational::from_integer(c.sign().into());
        for r in &rows {
            out.add_term(c.compose(r)?, sign.clone());
        }
    }
    Ok(out)
}

/// Returns c with p·p = c·p if p is an essential idempotent.
pub fn essential_idempotent_constant(p: &GroupAlgebraElement) -> Result<Option<BigRational>> {
    let sq = p.mul(p)?;
    let Some((s, a)) = p.terms.iter().next() else {
        return Ok(None);
    };
    let c = sq.coefficient(s) / a;
    Ok((sq == p.scale(&c) && !c.is_zero()).then_some(c))
}

pub(crate) fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(p: &[usize]) -> IntegerPartition {
        IntegerPartition::new(p.to_vec()).unwrap()
    }

    // Brute-force SYT count by removing the largest entry from a corner.
    fn syt_count(shape: &[usize]) -> u64 {
        if shape.iter().sum::<usize>() == 0 {
            return 1;
        }
        let mut total = 0;
        for i in 0..shape.len() {
            let is_corner = shape[i] > 0 && (i + 1 == shape.len() || shape[i + 1] < shape[i]);
            if is_corner {
                let mut s = shape.to_vec();
                s[i] -= 1;
                total += syt_count(&s);
            }
        }
        total
    }

    #[test]
    fn partitions_validate() {
        assert!(IntegerPartition::new(vec![1, 2]).is_err());
        assert!(IntegerPartition::new(vec![2, 0]).is_err());
        assert_eq!(part(&[3, 1]).conjugate(), part(&[2, 1, 1]));
        assert_eq!(IntegerPartition::all(5).len(), 7);
        let json = serde_json::to_string(&part(&[2, 1])).unwrap();
        assert_eq!(json, "[2,1]");
        assert!(serde_json::from_str::<IntegerPartition>("[1,2]").is_err());
    }

    #[test]
    fn hook_formula_matches_syt_enumeration() {
        for n in 0..=8 {
            for shape in IntegerPartition::all(n) {
                assert_eq!(hook_length_count(&shape), BigUint::from(syt_count(shape.parts())), "{shape:?}");
                assert_eq!(standard_tableaux(&shape).len() as u64, syt_count(shape.parts()));
            }
        }
    }

    #[test]
    fn hook_dims() {
        assert_eq!(hook_dim(&IntegerPartition::empty(), 5).unwrap(), BigUint::from(1u32));
        assert_eq!(hook_dim(&part(&[1]), 5).unwrap(), BigUint::from(4u32));
        assert_eq!(hook_dim(&part(&[1, 1]), 5).unwrap(), BigUint::from(6u32));
        assert!(hook_dim(&part(&[3]), 5).is_err());
        assert_eq!(hook_dim(&part(&[2]), 4).unwrap(), BigUint::from(2u32));
    }

    #[test]
    fn tableaux() {
        assert_eq!(column_reading_tableau(&part(&[3, 2])), vec![vec![0, 2, 4], vec![1, 3]]);
        for t in standard_tableaux(&part(&[3, 2])) {
            for r in &t {
                assert!(r.windows(2).all(|w| w[0] < w[1]));
            }
            for j in 0..t[1].len() {
                assert!(t[0][j] < t[1][j]);
            }
        }
        let tc = column_reading_tableau(&part(&[2, 1]));
        let s = tableau_permutation(&tc, &tc).unwrap();
        assert!(s.is_identity());
    }

    #[test]
    fn symmetrizer_extremes() {
        for m in 1..=4 {
            let row = young_symmetrizer(&part(&[m])).unwrap();
            assert_eq!(row.terms().len(), (1..=m).product::<usize>());
            assert!(row.terms().values().all(|c| c.is_one()));
            let col = young_symmetrizer(&IntegerPartition::new(vec![1; m]).unwrap()).unwrap();
            for (s, c) in col.terms() {
                assert_eq!(*c, BigRational::from_integer(s.sign().into()));
            }
        }
        assert!(young_symmetrizer(&part(&[3, 3])).is_err());
    }

    #[test]
    fn symmetrizers_are_essential_idempotents() {
        for n in 1..=4 {
            for mu in IntegerPartition::all(n) {
                let p = young_symmetrizer(&mu).unwrap();
                let c = essential_idempotent_constant(&p).unwrap().expect("p² ∝ p");
                let f = hook_length_count(&mu);
                let fact: u64 = (1..=n as u64).product();
                assert_eq!(c, BigRational::from_integer((fact / f.to_u64().unwrap()).into()), "{mu:?}");
            }
        }
        let p = young_symmetrizer(&part(&[2, 1])).unwrap();
        assert_eq!(essential_idempotent_constant(&p).unwrap(), Some(BigRational::from_integer(3.into())));
    }

    #[test]
    fn group_algebra_arithmetic() {
        let s = Permutation::new(vec![1, 2, 0]).unwrap();
        let a = GroupAlgebraElement::basis(s.clone());
        let b = a.mul(&a).unwrap().mul(&a).unwrap();
        assert_eq!(b, GroupAlgebraElement::identity(3));
        assert_eq!(a.adjoint(), GroupAlgebraElement::basis(s.invert()));
        assert!(a.sub(&a).unwrap().is_zero());
        assert!(a.mul(&GroupAlgebraElement::identity(2)).is_err());
        // Dense realization is a homomorphism.
        let t = Permutation::new(vec![1, 0, 2]).unwrap();
        let st = a.mul(&GroupAlgebraElement::basis(t.clone())).unwrap();
        let ds = a.dense_on_strands(3, 3, 1.0).unwrap();
        let dt = GroupAlgebraElement::basis(t).dense_on_strands(3, 3, 1.0).unwrap();
        let dst = st.dense_on_strands(3, 3, 1.0).unwrap();
        assert_eq!(ds.matmul(&dt).unwrap(), dst);
    }
}
