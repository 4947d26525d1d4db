//! Set-partition diagrams of 2k nodes and the partition algebra P_k(N) they span.
//!
//! Nodes 0..k are the top row (operator rows, kets), nodes k..2k the bottom
//! row (columns, bras). A diagram is stored as a restricted-growth string.

mod irrep;
mod young;

pub use irrep::{
    e_m, enumerate_m_factors, falling_factorial, hat_operator, irrep_basis_small_k, is_m_factor, is_noncrossing,
    noncrossing_decomposition, IrrepBasis, MFactorDiagram, QuotientProjector,
};
pub(crate) use young::rational_to_f64;
pub use young::{
    column_reading_tableau, essential_idempotent_constant, hook_dim, hook_length_count, standard_tableaux, tableau_permutation, young_symmetrizer,
    GroupAlgebraElement, IntegerPartition, Tableau,
};

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::matrix_engine::{DenseOperator, C64};
use crate::perm_core::Permutation;

/// Largest ground set handed to `enumerate_partitions` (Bell_12 = 4,213,597).
pub const MAX_POINTS: usize = 12;
/// Largest N^k for dense realizations.
pub const DENSE_CAP: usize = 4096;
/// Largest ground set for materialized Möbius matrices.
pub const MOBIUS_MAX_POINTS: usize = 8;
/// Relative singular-value cutoff for numerical ranks.
pub const RANK_CUTOFF: f64 = 1e-8;

/// Bell numbers via the Bell triangle.
pub fn bell(n: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![*row.last().unwrap()];
        for &x in &row {
            next.push(next.last().unwrap() + x);
        }
        row = next;
    }
    row[0]
}

/// All set partitions of n points as restricted-growth strings, in lexicographic order.
pub fn enumerate_partitions(n_points: usize) -> Result<Vec<Vec<u8>>> {
    if n_points > MAX_POINTS {
        return Err(Error::Resource(format!(
            "{n_points} points exceeds the enumeration cap of {MAX_POINTS} (Bell_{n_points} = {})",
            bell(n_points)
        )));
    }
    let mut out = Vec::with_capacity(bell(n_points) as usize);
    let mut cur = vec![0u8; n_points];
    fn rec(pos: usize, max: u8, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=max + 1 {
            cur[pos] = v;
            rec(pos + 1, max.max(v), cur, out);
        }
    }
    if n_points == 0 {
        return Ok(vec![vec![]]);
    }
    rec(1, 0, &mut cur, &mut out);
    Ok(out)
}

/// Relabels block ids in order of first appearance.
fn canonical<T: Copy + Eq + std::hash::Hash>(labels: &[T]) -> Vec<u8> {
    let mut seen: HashMap<T, u8> = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = seen.len() as u8;
            *seen.entry(*l).or_insert(next)
        })
        .collect()
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "DiagramRepr", into = "DiagramRepr")]
pub struct SetPartitionDiagram {
    k: usize,
    rgs: Vec<u8>,
}

/// Serialized form: blocks as lists of 1-based node indices.
#[derive(Serialize, Deserialize)]
struct DiagramRepr {
    k: usize,
    blocks: Vec<Vec<usize>>,
}

impl TryFrom<DiagramRepr> for SetPartitionDiagram {
    type Error = Error;
    fn try_from(r: DiagramRepr) -> Result<Self> {
        Self::from_blocks(r.k, &r.blocks)
    }
}

impl From<SetPartitionDiagram> for DiagramRepr {
    fn from(p: SetPartitionDiagram) -> Self {
        DiagramRepr { k: p.k, blocks: p.blocks_one_based() }
    }
}

impl SetPartitionDiagram {
    /// Any labelling of the 2k nodes; equal labels share a block.
    pub fn from_labels<T: Copy + Eq + std::hash::Hash>(k: usize, labels: &[T]) -> Result<Self> {
        if labels.len() != 2 * k {
            return domain(format!("expected {} node labels, got {}", 2 * k, labels.len()));
        }
        if 2 * k > 255 {
            return domain("k too large for diagram storage");
        }
        Ok(Self { k, rgs: canonical(labels) })
    }

    /// Blocks of 1-based node indices covering 1..=2k exactly once.
    pub fn from_blocks(k: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; 2 * k];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return domain("empty block");
            }
            for &node in block {
                if node == 0 || node > 2 * k {
                    return domain(format!("node {node} outside 1..={}", 2 * k));
                }
                if labels[node - 1] != usize::MAX {
                    return domain(format!("node {node} appears in two blocks"));
                }
                labels[node - 1] = b;
            }
        }
        if let Some(miss) = labels.iter().position(|&l| l == usize::MAX) {
            return domain(format!("node {} is not covered", miss + 1));
        }
        Self::from_labels(k, &labels)
    }

    /// The identity diagram: top i joined to bottom i.
    pub fn identity(k: usize) -> Self {
        let labels: Vec<usize> = (0..2 * k).map(|i| i % k.max(1)).collect();
        Self { k, rgs: canonical(&labels) }
    }

    /// Every node in its own block (the all-ones operator J^{⊗k}).
    pub fn singletons(k: usize) -> Self {
        Self { k, rgs: (0..2 * k as u8).collect() }
    }

    /// S_m acting on the leftmost m strands: blocks {top σ(j), bottom j}, identity elsewhere.
    pub fn from_permutation(sigma: &Permutation, k: usize) -> Result<Self> {
        if sigma.len() > k {
            return domain(format!("permutation of {} strands on a k={k} diagram", sigma.len()));
        }
        let mut labels = vec![0usize; 2 * k];
        for j in 0..k {
            let top = if j < sigma.len() { sigma.image(j) } else { j };
            labels[top] = j;
            labels[k + j] = j;
        }
        Self::from_labels(k, &labels)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rgs(&self) -> &[u8] {
        &self.rgs
    }

    pub fn label(&self, node: usize) -> usize {
        self.rgs[node] as usize
    }

    pub fn n_blocks(&self) -> usize {
        self.rgs.iter().map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    /// Blocks as sorted 0-based node lists, ordered by smallest member.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]; self.n_blocks()];
        for (node, &l) in self.rgs.iter().enumerate() {
            out[l as usize].push(node);
        }
        out
    }

    pub fn blocks_one_based(&self) -> Vec<Vec<usize>> {
        self.blocks().into_iter().map(|b| b.into_iter().map(|x| x + 1).collect()).collect()
    }

    /// (top count, bottom count) per block.
    pub fn block_profile(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); self.n_blocks()];
        for (node, &l) in self.rgs.iter().enumerate() {
            if node < self.k {
                out[l as usize].0 += 1;
            } else {
                out[l as usize].1 += 1;
            }
        }
        out
    }

    pub fn is_balanced(&self) -> bool {
        self.block_profile().iter().all(|&(t, b)| t == b)
    }

    pub fn involution(&self) -> Self {
        let k = self.k;
        let labels: Vec<u8> = (0..2 * k).map(|i| self.rgs[(i + k) % (2 * k)]).collect();
        Self { k, rgs: canonical(&labels) }
    }
}

fn check_same_k(p1: &SetPartitionDiagram, p2: &SetPartitionDiagram) -> Result<()> {
    if p1.k != p2.k {
        return domain(format!("diagrams have k={} and k={}", p1.k, p2.k));
    }
    Ok(())
}

/// All diagrams of P_k in restricted-growth order.
pub fn all_diagrams(k: usize) -> Result<Vec<SetPartitionDiagram>> {
    Ok(enumerate_partitions(2 * k)?.into_iter().map(|rgs| SetPartitionDiagram { k, rgs }).collect())
}

/// True iff every block of p1 lies inside a block of p2 (p1 ≤ p2, p2 coarser).
pub fn refines(p1: &SetPartitionDiagram, p2: &SetPartitionDiagram) -> Result<bool> {
    check_same_k(p1, p2)?;
    let mut image = vec![u8::MAX; p1.n_blocks()];
    for (a, b) in p1.rgs.iter().zip(&p2.rgs) {
        let slot = &mut image[*a as usize];
        if *slot == u8::MAX {
            *slot = *b;
        } else if *slot != *b {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Diagram product p2·p1 (p1 stacked below p2) and the number d of closed
/// components removed, so that O_{p2} O_{p1} = N^d O_{p2·p1}.
pub fn multiply(p2: &SetPartitionDiagram, p1: &SetPartitionDiagram) -> Result<(SetPartitionDiagram, u32)> {
    check_same_k(p1, p2)?;
    let k = p1.k;
    // 0..k result top, k..2k middle row, 2k..3k result bottom.
    let mut dsu = Dsu::new(3 * k);
    let mut join = |p: &SetPartitionDiagram, offset: usize| {
        let mut first = vec![usize::MAX; p.n_blocks()];
        for (node, &l) in p.rgs.iter().enumerate() {
            let x = node + offset;
            let slot = &mut first[l as usize];
            if *slot == usize::MAX {
                *slot = x;
            } else {
                dsu.union(*slot, x);
            }
        }
    };
    join(p2, 0);
    join(p1, k);
    let mut outer_roots: Vec<usize> = (0..k).chain(2 * k..3 * k).map(|x| dsu.find(x)).collect();
    let mut middle_roots: Vec<usize> = (k..2 * k).map(|x| dsu.find(x)).collect();
    let product = SetPartitionDiagram { k, rgs: canonical(&outer_roots) };
    outer_roots.sort_unstable();
    middle_roots.sort_unstable();
    middle_roots.dedup();
    let d = middle_roots.iter().filter(|r| outer_roots.binary_search(r).is_err()).count() as u32;
    Ok((product, d))
}

/// c with tr[O_{p1}† O_{p2}] = N^c: the number of blocks of the join of p1 and p2.
pub fn inner_product_power(p1: &SetPartitionDiagram, p2: &SetPartitionDiagram) -> Result<u32> {
    check_same_k(p1, p2)?;
    let n = 2 * p1.k;
    let mut dsu = Dsu::new(n);
    for p in [p1, p2] {
        let mut first = vec![usize::MAX; p.n_blocks()];
        for (node, &l) in p.rgs.iter().enumerate() {
            let slot = &mut first[l as usize];
            if *slot == usize::MAX {
                *slot = node;
            } else {
                dsu.union(*slot, node);
            }
        }
    }
    Ok((0..n).filter(|&x| dsu.find(x) == x).count() as u32)
}

pub fn involution(p: &SetPartitionDiagram) -> SetPartitionDiagram {
    p.involution()
}

/// Number of blocks meeting both rows.
pub fn propagating_count(p: &SetPartitionDiagram) -> usize {
    p.block_profile().iter().filter(|&&(t, b)| t > 0 && b > 0).count()
}

/// Membership in the ideal J_m (at most m propagating blocks).
pub fn ideal_member(p: &SetPartitionDiagram, m: usize) -> bool {
    propagating_count(p) <= m
}

/// Diagrams of P_k whose blocks all have as many top as bottom nodes.
pub fn balanced_partitions(k: usize) -> Result<Vec<SetPartitionDiagram>> {
    if 2 * k > 10 {
        return Err(Error::Resource(format!("balanced partitions limited to 2k <= 10, got k={k}")));
    }
    Ok(all_diagrams(k)?.into_iter().filter(|p| p.is_balanced()).collect())
}

/// Exact integer square matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntOperator {
    dim: usize,
    entries: Vec<i64>,
}

impl IntOperator {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![0; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.entries[r * self.dim + c]
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return domain(format!("dimension mismatch {} vs {}", self.dim, other.dim));
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for j in 0..n {
                let a = self.entries[r * n + j];
                if a == 0 {
                    continue;
                }
                for c in 0..n {
                    out.entries[r * n + c] += a * other.entries[j * n + c];
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: i64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return domain(format!("dimension mismatch {} vs {}", self.dim, other.dim));
        }
        Ok(Self { dim: self.dim, entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect() })
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.entries[c * n + r] = self.entries[r * n + c];
            }
        }
        out
    }

    /// Σ_{rc} A_rc B_rc, i.e. tr[A† B] for real matrices.
    pub fn hs_inner(&self, other: &Self) -> i64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> DenseOperator {
        DenseOperator::from_fn(self.dim, |r, c| C64::new(self.get(r, c) as f64, 0.0))
    }
}

fn realize_dim(k: usize, n: usize) -> Result<usize> {
    if n == 0 {
        return domain("N must be positive");
    }
    match n.checked_pow(k as u32) {
        Some(d) if d <= DENSE_CAP => Ok(d),
        _ => Err(Error::Resource(format!("N^k = {n}^{k} exceeds the dense cap {DENSE_CAP}"))),
    }
}

/// Calls `f` with every assignment of values in 0..n to `slots` positions
/// (pairwise distinct when `injective`).
pub(crate) fn for_each_assignment(slots: usize, n: usize, injective: bool, mut f: impl FnMut(&[usize])) {
    let mut vals = vec![0usize; slots];
    loop {
        let ok = !injective || {
            let mut seen = 0u128;
            vals.iter().all(|&v| {
                let bit = 1u128 << v.min(127);
                let fresh = seen & bit == 0;
                seen |= bit;
                fresh
            })
        };
        if ok {
            f(&vals);
        }
        let mut i = slots;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            vals[i] += 1;
            if vals[i] < n {
                break;
            }
            vals[i] = 0;
        }
    }
}

/// Row and column index of the basis element picked out by node values.
pub(crate) fn node_index(k: usize, n: usize, value_of_node: impl Fn(usize) -> usize) -> (usize, usize) {
    let mut r = 0;
    let mut c = 0;
    for i in 0..k {
        r = r * n + value_of_node(i);
        c = c * n + value_of_node(k + i);
    }
    (r, c)
}

fn realize_int_impl(p: &SetPartitionDiagram, n: usize, distinct: bool) -> Result<IntOperator> {
    let dim = realize_dim(p.k, n)?;
    if distinct && n > 127 {
        return domain("distinct realization supports N <= 127");
    }
    let mut out = IntOperator::zeros(dim);
    for_each_assignment(p.n_blocks(), n, distinct, |vals| {
        let (r, c) = node_index(p.k, n, |node| vals[p.label(node)]);
        out.entries[r * dim + c] = 1;
    });
    Ok(out)
}

/// O_Π as an exact 0/1 matrix: indices equal within each block.
pub fn realize_int(p: &SetPartitionDiagram, n: usize) -> Result<IntOperator> {
    realize_int_impl(p, n, false)
}

/// O'_Π as an exact 0/1 matrix: equal within blocks, distinct across blocks.
pub fn realize_distinct_int(p: &SetPartitionDiagram, n: usize) -> Result<IntOperator> {
    realize_int_impl(p, n, true)
}

pub fn dense_realize(p: &SetPartitionDiagram, n: usize) -> Result<DenseOperator> {
    Ok(realize_int(p, n)?.to_dense())
}

pub fn dense_realize_distinct(p: &SetPartitionDiagram, n: usize) -> Result<DenseOperator> {
    Ok(realize_distinct_int(p, n)?.to_dense())
}

/// Refinement order in a linear extension (more blocks first) with the
/// zeta matrix K (K_{ij} = 1 iff order[j] is coarser than or equal to order[i])
/// and its inverse, both stored by rows.
#[derive(Clone, Debug)]
pub struct MobiusMatrices {
    pub order: Vec<SetPartitionDiagram>,
    /// Column indices j with K_ij = 1, ascending.
    pub k_rows: Vec<Vec<usize>>,
    /// Nonzero (j, K^{-1}_ij), ascending in j.
    pub k_inv_rows: Vec<Vec<(usize, i64)>>,
}

impl MobiusMatrices {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn index_of(&self, p: &SetPartitionDiagram) -> Option<usize> {
        self.order.iter().position(|q| q == p)
    }

    pub fn k_dense(&self) -> Vec<Vec<i64>> {
        let n = self.len();
        self.k_rows
            .iter()
            .map(|row| {
                let mut out = vec![0; n];
                row.iter().for_each(|&j| out[j] = 1);
                out
            })
            .collect()
    }

    pub fn k_inv_dense(&self) -> Vec<Vec<i64>> {
        let n = self.len();
        self.k_inv_rows
            .iter()
            .map(|row| {
                let mut out = vec![0; n];
                row.iter().for_each(|&(j, v)| out[j] = v);
                out
            })
            .collect()
    }

    /// Whether K · K^{-1} is exactly the identity.
    pub fn product_is_identity(&self) -> bool {
        (0..self.len()).all(|i| {
            let mut acc: HashMap<usize, i64> = HashMap::new();
            for &l in &self.k_rows[i] {
                for &(j, v) in &self.k_inv_rows[l] {
                    *acc.entry(j).or_default() += v;
                }
            }
            acc.into_iter().all(|(j, v)| v == (j == i) as i64)
        })
    }
}

/// Zeta and Möbius matrices of the refinement order on diagrams of P_k.
/// The inverse is obtained by exact back-substitution.
pub fn mobius_matrices(k: usize) -> Result<MobiusMatrices> {
    if 2 * k > MOBIUS_MAX_POINTS {
        return Err(Error::Resource(format!(
            "Möbius matrices materialized for 2k <= {MOBIUS_MAX_POINTS}, got k={k}"
        )));
    }
    let mut order = all_diagrams(k)?;
    order.sort_by(|a, b| b.n_blocks().cmp(&a.n_blocks()).then_with(|| a.rgs.cmp(&b.rgs)));
    let index: HashMap<Vec<u8>, usize> = order.iter().enumerate().map(|(i, p)| (p.rgs.clone(), i)).collect();
    let mut coarsenings: HashMap<usize, Vec<Vec<u8>>> = HashMap::new();
    let mut k_rows = Vec::with_capacity(order.len());
    for p in &order {
        let b = p.n_blocks();
        let merges = coarsenings.entry(b).or_insert_with(|| enumerate_partitions(b).expect("b <= 2k"));
        let mut row: Vec<usize> = merges
            .iter()
            .map(|merge| {
                let labels: Vec<u8> = p.rgs.iter().map(|&l| merge[l as usize]).collect();
                index[&canonical(&labels)]
            })
            .collect();
        row.sort_unstable();
        k_rows.push(row);
    }
    // K upper unitriangular: row_i(K^{-1}) = e_i - Σ_{l > i, K_il = 1} row_l(K^{-1}).
    let n = order.len();
    let mut k_inv_rows: Vec<Vec<(usize, i64)>> = vec![vec![]; n];
    for i in (0..n).rev() {
        let mut acc: HashMap<usize, i64> = HashMap::from([(i, 1)]);
        for &l in &k_rows[i] {
            if l == i {
                continue;
            }
            if l < i {
                return Err(Error::Numeric("refinement order is not upper triangular".into()));
            }
            for &(j, v) in &k_inv_rows[l] {
                *acc.entry(j).or_default() -= v;
            }
        }
        let mut row: Vec<(usize, i64)> = acc.into_iter().filter(|&(_, v)| v != 0).collect();
        row.sort_unstable();
        k_inv_rows[i] = row;
    }
    Ok(MobiusMatrices { order, k_rows, k_inv_rows })
}

/// Equality pattern of the 2k-tuple encoded by a vectorized index
/// (row digits then column digits, most significant first).
fn tuple_pattern(index: usize, k: usize, n: usize) -> Vec<u8> {
    let mut digits = vec![0usize; 2 * k];
    let mut x = index;
    for d in digits.iter_mut().rev() {
        *d = x % n;
        x /= n;
    }
    canonical(&digits)
}

fn class_projector(k: usize, n: usize, keep: impl Fn(&SetPartitionDiagram) -> bool) -> Result<DenseOperator> {
    let dim = n
        .checked_pow(2 * k as u32)
        .filter(|&d| d <= DENSE_CAP)
        .ok_or_else(|| Error::Resource(format!("superoperator dimension {n}^{} exceeds {DENSE_CAP}", 2 * k)))?;
    let mut classes: HashMap<Vec<u8>, Vec<usize>> = HashMap::new();
    for a in 0..dim {
        classes.entry(tuple_pattern(a, k, n)).or_default().push(a);
    }
    let mut out = DenseOperator::zeros(dim);
    for (rgs, members) in classes {
        if !keep(&SetPartitionDiagram { k, rgs }) {
            continue;
        }
        let w = C64::new(1.0 / members.len() as f64, 0.0);
        for &a in &members {
            for &b in &members {
                out.set(a, b, w);
            }
        }
    }
    Ok(out)
}

/// Σ_Π |O'_Π)(O'_Π| / |M'_Π|, the vectorized average of S^{⊗k} ⊗ S̄^{⊗k}
/// over uniform permutations S.
pub fn moment_projector_perm(k: usize, n: usize) -> Result<DenseOperator> {
    if n < 2 * k {
        return domain(format!("moment projector needs N >= 2k, got N={n}, k={k}"));
    }
    class_projector(k, n, |_| true)
}

/// The same sum restricted to balanced Π: the vectorized average of
/// Z^{⊗k} ⊗ Z̄^{⊗k} over phased permutations.
pub fn moment_projector_balanced(k: usize, n: usize) -> Result<DenseOperator> {
    if n < 2 * k {
        return domain(format!("moment projector needs N >= 2k, got N={n}, k={k}"));
    }
    class_projector(k, n, |p| p.is_balanced())
}

/// Numerical rank of the vectorized {O_Π} for all diagrams of P_k at dimension N.
pub fn diagram_rank(k: usize, n: usize) -> Result<(usize, Vec<f64>)> {
    let diagrams = all_diagrams(k)?;
    let dim = realize_dim(k, n)?;
    let mut v = DMatrix::<f64>::zeros(dim * dim, diagrams.len());
    for (j, p) in diagrams.iter().enumerate() {
        let o = realize_int(p, n)?;
        for (i, &x) in o.entries().iter().enumerate() {
            v[(i, j)] = x as f64;
        }
    }
    let sv: Vec<f64> = v.singular_values().iter().copied().collect();
    let top = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > RANK_CUTOFF * top).count();
    Ok((rank, sv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(k: usize, blocks: &[&[usize]]) -> SetPartitionDiagram {
        SetPartitionDiagram::from_blocks(k, &blocks.iter().map(|b| b.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    // Brute-force: all functions n -> n modulo relabelling.
    fn brute_partition_count(n: usize) -> usize {
        let mut seen = std::collections::HashSet::new();
        let total = n.pow(n as u32);
        for mut x in 0..total {
            let mut labels = vec![0; n];
            for l in labels.iter_mut() {
                *l = x % n;
                x /= n;
            }
            seen.insert(canonical(&labels));
        }
        seen.len()
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_partitions(2).unwrap(), vec![vec![0, 0], vec![0, 1]]);
        assert_eq!(enumerate_partitions(4).unwrap().len(), 15);
        assert_eq!(enumerate_partitions(6).unwrap().len(), 203);
        for n in 1..=6 {
            assert_eq!(enumerate_partitions(n).unwrap().len(), brute_partition_count(n));
            assert_eq!(enumerate_partitions(n).unwrap().len() as u64, bell(n));
        }
        assert_eq!(bell(12), 4_213_597);
        assert!(matches!(enumerate_partitions(13), Err(Error::Resource(_))));
        let all = enumerate_partitions(5).unwrap();
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn block_serde_is_one_based() {
        let p = diag(2, &[&[1, 3], &[2], &[4]]);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"k":2,"blocks":[[1,3],[2],[4]]}"#);
        let back: SetPartitionDiagram = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<SetPartitionDiagram>(r#"{"k":1,"blocks":[[1],[1,2]]}"#).is_err());
        assert!(serde_json::from_str::<SetPartitionDiagram>(r#"{"k":1,"blocks":[[1]]}"#).is_err());
    }

    #[test]
    fn refinement() {
        let fine = diag(2, &[&[1, 2], &[3, 4]]);
        let coarse = diag(2, &[&[1, 2, 3, 4]]);
        assert!(refines(&fine, &coarse).unwrap());
        assert!(!refines(&coarse, &fine).unwrap());
        for p in all_diagrams(2).unwrap() {
            assert!(refines(&p, &p).unwrap());
            assert!(refines(&SetPartitionDiagram::singletons(2), &p).unwrap());
        }
        assert!(refines(&fine, &SetPartitionDiagram::identity(1)).is_err());
    }

    #[test]
    fn small_products() {
        let j = SetPartitionDiagram::singletons(1);
        let i = SetPartitionDiagram::identity(1);
        assert_eq!(multiply(&j, &j).unwrap(), (j.clone(), 1));
        assert_eq!(multiply(&i, &j).unwrap(), (j.clone(), 0));
        assert_eq!(dense_realize(&i, 4).unwrap(), DenseOperator::identity(4));
        assert!(dense_realize(&j, 3).unwrap().entries().iter().all(|z| *z == C64::new(1.0, 0.0)));
        assert!(multiply(&i, &SetPartitionDiagram::identity(2)).is_err());
    }

    #[test]
    fn products_match_dense_exactly() {
        for k in 1..=2 {
            let all = all_diagrams(k).unwrap();
            for n in [3usize, 4, 5, 7] {
                let dense: Vec<_> = all.iter().map(|p| realize_int(p, n).unwrap()).collect();
                for (a, p2) in all.iter().enumerate() {
                    for (b, p1) in all.iter().enumerate() {
                        let (prod, d) = multiply(p2, p1).unwrap();
                        let lhs = dense[a].matmul(&dense[b]).unwrap();
                        let rhs = realize_int(&prod, n).unwrap().scale((n as i64).pow(d));
                        assert_eq!(lhs, rhs, "k={k} N={n} {p2:?}·{p1:?}");
                        assert!(propagating_count(&prod) <= propagating_count(p1).min(propagating_count(p2)));
                        let c = inner_product_power(p2, p1).unwrap();
                        assert_eq!(dense[a].hs_inner(&dense[b]), (n as i64).pow(c));
                    }
                    assert_eq!(realize_int(&p2.involution(), n).unwrap(), dense[a].transpose());
                }
            }
        }
    }

    #[test]
    fn figure_pair_at_k6() {
        let p = diag(6, &[&[1, 7], &[2, 3, 8], &[9, 10], &[4, 12], &[11], &[5, 6]]);
        let q = diag(6, &[&[1, 7], &[2, 8], &[3, 4], &[5, 9], &[10, 6], &[11], &[12]]);
        assert_eq!(propagating_count(&p), 3);
        assert!(ideal_member(&p, 3) && !ideal_member(&p, 2));
        for (a, b) in [(&p, &q), (&q, &p), (&p, &p)] {
            let (prod, d) = multiply(a, b).unwrap();
            let lhs = realize_int(a, 2).unwrap().matmul(&realize_int(b, 2).unwrap()).unwrap();
            assert_eq!(lhs, realize_int(&prod, 2).unwrap().scale(2i64.pow(d)));
        }
        assert_eq!(propagating_count(&SetPartitionDiagram::identity(3)), 3);
        assert_eq!(propagating_count(&SetPartitionDiagram::singletons(3)), 0);
    }

    #[test]
    fn involution_properties() {
        let sym = diag(2, &[&[1, 3], &[2, 4]]);
        assert_eq!(sym.involution(), sym);
        for p in all_diagrams(2).unwrap() {
            assert_eq!(p.involution().involution(), p);
            let dense = dense_realize(&p, 4).unwrap();
            assert_eq!(dense_realize(&p.involution(), 4).unwrap(), dense.adjoint());
        }
    }

    #[test]
    fn distinct_realizations_are_orthogonal() {
        let i = SetPartitionDiagram::identity(1);
        let j = SetPartitionDiagram::singletons(1);
        assert_eq!(dense_realize_distinct(&i, 4).unwrap(), DenseOperator::identity(4));
        let jm = dense_realize(&j, 4).unwrap().sub(&DenseOperator::identity(4)).unwrap();
        assert_eq!(dense_realize_distinct(&j, 4).unwrap(), jm);
        assert_eq!(realize_distinct_int(&j, 7).unwrap().entries().iter().sum::<i64>(), 42);
        let all = all_diagrams(2).unwrap();
        let n = 5;
        let dense: Vec<_> = all.iter().map(|p| realize_distinct_int(p, n).unwrap()).collect();
        for a in 0..all.len() {
            for b in 0..all.len() {
                let ip = dense[a].hs_inner(&dense[b]);
                let expect = if a == b { falling_factorial(n, all[a].n_blocks()) as i64 } else { 0 };
                assert_eq!(ip, expect);
            }
        }
    }

    // μ(x, y) = Π over blocks of y of (-1)^{j-1} (j-1)!, j = number of x-blocks merged.
    fn lattice_mobius(x: &SetPartitionDiagram, y: &SetPartitionDiagram) -> i64 {
        let mut merged: HashMap<u8, std::collections::HashSet<u8>> = HashMap::new();
        for (a, b) in x.rgs().iter().zip(y.rgs()) {
            merged.entry(*b).or_default().insert(*a);
        }
        merged
            .values()
            .map(|s| {
                let j = s.len() as i64;
                let f: i64 = (1..j).product();
                if j % 2 == 1 {
                    f
                } else {
                    -f
                }
            })
            .product()
    }

    #[test]
    fn mobius_small() {
        let mm = mobius_matrices(1).unwrap();
        assert_eq!(mm.k_dense(), vec![vec![1, 1], vec![0, 1]]);
        assert_eq!(mm.k_inv_dense(), vec![vec![1, -1], vec![0, 1]]);
        for k in 1..=3 {
            let mm = mobius_matrices(k).unwrap();
            assert!(mm.product_is_identity());
            let kd = mm.k_dense();
            let kid = mm.k_inv_dense();
            for i in 0..mm.len() {
                for j in 0..mm.len() {
                    assert_eq!(kd[i][j] == 1, refines(&mm.order[i], &mm.order[j]).unwrap());
                    let expect = if kd[i][j] == 1 { lattice_mobius(&mm.order[i], &mm.order[j]) } else { 0 };
                    assert_eq!(kid[i][j], expect);
                }
                if i + 1 < mm.len() {
                    assert_eq!(kid[i].iter().sum::<i64>(), 0);
                }
            }
        }
        assert!(mobius_matrices(5).is_err());
    }

    #[test]
    fn mobius_reconstruction_dense() {
        let mm = mobius_matrices(2).unwrap();
        let n = 4;
        for (i, p) in mm.order.iter().enumerate() {
            let mut sum = IntOperator::zeros(16);
            for &j in &mm.k_rows[i] {
                sum = sum.add(&realize_distinct_int(&mm.order[j], n).unwrap()).unwrap();
            }
            assert_eq!(sum, realize_int(p, n).unwrap());
            let mut back = IntOperator::zeros(16);
            for &(j, v) in &mm.k_inv_rows[i] {
                back = back.add(&realize_int(&mm.order[j], n).unwrap().scale(v)).unwrap();
            }
            assert_eq!(back, realize_distinct_int(p, n).unwrap());
        }
    }

    fn perm_average(k: usize, n: usize, phase_order: Option<usize>) -> DenseOperator {
        let dim = n.pow(2 * k as u32);
        let perms = Permutation::all(n);
        let mut out = DenseOperator::zeros(dim);
        let phase_sets: Vec<Vec<usize>> = match phase_order {
            None => vec![vec![0; n]],
            Some(q) => {
                let mut all = vec![];
                for_each_assignment(n, q, false, |v| all.push(v.to_vec()));
                all
            }
        };
        let q = phase_order.unwrap_or(1) as f64;
        let w = 1.0 / (perms.len() * phase_sets.len()) as f64;
        for s in &perms {
            for ph in &phase_sets {
                for a in 0..dim {
                    let mut digits = vec![0usize; 2 * k];
                    let mut x = a;
                    for d in digits.iter_mut().rev() {
                        *d = x % n;
                        x /= n;
                    }
                    let mut angle = 0.0;
                    let mut b = 0;
                    for (pos, &d) in digits.iter().enumerate() {
                        b = b * n + s.image(d);
                        let sgn = if pos < k { 1.0 } else { -1.0 };
                        angle += sgn * ph[d] as f64 / q;
                    }
                    out.add_at(b, a, C64::from_polar(w, 2.0 * std::f64::consts::PI * angle));
                }
            }
        }
        out
    }

    #[test]
    fn projector_matches_permutation_average() {
        let p = moment_projector_perm(1, 3).unwrap();
        assert!(p.max_abs_diff(&perm_average(1, 3, None)).unwrap() < 1e-12);
        assert!((p.trace().re - 2.0).abs() < 1e-12);
        let p = moment_projector_perm(2, 4).unwrap();
        assert!(p.max_abs_diff(&perm_average(2, 4, None)).unwrap() < 1e-12);
        assert!(p.matmul(&p).unwrap().max_abs_diff(&p).unwrap() < 1e-10);
        assert!(p.hermiticity_defect() < 1e-15);
        assert!((p.trace().re - 15.0).abs() < 1e-9);
        assert!(moment_projector_perm(2, 3).is_err());
    }

    #[test]
    fn balanced_diagrams_and_phased_average() {
        assert_eq!(balanced_partitions(1).unwrap(), vec![SetPartitionDiagram::identity(1)]);
        let b2 = balanced_partitions(2).unwrap();
        assert_eq!(b2.len(), 3);
        for p in &b2 {
            assert_eq!(propagating_count(p), p.n_blocks());
        }
        let exact = moment_projector_balanced(1, 4).unwrap();
        assert!(exact.max_abs_diff(&perm_average(1, 4, Some(8))).unwrap() < 1e-12);
        assert!((exact.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stable_range_rank() {
        assert_eq!(diagram_rank(2, 4).unwrap().0, 15);
        assert_eq!(diagram_rank(2, 5).unwrap().0, 15);
        assert!(diagram_rank(2, 3).unwrap().0 < 15);
        assert_eq!(diagram_rank(1, 2).unwrap().0, 2);
    }
}
