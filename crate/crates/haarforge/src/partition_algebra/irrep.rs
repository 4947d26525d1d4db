//! m-factors, the operators Ô_ω and an explicit orthonormal basis for the
//! irreps of P_k(N) at small k.

use nalgebra::DMatrix;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use super::young::rational_to_f64;
use super::{
    all_diagrams, canonical, enumerate_partitions, for_each_assignment, hook_dim, inner_product_power, multiply,
    node_index, propagating_count, column_reading_tableau, standard_tableaux, tableau_permutation, young_symmetrizer,
    GroupAlgebraElement, IntegerPartition, SetPartitionDiagram, Tableau,
};
use crate::error::{domain, Error, Result};
use crate::matrix_engine::{DenseOperator, C64};
use crate::perm_core::Permutation;

pub const M_FACTOR_MAX_K: usize = 4;
pub const IRREP_MAX_K: usize = 3;
pub const IRREP_MAX_N: usize = 8;

/// N (N-1) ... (N-j+1).
pub fn falling_factorial(n: usize, j: usize) -> u128 {
    (0..j).map(|i| n.saturating_sub(i) as u128).product()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MFactorDiagram {
    pub base: SetPartitionDiagram,
    pub m: usize,
    pub noncrossing: bool,
}

impl MFactorDiagram {
    /// Block label attached to each of the first m bottom nodes.
    pub fn attachments(&self) -> Vec<usize> {
        let k = self.base.k();
        (0..self.m).map(|i| self.base.label(k + i)).collect()
    }

    /// Number of top-only blocks.
    pub fn closed_top_blocks(&self) -> usize {
        self.base.block_profile().iter().filter(|&&(t, b)| t > 0 && b == 0).count()
    }
}

/// Bottom nodes 0..m sit in distinct propagating blocks (one bottom node
/// each) and bottom nodes m..k are isolated.
pub fn is_m_factor(p: &SetPartitionDiagram, m: usize) -> bool {
    let k = p.k();
    if m > k {
        return false;
    }
    let profile = p.block_profile();
    (0..k).all(|i| {
        let (t, b) = profile[p.label(k + i)];
        if i < m {
            t > 0 && b == 1
        } else {
            t == 0 && b == 1
        }
    })
}

fn max_top(p: &SetPartitionDiagram, label: usize) -> usize {
    (0..p.k()).filter(|&i| p.label(i) == label).max().unwrap_or(0)
}

/// With each propagating edge drawn to the rightmost top node of its block,
/// the edges do not cross.
pub fn is_noncrossing(p: &SetPartitionDiagram, m: usize) -> bool {
    let k = p.k();
    let tops: Vec<usize> = (0..m).map(|i| max_top(p, p.label(k + i))).collect();
    tops.windows(2).all(|w| w[0] < w[1])
}

/// All m-factors (or only the noncrossing ones) of P_k, built from the top-row partitions.
pub fn enumerate_m_factors(k: usize, m: usize, noncrossing: bool) -> Result<Vec<MFactorDiagram>> {
    if m > k || k > M_FACTOR_MAX_K {
        return domain(format!("m-factors need m <= k <= {M_FACTOR_MAX_K}, got m={m}, k={k}"));
    }
    let mut out = vec![];
    for top in enumerate_partitions(k)? {
        let b = top.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        let mut tops_of: Vec<usize> = vec![0; b];
        for (i, &l) in top.iter().enumerate() {
            tops_of[l as usize] = i;
        }
        let mut picks = vec![];
        for_each_assignment(m, b, true, |sel| {
            if !noncrossing || sel.windows(2).all(|w| tops_of[w[0]] < tops_of[w[1]]) {
                picks.push(sel.to_vec());
            }
        });
        for sel in picks {
            let mut labels: Vec<usize> = top.iter().map(|&l| l as usize).collect();
            labels.extend(sel.iter().copied());
            labels.extend((m..k).map(|i| b + i));
            let base = SetPartitionDiagram::from_labels(k, &labels)?;
            let nc = is_noncrossing(&base, m);
            out.push(MFactorDiagram { base, m, noncrossing: nc });
        }
    }
    Ok(out)
}

/// Writes an m-factor as ω_nc · P_σ with ω_nc noncrossing.
pub fn noncrossing_decomposition(f: &MFactorDiagram) -> Result<(MFactorDiagram, Permutation)> {
    if !is_m_factor(&f.base, f.m) {
        return domain("not an m-factor");
    }
    let k = f.base.k();
    let att = f.attachments();
    let mut by_top: Vec<usize> = (0..f.m).collect();
    by_top.sort_by_key(|&i| max_top(&f.base, att[i]));
    // σ(i) = rank of the block attached at bottom i.
    let mut sigma = vec![0; f.m];
    for (rank, &i) in by_top.iter().enumerate() {
        sigma[i] = rank;
    }
    let sigma = Permutation::new(sigma)?;
    let mut labels: Vec<usize> = (0..2 * k).map(|x| f.base.label(x)).collect();
    for (rank, &i) in by_top.iter().enumerate() {
        labels[k + rank] = att[i];
    }
    let base = SetPartitionDiagram::from_labels(k, &labels)?;
    let check = multiply(&base, &SetPartitionDiagram::from_permutation(&sigma, k)?)?;
    if check != (f.base.clone(), 0) {
        return Err(Error::Numeric("noncrossing decomposition does not reproduce the m-factor".into()));
    }
    Ok((MFactorDiagram { base, m: f.m, noncrossing: true }, sigma))
}

/// Ô_ω: indices agree within the blocks of ω on the top row and first m
/// bottom nodes, distinct across those blocks; the last k - m bottom indices are free.
pub fn hat_operator(f: &MFactorDiagram, n: usize) -> Result<DenseOperator> {
    let k = f.base.k();
    let dim = n.pow(k as u32);
    let gamma: Vec<u8> = canonical(&(0..k + f.m).map(|x| f.base.label(x)).collect::<Vec<_>>());
    let nb = gamma.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut out = DenseOperator::zeros(dim);
    let one = C64::new(1.0, 0.0);
    for_each_assignment(nb, n, true, |vals| {
        for_each_assignment(k - f.m, n, false, |free| {
            let (r, c) = node_index(k, n, |x| if x < k + f.m { vals[gamma[x] as usize] } else { free[x - k - f.m] });
            out.set(r, c, one);
        });
    });
    Ok(out)
}

/// Orthogonal projection (Hilbert–Schmidt) onto the complement of span{O_Π : Π ∈ J_{m-1}}.
pub struct QuotientProjector {
    k: usize,
    n: usize,
    diagrams: Vec<SetPartitionDiagram>,
    chol: Option<nalgebra::Cholesky<C64, nalgebra::Dyn>>,
    scale: Vec<f64>,
}

impl QuotientProjector {
    pub fn new(k: usize, n: usize, m: usize) -> Result<Self> {
        let diagrams: Vec<_> = if m == 0 {
            vec![]
        } else {
            all_diagrams(k)?.into_iter().filter(|p| propagating_count(p) < m).collect()
        };
        let len = diagrams.len();
        let nf = n as f64;
        let scale: Vec<f64> = diagrams.iter().map(|p| nf.powi(p.n_blocks() as i32).sqrt()).collect();
        let mut g = DMatrix::<C64>::zeros(len, len);
        for i in 0..len {
            for j in 0..len {
                let c = inner_product_power(&diagrams[i], &diagrams[j])?;
                g[(i, j)] = C64::new(nf.powi(c as i32) / (scale[i] * scale[j]), 0.0);
            }
        }
        let chol = if len == 0 {
            None
        } else {
            Some(g.cholesky().ok_or_else(|| {
                Error::Numeric(format!("Gram matrix of J_{} diagrams is singular at N={n}", m - 1))
            })?)
        };
        Ok(Self { k, n, diagrams, chol, scale })
    }

    pub fn ideal_size(&self) -> usize {
        self.diagrams.len()
    }

    fn visit(&self, p: &SetPartitionDiagram, mut f: impl FnMut(usize, usize)) {
        for_each_assignment(p.n_blocks(), self.n, false, |vals| {
            let (r, c) = node_index(self.k, self.n, |x| vals[p.label(x)]);
            f(r, c);
        });
    }

    pub fn apply(&self, x: &DenseOperator) -> Result<DenseOperator> {
        let Some(chol) = &self.chol else {
            return Ok(x.clone());
        };
        if x.dim() != self.n.pow(self.k as u32) {
            return domain("operator dimension does not match the projector");
        }
        let mut b = nalgebra::DVector::<C64>::zeros(self.diagrams.len());
        for (i, p) in self.diagrams.iter().enumerate() {
            let mut s = C64::default();
            self.visit(p, |r, c| s += x.get(r, c));
            b[i] = s / self.scale[i];
        }
        let a = chol.solve(&b);
        let mut out = x.clone();
        for (i, p) in self.diagrams.iter().enumerate() {
            let coef = -a[i] / self.scale[i];
            self.visit(p, |r, c| out.add_at(r, c, coef));
        }
        Ok(out)
    }
}

/// e_m = I^{⊗m} ⊗ (J/N)^{⊗(k-m)}.
pub fn e_m(k: usize, m: usize, n: usize) -> DenseOperator {
    let dim = n.pow(k as u32);
    let tail = n.pow((k - m) as u32);
    let w = C64::new(1.0 / tail as f64, 0.0);
    DenseOperator::from_fn(dim, |r, c| if r / tail == c / tail { w } else { C64::default() })
}

#[derive(Clone, Debug)]
pub struct IrrepBasis {
    pub k: usize,
    pub n: usize,
    pub lambda_star: IntegerPartition,
    pub labels: Vec<(MFactorDiagram, Tableau)>,
    /// n(ω, t) = sqrt(c(ω)).
    pub normalizations: Vec<f64>,
    /// u_t as exact rational elements of Q[S_m] (before the final scaling).
    pub tableau_elements: Vec<GroupAlgebraElement>,
    /// (1/n) Ô_ω u_t p_{λ*}.
    pub vectors: Vec<DenseOperator>,
    /// Vectors after the quotient projection.
    pub projected: Vec<DenseOperator>,
    pub hook_dim: f64,
    /// tr[Q(v_i)† Q(v_j)] / hook_dim.
    pub gram: DMatrix<C64>,
    /// max |G - I| over all entries.
    pub gram_defect: f64,
    /// max |G_ii - 1|.
    pub diagonal_defect: f64,
    /// Entry attaining `gram_defect`.
    pub worst_pair: (usize, usize),
    /// max over ω, ω' of ‖Q(Ô_{ω'}†Ô_ω - c(ω) δ e_m)‖ / (c(ω) ‖Q(e_m)‖).
    pub multiplicative_defect: f64,
}

/// c(ω) = N^{k-m} (N-m)(N-m-1)...(N-m-d+1), d the number of top-only blocks.
fn hat_norm(f: &MFactorDiagram, n: usize) -> f64 {
    let k = f.base.k();
    (n as f64).powi((k - f.m) as i32) * falling_factorial(n - f.m, f.closed_top_blocks()) as f64
}

fn hs_inner(a: &DenseOperator, b: &DenseOperator) -> C64 {
    a.entries().iter().zip(b.entries()).map(|(x, y)| x.conj() * y).sum()
}

/// Sequential exact orthogonalization of σ_t p_μ under Σ_σ a_σ b_σ.
fn tableau_basis(mu: &IntegerPartition) -> Result<(Vec<Tableau>, Vec<GroupAlgebraElement>, Vec<GroupAlgebraElement>)> {
    let p = young_symmetrizer(mu)?;
    let tc = column_reading_tableau(mu);
    let tabs = standard_tableaux(mu);
    let mut us: Vec<GroupAlgebraElement> = vec![];
    let mut ys: Vec<GroupAlgebraElement> = vec![];
    for t in &tabs {
        let sigma = GroupAlgebraElement::basis(tableau_permutation(&tc, t)?);
        let mut u = sigma.clone();
        let mut y = sigma.mul(&p)?;
        for (uj, yj) in us.iter().zip(&ys) {
            let r = yj.coef_inner(&y) / yj.coef_inner(yj);
            u = u.sub(&uj.scale(&r))?;
            y = y.sub(&yj.scale(&r))?;
        }
        if y.coef_inner(&y).is_zero() {
            return Err(Error::Numeric(format!("tableau vectors for {:?} are linearly dependent", mu.parts())));
        }
        us.push(u);
        ys.push(y);
    }
    Ok((tabs, us, ys))
}

/// Basis representatives (1/n(ω,t)) Ô_ω u_t p_{λ*} for ω ∈ NF_m, t ∈ SYT(λ*), with
/// the post-quotient Gram matrix and the multiplicative check.
pub fn irrep_basis_small_k(k: usize, lambda_star: &IntegerPartition, n: usize) -> Result<IrrepBasis> {
    if k > IRREP_MAX_K || n > IRREP_MAX_N {
        return Err(Error::Resource(format!("irrep basis limited to k <= {IRREP_MAX_K}, N <= {IRREP_MAX_N}")));
    }
    if n < 2 * k {
        return domain(format!("irrep basis needs N >= 2k, got N={n}, k={k}"));
    }
    let m = lambda_star.size();
    if m > k {
        return domain(format!("|λ*| = {m} exceeds k = {k}"));
    }
    let hd = hook_dim(lambda_star, n)?.to_f64().unwrap_or(f64::NAN);
    let fact: f64 = (1..=m).map(|x| x as f64).product();
    let f_mu = super::hook_length_count(lambda_star).to_f64().unwrap_or(f64::NAN);
    let (tabs, us, ys) = tableau_basis(lambda_star)?;
    let factors = enumerate_m_factors(k, m, true)?;
    let q = QuotientProjector::new(k, n, m)?;

    let ys_dense: Vec<DenseOperator> = ys
        .iter()
        .map(|y| {
            let s = (f_mu / fact / rational_to_f64(&y.coef_inner(y))).sqrt();
            y.dense_on_strands(k, n, s)
        })
        .collect::<Result<_>>()?;
    let hats: Vec<DenseOperator> = factors.iter().map(|f| hat_operator(f, n)).collect::<Result<_>>()?;

    let mut labels = vec![];
    let mut normalizations = vec![];
    let mut vectors = vec![];
    for (f, hat) in factors.iter().zip(&hats) {
        let norm = hat_norm(f, n).sqrt();
        for (t, y) in tabs.iter().zip(&ys_dense) {
            labels.push((f.clone(), t.clone()));
            normalizations.push(norm);
            vectors.push(hat.matmul(y)?.scale(C64::new(1.0 / norm, 0.0)));
        }
    }
    let projected: Vec<DenseOperator> = vectors.iter().map(|v| q.apply(v)).collect::<Result<_>>()?;
    let len = projected.len();
    let mut gram = DMatrix::<C64>::zeros(len, len);
    let mut gram_defect = 0.0f64;
    let mut diagonal_defect = 0.0f64;
    let mut worst_pair = (0, 0);
    for i in 0..len {
        for j in 0..len {
            gram[(i, j)] = hs_inner(&projected[i], &projected[j]) / hd;
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (gram[(i, j)] - target).norm();
            if dev > gram_defect {
                gram_defect = dev;
                worst_pair = (i, j);
            }
            if i == j {
                diagonal_defect = diagonal_defect.max(dev);
            }
        }
    }

    let em = e_m(k, m, n);
    let q_em = q.apply(&em)?;
    let em_norm = q_em.frobenius_norm();
    let mut multiplicative_defect = 0.0f64;
    for (a, fa) in factors.iter().enumerate() {
        let c = hat_norm(fa, n);
        for (b, hb) in hats.iter().enumerate() {
            let mut x = hb.adjoint().matmul(&hats[a])?;
            if a == b {
                x = x.sub(&em.scale(C64::new(c, 0.0)))?;
            }
            let rel = q.apply(&x)?.frobenius_norm() / (c * em_norm);
            multiplicative_defect = multiplicative_defect.max(rel);
        }
    }

    Ok(IrrepBasis {
        k,
        n,
        lambda_star: lambda_star.clone(),
        labels,
        normalizations,
        tableau_elements: us,
        vectors,
        projected,
        hook_dim: hd,
        gram,
        gram_defect,
        diagonal_defect,
        worst_pair,
        multiplicative_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{hook_length_count, realize_int};
    use super::*;

    fn part(p: &[usize]) -> IntegerPartition {
        IntegerPartition::new(p.to_vec()).unwrap()
    }

    #[test]
    fn m_factor_counts_match_filters() {
        for k in 1..=4 {
            let all = all_diagrams(k).unwrap();
            for m in 0..=k {
                let built = enumerate_m_factors(k, m, false).unwrap();
                let filtered: Vec<_> = all.iter().filter(|p| is_m_factor(p, m)).collect();
                assert_eq!(built.len(), filtered.len(), "k={k} m={m}");
                assert!(built.iter().all(|f| is_m_factor(&f.base, m)));
                let nc = enumerate_m_factors(k, m, true).unwrap();
                let nc_filtered = filtered.iter().filter(|p| is_noncrossing(p, m)).count();
                assert_eq!(nc.len(), nc_filtered);
                let fact: usize = (1..=m).product();
                assert_eq!(nc.len() * fact, built.len());
            }
        }
        let m0 = enumerate_m_factors(2, 0, true).unwrap();
        assert_eq!(m0.len(), 2);
        assert!(m0.iter().all(|f| (2..4).all(|x| f.base.block_profile()[f.base.label(x)] == (0, 1))));
        assert_eq!(enumerate_m_factors(1, 1, false).unwrap().len(), 1);
        assert!(enumerate_m_factors(5, 1, true).is_err());
    }

    #[test]
    fn every_factor_has_unique_noncrossing_form() {
        for k in 2..=4 {
            for m in 1..=k {
                let nc = enumerate_m_factors(k, m, true).unwrap();
                for f in enumerate_m_factors(k, m, false).unwrap() {
                    let (base, sigma) = noncrossing_decomposition(&f).unwrap();
                    assert!(nc.iter().any(|g| g.base == base.base));
                    let matches = Permutation::all(m)
                        .into_iter()
                        .filter(|s| {
                            nc.iter().any(|g| {
                                multiply(&g.base, &SetPartitionDiagram::from_permutation(s, k).unwrap()).unwrap()
                                    == (f.base.clone(), 0)
                            })
                        })
                        .collect::<Vec<_>>();
                    assert_eq!(matches, vec![sigma.clone()]);
                }
            }
        }
    }

    #[test]
    fn permutation_diagrams_match_strand_action() {
        let s = Permutation::new(vec![2, 0, 1]).unwrap();
        let d = realize_int(&SetPartitionDiagram::from_permutation(&s, 3).unwrap(), 3).unwrap().to_dense();
        assert_eq!(d, GroupAlgebraElement::basis(s).dense_on_strands(3, 3, 1.0).unwrap());
    }

    #[test]
    fn hat_operator_norms() {
        for (k, m, n) in [(2usize, 1usize, 5usize), (3, 2, 6), (2, 0, 4)] {
            for f in enumerate_m_factors(k, m, true).unwrap() {
                let h = hat_operator(&f, n).unwrap();
                let expect = hat_norm(&f, n) * falling_factorial(n, m) as f64;
                assert!((h.frobenius_norm().powi(2) - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn trivial_shape_single_vector() {
        let b = irrep_basis_small_k(1, &IntegerPartition::empty(), 4).unwrap();
        assert_eq!(b.vectors.len(), 1);
        assert!(b.gram_defect < 1e-12);
        assert!((b.vectors[0].frobenius_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_strand_standard_irrep() {
        let b = irrep_basis_small_k(1, &part(&[1]), 4).unwrap();
        assert_eq!(b.vectors.len(), 1);
        assert!(b.gram_defect < 1e-8, "{}", b.gram_defect);
        assert_eq!(b.hook_dim, 3.0);
    }

    fn diagram(k: usize, blocks: &[&[usize]]) -> SetPartitionDiagram {
        SetPartitionDiagram::from_blocks(k, &blocks.iter().map(|b| b.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn two_strand_bases() {
        let dims = [(IntegerPartition::empty(), 2usize), (part(&[1]), 3), (part(&[2]), 1), (part(&[1, 1]), 1)];
        let mut total = 0;
        for (mu, dim) in dims {
            let b = irrep_basis_small_k(2, &mu, 5).unwrap();
            assert_eq!(b.vectors.len(), dim, "{mu:?}");
            assert!(b.diagonal_defect < 1e-8, "{mu:?}: {}", b.diagonal_defect);
            total += dim * dim;
            if mu.size() != 1 {
                assert!(b.gram_defect < 1e-8, "{mu:?}: {}", b.gram_defect);
                assert!(b.multiplicative_defect < 1e-8, "{mu:?}: {}", b.multiplicative_defect);
            }
        }
        assert_eq!(total, 15);
    }

    // Two noncrossing 1-factors with the same top row, attached to different
    // top blocks: Ô_{ω'}†Ô_ω = (J - I) ⊗ J, which is -N e_1 modulo J_0, so the
    // representatives overlap by -N / c(ω) = -1/(N-1) after the quotient.
    #[test]
    fn same_top_row_factors_overlap() {
        for n in [4usize, 5, 7] {
            let b = irrep_basis_small_k(2, &part(&[1]), n).unwrap();
            let find = |p: &SetPartitionDiagram| b.labels.iter().position(|(f, _)| &f.base == p).unwrap();
            let left = find(&diagram(2, &[&[1, 3], &[2], &[4]]));
            let right = find(&diagram(2, &[&[1], &[2, 3], &[4]]));
            let joined = find(&diagram(2, &[&[1, 2, 3], &[4]]));
            let expect = -1.0 / (n as f64 - 1.0);
            assert!((b.gram[(left, right)].re - expect).abs() < 1e-10);
            assert!(b.gram[(left, joined)].norm() < 1e-10 && b.gram[(right, joined)].norm() < 1e-10);
            assert!((b.gram_defect - expect.abs()).abs() < 1e-10);
        }
    }

    #[test]
    fn three_strand_bases() {
        let mut total = 0;
        for mu in (0..=3).flat_map(IntegerPartition::all) {
            let b = irrep_basis_small_k(3, &mu, 6).unwrap();
            let f = hook_length_count(&mu).to_usize().unwrap();
            assert_eq!(b.vectors.len() % f, 0);
            assert!(b.diagonal_defect < 1e-8, "{mu:?}: {}", b.diagonal_defect);
            total += b.vectors.len().pow(2);
            if mu.size() == 0 || mu.size() == 3 {
                assert!(b.gram_defect < 1e-8, "{mu:?}: {}", b.gram_defect);
                assert!(b.multiplicative_defect < 1e-8, "{mu:?}: {}", b.multiplicative_defect);
            } else {
                let expect = 1.0 / (6.0 - mu.size() as f64);
                assert!((b.gram_defect - expect).abs() < 1e-10, "{mu:?}: {}", b.gram_defect);
            }
        }
        assert_eq!(total, 203);
    }

    #[test]
    fn preconditions() {
        assert!(matches!(irrep_basis_small_k(4, &part(&[1]), 8), Err(Error::Resource(_))));
        assert!(matches!(irrep_basis_small_k(2, &part(&[1]), 3), Err(Error::Domain(_))));
        assert!(irrep_basis_small_k(1, &part(&[2]), 4).is_err());
    }
}
