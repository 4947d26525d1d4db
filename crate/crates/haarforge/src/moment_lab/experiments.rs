use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{frame_potential, ginibre_norm_sq_impl, VEnsembleSampler};
use crate::error::{domain, Error, Result};
use crate::free_words::FreeWord;
use crate::matrix_engine::{EnsembleConfig, C64};
use crate::partition_algebra::balanced_partitions;
use crate::perm_core::{sample_phased_permutation, sample_uniform_permutation, Permutation};
use crate::rng::{derive_seed, map_samples, mean_and_se, KahanSum, CHUNK};

/// One measured quantity with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub config: Value,
    pub metric: String,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub extra: Map<String, Value>,
}

/// ‖E[G^{⊗k} ⊗ Ḡ^{⊗k}]‖_F² for N × N Ginibre G.
pub fn ginibre_norm_sq(k: usize, n: usize) -> f64 {
    ginibre_norm_sq_impl(k, n)
}

/// Exact ‖M_Z − M_G‖_F² for a single phased permutation Z (needs N ≥ k):
/// |balanced diagrams| − 2·k! + ‖M_G‖².
pub fn phased_permutation_distance_sq(k: usize, n: usize) -> Result<f64> {
    if n < k {
        return domain(format!("needs N >= k (N={n}, k={k})"));
    }
    let b = balanced_partitions(k)?.len() as f64;
    let kf = (1..=k).product::<usize>() as f64;
    Ok(b - 2.0 * kf + ginibre_norm_sq(k, n))
}

fn equality_pattern(values: &[usize]) -> Vec<u8> {
    let mut seen: Vec<usize> = Vec::with_capacity(values.len());
    values
        .iter()
        .map(|v| match seen.iter().position(|s| s == v) {
            Some(i) => i as u8,
            None => {
                seen.push(*v);
                (seen.len() - 1) as u8
            }
        })
        .collect()
}

/// Probability of a pattern of (0, x_1..x_w) when the x_i are i.i.d. uniform.
fn reference_pattern_prob(pattern: &[u8], n: usize) -> f64 {
    let blocks = pattern.iter().copied().max().map_or(0, |m| m as usize + 1);
    let w = pattern.len() - 1;
    let nf = n as f64;
    let mut p = 1.0;
    for i in 0..blocks - 1 {
        p *= (nf - 1.0 - i as f64) / nf;
    }
    p * nf.powi(-((w + 1 - blocks) as i32))
}

fn validate_words(words: &[FreeWord]) -> Result<u32> {
    if words.is_empty() {
        return domain("need at least one word");
    }
    for (i, w) in words.iter().enumerate() {
        if w.is_identity() {
            return domain("trivial word in freeness experiment");
        }
        if words[..i].contains(w) {
            return domain(format!("duplicate word {w}"));
        }
    }
    Ok(words.iter().map(|w| w.max_generator()).max().unwrap_or(0))
}

/// Image of basis vector 0 under the word, generator a acting as `perms[a-1]`.
fn word_image(w: &FreeWord, perms: &[Permutation], inverses: &[Permutation]) -> usize {
    let mut x = 0;
    for (g, s) in w.letters().into_iter().rev() {
        let p = if s > 0 { &perms[g as usize - 1] } else { &inverses[g as usize - 1] };
        x = p.image(x);
    }
    x
}

fn pattern_tv(counts: &HashMap<Vec<u8>, f64>, n: usize) -> f64 {
    let mut seen_ref = KahanSum::new();
    let mut diff = KahanSum::new();
    for (pat, &p) in counts {
        let q = reference_pattern_prob(pat, n);
        seen_ref.add(q);
        diff.add((p - q).abs());
    }
    0.5 * (diff.value() + (1.0 - seen_ref.value()).max(0.0))
}

/// Exact TV by enumerating every tuple of generator permutations (tiny N only).
pub fn freeness_exact(words: &[FreeWord], n: usize) -> Result<f64> {
    let g = validate_words(words)? as usize;
    let perms = Permutation::all(n);
    let total = (perms.len() as f64).powi(g as i32);
    if total > 2e6 {
        return Err(Error::Resource(format!("{total} generator tuples exceed the enumeration cap")));
    }
    let inverses: Vec<Permutation> = perms.iter().map(|p| p.invert()).collect();
    let mut hits: HashMap<Vec<u8>, u64> = HashMap::new();
    let mut idx = vec![0usize; g];
    loop {
        let ps: Vec<Permutation> = idx.iter().map(|&i| perms[i].clone()).collect();
        let inv: Vec<Permutation> = idx.iter().map(|&i| inverses[i].clone()).collect();
        let mut vals = vec![0usize];
        vals.extend(words.iter().map(|w| word_image(w, &ps, &inv)));
        *hits.entry(equality_pattern(&vals)).or_default() += 1;
        let mut i = g;
        loop {
            if i == 0 {
                let counts = hits.into_iter().map(|(p, c)| (p, c as f64 / total)).collect();
                return Ok(pattern_tv(&counts, n));
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < perms.len() {
                break;
            }
            idx[i] = 0;
        }
    }
}

/// Per N: TV distance between the law of the word images of e_0 and
/// independent uniform images. Both laws are invariant under relabelings
/// fixing 0, so the TV over equality patterns of (0, images) is the full TV.
pub fn freeness_experiment(words: &[FreeWord], n_list: &[usize], n_samples: usize, seed: u64) -> Result<Vec<ExperimentRecord>> {
    let g = validate_words(words)? as usize;
    if n_samples == 0 {
        return domain("n_samples must be positive");
    }
    let word_text: Vec<String> = words.iter().map(|w| w.to_string()).collect();
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n < 2 {
            return domain(format!("N must be at least 2, got {n}"));
        }
        let start = Instant::now();
        let pats: Vec<Vec<u8>> = map_samples(derive_seed(seed, &[n as u64]), n_samples, |rng| {
            // Phases do not move basis indices, so only the permutations are drawn.
            let ps: Vec<Permutation> = (0..g).map(|_| sample_uniform_permutation(n, rng)).collect::<Result<_>>()?;
            let inv: Vec<Permutation> = ps.iter().map(|p| p.invert()).collect();
            let mut vals = vec![0usize];
            vals.extend(words.iter().map(|w| word_image(w, &ps, &inv)));
            Ok(equality_pattern(&vals))
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let mut hits: HashMap<Vec<u8>, u64> = HashMap::new();
        for p in pats {
            *hits.entry(p).or_default() += 1;
        }
        let counts: HashMap<Vec<u8>, f64> = hits.into_iter().map(|(p, c)| (p, c as f64 / n_samples as f64)).collect();
        let tv = pattern_tv(&counts, n);
        let var: f64 = counts.values().map(|p| p * (1.0 - p)).sum::<f64>() / n_samples as f64;
        let mut extra = Map::new();
        extra.insert("patterns_observed".into(), json!(counts.len()));
        extra.insert("std_error_kind".into(), json!("multinomial plug-in"));
        out.push(ExperimentRecord {
            experiment: "freeness".into(),
            config: json!({"words": word_text, "N": n, "samples": n_samples, "seed": seed}),
            metric: "tv_distance".into(),
            value: tv,
            std_error: 0.5 * var.sqrt(),
            n_samples,
            wall_time_s: start.elapsed().as_secs_f64(),
            extra,
        });
    }
    Ok(out)
}

/// (1/8) Σ_j ((4k|w_j|)^4 + (4k|w_j|)^{2k}).
pub fn lindeberg_bound(weights: &[f64], k: usize) -> f64 {
    weights
        .iter()
        .map(|w| {
            let x = 4.0 * k as f64 * w.abs();
            x.powi(4) + x.powi(2 * k as i32)
        })
        .sum::<f64>()
        / 8.0
}

/// Sparse draws of Σ_j w_j Z_j stored as a CSR table over cells r·N + c.
struct SparseDraws {
    offsets: Vec<usize>,
    cells: Vec<u32>,
    values: Vec<C64>,
    norm_pow: Vec<f64>,
}

fn sparse_weighted_draws(weights: &[f64], k: usize, n: usize, n_samples: usize, seed: u64) -> Result<SparseDraws> {
    let draws: Vec<Vec<(u32, C64)>> = map_samples(seed, n_samples, |rng| {
        let mut entries: Vec<(u32, C64)> = Vec::with_capacity(weights.len() * n);
        for &w in weights {
            let z = sample_phased_permutation(n, rng)?;
            for (c, (&r, &p)) in z.perm().mapping().iter().zip(z.phases()).enumerate() {
                entries.push(((r * n + c) as u32, p * w));
            }
        }
        entries.sort_unstable_by_key(|e| e.0);
        let mut merged: Vec<(u32, C64)> = Vec::with_capacity(entries.len());
        for (cell, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == cell => last.1 += v,
                _ => merged.push((cell, v)),
            }
        }
        Ok(merged)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut offsets = Vec::with_capacity(n_samples + 1);
    offsets.push(0);
    let total: usize = draws.iter().map(|d| d.len()).sum();
    let mut cells = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    let mut norm_pow = Vec::with_capacity(n_samples);
    for d in draws {
        norm_pow.push(d.iter().map(|e| e.1.norm_sqr()).sum::<f64>().powi(k as i32));
        for (c, v) in d {
            cells.push(c);
            values.push(v);
        }
        offsets.push(cells.len());
    }
    Ok(SparseDraws { offsets, cells, values, norm_pow })
}

/// U-statistic for ‖M_O − M_G‖_F² with kernel
/// h(i,j) = |tr(O_i†O_j)|^{2k} − (k!/N^k)(‖O_i‖^{2k} + ‖O_j‖^{2k}) + ‖M_G‖².
/// Returns (mean, 2·sd(h̄_i)/√n).
fn ginibre_distance_u_statistic(d: &SparseDraws, k: usize, n: usize) -> (f64, f64) {
    let ns = d.norm_pow.len();
    let n_cells = n * n;
    // Cell buckets: sample indices holding each cell, in increasing order.
    let mut bucket_off = vec![0usize; n_cells + 1];
    for &c in &d.cells {
        bucket_off[c as usize + 1] += 1;
    }
    for c in 0..n_cells {
        bucket_off[c + 1] += bucket_off[c];
    }
    let mut fill = bucket_off.clone();
    let mut b_idx = vec![0u32; d.cells.len()];
    let mut b_val = vec![C64::new(0.0, 0.0); d.cells.len()];
    for i in 0..ns {
        for e in d.offsets[i]..d.offsets[i + 1] {
            let c = d.cells[e] as usize;
            b_idx[fill[c]] = i as u32;
            b_val[fill[c]] = d.values[e];
            fill[c] += 1;
        }
    }
    let kf = (1..=k).product::<usize>() as f64;
    let a = kf / (n as f64).powi(k as i32);
    let g = ginibre_norm_sq(k, n);
    let n_chunks = ns.div_ceil(CHUNK);
    let partial: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|ch| {
            let mut rows = vec![0.0f64; ns];
            let mut buf = vec![C64::new(0.0, 0.0); ns];
            let mut touched: Vec<usize> = Vec::new();
            for i in ch * CHUNK..((ch + 1) * CHUNK).min(ns) {
                for e in d.offsets[i]..d.offsets[i + 1] {
                    let c = d.cells[e] as usize;
                    let vi = d.values[e].conj();
                    let (lo, hi) = (bucket_off[c], bucket_off[c + 1]);
                    let start = lo + b_idx[lo..hi].partition_point(|&j| j as usize <= i);
                    for t in start..hi {
                        let j = b_idx[t] as usize;
                        if buf[j] == C64::new(0.0, 0.0) {
                            touched.push(j);
                        }
                        buf[j] += vi * b_val[t];
                    }
                }
                let base = g - a * d.norm_pow[i];
                let mut row_i = 0.0;
                for (j, row_j) in rows.iter_mut().enumerate().skip(i + 1) {
                    let h = buf[j].norm_sqr().powi(k as i32) + base - a * d.norm_pow[j];
                    row_i += h;
                    *row_j += h;
                }
                rows[i] += row_i;
                for &j in &touched {
                    buf[j] = C64::new(0.0, 0.0);
                }
                touched.clear();
            }
            rows
        })
        .collect();
    let mut rows = vec![0.0f64; ns];
    for p in partial {
        for (r, x) in rows.iter_mut().zip(p) {
            *r += x;
        }
    }
    let hbar: Vec<f64> = rows.iter().map(|r| r / (ns - 1) as f64).collect();
    let (mean, se_mean) = mean_and_se(&hbar);
    // se_mean = sd/√n, so the Hoeffding-projection error is twice that.
    (mean, 2.0 * se_mean)
}

/// Monte-Carlo ‖M_O − M_G‖_F² for O = Σ_j w_j Z_j against the exact Ginibre moment.
pub fn lindeberg_experiment(weights: &[f64], k: usize, n: usize, n_samples: usize, seed: u64) -> Result<ExperimentRecord> {
    if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
        return domain("weights must be a non-empty list of finite numbers");
    }
    let norm: f64 = weights.iter().map(|w| w * w).sum();
    if (norm - 1.0).abs() > 1e-12 {
        return domain(format!("weights must satisfy sum w^2 = 1 within 1e-12 (got {norm})"));
    }
    if k == 0 || k > 4 {
        return domain(format!("k must be in 1..=4, got {k}"));
    }
    if !(2..=4096).contains(&n) {
        return domain(format!("N must be in 2..=4096, got {n}"));
    }
    if n_samples < 3 {
        return domain("n_samples must be at least 3");
    }
    let start = Instant::now();
    let draws = sparse_weighted_draws(weights, k, n, n_samples, seed)?;
    let (d2, se) = ginibre_distance_u_statistic(&draws, k, n);
    let bound = lindeberg_bound(weights, k);
    let mut extra = Map::new();
    extra.insert("distance".into(), json!(d2.max(0.0).sqrt()));
    extra.insert("bound".into(), json!(bound));
    extra.insert("norm".into(), json!("frobenius (diamond-norm proxy)"));
    Ok(ExperimentRecord {
        experiment: "lindeberg".into(),
        config: json!({"weights": weights, "k": k, "N": n, "samples": n_samples, "seed": seed}),
        metric: "distance_sq_to_ginibre".into(),
        value: d2,
        std_error: se,
        n_samples,
        wall_time_s: start.elapsed().as_secs_f64(),
        extra,
    })
}

/// Grid cell of the design report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignCell {
    #[serde(rename = "N")]
    pub n: usize,
    pub m: usize,
    pub ell: usize,
}

/// Sequence of (x, value, std_error) checked against a monotone trend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendCheck {
    pub axis: String,
    pub fixed: String,
    pub points: Vec<(usize, f64, f64)>,
    /// Strict: each step must drop by more than 2σ. Otherwise it may not rise by more than 2σ.
    pub strict: bool,
    pub holds: bool,
    /// Largest (v_next − v_prev)/σ_diff over consecutive steps.
    pub worst_step_sigma: f64,
}

pub fn trend_check(axis: &str, fixed: &str, mut points: Vec<(usize, f64, f64)>, strict: bool) -> TrendCheck {
    points.sort_by_key(|p| p.0);
    let mut holds = true;
    let mut worst = f64::NEG_INFINITY;
    for w in points.windows(2) {
        let sigma = w[0].2.hypot(w[1].2);
        let step = w[1].1 - w[0].1;
        let z = if sigma > 0.0 { step / sigma } else if step > 0.0 { f64::INFINITY } else if step < 0.0 { f64::NEG_INFINITY } else { 0.0 };
        worst = worst.max(z);
        let ok = if strict { -step > 2.0 * sigma } else { step <= 2.0 * sigma };
        holds &= ok;
    }
    TrendCheck { axis: axis.into(), fixed: fixed.into(), points, strict, holds, worst_step_sigma: worst }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub k: usize,
    pub records: Vec<ExperimentRecord>,
    pub ell_trends: Vec<TrendCheck>,
    pub n_trends: Vec<TrendCheck>,
}

/// Largest N accepted by the design report.
pub const DESIGN_MAX_N: usize = 256;

/// Per cell: frame potential F of V and D² = ‖M_V − M_Haar‖_F² = F − k!,
/// plus trend checks in ℓ (fixed N, m) and in N (fixed m, ℓ).
pub fn design_report(cells: &[DesignCell], k: usize, n_pairs: usize, seed: u64, theta: Option<f64>) -> Result<DesignReport> {
    if let Some(c) = cells.iter().find(|c| c.n > DESIGN_MAX_N) {
        return Err(Error::Resource(format!("N={} exceeds the design-report cap {DESIGN_MAX_N}", c.n)));
    }
    let kf = (1..=k).product::<usize>() as f64;
    let mut records = Vec::with_capacity(cells.len());
    for c in cells {
        let start = Instant::now();
        let cfg = EnsembleConfig { n: c.n, m: c.m, ell: c.ell, k, theta, seed };
        let sampler = VEnsembleSampler::new(cfg)?;
        let (f, se) = frame_potential(&sampler, k, n_pairs, derive_seed(seed, &[c.n as u64, c.m as u64, c.ell as u64]))?;
        let mut extra = Map::new();
        extra.insert("frame_potential".into(), json!(f));
        extra.insert("theta".into(), json!(sampler.theta()));
        extra.insert("norm".into(), json!("frobenius (diamond-norm proxy)"));
        if c.ell == 0 && c.n >= k {
            let exact = balanced_partitions(k)?.len() as f64 - kf;
            extra.insert("exact_distance_sq".into(), json!(exact));
        }
        records.push(ExperimentRecord {
            experiment: "design".into(),
            config: json!({"N": c.n, "m": c.m, "ell": c.ell, "k": k, "pairs": n_pairs, "seed": seed}),
            metric: "distance_sq_to_haar".into(),
            value: f - kf,
            std_error: se,
            n_samples: n_pairs,
            wall_time_s: start.elapsed().as_secs_f64(),
            extra,
        });
    }
    let mut by_nm: HashMap<(usize, usize), Vec<(usize, f64, f64)>> = HashMap::new();
    let mut by_ml: HashMap<(usize, usize), Vec<(usize, f64, f64)>> = HashMap::new();
    for (c, r) in cells.iter().zip(&records) {
        by_nm.entry((c.n, c.m)).or_default().push((c.ell, r.value, r.std_error));
        by_ml.entry((c.m, c.ell)).or_default().push((c.n, r.value, r.std_error));
    }
    let mut ell_trends: Vec<TrendCheck> = by_nm
        .into_iter()
        .filter(|(_, p)| p.len() > 1)
        .map(|((n, m), p)| trend_check("ell", &format!("N={n}, m={m}"), p, false))
        .collect();
    let mut n_trends: Vec<TrendCheck> = by_ml
        .into_iter()
        .filter(|(_, p)| p.len() > 1)
        .map(|((m, l), p)| trend_check("N", &format!("m={m}, ell={l}"), p, false))
        .collect();
    ell_trends.sort_by(|a, b| a.fixed.cmp(&b.fixed));
    n_trends.sort_by(|a, b| a.fixed.cmp(&b.fixed));
    Ok(DesignReport { k, records, ell_trends, n_trends })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(s: &str) -> FreeWord {
        s.parse().unwrap()
    }

    #[test]
    fn reference_patterns_sum_to_one() {
        let pats: Vec<Vec<u8>> = crate::partition_algebra::enumerate_partitions(4).unwrap();
        for n in [2, 3, 7] {
            let s: f64 = pats.iter().map(|p| reference_pattern_prob(p, n)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_word_is_exactly_uniform() {
        for n in [3, 4, 5] {
            assert!(freeness_exact(&[word("1")], n).unwrap().abs() < 1e-15);
        }
        assert!(freeness_exact(&[word("1"), word("2")], 4).unwrap().abs() < 1e-15);
        // Z2Z1 correlates with Z1, Z2
        assert!(freeness_exact(&[word("1"), word("2"), word("2.1")], 4).unwrap() > 0.0);
    }

    #[test]
    fn freeness_rejects_bad_words() {
        assert!(freeness_experiment(&[FreeWord::identity()], &[8], 10, 0).is_err());
        assert!(freeness_experiment(&[word("1"), word("1")], &[8], 10, 0).is_err());
        assert!(freeness_experiment(&[], &[8], 10, 0).is_err());
    }

    #[test]
    fn freeness_mc_matches_exact_small_n() {
        let words = [word("1"), word("2"), word("2.1")];
        let exact = freeness_exact(&words, 4).unwrap();
        let r = &freeness_experiment(&words, &[4], 200_000, 3).unwrap()[0];
        assert!((r.value - exact).abs() < 0.01, "{} vs {exact}", r.value);
    }

    #[test]
    fn freeness_decays_with_n() {
        let words = [word("1"), word("1.1")];
        let recs = freeness_experiment(&words, &[8, 64, 512], 50_000, 4).unwrap();
        assert!(recs[0].value > recs[1].value && recs[1].value > recs[2].value);
    }

    #[test]
    fn lindeberg_bound_scales_inverse_m() {
        let b = |m: usize| lindeberg_bound(&vec![1.0 / (m as f64).sqrt(); m], 2);
        for m in [2, 4, 8] {
            assert!((b(m) / b(2 * m) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lindeberg_single_weight_matches_exact() {
        let n = 16;
        let r = lindeberg_experiment(&[1.0], 2, n, 3000, 8).unwrap();
        let exact = phased_permutation_distance_sq(2, n).unwrap();
        assert!((exact - (1.0 + 2.0 / 256.0)).abs() < 1e-12);
        assert!((r.value - exact).abs() < 4.0 * r.std_error, "{} ± {} vs {exact}", r.value, r.std_error);
        assert!(lindeberg_experiment(&[0.5, 0.5], 2, n, 100, 0).is_err());
    }

    #[test]
    fn u_statistic_matches_dense_pairs() {
        // Brute-force mean over all pairs with dense traces.
        let (n, k, ns) = (5, 2, 40);
        let w = [0.6, 0.8];
        let d = sparse_weighted_draws(&w, k, n, ns, 12).unwrap();
        let dense: Vec<Vec<C64>> = (0..ns)
            .map(|i| {
                let mut m = vec![C64::new(0.0, 0.0); n * n];
                for e in d.offsets[i]..d.offsets[i + 1] {
                    m[d.cells[e] as usize] = d.values[e];
                }
                m
            })
            .collect();
        let a = 2.0 / 25.0;
        let g = ginibre_norm_sq(k, n);
        let mut s = 0.0;
        let mut pairs = 0.0;
        for i in 0..ns {
            for j in i + 1..ns {
                let t: C64 = dense[i].iter().zip(&dense[j]).map(|(x, y)| x.conj() * y).sum();
                s += t.norm_sqr().powi(2) - a * (d.norm_pow[i] + d.norm_pow[j]) + g;
                pairs += 1.0;
            }
        }
        let (mean, se) = ginibre_distance_u_statistic(&d, k, n);
        assert!((mean - s / pairs).abs() < 1e-10);
        assert!(se > 0.0);
    }

    #[test]
    fn trend_checks() {
        let t = trend_check("m", "", vec![(4, 0.5, 0.01), (2, 1.0, 0.01), (8, 0.2, 0.01)], true);
        assert!(t.holds);
        assert_eq!(t.points[0].0, 2);
        let t = trend_check("ell", "", vec![(1, 0.1, 0.05), (2, 0.15, 0.05)], false);
        assert!(t.holds);
        let t = trend_check("ell", "", vec![(1, 0.1, 0.01), (2, 0.5, 0.01)], false);
        assert!(!t.holds);
    }

    #[test]
    fn design_report_bare_permutation_is_far() {
        let cells = [DesignCell { n: 8, m: 2, ell: 0 }, DesignCell { n: 16, m: 2, ell: 0 }, DesignCell { n: 8, m: 2, ell: 2 }];
        let rep = design_report(&cells, 2, 4000, 1, None).unwrap();
        for r in &rep.records[..2] {
            assert_eq!(r.extra["exact_distance_sq"], json!(1.0));
            assert!((r.value - 1.0).abs() < 4.0 * r.std_error, "{} ± {}", r.value, r.std_error);
        }
        assert!(rep.records[2].value < 0.5);
        assert_eq!(rep.ell_trends.len(), 1);
        assert_eq!(rep.n_trends.len(), 1);
    }
}
