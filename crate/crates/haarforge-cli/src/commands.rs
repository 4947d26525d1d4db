use std::time::Instant;

use haarforge::free_words::{expand_exponential, weight_stats, FreeWord};
use haarforge::interpolation::{large_n_check, markov_check, run_suite, Suite};
use haarforge::matrix_engine::{DenseOperator, EnsembleConfig, C64};
use haarforge::moment_lab::{
    design_report, frame_potential, freeness_experiment, ginibre_moment_operator, haar_moment_operator,
    lindeberg_bound, lindeberg_experiment, mc_moment_operator, moment_distance, DesignCell, ExperimentRecord,
    FixedSampler, GinibreSampler, HaarSampler, MatrixSampler, NormKind, PermutationSampler,
    PhasedPermutationSampler, VEnsembleSampler,
};
use haarforge::partition_algebra::{
    all_diagrams, bell, diagram_rank, mobius_matrices, moment_projector_perm, multiply, realize_distinct_int,
    realize_int, IntOperator,
};
use haarforge::perm_core::sample_phased_permutation;
use haarforge::rng::stream_rng;
use haarforge::theta_select::{generator_angle, theta_root};
use serde_json::{json, Map, Value};

use crate::config::{check_stable_range, parse_grid};
use crate::{Command, CliError, DiagramCheck, Ensemble, EnsembleArgs, Invocation, SuiteArg};

/// Records of one command and, when a check failed, why.
pub struct Outcome {
    pub records: Vec<ExperimentRecord>,
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(records: Vec<ExperimentRecord>) -> Self {
        Self { records, failure: None }
    }
}

fn record(experiment: &str, metric: &str, value: f64, config: Value, extra: Map<String, Value>) -> ExperimentRecord {
    ExperimentRecord {
        experiment: experiment.into(),
        config,
        metric: metric.into(),
        value,
        std_error: 0.0,
        n_samples: 0,
        wall_time_s: 0.0,
        extra,
    }
}

fn extra(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

pub fn dispatch(inv: &Invocation) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let mut out = match &inv.cli.command {
        Command::Theta { m } => theta(*m),
        Command::ExpandWords { m, theta, d } => expand_words(*m, *theta, *d),
        Command::Diagram { k, n, check } => diagram(*k, *n, *check),
        Command::Moments { ensemble, exact, params } => moments(inv, *ensemble, *exact, params),
        Command::FramePotential { ensemble, params } => frame(inv, *ensemble, params),
        Command::Freeness { words } => freeness(inv, words),
        Command::Lindeberg { weights, k } => lindeberg(inv, weights.as_deref(), *k),
        Command::DesignReport { k, theta } => design(inv, *k, *theta),
        Command::Markov { suite, trials } => markov(inv, *suite, *trials),
        Command::Selftest => selftest(),
    }?;
    let elapsed = start.elapsed().as_secs_f64();
    for r in out.records.iter_mut().filter(|r| r.wall_time_s == 0.0) {
        r.wall_time_s = elapsed;
    }
    Ok(out)
}

fn theta(m: u64) -> Result<Outcome, CliError> {
    let root = theta_root(m)?;
    let mut ex = extra(json!({"residual": root.residual, "bracket": root.bracket, "convention": root.convention}));
    if let Ok(g) = generator_angle(m as usize) {
        ex.insert("generator_angle".into(), json!(g));
    }
    Ok(Outcome::ok(vec![record("theta", "theta", root.theta, json!({"m": m}), ex)]))
}

fn expand_words(m: usize, theta: Option<f64>, d: usize) -> Result<Outcome, CliError> {
    let theta = match theta {
        Some(t) => t,
        None => generator_angle(m)?,
    };
    let wc = expand_exponential(m, theta, d)?;
    let st = weight_stats(&wc);
    let ex = extra(json!({
        "n_words": st.n_words,
        "max_abs_weight": st.max_abs,
        "identity_coeff_abs": wc.identity_coeff.norm(),
        "normalization_defect": wc.total_weight() - 1.0,
    }));
    Ok(Outcome::ok(vec![record("expand_words", "total_weight", wc.total_weight(), json!({"m": m, "theta": theta, "d": d}), ex)]))
}

fn diagram( k: usize, n: usize, check: DiagramCheck) -> Result<Outcome, CliError> {
    if check != DiagramCheck::Rank {
        check_stable_range("diagram", n, k)?;
    }
    let cfg = json!({"k": k, "N": n, "check": check});
    let (metric, value, ex, failure) = match check {
        DiagramCheck::Mult => {
            let ds = all_diagrams(k)?;
            let ops: Vec<IntOperator> = ds.iter().map(|p| realize_int(p, n)).collect::<Result<_, _>>()?;
            let mut bad = 0usize;
            for (i2, p2) in ds.iter().enumerate() {
                for (i1, p1) in ds.iter().enumerate() {
                    let (prod, d) = multiply(p2, p1)?;
                    let lhs = ops[i2].matmul(&ops[i1])?;
                    let rhs = realize_int(&prod, n)?.scale((n as i64).pow(d));
                    bad += usize::from(lhs != rhs);
                }
            }
            let pairs = ds.len() * ds.len();
            ("mismatched_pairs", bad as f64, json!({"pairs": pairs}), (bad > 0).then(|| format!("{bad} of {pairs} products differ")))
        }
        DiagramCheck::Mobius => {
            let mm = mobius_matrices(k)?;
            let identity = mm.product_is_identity();
            let mut bad = 0usize;
            for (i, p) in mm.order.iter().enumerate() {
                let mut sum: Option<IntOperator> = None;
                for &j in &mm.k_rows[i] {
                    let o = realize_distinct_int(&mm.order[j], n)?;
                    sum = Some(match sum {
                        Some(s) => s.add(&o)?,
                        None => o,
                    });
                }
                bad += usize::from(sum.as_ref() != Some(&realize_int(p, n)?));
            }
            let failure = (bad > 0 || !identity).then(|| format!("{bad} reconstructions differ, K*K^-1 = I: {identity}"));
            ("failed_reconstructions", bad as f64, json!({"diagrams": mm.len(), "k_kinv_identity": identity}), failure)
        }
        DiagramCheck::Rank => {
            let (rank, sv) = diagram_rank(k, n)?;
            let b = bell(2 * k);
            let stable = n >= 2 * k;
            let failure = (stable && rank as u64 != b).then(|| format!("rank {rank} != Bell_{} = {b} at N={n}", 2 * k));
            ("rank", rank as f64, json!({"bell": b, "stable_range": stable, "smallest_singular_value": sv.iter().copied().fold(f64::INFINITY, f64::min)}), failure)
        }
        DiagramCheck::Projector => {
            let p = moment_projector_perm(k, n)?;
            let defect = p.matmul(&p)?.max_abs_diff(&p)?;
            let failure = (defect > 1e-10).then(|| format!("idempotence defect {defect:.3e}"));
            ("idempotence_defect", defect, json!({"trace": p.trace().re, "hermiticity_defect": p.hermiticity_defect()}), failure)
        }
    };
    Ok(Outcome { records: vec![record("diagram", metric, value, cfg, extra(ex))], failure })
}

/// Config file values overridden by explicit flags.
fn ensemble_config(inv: &Invocation, p: &EnsembleArgs) -> Result<EnsembleConfig, CliError> {
    let mut c = inv.config.ensemble.clone();
    c.n = p.n.unwrap_or(c.n);
    c.m = p.m.unwrap_or(c.m);
    c.ell = p.ell.unwrap_or(c.ell);
    c.k = p.k.unwrap_or(c.k);
    c.theta = p.theta.or(c.theta);
    c.seed = inv.seed;
    c.validate()?;
    Ok(c)
}

fn sampler(e: Ensemble, cfg: &EnsembleConfig) -> Result<Box<dyn MatrixSampler>, CliError> {
    Ok(match e {
        Ensemble::Haar => Box::new(HaarSampler::new(cfg.n)),
        Ensemble::Ginibre => Box::new(GinibreSampler::new(cfg.n)),
        Ensemble::V => Box::new(VEnsembleSampler::new(cfg.clone())?),
        Ensemble::Phased => Box::new(PhasedPermutationSampler::new(cfg.n)),
        Ensemble::Permutation => Box::new(PermutationSampler::new(cfg.n)),
    })
}

fn samples(inv: &Invocation, default: usize) -> usize {
    inv.cli.samples.or(inv.config.samples).unwrap_or(default)
}

fn moments(inv: &Invocation, e: Ensemble, exact: bool, p: &EnsembleArgs) -> Result<Outcome, CliError> {
    let cfg = ensemble_config(inv, p)?;
    let (k, n) = (cfg.k, cfg.n);
    let haar = haar_moment_operator(k, n)?;
    let ginibre = ginibre_moment_operator(k, n)?;
    let echo = json!({"ensemble": e, "exact": exact, "N": n, "k": k, "m": cfg.m, "ell": cfg.ell, "theta": cfg.theta});
    let mut recs = Vec::new();
    if exact {
        let op = match e {
            Ensemble::Haar => &haar,
            Ensemble::Ginibre => &ginibre,
            _ => return Err(CliError::Usage("--exact is available for haar and ginibre only".into())),
        };
        for (name, reference) in [("haar", &haar), ("ginibre", &ginibre)] {
            for kind in [NormKind::Frobenius, NormKind::Spectral] {
                let d = moment_distance(op, reference, kind)?;
                let metric = format!("{kind:?}_distance_to_{name}").to_lowercase();
                recs.push(record("moments", &metric, d, echo.clone(), extra(json!({"haar_norm": haar.frobenius_norm()}))));
            }
        }
        return Ok(Outcome::ok(recs));
    }
    let s = sampler(e, &cfg)?;
    let n_samples = samples(inv, 10_000);
    let start = Instant::now();
    let mc = mc_moment_operator(s.as_ref(), k, n_samples, inv.seed)?;
    let wall = start.elapsed().as_secs_f64();
    for (name, reference) in [("haar", &haar), ("ginibre", &ginibre)] {
        for kind in [NormKind::Frobenius, NormKind::Spectral] {
            let d = moment_distance(&mc.operator, reference, kind)?;
            let metric = format!("{kind:?}_distance_to_{name}").to_lowercase();
            let mut r = record("moments", &metric, d, echo.clone(), extra(json!({"max_entry_std_error": mc.max_std_error(), "batches": mc.n_batches})));
            r.n_samples = n_samples;
            r.wall_time_s = wall;
            recs.push(r);
        }
    }
    Ok(Outcome::ok(recs))
}

fn frame(inv: &Invocation, e: Ensemble, p: &EnsembleArgs) -> Result<Outcome, CliError> {
    let cfg = ensemble_config(inv, p)?;
    let s = sampler(e, &cfg)?;
    let pairs = samples(inv, 10_000);
    let start = Instant::now();
    let (f, se) = frame_potential(s.as_ref(), cfg.k, pairs, inv.seed)?;
    let kf = (1..=cfg.k).product::<usize>();
    Ok(Outcome::ok(vec![ExperimentRecord {
        experiment: "frame_potential".into(),
        config: json!({"ensemble": e, "N": cfg.n, "k": cfg.k, "m": cfg.m, "ell": cfg.ell, "theta": cfg.theta}),
        metric: "frame_potential".into(),
        value: f,
        std_error: se,
        n_samples: pairs,
        wall_time_s: start.elapsed().as_secs_f64(),
        extra: extra(json!({"haar_value": kf, "sampler": s.label()})),
    }]))
}

fn grid(inv: &Invocation, allowed: &[&str]) -> Result<std::collections::BTreeMap<String, Vec<usize>>, CliError> {
    match &inv.cli.grid {
        Some(g) => parse_grid(g, allowed),
        None => Ok(Default::default()),
    }
}

fn freeness(inv: &Invocation, words: &str) -> Result<Outcome, CliError> {
    let words: Vec<FreeWord> = words
        .split(',')
        .map(|w| w.trim().parse::<FreeWord>())
        .collect::<Result<_, _>>()?;
    let g = grid(inv, &["N"])?;
    let ns = g.get("N").cloned().unwrap_or_else(|| (6..=12).map(|e| 1usize << e).collect());
    Ok(Outcome::ok(freeness_experiment(&words, &ns, samples(inv, 100_000), inv.seed)?))
}

fn lindeberg(inv: &Invocation, weights: Option<&str>, k: Option<usize>) -> Result<Outcome, CliError> {
    let g = grid(inv, &["N", "m"])?;
    let k = k.unwrap_or(inv.config.ensemble.k);
    let ns = g.get("N").cloned().unwrap_or_else(|| vec![64]);
    let n_samples = samples(inv, 10_000);
    let weight_sets: Vec<Vec<f64>> = match weights {
        Some(w) => {
            let ws = w
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad weight '{x}'"))))
                .collect::<Result<Vec<_>, _>>()?;
            vec![ws]
        }
        None => g
            .get("m")
            .cloned()
            .unwrap_or_else(|| vec![2, 4, 8, 16])
            .into_iter()
            .map(|m| vec![1.0 / (m as f64).sqrt(); m.max(1)])
            .collect(),
    };
    let mut recs = Vec::new();
    for &n in &ns {
        for (i, w) in weight_sets.iter().enumerate() {
            let seed = haarforge::rng::derive_seed(inv.seed, &[n as u64, i as u64]);
            recs.push(lindeberg_experiment(w, k, n, n_samples, seed)?);
        }
    }
    Ok(Outcome::ok(recs))
}

fn design(inv: &Invocation, k: Option<usize>, theta: Option<f64>) -> Result<Outcome, CliError> {
    let g = grid(inv, &["N", "m", "ell"])?;
    let k = k.unwrap_or(inv.config.ensemble.k);
    let theta = theta.or(inv.config.ensemble.theta);
    let ns = g.get("N").cloned().unwrap_or_else(|| vec![16]);
    let ms = g.get("m").cloned().unwrap_or_else(|| vec![2]);
    let ls = g.get("ell").cloned().unwrap_or_else(|| vec![1, 2, 4, 8]);
    let cells: Vec<DesignCell> = ns
        .iter()
        .flat_map(|&n| ms.iter().flat_map(|&m| ls.iter().map(move |&ell| DesignCell { n, m, ell })).collect::<Vec<_>>())
        .collect();
    let rep = design_report(&cells, k, samples(inv, 10_000), inv.seed, theta)?;
    let mut recs = rep.records;
    for t in rep.ell_trends.iter().chain(&rep.n_trends) {
        let metric = format!("nonincreasing_in_{}", t.axis);
        let ex = extra(json!({"points": t.points, "worst_step_sigma": t.worst_step_sigma}));
        recs.push(record("design_trend", &metric, f64::from(u8::from(t.holds)), json!({"fixed": t.fixed, "k": k}), ex));
    }
    Ok(Outcome::ok(recs))
}

fn markov(inv: &Invocation, suite: SuiteArg, trials: usize) -> Result<Outcome, CliError> {
    let s = match suite {
        SuiteArg::Classic => Suite::Classic,
        SuiteArg::LargeN => Suite::LargeN,
        SuiteArg::Poles => Suite::Poles,
    };
    let start = Instant::now();
    let rep = run_suite(s, trials, inv.seed)?;
    let failure = (!rep.passed).then(|| format!("{} violations in {} trials", rep.violations, rep.trials));
    let mut r = record(
        "markov",
        "violations",
        rep.violations as f64,
        json!({"suite": rep.suite, "trials": trials}),
        extra(json!({"passed": rep.passed, "worst_ratio": rep.worst_ratio, "failures": rep.failures})),
    );
    r.n_samples = trials;
    r.wall_time_s = start.elapsed().as_secs_f64();
    Ok(Outcome { records: vec![r], failure })
}

type Check = (&'static str, fn() -> Result<bool, haarforge::Error>);

fn selftest_checks() -> Vec<Check> {
    vec![
        ("haar_k1_replacement_channel", || {
            let n = 3;
            let m = haar_moment_operator(1, n)?.to_dense()?;
            let on = |x: usize| x / n == x % n;
            let expect = DenseOperator::from_fn(n * n, |a, b| C64::new(if on(a) && on(b) { 1.0 / n as f64 } else { 0.0 }, 0.0));
            Ok(m.max_abs_diff(&expect)? < 1e-12)
        }),
        ("ginibre_equals_haar_at_k1", || {
            let d = moment_distance(&haar_moment_operator(1, 4)?, &ginibre_moment_operator(1, 4)?, NormKind::Frobenius)?;
            Ok(d < 1e-12)
        }),
        ("haar_moment_is_projector", || Ok(haar_moment_operator(2, 4)?.idempotence_defect()? < 1e-10)),
        ("distance_to_self_is_zero", || {
            let h = haar_moment_operator(2, 5)?;
            Ok(moment_distance(&h, &h, NormKind::Spectral)? == 0.0)
        }),
        ("phased_permutation_unitary", || {
            let z = sample_phased_permutation(6, &mut stream_rng(1, 0))?;
            Ok(z.to_dense().unitarity_defect() < 1e-12)
        }),
        ("fixed_frame_potential_is_n_squared", || {
            let (f, _) = frame_potential(&FixedSampler::new(DenseOperator::identity(4)), 1, 4, 0)?;
            Ok((f - 16.0).abs() < 1e-12)
        }),
        ("bell_numbers", || Ok(bell(4) == 15 && all_diagrams(2)?.len() == 15)),
        ("word_text_roundtrip", || {
            let w: FreeWord = "2.1.-3".parse()?;
            Ok(w.to_string() == "2.1.-3" && w.inverse().inverse() == w)
        }),
        ("markov_monomial", || Ok((markov_check(&[0.0, 0.0, 0.0, 1.0], 3)?.sup_df - 3.0).abs() < 1e-9)),
        ("large_n_constant", || Ok(large_n_check(&[2.0], 0, 4)?.lhs == 0.0)),
        ("lindeberg_bound_halves", || {
            let b = |m: usize| lindeberg_bound(&vec![1.0 / (m as f64).sqrt(); m], 2);
            Ok((b(4) / b(8) - 2.0).abs() < 1e-12)
        }),
        ("theta_m1_is_quarter_turn", || Ok((theta_root(1)?.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-9)),
    ]
}

fn selftest() -> Result<Outcome, CliError> {
    let mut recs = Vec::new();
    let mut failed = Vec::new();
    for (name, f) in selftest_checks() {
        let (pass, err) = match f() {
            Ok(p) => (p, None),
            Err(e) => (false, Some(e.to_string())),
        };
        if !pass {
            failed.push(name);
        }
        recs.push(record("selftest", name, f64::from(u8::from(pass)), json!({}), extra(json!({"passed": pass, "error": err}))));
    }
    let failure = (!failed.is_empty()).then(|| format!("selftest failures: {}", failed.join(", ")));
    Ok(Outcome { records: recs, failure })
}
