//! Acceptance suite. Each test prints one `PASS`/`FAIL` line per criterion
//! to stderr (uncaptured) and then asserts it.
//!
//! Run with `cargo test -p bnb-nsga --test acceptance -- --nocapture`.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bnb_nsga::bnb::{self, tree_size, BnbConfig};
use bnb_nsga::harness::{
    run_experiment, snap_for, summarize, write_runs_csv, Distribution, ExperimentConfig, RunRecord,
    SolverConfig, SolverKind,
};
use bnb_nsga::metrics::{
    gd, igd, investment_ratio, onvg, purity, quality_ratio, relative_spread, spread, MetricsReport,
    ReferenceFront,
};
use bnb_nsga::nsga2::{non_dominated_sort, run_nsga2, Nsga2Config};
use bnb_nsga::oracle::{enumerate_true_front, true_front, OracleConfig};
use bnb_nsga::pareto::{pareto_filter, ObjectiveVector, Solution, VariableVector};
use bnb_nsga::problems::{brake, gear, mela, tong, truss, ProblemSpec, TongVariant};

/// Serializes the criteria so timings are not skewed by each other.
static SERIAL: Mutex<()> = Mutex::new(());

const REL_TOL: f64 = 1e-12;

/// Approximate front, reference front, expected value.
type Case<'a> = (&'a [(f64, f64)], &'a [(f64, f64)], f64);

fn verdict(criterion: u32, checks: &[(String, bool)]) {
    let ok = checks.iter().all(|(_, pass)| *pass);
    let mut err = std::io::stderr().lock();
    let tag = if ok { "PASS" } else { "FAIL" };
    writeln!(err, "criterion {criterion}: {tag}").unwrap();
    for (detail, pass) in checks {
        writeln!(
            err,
            "    [{}] {detail}",
            if *pass { "ok" } else { "FAILED" }
        )
        .unwrap();
    }
    drop(err);
    assert!(ok, "criterion {criterion} failed");
}

fn pts(v: &[(f64, f64)]) -> Vec<ObjectiveVector> {
    v.iter()
        .map(|&(a, b)| ObjectiveVector(vec![a, b]))
        .collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn close(got: f64, want: f64) -> bool {
    if want == 0.0 || want.is_infinite() {
        got == want
    } else {
        ((got - want) / want).abs() <= REL_TOL
    }
}

fn sized(pop: usize, gens: usize, stall: usize) -> Nsga2Config {
    Nsga2Config::sized(pop, gens, stall)
}

fn gear_id18(max_nodes: usize) -> BnbConfig {
    BnbConfig {
        root: sized(100, 800, 500),
        node: sized(100, 50, 20),
        leaf: sized(50, 20, 20),
        max_nodes: Some(max_nodes),
        ..BnbConfig::default()
    }
}

fn reports(cfg: &ExperimentConfig, truth: &ReferenceFront) -> Vec<MetricsReport> {
    let result = run_experiment(cfg, truth).unwrap();
    result
        .records
        .into_iter()
        .map(|r| r.metrics.expect("run failed"))
        .collect()
}

#[test]
fn criterion_1_gear_exactness() {
    let _serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut checks = Vec::new();
    let problem = gear();

    let start = Instant::now();
    let oracle = enumerate_true_front(&problem, &OracleConfig::for_problem(&problem)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    checks.push((
        format!("oracle evaluations {} = 49^4 = 5764801", oracle.evaluations),
        oracle.evaluations == 49u64.pow(4),
    ));
    checks.push((format!("oracle time {secs:.1} s < 60 s"), secs < 60.0));
    checks.push((
        format!("true front size {}", oracle.points.len()),
        !oracle.points.is_empty(),
    ));

    // Restricted domain, fathoming off, whole tree.
    let bounds = vec![(12, 20); 4];
    let small = problem.restrict(&bounds).unwrap();
    let small_truth = enumerate_true_front(&small, &OracleConfig::for_problem(&small)).unwrap();
    let cfg = BnbConfig {
        fathoming: false,
        max_nodes: Some(tree_size(&bounds) as usize),
        ..gear_id18(1)
    };
    let out = bnb::solve(&small, &cfg).unwrap();
    let front: Vec<_> = out.archive.objectives();
    let small_igd = igd(&front, &small_truth.points).unwrap();
    let small_purity = purity(&front, &small_truth.points).unwrap();
    checks.push((
        format!(
            "restricted [12,20]^4: IGD {small_igd:e}, purity {small_purity}, {} leaves solved",
            out.stats.leaves_solved
        ),
        small_igd == 0.0 && small_purity == 1.0 && out.stats.leaves_solved == 9usize.pow(4),
    ));

    // Full domain with the gear combination-18 budgets over the whole tree.
    let whole = tree_size(&problem.integer_box()) as usize;
    let truth = ReferenceFront::new(oracle.points.clone(), snap_for(&problem)).unwrap();
    let mut exp = ExperimentConfig::new("gear", 18, SolverConfig::Bnb(gear_id18(whole)));
    exp.repetitions = 10;
    let runs = reports(&exp, &truth);
    let gds: Vec<f64> = runs.iter().map(|r| r.gd).collect();
    let med = median(&gds);
    checks.push((
        format!(
            "full domain, 10 seeds: median GD {med:e} <= 1e-4 (max {:e}, ONVG {:?}, purity median {})",
            gds.iter().cloned().fold(0.0, f64::max),
            runs.iter().map(|r| r.onvg).collect::<Vec<_>>(),
            median(&runs.iter().map(|r| r.purity).collect::<Vec<_>>())
        ),
        med <= 1e-4,
    ));
    verdict(1, &checks);
}

#[test]
fn criterion_2_metric_oracles() {
    let _serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut checks = Vec::new();
    let s2 = 2f64.sqrt();
    let mut case = |name: &str, got: f64, want: f64| {
        checks.push((format!("{name}: got {got}, want {want}"), close(got, want)));
    };

    let gd_cases: [Case; 6] = [
        (
            &[(0.0, 2.0), (2.0, 0.0)],
            &[(0.0, 2.0), (1.0, 1.0), (2.0, 0.0)],
            0.0,
        ),
        (&[(1.0, 1.0)], &[(0.0, 0.0)], s2),
        (&[(0.0, 1.0), (1.0, 0.0)], &[(0.0, 0.0)], s2 / 2.0),
        (&[(3.0, 4.0)], &[(0.0, 0.0), (10.0, 10.0)], 5.0),
        (
            &[(0.0, 2.0), (2.0, 0.0), (1.0, 1.0)],
            &[(0.0, 0.0)],
            10f64.sqrt() / 3.0,
        ),
        (
            &[(1.0, 0.0), (0.0, 3.0)],
            &[(0.0, 0.0), (0.0, 1.0)],
            5f64.sqrt() / 2.0,
        ),
    ];
    for (i, (s, p, want)) in gd_cases.iter().enumerate() {
        case(
            &format!("gd #{}", i + 1),
            gd(&pts(s), &pts(p), None).unwrap(),
            *want,
        );
    }

    let igd_cases: [Case; 5] = [
        (&[(0.0, 1.0), (1.0, 0.0)], &[(0.0, 1.0), (1.0, 0.0)], 0.0),
        (&[(0.0, 0.0)], &[(0.0, 1.0), (1.0, 0.0)], s2 / 2.0),
        (&[(0.0, 0.0)], &[(3.0, 4.0)], 5.0),
        (
            &[(0.0, 0.0), (4.0, 0.0)],
            &[(1.0, 0.0), (3.0, 0.0), (4.0, 3.0)],
            11f64.sqrt() / 3.0,
        ),
        (&[(0.0, 2.0), (2.0, 0.0)], &[(0.0, 0.0)], 2.0),
    ];
    for (i, (s, p, want)) in igd_cases.iter().enumerate() {
        case(
            &format!("igd #{}", i + 1),
            igd(&pts(s), &pts(p)).unwrap(),
            *want,
        );
    }

    let purity_cases: [Case; 5] = [
        (&[(1.0, 2.0), (2.0, 1.0)], &[(1.0, 2.0), (2.0, 1.0)], 1.0),
        (&[(3.0, 3.0)], &[(1.0, 1.0)], 0.0),
        (&[(1.0, 2.0), (5.0, 5.0)], &[(2.0, 1.0)], 0.5),
        (
            &[(0.0, 3.0), (1.0, 1.0), (3.0, 0.0)],
            &[(0.0, 2.5), (3.0, 0.0)],
            2.0 / 3.0,
        ),
        (
            &[(1.0, 4.0), (2.0, 3.0), (3.0, 2.0), (4.0, 1.0)],
            &[(1.0, 3.5), (4.0, 1.0)],
            0.75,
        ),
    ];
    for (i, (s, p, want)) in purity_cases.iter().enumerate() {
        case(
            &format!("purity #{}", i + 1),
            purity(&pts(s), &pts(p)).unwrap(),
            *want,
        );
    }

    let (r5, r13) = (5f64.sqrt(), 13f64.sqrt());
    let spread_cases: [Case; 6] = [
        (
            &[(0.0, 2.0), (1.0, 1.0), (2.0, 0.0)],
            &[(0.0, 2.0), (2.0, 0.0)],
            0.0,
        ),
        (
            &[(0.0, 3.0), (1.0, 2.0), (3.0, 0.0)],
            &[(0.0, 3.0), (3.0, 0.0)],
            1.0 / 3.0,
        ),
        (
            &[(1.0, 2.0), (2.0, 1.0)],
            &[(0.0, 3.0), (3.0, 0.0)],
            2.0 / 3.0,
        ),
        (
            &[(0.0, 4.0), (1.0, 2.0), (4.0, 0.0)],
            &[(0.0, 4.0), (4.0, 0.0)],
            (r13 - r5) / (r5 + r13),
        ),
        (&[(0.0, 1.0), (1.0, 0.0)], &[(0.0, 1.0), (1.0, 0.0)], 0.0),
        (&[(1.0, 1.0), (2.0, 0.0)], &[(0.0, 2.0), (2.0, 0.0)], 0.5),
    ];
    for (i, (s, p, want)) in spread_cases.iter().enumerate() {
        case(
            &format!("spread #{}", i + 1),
            spread(&pts(s), &pts(p)).unwrap(),
            *want,
        );
    }

    let (a, b) = (1.25f64.sqrt(), 3.25f64.sqrt());
    let rel_cases: [Case; 5] = [
        (
            &[(0.0, 3.0), (1.0, 2.0), (3.0, 0.0)],
            &[(0.0, 3.0), (1.0, 2.0), (3.0, 0.0)],
            0.0,
        ),
        (
            &[(0.0, 3.0), (1.0, 2.0), (3.0, 0.0)],
            &[(0.0, 3.0), (3.0, 0.0)],
            1.0 / 3.0,
        ),
        (
            &[(1.0, 2.0), (2.0, 1.0)],
            &[(0.0, 3.0), (3.0, 0.0)],
            2.0 / 3.0,
        ),
        (&[(1.0, 1.0), (2.0, 0.0)], &[(0.0, 2.0), (2.0, 0.0)], 0.5),
        (
            &[(0.0, 2.0), (1.0, 1.0), (2.0, 0.0)],
            &[(0.0, 2.0), (0.5, 1.0), (2.0, 0.0)],
            (b - a) / (a + b),
        ),
    ];
    for (i, (s, p, want)) in rel_cases.iter().enumerate() {
        case(
            &format!("relative_spread #{}", i + 1),
            relative_spread(&pts(s), &pts(p)).unwrap(),
            *want,
        );
    }

    let staircase: Vec<(f64, f64)> = (0..28).map(|i| (i as f64, 27.0 - i as f64)).collect();
    let onvg_cases: [(Vec<(f64, f64)>, usize); 5] = [
        (staircase, 28),
        (vec![], 0),
        (vec![(1.0, 1.0)], 1),
        (vec![(0.0, 2.0), (1.0, 1.0), (2.0, 0.0)], 3),
        (
            vec![(0.0, 5.0), (1.0, 4.0), (2.0, 3.0), (3.0, 2.0), (4.0, 1.0)],
            5,
        ),
    ];
    for (i, (s, want)) in onvg_cases.iter().enumerate() {
        case(
            &format!("onvg #{}", i + 1),
            onvg(&pts(s)) as f64,
            *want as f64,
        );
    }

    let gd_zero_q = quality_ratio(1e-3, 0.1, 0.0, 0.1).unwrap();
    let ir_cases = [
        ("IR q=2 c=1", investment_ratio(2.0, 1.0).unwrap(), 2.0),
        ("IR q=0.5 c=0.5", investment_ratio(0.5, 0.5).unwrap(), -1.0),
        ("IR q=0.8 c=2", investment_ratio(0.8, 2.0).unwrap(), -2.5),
        (
            "IR with zero candidate GD",
            investment_ratio(gd_zero_q, 0.3).unwrap(),
            f64::INFINITY,
        ),
    ];
    for (name, got, want) in ir_cases {
        case(name, got, want);
    }
    verdict(2, &checks);
}

fn brute_force_front(points: &[ObjectiveVector]) -> Vec<usize> {
    let dom = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x <= y) && a != b;
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| dom(&q.0, &points[i].0)))
        .collect()
}

#[test]
fn criterion_3_pareto_equivalence() {
    let _serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut filter_mismatch = 0;
    let mut sort_mismatch = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=200);
        let grid = rng.gen_bool(0.5);
        let points: Vec<ObjectiveVector> = (0..n)
            .map(|_| {
                let mut draw = || {
                    if grid {
                        rng.gen_range(0..12) as f64
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                };
                ObjectiveVector(vec![draw(), draw()])
            })
            .collect();
        let sols: Vec<Solution> = points
            .iter()
            .map(|p| Solution {
                vars: VariableVector::default(),
                objectives: p.clone(),
                violation: 0.0,
            })
            .collect();

        let brute = brute_force_front(&points);
        let mut first_occurrence: Vec<ObjectiveVector> = Vec::new();
        for &i in &brute {
            if !first_occurrence.contains(&points[i]) {
                first_occurrence.push(points[i].clone());
            }
        }
        let filtered: Vec<ObjectiveVector> = pareto_filter(&sols)
            .into_iter()
            .map(|s| s.objectives)
            .collect();
        if filtered != first_occurrence {
            filter_mismatch += 1;
        }
        let mut front1 = non_dominated_sort(&sols)[0].clone();
        front1.sort_unstable();
        if front1 != brute {
            sort_mismatch += 1;
        }
    }
    verdict(
        3,
        &[
            (
                format!("pareto_filter mismatches {filter_mismatch}/1000"),
                filter_mismatch == 0,
            ),
            (
                format!("front-1 mismatches {sort_mismatch}/1000"),
                sort_mismatch == 0,
            ),
        ],
    );
}

#[test]
fn criterion_4_mela_convergence() {
    let _serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let problem = mela();
    let start = Instant::now();
    let oracle = true_front(&problem, &OracleConfig::for_problem(&problem)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let size = oracle.points.len();
    let truth = ReferenceFront::new(oracle.points, snap_for(&problem)).unwrap();
    let cfg = BnbConfig {
        root: sized(200, 800, 100),
        node: sized(50, 20, 20),
        leaf: sized(50, 200, 200),
        ..BnbConfig::default()
    };
    let mut exp = ExperimentConfig::new("mela", 10, SolverConfig::Bnb(cfg));
    exp.repetitions = 10;
    let runs = reports(&exp, &truth);
    let gd_med = median(&runs.iter().map(|r| r.gd).collect::<Vec<_>>());
    let dd_med = median(&runs.iter().map(|r| r.relative_spread).collect::<Vec<_>>());
    verdict(
        4,
        &[
            (
                format!(
                    "oracle: {} evaluations, {} points, {secs:.1} s",
                    oracle.evaluations, size
                ),
                oracle.evaluations >= 256 * 401 * 401,
            ),
            (format!("median GD {gd_med:.3e} <= 5e-3"), gd_med <= 5e-3),
            (
                format!("median relative spread {dd_med:.3e} <= 5e-2"),
                dd_med <= 5e-2,
            ),
        ],
    );
}

#[test]
fn criterion_5_investment_ratio_pipeline() {
    let _serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    // Published means, bearing combination 19: NSGA-II then BnB-NSGAII.
    let q = quality_ratio(8.8e-4, 6.7e-2, 1.6e-4, 5.0e-3).unwrap();
    let c = 5.4e5 / 10e5;
    let ir = investment_ratio(q, c).unwrap();
    verdict(
        5,
        &[(
            format!("q = {q:.4}, c = {c}, IR = {ir:.4}; expected 1.59 +/- 0.05"),
            (ir - 1.59).abs() <= 0.05,
        )],
    );
}

fn accounting_problems() -> Vec<ProblemSpec> {
    vec![gear(), brake(), truss(), mela(), tong(TongVariant::Minus)]
}

#[test]
fn criterion_6_determinism_and_accounting() {
    let _serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut checks = Vec::new();

    let problem = brake();
    let oracle = true_front(&problem, &OracleConfig::for_problem(&problem)).unwrap();
    let truth = ReferenceFront::new(oracle.points, snap_for(&problem)).unwrap();
    let bnb_cfg = BnbConfig {
        root: sized(40, 30, 10),
        node: sized(20, 10, 5),
        leaf: sized(20, 15, 5),
        max_nodes: Some(60),
        ..BnbConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for attempt in 0..2 {
        let mut records: Vec<RunRecord> = Vec::new();
        for (id, solver) in [
            (1, SolverConfig::Nsga2(sized(40, 40, 10))),
            (2, SolverConfig::Bnb(bnb_cfg.clone())),
        ] {
            let mut exp = ExperimentConfig::new("brake", id, solver);
            exp.repetitions = 4;
            exp.base_seed = 11;
            records.extend(run_experiment(&exp, &truth).unwrap().records);
        }
        let path = dir.path().join(format!("runs-{attempt}.csv"));
        write_runs_csv(&path, &records).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    checks.push((
        format!(
            "runs.csv byte-identical across two runs ({} bytes)",
            bytes[0].len()
        ),
        bytes[0] == bytes[1],
    ));

    let mut nsga_bad = 0;
    let mut bnb_bad = 0;
    let mut runs = 0;
    for problem in accounting_problems() {
        for seed in 0..3 {
            let cfg = sized(24, 30, 5).with_seed(seed);
            let out = run_nsga2(&problem, None, &cfg).unwrap();
            let want = (cfg.population_size * (out.generations + 1)) as u64;
            nsga_bad += usize::from(out.archive.evaluation_count != want);

            let cfg = BnbConfig {
                root: sized(20, 15, 5),
                node: sized(12, 6, 3),
                leaf: sized(10, 8, 3),
                max_nodes: Some(40),
                ..BnbConfig::default()
            }
            .with_seed(seed);
            let out = bnb::solve(&problem, &cfg).unwrap();
            let sum: u64 = out
                .stats
                .call_sizes
                .iter()
                .map(|&(n, g)| (n * (g + 1)) as u64)
                .sum();
            let consistent = out.stats.call_sizes.len() == out.stats.nsga_calls
                && out.stats.evaluations == sum
                && out.archive.evaluation_count == sum;
            bnb_bad += usize::from(!consistent);
            runs += 1;
        }
    }
    checks.push((
        format!("NSGA-II evaluations = N * (generations + 1): {nsga_bad} of {runs} runs off"),
        nsga_bad == 0,
    ));
    checks.push((
        format!("BnB evaluations = sum over calls of N * (generations + 1): {bnb_bad} of {runs} runs off"),
        bnb_bad == 0,
    ));
    verdict(6, &checks);
}

fn record(rep: usize, gd: f64, spread: f64, evals: u64) -> RunRecord {
    RunRecord {
        problem: "mela".into(),
        solver: SolverKind::Bnb,
        id: 7,
        rep,
        seed: rep as u64,
        metrics: Some(MetricsReport {
            onvg: 10 + rep % 7,
            purity: (rep % 5) as f64 / 4.0,
            gd,
            igd: gd * 1.5,
            spread,
            relative_spread: (spread - 0.4).abs(),
            evaluations: evals,
        }),
        wall_ms: None,
    }
}

#[test]
fn criterion_7_statistics() {
    let _serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut checks = Vec::new();
    let samples: [(&[f64], &[f64]); 6] = [
        (&[1.0, 2.0, 3.0, 4.0, 100.0], &[100.0]),
        (&[5.0; 6], &[]),
        (&[-50.0, 10.0, 11.0, 12.0, 13.0, 14.0], &[-50.0]),
        (&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0], &[]),
        (
            &[0.0, 0.0, 0.0, 0.0, 1.0, 1000.0, -1000.0],
            &[-1000.0, 1000.0],
        ),
        (&[1.0, 2.0, 3.0, 4.0, 7.0], &[]),
    ];
    for (values, want) in samples {
        let got = Distribution::from_values(values).unwrap().outliers;
        checks.push((
            format!("{values:?}: outliers {got:?}, want {want:?}"),
            got == want,
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut records: Vec<RunRecord> = (0..20)
        .map(|rep| {
            let gd = if rep == 3 {
                5.0
            } else {
                rng.gen_range(1e-5..1e-3)
            };
            record(
                rep,
                gd,
                rng.gen_range(0.1..0.9),
                rng.gen_range(10_000..20_000),
            )
        })
        .collect();
    records[9].metrics = None;
    let reference = summarize(&records).unwrap();
    let mut differing = 0;
    for _ in 0..100 {
        records.shuffle(&mut rng);
        differing += usize::from(summarize(&records).unwrap() != reference);
    }
    checks.push((
        format!("summarize under 100 shuffles: {differing} differ"),
        differing == 0,
    ));
    verdict(7, &checks);
}
