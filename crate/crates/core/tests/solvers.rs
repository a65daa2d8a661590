use bnb_nsga::bnb::{self, bound, tree_size, BnbConfig, BoundLevel, Node};
use bnb_nsga::metrics::{gd, igd, purity, SNAP_EPSILON};
use bnb_nsga::nsga2::{run_nsga2, Nsga2Config, SearchBox};
use bnb_nsga::oracle::{enumerate_true_front, true_front, OracleConfig};
use bnb_nsga::pareto::{dominates, ObjectiveVector};
use bnb_nsga::problems::{brake, gear, mela, tong, truss, ProblemSpec, TongVariant};

fn small_bnb(seed: u64) -> BnbConfig {
    BnbConfig {
        root: Nsga2Config::sized(30, 20, 8),
        node: Nsga2Config::sized(16, 8, 4),
        leaf: Nsga2Config::sized(16, 15, 5),
        max_nodes: Some(80),
        ..BnbConfig::default()
    }
    .with_seed(seed)
}

fn mutually_nondominated(points: &[ObjectiveVector]) -> bool {
    points
        .iter()
        .all(|a| points.iter().all(|b| !dominates(&a.0, &b.0).unwrap()))
}

fn all_problems() -> Vec<ProblemSpec> {
    vec![
        gear(),
        brake(),
        truss(),
        mela(),
        tong(TongVariant::Minus),
        tong(TongVariant::Plus),
    ]
}

#[test]
fn bnb_without_fathoming_recovers_restricted_gear_front() {
    let bounds = vec![(12, 15); 4];
    let problem = gear().restrict(&bounds).unwrap();
    let truth = enumerate_true_front(&problem, &OracleConfig::for_problem(&problem)).unwrap();
    let cfg = BnbConfig {
        fathoming: false,
        max_nodes: Some(tree_size(&bounds) as usize),
        ..small_bnb(5)
    };
    let out = bnb::solve(&problem, &cfg).unwrap();
    let front = out.archive.objectives();
    assert_eq!(out.stats.leaves_solved, 256);
    assert!(!out.stats.truncated);
    assert_eq!(igd(&front, &truth.points).unwrap(), 0.0);
    assert_eq!(gd(&front, &truth.points, None).unwrap(), 0.0);
    assert_eq!(purity(&front, &truth.points).unwrap(), 1.0);
}

#[test]
fn bnb_archives_are_sound_and_never_regress() {
    for problem in all_problems() {
        for seed in 0..2 {
            let out = bnb::solve(&problem, &small_bnb(seed)).unwrap();
            let front = out.archive.objectives();
            assert!(mutually_nondominated(&front), "{}", problem.name);
            for m in &out.archive.members {
                assert!(m.is_feasible(), "{}", problem.name);
                let again = problem.evaluate(&m.vars).unwrap();
                assert_eq!(again.objectives, m.objectives, "{}", problem.name);
                assert_eq!(again.violation, m.violation, "{}", problem.name);
            }
            for r in &out.root_archive.members {
                for m in &front {
                    assert!(
                        !dominates(&r.objectives.0, &m.0).unwrap(),
                        "{}",
                        problem.name
                    );
                }
            }
            let s = &out.stats;
            assert_eq!(
                s.nodes_created,
                s.nodes_fathomed + s.nodes_branched + s.leaves_solved + s.nodes_unprocessed
            );
        }
    }
}

#[test]
fn nsga2_runs_are_seeded_and_stay_in_their_box() {
    for problem in all_problems() {
        let bounds: Vec<(i64, i64)> = problem
            .integer_box()
            .iter()
            .map(|&(lo, hi)| (lo, lo + (hi - lo) / 2))
            .collect();
        let cfg = Nsga2Config::sized(20, 15, 5).with_seed(9);
        let a = run_nsga2(&problem, Some(&bounds), &cfg).unwrap();
        let b = run_nsga2(&problem, Some(&bounds), &cfg).unwrap();
        assert_eq!(a.archive.members, b.archive.members, "{}", problem.name);
        assert_eq!(
            a.archive.evaluation_count,
            (20 * (a.generations + 1)) as u64
        );
        let domain = SearchBox::new(&problem, Some(&bounds)).unwrap();
        for m in &a.archive.members {
            assert!(domain.contains(&m.vars), "{}", problem.name);
        }
        assert!(
            mutually_nondominated(&a.archive.objectives()),
            "{}",
            problem.name
        );
    }
}

#[test]
fn nsga2_on_one_mela_combination_approaches_its_front() {
    let combo = [
        (1, 1),
        (0, 0),
        (1, 1),
        (0, 0),
        (1, 1),
        (0, 0),
        (1, 1),
        (0, 0),
    ];
    let problem = mela().restrict(&combo).unwrap();
    let truth = true_front(&problem, &OracleConfig::for_problem(&problem)).unwrap();
    let cfg = Nsga2Config::sized(200, 300, 60).with_seed(1);
    let out = run_nsga2(&problem, None, &cfg).unwrap();
    let front = out.archive.objectives();
    let d = gd(&front, &truth.points, Some(SNAP_EPSILON)).unwrap();
    assert!(d <= 1e-2, "GD {d}");
}

#[test]
fn mela_root_bound_approaches_the_front() {
    let problem = mela();
    let truth = true_front(&problem, &OracleConfig::for_problem(&problem)).unwrap();
    let cfg = BnbConfig {
        root: Nsga2Config::sized(300, 500, 100),
        ..BnbConfig::default()
    };
    let root = bound(Node::root(&problem), &problem, &cfg, BoundLevel::Root, 4).unwrap();
    let front = root.local_archive.objectives();
    let d = gd(&front, &truth.points, Some(SNAP_EPSILON)).unwrap();
    assert!(d <= 1e-2, "GD {d}");
}
