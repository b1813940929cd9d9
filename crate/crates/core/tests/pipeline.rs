//! End-to-end checks across modules at small budgets.

use std::sync::Arc;

use symreg_core::constopt::{optimize_constants, OptConfig};
use symreg_core::data::{sample, task};
use symreg_core::dynsys::{
    default_starts, estimate_derivatives, fit_true_structure, fit_vector_field, lookup_system,
    r2_per_dimension, rollout_r2, simulate_steps,
};
use symreg_core::engine::{evolve, simulate_efficiency, EfficiencyTrial, EngineConfig};
use symreg_core::eval::{eval_point, fitness};
use symreg_core::expr::{decode, parse_infix, parse_sexpr};
use symreg_core::guidance::{
    collect_crossover_pairs, collect_mutation_pairs, reevaluate_crossover_pair,
    reevaluate_mutation_pair, train_learned_editor, CollectConfig, GuideKind, GuideSet,
    LearnedGuide, TrainConfig, UniformGuide,
};

fn small_engine(seed: u64) -> EngineConfig {
    EngineConfig {
        population: 200,
        generations: 30,
        elite: 20,
        seed,
        timestamps: false,
        ..EngineConfig::default()
    }
}

#[test]
fn engine_solves_a_short_polynomial_deterministically() {
    let ds = sample(&task("Nguyen-1").unwrap()).unwrap();
    let a = evolve(&ds, &small_engine(3), &GuideSet::uniform()).unwrap();
    let b = evolve(&ds, &small_engine(3), &GuideSet::uniform()).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert!(a.best_fitness.r2 > 0.99, "best {}", a.best_fitness.r2);
    let recomputed = fitness(&a.best_tree, &ds).unwrap();
    assert!((recomputed.r2 - a.best_fitness.r2).abs() < 1e-9);
    // Best R² never decreases across generations (elitism).
    assert!(a
        .generations
        .windows(2)
        .all(|w| w[1].best_r2 >= w[0].best_r2 - 1e-12));
}

#[test]
fn oracle_mutation_guide_runs_end_to_end() {
    let ds = sample(&task("Nguyen-2").unwrap()).unwrap();
    let cfg = EngineConfig {
        mutation_guide: GuideKind::Oracle,
        ..small_engine(1)
    };
    let guides =
        GuideSet::from_kinds(GuideKind::Oracle, GuideKind::Uniform, None, cfg.max_nodes).unwrap();
    let rec = evolve(&ds, &cfg, &guides).unwrap();
    assert_eq!(rec.mutation_guide, "oracle");
    assert!(rec.mutation_totals().attempts > 0);
    assert!(GuideSet::from_kinds(GuideKind::Learned, GuideKind::Uniform, None, 60).is_err());
}

#[test]
fn constants_of_known_structure_are_recovered() {
    let t = task("Constant-1").unwrap();
    let ds = sample(&t).unwrap();
    let start = parse_infix("1*x1^3 + 1*x1^2 + 1*x1").unwrap();
    let (fitted, fit) = optimize_constants(&start, &ds, &OptConfig::default());
    assert!(fit.r2 > 1.0 - 1e-9);
    let mut got = fitted.constants();
    got.sort_by(f64::total_cmp);
    for (g, want) in got.iter().zip([1.78, 2.12, 3.39]) {
        assert!((g - want).abs() < 1e-3, "{got:?}");
    }
}

#[test]
fn collected_pairs_keep_their_orientation_and_train_an_editor() {
    let cfg = CollectConfig {
        seed: 11,
        ..CollectConfig::default()
    };
    let corpus = collect_mutation_pairs(120, &cfg);
    assert_eq!(corpus.pairs.len(), 120);
    for p in &corpus.pairs {
        let ds = &corpus.datasets[&p.dataset_csv_ref];
        let (r_in, r_out) = reevaluate_mutation_pair(p, ds).unwrap();
        assert!(r_out > r_in);
        assert_eq!(p.r2_input, r_in);
        assert_eq!(p.r2_target, r_out);
        let target = decode(&p.target_seq).unwrap();
        for (&pos, &tok) in &p.target_tokens {
            assert_eq!(target.node(pos).token, tok);
        }
    }
    let xcorpus = collect_crossover_pairs(10, &UniformGuide, &cfg);
    assert_eq!(xcorpus.pairs.len(), 10);
    for p in &xcorpus.pairs {
        let ds = &xcorpus.datasets[&p.dataset_csv_ref];
        let (parents, offspring) = reevaluate_crossover_pair(p, ds, &cfg.opt).unwrap();
        assert!(offspring > parents);
    }

    let mut datasets = corpus.datasets.clone();
    datasets.extend(xcorpus.datasets.clone());
    let tc = TrainConfig {
        min_pairs: 50,
        ..TrainConfig::default()
    };
    let guide = train_learned_editor(&corpus.pairs, &xcorpus.pairs, &datasets, &tc).unwrap();
    let back = LearnedGuide::from_json(&guide.to_json()).unwrap();
    assert_eq!(back, guide);
    let (acc, chance) = guide
        .masked_token_accuracy(&corpus.pairs, &datasets)
        .unwrap();
    assert!((0.0..=1.0).contains(&acc) && chance > 0.0 && chance < 1.0);

    let ds = sample(&task("Nguyen-1").unwrap()).unwrap();
    let guides = GuideSet::from_kinds(
        GuideKind::Learned,
        GuideKind::Learned,
        Some(Arc::new(guide)),
        60,
    )
    .unwrap();
    let rec = evolve(&ds, &small_engine(2), &guides).unwrap();
    assert_eq!(rec.mutation_guide, "learned");
    assert!(rec.best_fitness.r2.is_finite());
}

#[test]
fn efficiency_laws_hold_on_one_grid_point() {
    let report = simulate_efficiency(&EfficiencyTrial {
        trials: 20_000,
        ..EfficiencyTrial::default()
    })
    .unwrap();
    assert!(report.all_within_3sigma(), "{report:?}");
    assert!(report.guided_beats_random());
    assert!(simulate_efficiency(&EfficiencyTrial {
        alpha: 0.0,
        ..EfficiencyTrial::default()
    })
    .is_err());
}

#[test]
fn true_structure_fits_noise_free_dynamics() {
    for name in ["ShimizuMorioka", "Rucklidge", "SprottJerk"] {
        let sys = lookup_system(name).unwrap();
        let traj = simulate_steps(&sys, 50_000).unwrap();
        let td = estimate_derivatives(&traj, 7, 0.0, 0).unwrap();
        let field = fit_true_structure(&td, &sys, &OptConfig::default()).unwrap();
        let (per, _) = r2_per_dimension(&td, &field).unwrap();
        assert!(per.iter().all(|r| *r > 0.99), "{name}: {per:?}");
        let starts = default_starts(traj.len(), 50, 20);
        assert_eq!(rollout_r2(&traj, &sys.rhs, 50, &starts).unwrap(), 1.0);
    }
}

#[test]
fn zero_noise_parabola_system_is_recovered_exactly() {
    // x1 = t, x2 = t²: ẋ1 = 1 and ẋ2 = 2·x1 are both captured exactly by
    // the quadratic window.
    let field = vec![
        parse_sexpr("(const 1)").unwrap(),
        parse_sexpr("(mul (const 2) x1)").unwrap(),
    ];
    let traj = symreg_core::dynsys::integrate_strided(&field, &[0.0, 0.0], 0.01, 200, 5).unwrap();
    let td = estimate_derivatives(&traj, 7, 0.0, 0).unwrap();
    let cfg = EngineConfig {
        population: 100,
        generations: 10,
        elite: 10,
        timestamps: false,
        ..EngineConfig::default()
    };
    let found = fit_vector_field(&td, "parabola", &cfg, &GuideSet::uniform()).unwrap();
    let (per, _) = r2_per_dimension(&td, &found).unwrap();
    assert!(per[1] > 1.0 - 1e-9, "{per:?}");
    for s in &td.states {
        assert!((eval_point(&found[0], s) - 1.0).abs() < 1e-9);
        assert!((eval_point(&found[1], s) - 2.0 * s[0]).abs() < 1e-9);
    }
}

#[test]
fn search_recovers_the_simple_rucklidge_component() {
    // A fine observation interval keeps the derivative bias small enough
    // that ẏ = x is the best-scoring expression.
    let mut sys = lookup_system("Rucklidge").unwrap();
    sys.stride = 10;
    let traj = simulate_steps(&sys, 30_000).unwrap();
    let td = estimate_derivatives(&traj, 7, 0.0, 0).unwrap();
    let scale = td.states.iter().map(|s| s[0].abs()).fold(0.0, f64::max);
    let mut recovered = 0;
    for seed in 0..3 {
        let cfg = EngineConfig {
            population: 100,
            generations: 10,
            elite: 10,
            seed,
            timestamps: false,
            ..EngineConfig::default()
        };
        let ds = td.component(1, &sys.name).unwrap();
        let rec = evolve(&ds, &cfg, &GuideSet::uniform()).unwrap();
        let worst = td
            .states
            .iter()
            .map(|s| (eval_point(&rec.best_tree, s) - s[0]).abs())
            .fold(0.0, f64::max);
        if worst <= 1e-2 * scale {
            recovered += 1;
        }
    }
    assert!(recovered >= 2, "recovered in {recovered}/3 seeds");
}
