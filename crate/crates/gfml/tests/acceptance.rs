//! Acceptance suite: one test per release criterion. Each test prints a
//! single `PASS: ...` line on success (run with `--nocapture` to see them).

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gfml::dataset::{
    make_view, parse_raw_records_str, split_by_game, NormalizationMode, Side,
    DEFAULT_SPLIT_BOUNDARY, RAW_CSV_HEADER,
};
use gfml::fml::{parse_fml, serialize_fml};
use gfml::ga::{evolve, EvolutionConfig};
use gfml::inference::{infer, InputVector};
use gfml::model::{
    build_master_controller, build_master_knowledge_base,
    validate_controller, Clause, Connector, DefaultConsequentMap, FuzzyController, FuzzyTerm,
    FuzzyVariable, Hedge, Rule, RuleOperator, TrapezoidShape, VariableKind,
};
use gfml::rollout::{rollout, ChoicePolicy, Outcome, SuggestionProvider};
use gfml::synthetic::{generate_synthetic, SyntheticConfig};
use gfml::ttt::{empty_board, minimax_value, to_move, Board, Player, TicTacToeProvider};

#[test]
fn table_i_fidelity() {
    let started = Instant::now();
    let kb = build_master_knowledge_base();
    let expected: [(&str, f64, f64, &[(&str, [f64; 4])]); 7] = [
        (
            "DBSN",
            0.0,
            1.0,
            &[
                ("Low", [0.0, 0.0, 0.4, 0.6]),
                ("High", [0.4, 0.6, 1.0, 1.0]),
            ],
        ),
        (
            "DWSN",
            0.0,
            1.0,
            &[
                ("Low", [0.0, 0.0, 0.4, 0.6]),
                ("High", [0.4, 0.6, 1.0, 1.0]),
            ],
        ),
        (
            "DBWR",
            0.0,
            1.0,
            &[
                ("Low", [0.0, 0.0, 0.3, 0.4]),
                ("Medium", [0.3, 0.4, 0.6, 0.7]),
                ("High", [0.6, 0.7, 1.0, 1.0]),
            ],
        ),
        (
            "DWWR",
            0.0,
            1.0,
            &[
                ("Low", [0.0, 0.0, 0.3, 0.4]),
                ("Medium", [0.3, 0.4, 0.6, 0.7]),
                ("High", [0.6, 0.7, 1.0, 1.0]),
            ],
        ),
        (
            "DBTMR",
            -1.0,
            1.0,
            &[
                ("Low", [-1.0, -1.0, -0.2, 0.2]),
                ("High", [-0.2, 0.2, 1.0, 1.0]),
            ],
        ),
        (
            "DWTMR",
            -1.0,
            1.0,
            &[
                ("Low", [-1.0, -1.0, -0.2, 0.2]),
                ("High", [-0.2, 0.2, 1.0, 1.0]),
            ],
        ),
        (
            "EWR",
            0.0,
            1.0,
            &[
                ("Low", [0.0, 0.0, 0.2, 0.3]),
                ("Medium_Low", [0.2, 0.3, 0.4, 0.55]),
                ("Medium_High", [0.4, 0.55, 0.7, 0.8]),
                ("High", [0.7, 0.8, 1.0, 1.0]),
            ],
        ),
    ];
    assert_eq!(kb.len(), expected.len());
    let mut checked = 0;
    for (var, (name, left, right, terms)) in kb.iter().zip(expected) {
        assert_eq!(var.name, name);
        assert_eq!((var.domain_left, var.domain_right), (left, right));
        assert_eq!(
            var.kind,
            if name == "EWR" {
                VariableKind::Output
            } else {
                VariableKind::Input
            }
        );
        assert_eq!(var.terms.len(), terms.len());
        for (term, (tname, params)) in var.terms.iter().zip(terms) {
            assert_eq!(&term.name, tname, "{name}.{tname}");
            assert_eq!(&term.shape.params(), params, "{name}.{tname}");
            checked += 1;
        }
    }
    assert_eq!(checked, 18);
    assert!(started.elapsed().as_secs() < 1);
    println!("PASS: Table I fidelity (18 trapezoids, 72 parameters exact)");
}

#[test]
fn rule_grid() {
    let started = Instant::now();
    let fc = build_master_controller(&DefaultConsequentMap);
    assert_eq!(fc.rule_base.len(), 144);
    let antecedents: HashSet<Vec<(&str, &str)>> = fc
        .rule_base
        .iter()
        .map(|r| {
            r.antecedent
                .iter()
                .map(|c| (c.variable.as_str(), c.term.as_str()))
                .collect()
        })
        .collect();
    assert_eq!(antecedents.len(), 144, "antecedents must be pairwise distinct");

    let consequent_of = |terms: &[&str; 6]| -> String {
        let names = ["DBSN", "DWSN", "DBWR", "DWWR", "DBTMR", "DWTMR"];
        fc.rule_base
            .iter()
            .find(|r| {
                r.antecedent
                    .iter()
                    .zip(names.iter().zip(terms))
                    .all(|(c, (v, t))| c.variable == *v && c.term == *t)
            })
            .expect("combination present")
            .consequent
            .term
            .clone()
    };
    assert_eq!(
        consequent_of(&["High", "High", "High", "High", "High", "High"]),
        "High"
    );
    assert_eq!(
        consequent_of(&["Low", "Low", "Low", "Low", "Low", "Low"]),
        "Low"
    );
    // Every low-black-win-rate combination maps to Low under the default map.
    for r in &fc.rule_base {
        if r.antecedent.iter().any(|c| c.variable == "DBWR" && c.term == "Low") {
            assert_eq!(r.consequent.term, "Low", "rule {}", r.name);
        }
    }
    assert!(started.elapsed().as_secs() < 1);
    println!("PASS: rule grid (144 distinct rules, boundary combinations correct)");
}

/// Builds a random controller that satisfies every structural invariant.
fn random_valid_controller(rng: &mut ChaCha8Rng) -> FuzzyController {
    let sorted4 = |rng: &mut ChaCha8Rng, left: f64, right: f64| -> TrapezoidShape {
        let mut p: Vec<f64> = (0..4).map(|_| rng.gen_range(left..=right)).collect();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        TrapezoidShape::new(p[0], p[1], p[2], p[3])
    };
    let make_var = |rng: &mut ChaCha8Rng, name: String, kind: VariableKind| -> FuzzyVariable {
        let left = rng.gen_range(-5.0..0.0);
        let right = left + rng.gen_range(0.5..10.0);
        let term_count = rng.gen_range(2..=4usize);
        FuzzyVariable {
            name,
            kind,
            domain_left: left,
            domain_right: right,
            scale: String::new(),
            terms: (0..term_count)
                .map(|i| FuzzyTerm {
                    name: format!("T{i}"),
                    hedge: Hedge::Normal,
                    shape: sorted4(rng, left, right),
                })
                .collect(),
        }
    };
    let input_count = rng.gen_range(1..=4usize);
    let mut kb: Vec<FuzzyVariable> = (0..input_count)
        .map(|i| make_var(rng, format!("In{i}"), VariableKind::Input))
        .collect();
    kb.push(make_var(rng, "Out".to_string(), VariableKind::Output));
    let output_terms = kb.last().unwrap().terms.len();

    let mut rules = Vec::new();
    let mut seen = HashSet::new();
    for r in 0..rng.gen_range(1..=12usize) {
        let antecedent: Vec<Clause> = kb[..input_count]
            .iter()
            .map(|v| Clause::new(v.name.clone(), format!("T{}", rng.gen_range(0..v.terms.len()))))
            .collect();
        let key: Vec<(String, String)> = antecedent
            .iter()
            .map(|c| (c.variable.clone(), c.term.clone()))
            .collect();
        if !seen.insert(key) {
            continue;
        }
        rules.push(Rule {
            name: format!("Rule{}", r + 1),
            connector: if rng.gen_bool(0.5) {
                Connector::And
            } else {
                Connector::Or
            },
            operator: if rng.gen_bool(0.5) {
                RuleOperator::Min
            } else {
                RuleOperator::Max
            },
            weight: rng.gen_range(0.0..=1.0),
            antecedent,
            consequent: Clause::new("Out", format!("T{}", rng.gen_range(0..output_terms))),
        });
    }
    FuzzyController {
        name: "RandomController".to_string(),
        ip: "localhost".to_string(),
        knowledge_base: kb,
        settings: Default::default(),
        rule_base: rules,
    }
}

#[test]
fn fml_round_trip() {
    let started = Instant::now();
    let check = |fc: &FuzzyController| {
        let doc = serialize_fml(fc).expect("valid controller serializes");
        let doc2 = serialize_fml(fc).expect("valid controller serializes");
        assert_eq!(doc.text, doc2.text, "serialize must be byte-deterministic");
        let parsed = parse_fml(&doc).expect("serialized output parses");
        assert_eq!(&parsed, fc, "parse(serialize(fc)) == fc");
        let doc3 = serialize_fml(&parsed).unwrap();
        assert_eq!(doc.text, doc3.text, "second round-trip is byte-identical");
    };
    check(&build_master_controller(&DefaultConsequentMap));
    let mut rng = ChaCha8Rng::seed_from_u64(20260824);
    for i in 0..100 {
        let fc = random_valid_controller(&mut rng);
        assert!(
            validate_controller(&fc).is_empty(),
            "generator produced invalid controller #{i}"
        );
        check(&fc);
    }
    assert!(started.elapsed().as_secs() < 5);
    println!("PASS: FML round-trip (master + 100 randomized controllers, byte-deterministic)");
}

/// Brute-force Mamdani pipeline written independently of the library: naive
/// per-rule strengths, per-grid-point max over rules, trapezoid-weighted
/// centroid over `n + 1` uniform samples.
fn oracle_centroid(fc: &FuzzyController, input: &HashMap<String, f64>, n: usize) -> f64 {
    let membership = |p: [f64; 4], x: f64| -> f64 {
        if x < p[0] || x > p[3] {
            0.0
        } else if x >= p[1] && x <= p[2] {
            1.0
        } else if x < p[1] {
            (x - p[0]) / (p[1] - p[0])
        } else {
            (p[3] - x) / (p[3] - p[2])
        }
    };
    let out_var = fc
        .knowledge_base
        .iter()
        .find(|v| v.kind == VariableKind::Output)
        .unwrap();
    let mut strengths: Vec<(f64, [f64; 4])> = Vec::new();
    for rule in &fc.rule_base {
        let mut s: Option<f64> = None;
        for clause in &rule.antecedent {
            let var = fc.variable(&clause.variable).unwrap();
            let x = input[&var.name].clamp(var.domain_left, var.domain_right);
            let m = membership(var.term(&clause.term).unwrap().shape.params(), x);
            s = Some(match s {
                None => m,
                Some(prev) => match rule.connector {
                    Connector::And => prev.min(m),
                    Connector::Or => prev.max(m),
                },
            });
        }
        let s = s.unwrap_or(0.0) * rule.weight;
        if s > 0.0 {
            strengths.push((s, out_var.term(&rule.consequent.term).unwrap().shape.params()));
        }
    }
    let (left, right) = (out_var.domain_left, out_var.domain_right);
    let h = (right - left) / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=n {
        let x = left + i as f64 * h;
        let mut mu = 0.0f64;
        for (s, p) in &strengths {
            mu = mu.max(s.min(membership(*p, x)));
        }
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        num += w * x * mu;
        den += w * mu;
    }
    if den == 0.0 {
        (left + right) / 2.0
    } else {
        num / den
    }
}

#[test]
fn inference_oracle() {
    let started = Instant::now();
    let fc = build_master_controller(&DefaultConsequentMap);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let names = ["DBSN", "DWSN", "DBWR", "DWWR", "DBTMR", "DWTMR"];
    for case in 0..20 {
        let values: Vec<f64> = names
            .iter()
            .map(|n| {
                if n.ends_with("TMR") {
                    rng.gen_range(-1.0..=1.0)
                } else {
                    rng.gen_range(0.0..=1.0)
                }
            })
            .collect();
        let input: InputVector = names.iter().copied().zip(values.iter().copied()).collect();
        let got = infer(&fc, &input, 1000).unwrap().output;
        let reference = oracle_centroid(
            &fc,
            &names
                .iter()
                .map(|n| n.to_string())
                .zip(values.iter().copied())
                .collect(),
            1_000_000,
        );
        assert!(
            (got - reference).abs() <= 1e-4,
            "case {case}: N=1000 gave {got}, N=1e6 oracle gave {reference}"
        );
    }
    // All inputs on their High plateaus: only the all-High rule fires at
    // strength 1, so the aggregate is the EWR High trapezoid itself, whose
    // closed-form centroid is 131/150 = 0.87333...
    let input: InputVector = names.iter().copied().zip([0.9, 0.9, 0.9, 0.9, 0.9, 0.9]).collect();
    let got = infer(&fc, &input, 1000).unwrap().output;
    assert!((got - 131.0 / 150.0).abs() <= 1e-3, "all-High gave {got}");
    assert!(started.elapsed().as_secs() < 10);
    println!("PASS: inference oracle (20 random inputs within 1e-4 of N=1e6; all-High 0.87333)");
}

#[test]
fn defaults_echo() {
    let cfg = EvolutionConfig::default();
    assert_eq!(cfg.crossover_rate, 0.9);
    assert_eq!(cfg.mutation_rate, 0.1);
    assert_eq!(cfg.generations, 10_000);
    assert_eq!(DEFAULT_SPLIT_BOUNDARY, 45);
    let fc = build_master_controller(&DefaultConsequentMap);
    let ds = generate_synthetic(
        &fc,
        &SyntheticConfig {
            games: 60,
            moves_per_game: 1,
            sample_count: 100,
            ..SyntheticConfig::default()
        },
    )
    .unwrap();
    let (_, test) = split_by_game(&ds, DEFAULT_SPLIT_BOUNDARY);
    assert_eq!(test.game_numbers(), (46..=60).collect::<Vec<u32>>());
    println!("PASS: defaults (crossover 0.9, mutation 0.1, generations 10000, test games 46-60)");
}

/// The master knowledge base with several membership cut points moved, used
/// as the hidden target the GA must recover.
fn perturbed_target() -> FuzzyController {
    let mut fc = build_master_controller(&DefaultConsequentMap);
    let set = |fc: &mut FuzzyController, var: &str, term: &str, p: [f64; 4]| {
        let v = fc.knowledge_base.iter_mut().find(|v| v.name == var).unwrap();
        let t = v.terms.iter_mut().find(|t| t.name == term).unwrap();
        t.shape = TrapezoidShape::new(p[0], p[1], p[2], p[3]);
    };
    set(&mut fc, "DBWR", "Low", [0.0, 0.0, 0.2, 0.35]);
    set(&mut fc, "DBWR", "Medium", [0.2, 0.35, 0.5, 0.65]);
    set(&mut fc, "DBWR", "High", [0.5, 0.65, 1.0, 1.0]);
    set(&mut fc, "DBTMR", "Low", [-1.0, -1.0, -0.4, 0.0]);
    set(&mut fc, "DBTMR", "High", [-0.4, 0.0, 1.0, 1.0]);
    set(&mut fc, "EWR", "Medium_Low", [0.15, 0.25, 0.45, 0.6]);
    set(&mut fc, "EWR", "Medium_High", [0.45, 0.6, 0.75, 0.85]);
    assert!(validate_controller(&fc).is_empty());
    fc
}

#[test]
fn synthetic_recovery() {
    let started = Instant::now();
    let target = perturbed_target();
    // Small label noise puts train and test on a shared error floor; a
    // noiseless target lets 2000 generations drive the training MSE far
    // below anything 50 held-out records can match.
    let ds = generate_synthetic(
        &target,
        &SyntheticConfig {
            games: 50,
            moves_per_game: 10,
            noise_sigma: 0.02,
            seed: 42,
            sample_count: 100,
        },
    )
    .unwrap();
    assert_eq!(ds.len(), 500);
    let (train, test) = split_by_game(&ds, DEFAULT_SPLIT_BOUNDARY);
    let template = build_master_controller(&DefaultConsequentMap);
    let cfg = EvolutionConfig {
        generations: 2000,
        population_size: 50,
        sample_count: 100,
        seed: 9,
        ..EvolutionConfig::default()
    };
    let run = || evolve(&template, &make_view(&train, Side::Black), &cfg).unwrap();
    let report = run();

    let gen0 = report.history.first().unwrap().best_mse;
    let last = report.history.last().unwrap().best_mse;
    assert!(
        last <= 0.25 * gen0,
        "final MSE {last} not <= 25% of generation-0 MSE {gen0}"
    );
    for pair in report.history.windows(2) {
        assert!(
            pair[1].best_mse <= pair[0].best_mse,
            "best-fitness history must be nonincreasing"
        );
    }
    let train_mse =
        gfml::ga::fitness(&report.best, &make_view(&train, Side::Black), 100).unwrap();
    let test_mse = gfml::ga::fitness(&report.best, &make_view(&test, Side::Black), 100).unwrap();
    assert!(
        test_mse <= 2.0 * train_mse,
        "test MSE {test_mse} exceeds 2x train MSE {train_mse}"
    );

    let report2 = run();
    assert_eq!(
        serialize_fml(&report.best).unwrap().text,
        serialize_fml(&report2.best).unwrap().text,
        "same seed must give identical learned controller"
    );
    assert_eq!(report.history_csv(), report2.history_csv());

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "took {elapsed:?}");
    println!(
        "PASS: synthetic recovery (MSE {gen0:.6} -> {last:.6}, test/train {test_mse:.6}/{train_mse:.6}, deterministic, {elapsed:?})"
    );
}

#[test]
fn dataset_conservation() {
    let fc = build_master_controller(&DefaultConsequentMap);
    let ds = generate_synthetic(
        &fc,
        &SyntheticConfig {
            games: 60,
            moves_per_game: 4,
            seed: 3,
            sample_count: 100,
            ..SyntheticConfig::default()
        },
    )
    .unwrap();
    let (train, test) = split_by_game(&ds, DEFAULT_SPLIT_BOUNDARY);
    assert_eq!(train.len() + test.len(), ds.len());
    assert_eq!(train.game_numbers(), (1..=45).collect::<Vec<u32>>());

    // Raw simulation counts: scaling every count by a constant must not
    // change the normalized features, and each game's max must map to 1.0.
    let rows = [
        (1u32, 1u32, 500u64, 200u64),
        (1, 2, 1000, 400),
        (1, 3, 250, 800),
        (2, 1, 30, 9),
        (2, 2, 15, 36),
    ];
    let csv_for = |scale: u64| {
        let mut text = format!("{RAW_CSV_HEADER}\n");
        for (g, m, b, w) in rows {
            text.push_str(&format!(
                "{g},{m},{},{},0.5,0.5,0,0,0.5,0.5\n",
                b * scale,
                w * scale
            ));
        }
        text
    };
    let base = parse_raw_records_str(&csv_for(1), "base", NormalizationMode::PerGameMax)
        .unwrap()
        .dataset;
    let scaled = parse_raw_records_str(&csv_for(7), "scaled", NormalizationMode::PerGameMax)
        .unwrap()
        .dataset;
    for (a, b) in base.records.iter().zip(&scaled.records) {
        assert_eq!(a.dbsn, b.dbsn);
        assert_eq!(a.dwsn, b.dwsn);
    }
    for game in base.game_numbers() {
        let max_b = base
            .game(game)
            .iter()
            .map(|r| r.dbsn)
            .fold(f64::NEG_INFINITY, f64::max);
        let max_w = base
            .game(game)
            .iter()
            .map(|r| r.dwsn)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max_b, 1.0);
        assert_eq!(max_w, 1.0);
    }
    println!("PASS: dataset conservation (split partitions, normalization scale-invariant)");
}

/// Plain negamax over the raw board, no memoization or move ordering shared
/// with the library: the independent oracle for criterion 8.
fn oracle_value(board: &Board) -> i8 {
    fn winner(board: &Board) -> Option<Player> {
        const LINES: [[usize; 3]; 8] = [
            [0, 1, 2],
            [3, 4, 5],
            [6, 7, 8],
            [0, 3, 6],
            [1, 4, 7],
            [2, 5, 8],
            [0, 4, 8],
            [2, 4, 6],
        ];
        for line in LINES {
            if let Some(p) = board[line[0]] {
                if board[line[1]] == Some(p) && board[line[2]] == Some(p) {
                    return Some(p);
                }
            }
        }
        None
    }
    if let Some(w) = winner(board) {
        // The side to move did not make the winning move, so it lost.
        return if w == to_move(board) { 1 } else { -1 };
    }
    if board.iter().all(|c| c.is_some()) {
        return 0;
    }
    let mover = to_move(board);
    let mut best = -2i8;
    for cell in 0..9 {
        if board[cell].is_none() {
            let mut next = *board;
            next[cell] = Some(mover);
            best = best.max(-oracle_value(&next));
        }
    }
    best
}

#[test]
fn rollout_minimax() {
    let started = Instant::now();

    // Enumerate every reachable position by breadth-first expansion.
    let mut reachable: HashSet<Board> = HashSet::new();
    let mut frontier = vec![empty_board()];
    reachable.insert(empty_board());
    while let Some(board) = frontier.pop() {
        let provider = TicTacToeProvider::default();
        if provider.is_terminal(&board).is_some() {
            continue;
        }
        let mover = to_move(&board);
        for cell in 0..9 {
            if board[cell].is_none() {
                let mut next = board;
                next[cell] = Some(mover);
                if reachable.insert(next) {
                    frontier.push(next);
                }
            }
        }
    }
    assert!(reachable.len() <= 5478, "found {} states", reachable.len());

    let mut memo = HashMap::new();
    for board in &reachable {
        assert_eq!(
            minimax_value(board, &mut memo),
            oracle_value(board),
            "disagreement on {board:?}"
        );
    }

    // Perfect self-play from the empty board is a draw.
    let provider = TicTacToeProvider::default();
    let trace = rollout(&provider, empty_board(), 9, &ChoicePolicy::Top1, 3).unwrap();
    assert_eq!(trace.final_outcome, Some(Outcome::Draw));

    // Replaying the chosen moves reproduces every recorded state.
    let mut board = trace.start;
    for step in &trace.steps {
        assert_eq!(board, step.state_before);
        board = provider.apply(&board, &step.chosen.mv);
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30);
    println!(
        "PASS: rollout/minimax ({} states agree with oracle, top1 self-play draws, trace replays)",
        reachable.len()
    );
}
