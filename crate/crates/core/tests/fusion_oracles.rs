//! DCS-LA and KNORA-E against brute-force references, plus stacking
//! structure.

use atmfusion_core::features::LabeledInstance;
use atmfusion_core::fusion::*;
use atmfusion_core::learners::*;
use atmfusion_core::rng::Stream;

const DIM: usize = 6;

/// Points on a coarse grid so that distance ties are common.
fn grid_point(rng: &mut Stream) -> Vec<f64> {
    (0..DIM).map(|_| rng.below(6) as f64 / 5.0).collect()
}

fn noisy_label(x: &[f64], rng: &mut Stream) -> u8 {
    let clean = u8::from(x[0] + 0.5 * x[5] > 0.7);
    if rng.bernoulli(0.2) {
        1 - clean
    } else {
        clean
    }
}

fn instances(n: usize, seed: u64) -> Vec<LabeledInstance> {
    let mut rng = Stream::new(seed, &[1]);
    (0..n)
        .map(|i| {
            let x = grid_point(&mut rng);
            let y = noisy_label(&x, &mut rng);
            LabeledInstance::observed("q", i as i64, x, y)
        })
        .collect()
}

fn pools() -> (PoolSpec, PoolSpec) {
    let train = Samples::from_instances(&instances(400, 11)).unwrap();
    let tree = train_model(
        ModelKind::Tree,
        &train,
        &ModelParams {
            tree: TreeParams {
                min_samples_leaf: 5,
                ..TreeParams::default()
            },
            ..ModelParams::default()
        },
    )
    .unwrap();
    let svm = train_default(ModelKind::Svm, &train, 1).unwrap();
    let logreg = train_default(ModelKind::Logreg, &train, 1).unwrap();
    let dcs = PoolSpec::new(vec![tree, svm, logreg]).unwrap();
    let bag = train_bagging(
        &train,
        &BaggingParams {
            n_estimators: 10,
            ..BaggingParams::default()
        },
    )
    .unwrap();
    let des = PoolSpec::new(bag.members.into_iter().map(TrainedModel::Tree).collect()).unwrap();
    (dcs, des)
}

fn sqdist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

/// Full scan, sorted by (distance, index).
fn brute_neighbors(rows: &[LabeledInstance], x: &[f64], k: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = rows.iter().enumerate().map(|(i, r)| (sqdist(&r.x, x), i)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all.into_iter().map(|(_, i)| i).collect()
}

fn brute_dcs(pool: &PoolSpec, rows: &[LabeledInstance], x: &[f64]) -> (usize, u8) {
    let nn = brute_neighbors(rows, x, pool.k_neighbors);
    let acc: Vec<f64> = pool
        .members
        .iter()
        .map(|m| {
            nn.iter().filter(|&&i| m.label(&rows[i].x) == rows[i].y).count() as f64 / nn.len() as f64
        })
        .collect();
    let mut best = 0;
    for c in 1..acc.len() {
        if acc[c] > acc[best] {
            best = c;
        }
    }
    (best, pool.members[best].label(x))
}

fn brute_knora(pool: &PoolSpec, rows: &[LabeledInstance], x: &[f64]) -> (Option<Vec<usize>>, u8) {
    let mut nn = brute_neighbors(rows, x, pool.k_neighbors);
    let mut selected = None;
    while !nn.is_empty() {
        let keep: Vec<usize> = (0..pool.members.len())
            .filter(|&c| nn.iter().all(|&i| pool.members[c].label(&rows[i].x) == rows[i].y))
            .collect();
        if !keep.is_empty() {
            selected = Some(keep);
            break;
        }
        nn.pop();
    }
    let voters: Vec<usize> = selected.clone().unwrap_or_else(|| (0..pool.members.len()).collect());
    let ups = voters.iter().filter(|&&c| pool.members[c].label(x) == 1).count();
    let downs = voters.len() - ups;
    (selected, if ups >= downs { 1 } else { 0 })
}

#[test]
fn dcs_and_knora_match_brute_force_on_200_queries() {
    let (dcs_pool, des_pool) = pools();
    let dsel_rows = instances(500, 21);
    let dcs_dsel = build_dsel(&dcs_pool, dsel_rows.clone()).unwrap();
    let des_dsel = build_dsel(&des_pool, dsel_rows.clone()).unwrap();
    let mut rng = Stream::new(31, &[]);
    let mut reduced = 0;
    for _ in 0..200 {
        // Half the queries on the grid (exact ties), half off it.
        let x: Vec<f64> = if rng.bernoulli(0.5) {
            grid_point(&mut rng)
        } else {
            (0..DIM).map(|_| rng.unit()).collect()
        };
        let (sel, label) = brute_dcs(&dcs_pool, &dsel_rows, &x);
        assert_eq!(dcs_la_select(&dcs_pool, &dcs_dsel, &x).unwrap(), sel);
        assert_eq!(dcs_la_predict(&dcs_pool, &dcs_dsel, &x).unwrap().label, label);

        let (chosen, label) = brute_knora(&des_pool, &dsel_rows, &x);
        let ours = knora_e_select(&des_pool, &des_dsel, &x).unwrap();
        assert_eq!(ours, chosen);
        assert_eq!(knora_e_predict(&des_pool, &des_dsel, &x).unwrap().label, label);
        match &chosen {
            None => {}
            Some(_) => {
                let full = brute_neighbors(&dsel_rows, &x, 7);
                let all_correct = (0..des_pool.members.len()).any(|c| {
                    full.iter()
                        .all(|&i| des_pool.members[c].label(&dsel_rows[i].x) == dsel_rows[i].y)
                });
                if !all_correct {
                    reduced += 1;
                }
            }
        }
    }
    // The fixture exercises the elimination loop, not only the k = 7 case.
    assert!(reduced > 0, "no query needed a smaller neighbourhood");
}

#[test]
fn selection_rules_match_on_ties() {
    let (dcs_pool, _) = pools();
    // Every pool member correct everywhere: DCS must choose member 0.
    let rows: Vec<LabeledInstance> = instances(50, 5)
        .into_iter()
        .map(|mut r| {
            r.y = dcs_pool.members[0].label(&r.x);
            r
        })
        .filter(|r| dcs_pool.members.iter().all(|m| m.label(&r.x) == r.y))
        .collect();
    assert!(rows.len() >= 7);
    let dsel = build_dsel(&dcs_pool, rows).unwrap();
    assert_eq!(dcs_la_select(&dcs_pool, &dsel, &[0.5; DIM]).unwrap(), 0);
}

#[test]
fn stacking_meta_matrix_and_determinism() {
    let rows = instances(300, 41);
    let params = StackingParams {
        models: ModelParams {
            forest: ForestParams {
                n_trees: 10,
                ..ForestParams::default()
            },
            lgbm: LeafWiseParams {
                n_rounds: 10,
                ..LeafWiseParams::default()
            },
            cat: ObliviousParams {
                n_rounds: 10,
                ..ObliviousParams::default()
            },
            ..ModelParams::default()
        },
        ..StackingParams::default()
    };
    let samples = Samples::from_instances(&rows).unwrap();
    let plan = stratified_folds(samples.labels(), 5, 1).unwrap();
    let meta = out_of_fold(&samples, &plan, &params.bases, &params.models).unwrap();
    assert_eq!(meta.len(), rows.len());
    assert!(meta.iter().all(|r| r.len() == 3 && r.iter().all(|p| (0.0..=1.0).contains(p))));
    let a = fit_stacking(&rows, &params).unwrap();
    let b = fit_stacking(&rows, &params).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.meta.weights.len(), 3);
    assert!(stacking_predict(&a, &[0.5; DIM - 1]).is_err());
}
