use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;

fn lm(rows: &[&[i8]]) -> LabelMatrix {
    LabelMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
}

fn weights(lab: &[f64], acc: &[f64]) -> GenerativeWeights {
    GenerativeWeights {
        w_lab: lab.to_vec(),
        w_acc: acc.to_vec(),
    }
}

/// Unnormalized joint log weight of (votes, labels), straight from the factors.
fn joint(w: &GenerativeWeights, votes: &[Vec<i8>], ys: &[i8]) -> f64 {
    let mut s = 0.0;
    for (i, row) in votes.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0 {
                s += w.w_lab[i];
            }
            if v == ys[j] {
                s += w.w_acc[i];
            }
        }
    }
    s
}

fn all_labelings(n: usize) -> Vec<Vec<i8>> {
    (0..1usize << n)
        .map(|mask| (0..n).map(|j| if mask >> j & 1 == 1 { 1 } else { -1 }).collect())
        .collect()
}

fn all_matrices(m: usize, n: usize) -> Vec<Vec<Vec<i8>>> {
    let cells = m * n;
    (0..3usize.pow(cells as u32))
        .map(|mut code| {
            let mut flat = Vec::with_capacity(cells);
            for _ in 0..cells {
                flat.push((code % 3) as i8 - 1);
                code /= 3;
            }
            flat.chunks(n).map(|c| c.to_vec()).collect()
        })
        .collect()
}

fn brute_lml(w: &GenerativeWeights, l: &LabelMatrix) -> f64 {
    let ys = all_labelings(l.n());
    let z: f64 = all_matrices(l.m(), l.n())
        .iter()
        .flat_map(|v| ys.iter().map(move |y| joint(w, v, y).exp()))
        .sum();
    let num: f64 = ys.iter().map(|y| joint(w, &l.rows, y).exp()).sum();
    num.ln() - z.ln()
}

#[test]
fn label_matrix_rejects_ragged_rows() {
    assert!(LabelMatrix::from_rows(vec![vec![1, 0], vec![1]]).is_err());
    assert!(LabelMatrix::from_rows(vec![vec![2]]).is_err());
}

#[test]
fn zero_weights_lml_matches_closed_form() {
    let l = lm(&[&[1, 0, -1], &[0, 0, 1]]);
    let w = GenerativeWeights::zeros(2);
    let got = log_marginal_likelihood(&w, &l).unwrap();
    // each column: log 2 - log(2 * 3^m)
    let want = 3.0 * (2f64.ln() - (2.0 * 9.0f64).ln());
    assert!((got - want).abs() < 1e-12);
    assert!((got - brute_lml(&w, &l)).abs() < 1e-10);
}

#[test]
fn lml_matches_enumeration() {
    let l = lm(&[&[1, -1], &[0, 1], &[1, 1]]);
    let w = weights(&[0.3, -0.5, 1.2], &[0.7, 1.5, -0.4]);
    let got = log_marginal_likelihood(&w, &l).unwrap();
    assert!((got - brute_lml(&w, &l)).abs() < 1e-10, "{got} vs {}", brute_lml(&w, &l));
}

#[test]
fn non_finite_weights_are_rejected() {
    let l = lm(&[&[1]]);
    assert!(log_marginal_likelihood(&weights(&[f64::NAN], &[0.0]), &l).is_err());
}

#[test]
fn marginals_edge_cases() {
    let w = weights(&[0.0, 0.0], &[1.3, 1.3]);
    let l = lm(&[&[0, 1], &[0, -1]]);
    let p = exact_marginals(&w, &l).unwrap();
    assert_eq!(p.0, vec![0.5, 0.5]);
}

#[test]
fn marginals_match_enumeration_over_labels() {
    let w = weights(&[0.2, -0.1], &[0.9, 0.4]);
    let l = lm(&[&[1, -1, 0], &[1, 1, -1]]);
    let p = exact_marginals(&w, &l).unwrap();
    let ys = all_labelings(3);
    let total: f64 = ys.iter().map(|y| joint(&w, &l.rows, y).exp()).sum();
    for j in 0..3 {
        let pos: f64 = ys
            .iter()
            .filter(|y| y[j] == 1)
            .map(|y| joint(&w, &l.rows, y).exp())
            .sum();
        assert!((p[j] - pos / total).abs() < 1e-12);
    }
}

#[test]
fn majority_vote_cases() {
    let l = lm(&[&[1, 0, 1], &[1, 0, -1], &[-1, 0, 0]]);
    assert_eq!(majority_vote(&l).0, vec![1.0, 0.5, 0.5]);
}

#[test]
fn all_abstain_fits_to_half() {
    let l = lm(&[&[0, 0, 0, 0], &[0, 0, 0, 0]]);
    let fit = fit_generative(&l, &AggregatorConfig::default()).unwrap();
    let p = exact_marginals(&fit.weights, &l).unwrap();
    assert!(p.iter().all(|&x| x == 0.5));
    // clamped accuracy statistic is zero for every LF
    let g = lml_grad(&fit.weights, &l).unwrap();
    let free_agree: Vec<f64> = (0..2)
        .map(|i| {
            let (a, b) = (fit.weights.w_lab[i], fit.weights.w_acc[i]);
            4.0 * (a + b - lf_log_partition(a, b)).exp()
        })
        .collect();
    for i in 0..2 {
        assert!((g.w_acc[i] + free_agree[i]).abs() < 1e-12);
    }
}

#[test]
fn fit_rejects_bad_config() {
    let l = lm(&[&[1, -1]]);
    let bad_lr = AggregatorConfig {
        lr: 0.0,
        ..Default::default()
    };
    assert!(fit_generative(&l, &bad_lr).is_err());
    let bad_epochs = AggregatorConfig {
        epochs: 0,
        ..Default::default()
    };
    assert!(fit_generative(&l, &bad_epochs).is_err());
}

#[test]
fn exact_objective_never_increases() {
    let mut rng = seed::rng(3);
    let rows: Vec<Vec<i8>> = (0..3)
        .map(|_| (0..60).map(|_| rng.gen_range(-1..=1)).collect())
        .collect();
    let l = LabelMatrix::from_rows(rows).unwrap();
    let fit = fit_generative(&l, &AggregatorConfig::default()).unwrap();
    for pair in fit.history.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-12, "{pair:?}");
    }
}

#[test]
fn minibatch_mode_is_deterministic() {
    let mut rng = seed::rng(5);
    let rows: Vec<Vec<i8>> = (0..3)
        .map(|_| (0..50).map(|_| rng.gen_range(-1..=1)).collect())
        .collect();
    let l = LabelMatrix::from_rows(rows).unwrap();
    let cfg = AggregatorConfig {
        batch_size: Some(8),
        epochs: 20,
        ..Default::default()
    };
    assert_eq!(fit_generative(&l, &cfg).unwrap(), fit_generative(&l, &cfg).unwrap());
}

#[test]
fn gibbs_marginals_symmetric_contradiction() {
    let w = weights(&[0.0, 0.0], &[1.0, 1.0]);
    let l = lm(&[&[1, -1, 1], &[-1, 1, -1]]);
    let p = gibbs_marginals(&w, &l, 20_000, 1_000, 9).unwrap();
    assert!(p.iter().all(|x| (x - 0.5).abs() <= 0.02), "{p:?}");
    assert_eq!(p, gibbs_marginals(&w, &l, 20_000, 1_000, 9).unwrap());
    assert!(gibbs_marginals(&w, &l, 0, 0, 9).is_err());
}

fn small_case() -> impl Strategy<Value = (GenerativeWeights, LabelMatrix)> {
    (1usize..=4, 1usize..=8).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(-2.0f64..2.0, m),
            prop::collection::vec(-3.0f64..3.0, m),
            prop::collection::vec(prop::collection::vec(-1i8..=1, n), m),
        )
            .prop_map(|(lab, acc, rows)| (weights(&lab, &acc), LabelMatrix::from_rows(rows).unwrap()))
    })
}

proptest! {
    #[test]
    fn marginals_strictly_inside_unit_interval((w, l) in small_case()) {
        for p in exact_marginals(&w, &l).unwrap().iter() {
            prop_assert!(*p > 0.0 && *p < 1.0);
        }
    }

    #[test]
    fn label_flip_equivariance((w, l) in small_case()) {
        let flipped = LabelMatrix::from_rows(
            l.rows.iter().map(|r| r.iter().map(|v| -v).collect()).collect(),
        ).unwrap();
        let p = exact_marginals(&w, &l).unwrap();
        let q = exact_marginals(&w, &flipped).unwrap();
        for (a, b) in p.iter().zip(q.iter()) {
            prop_assert!((a - (1.0 - b)).abs() < 1e-12);
        }
    }

    #[test]
    fn raising_a_positive_voters_accuracy_raises_p((w, l) in small_case(), bump in 0.0f64..2.0) {
        let p = exact_marginals(&w, &l).unwrap();
        for i in 0..l.m() {
            let mut w2 = w.clone();
            w2.w_acc[i] += bump;
            let q = exact_marginals(&w2, &l).unwrap();
            for j in 0..l.n() {
                if l.get(i, j) == 1 {
                    prop_assert!(q[j] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn lml_is_exchangeable((w, l) in small_case(), seed in any::<u64>()) {
        let base = log_marginal_likelihood(&w, &l).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut cols: Vec<usize> = (0..l.n()).collect();
        cols.shuffle(&mut rng);
        let permuted = l.select_columns(&cols);
        prop_assert!((log_marginal_likelihood(&w, &permuted).unwrap() - base).abs() < 1e-9);

        let mut order: Vec<usize> = (0..l.m()).collect();
        order.shuffle(&mut rng);
        let rows = LabelMatrix::from_rows(order.iter().map(|&i| l.rows[i].clone()).collect()).unwrap();
        let w2 = weights(
            &order.iter().map(|&i| w.w_lab[i]).collect::<Vec<_>>(),
            &order.iter().map(|&i| w.w_acc[i]).collect::<Vec<_>>(),
        );
        prop_assert!((log_marginal_likelihood(&w2, &rows).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn majority_agrees_with_uniform_accuracy_marginals(
        rows in (1usize..=3).prop_flat_map(|m| prop::collection::vec(prop::collection::vec(-1i8..=1, 6), m)),
        acc in 0.1f64..3.0,
    ) {
        let l = LabelMatrix::from_rows(rows).unwrap();
        let w = weights(&vec![0.0; l.m()], &vec![acc; l.m()]);
        let p = exact_marginals(&w, &l).unwrap();
        let mv = majority_vote(&l);
        for j in 0..l.n() {
            if mv[j] != 0.5 {
                prop_assert_eq!(mv[j] > 0.5, p[j] > 0.5);
            }
        }
    }
}
