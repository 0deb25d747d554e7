//! Analytic gradients against central finite differences.

use ontoshop_neural::crf::{Crf, Emission, NUM_TAGS};
use ontoshop_neural::gradcheck::{check_params, gradient_check, DEFAULT_STEP};
use ontoshop_neural::layers::{Conv1d, Dense};
use ontoshop_neural::lstm::{BiLstm, LstmCell};
use ontoshop_neural::params::Params;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(2024)
}

fn random_rows(rng: &mut ChaCha8Rng, len: usize, width: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|_| (0..width).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// `Σ r ⊙ y`, a loss whose gradient with respect to `y` is `r`.
fn weighted_sum(y: &[Vec<f64>], r: &[Vec<f64>]) -> f64 {
    y.iter()
        .zip(r)
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

fn perturb_all<P: Params>(p: &mut P, rng: &mut ChaCha8Rng) {
    p.visit_mut(&mut |_, t| t.data.iter_mut().for_each(|x| *x = rng.random_range(-0.8..0.8)));
}

#[test]
fn dense_parameters_and_input() {
    let mut rng = rng();
    let mut d = Dense::zeros(4, 3);
    perturb_all(&mut d, &mut rng);
    let x = random_rows(&mut rng, 1, 4).remove(0);
    let r = random_rows(&mut rng, 1, 3);
    let mut grads = d.zeros_like();
    let gx = d.backward_row(&x, &r[0], &mut grads);
    let err = check_params(&d, &grads, DEFAULT_STEP, |m| weighted_sum(&[m.forward_row(&x)], &r));
    assert!(err < TOL, "dense params: {err}");
    let err = gradient_check(&x, &gx, DEFAULT_STEP, |x| weighted_sum(&[d.forward_row(x)], &r));
    assert!(err < TOL, "dense input: {err}");
}

#[test]
fn conv1d_parameters_and_input() {
    let mut rng = rng();
    for width in [1, 3, 5] {
        let mut c = Conv1d::zeros(3, 4, width).unwrap();
        perturb_all(&mut c, &mut rng);
        let x = random_rows(&mut rng, 6, 3);
        let r = random_rows(&mut rng, 6, 4);
        let mut grads = c.zeros_like();
        let gx = c.backward_rows(&x, &r, &mut grads);
        let err = check_params(&c, &grads, DEFAULT_STEP, |m| weighted_sum(&m.forward_rows(&x), &r));
        assert!(err < TOL, "conv width {width} params: {err}");
        let flat: Vec<f64> = x.concat();
        let err = gradient_check(&flat, &gx.concat(), DEFAULT_STEP, |f| {
            let rows: Vec<Vec<f64>> = f.chunks(3).map(<[f64]>::to_vec).collect();
            weighted_sum(&c.forward_rows(&rows), &r)
        });
        assert!(err < TOL, "conv width {width} input: {err}");
    }
}

#[test]
fn conv_width_one_commutes_with_dense() {
    let mut rng = rng();
    let mut c = Conv1d::zeros(3, 2, 1).unwrap();
    perturb_all(&mut c, &mut rng);
    let d = Dense {
        weight: ontoshop_neural::tensor::Tensor::new(vec![2, 3], c.weight.data.clone()).unwrap(),
        bias: c.bias.clone(),
    };
    let x = random_rows(&mut rng, 5, 3);
    let via_dense: Vec<Vec<f64>> = x.iter().map(|r| d.forward_row(r)).collect();
    assert_eq!(c.forward_rows(&x), via_dense);
}

#[test]
fn lstm_cell_parameters_and_inputs() {
    let mut rng = rng();
    let mut cell = LstmCell::zeros(3, 4);
    perturb_all(&mut cell, &mut rng);
    let x = random_rows(&mut rng, 1, 3).remove(0);
    let h_prev = random_rows(&mut rng, 1, 4).remove(0);
    let c_prev = random_rows(&mut rng, 1, 4).remove(0);
    let rh = random_rows(&mut rng, 1, 4);
    let rc = random_rows(&mut rng, 1, 4);
    let loss = |cell: &LstmCell, x: &[f64], h: &[f64], c: &[f64]| {
        let s = cell.step(x, h, c).unwrap();
        weighted_sum(&[s.h], &rh) + weighted_sum(&[s.c], &rc)
    };
    let cache = cell.step(&x, &h_prev, &c_prev).unwrap();
    let mut grads = cell.zeros_like();
    let (gx, gh, gc) = cell.step_backward(&cache, &rh[0], &rc[0], &mut grads);
    let err = check_params(&cell, &grads, DEFAULT_STEP, |m| loss(m, &x, &h_prev, &c_prev));
    assert!(err < TOL, "cell params: {err}");
    let joint = [x.clone(), h_prev.clone(), c_prev.clone()].concat();
    let analytic = [gx, gh, gc].concat();
    let err = gradient_check(&joint, &analytic, DEFAULT_STEP, |v| {
        loss(&cell, &v[..3], &v[3..7], &v[7..])
    });
    assert!(err < TOL, "cell inputs: {err}");
}

#[test]
fn lstm_cell_matches_scalar_evaluation() {
    let mut rng = rng();
    let mut cell = LstmCell::zeros(2, 3);
    perturb_all(&mut cell, &mut rng);
    let x = [0.4, -0.9];
    let h_prev = [0.1, -0.2, 0.3];
    let c_prev = [0.5, -0.4, 0.2];
    let s = cell.step(&x, &h_prev, &c_prev).unwrap();
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let at = |t: &ontoshop_neural::tensor::Tensor, r: usize, c: usize| t.data[r * t.shape[1] + c];
    for k in 0..3 {
        let mut zi = cell.b_i.data[k] + cell.w_ci.data[k] * c_prev[k];
        let mut zc = cell.b_c.data[k];
        let mut zo = cell.b_o.data[k];
        for j in 0..2 {
            zi += at(&cell.w_xi, k, j) * x[j];
            zc += at(&cell.w_xc, k, j) * x[j];
            zo += at(&cell.w_xo, k, j) * x[j];
        }
        for j in 0..3 {
            zi += at(&cell.w_hi, k, j) * h_prev[j];
            zc += at(&cell.w_hc, k, j) * h_prev[j];
            zo += at(&cell.w_ho, k, j) * h_prev[j];
        }
        let i = sig(zi);
        let c = (1.0 - i) * c_prev[k] + i * zc.tanh();
        let o = sig(zo + cell.w_co.data[k] * c);
        let h = o * c.tanh();
        assert!((s.c[k] - c).abs() < 1e-12);
        assert!((s.h[k] - h).abs() < 1e-12);
    }
}

#[test]
fn bilstm_parameters_and_inputs() {
    let mut rng = rng();
    let mut net = BiLstm::zeros(3, 2);
    perturb_all(&mut net, &mut rng);
    let xs = random_rows(&mut rng, 4, 3);
    let r = random_rows(&mut rng, 4, 4);
    let (_, cache) = net.run(&xs).unwrap();
    let mut grads = net.zeros_like();
    let gx = net.run_backward(&cache, &r, &mut grads);
    let err = check_params(&net, &grads, DEFAULT_STEP, |m| weighted_sum(&m.run(&xs).unwrap().0, &r));
    assert!(err < TOL, "bilstm params: {err}");
    let err = gradient_check(&xs.concat(), &gx.concat(), DEFAULT_STEP, |f| {
        let rows: Vec<Vec<f64>> = f.chunks(3).map(<[f64]>::to_vec).collect();
        weighted_sum(&net.run(&rows).unwrap().0, &r)
    });
    assert!(err < TOL, "bilstm inputs: {err}");
}

#[test]
fn bilstm_symmetries() {
    let mut rng = rng();
    let net = BiLstm::glorot(3, 2, &mut rng);
    let one = random_rows(&mut rng, 1, 3);
    let (out, _) = net.run(&one).unwrap();
    let fw = net.forward.step(&one[0], &[0.0; 2], &[0.0; 2]).unwrap();
    let bw = net.backward.step(&one[0], &[0.0; 2], &[0.0; 2]).unwrap();
    assert_eq!(out[0], [fw.h, bw.h].concat());
    assert_eq!(out[0].len(), 4);

    let swapped = BiLstm {
        forward: net.backward.clone(),
        backward: net.forward.clone(),
    };
    let xs = random_rows(&mut rng, 5, 3);
    let reversed: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let (a, _) = net.run(&xs).unwrap();
    let (b, _) = swapped.run(&reversed).unwrap();
    for t in 0..5 {
        let flipped = [&b[4 - t][2..], &b[4 - t][..2]].concat();
        assert_eq!(a[t], flipped);
    }
}

#[test]
fn crf_emission_and_score_gradients() {
    let mut rng = rng();
    for n in 1..=5 {
        let crf = Crf::random(1.0, &mut rng);
        let e: Vec<Emission> = (0..n)
            .map(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0)))
            .collect();
        let mut tags = vec![0; n];
        tags[0] = 1;
        if n > 1 {
            tags[1] = 2;
        }
        let mut grads = Crf::zeros();
        let (nll, ge) = crf.nll_backward(&e, &tags, &mut grads).unwrap();
        assert!((nll + crf.log_likelihood(&e, &tags).unwrap()).abs() < 1e-12);

        let flat: Vec<f64> = e.iter().flatten().copied().collect();
        let analytic: Vec<f64> = ge.iter().flatten().copied().collect();
        let err = gradient_check(&flat, &analytic, DEFAULT_STEP, |f| {
            let rows: Vec<Emission> = f.chunks(NUM_TAGS).map(|c| [c[0], c[1], c[2]]).collect();
            -crf.log_likelihood(&rows, &tags).unwrap()
        });
        assert!(err < TOL, "crf emissions n={n}: {err}");
        let err = check_params(&crf, &grads, DEFAULT_STEP, |m| -m.log_likelihood(&e, &tags).unwrap());
        assert!(err < TOL, "crf scores n={n}: {err}");
    }
}
