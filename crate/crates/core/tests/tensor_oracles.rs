//! Tensor operators checked against naive f64 loop oracles.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storewatch_core::tensor::{
    add, batch_norm_inference, conv2d, dense, pool2d, relu, softmax, BatchNormParams, ConvSpec,
    Padding, Pool,
};
use storewatch_core::Tensor;

fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> Tensor {
    let n = dims.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    Tensor::new(dims.to_vec(), data).unwrap()
}

/// Max absolute difference over the max magnitude of the oracle.
fn rel_error(actual: &[f32], expected: &[f64]) -> f64 {
    assert_eq!(actual.len(), expected.len());
    let scale = expected.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let diff = actual
        .iter()
        .zip(expected)
        .fold(0.0f64, |m, (&a, &e)| m.max((a as f64 - e).abs()));
    diff / scale
}

fn same_pad(input: usize, window: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + window).saturating_sub(input);
    (out, total / 2)
}

/// Six nested loops, zero padding, f64 accumulation.
fn conv_oracle(
    input: &Tensor,
    kernel: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    same: bool,
    groups: usize,
) -> (Vec<usize>, Vec<f64>) {
    let [h, w, cin] = <[usize; 3]>::try_from(input.dims()).unwrap();
    let [kh, kw, cin_g, cout] = <[usize; 4]>::try_from(kernel.dims()).unwrap();
    let cout_g = cout / groups;
    let (oh, pt, ow, pl) = if same {
        let (oh, pt) = same_pad(h, kh, stride);
        let (ow, pl) = same_pad(w, kw, stride);
        (oh, pt, ow, pl)
    } else {
        ((h - kh) / stride + 1, 0, (w - kw) / stride + 1, 0)
    };
    let x = input.data();
    let k = kernel.data();
    let mut out = vec![0.0f64; oh * ow * cout];
    for oy in 0..oh {
        for ox in 0..ow {
            for co in 0..cout {
                let g = co / cout_g;
                let mut acc = bias.map_or(0.0, |b| b.data()[co] as f64);
                for ky in 0..kh {
                    for kx in 0..kw {
                        for ci in 0..cin_g {
                            let iy = (oy * stride + ky) as isize - pt as isize;
                            let ix = (ox * stride + kx) as isize - pl as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let xv = x[(iy as usize * w + ix as usize) * cin + g * cin_g + ci];
                            let kv = k[((ky * kw + kx) * cin_g + ci) * cout + co];
                            acc += xv as f64 * kv as f64;
                        }
                    }
                }
                out[(oy * ow + ox) * cout + co] = acc;
            }
        }
    }
    (vec![oh, ow, cout], out)
}

#[test]
fn conv_same_stride2_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let input = random_tensor(&mut rng, &[8, 8, 3]);
    let kernel = random_tensor(&mut rng, &[3, 3, 3, 4]);
    let out = conv2d(&input, &kernel, None, ConvSpec::new(2, Padding::Same)).unwrap();
    let (dims, expected) = conv_oracle(&input, &kernel, None, 2, true, 1);
    assert_eq!(out.dims(), &[4, 4, 4]);
    assert_eq!(out.dims(), dims.as_slice());
    let err = rel_error(out.data(), &expected);
    assert!(err <= 1e-6, "relative error {err}");
}

#[test]
fn conv_random_shapes_incl_depthwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..50 {
        let h = rng.gen_range(3..12);
        let w = rng.gen_range(3..12);
        let k = rng.gen_range(1..4usize).min(h).min(w);
        let stride = rng.gen_range(1..3);
        let same = rng.gen_bool(0.5);
        let depthwise = case % 3 == 0;
        let cin = rng.gen_range(1..6);
        let (groups, kcin, cout) = if depthwise {
            (cin, 1, cin)
        } else {
            (1, cin, rng.gen_range(1..6))
        };
        let input = random_tensor(&mut rng, &[h, w, cin]);
        let kernel = random_tensor(&mut rng, &[k, k, kcin, cout]);
        let bias = random_tensor(&mut rng, &[cout]);
        let spec = ConvSpec {
            stride,
            padding: if same { Padding::Same } else { Padding::Valid },
            groups,
        };
        let out = conv2d(&input, &kernel, Some(&bias), spec).unwrap();
        let (dims, expected) = conv_oracle(&input, &kernel, Some(&bias), stride, same, groups);
        assert_eq!(out.dims(), dims.as_slice());
        let err = rel_error(out.data(), &expected);
        assert!(err <= 1e-6, "case {case}: relative error {err}");
    }
}

#[test]
fn grouped_conv_with_multiple_channels_per_group() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let input = random_tensor(&mut rng, &[5, 6, 4]);
    let kernel = random_tensor(&mut rng, &[3, 3, 2, 6]);
    let spec = ConvSpec {
        stride: 1,
        padding: Padding::Same,
        groups: 2,
    };
    let out = conv2d(&input, &kernel, None, spec).unwrap();
    let (_, expected) = conv_oracle(&input, &kernel, None, 1, true, 2);
    assert!(rel_error(out.data(), &expected) <= 1e-6);
}

#[test]
fn depthwise_equals_per_channel_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (h, w, c) = (7, 9, 3);
    let input = random_tensor(&mut rng, &[h, w, c]);
    let kernel = random_tensor(&mut rng, &[3, 3, 1, c]);
    let out = conv2d(&input, &kernel, None, ConvSpec::depthwise(c, 1, Padding::Same)).unwrap();
    for ch in 0..c {
        let plane: Vec<f32> = input.data().iter().skip(ch).step_by(c).copied().collect();
        let taps: Vec<f32> = kernel.data().iter().skip(ch).step_by(c).copied().collect();
        let single = conv2d(
            &Tensor::new(vec![h, w, 1], plane).unwrap(),
            &Tensor::new(vec![3, 3, 1, 1], taps).unwrap(),
            None,
            ConvSpec::new(1, Padding::Same),
        )
        .unwrap();
        let got: Vec<f32> = out.data().iter().skip(ch).step_by(c).copied().collect();
        assert_eq!(got, single.data());
    }
}

#[test]
fn batch_norm_matches_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let c = rng.gen_range(1..8);
        let x = random_tensor(&mut rng, &[4, 4, c]);
        let params = BatchNormParams {
            gamma: random_tensor(&mut rng, &[c]),
            beta: random_tensor(&mut rng, &[c]),
            mean: random_tensor(&mut rng, &[c]),
            variance: random_tensor(&mut rng, &[c]).map(|v| v.abs() + 0.1),
            epsilon: 1e-3,
        };
        let out = batch_norm_inference(&x, &params).unwrap();
        let expected: Vec<f64> = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let ch = i % c;
                let g = params.gamma.data()[ch] as f64;
                let b = params.beta.data()[ch] as f64;
                let m = params.mean.data()[ch] as f64;
                let var = params.variance.data()[ch] as f64;
                g * (v as f64 - m) / (var + 1e-3f32 as f64).sqrt() + b
            })
            .collect();
        let err = rel_error(out.data(), &expected);
        assert!(err <= 1e-6, "relative error {err}");
    }
}

#[test]
fn max_pool_matches_loop_oracle_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let x = random_tensor(&mut rng, &[8, 8, 4]);
    let pool = Pool::Max {
        window: 2,
        stride: 2,
        padding: Padding::Valid,
    };
    let out = pool2d(&x, pool).unwrap();
    assert_eq!(out.dims(), &[4, 4, 4]);
    for oy in 0..4 {
        for ox in 0..4 {
            for c in 0..4 {
                let mut m = f32::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        m = m.max(x.data()[((oy * 2 + dy) * 8 + ox * 2 + dx) * 4 + c]);
                    }
                }
                assert_eq!(out.data()[(oy * 4 + ox) * 4 + c], m);
            }
        }
    }
}

#[test]
fn global_avg_matches_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..50 {
        let (h, w, c) = (rng.gen_range(1..9), rng.gen_range(1..9), rng.gen_range(1..6));
        let x = random_tensor(&mut rng, &[h, w, c]);
        let out = pool2d(&x, Pool::GlobalAvg).unwrap();
        let expected: Vec<f64> = (0..c)
            .map(|ch| {
                x.data().iter().skip(ch).step_by(c).map(|&v| v as f64).sum::<f64>()
                    / (h * w) as f64
            })
            .collect();
        assert!(rel_error(out.data(), &expected) <= 1e-6);
    }
}

#[test]
fn dense_matches_dot_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let x = random_tensor(&mut rng, &[64]);
    let w = random_tensor(&mut rng, &[64, 10]);
    let b = random_tensor(&mut rng, &[10]);
    let out = dense(&x, &w, &b).unwrap();
    let expected: Vec<f64> = (0..10)
        .map(|m| {
            b.data()[m] as f64
                + (0..64)
                    .map(|n| x.data()[n] as f64 * w.data()[n * 10 + m] as f64)
                    .sum::<f64>()
        })
        .collect();
    let err = rel_error(out.data(), &expected);
    assert!(err <= 1e-6, "relative error {err}");
}

#[test]
fn softmax_matches_f64_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let x = random_tensor(&mut rng, &[101]).map(|v| v * 10.0);
    let out = softmax(&x).unwrap();
    let exps: Vec<f64> = x.data().iter().map(|&v| (v as f64).exp()).collect();
    let total: f64 = exps.iter().sum();
    for (&p, e) in out.data().iter().zip(&exps) {
        assert!((p as f64 - e / total).abs() <= 1e-6);
    }
    let empty_like = Tensor::new(vec![1, 1], vec![0.0]).unwrap();
    assert!(softmax(&empty_like).is_err());
}

fn vec_strategy(max_len: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-50.0f32..50.0, 1..max_len)
}

proptest! {
    #[test]
    fn softmax_sums_to_one_and_keeps_argmax(v in vec_strategy(200)) {
        let x = Tensor::from_vec(v.clone()).unwrap();
        let p = softmax(&x).unwrap();
        let sum: f64 = p.data().iter().map(|&q| q as f64).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-6);
        let argmax = |d: &[f32]| {
            d.iter().enumerate().fold(0, |best, (i, &q)| if q > d[best] { i } else { best })
        };
        prop_assert_eq!(argmax(&v), argmax(p.data()));
    }

    #[test]
    fn relu_is_idempotent(v in vec_strategy(100)) {
        let x = Tensor::from_vec(v).unwrap();
        let once = relu(&x);
        prop_assert_eq!(relu(&once), once);
    }

    #[test]
    fn conv_is_linear_in_input(
        seed in any::<u64>(),
        a in -2.0f32..2.0,
        b in -2.0f32..2.0,
        h in 2usize..8,
        w in 2usize..8,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, &[h, w, 2]);
        let y = random_tensor(&mut rng, &[h, w, 2]);
        let k = random_tensor(&mut rng, &[2, 2, 2, 3]);
        let spec = ConvSpec::new(1, Padding::Same);
        let combo = add(&x.map(|v| a * v), &y.map(|v| b * v)).unwrap();
        let lhs = conv2d(&combo, &k, None, spec).unwrap();
        let rhs = add(
            &conv2d(&x, &k, None, spec).unwrap().map(|v| a * v),
            &conv2d(&y, &k, None, spec).unwrap().map(|v| b * v),
        ).unwrap();
        let expected: Vec<f64> = rhs.data().iter().map(|&v| v as f64).collect();
        prop_assert!(rel_error(lhs.data(), &expected) <= 1e-5);
    }
}

/// Output dims follow the stated formulas over many random shape combinations.
#[test]
fn output_dims_follow_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..1000 {
        let h = rng.gen_range(1..20);
        let w = rng.gen_range(1..20);
        let c = rng.gen_range(1..4);
        let k = rng.gen_range(1..5);
        let s = rng.gen_range(1..4);
        let co = rng.gen_range(1..4);
        let x = Tensor::zeros(vec![h, w, c]).unwrap();
        let kern = Tensor::zeros(vec![k, k, c, co]).unwrap();
        let same = conv2d(&x, &kern, None, ConvSpec::new(s, Padding::Same)).unwrap();
        assert_eq!(same.dims(), &[h.div_ceil(s), w.div_ceil(s), co]);
        let valid = conv2d(&x, &kern, None, ConvSpec::new(s, Padding::Valid));
        if k <= h && k <= w {
            assert_eq!(valid.unwrap().dims(), &[(h - k) / s + 1, (w - k) / s + 1, co]);
        } else {
            assert!(valid.is_err());
        }
        let pool = pool2d(
            &x,
            Pool::Max {
                window: k,
                stride: s,
                padding: Padding::Valid,
            },
        );
        if k <= h && k <= w {
            assert_eq!(pool.unwrap().dims(), &[(h - k) / s + 1, (w - k) / s + 1, c]);
        } else {
            assert!(pool.is_err());
        }
        assert_eq!(pool2d(&x, Pool::GlobalAvg).unwrap().dims(), &[c]);
        let bn = BatchNormParams {
            gamma: Tensor::filled(vec![c], 1.0).unwrap(),
            beta: Tensor::zeros(vec![c]).unwrap(),
            mean: Tensor::zeros(vec![c]).unwrap(),
            variance: Tensor::filled(vec![c], 1.0).unwrap(),
            epsilon: 0.0,
        };
        assert_eq!(batch_norm_inference(&x, &bn).unwrap().dims(), x.dims());
        let v = Tensor::zeros(vec![h]).unwrap();
        let wts = Tensor::zeros(vec![h, co]).unwrap();
        let bias = Tensor::zeros(vec![co]).unwrap();
        assert_eq!(dense(&v, &wts, &bias).unwrap().dims(), &[co]);
        assert_eq!(softmax(&v).unwrap().dims(), &[h]);
    }
}
