//! Finite-difference cases for every differentiable tape operation, shared
//! by the `gradcheck` and `acceptance` test targets.
//!
//! Each case builds `L = <op(inputs), W>` for a random projection `W` on the
//! tape, back-propagates in f32, and compares against central differences
//! of an independent f64 implementation of the same function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recon::ndgrad::{gaussian_nll, ParamStore, Tape, Tensor, Var};

const CASES: u64 = 100;
const TOLERANCE: f64 = 1e-3;
/// Denominator floor, so that tiny gradients are compared absolutely.
const FLOOR: f64 = 1e-2;

struct Input {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn input<R: Rng>(rng: &mut R, shape: &[usize], lo: f64, hi: f64) -> Input {
    let n = shape.iter().product();
    Input {
        shape: shape.to_vec(),
        data: (0..n).map(|_| rng.random_range(lo..hi)).collect(),
    }
}

/// Values bounded away from zero so that ReLU kinks are not straddled.
fn signed_away_from_zero<R: Rng>(rng: &mut R, shape: &[usize]) -> Input {
    let mut t = input(rng, shape, 0.05, 2.0);
    for v in &mut t.data {
        if rng.random_bool(0.5) {
            *v = -*v;
        }
    }
    t
}

fn to_tensor(i: &Input) -> Tensor {
    Tensor::new(i.shape.clone(), i.data.iter().map(|&v| v as f32).collect())
}

/// Compares tape gradients of `op` with central differences of `reference`.
fn check<F, G>(name: &str, seed: u64, inputs: &[Input], op: F, reference: G)
where
    F: Fn(&mut Tape, &[Var]) -> Var,
    G: Fn(&[Vec<f64>]) -> Vec<f64>,
{
    let base: Vec<Vec<f64>> = inputs.iter().map(|i| i.data.clone()).collect();
    let out_len = reference(&base).len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let proj: Vec<f64> = (0..out_len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let objective = |xs: &[Vec<f64>]| -> f64 {
        reference(xs).iter().zip(&proj).map(|(a, b)| a * b).sum()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|i| tape.leaf(&to_tensor(i).with_requires_grad(true)))
        .collect();
    let out = op(&mut tape, &vars);
    let n: usize = tape.shape(out).iter().product();
    assert_eq!(n, out_len, "{name}: output size differs from the reference");
    let flat = tape.reshape(out, &[1, n]);
    let w = tape.constant(&Tensor::new(vec![n, 1], proj.iter().map(|&v| v as f32).collect()));
    let dot = tape.matmul(flat, w);
    let loss = tape.sum(dot);
    tape.backward(loss, &mut ParamStore::new());

    for (k, var) in vars.iter().enumerate() {
        let analytic = tape.grad(*var).expect("leaf gradient").to_vec();
        for j in 0..base[k].len() {
            let h = 1e-5 * base[k][j].abs().max(1.0);
            let mut plus = base.clone();
            plus[k][j] += h;
            let mut minus = base.clone();
            minus[k][j] -= h;
            let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
            let a = analytic[j] as f64;
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            assert!(
                rel < TOLERANCE,
                "{name} case {seed}: input {k} element {j}: analytic {a}, numeric {numeric}, rel {rel}"
            );
        }
    }
}

fn dims<R: Rng>(rng: &mut R) -> (usize, usize, usize) {
    (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..5))
}

fn matmul_ref(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[i * n + j] = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
        }
    }
    out
}

fn for_cases(mut f: impl FnMut(u64, &mut ChaCha8Rng)) {
    for seed in 0..CASES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        f(seed, &mut rng);
    }
}

pub fn matmul_gradients() {
    for_cases(|seed, rng| {
        let (m, k, n) = dims(rng);
        let a = input(rng, &[m, k], -2.0, 2.0);
        let b = input(rng, &[k, n], -2.0, 2.0);
        check("matmul", seed, &[a, b], |t, v| t.matmul(v[0], v[1]), |x| {
            matmul_ref(&x[0], &x[1], m, k, n)
        });
    });
}

pub fn add_gradients() {
    for_cases(|seed, rng| {
        let (m, n, _) = dims(rng);
        let a = input(rng, &[m, n], -2.0, 2.0);
        let b = input(rng, &[m, n], -2.0, 2.0);
        check("add", seed, &[a, b], |t, v| t.add(v[0], v[1]), |x| {
            x[0].iter().zip(&x[1]).map(|(a, b)| a + b).collect()
        });
    });
}

pub fn row_bias_gradients() {
    for_cases(|seed, rng| {
        let (m, n, _) = dims(rng);
        let a = input(rng, &[m, n], -2.0, 2.0);
        let b = input(rng, &[n], -2.0, 2.0);
        check("add_row", seed, &[a, b], |t, v| t.add(v[0], v[1]), |x| {
            x[0].iter().enumerate().map(|(i, a)| a + x[1][i % n]).collect()
        });
    });
}

pub fn sub_gradients() {
    for_cases(|seed, rng| {
        let (m, n, _) = dims(rng);
        let a = input(rng, &[m, n], -2.0, 2.0);
        let b = input(rng, &[m, n], -2.0, 2.0);
        check("sub", seed, &[a, b], |t, v| t.sub(v[0], v[1]), |x| {
            x[0].iter().zip(&x[1]).map(|(a, b)| a - b).collect()
        });
    });
}

pub fn scale_and_shift_gradients() {
    for_cases(|seed, rng| {
        let (m, n, _) = dims(rng);
        let c = rng.random_range(-3.0f32..3.0);
        let s = rng.random_range(-3.0f32..3.0);
        let a = input(rng, &[m, n], -2.0, 2.0);
        check(
            "scale/add_scalar",
            seed,
            &[a],
            |t, v| {
                let y = t.scale(v[0], c);
                t.add_scalar(y, s)
            },
            |x| x[0].iter().map(|a| a * c as f64 + s as f64).collect(),
        );
    });
}

pub fn relu_gradients() {
    for_cases(|seed, rng| {
        let (m, n, _) = dims(rng);
        let a = signed_away_from_zero(rng, &[m, n]);
        check("relu", seed, &[a], |t, v| t.relu(v[0]), |x| {
            x[0].iter().map(|a| a.max(0.0)).collect()
        });
    });
}

pub fn square_gradients() {
    for_cases(|seed, rng| {
        let (m, n, _) = dims(rng);
        let a = input(rng, &[m, n], -2.0, 2.0);
        check("square", seed, &[a], |t, v| t.square(v[0]), |x| {
            x[0].iter().map(|a| a * a).collect()
        });
    });
}

pub fn log_gradients() {
    for_cases(|seed, rng| {
        let (m, n, _) = dims(rng);
        let a = input(rng, &[m, n], 0.5, 3.0);
        check("log", seed, &[a], |t, v| t.log(v[0]), |x| {
            x[0].iter().map(|a| a.ln()).collect()
        });
    });
}

pub fn reshape_flatten_sum_mean_gradients() {
    for_cases(|seed, rng| {
        let (a, b, c) = dims(rng);
        let x = input(rng, &[a, b, c], -2.0, 2.0);
        check("flatten", seed, &[x], |t, v| t.flatten(v[0]), |x| x[0].clone());
        let x = input(rng, &[a, b * c], -2.0, 2.0);
        check("reshape", seed, &[x], |t, v| t.reshape(v[0], &[a * b, c]), |x| x[0].clone());
        let x = input(rng, &[a, b], -2.0, 2.0);
        check("sum", seed, &[x], |t, v| t.sum(v[0]), |x| vec![x[0].iter().sum()]);
        let x = input(rng, &[a, b], -2.0, 2.0);
        check("mean", seed, &[x], |t, v| t.mean(v[0]), |x| {
            vec![x[0].iter().sum::<f64>() / x[0].len() as f64]
        });
    });
}

pub fn concat_gradients() {
    for_cases(|seed, rng| {
        let (m, p, q) = dims(rng);
        let a = input(rng, &[m, p], -2.0, 2.0);
        let b = input(rng, &[m, q], -2.0, 2.0);
        check("concat", seed, &[a, b], |t, v| t.concat(v[0], v[1]), |x| {
            let mut out = Vec::new();
            for r in 0..m {
                out.extend_from_slice(&x[0][r * p..(r + 1) * p]);
                out.extend_from_slice(&x[1][r * q..(r + 1) * q]);
            }
            out
        });
    });
}

pub fn gaussian_nll_gradients() {
    for_cases(|seed, rng| {
        let (m, n, _) = dims(rng);
        let p = input(rng, &[m, n], -2.0, 2.0);
        let q = input(rng, &[m, n], -2.0, 2.0);
        check("gaussian_nll", seed, &[p, q], |t, v| gaussian_nll(t, v[0], v[1]), |x| {
            let sq: f64 = x[0].iter().zip(&x[1]).map(|(a, b)| (a - b).powi(2)).sum();
            vec![0.5 * sq / m as f64 + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()]
        });
    });
}

struct ConvShape {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    oc: usize,
    k: usize,
    stride: usize,
    pad: usize,
}

impl ConvShape {
    fn out_hw(&self) -> (usize, usize) {
        (
            (self.h + 2 * self.pad - self.k) / self.stride + 1,
            (self.w + 2 * self.pad - self.k) / self.stride + 1,
        )
    }
}

/// Direct-loop convolution, deliberately not im2col.
fn conv_ref(x: &[f64], wt: &[f64], b: &[f64], s: &ConvShape) -> Vec<f64> {
    let (oh, ow) = s.out_hw();
    let mut out = vec![0.0; s.n * s.oc * oh * ow];
    for n in 0..s.n {
        for o in 0..s.oc {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = b[o];
                    for c in 0..s.c {
                        for ki in 0..s.k {
                            for kj in 0..s.k {
                                let r = (i * s.stride + ki) as isize - s.pad as isize;
                                let q = (j * s.stride + kj) as isize - s.pad as isize;
                                if r < 0 || q < 0 || r >= s.h as isize || q >= s.w as isize {
                                    continue;
                                }
                                let xi = ((n * s.c + c) * s.h + r as usize) * s.w + q as usize;
                                let wi = ((o * s.c + c) * s.k + ki) * s.k + kj;
                                acc += x[xi] * wt[wi];
                            }
                        }
                    }
                    out[((n * s.oc + o) * oh + i) * ow + j] = acc;
                }
            }
        }
    }
    out
}

fn random_conv_shape<R: Rng>(rng: &mut R) -> ConvShape {
    let k = rng.random_range(1..4);
    let pad = rng.random_range(0..2);
    ConvShape {
        n: rng.random_range(1..3),
        c: rng.random_range(1..4),
        h: rng.random_range(k.max(2)..7),
        w: rng.random_range(k.max(2)..7),
        oc: rng.random_range(1..4),
        k,
        stride: rng.random_range(1..3),
        pad,
    }
}

pub fn conv2d_gradients() {
    for_cases(|seed, rng| {
        let s = random_conv_shape(rng);
        let x = input(rng, &[s.n, s.c, s.h, s.w], -1.0, 1.0);
        let w = input(rng, &[s.oc, s.c, s.k, s.k], -1.0, 1.0);
        let b = input(rng, &[s.oc], -1.0, 1.0);
        let (stride, pad) = (s.stride, s.pad);
        check(
            "conv2d",
            seed,
            &[x, w, b],
            |t, v| t.conv2d(v[0], v[1], v[2], stride, pad),
            |x| conv_ref(&x[0], &x[1], &x[2], &s),
        );
    });
}

fn relu_v(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

fn add_row_ref(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().enumerate().map(|(i, x)| x + b[i % b.len()]).collect()
}

/// Three linear layers with ReLU between them, the layout the model uses.
pub fn three_layer_mlp_gradients() {
    let mut kinks_skipped = 0;
    for_cases(|seed, rng| {
        let rows = rng.random_range(1..4);
        let widths = [rng.random_range(1..5), rng.random_range(2..6), rng.random_range(2..6), rng.random_range(1..4)];
        let mut inputs = vec![input(rng, &[rows, widths[0]], -1.0, 1.0)];
        for l in 0..3 {
            inputs.push(input(rng, &[widths[l], widths[l + 1]], -1.0, 1.0));
            inputs.push(input(rng, &[widths[l + 1]], -0.5, 0.5));
        }
        let forward_ref = |x: &[Vec<f64>]| -> (Vec<f64>, f64) {
            let mut h = x[0].clone();
            let mut min_pre = f64::INFINITY;
            for l in 0..3 {
                let pre = add_row_ref(&matmul_ref(&h, &x[1 + 2 * l], rows, widths[l], widths[l + 1]), &x[2 + 2 * l]);
                if l < 2 {
                    min_pre = pre.iter().fold(min_pre, |m, v| m.min(v.abs()));
                    h = relu_v(pre);
                } else {
                    h = pre;
                }
            }
            (h, min_pre)
        };
        let base: Vec<Vec<f64>> = inputs.iter().map(|i| i.data.clone()).collect();
        if forward_ref(&base).1 < 1e-3 {
            kinks_skipped += 1;
            return;
        }
        check(
            "mlp",
            seed,
            &inputs,
            |t, v| {
                let mut h = v[0];
                for l in 0..3 {
                    let z = t.matmul(h, v[1 + 2 * l]);
                    h = t.add(z, v[2 + 2 * l]);
                    if l < 2 {
                        h = t.relu(h);
                    }
                }
                h
            },
            |x| forward_ref(x).0,
        );
    });
    assert!(kinks_skipped < 10, "too many cases sat on a ReLU kink: {kinks_skipped}");
}

/// Two strided convolutions with ReLU, flatten, and a linear head.
pub fn conv_stack_gradients() {
    let mut kinks_skipped = 0;
    for_cases(|seed, rng| {
        let s1 = ConvShape { n: rng.random_range(1..3), c: 3, h: 8, w: 8, oc: 2, k: 3, stride: 2, pad: 1 };
        let (h1, w1) = s1.out_hw();
        let s2 = ConvShape { n: s1.n, c: 2, h: h1, w: w1, oc: 3, k: 3, stride: 2, pad: 1 };
        let (h2, w2) = s2.out_hw();
        let flat = 3 * h2 * w2;
        let out = 2;
        let inputs = vec![
            input(rng, &[s1.n, 3, 8, 8], 0.0, 1.0),
            input(rng, &[2, 3, 3, 3], -0.5, 0.5),
            input(rng, &[2], -0.2, 0.2),
            input(rng, &[3, 2, 3, 3], -0.5, 0.5),
            input(rng, &[3], -0.2, 0.2),
            input(rng, &[flat, out], -0.5, 0.5),
            input(rng, &[out], -0.2, 0.2),
        ];
        let n = s1.n;
        let forward_ref = |x: &[Vec<f64>]| -> (Vec<f64>, f64) {
            let a = conv_ref(&x[0], &x[1], &x[2], &s1);
            let m1 = a.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            let b = conv_ref(&relu_v(a), &x[3], &x[4], &s2);
            let m2 = b.iter().fold(m1, |m, v| m.min(v.abs()));
            let y = add_row_ref(&matmul_ref(&relu_v(b), &x[5], n, flat, out), &x[6]);
            (y, m2)
        };
        let base: Vec<Vec<f64>> = inputs.iter().map(|i| i.data.clone()).collect();
        if forward_ref(&base).1 < 1e-3 {
            kinks_skipped += 1;
            return;
        }
        check(
            "conv stack",
            seed,
            &inputs,
            |t, v| {
                let a = t.conv2d(v[0], v[1], v[2], 2, 1);
                let a = t.relu(a);
                let b = t.conv2d(a, v[3], v[4], 2, 1);
                let b = t.relu(b);
                let f = t.flatten(b);
                let z = t.matmul(f, v[5]);
                t.add(z, v[6])
            },
            |x| forward_ref(x).0,
        );
    });
    assert!(kinks_skipped < 30, "too many cases sat on a ReLU kink: {kinks_skipped}");
}

/// Every case, by operation name.
#[allow(dead_code)]
pub const ALL: &[(&str, fn())] = &[
    ("matmul", matmul_gradients),
    ("add", add_gradients),
    ("row_bias", row_bias_gradients),
    ("sub", sub_gradients),
    ("scale_and_shift", scale_and_shift_gradients),
    ("relu", relu_gradients),
    ("square", square_gradients),
    ("log", log_gradients),
    ("reshape_flatten_sum_mean", reshape_flatten_sum_mean_gradients),
    ("concat", concat_gradients),
    ("gaussian_nll", gaussian_nll_gradients),
    ("conv2d", conv2d_gradients),
    ("three_layer_mlp", three_layer_mlp_gradients),
    ("conv_stack", conv_stack_gradients),
];
