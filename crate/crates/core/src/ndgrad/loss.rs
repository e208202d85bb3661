use super::{Tape, Var};

/// `ln(2 pi)`
pub const LN_2PI: f32 = 1.837_877_1;

/// Negative log-likelihood of `target` under a unit-variance Gaussian
/// centered on `prediction`, averaged over rows.
///
/// Rank-1 inputs are one sample. For `[batch, dim]` inputs the result is
/// `sum ||p - t||^2 / (2 batch) + dim / 2 * ln(2 pi)`.
pub fn gaussian_nll(tape: &mut Tape, prediction: Var, target: Var) -> Var {
    let shape = tape.shape(prediction).to_vec();
    assert_eq!(
        shape,
        tape.shape(target),
        "gaussian_nll shape mismatch: prediction {:?} vs target {:?}",
        shape,
        tape.shape(target)
    );
    let (rows, dim) = match shape.as_slice() {
        [d] => (1, *d),
        [r, d] => (*r, *d),
        other => panic!("gaussian_nll expects rank 1 or 2 inputs, got {other:?}"),
    };
    let diff = tape.sub(prediction, target);
    let sq = tape.square(diff);
    let total = tape.sum(sq);
    let half_mean = tape.scale(total, 0.5 / rows as f32);
    tape.add_scalar(half_mean, 0.5 * dim as f32 * LN_2PI)
}
