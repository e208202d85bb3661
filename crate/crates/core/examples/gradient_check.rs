//! Builds a small two-layer network on the tape, back-propagates a
//! Gaussian NLL and compares every parameter gradient against central
//! differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recon::ndgrad::{gaussian_nll, Mlp, ParamStore, Tape, Tensor};

fn loss(mlp: &Mlp, store: &ParamStore, x: &Tensor, t: &Tensor) -> f32 {
    let mut tape = Tape::new();
    let xv = tape.constant(x);
    let tv = tape.constant(t);
    let y = mlp.forward(&mut tape, store, xv);
    let l = gaussian_nll(&mut tape, y, tv);
    tape.item(l)
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "net", &[3, 8, 2], &mut rng);
    let x = Tensor::new(vec![4, 3], (0..12).map(|i| (i as f32 * 0.37).sin()).collect());
    let t = Tensor::new(vec![4, 2], (0..8).map(|i| (i as f32 * 0.91).cos()).collect());

    let mut tape = Tape::new();
    let xv = tape.constant(&x);
    let tv = tape.constant(&t);
    let y = mlp.forward(&mut tape, &store, xv);
    let l = gaussian_nll(&mut tape, y, tv);
    tape.backward(l, &mut store);

    let h = 1e-2f32;
    let mut worst = 0.0f32;
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let name = store.get(id).name.clone();
        let analytic = store.get(id).value.grad().unwrap().to_vec();
        let mut max_err = 0.0f32;
        for (i, a) in analytic.iter().enumerate() {
            let orig = store.get(id).value.data()[i];
            store.get_mut(id).value.data_mut()[i] = orig + h;
            let plus = loss(&mlp, &store, &x, &t);
            store.get_mut(id).value.data_mut()[i] = orig - h;
            let minus = loss(&mlp, &store, &x, &t);
            store.get_mut(id).value.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            max_err = max_err.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-2));
        }
        println!("{name:<14} {:>3} entries  max relative error {max_err:.2e}", analytic.len());
        worst = worst.max(max_err);
    }
    println!("loss {:.5}, worst relative error {worst:.2e}", tape.item(l));
}
