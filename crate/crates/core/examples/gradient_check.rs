//! Checks tape gradients against central finite differences for a few
//! composite functions.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabdisent::numerics::{grad_check, Tensor};

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn main() -> tabdisent::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let x = random(&[3, 4], &mut rng);
    let w = random(&[4, 2], &mut rng);
    let b = random(&[2], &mut rng);
    let y = random(&[3, 2], &mut rng);
    let err = grad_check(
        |tape, v| {
            let target = tape.constant(y.clone());
            v[0].softmax_rows()?.linear(v[1], v[2])?.mse(target)
        },
        &[x, w, b],
    )?;
    println!("mse(linear(softmax(x))):        max relative error {err:.2e}");

    let q = random(&[2, 3, 5], &mut rng);
    let k = random(&[2, 3, 5], &mut rng);
    let err = grad_check(
        |_, v| {
            let a = v[0].matmul_transposed(v[1])?.softmax_rows()?;
            let b = v[1].matmul_transposed(v[0])?.softmax_rows()?;
            a.batch_cosine_mean(b)
        },
        &[q, k],
    )?;
    println!("cosine(softmax(q kT), softmax(k qT)): max relative error {err:.2e}");

    let h = random(&[4, 6], &mut rng);
    let err = grad_check(|_, v| v[0].leaky_relu(0.01)?.affine(-2.0, 0.5)?.sum(), &[h])?;
    println!("sum(affine(leaky_relu(h))):     max relative error {err:.2e}");
    Ok(())
}
