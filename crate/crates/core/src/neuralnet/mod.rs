//! Small feed-forward networks with hand-written backpropagation, a
//! diagonal Gaussian policy head and Adam.

mod adam;
mod dense;
mod policy;

pub use adam::{adam_step, ascent_step, AdamState};
pub use dense::{DenseNet, ForwardTape, GradientBundle, NetSnapshot};
pub use policy::{
    gaussian_log_density, GaussianPolicy, PolicyAdam, PolicyGradients, LOG_STD_INIT, LOG_STD_MAX, LOG_STD_MIN,
};

/// Default hidden layer widths for policy and value networks.
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // loss = c · net(x) for a random c; compare against central differences.
    #[test]
    fn backward_matches_finite_differences_on_random_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..20 {
            let depth = rng.gen_range(1..4);
            let sizes: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..9)).collect();
            let net = DenseNet::orthogonal(&sizes, rng.gen_range(0.5..2.0), 1.0, &mut rng).unwrap();
            let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..*sizes.last().unwrap()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let loss = |n: &DenseNet| n.forward(&x).unwrap().iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
            let mut tape = ForwardTape::new();
            net.forward_taped(&x, &mut tape).unwrap();
            let mut g = GradientBundle::zeros_like(&net);
            net.backward(&tape, &c, &mut g).unwrap();
            for i in 0..net.n_params() {
                let mut q = net.clone();
                q.params_mut()[i] += 1e-5;
                let up = loss(&q);
                q.params_mut()[i] -= 2e-5;
                let fd = (up - loss(&q)) / 2e-5;
                assert!((fd - g.values[i]).abs() <= 1e-4 * fd.abs().max(g.values[i].abs()).max(1e-6));
            }
        }
    }
}
