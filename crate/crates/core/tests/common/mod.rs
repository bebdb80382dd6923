#![allow(dead_code)]

use fscap_core::{ActionSystem, Alphabet, FscKernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw from the simplex; with `sparse` some coordinates are zeroed.
pub fn simplex<R: Rng>(rng: &mut R, k: usize, sparse: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    if sparse && k > 1 {
        let keep = rng.gen_range(0..k);
        for (j, p) in v.iter_mut().enumerate() {
            if j != keep && rng.gen_bool(0.3) {
                *p = 0.0;
            }
        }
    }
    let total: f64 = v.iter().sum();
    v.iter().map(|p| p / total).collect()
}

/// Random kernel `[s][x][y][s']` with random initial distribution.
pub fn random_kernel(seed: u64, ns: usize, nx: usize, ny: usize) -> FscKernel {
    let mut r = rng(seed);
    let nested: Vec<Vec<Vec<Vec<f64>>>> = (0..ns)
        .map(|_| {
            (0..nx)
                .map(|_| {
                    let row = simplex(&mut r, ny * ns, true);
                    row.chunks(ns).map(<[f64]>::to_vec).collect()
                })
                .collect()
        })
        .collect();
    let initial = simplex(&mut r, ns, false);
    FscKernel::from_nested(&nested, initial).unwrap()
}

/// Two encoder actions: `1` feeds the output back, `0` yields an erasure.
/// `Λ(a) = a`.
pub fn erasure_feedback(ny: usize) -> ActionSystem {
    let sampling = vec![vec![vec![ny; ny]], vec![(0..ny).collect()]];
    ActionSystem::from_nested(&sampling, &[vec![0.0], vec![1.0]], ny + 1, 1.0).unwrap()
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.log2()).sum::<f64>()
}

/// Classical alternating maximization for a discrete memoryless channel.
pub fn blahut_arimoto(w: &[Vec<f64>], iters: usize) -> f64 {
    let nx = w.len();
    let ny = w[0].len();
    let mut p = vec![1.0 / nx as f64; nx];
    let mut value = 0.0;
    for _ in 0..iters {
        let out: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| p[x] * w[x][y]).sum()).collect();
        let d: Vec<f64> = (0..nx)
            .map(|x| {
                (0..ny)
                    .filter(|&y| w[x][y] > 0.0)
                    .map(|y| w[x][y] * (w[x][y] / out[y]).log2())
                    .sum()
            })
            .collect();
        value = (0..nx).map(|x| p[x] * d[x]).sum();
        let scaled: Vec<f64> = (0..nx).map(|x| p[x] * d[x].exp2()).collect();
        let total: f64 = scaled.iter().sum();
        p = scaled.iter().map(|v| v / total).collect();
    }
    value
}

pub fn alphabet(n: usize) -> Alphabet {
    Alphabet::new(n).unwrap()
}
