//! Finite-difference gradient suite over every differentiable operation
//! and loss used in training.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::loss::{
    bc_amplitude_loss, bc_phase_loss, combined_amplitude_loss, combined_phase_loss, cycle_loss, fae_total,
    kl_loss, mixture_losses, plane_loss, spectra_loss,
};
use crate::model::sample_latent;
use crate::rng;
use crate::tensor::gradcheck::{max_relative_error, random_tensor, FD_STEP, FD_TOLERANCE};
use crate::tensor::{Graph, Tensor, Var};

/// Worst relative error of one operation over all seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckResult {
    pub name: &'static str,
    pub seeds: usize,
    pub worst: f64,
}

impl GradCheckResult {
    pub fn passed(&self) -> bool {
        self.worst <= FD_TOLERANCE
    }
}

type Case = (&'static str, fn(&mut ChaCha8Rng) -> Vec<Tensor>, fn(&mut Graph, &[Var]) -> Result<Var>);

fn rt(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    random_tensor(rng, shape, lo, hi, 0.0)
}

fn three_planes(rng: &mut ChaCha8Rng) -> Vec<Tensor> {
    // Two resolutions of target then estimate.
    vec![
        rt(rng, &[3, 4], -2.0, 2.0),
        rt(rng, &[2, 5], -2.0, 2.0),
        rt(rng, &[3, 4], -2.0, 2.0),
        rt(rng, &[2, 5], -2.0, 2.0),
    ]
}

fn pair_sq(g: &mut Graph, a: Var, b: Var) -> Result<(Var, Var)> {
    Ok((g.sum_squares(a)?, g.sum_squares(b)?))
}

fn cases() -> Vec<Case> {
    vec![
        (
            "conv1d",
            |r| vec![rt(r, &[3, 10], -1.0, 1.0), rt(r, &[4, 3, 7], -1.0, 1.0), rt(r, &[4], -1.0, 1.0)],
            |g, v| g.conv1d(v[0], v[1], v[2], 1, 3),
        ),
        (
            "conv1d_strided",
            |r| vec![rt(r, &[2, 11], -1.0, 1.0), rt(r, &[3, 2, 3], -1.0, 1.0), rt(r, &[3], -1.0, 1.0)],
            |g, v| g.conv1d(v[0], v[1], v[2], 2, 1),
        ),
        (
            "leaky_relu",
            |r| vec![random_tensor(r, &[4, 6], -2.0, 2.0, 1e-3)],
            |g, v| g.leaky_relu(v[0], 0.2),
        ),
        ("softplus", |r| vec![rt(r, &[4, 6], -5.0, 5.0)], |g, v| g.softplus(v[0])),
        ("exp", |r| vec![rt(r, &[4, 6], -2.0, 2.0)], |g, v| g.exp(v[0])),
        ("log1p", |r| vec![rt(r, &[4, 6], -0.5, 3.0)], |g, v| g.log1p(v[0])),
        (
            "elementwise",
            |r| vec![rt(r, &[3, 5], -2.0, 2.0), rt(r, &[3, 5], -2.0, 2.0)],
            |g, v| {
                let p = g.mul(v[0], v[1])?;
                let s = g.sub(p, v[0])?;
                let a = g.add(s, v[1])?;
                let c = g.scale(a, -1.5)?;
                g.add_scalar(c, 0.25)
            },
        ),
        (
            "slice_concat_resample",
            |r| vec![rt(r, &[5, 6], -2.0, 2.0), rt(r, &[3, 4], -2.0, 2.0)],
            |g, v| {
                let s = g.slice(v[0], 1, 3, 1, 4)?;
                let c = g.concat_rows(&[s, v[1]])?;
                g.resample_rows(c, 9)
            },
        ),
        (
            "sum_and_squares",
            |r| vec![rt(r, &[3, 5], -2.0, 2.0), rt(r, &[3, 5], -2.0, 2.0)],
            |g, v| {
                let a = g.sum_squares(v[0])?;
                let b = g.squared_distance(v[0], v[1])?;
                let c = g.sum(v[1])?;
                let ab = g.add(a, b)?;
                g.add(ab, c)
            },
        ),
        (
            "sample_latent",
            |r| vec![rt(r, &[4, 5], -2.0, 2.0), rt(r, &[4, 5], -3.0, 1.0)],
            |g, v| {
                let noise = Tensor::from_fn(&[4, 5], |i| ((i * 7919) % 13) as f64 / 6.5 - 1.0);
                sample_latent(g, v[0], v[1], noise)
            },
        ),
        ("reconstruction_loss", three_planes, |g, v| plane_loss(g, &v[..2], &v[2..])),
        (
            "mixture_losses",
            three_planes,
            |g, v| {
                let (a, p) = mixture_losses(g, &v[..1], &v[1..2], &v[2..3], &v[3..])?;
                g.add(a, p)
            },
        ),
        ("spectra_loss", three_planes, |g, v| spectra_loss(g, &v[..1], &v[1..2], &v[2..3], &v[3..])),
        ("bc_phase_loss", three_planes, |g, v| bc_phase_loss(g, &v[..2], &v[2..])),
        ("bc_amplitude_loss", three_planes, |g, v| bc_amplitude_loss(g, &v[..2], &v[2..])),
        (
            "combined_phase_loss",
            |r| vec![rt(r, &[3, 3], -1.0, 1.0), rt(r, &[2, 4], -1.0, 1.0)],
            |g, v| {
                let (a, b) = pair_sq(g, v[0], v[1])?;
                combined_phase_loss(g, a, b, 0.3)
            },
        ),
        (
            "combined_amplitude_loss",
            |r| vec![rt(r, &[3, 3], -1.0, 1.0), rt(r, &[2, 4], -1.0, 1.0)],
            |g, v| {
                let (a, b) = pair_sq(g, v[0], v[1])?;
                combined_amplitude_loss(g, a, b, 0.3)
            },
        ),
        (
            "kl_loss",
            |r| vec![rt(r, &[3, 4], -2.0, 2.0), rt(r, &[3, 4], -2.0, 2.0)],
            |g, v| kl_loss(g, v[0], v[1]),
        ),
        (
            "cycle_loss",
            |r| {
                vec![
                    rt(r, &[2, 3], -1.0, 1.0),
                    rt(r, &[4, 5], -1.0, 1.0),
                    rt(r, &[2, 5], -1.0, 1.0),
                    rt(r, &[4, 5], -1.0, 1.0),
                    rt(r, &[2, 5], -1.0, 1.0),
                ]
            },
            |g, v| {
                let j_s = g.sum_squares(v[0])?;
                cycle_loss(g, j_s, &v[1..3], &v[3..], 0.7)
            },
        ),
        (
            "fae_total",
            |r| vec![rt(r, &[3, 4], -1.0, 1.0), rt(r, &[3, 4], -1.0, 1.0), rt(r, &[2, 2], -1.0, 1.0)],
            |g, v| {
                let kl = kl_loss(g, v[0], v[1])?;
                let j_s = g.sum_squares(v[2])?;
                let j_cyc = g.scale(j_s, 1.3)?;
                fae_total(g, kl, j_s, j_cyc, 0.4)
            },
        ),
    ]
}

/// Runs every case on `seeds` seeds derived from `base_seed`.
pub fn gradient_suite(seeds: usize, base_seed: u64) -> Result<Vec<GradCheckResult>> {
    let mut out = Vec::new();
    for (name, inputs, f) in cases() {
        let mut worst = 0.0f64;
        for s in 0..seeds {
            let seed = rng::derive_seed(base_seed, &[rng::label(name), s as u64]);
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let x = inputs(&mut r);
            worst = worst.max(max_relative_error(&x, f, FD_STEP, seed)?);
        }
        out.push(GradCheckResult { name, seeds, worst });
    }
    Ok(out)
}
