//! Reconstruction, backward-cycle, KL and latent-cycle losses, recorded on
//! a gradient tape so every term is differentiable.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Graph, Var};

/// Weights of the backward-cycle, KL and latent-cycle terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            theta1: 0.001,
            theta2: 0.001,
            theta3: 0.001,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("theta1", self.theta1), ("theta2", self.theta2), ("theta3", self.theta3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

/// How a plane distance is reduced over its elements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reduction {
    /// Plain sum of squared differences.
    #[default]
    Sum,
    /// Each resolution's sum divided by its element count, so no single
    /// large plane dominates the gradient.
    Mean,
}

impl Reduction {
    pub fn name(self) -> &'static str {
        match self {
            Reduction::Sum => "sum",
            Reduction::Mean => "mean",
        }
    }
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Reduction::Sum),
            "mean" => Ok(Reduction::Mean),
            _ => Err(Error::Config(format!("unknown reduction `{s}`; expected sum or mean"))),
        }
    }
}

/// `sum_i ‖target_i − estimate_i‖²` over per-resolution planes.
pub fn plane_loss(graph: &mut Graph, target: &[Var], estimate: &[Var]) -> Result<Var> {
    reduced_plane_loss(graph, target, estimate, Reduction::Sum)
}

/// [`plane_loss`] with each resolution's term reduced by `reduction`.
pub fn reduced_plane_loss(graph: &mut Graph, target: &[Var], estimate: &[Var], reduction: Reduction) -> Result<Var> {
    if target.len() != estimate.len() || target.is_empty() {
        return Err(Error::Shape(format!(
            "banks have {} and {} resolutions",
            target.len(),
            estimate.len()
        )));
    }
    let mut total: Option<Var> = None;
    for (&t, &e) in target.iter().zip(estimate) {
        let mut d = graph.squared_distance(t, e)?;
        if reduction == Reduction::Mean {
            let n = graph.value(t).numel().max(1);
            d = graph.scale(d, 1.0 / n as f64)?;
        }
        total = Some(match total {
            None => d,
            Some(acc) => graph.add(acc, d)?,
        });
    }
    Ok(total.expect("at least one resolution"))
}

pub fn amplitude_loss(graph: &mut Graph, target: &[Var], estimate: &[Var]) -> Result<Var> {
    plane_loss(graph, target, estimate)
}

pub fn phase_loss(graph: &mut Graph, target: &[Var], estimate: &[Var]) -> Result<Var> {
    plane_loss(graph, target, estimate)
}

/// Amplitude and phase reconstruction losses of a mixture bank.
pub fn mixture_losses(
    graph: &mut Graph,
    target_amp: &[Var],
    target_phase: &[Var],
    est_amp: &[Var],
    est_phase: &[Var],
) -> Result<(Var, Var)> {
    Ok((
        plane_loss(graph, target_amp, est_amp)?,
        plane_loss(graph, target_phase, est_phase)?,
    ))
}

/// Distance between the target phase and the phase obtained by the
/// amplitude-to-phase backward cycle.
pub fn bc_phase_loss(graph: &mut Graph, target_phase: &[Var], bc_phase: &[Var]) -> Result<Var> {
    plane_loss(graph, target_phase, bc_phase)
}

/// Distance between the target amplitude and the phase-to-amplitude
/// backward cycle.
pub fn bc_amplitude_loss(graph: &mut Graph, target_amp: &[Var], bc_amp: &[Var]) -> Result<Var> {
    plane_loss(graph, target_amp, bc_amp)
}

fn non_negative(graph: &Graph, v: Var, what: &str) -> Result<()> {
    let x = graph.value(v).item();
    if x < 0.0 || x.is_nan() {
        return Err(Error::Input(format!("{what} must be non-negative, got {x}")));
    }
    Ok(())
}

/// `base + theta1 * bc`.
fn combined(graph: &mut Graph, base: Var, bc: Var, theta1: f64) -> Result<Var> {
    non_negative(graph, base, "base loss")?;
    non_negative(graph, bc, "backward-cycle loss")?;
    if theta1 < 0.0 || theta1.is_nan() {
        return Err(Error::Input(format!("theta1 must be non-negative, got {theta1}")));
    }
    let w = graph.scale(bc, theta1)?;
    graph.add(base, w)
}

/// Phase loss with the amplitude-to-phase cycle term added.
pub fn combined_phase_loss(graph: &mut Graph, j_sp: Var, j_a2p: Var, theta1: f64) -> Result<Var> {
    combined(graph, j_sp, j_a2p, theta1)
}

/// Amplitude loss with the phase-to-amplitude cycle term added.
pub fn combined_amplitude_loss(graph: &mut Graph, j_sa: Var, j_p2a: Var, theta1: f64) -> Result<Var> {
    combined(graph, j_sa, j_p2a, theta1)
}

/// KL divergence of `N(mean, exp(log_variance))` from the standard normal,
/// summed over every element.
pub fn kl_loss(graph: &mut Graph, mean: Var, log_variance: Var) -> Result<Var> {
    graph
        .value(mean)
        .same_shape(graph.value(log_variance), "kl_loss")?;
    graph.value(log_variance).ensure_finite("kl_loss log-variance")?;
    let var = graph.exp(log_variance)?;
    let m2 = graph.mul(mean, mean)?;
    let a = graph.add(var, m2)?;
    let b = graph.sub(a, log_variance)?;
    let c = graph.add_scalar(b, -1.0)?;
    let s = graph.sum(c)?;
    graph.scale(s, 0.5)
}

/// Amplitude plus phase reconstruction loss over the bank.
pub fn spectra_loss(
    graph: &mut Graph,
    target_amp: &[Var],
    target_phase: &[Var],
    est_amp: &[Var],
    est_phase: &[Var],
) -> Result<Var> {
    let a = amplitude_loss(graph, target_amp, est_amp)?;
    let p = phase_loss(graph, target_phase, est_phase)?;
    graph.add(a, p)
}

/// `j_s + theta3 * sum_i ‖z_i − z_hat_i‖²`.
pub fn cycle_loss(graph: &mut Graph, j_s: Var, z: &[Var], z_hat: &[Var], theta3: f64) -> Result<Var> {
    let latent = plane_loss(graph, z, z_hat)?;
    let w = graph.scale(latent, theta3)?;
    graph.add(j_s, w)
}

/// `theta2 * kl + j_s + j_cyc`. The reconstruction loss appears both
/// directly and inside the cycle loss.
pub fn fae_total(graph: &mut Graph, kl: Var, j_s: Var, j_cyc: Var, theta2: f64) -> Result<Var> {
    for (v, what) in [(kl, "KL"), (j_s, "spectra loss"), (j_cyc, "cycle loss")] {
        non_negative(graph, v, what)?;
    }
    let w = graph.scale(kl, theta2)?;
    let a = graph.add(w, j_s)?;
    graph.add(a, j_cyc)
}

/// Term names in report order.
pub const TERM_NAMES: [&str; 10] = [
    "J_Sa", "J_Sp", "J_Ma", "J_Mp", "J_a2p", "J_p2a", "J_KL", "J_cyc", "J_align", "J_total",
];

/// Batch-mean value of every loss term for one epoch. Terms that do not
/// apply to a phase stay zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub epoch: usize,
    pub values: [f64; 10],
}

impl LossReport {
    pub fn new(epoch: usize) -> Self {
        LossReport {
            epoch,
            values: [0.0; 10],
        }
    }

    fn index(name: &str) -> usize {
        TERM_NAMES
            .iter()
            .position(|&n| n == name)
            .unwrap_or_else(|| panic!("unknown loss term {name}"))
    }

    pub fn get(&self, name: &str) -> f64 {
        self.values[Self::index(name)]
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values[Self::index(name)] = value;
    }

    pub fn total(&self) -> f64 {
        self.get("J_total")
    }

    /// Accumulates `scale * other` termwise.
    pub fn add_scaled(&mut self, other: &LossReport, scale: f64) {
        for (a, b) in self.values.iter_mut().zip(other.values) {
            *a += scale * b;
        }
    }
}

/// Writes `epoch,term,value` rows.
pub fn write_loss_csv(path: &Path, reports: &[LossReport]) -> Result<()> {
    let mut text = String::from("epoch,term,value\n");
    for r in reports {
        for (name, v) in TERM_NAMES.iter().zip(r.values) {
            text.push_str(&format!("{},{name},{v:?}\n", r.epoch));
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::{max_relative_error, random_tensor, FD_STEP, FD_TOLERANCE};
    use crate::tensor::Tensor;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bank(rng: &mut ChaCha8Rng, shapes: &[[usize; 2]]) -> Vec<Tensor> {
        shapes.iter().map(|s| random_tensor(rng, s, -2.0, 2.0, 0.0)).collect()
    }

    fn record(g: &mut Graph, b: &[Tensor]) -> Vec<Var> {
        b.iter().map(|t| g.constant(t.clone())).collect()
    }

    fn oracle(a: &[Tensor], b: &[Tensor]) -> f64 {
        let mut s = 0.0;
        for (x, y) in a.iter().zip(b) {
            let (r, c) = x.dims2().unwrap();
            for i in 0..r {
                for j in 0..c {
                    let d = x.at2(i, j) - y.at2(i, j);
                    s += d * d;
                }
            }
        }
        s
    }

    const SHAPES: [[usize; 2]; 4] = [[16, 8], [9, 10], [5, 11], [3, 12]];

    #[test]
    fn worked_examples() {
        let mut g = Graph::new();
        let t = g.constant(Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap());
        let e = g.constant(Tensor::zeros(&[1, 2]));
        let l = amplitude_loss(&mut g, &[t], &[e]).unwrap();
        assert_eq!(g.value(l).item(), 5.0);
        let l = amplitude_loss(&mut g, &[t], &[t]).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
        let p = g.constant(Tensor::full(&[3, 4], 0.5));
        let q = g.constant(Tensor::full(&[3, 4], 0.5 + 0.25));
        let l = phase_loss(&mut g, &[p], &[q]).unwrap();
        assert_eq!(g.value(l).item(), 12.0 * 0.0625);
        let mut d = Tensor::full(&[2, 2], 1.0);
        d.data_mut()[3] = 1.5;
        let dv = g.constant(d);
        let ones = g.constant(Tensor::full(&[2, 2], 1.0));
        let l = bc_phase_loss(&mut g, &[ones], &[dv]).unwrap();
        assert_eq!(g.value(l).item(), 0.25);
        let (ma, mp) = mixture_losses(&mut g, &[t], &[p], &[e], &[p]).unwrap();
        assert!(g.value(ma).item() > 0.0);
        assert_eq!(g.value(mp).item(), 0.0);
        assert!(matches!(
            amplitude_loss(&mut g, &[t], &[p]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(amplitude_loss(&mut g, &[t, t], &[t]), Err(Error::Shape(_))));
    }

    #[test]
    fn combined_examples() {
        let mut g = Graph::new();
        let s = |g: &mut Graph, x: f64| g.constant(Tensor::scalar(x));
        let (a, b) = (s(&mut g, 1.0), s(&mut g, 2.0));
        let c = combined_phase_loss(&mut g, a, b, 0.001).unwrap();
        assert_eq!(g.value(c).item(), 1.0 + 0.001 * 2.0);
        assert!((g.value(c).item() - 1.002).abs() < 1e-15);
        let c = combined_amplitude_loss(&mut g, a, b, 0.0).unwrap();
        assert_eq!(g.value(c).item(), 1.0);
        let z = s(&mut g, 0.0);
        let c = combined_amplitude_loss(&mut g, z, b, 0.25).unwrap();
        assert_eq!(g.value(c).item(), 0.5);
        let neg = s(&mut g, -1.0);
        assert!(matches!(combined_phase_loss(&mut g, neg, b, 0.1), Err(Error::Input(_))));
        assert!(matches!(combined_amplitude_loss(&mut g, a, neg, 0.1), Err(Error::Input(_))));
    }

    #[test]
    fn kl_examples() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::zeros(&[4, 3]));
        let k = kl_loss(&mut g, z, z).unwrap();
        assert_eq!(g.value(k).item(), 0.0);
        let one = g.constant(Tensor::full(&[1, 1], 1.0));
        let zero = g.constant(Tensor::zeros(&[1, 1]));
        let k = kl_loss(&mut g, one, zero).unwrap();
        assert_eq!(g.value(k).item(), 0.5);
        assert!(matches!(kl_loss(&mut g, z, one), Err(Error::Shape(_))));
    }

    #[test]
    fn totals_and_cycle() {
        let mut g = Graph::new();
        let s = |g: &mut Graph, x: f64| g.constant(Tensor::scalar(x));
        let (a, b, c) = (s(&mut g, 1.0), s(&mut g, 2.0), s(&mut g, 3.0));
        let t = fae_total(&mut g, a, b, c, 0.001).unwrap();
        assert!((g.value(t).item() - 5.001).abs() < 1e-15);
        let z0 = s(&mut g, 0.0);
        let t = fae_total(&mut g, z0, z0, z0, 0.001).unwrap();
        assert_eq!(g.value(t).item(), 0.0);
        let t = fae_total(&mut g, c, a, b, 0.0).unwrap();
        assert_eq!(g.value(t).item(), 3.0);
        let z = g.constant(Tensor::full(&[2, 2], 0.3));
        let zh = g.constant(Tensor::full(&[2, 2], 0.1));
        let j = cycle_loss(&mut g, b, &[z], &[z], 0.5).unwrap();
        assert_eq!(g.value(j).item(), 2.0);
        let j = cycle_loss(&mut g, b, &[z], &[zh], 0.0).unwrap();
        assert_eq!(g.value(j).item(), 2.0);
    }

    #[test]
    fn oracle_equivalence_random_banks() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (ta, tp, ea, ep) = (
                bank(&mut rng, &SHAPES),
                bank(&mut rng, &SHAPES),
                bank(&mut rng, &SHAPES),
                bank(&mut rng, &SHAPES),
            );
            let z = bank(&mut rng, &[[4, 8], [3, 8]]);
            let zh = bank(&mut rng, &[[4, 8], [3, 8]]);
            let mut g = Graph::new();
            let (vta, vtp, vea, vep) = (
                record(&mut g, &ta),
                record(&mut g, &tp),
                record(&mut g, &ea),
                record(&mut g, &ep),
            );
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
            let a = amplitude_loss(&mut g, &vta, &vea).unwrap();
            assert!(close(g.value(a).item(), oracle(&ta, &ea)));
            let p = phase_loss(&mut g, &vtp, &vep).unwrap();
            assert!(close(g.value(p).item(), oracle(&tp, &ep)));
            let s = spectra_loss(&mut g, &vta, &vtp, &vea, &vep).unwrap();
            assert_eq!(g.value(s).item(), g.value(a).item() + g.value(p).item());
            let (vz, vzh) = (record(&mut g, &z), record(&mut g, &zh));
            let c = cycle_loss(&mut g, s, &vz, &vzh, 0.001).unwrap();
            let want = oracle(&ta, &ea) + oracle(&tp, &ep) + 0.001 * oracle(&z, &zh);
            assert!(close(g.value(c).item(), want));
            let (m, lv) = (&z[0], &zh[0]);
            let (vm, vlv) = (vz[0], vzh[0]);
            let k = kl_loss(&mut g, vm, vlv).unwrap();
            let kw: f64 = m
                .data()
                .iter()
                .zip(lv.data())
                .map(|(&m, &l)| 0.5 * (l.exp() + m * m - 1.0 - l))
                .sum();
            assert!(close(g.value(k).item(), kw));
        }
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        for seed in 0..4u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let shapes = [[4, 3], [3, 5]];
            let target = bank(&mut rng, &shapes);
            let est = bank(&mut rng, &shapes);
            let t = target.clone();
            let err = max_relative_error(
                &est,
                move |g, v| {
                    let tv = record(g, &t);
                    plane_loss(g, &tv, v)
                },
                FD_STEP,
                seed,
            )
            .unwrap();
            assert!(err <= FD_TOLERANCE, "plane {err}");
            let inputs = vec![
                random_tensor(&mut rng, &[3, 4], -1.0, 1.0, 0.0),
                random_tensor(&mut rng, &[3, 4], -1.0, 1.0, 0.0),
            ];
            let err = max_relative_error(&inputs, |g, v| kl_loss(g, v[0], v[1]), FD_STEP, seed).unwrap();
            assert!(err <= FD_TOLERANCE, "kl {err}");
        }
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("loss.csv");
        let mut r = LossReport::new(3);
        r.set("J_total", 1.5);
        write_loss_csv(&p, &[r]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("epoch,term,value\n3,J_Sa,0.0\n"));
        assert!(text.contains("3,J_total,1.5\n"));
        assert_eq!(text.lines().count(), 1 + TERM_NAMES.len());
    }

    proptest! {
        #[test]
        fn symmetric_and_non_negative(vals in proptest::collection::vec(-3.0f64..3.0, 2 * 12)) {
            let a = Tensor::matrix(3, 4, vals[..12].to_vec()).unwrap();
            let b = Tensor::matrix(3, 4, vals[12..].to_vec()).unwrap();
            let mut g = Graph::new();
            let (va, vb) = (g.constant(a.clone()), g.constant(b));
            let x = amplitude_loss(&mut g, &[va], &[vb]).unwrap();
            let y = amplitude_loss(&mut g, &[vb], &[va]).unwrap();
            prop_assert_eq!(g.value(x).item(), g.value(y).item());
            prop_assert!(g.value(x).item() >= 0.0);
            let s = amplitude_loss(&mut g, &[va], &[va]).unwrap();
            prop_assert_eq!(g.value(s).item(), 0.0);
        }
    }
}
