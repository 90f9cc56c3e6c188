//! Reproducible random instances.
//!
//! Every generator draws from [`InstanceRng`], a SplitMix64 stream (64-bit
//! state). Independent streams for individual check instances are derived by
//! folding identifying integers into the seed with [`InstanceRng::derive`], so
//! instance `k` of a suite does not depend on how many draws instance `k-1`
//! consumed. Gaussian variates come from `rand_distr::StandardNormal`.

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;

use crate::channels::Channel;
use crate::effects::{Effect, Observable, OutcomeMap, State, StochasticMatrix};
use crate::error::{Error, Result};
use crate::instruments::Instrument;
use crate::matkernel::{inverse_sqrt, CMatrix, Tolerance, C64};

const MAX_RETRIES: usize = 3;

/// Seedable SplitMix64 stream with the samplers used by the generators.
#[derive(Clone, Debug)]
pub struct InstanceRng(SplitMix64);

impl InstanceRng {
    pub fn new(seed: u64) -> Self {
        InstanceRng(SplitMix64::seed_from_u64(seed))
    }

    /// Child stream for `(seed, parts...)`; distinct parts give unrelated streams.
    pub fn derive(seed: u64, parts: &[u64]) -> Self {
        let mut state = SplitMix64::seed_from_u64(seed);
        for &p in parts {
            state = SplitMix64::seed_from_u64(state.next_u64() ^ p);
        }
        InstanceRng(state)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn gaussian(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Standard complex Gaussian, `E|z|² = 1`.
    pub fn complex_gaussian(&mut self) -> C64 {
        C64::new(self.gaussian(), self.gaussian()) * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform on `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }
}

/// Stable 64-bit FNV-1a hash, used to turn identity names into stream ids.
pub fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Matrix of independent standard complex Gaussians.
pub fn ginibre(rows: usize, cols: usize, rng: &mut InstanceRng) -> CMatrix {
    let entries = (0..rows * cols).map(|_| rng.complex_gaussian()).collect();
    CMatrix::from_row_major(rows, cols, entries).expect("finite gaussian entries")
}

/// `G G† / tr(G G†)` for a square Ginibre matrix `G`.
pub fn random_state(dim: usize, rng: &mut InstanceRng) -> State {
    let g = ginibre(dim, dim, rng);
    let w = &g * &g.adjoint();
    let tr = w.trace().re;
    State::from_matrix_unchecked(w.hermitian_part().scale(tr.recip()))
}

/// Haar-ish random unit vector (normalised complex Gaussian).
pub fn random_unit_vector(dim: usize, rng: &mut InstanceRng) -> CMatrix {
    let v = ginibre(dim, 1, rng);
    let norm = v.inner().norm();
    v.scale(norm.recip())
}

/// Random pure state `|v⟩⟨v|`.
pub fn random_pure_state(dim: usize, rng: &mut InstanceRng) -> State {
    State::from_matrix_unchecked(CMatrix::projector(&random_unit_vector(dim, rng)))
}

/// Unitary from the QR decomposition of a square Ginibre matrix.
pub fn random_unitary(dim: usize, rng: &mut InstanceRng) -> CMatrix {
    let g = ginibre(dim, dim, rng);
    CMatrix::from_inner(g.inner().clone().qr().q())
}

/// Observable `A_x = S^{-1/2} G_x S^{-1/2}` with `G_x` Wishart and `S = Σ G_x`.
pub fn random_observable(
    dim: usize,
    n_outcomes: usize,
    rng: &mut InstanceRng,
) -> Result<Observable> {
    let labels: Vec<String> = (0..n_outcomes).map(|i| format!("x{i}")).collect();
    random_observable_labeled(dim, labels, rng)
}

pub fn random_observable_labeled(
    dim: usize,
    labels: Vec<String>,
    rng: &mut InstanceRng,
) -> Result<Observable> {
    if labels.is_empty() {
        return Err(Error::invariant(
            "outcome space",
            "at least one outcome is required",
        ));
    }
    if labels.len() == 1 {
        return Ok(Observable::from_parts_unchecked(
            labels,
            vec![CMatrix::identity(dim)],
        ));
    }
    let tol = Tolerance::default();
    let mut last_err = None;
    for _ in 0..=MAX_RETRIES {
        let gs: Vec<CMatrix> = labels
            .iter()
            .map(|_| {
                let w = ginibre(dim, dim, rng);
                &w * &w.adjoint()
            })
            .collect();
        let s = CMatrix::sum(gs.iter()).expect("nonempty");
        match inverse_sqrt(&s, tol) {
            Ok(r) => {
                let effects = gs
                    .iter()
                    .map(|g| (&(&r * g) * &r).hermitian_part())
                    .collect();
                return Ok(Observable::from_parts_unchecked(labels, effects));
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Random effect: the first element of a random two-outcome observable.
pub fn random_effect(dim: usize, rng: &mut InstanceRng) -> Effect {
    random_observable(dim, 2, rng)
        .expect("two-outcome observable")
        .effects()[0]
        .clone()
}

/// Isometry `V: C^{dim_in} → C^{rows}` from a thin QR of a Ginibre matrix.
fn random_isometry(rows: usize, dim_in: usize, rng: &mut InstanceRng) -> Result<DMatrix<C64>> {
    let mut last_err = None;
    for _ in 0..=MAX_RETRIES {
        let g = ginibre(rows, dim_in, rng);
        let qr = g.inner().clone().qr();
        let r = qr.r();
        let min_pivot = (0..dim_in)
            .map(|k| r[(k, k)].norm())
            .fold(f64::INFINITY, f64::min);
        if min_pivot > 1e-8 {
            return Ok(qr.q());
        }
        last_err = Some(Error::Decomposition("rank-deficient Kraus stack".into()));
    }
    Err(last_err.expect("at least one attempt"))
}

/// Random channel with `n_kraus` Kraus operators, obtained by slicing an isometry.
pub fn random_channel(
    dim_in: usize,
    dim_out: usize,
    n_kraus: usize,
    rng: &mut InstanceRng,
) -> Result<Channel> {
    if n_kraus == 0 || n_kraus * dim_out < dim_in {
        return Err(Error::dims(format!(
            "{n_kraus} Kraus operators of shape {dim_out}x{dim_in} cannot form a channel"
        )));
    }
    let q = random_isometry(n_kraus * dim_out, dim_in, rng)?;
    let kraus = (0..n_kraus)
        .map(|i| CMatrix::from_inner(q.rows(i * dim_out, dim_out).into_owned()))
        .collect();
    Ok(Channel::from_kraus_unchecked(kraus, dim_in, dim_out))
}

/// Kraus operators per outcome used by [`random_instrument`].
pub const KRAUS_PER_OUTCOME: usize = 2;

/// Random instrument: a channel with `n_outcomes·k` Kraus operators split into `n_outcomes` groups.
pub fn random_instrument(
    dim_in: usize,
    dim_out: usize,
    n_outcomes: usize,
    rng: &mut InstanceRng,
) -> Result<Instrument> {
    let labels = (0..n_outcomes).map(|i| format!("i{i}")).collect();
    random_instrument_labeled(dim_in, dim_out, labels, rng)
}

pub fn random_instrument_labeled(
    dim_in: usize,
    dim_out: usize,
    labels: Vec<String>,
    rng: &mut InstanceRng,
) -> Result<Instrument> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::invariant(
            "outcome space",
            "at least one outcome is required",
        ));
    }
    let mut k = KRAUS_PER_OUTCOME;
    while n * k * dim_out < dim_in {
        k += 1;
    }
    let channel = random_channel(dim_in, dim_out, n * k, rng)?;
    let kraus = channel.operation().kraus();
    let ops = (0..n)
        .map(|x| {
            crate::channels::Operation::from_kraus_unchecked(
                kraus[x * k..(x + 1) * k].to_vec(),
                dim_in,
                dim_out,
            )
        })
        .collect();
    Ok(Instrument::from_parts_unchecked(labels, ops))
}

/// Row-stochastic kernel with rows drawn uniformly from the simplex.
pub fn random_stochastic(
    sources: &[String],
    n_targets: usize,
    rng: &mut InstanceRng,
) -> StochasticMatrix {
    let targets = (0..n_targets).map(|i| format!("y{i}")).collect();
    let entries = sources
        .iter()
        .map(|_| {
            let raw: Vec<f64> = (0..n_targets)
                .map(|_| -(1.0 - rng.uniform()).ln())
                .collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    StochasticMatrix::from_entries_unchecked(sources.to_vec(), targets, entries)
}

/// Random surjection onto `n_targets ≤ sources.len()` labels.
pub fn random_surjection(
    sources: &[String],
    n_targets: usize,
    rng: &mut InstanceRng,
) -> Result<OutcomeMap> {
    let n = sources.len();
    if n_targets == 0 || n_targets > n {
        return Err(Error::dims(format!(
            "no surjection from {n} onto {n_targets} labels"
        )));
    }
    let mut map: Vec<usize> = (0..n)
        .map(|i| {
            if i < n_targets {
                i
            } else {
                rng.below(n_targets)
            }
        })
        .collect();
    for i in (1..n).rev() {
        let j = rng.below(i + 1);
        map.swap(i, j);
    }
    let targets = (0..n_targets).map(|i| format!("z{i}")).collect();
    OutcomeMap::from_indices(sources.to_vec(), targets, map)
}

/// Weights drawn uniformly from the simplex.
pub fn random_weights(n: usize, rng: &mut InstanceRng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.uniform()).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkernel::is_psd;

    #[test]
    fn state_dim_one_is_forced() {
        let s = random_state(1, &mut InstanceRng::new(1));
        assert!((s.matrix().get(0, 0) - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn generated_objects_pass_validation() {
        let tol = Tolerance::default();
        let mut rng = InstanceRng::new(2024);
        for d in 1..=4 {
            let s = random_state(d, &mut rng);
            State::new(s.matrix().clone(), tol).unwrap();
            for n in 1..=4 {
                random_observable(d, n, &mut rng)
                    .unwrap()
                    .validate(tol)
                    .unwrap();
            }
            let ch = random_channel(d, d + 1, 2, &mut rng).unwrap();
            ch.operation().validate_channel(tol).unwrap();
            let ins = random_instrument(d, 2, 3, &mut rng).unwrap();
            ins.validate(tol).unwrap();
            let u = random_unitary(d, &mut rng);
            assert!((&u.adjoint() * &u).max_abs_diff(&CMatrix::identity(d)) < 1e-12);
            assert!(is_psd(random_effect(d, &mut rng).matrix(), tol));
        }
    }

    #[test]
    fn single_outcome_observable_is_identity() {
        let a = random_observable(3, 1, &mut InstanceRng::new(4)).unwrap();
        assert_eq!(a.effects()[0].matrix(), &CMatrix::identity(3));
    }

    #[test]
    fn scalar_channel_is_a_phase() {
        let ch = random_channel(1, 1, 1, &mut InstanceRng::new(77)).unwrap();
        let k = ch.operation().kraus()[0].get(0, 0);
        assert!((k.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_outcome_instrument_is_a_channel() {
        let tol = Tolerance::default();
        let ins = random_instrument(2, 3, 1, &mut InstanceRng::new(6)).unwrap();
        assert_eq!(ins.len(), 1);
        ins.ops()[0].validate_channel(tol).unwrap();
    }

    #[test]
    fn fixed_seed_reproduces() {
        let a = random_state(3, &mut InstanceRng::new(42));
        let b = random_state(3, &mut InstanceRng::new(42));
        assert_eq!(a, b);
        let a = random_observable(3, 3, &mut InstanceRng::new(42)).unwrap();
        let b = random_observable(3, 3, &mut InstanceRng::new(42)).unwrap();
        assert_eq!(a, b);
        let a = random_channel(2, 3, 2, &mut InstanceRng::new(42)).unwrap();
        let b = random_channel(2, 3, 2, &mut InstanceRng::new(42)).unwrap();
        assert_eq!(a.operation().kraus(), b.operation().kraus());
        let a = random_instrument(2, 2, 3, &mut InstanceRng::new(42)).unwrap();
        let b = random_instrument(2, 2, 3, &mut InstanceRng::new(42)).unwrap();
        assert_eq!(a.ops().len(), b.ops().len());
        for (x, y) in a.ops().iter().zip(b.ops()) {
            assert_eq!(x.kraus(), y.kraus());
        }
        let c = random_state(3, &mut InstanceRng::new(43));
        assert_ne!(random_state(3, &mut InstanceRng::new(42)), c);
    }

    #[test]
    fn derived_streams_differ() {
        let mut a = InstanceRng::derive(7, &[1, 2, 3]);
        let mut b = InstanceRng::derive(7, &[1, 2, 4]);
        let mut c = InstanceRng::derive(7, &[1, 2, 3]);
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_eq!(x, c.next_u64());
    }

    #[test]
    fn channel_size_precondition() {
        assert!(random_channel(4, 1, 2, &mut InstanceRng::new(0)).is_err());
        assert!(random_channel(2, 2, 0, &mut InstanceRng::new(0)).is_err());
    }

    #[test]
    fn surjection_hits_every_target() {
        let src: Vec<String> = (0..6).map(|i| i.to_string()).collect();
        let mut rng = InstanceRng::new(10);
        for t in 1..=6 {
            let f = random_surjection(&src, t, &mut rng).unwrap();
            assert_eq!(f.targets().len(), t);
        }
        assert!(random_surjection(&src, 7, &mut rng).is_err());
    }
}
