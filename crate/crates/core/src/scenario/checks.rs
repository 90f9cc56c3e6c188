//! Registry of executable identities and the randomized runner behind `qcond check`.
//!
//! Each identity draws one random instance per (dimension, trial) pair and
//! returns the largest absolute deviation it observed. Instance streams are
//! derived from `(seed, identity name, dimension, trial)`, so reports do not
//! depend on scheduling or on which other identities run.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::channels::{
    complete_subnormalized, condition_effect, condition_observable, dual_map_distance,
    map_distance, sequential_product, Channel, LinearMap, QuantumMap,
};
use crate::effects::{
    affine_combination, certify_coexistence, distribution, marginals, part, post_process,
    BiObservable, Effect, Observable,
};
use crate::error::{Error, Result};
use crate::instruments::{
    condition_instrument, given_distribution, given_distribution_factored, given_instrument,
    given_observable, holevo_compose, holevo_instrument, total_channel, HolevoSpec, Instrument,
};
use crate::matkernel::{hermitian_basis, kron, min_eigenvalue, trace_product, CMatrix, Tolerance};
use crate::measmodel::{
    holevo_model_quantities, kraus_separable_total, lifted_kraus, measured_bi_instrument,
    measured_bi_observable, measured_instrument, measured_pointer_observable, reduced_instrument,
    simple_kraus_separable, HolevoSeparableSpec, KrausSeparableChannel, MeasurementModel,
};
use crate::scenario::random::{
    ginibre, name_hash, random_channel, random_effect, random_instrument, random_observable,
    random_state, random_stochastic, random_surjection, random_unit_vector, random_unitary,
    random_weights, InstanceRng,
};

type CheckFn = fn(usize, &mut InstanceRng, Tolerance) -> Result<f64>;

/// One registered identity.
#[derive(Clone, Copy)]
pub struct Identity {
    pub name: &'static str,
    pub anchor: &'static str,
    run: CheckFn,
}

impl Identity {
    /// Group prefix of the name, e.g. `thm21` for `thm21.duality`.
    pub fn group(&self) -> &'static str {
        self.name.split_once('.').map_or(self.name, |(g, _)| g)
    }

    /// Runs one instance and returns its deviation.
    pub fn run_instance(&self, dim: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
        (self.run)(dim, rng, tol)
    }
}

macro_rules! identity {
    ($name:literal, $anchor:literal, $f:ident) => {
        Identity {
            name: $name,
            anchor: $anchor,
            run: $f,
        }
    };
}

/// All identities, sorted by name.
pub const REGISTRY: &[Identity] = &[
    identity!(
        "holevo.compose",
        "Holevo instruments: composition law",
        holevo_compose_check
    ),
    identity!(
        "holevo.dual",
        "Holevo instruments: dual and measured observable",
        holevo_dual
    ),
    identity!("lem11.part", "Lemma 1.1(ii)", lem11_part),
    identity!("lem11.postprocess", "Lemma 1.1(i)", lem11_postprocess),
    identity!("lem22.completion", "Lemma 2.2", lem22_completion),
    identity!(
        "lem22.residual",
        "Lemma 2.2, general channels",
        lem22_residual
    ),
    identity!(
        "lem23.distribution",
        "Lemma 2.3, factored distribution",
        lem23_distribution
    ),
    identity!("lem23.marginals", "Lemma 2.3", lem23_marginals),
    identity!("sec1.born", "Born rule", sec1_born),
    identity!("sec1.marginals", "Bi-observable marginals", sec1_marginals),
    identity!(
        "sec2.affine",
        "Conditioned sets: affine closure",
        sec2_affine
    ),
    identity!(
        "sec2.condition_instrument",
        "Conditioned instruments",
        sec2_condition_instrument
    ),
    identity!(
        "sec2.contravariance",
        "Dual of a composition",
        sec2_contravariance
    ),
    identity!(
        "sec2.given_instrument",
        "Bi-instrument marginals",
        sec2_given_instrument
    ),
    identity!(
        "sec2.unitary",
        "Conditioning by a unitary channel",
        sec2_unitary
    ),
    identity!("sec3.pointer", "Measured pointer observable", sec3_pointer),
    identity!(
        "sec3.probe_invariance",
        "Measured bi-observable, first marginal",
        sec3_probe_invariance
    ),
    identity!(
        "sec3.simple",
        "Simple Kraus-separable channels",
        sec3_simple
    ),
    identity!("thm21.additivity", "Theorem 2.1(ii)", thm21_additivity),
    identity!("thm21.duality", "Theorem 2.1(i)", thm21_duality),
    identity!("thm21.morphism", "Theorem 2.1(iii)", thm21_morphism),
    identity!("thm24.part", "Theorem 2.4(iii)", thm24_part),
    identity!("thm24.postprocess", "Theorem 2.4(i)", thm24_postprocess),
    identity!(
        "thm31.coefficients",
        "Theorem 3.1, coefficients",
        thm31_coefficients
    ),
    identity!("thm31.formulas", "Theorem 3.1", thm31_formulas),
    identity!(
        "thm32.kernel",
        "Theorem 3.2, post-processing kernel",
        thm32_kernel
    ),
    identity!("thm32.quantities", "Theorem 3.2", thm32_quantities),
];

pub fn registry() -> &'static [Identity] {
    REGISTRY
}

pub fn lookup(name: &str) -> Result<&'static Identity> {
    REGISTRY
        .iter()
        .find(|i| i.name == name)
        .ok_or_else(|| Error::UnknownIdentity(name.to_string()))
}

/// Expands `all`, group prefixes and full names into a sorted, deduplicated identity list.
pub fn resolve_suite<S: AsRef<str>>(suite: &[S]) -> Result<Vec<&'static Identity>> {
    let mut out: Vec<&'static Identity> = Vec::new();
    for entry in suite {
        let entry = entry.as_ref().trim();
        let matched: Vec<&'static Identity> = if entry == "all" {
            REGISTRY.iter().collect()
        } else {
            REGISTRY
                .iter()
                .filter(|i| i.name == entry || i.group() == entry)
                .collect()
        };
        if matched.is_empty() {
            return Err(Error::UnknownIdentity(entry.to_string()));
        }
        out.extend(matched);
    }
    out.sort_by_key(|i| i.name);
    out.dedup_by_key(|i| i.name);
    Ok(out)
}

/// Outcome of one identity over all its instances.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub anchor: String,
    pub instances: usize,
    /// Instances that raised an error instead of producing a deviation.
    pub failures: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CheckReport {
    pub seed: u64,
    pub trials: usize,
    pub dims: [usize; 2],
    pub tolerance: f64,
    pub pass: bool,
    pub identities: Vec<CheckRecord>,
}

impl CheckReport {
    /// Deterministic JSON; elapsed times are left out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<28} {:<48} {:>9} {:>12} {:>10}  {}\n",
            "identity", "anchor", "instances", "max dev", "time", "result"
        );
        for r in &self.identities {
            let status = if r.pass {
                "PASS".to_string()
            } else if r.failures > 0 {
                format!("FAIL ({} errors)", r.failures)
            } else {
                "FAIL".to_string()
            };
            out.push_str(&format!(
                "{:<28} {:<48} {:>9} {:>12.3e} {:>8.1}ms  {}\n",
                r.name,
                r.anchor,
                r.instances,
                r.max_deviation,
                r.elapsed.as_secs_f64() * 1e3,
                status
            ));
        }
        let passed = self.identities.iter().filter(|r| r.pass).count();
        out.push_str(&format!(
            "{passed}/{} identities within tolerance {:e} (seed {}, trials {}, dims {}..{})\n",
            self.identities.len(),
            self.tolerance,
            self.seed,
            self.trials,
            self.dims[0],
            self.dims[1]
        ));
        out
    }
}

/// Runs every identity in `suite` on `trials` instances per dimension in `dims` (inclusive).
pub fn run_checks<S: AsRef<str>>(
    suite: &[S],
    trials: usize,
    dims: std::ops::RangeInclusive<usize>,
    seed: u64,
    tol: Tolerance,
) -> Result<CheckReport> {
    let identities = resolve_suite(suite)?;
    let dim_list: Vec<usize> = dims.clone().collect();
    if dim_list.first().is_some_and(|&d| d == 0) {
        return Err(Error::dims("dimensions start at 1"));
    }
    let identities = if trials == 0 || dim_list.is_empty() {
        Vec::new()
    } else {
        identities
    };
    let records = identities
        .iter()
        .map(|id| run_identity(id, trials, &dim_list, seed, tol))
        .collect::<Vec<_>>();
    Ok(CheckReport {
        seed,
        trials,
        dims: [*dims.start(), *dims.end()],
        tolerance: tol.atol(),
        pass: records.iter().all(|r| r.pass),
        identities: records,
    })
}

fn run_identity(
    id: &Identity,
    trials: usize,
    dims: &[usize],
    seed: u64,
    tol: Tolerance,
) -> CheckRecord {
    let start = Instant::now();
    let jobs: Vec<(usize, usize)> = dims
        .iter()
        .flat_map(|&d| (0..trials).map(move |t| (d, t)))
        .collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(d, t)| {
            let mut rng = InstanceRng::derive(seed, &[name_hash(id.name), d as u64, t as u64]);
            id.run_instance(d, &mut rng, tol)
        })
        .collect();
    let failures = results.iter().filter(|r| r.is_err()).count();
    let max_deviation = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|&v| if v.is_nan() { f64::INFINITY } else { v })
        .fold(0.0, f64::max);
    CheckRecord {
        name: id.name.to_string(),
        anchor: id.anchor.to_string(),
        instances: jobs.len(),
        failures,
        max_deviation,
        tolerance: tol.atol(),
        pass: failures == 0 && max_deviation <= tol.atol(),
        elapsed: start.elapsed(),
    }
}

// ---- deviation helpers ----

fn negativity(m: &CMatrix) -> f64 {
    (-min_eigenvalue(m)).max(0.0)
}

/// How far an observable is from being valid.
fn observable_defect(o: &Observable) -> f64 {
    o.effects()
        .iter()
        .map(|e| negativity(e.matrix()))
        .fold(o.normalization_defect(), f64::max)
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Deviation between two maps over every matrix unit `|i⟩⟨j|`.
fn unit_distance<A: QuantumMap, B: QuantumMap>(a: &A, b: &B) -> f64 {
    if a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out() {
        return f64::INFINITY;
    }
    let n = a.dim_in();
    max_of((0..n * n).map(|k| {
        let e = CMatrix::unit(n, n, k / n, k % n);
        a.apply_matrix(&e).max_abs_diff(&b.apply_matrix(&e))
    }))
}

fn instrument_unit_distance<A: QuantumMap, B: QuantumMap>(
    a: &Instrument<A>,
    b: &Instrument<B>,
) -> f64 {
    if a.outcomes() != b.outcomes() {
        return f64::INFINITY;
    }
    max_of(
        a.ops()
            .iter()
            .zip(b.ops())
            .map(|(x, y)| unit_distance(x, y)),
    )
}

fn effect_from(m: CMatrix, tol: Tolerance) -> Result<Effect> {
    Effect::new(m, tol)
}

/// `m ⊕ c` on one extra dimension.
fn direct_sum(m: &CMatrix, c: f64) -> CMatrix {
    let d = m.rows();
    let mut rows = vec![vec![crate::matkernel::ZERO; d + 1]; d + 1];
    for (i, row) in m.to_rows().into_iter().enumerate() {
        rows[i][..d].copy_from_slice(&row);
    }
    rows[d][d] = c.into();
    CMatrix::from_rows(&rows).expect("square")
}

/// Random channel `d → d+1` whose output never populates the last basis vector.
fn padded_channel(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<Channel> {
    let ch = random_channel(d, d, 2, rng)?;
    let kraus = ch
        .operation()
        .kraus()
        .iter()
        .map(|k| {
            let mut rows = k.to_rows();
            rows.push(vec![crate::matkernel::ZERO; d]);
            CMatrix::from_rows(&rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Channel::new(kraus, tol)
}

fn random_holevo(din: usize, dout: usize, n: usize, rng: &mut InstanceRng) -> Result<HolevoSpec> {
    let a = random_observable(din, n, rng)?;
    let states = (0..n).map(|_| random_state(dout, rng)).collect();
    HolevoSpec::new(a, states)
}

// ---- effects ----

fn lem11_postprocess(d: usize, rng: &mut InstanceRng, _tol: Tolerance) -> Result<f64> {
    let a = random_observable(d, 3, rng)?;
    let lam = random_stochastic(a.outcomes(), 3, rng);
    let mu = random_stochastic(lam.targets(), 2, rng);
    let twice = post_process(&post_process(&a, &lam)?, &mu)?;
    let once = post_process(&a, &lam.then(&mu)?)?;
    Ok(twice.max_abs_diff(&once))
}

fn lem11_part(d: usize, rng: &mut InstanceRng, _tol: Tolerance) -> Result<f64> {
    let a = random_observable(d, 4, rng)?;
    let f = random_surjection(a.outcomes(), 3, rng)?;
    let g = random_surjection(f.targets(), 2, rng)?;
    let twice = part(&part(&a, &f)?, &g)?;
    let once = part(&a, &f.then(&g)?)?;
    Ok(twice.max_abs_diff(&once))
}

fn sec1_born(d: usize, rng: &mut InstanceRng, _tol: Tolerance) -> Result<f64> {
    let a = random_observable(d, 3, rng)?;
    let rho = random_state(d, rng);
    let probs = distribution(&rho, &a)?;
    let range = max_of(probs.iter().map(|&p| (-p).max(p - 1.0).max(0.0)));
    Ok(range.max((probs.iter().sum::<f64>() - 1.0).abs()))
}

fn sec1_marginals(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let flat = random_observable(d, 6, rng)?;
    let grid = flat
        .effects()
        .chunks(2)
        .map(|row| row.iter().map(|e| e.matrix().clone()).collect())
        .collect();
    let o1: Vec<String> = (0..3).map(|i| format!("a{i}")).collect();
    let o2: Vec<String> = (0..2).map(|i| format!("b{i}")).collect();
    let c = BiObservable::new(o1, o2, grid, tol)?;
    let (m1, m2) = marginals(&c);
    let certified = if certify_coexistence(&m1, &m2, &c, tol) {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(observable_defect(&m1)
        .max(observable_defect(&m2))
        .max(certified))
}

// ---- channels ----

fn thm21_duality(d: usize, rng: &mut InstanceRng, _tol: Tolerance) -> Result<f64> {
    let ch = random_channel(d, d + 1, 2, rng)?;
    let rho = random_state(d, rng);
    let a = random_effect(d + 1, rng);
    let lhs = trace_product(rho.matrix(), &ch.dual_matrix(a.matrix()));
    let rhs = trace_product(&ch.apply_matrix(rho.matrix()), a.matrix());
    Ok((lhs - rhs).norm())
}

fn thm21_additivity(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let ch = random_channel(d, d + 1, 2, rng)?;
    let a = effect_from(random_effect(d + 1, rng).matrix().scale(0.5), tol)?;
    let b = effect_from(random_effect(d + 1, rng).matrix().scale(0.5), tol)?;
    let sum = effect_from(a.matrix() + b.matrix(), tol)?;
    let lhs = condition_effect(&ch, &sum)?;
    let rhs = condition_effect(&ch, &a)?.matrix() + condition_effect(&ch, &b)?.matrix();
    Ok(lhs.matrix().max_abs_diff(&rhs))
}

/// `I*(I) = I` for channels, and for a sub-normalized operation the dual
/// defect `|I*(I) − I|` coincides with the Kraus defect `|ΣK†K − I|`.
fn thm21_morphism(d: usize, rng: &mut InstanceRng, _tol: Tolerance) -> Result<f64> {
    let ch = random_channel(d, d + 1, 2, rng)?;
    let id_out = CMatrix::identity(d + 1);
    let channel_dev = ch.dual_matrix(&id_out).max_abs_diff(&CMatrix::identity(d));
    let scaled = ch.operation().scaled_kraus(0.9);
    let dual_defect = scaled
        .dual_matrix(&id_out)
        .max_abs_diff(&CMatrix::identity(d));
    Ok(channel_dev.max((dual_defect - scaled.channel_defect()).abs()))
}

fn sec2_contravariance(d: usize, rng: &mut InstanceRng, _tol: Tolerance) -> Result<f64> {
    let i = random_instrument(d, d + 1, 2, rng)?.ops()[0].clone();
    let j = random_instrument(d + 1, d, 2, rng)?.ops()[1].clone();
    let ij = sequential_product(&i, &j)?;
    let a = random_effect(d, rng);
    let lhs = ij.dual_matrix(a.matrix());
    let rhs = i.dual_matrix(&j.dual_matrix(a.matrix()));
    Ok(lhs.max_abs_diff(&rhs))
}

fn sec2_unitary(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let u = random_unitary(d, rng);
    let a = random_effect(d, rng);
    let rotated = effect_from((&(&u * a.matrix()) * &u.adjoint()).hermitian_part(), tol)?;
    let ch = Channel::unitary(u, tol)?;
    Ok(condition_effect(&ch, &rotated)?
        .matrix()
        .max_abs_diff(a.matrix()))
}

fn sec2_affine(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let ch = random_channel(d, d + 1, 2, rng)?;
    let obs = (0..3)
        .map(|_| random_observable(d + 1, 3, rng))
        .collect::<Result<Vec<_>>>()?;
    let w = random_weights(3, rng);
    let lhs = condition_observable(&ch, &affine_combination(&obs, &w, tol)?)?;
    let conditioned = obs
        .iter()
        .map(|o| condition_observable(&ch, o))
        .collect::<Result<Vec<_>>>()?;
    let rhs = affine_combination(&conditioned, &w, tol)?;
    Ok(lhs.max_abs_diff(&rhs))
}

/// Completion through a channel whose residual has vanishing dual: `(B|I)_x = (b_x|I)`.
fn lem22_completion(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let ch = padded_channel(d, rng, tol)?;
    let a = random_observable(d, 3, rng)?;
    let t = rng.uniform();
    let c = random_weights(3, rng);
    let bs = a
        .effects()
        .iter()
        .zip(&c)
        .map(|(e, cx)| effect_from(direct_sum(e.matrix(), t * cx), tol))
        .collect::<Result<Vec<_>>>()?;
    let big_b = complete_subnormalized(&ch, &bs, tol)?;
    let conditioned = condition_observable(&ch, &big_b)?;
    let dev = conditioned
        .effects()
        .iter()
        .zip(&bs)
        .map(|(cb, b)| Ok(cb.matrix().max_abs_diff(condition_effect(&ch, b)?.matrix())))
        .collect::<Result<Vec<f64>>>()?;
    Ok(max_of(dev).max(observable_defect(&big_b)))
}

/// For any channel, `(B|I)_x − (b_x|I) = I*(I − Σb)/n` and `B` is an observable.
fn lem22_residual(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let ch = random_channel(d, d + 1, 2, rng)?;
    let a = random_observable(d + 1, 3, rng)?;
    let s = 0.3 + 0.7 * rng.uniform();
    let bs = a
        .effects()
        .iter()
        .map(|e| effect_from(e.matrix().scale(s), tol))
        .collect::<Result<Vec<_>>>()?;
    let big_b = complete_subnormalized(&ch, &bs, tol)?;
    let sum = CMatrix::sum(bs.iter().map(Effect::matrix)).expect("nonempty");
    let share = ch
        .dual_matrix(&(&CMatrix::identity(d + 1) - &sum))
        .scale(1.0 / 3.0);
    let conditioned = condition_observable(&ch, &big_b)?;
    let dev = conditioned
        .effects()
        .iter()
        .zip(&bs)
        .map(|(cb, b)| {
            Ok(cb
                .matrix()
                .max_abs_diff(&(condition_effect(&ch, b)?.matrix() + &share)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(max_of(dev).max(observable_defect(&big_b)))
}

fn thm24_postprocess(d: usize, rng: &mut InstanceRng, _tol: Tolerance) -> Result<f64> {
    let ch = random_channel(d, d + 1, 2, rng)?;
    let a = random_observable(d + 1, 3, rng)?;
    let lam = random_stochastic(a.outcomes(), 2, rng);
    let lhs = condition_observable(&ch, &post_process(&a, &lam)?)?;
    let rhs = post_process(&condition_observable(&ch, &a)?, &lam)?;
    Ok(lhs.max_abs_diff(&rhs))
}

fn thm24_part(d: usize, rng: &mut InstanceRng, _tol: Tolerance) -> Result<f64> {
    let ch = random_channel(d, d + 1, 2, rng)?;
    let c = random_observable(d + 1, 4, rng)?;
    let f = random_surjection(c.outcomes(), 2, rng)?;
    let lhs = part(&condition_observable(&ch, &c)?, &f)?;
    let rhs = condition_observable(&ch, &part(&c, &f)?)?;
    Ok(lhs.max_abs_diff(&rhs))
}

// ---- instruments ----

fn lem23_marginals(d: usize, rng: &mut InstanceRng, _tol: Tolerance) -> Result<f64> {
    let ins = random_instrument(d, d + 1, 3, rng)?;
    let b = random_observable(d + 1, 3, rng)?;
    let (first, second) = marginals(&given_observable(&b, &ins)?);
    let dev1 = first.max_abs_diff(&ins.measured_observable());
    let dev2 = second.max_abs_diff(&condition_observable(&total_channel(&ins), &b)?);
    Ok(dev1.max(dev2))
}

fn subsets(labels: &[String]) -> Vec<Vec<&str>> {
    (0..1usize << labels.len())
        .map(|mask| {
            labels
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, l)| l.as_str())
                .collect()
        })
        .collect()
}

fn lem23_distribution(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let n1 = 1 + rng.below(3);
    let n2 = 1 + rng.below(3);
    let ins = random_instrument(d, d + 1, n1, rng)?;
    let b = random_observable(d + 1, n2, rng)?;
    let rho = random_state(d, rng);
    let mut dev: f64 = 0.0;
    for s1 in subsets(ins.outcomes()) {
        for s2 in subsets(b.outcomes()) {
            let direct = given_distribution(&b, &ins, &rho, &s1, &s2)?;
            let factored = given_distribution_factored(&b, &ins, &rho, &s1, &s2, tol)?;
            dev = dev.max((direct - factored).abs());
        }
    }
    Ok(dev)
}

/// `(J|I)` measures `(Ĵ|I)`, and `(J‖I)` measures `(Ĵ‖I)`.
fn sec2_condition_instrument(d: usize, rng: &mut InstanceRng, _tol: Tolerance) -> Result<f64> {
    let ch = random_channel(d, d + 1, 2, rng)?;
    let jns = random_instrument(d + 1, d, 3, rng)?;
    let conditioned = condition_instrument(&ch, &jns)?;
    let dev1 = conditioned
        .measured_observable()
        .max_abs_diff(&condition_observable(&ch, &jns.measured_observable())?);
    let ins = random_instrument(d, d + 1, 2, rng)?;
    let bi = given_instrument(&ins, &jns)?;
    let measured = given_observable(&jns.measured_observable(), &ins)?;
    let dev2 = max_of((0..ins.len()).flat_map(|x| {
        let bi = &bi;
        let measured = &measured;
        (0..jns.len()).map(move |y| {
            bi.op(x, y)
                .measured_effect()
                .matrix()
                .max_abs_diff(measured.effect(x, y).matrix())
        })
    }));
    Ok(dev1.max(dev2))
}

/// `(J‖I)¹_x = I_x∘J̄` and `(J‖I)² = (J|Ī)`.
fn sec2_given_instrument(d: usize, rng: &mut InstanceRng, _tol: Tolerance) -> Result<f64> {
    let ins = random_instrument(d, d + 1, 2, rng)?;
    let jns = random_instrument(d + 1, d, 3, rng)?;
    let (first, second) = given_instrument(&ins, &jns)?.marginals();
    let jbar = jns.total();
    let expect1 = Instrument::from_parts_unchecked(
        ins.outcomes().to_vec(),
        ins.ops().iter().map(|i| i.then(&jbar)).collect(),
    );
    let expect2 = condition_instrument(&total_channel(&ins), &jns)?;
    Ok(first
        .map_distance(&expect1)
        .max(second.map_distance(&expect2)))
}

fn holevo_dual(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let spec = random_holevo(d, d + 1, 3, rng)?;
    let ins = holevo_instrument(&spec, tol)?;
    let formula = spec.formula_instrument();
    let action = ins.map_distance(&formula);
    let dual = max_of(ins.ops().iter().enumerate().map(|(x, op)| {
        max_of(
            hermitian_basis(d + 1)
                .iter()
                .map(|b| op.dual_matrix(b).max_abs_diff(&spec.dual(x, b))),
        )
    }));
    let measured = ins.measured_observable().max_abs_diff(spec.observable());
    Ok(action.max(dual).max(measured).max(ins.total_defect()))
}

/// `(H^{(B,β)}‖H^{(A,α)}) = H^{(C,δ)}` on every matrix unit, plus both marginal formulas.
fn holevo_compose_check(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let h_a = random_holevo(d, d + 1, 2, rng)?;
    let h_b = random_holevo(d + 1, d, 3, rng)?;
    let generic = given_instrument(
        &holevo_instrument(&h_a, tol)?,
        &holevo_instrument(&h_b, tol)?,
    )?;
    let composed = holevo_compose(&h_b, &h_a, tol)?;
    let dev = instrument_unit_distance(&generic.to_instrument(), &composed.to_instrument());

    let (a, alpha) = (h_a.observable(), h_a.states());
    let (b, beta) = (h_b.observable(), h_b.states());
    let w = |x: usize, y: usize| trace_product(alpha[x].matrix(), b.effects()[y].matrix());
    let first = Instrument::from_parts_unchecked(
        a.outcomes().to_vec(),
        (0..a.len())
            .map(|x| {
                LinearMap::from_fn(d, d, |rho| {
                    let p = trace_product(rho, a.effects()[x].matrix());
                    (0..b.len()).fold(CMatrix::zeros(d, d), |acc, y| {
                        acc + beta[y].matrix().scale_complex(p * w(x, y))
                    })
                })
            })
            .collect(),
    );
    let second = Instrument::from_parts_unchecked(
        b.outcomes().to_vec(),
        (0..b.len())
            .map(|y| {
                LinearMap::from_fn(d, d, |rho| {
                    let c: crate::matkernel::C64 = (0..a.len())
                        .map(|x| trace_product(rho, a.effects()[x].matrix()) * w(x, y))
                        .sum();
                    beta[y].matrix().scale_complex(c)
                })
            })
            .collect(),
    );
    let (m1, m2) = generic.marginals();
    Ok(dev
        .max(instrument_unit_distance(&m1, &first))
        .max(instrument_unit_distance(&m2, &second)))
}

// ---- measurement models ----

fn random_model(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<MeasurementModel> {
    let dk = 2;
    let ins = random_instrument(d, d * dk, 2, rng)?;
    let probe = random_observable(dk, 3, rng)?;
    MeasurementModel::new(d, dk, ins, probe, tol)
}

fn sec3_pointer(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let m = random_model(d, rng, tol)?;
    let pointer = measured_pointer_observable(&m);
    let via_instrument = measured_instrument(&m).measured_observable();
    let (_, second) = marginals(&measured_bi_observable(&m));
    Ok(pointer
        .max_abs_diff(&via_instrument)
        .max(pointer.max_abs_diff(&second))
        .max(observable_defect(&pointer)))
}

fn sec3_probe_invariance(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let m = random_model(d, rng, tol)?;
    let other = m.with_probe(random_observable(m.dim_k(), 2, rng)?, tol)?;
    let (first, _) = marginals(&measured_bi_observable(&m));
    let (first_other, _) = marginals(&measured_bi_observable(&other));
    let (j1, _) = measured_bi_instrument(&m).marginals();
    Ok(first
        .max_abs_diff(&first_other)
        .max(first.max_abs_diff(&m.interaction().measured_observable()))
        .max(j1.map_distance(&reduced_instrument(&m))))
}

fn sec3_simple(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let n = 1 + rng.below(3);
    let dk = 2;
    let a_ops = random_channel(d, d, n, rng)?.operation().kraus().to_vec();
    let psis: Vec<CMatrix> = (0..n).map(|_| random_unit_vector(dk, rng)).collect();
    let lifted = lifted_kraus(&a_ops, &psis);
    let phi1 = ginibre(d, 1, rng);
    let phi2 = ginibre(dk, 1, rng);
    let adjoint_dev = max_of(lifted.iter().enumerate().map(|(i, k)| {
        let lhs = &k.adjoint() * &kron(&phi1, &phi2);
        let inner = (&psis[i].adjoint() * &phi2).get(0, 0);
        lhs.max_abs_diff(&(&a_ops[i].adjoint() * &phi1).scale_complex(inner))
    }));
    let ks = simple_kraus_separable(a_ops, &psis, tol)?;
    let lifted_channel = Channel::new(lifted, tol)?;
    let formula = LinearMap::from_fn(d, d * dk, |r| ks.apply(r));
    Ok(adjoint_dev.max(map_distance(&lifted_channel, &formula)))
}

fn random_separable(
    d: usize,
    rng: &mut InstanceRng,
    tol: Tolerance,
) -> Result<KrausSeparableChannel> {
    let n = 1 + rng.below(3);
    let kraus = random_channel(d, d, n, rng)?.operation().kraus().to_vec();
    let states = (0..n).map(|_| random_state(2, rng)).collect();
    KrausSeparableChannel::new(kraus, states, tol)
}

fn thm31_formulas(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let ks = random_separable(d, rng, tol)?;
    let probe = random_observable(ks.dim_k(), 3, rng)?;
    let ch = kraus_separable_total(&ks, tol)?;
    let model = MeasurementModel::new(
        d,
        ks.dim_k(),
        Instrument::from_channel(&ch),
        probe.clone(),
        tol,
    )?;
    let action = map_distance(&ch, &LinearMap::from_fn(d, d * ks.dim_k(), |r| ks.apply(r)));
    let mut dual: f64 = 0.0;
    for a in hermitian_basis(d) {
        for b in hermitian_basis(ks.dim_k()) {
            dual = dual.max(
                ch.dual_matrix(&kron(&a, &b))
                    .max_abs_diff(&ks.dual_product(&a, &b)),
            );
        }
    }
    let instrument = measured_instrument(&model).map_distance(&ks.pointer_instrument(&probe)?);
    let observable =
        measured_pointer_observable(&model).max_abs_diff(&ks.pointer_observable(&probe)?);
    Ok(max_of([action, dual, instrument, observable]))
}

fn thm31_coefficients(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let ks = random_separable(d, rng, tol)?;
    let probe = random_observable(ks.dim_k(), 3, rng)?;
    let coeffs = ks.coefficients(&probe)?;
    let negative = max_of(coeffs.entries().iter().flatten().map(|&v| (-v).max(0.0)));
    Ok(coeffs.row_sum_defect().max(negative))
}

fn random_holevo_separable(
    d: usize,
    rng: &mut InstanceRng,
) -> Result<(HolevoSeparableSpec, Observable)> {
    let dk = 2;
    let n = 2 + rng.below(2);
    let a = random_observable(d, n, rng)?;
    let betas = (0..n).map(|_| random_state(d, rng)).collect();
    let gammas = (0..n).map(|_| random_state(dk, rng)).collect();
    let probe = random_observable(dk, 2 + rng.below(2), rng)?;
    Ok((HolevoSeparableSpec::new(a, betas, gammas)?, probe))
}

fn thm32_quantities(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let (spec, probe) = random_holevo_separable(d, rng)?;
    let q = holevo_model_quantities(&spec, &probe, tol)?;
    let model = spec.model(probe, tol)?;
    let duals = max_of(
        model
            .interaction()
            .ops()
            .iter()
            .zip(&q.interaction_duals)
            .map(|(op, formula)| dual_map_distance(op, &formula.dual())),
    );
    Ok(max_of([
        duals,
        measured_bi_instrument(&model).map_distance(&q.bi_instrument),
        measured_instrument(&model).map_distance(&q.instrument),
        reduced_instrument(&model).map_distance(&q.reduced),
        measured_bi_observable(&model).max_abs_diff(&q.bi_observable),
        measured_pointer_observable(&model).max_abs_diff(&q.pointer_observable),
    ]))
}

/// `tr(γ_x P_y)` is row-stochastic and post-processes `A` into `Ĵ²`.
fn thm32_kernel(d: usize, rng: &mut InstanceRng, tol: Tolerance) -> Result<f64> {
    let (spec, probe) = random_holevo_separable(d, rng)?;
    let q = holevo_model_quantities(&spec, &probe, tol)?;
    let negative = max_of(q.kernel.entries().iter().flatten().map(|&v| (-v).max(0.0)));
    let generic = measured_pointer_observable(&spec.model(probe, tol)?);
    let via_kernel = post_process(spec.observable(), &q.kernel)?;
    Ok(max_of([
        q.kernel.row_sum_defect(),
        negative,
        generic.max_abs_diff(&via_kernel),
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_sorted_and_unique() {
        let names: Vec<&str> = REGISTRY.iter().map(|i| i.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(names, sorted);
    }

    #[test]
    fn every_anchor_group_is_registered() {
        for g in [
            "lem11", "thm21", "lem22", "lem23", "thm24", "holevo", "thm31", "thm32",
        ] {
            assert!(REGISTRY.iter().any(|i| i.group() == g), "{g}");
        }
    }

    #[test]
    fn suite_resolution() {
        assert_eq!(resolve_suite(&["all"]).unwrap().len(), REGISTRY.len());
        let thm21: Vec<_> = resolve_suite(&["thm21"])
            .unwrap()
            .iter()
            .map(|i| i.name)
            .collect();
        assert_eq!(
            thm21,
            ["thm21.additivity", "thm21.duality", "thm21.morphism"]
        );
        assert_eq!(resolve_suite(&["thm21.duality", "thm21"]).unwrap().len(), 3);
        assert!(matches!(
            resolve_suite(&["thm99"]),
            Err(Error::UnknownIdentity(_))
        ));
    }

    #[test]
    fn zero_trials_gives_empty_passing_report() {
        let r = run_checks(&["all"], 0, 2..=3, 1, Tolerance::default()).unwrap();
        assert!(r.identities.is_empty());
        assert!(r.pass);
    }

    #[test]
    fn duality_suite_passes() {
        let r = run_checks(&["thm21.duality"], 100, 2..=3, 0, Tolerance::default()).unwrap();
        assert_eq!(r.identities.len(), 1);
        let rec = &r.identities[0];
        assert_eq!(rec.instances, 200);
        assert!(rec.pass && rec.max_deviation <= 1e-9, "{rec:?}");
    }

    #[test]
    fn every_identity_passes_on_a_few_instances() {
        let r = run_checks(&["all"], 3, 1..=3, 11, Tolerance::default()).unwrap();
        for rec in &r.identities {
            assert!(rec.pass, "{rec:?}");
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run_checks(&["lem23", "holevo"], 5, 2..=3, 3, Tolerance::default()).unwrap();
        let b = run_checks(&["lem23", "holevo"], 5, 2..=3, 3, Tolerance::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }
}
