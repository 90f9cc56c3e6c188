//! Instruments, bi-instruments and the constructions built from them:
//! measured observables, updated states, `(B‖I)`, `(J|I)`, `(J‖I)`, and
//! Holevo instruments.
//!
//! Instruments are generic over the map representation so that instruments
//! produced by partial traces (see `measmodel`) can live alongside Kraus-form
//! ones. Composite labels are `x⊗y`.

use crate::channels::{Channel, LinearMap, Operation, QuantumMap};
use crate::effects::{pair_label, pair_labels, BiObservable, Observable, State};
use crate::error::{Error, Result};
use crate::matkernel::{psd_factors, trace_product, CMatrix, Tolerance};

fn check_labels(labels: &[String]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    if labels.is_empty() {
        return Err(Error::invariant("outcome space", "outcome space is empty"));
    }
    if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
        return Err(Error::invariant(
            "outcome space",
            format!("duplicate label `{dup}`"),
        ));
    }
    Ok(())
}

/// Finite family of operations whose sum is a channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument<M = Operation> {
    outcomes: Vec<String>,
    ops: Vec<M>,
}

impl<M: QuantumMap> Instrument<M> {
    /// Checks shapes and that the total map preserves the trace (`Σ_x I_x*(I) = I`).
    pub fn new(outcomes: Vec<String>, ops: Vec<M>, tol: Tolerance) -> Result<Self> {
        check_labels(&outcomes)?;
        if outcomes.len() != ops.len() {
            return Err(Error::invariant(
                "outcome space",
                "one operation per outcome is required",
            ));
        }
        let (din, dout) = (ops[0].dim_in(), ops[0].dim_out());
        if ops.iter().any(|o| o.dim_in() != din || o.dim_out() != dout) {
            return Err(Error::dims(
                "operations of an instrument must share dimensions",
            ));
        }
        let ins = Instrument { outcomes, ops };
        ins.validate(tol)?;
        Ok(ins)
    }

    pub(crate) fn from_parts_unchecked(outcomes: Vec<String>, ops: Vec<M>) -> Self {
        Instrument { outcomes, ops }
    }

    pub fn validate(&self, tol: Tolerance) -> Result<()> {
        let defect = self.total_defect();
        if defect > tol.atol() {
            return Err(Error::invariant(
                "trace preservation",
                format!("total map misses the identity by {defect:e}"),
            ));
        }
        Ok(())
    }

    /// Entrywise distance of `Σ_x I_x*(I)` from `I`.
    pub fn total_defect(&self) -> f64 {
        let unit = CMatrix::identity(self.dim_out());
        let sum = self
            .ops
            .iter()
            .fold(CMatrix::zeros(self.dim_in(), self.dim_in()), |acc, o| {
                acc + o.dual_matrix(&unit)
            });
        sum.max_abs_diff(&CMatrix::identity(self.dim_in()))
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn ops(&self) -> &[M] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn dim_in(&self) -> usize {
        self.ops[0].dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.ops[0].dim_out()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.outcomes
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn op(&self, label: &str) -> Result<&M> {
        Ok(&self.ops[self.index_of(label)?])
    }

    /// `Ī = Σ_x I_x` as a map.
    pub fn total(&self) -> M {
        M::sum_all(&self.ops)
    }

    /// `I_Δ = Σ_{x∈Δ} I_x` applied to `ρ`.
    pub fn apply_set(&self, subset: &[&str], rho: &CMatrix) -> Result<CMatrix> {
        let mut acc = CMatrix::zeros(self.dim_out(), self.dim_out());
        for label in subset {
            acc += &self.op(label)?.apply_matrix(rho);
        }
        Ok(acc)
    }

    /// `Î_x = I_x*(I)`.
    pub fn measured_observable(&self) -> Observable {
        let unit = CMatrix::identity(self.dim_out());
        let effects = self
            .ops
            .iter()
            .map(|o| o.dual_matrix(&unit).hermitian_part())
            .collect();
        Observable::from_parts_unchecked(self.outcomes.clone(), effects)
    }

    /// `I_x(ρ)/tr[I_x(ρ)]`, defined only when the outcome has probability above `atol`.
    pub fn updated_state(&self, label: &str, rho: &State, tol: Tolerance) -> Result<State> {
        if rho.dim() != self.dim_in() {
            return Err(Error::dims("state does not match the instrument's input"));
        }
        let out = self.op(label)?.apply_matrix(rho.matrix());
        if out.trace().re <= tol.atol() {
            return Err(Error::OutcomeNotObserved(label.to_string()));
        }
        State::normalized(&out, tol)
    }

    /// Largest map distance between corresponding operations; infinite if labels differ.
    pub fn map_distance<N: QuantumMap>(&self, other: &Instrument<N>) -> f64 {
        if self.outcomes != other.outcomes {
            return f64::INFINITY;
        }
        self.ops
            .iter()
            .zip(&other.ops)
            .map(|(a, b)| crate::channels::map_distance(a, b))
            .fold(0.0, f64::max)
    }

    pub fn to_linear_maps(&self) -> Instrument<LinearMap> {
        Instrument {
            outcomes: self.outcomes.clone(),
            ops: self.ops.iter().map(QuantumMap::to_linear_map).collect(),
        }
    }
}

impl Instrument<Operation> {
    /// Kraus-form instrument; each operation is checked on construction.
    pub fn from_kraus(
        outcomes: Vec<String>,
        kraus: Vec<Vec<CMatrix>>,
        tol: Tolerance,
    ) -> Result<Self> {
        let ops = kraus
            .into_iter()
            .map(|k| Operation::new(k, tol))
            .collect::<Result<Vec<_>>>()?;
        Instrument::new(outcomes, ops, tol)
    }

    /// Single-outcome instrument wrapping a channel.
    pub fn from_channel(ch: &Channel) -> Self {
        Instrument {
            outcomes: vec![crate::effects::TRIVIAL_LABEL.to_string()],
            ops: vec![ch.operation().clone()],
        }
    }

    /// Lüders instrument `ρ ↦ √A_x ρ √A_x`.
    pub fn luders(a: &Observable, tol: Tolerance) -> Result<Self> {
        let ops = a
            .effects()
            .iter()
            .map(|e| {
                let root = crate::matkernel::psd_sqrt(e.matrix(), tol)?;
                Ok(Operation::from_kraus_unchecked(
                    vec![root],
                    a.dim(),
                    a.dim(),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Instrument {
            outcomes: a.outcomes().to_vec(),
            ops,
        })
    }
}

/// Instrument indexed by `Ω₁ × Ω₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiInstrument<M = Operation> {
    outcomes1: Vec<String>,
    outcomes2: Vec<String>,
    grid: Vec<Vec<M>>,
}

impl<M: QuantumMap> BiInstrument<M> {
    pub fn new(
        outcomes1: Vec<String>,
        outcomes2: Vec<String>,
        grid: Vec<Vec<M>>,
        tol: Tolerance,
    ) -> Result<Self> {
        check_labels(&outcomes1)?;
        check_labels(&outcomes2)?;
        if grid.len() != outcomes1.len() || grid.iter().any(|r| r.len() != outcomes2.len()) {
            return Err(Error::invariant(
                "outcome space",
                "grid shape does not match the outcome spaces",
            ));
        }
        let bi = BiInstrument {
            outcomes1,
            outcomes2,
            grid,
        };
        bi.to_instrument().validate(tol)?;
        Ok(bi)
    }

    pub(crate) fn from_grid_unchecked(
        outcomes1: Vec<String>,
        outcomes2: Vec<String>,
        grid: Vec<Vec<M>>,
    ) -> Self {
        BiInstrument {
            outcomes1,
            outcomes2,
            grid,
        }
    }

    /// Reshapes a flat instrument whose outcomes enumerate `Ω₁ × Ω₂` row-major.
    pub fn from_flat(
        outcomes1: Vec<String>,
        outcomes2: Vec<String>,
        flat: Instrument<M>,
    ) -> Result<Self> {
        if flat.outcomes != pair_labels(&outcomes1, &outcomes2) {
            return Err(Error::invariant(
                "outcome space",
                "flat labels do not enumerate the product space",
            ));
        }
        let mut ops = flat.ops.into_iter();
        let grid = outcomes1
            .iter()
            .map(|_| ops.by_ref().take(outcomes2.len()).collect())
            .collect();
        Ok(BiInstrument {
            outcomes1,
            outcomes2,
            grid,
        })
    }

    pub fn outcomes1(&self) -> &[String] {
        &self.outcomes1
    }

    pub fn outcomes2(&self) -> &[String] {
        &self.outcomes2
    }

    pub fn op(&self, x: usize, y: usize) -> &M {
        &self.grid[x][y]
    }

    pub fn grid(&self) -> &[Vec<M>] {
        &self.grid
    }

    pub fn dim_in(&self) -> usize {
        self.grid[0][0].dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.grid[0][0].dim_out()
    }

    /// Flattened instrument on pair labels, row-major.
    pub fn to_instrument(&self) -> Instrument<M> {
        Instrument {
            outcomes: pair_labels(&self.outcomes1, &self.outcomes2),
            ops: self.grid.iter().flatten().cloned().collect(),
        }
    }

    /// `(I¹, I²)` with `I¹_x = Σ_y I_{xy}` and `I²_y = Σ_x I_{xy}`.
    pub fn marginals(&self) -> (Instrument<M>, Instrument<M>) {
        let first = self.grid.iter().map(|row| M::sum_all(row)).collect();
        let second = (0..self.outcomes2.len())
            .map(|y| {
                let column: Vec<M> = self.grid.iter().map(|row| row[y].clone()).collect();
                M::sum_all(&column)
            })
            .collect();
        (
            Instrument {
                outcomes: self.outcomes1.clone(),
                ops: first,
            },
            Instrument {
                outcomes: self.outcomes2.clone(),
                ops: second,
            },
        )
    }

    pub fn map_distance<N: QuantumMap>(&self, other: &BiInstrument<N>) -> f64 {
        if self.outcomes1 != other.outcomes1 || self.outcomes2 != other.outcomes2 {
            return f64::INFINITY;
        }
        self.to_instrument().map_distance(&other.to_instrument())
    }
}

/// `Ī` as a channel (concatenated Kraus lists).
pub fn total_channel(ins: &Instrument) -> Channel {
    let total = ins.total();
    Channel::from_kraus_unchecked(total.kraus().to_vec(), total.dim_in(), total.dim_out())
}

pub fn measured_observable<M: QuantumMap>(ins: &Instrument<M>) -> Observable {
    ins.measured_observable()
}

pub fn updated_state<M: QuantumMap>(
    ins: &Instrument<M>,
    label: &str,
    rho: &State,
    tol: Tolerance,
) -> Result<State> {
    ins.updated_state(label, rho, tol)
}

/// `(B‖I)_{xy} = I_x*(B_y)`.
pub fn given_observable<M: QuantumMap>(
    b: &Observable,
    ins: &Instrument<M>,
) -> Result<BiObservable> {
    if b.dim() != ins.dim_out() {
        return Err(Error::dims(format!(
            "observable on {} given an instrument into {}",
            b.dim(),
            ins.dim_out()
        )));
    }
    let grid = ins
        .ops()
        .iter()
        .map(|op| {
            b.effects()
                .iter()
                .map(|e| op.dual_matrix(e.matrix()).hermitian_part())
                .collect()
        })
        .collect();
    Ok(BiObservable::from_grid_unchecked(
        ins.outcomes().to_vec(),
        b.outcomes().to_vec(),
        grid,
    ))
}

fn check_distribution_inputs<M: QuantumMap>(
    b: &Observable,
    ins: &Instrument<M>,
    rho: &State,
) -> Result<()> {
    if b.dim() != ins.dim_out() || rho.dim() != ins.dim_in() {
        return Err(Error::dims("observable, instrument and state do not chain"));
    }
    Ok(())
}

/// `Φ_ρ^{(B‖I)}(Δ₁×Δ₂) = Σ_{(x,y)∈Δ₁×Δ₂} tr[I_x(ρ) B_y]`.
pub fn given_distribution<M: QuantumMap>(
    b: &Observable,
    ins: &Instrument<M>,
    rho: &State,
    set1: &[&str],
    set2: &[&str],
) -> Result<f64> {
    check_distribution_inputs(b, ins, rho)?;
    let mut total = 0.0;
    for x in set1 {
        let out = ins.op(x)?.apply_matrix(rho.matrix());
        for y in set2 {
            total += trace_product(&out, b.effect(y)?.matrix()).re;
        }
    }
    Ok(total)
}

/// The same probability through the factored form
/// `tr[I_{Δ₁}(ρ)] · Φ^B_{(I_{Δ₁}(ρ))'}(Δ₂)`; zero when `tr[I_{Δ₁}(ρ)] ≤ atol`.
pub fn given_distribution_factored<M: QuantumMap>(
    b: &Observable,
    ins: &Instrument<M>,
    rho: &State,
    set1: &[&str],
    set2: &[&str],
    tol: Tolerance,
) -> Result<f64> {
    check_distribution_inputs(b, ins, rho)?;
    for y in set2 {
        b.index_of(y)?;
    }
    let out = ins.apply_set(set1, rho.matrix())?;
    let weight = out.trace().re;
    if weight <= tol.atol() {
        return Ok(0.0);
    }
    let updated = State::normalized(&out, tol)?;
    let p = crate::effects::observable_distribution(&updated, b, set2)?;
    Ok(weight * p)
}

/// `(J|I)_y = I∘J_y`.
pub fn condition_instrument(ch: &Channel, jns: &Instrument) -> Result<Instrument> {
    if ch.dim_out() != jns.dim_in() {
        return Err(Error::dims(format!(
            "channel outputs {}, instrument expects {}",
            ch.dim_out(),
            jns.dim_in()
        )));
    }
    let ops = jns.ops().iter().map(|j| ch.operation().then(j)).collect();
    Ok(Instrument::from_parts_unchecked(
        jns.outcomes().to_vec(),
        ops,
    ))
}

/// `(J‖I)_{xy} = I_x∘J_y`.
pub fn given_instrument(ins: &Instrument, jns: &Instrument) -> Result<BiInstrument> {
    if ins.dim_out() != jns.dim_in() {
        return Err(Error::dims(format!(
            "first instrument outputs {}, second expects {}",
            ins.dim_out(),
            jns.dim_in()
        )));
    }
    let grid = ins
        .ops()
        .iter()
        .map(|i| jns.ops().iter().map(|j| i.then(j)).collect())
        .collect();
    Ok(BiInstrument::from_grid_unchecked(
        ins.outcomes().to_vec(),
        jns.outcomes().to_vec(),
        grid,
    ))
}

/// Data of a Holevo instrument `ρ ↦ tr(ρA_x) α_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct HolevoSpec {
    observable: Observable,
    states: Vec<State>,
}

impl HolevoSpec {
    pub fn new(observable: Observable, states: Vec<State>) -> Result<Self> {
        if states.len() != observable.len() {
            return Err(Error::invariant(
                "outcome space",
                format!(
                    "{} prepared states for {} outcomes",
                    states.len(),
                    observable.len()
                ),
            ));
        }
        let d = states[0].dim();
        if states.iter().any(|s| s.dim() != d) {
            return Err(Error::dims("prepared states must share one dimension"));
        }
        Ok(HolevoSpec { observable, states })
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn dim_in(&self) -> usize {
        self.observable.dim()
    }

    pub fn dim_out(&self) -> usize {
        self.states[0].dim()
    }

    /// `tr(ρA_x) α_x` evaluated directly.
    pub fn apply(&self, x: usize, rho: &CMatrix) -> CMatrix {
        let p = trace_product(rho, self.observable.effects()[x].matrix());
        self.states[x].matrix().scale_complex(p)
    }

    /// `H_x*(b) = tr(α_x b) A_x` evaluated directly.
    pub fn dual(&self, x: usize, b: &CMatrix) -> CMatrix {
        let w = trace_product(self.states[x].matrix(), b);
        self.observable.effects()[x].matrix().scale_complex(w)
    }

    /// The formula maps as an instrument of tabulated linear maps.
    pub fn formula_instrument(&self) -> Instrument<LinearMap> {
        let ops = (0..self.observable.len())
            .map(|x| LinearMap::from_fn(self.dim_in(), self.dim_out(), |m| self.apply(x, m)))
            .collect();
        Instrument::from_parts_unchecked(self.observable.outcomes().to_vec(), ops)
    }
}

/// Kraus form of a Holevo instrument: for `A_x = Σ_j a_j|u_j⟩⟨u_j|` and
/// `α_x = Σ_k p_k|v_k⟩⟨v_k|` the operators are `√(a_j p_k) |v_k⟩⟨u_j|`.
pub fn holevo_instrument(spec: &HolevoSpec, tol: Tolerance) -> Result<Instrument> {
    let (din, dout) = (spec.dim_in(), spec.dim_out());
    let ops = spec
        .observable
        .effects()
        .iter()
        .zip(&spec.states)
        .map(|(a, alpha)| {
            let a_factors = psd_factors(a.matrix(), tol)?;
            let s_factors = psd_factors(alpha.matrix(), tol)?;
            let kraus: Vec<CMatrix> = a_factors
                .iter()
                .flat_map(|(aj, u)| {
                    s_factors
                        .iter()
                        .map(move |(pk, v)| (v * &u.adjoint()).scale((aj * pk).sqrt()))
                })
                .collect();
            Ok(if kraus.is_empty() {
                Operation::zero(din, dout)
            } else {
                Operation::from_kraus_unchecked(kraus, din, dout)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Instrument::from_parts_unchecked(
        spec.observable.outcomes().to_vec(),
        ops,
    ))
}

/// Holevo data of `(H^{(B,β)}‖H^{(A,α)})`: bi-observable `C_{xy} = tr(α_x B_y) A_x`
/// and states `δ_{xy} = β_y`, flattened on labels `x⊗y`.
pub fn holevo_composition_spec(h_b: &HolevoSpec, h_a: &HolevoSpec) -> Result<HolevoSpec> {
    if h_a.dim_out() != h_b.dim_in() {
        return Err(Error::dims("Holevo instruments do not chain"));
    }
    let a = h_a.observable();
    let b = h_b.observable();
    let mut labels = Vec::new();
    let mut effects = Vec::new();
    let mut states = Vec::new();
    for (x, (ax, alpha)) in a.effects().iter().zip(h_a.states()).enumerate() {
        for (y, (by, beta)) in b.effects().iter().zip(h_b.states()).enumerate() {
            let w = trace_product(alpha.matrix(), by.matrix()).re;
            labels.push(pair_label(&a.outcomes()[x], &b.outcomes()[y]));
            effects.push(ax.matrix().scale(w));
            states.push(beta.clone());
        }
    }
    HolevoSpec::new(Observable::from_parts_unchecked(labels, effects), states)
}

/// The composed Holevo instrument `H^{(C,δ)}` as a bi-instrument over `Ω_A × Ω_B`.
pub fn holevo_compose(h_b: &HolevoSpec, h_a: &HolevoSpec, tol: Tolerance) -> Result<BiInstrument> {
    let spec = holevo_composition_spec(h_b, h_a)?;
    let flat = holevo_instrument(&spec, tol)?;
    BiInstrument::from_flat(
        h_a.observable().outcomes().to_vec(),
        h_b.observable().outcomes().to_vec(),
        flat,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{condition_observable, map_distance};
    use crate::effects::{born_probability, marginals};
    use crate::matkernel::C64;
    use crate::scenario::random::{
        random_channel, random_instrument, random_observable, random_state, random_unitary,
        InstanceRng,
    };

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn z_obs() -> Observable {
        Observable::with_index_labels(
            vec![CMatrix::diag(&[1.0, 0.0]), CMatrix::diag(&[0.0, 1.0])],
            tol(),
        )
        .unwrap()
    }

    fn random_holevo(din: usize, dout: usize, n: usize, rng: &mut InstanceRng) -> HolevoSpec {
        let a = random_observable(din, n, rng).unwrap();
        let states = (0..n).map(|_| random_state(dout, rng)).collect();
        HolevoSpec::new(a, states).unwrap()
    }

    #[test]
    fn instrument_validation() {
        let half = CMatrix::identity(2).scale(0.5);
        let err = Instrument::from_kraus(
            vec!["a".into(), "b".into()],
            vec![vec![half.clone()], vec![half]],
            tol(),
        )
        .unwrap_err();
        assert_eq!(err.invariant_name(), Some("trace preservation"));
        let luders = Instrument::luders(&z_obs(), tol()).unwrap();
        luders.validate(tol()).unwrap();
    }

    #[test]
    fn total_channel_examples() {
        let mut rng = InstanceRng::new(1);
        let ch = random_channel(2, 2, 2, &mut rng).unwrap();
        let single = Instrument::from_channel(&ch);
        assert!(map_distance(&total_channel(&single), &ch) < 1e-15);

        let luders = Instrument::luders(&z_obs(), tol()).unwrap();
        let rho = random_state(2, &mut rng);
        let out = total_channel(&luders).apply_matrix(rho.matrix());
        let p0 = CMatrix::diag(&[1.0, 0.0]);
        let p1 = CMatrix::diag(&[0.0, 1.0]);
        let oracle = &(&(&p0 * rho.matrix()) * &p0) + &(&(&p1 * rho.matrix()) * &p1);
        assert!(out.max_abs_diff(&oracle) < 1e-15);

        let spec = random_holevo(2, 3, 3, &mut rng);
        let h = holevo_instrument(&spec, tol()).unwrap();
        let out = total_channel(&h).apply_matrix(rho.matrix());
        let mut oracle = CMatrix::zeros(3, 3);
        for x in 0..3 {
            let p = born_probability(&rho, &spec.observable().effects()[x]).unwrap();
            oracle += &spec.states()[x].matrix().scale(p);
        }
        assert!(out.max_abs_diff(&oracle) < 1e-13);
    }

    #[test]
    fn measured_observable_examples() {
        let mut rng = InstanceRng::new(2);
        let spec = random_holevo(3, 2, 3, &mut rng);
        let h = holevo_instrument(&spec, tol()).unwrap();
        assert!(measured_observable(&h).max_abs_diff(spec.observable()) < 1e-13);

        let luders = Instrument::luders(&z_obs(), tol()).unwrap();
        assert!(measured_observable(&luders).max_abs_diff(&z_obs()) < 1e-15);

        let ch = random_channel(2, 3, 2, &mut rng).unwrap();
        let m = measured_observable(&Instrument::from_channel(&ch));
        assert!(m.max_abs_diff(&Observable::trivial(2)) < 1e-12);
    }

    #[test]
    fn updated_state_examples() {
        let mut rng = InstanceRng::new(3);
        let spec = random_holevo(2, 2, 2, &mut rng);
        let h = holevo_instrument(&spec, tol()).unwrap();
        let rho = random_state(2, &mut rng);
        for (x, label) in h.outcomes().iter().enumerate() {
            let s = updated_state(&h, label, &rho, tol()).unwrap();
            assert!(s.matrix().max_abs_diff(spec.states()[x].matrix()) < 1e-12);
        }

        let luders = Instrument::luders(&z_obs(), tol()).unwrap();
        let eig = State::new(CMatrix::diag(&[1.0, 0.0]), tol()).unwrap();
        assert_eq!(updated_state(&luders, "0", &eig, tol()).unwrap(), eig);
        assert!(matches!(
            updated_state(&luders, "1", &eig, tol()),
            Err(Error::OutcomeNotObserved(_))
        ));
        assert!(matches!(
            updated_state(&luders, "7", &eig, tol()),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn given_observable_marginals() {
        let mut rng = InstanceRng::new(4);
        let ins = random_instrument(2, 3, 3, &mut rng).unwrap();
        let b = random_observable(3, 2, &mut rng).unwrap();
        let bi = given_observable(&b, &ins).unwrap();
        bi.to_observable().validate(tol()).unwrap();
        let (m1, m2) = marginals(&bi);
        assert!(m1.max_abs_diff(&measured_observable(&ins)) < 1e-13);
        assert!(m2.max_abs_diff(&condition_observable(&total_channel(&ins), &b).unwrap()) < 1e-13);

        let t = given_observable(&Observable::trivial(3), &ins).unwrap();
        let hat = measured_observable(&ins);
        for x in 0..3 {
            assert!(
                t.effect(x, 0)
                    .matrix()
                    .max_abs_diff(hat.effects()[x].matrix())
                    < 1e-13
            );
        }
        assert!(given_observable(&Observable::trivial(2), &ins).is_err());
    }

    #[test]
    fn given_distribution_examples() {
        let mut rng = InstanceRng::new(5);
        let ins = random_instrument(2, 2, 3, &mut rng).unwrap();
        let b = random_observable(2, 3, &mut rng).unwrap();
        let rho = random_state(2, &mut rng);
        let all1: Vec<&str> = ins.outcomes().iter().map(String::as_str).collect();
        let all2: Vec<&str> = b.outcomes().iter().map(String::as_str).collect();
        assert!((given_distribution(&b, &ins, &rho, &all1, &all2).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(given_distribution(&b, &ins, &rho, &[], &all2).unwrap(), 0.0);
        assert_eq!(
            given_distribution_factored(&b, &ins, &rho, &[], &all2, tol()).unwrap(),
            0.0
        );
        let u = given_distribution(&b, &ins, &rho, &all1[..2], &all2[1..]).unwrap();
        let f = given_distribution_factored(&b, &ins, &rho, &all1[..2], &all2[1..], tol()).unwrap();
        assert!((u - f).abs() < 1e-12);
        assert!(given_distribution(&b, &ins, &rho, &["bogus"], &all2).is_err());
        assert!(given_distribution_factored(&b, &ins, &rho, &all1, &["bogus"], tol()).is_err());
    }

    #[test]
    fn condition_instrument_examples() {
        let mut rng = InstanceRng::new(6);
        let jns = random_instrument(2, 2, 2, &mut rng).unwrap();
        let same = condition_instrument(&Channel::identity(2), &jns).unwrap();
        assert!(same.map_distance(&jns) < 1e-15);

        let u = random_unitary(2, &mut rng);
        let uch = Channel::unitary(u.clone(), tol()).unwrap();
        let luders = Instrument::luders(&z_obs(), tol()).unwrap();
        let cond = condition_instrument(&uch, &luders).unwrap();
        let rho = random_state(2, &mut rng);
        for (y, p) in [CMatrix::diag(&[1.0, 0.0]), CMatrix::diag(&[0.0, 1.0])]
            .iter()
            .enumerate()
        {
            let k = p * &u;
            let oracle = &(&k * rho.matrix()) * &k.adjoint();
            assert!(
                cond.ops()[y]
                    .apply_matrix(rho.matrix())
                    .max_abs_diff(&oracle)
                    < 1e-14
            );
        }

        let ch = random_channel(3, 2, 2, &mut rng).unwrap();
        let cond = condition_instrument(&ch, &jns).unwrap();
        let lhs = measured_observable(&cond);
        let rhs = condition_observable(&ch, &measured_observable(&jns)).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-13);
        assert!(
            condition_instrument(&uch, &random_instrument(3, 2, 2, &mut rng).unwrap()).is_err()
        );
    }

    #[test]
    fn given_instrument_examples() {
        let mut rng = InstanceRng::new(7);
        let ins = random_instrument(2, 3, 2, &mut rng).unwrap();
        let ch = random_channel(3, 2, 2, &mut rng).unwrap();
        let bi = given_instrument(&ins, &Instrument::from_channel(&ch)).unwrap();
        for x in 0..2 {
            assert!(map_distance(bi.op(x, 0), &ins.ops()[x].then(ch.operation())) < 1e-14);
        }

        let jns = random_instrument(3, 2, 3, &mut rng).unwrap();
        let bi = given_instrument(&ins, &jns).unwrap();
        bi.to_instrument().validate(tol()).unwrap();
        let (m1, m2) = bi.marginals();
        let jbar = jns.total();
        for x in 0..2 {
            assert!(map_distance(&m1.ops()[x], &ins.ops()[x].then(&jbar)) < 1e-13);
        }
        let cond = condition_instrument(&total_channel(&ins), &jns).unwrap();
        assert!(m2.map_distance(&cond) < 1e-13);
    }

    #[test]
    fn holevo_dual_examples() {
        let mut rng = InstanceRng::new(8);
        let spec = random_holevo(2, 3, 2, &mut rng);
        let h = holevo_instrument(&spec, tol()).unwrap();
        for x in 0..2 {
            let d = h.ops()[x].dual_matrix(&CMatrix::identity(3));
            assert!(d.max_abs_diff(spec.observable().effects()[x].matrix()) < 1e-13);
            let b = crate::scenario::random::random_effect(3, &mut rng);
            assert!(
                h.ops()[x]
                    .dual_matrix(b.matrix())
                    .max_abs_diff(&spec.dual(x, b.matrix()))
                    < 1e-13
            );
        }

        let half = State::maximally_mixed(2);
        let spec = HolevoSpec::new(z_obs(), vec![half.clone(), half]).unwrap();
        let h = holevo_instrument(&spec, tol()).unwrap();
        let p0 = CMatrix::diag(&[1.0, 0.0]);
        for x in 0..2 {
            let expect = spec.observable().effects()[x].matrix().scale(0.5);
            assert!(h.ops()[x].dual_matrix(&p0).max_abs_diff(&expect) < 1e-15);
        }

        let rho = random_state(2, &mut rng);
        for x in 0..2 {
            let tr = h.ops()[x].apply_matrix(rho.matrix()).trace();
            let p = born_probability(&rho, &spec.observable().effects()[x]).unwrap();
            assert!((tr - C64::new(p, 0.0)).norm() < 1e-14);
        }
        assert!(h.map_distance(&spec.formula_instrument()) < 1e-14);
    }

    #[test]
    fn holevo_composition_examples() {
        let mut rng = InstanceRng::new(9);
        let h_a = random_holevo(2, 3, 2, &mut rng);
        let h_b = random_holevo(3, 2, 3, &mut rng);
        let generic = given_instrument(
            &holevo_instrument(&h_a, tol()).unwrap(),
            &holevo_instrument(&h_b, tol()).unwrap(),
        )
        .unwrap();
        let composed = holevo_compose(&h_b, &h_a, tol()).unwrap();
        assert!(generic.map_distance(&composed) < 1e-13);

        // B = {I}: C_{x,·} = A_x and δ = β.
        let beta = random_state(2, &mut rng);
        let trivial_b = HolevoSpec::new(Observable::trivial(3), vec![beta.clone()]).unwrap();
        let spec = holevo_composition_spec(&trivial_b, &h_a).unwrap();
        assert!(spec
            .observable()
            .effects()
            .iter()
            .zip(h_a.observable().effects())
            .all(|(c, a)| c.matrix().max_abs_diff(a.matrix()) < 1e-13));
        assert!(spec.states().iter().all(|s| s == &beta));
    }
}
