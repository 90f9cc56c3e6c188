//! Measurement models `(H, K, I, P)`: an interaction instrument from `H`
//! into `H ⊗ K` followed by a probe observable on `K`.
//!
//! The generic pipeline extracts everything by partial trace over `K`. The
//! Kraus-separable and Holevo-separable types provide closed-form
//! evaluations of the same quantities; they are independent code paths and
//! the tests compare them against the generic one.

use crate::channels::{Channel, LinearMap, Operation, QuantumMap};
use crate::effects::{BiObservable, Observable, State, StochasticMatrix};
use crate::error::{Error, Result};
use crate::instruments::{holevo_instrument, BiInstrument, HolevoSpec, Instrument};
use crate::matkernel::{kron, partial_trace_right, psd_factors, trace_product, CMatrix, Tolerance};

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementModel {
    dim_h: usize,
    dim_k: usize,
    interaction: Instrument,
    probe: Observable,
}

impl MeasurementModel {
    pub fn new(
        dim_h: usize,
        dim_k: usize,
        interaction: Instrument,
        probe: Observable,
        tol: Tolerance,
    ) -> Result<Self> {
        if interaction.dim_in() != dim_h || interaction.dim_out() != dim_h * dim_k {
            return Err(Error::dims(format!(
                "interaction maps {} → {}, expected {dim_h} → {}",
                interaction.dim_in(),
                interaction.dim_out(),
                dim_h * dim_k
            )));
        }
        if probe.dim() != dim_k {
            return Err(Error::dims(format!(
                "probe lives on {}, probe space has {dim_k}",
                probe.dim()
            )));
        }
        interaction.validate(tol)?;
        probe.validate(tol)?;
        Ok(MeasurementModel {
            dim_h,
            dim_k,
            interaction,
            probe,
        })
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn dim_k(&self) -> usize {
        self.dim_k
    }

    pub fn interaction(&self) -> &Instrument {
        &self.interaction
    }

    pub fn probe(&self) -> &Observable {
        &self.probe
    }

    /// Same interaction, different probe.
    pub fn with_probe(&self, probe: Observable, tol: Tolerance) -> Result<Self> {
        MeasurementModel::new(self.dim_h, self.dim_k, self.interaction.clone(), probe, tol)
    }

    /// `I_H ⊗ P_y`.
    pub fn lifted_probe(&self, y: usize) -> CMatrix {
        kron(
            &CMatrix::identity(self.dim_h),
            self.probe.effects()[y].matrix(),
        )
    }

    fn pointer_map<M: QuantumMap>(&self, op: &M, lifted: Option<&CMatrix>) -> LinearMap {
        let (dh, dk) = (self.dim_h, self.dim_k);
        LinearMap::from_fn(dh, dh, |rho| {
            let out = op.apply_matrix(rho);
            let out = match lifted {
                Some(p) => &out * p,
                None => out,
            };
            partial_trace_right(&out, dh, dk).expect("composite dimensions")
        })
    }
}

/// `J_{xy}(ρ) = tr_K[I_x(ρ) · I_H⊗P_y]`, tabulated as linear maps.
pub fn measured_bi_instrument(m: &MeasurementModel) -> BiInstrument<LinearMap> {
    let lifted: Vec<CMatrix> = (0..m.probe.len()).map(|y| m.lifted_probe(y)).collect();
    let grid = m
        .interaction
        .ops()
        .iter()
        .map(|op| lifted.iter().map(|p| m.pointer_map(op, Some(p))).collect())
        .collect();
    BiInstrument::from_grid_unchecked(
        m.interaction.outcomes().to_vec(),
        m.probe.outcomes().to_vec(),
        grid,
    )
}

/// `J²_y(ρ) = tr_K[Ī(ρ) · I_H⊗P_y]`, computed from the total interaction channel.
pub fn measured_instrument(m: &MeasurementModel) -> Instrument<LinearMap> {
    let total = m.interaction.total();
    let ops = (0..m.probe.len())
        .map(|y| m.pointer_map(&total, Some(&m.lifted_probe(y))))
        .collect();
    Instrument::from_parts_unchecked(m.probe.outcomes().to_vec(), ops)
}

/// `J¹_x(ρ) = tr_K[I_x(ρ)]`, the interaction reduced to `H`.
pub fn reduced_instrument(m: &MeasurementModel) -> Instrument<LinearMap> {
    let ops = m
        .interaction
        .ops()
        .iter()
        .map(|op| m.pointer_map(op, None))
        .collect();
    Instrument::from_parts_unchecked(m.interaction.outcomes().to_vec(), ops)
}

/// `Ĵ_{xy} = I_x*(I_H ⊗ P_y)`.
pub fn measured_bi_observable(m: &MeasurementModel) -> BiObservable {
    let lifted: Vec<CMatrix> = (0..m.probe.len()).map(|y| m.lifted_probe(y)).collect();
    let grid = m
        .interaction
        .ops()
        .iter()
        .map(|op| {
            lifted
                .iter()
                .map(|p| op.dual_matrix(p).hermitian_part())
                .collect()
        })
        .collect();
    BiObservable::from_grid_unchecked(
        m.interaction.outcomes().to_vec(),
        m.probe.outcomes().to_vec(),
        grid,
    )
}

/// `Ĵ²_y = Σ_i K_i† (I_H ⊗ P_y) K_i` over the Kraus operators of `Ī`.
pub fn measured_pointer_observable(m: &MeasurementModel) -> Observable {
    let kraus: Vec<&CMatrix> = m
        .interaction
        .ops()
        .iter()
        .flat_map(|op| op.kraus())
        .collect();
    let effects = (0..m.probe.len())
        .map(|y| {
            let p = m.lifted_probe(y);
            kraus
                .iter()
                .fold(CMatrix::zeros(m.dim_h, m.dim_h), |acc, k| {
                    acc + &(&k.adjoint() * &p) * k
                })
                .hermitian_part()
        })
        .collect();
    Observable::from_parts_unchecked(m.probe.outcomes().to_vec(), effects)
}

/// Channel `ρ ↦ Σ_i K_i ρ K_i† ⊗ ρ_i` with `K_i` acting on `H` and `ρ_i` states on `K`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSeparableChannel {
    kraus: Vec<CMatrix>,
    states: Vec<State>,
}

impl KrausSeparableChannel {
    pub fn new(kraus: Vec<CMatrix>, states: Vec<State>, tol: Tolerance) -> Result<Self> {
        if kraus.is_empty() || kraus.len() != states.len() {
            return Err(Error::invariant(
                "kraus list",
                "Kraus operators and probe states must pair up one to one",
            ));
        }
        let dh = kraus[0].rows();
        if kraus.iter().any(|k| k.shape() != (dh, dh)) {
            return Err(Error::dims("separable Kraus operators must be square on H"));
        }
        let dk = states[0].dim();
        if states.iter().any(|s| s.dim() != dk) {
            return Err(Error::dims("probe states must share one dimension"));
        }
        let gram = kraus
            .iter()
            .fold(CMatrix::zeros(dh, dh), |acc, k| acc + &k.adjoint() * k);
        let defect = gram.max_abs_diff(&CMatrix::identity(dh));
        if defect > tol.atol() {
            return Err(Error::invariant(
                "trace preservation",
                format!("Σ K†K differs from I by {defect:e}"),
            ));
        }
        Ok(KrausSeparableChannel { kraus, states })
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn dim_h(&self) -> usize {
        self.kraus[0].rows()
    }

    pub fn dim_k(&self) -> usize {
        self.states[0].dim()
    }

    /// `Σ_i K_i ρ K_i† ⊗ ρ_i` evaluated directly.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let n = self.dim_h() * self.dim_k();
        self.kraus
            .iter()
            .zip(&self.states)
            .fold(CMatrix::zeros(n, n), |acc, (k, s)| {
                acc + kron(&(&(k * rho) * &k.adjoint()), s.matrix())
            })
    }

    /// `Ī*(a ⊗ b) = Σ_i tr(ρ_i b) K_i† a K_i`.
    pub fn dual_product(&self, a: &CMatrix, b: &CMatrix) -> CMatrix {
        let dh = self.dim_h();
        self.kraus
            .iter()
            .zip(&self.states)
            .fold(CMatrix::zeros(dh, dh), |acc, (k, s)| {
                let w = trace_product(s.matrix(), b);
                acc + (&(&k.adjoint() * a) * k).scale_complex(w)
            })
    }

    /// Coefficients `tr(ρ_i P_y)`; rows indexed by Kraus index, columns by probe outcome.
    pub fn coefficients(&self, probe: &Observable) -> Result<StochasticMatrix> {
        if probe.dim() != self.dim_k() {
            return Err(Error::dims("probe does not act on the probe space"));
        }
        let sources = (0..self.kraus.len()).map(|i| format!("k{i}")).collect();
        let entries = self
            .states
            .iter()
            .map(|s| {
                probe
                    .effects()
                    .iter()
                    .map(|p| trace_product(s.matrix(), p.matrix()).re)
                    .collect()
            })
            .collect();
        Ok(StochasticMatrix::from_entries_unchecked(
            sources,
            probe.outcomes().to_vec(),
            entries,
        ))
    }

    /// `J²_y(ρ) = Σ_i tr(ρ_i P_y) K_i ρ K_i†`.
    pub fn pointer_instrument(&self, probe: &Observable) -> Result<Instrument<LinearMap>> {
        let coeffs = self.coefficients(probe)?;
        let dh = self.dim_h();
        let ops = (0..probe.len())
            .map(|y| {
                LinearMap::from_fn(dh, dh, |rho| {
                    self.kraus
                        .iter()
                        .enumerate()
                        .fold(CMatrix::zeros(dh, dh), |acc, (i, k)| {
                            acc + (&(k * rho) * &k.adjoint()).scale(coeffs.get(i, y))
                        })
                })
            })
            .collect();
        Ok(Instrument::from_parts_unchecked(
            probe.outcomes().to_vec(),
            ops,
        ))
    }

    /// `Ĵ²_y = Σ_i tr(ρ_i P_y) K_i† K_i`.
    pub fn pointer_observable(&self, probe: &Observable) -> Result<Observable> {
        let coeffs = self.coefficients(probe)?;
        let dh = self.dim_h();
        let effects = (0..probe.len())
            .map(|y| {
                self.kraus
                    .iter()
                    .enumerate()
                    .fold(CMatrix::zeros(dh, dh), |acc, (i, k)| {
                        acc + (&k.adjoint() * k).scale(coeffs.get(i, y))
                    })
                    .hermitian_part()
            })
            .collect();
        Ok(Observable::from_parts_unchecked(
            probe.outcomes().to_vec(),
            effects,
        ))
    }
}

/// Kraus form of a separable channel: `√p_k · K_i ⊗ |v_k⟩` for `ρ_i = Σ_k p_k |v_k⟩⟨v_k|`.
pub fn kraus_separable_total(ks: &KrausSeparableChannel, tol: Tolerance) -> Result<Channel> {
    let (dh, dk) = (ks.dim_h(), ks.dim_k());
    let mut kraus = Vec::new();
    for (k, s) in ks.kraus.iter().zip(&ks.states) {
        for (p, v) in psd_factors(s.matrix(), tol)? {
            kraus.push(kron(k, &v).scale(p.sqrt()));
        }
    }
    let op = Operation::new(kraus, tol)?;
    debug_assert_eq!((op.dim_in(), op.dim_out()), (dh, dh * dk));
    Channel::from_operation(op, tol)
}

/// Kraus operators `K_i = A_i ⊗ ψ_i`, i.e. `K_i φ = A_i φ ⊗ ψ_i`.
pub fn lifted_kraus(a_ops: &[CMatrix], psis: &[CMatrix]) -> Vec<CMatrix> {
    a_ops
        .iter()
        .zip(psis)
        .map(|(a, psi)| kron(a, psi))
        .collect()
}

/// Separable channel with pure probe states `|ψ_i⟩⟨ψ_i|`.
pub fn simple_kraus_separable(
    a_ops: Vec<CMatrix>,
    psis: &[CMatrix],
    tol: Tolerance,
) -> Result<KrausSeparableChannel> {
    if a_ops.len() != psis.len() {
        return Err(Error::invariant(
            "kraus list",
            "one probe vector per Kraus operator is required",
        ));
    }
    let states = psis
        .iter()
        .map(|psi| {
            if psi.cols() != 1 {
                return Err(Error::dims("probe vectors must be columns"));
            }
            let norm = psi.inner().norm();
            if (norm - 1.0).abs() > tol.atol() {
                return Err(Error::invariant(
                    "normalization",
                    format!("probe vector has norm {norm}"),
                ));
            }
            State::pure(psi, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    KrausSeparableChannel::new(a_ops, states, tol)
}

/// Holevo instrument into `H ⊗ K` with product states `α_x = β_x ⊗ γ_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct HolevoSeparableSpec {
    observable: Observable,
    betas: Vec<State>,
    gammas: Vec<State>,
}

impl HolevoSeparableSpec {
    pub fn new(observable: Observable, betas: Vec<State>, gammas: Vec<State>) -> Result<Self> {
        if betas.len() != observable.len() || gammas.len() != observable.len() {
            return Err(Error::invariant(
                "outcome space",
                "one β and one γ per outcome are required",
            ));
        }
        let dh = observable.dim();
        if betas.iter().any(|b| b.dim() != dh) {
            return Err(Error::dims("β states must live on H"));
        }
        let dk = gammas[0].dim();
        if gammas.iter().any(|g| g.dim() != dk) {
            return Err(Error::dims("γ states must share one dimension"));
        }
        Ok(HolevoSeparableSpec {
            observable,
            betas,
            gammas,
        })
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    pub fn betas(&self) -> &[State] {
        &self.betas
    }

    pub fn gammas(&self) -> &[State] {
        &self.gammas
    }

    pub fn dim_h(&self) -> usize {
        self.observable.dim()
    }

    pub fn dim_k(&self) -> usize {
        self.gammas[0].dim()
    }

    /// The underlying Holevo data with `α_x = β_x ⊗ γ_x`.
    pub fn holevo_spec(&self) -> HolevoSpec {
        let alphas = self
            .betas
            .iter()
            .zip(&self.gammas)
            .map(|(b, g)| State::from_matrix_unchecked(kron(b.matrix(), g.matrix())))
            .collect();
        HolevoSpec::new(self.observable.clone(), alphas).expect("lengths checked at construction")
    }

    /// The measurement model with the Holevo interaction and the given probe.
    pub fn model(&self, probe: Observable, tol: Tolerance) -> Result<MeasurementModel> {
        let interaction = holevo_instrument(&self.holevo_spec(), tol)?;
        MeasurementModel::new(self.dim_h(), self.dim_k(), interaction, probe, tol)
    }
}

/// Closed-form quantities of a Holevo-separable measurement model.
#[derive(Clone, Debug)]
pub struct HolevoModelQuantities {
    /// `a ↦ tr(β_x⊗γ_x a) A_x`, one Heisenberg map `L(H⊗K) → L(H)` per outcome.
    pub interaction_duals: Vec<LinearMap>,
    /// `J_{xy}(ρ) = tr(ρA_x) tr(γ_x P_y) β_x`.
    pub bi_instrument: BiInstrument<LinearMap>,
    /// `J²_y(ρ) = Σ_x tr(ρA_x) tr(γ_x P_y) β_x`.
    pub instrument: Instrument<LinearMap>,
    /// `J¹ = H^{(A,β)}`.
    pub reduced: Instrument,
    /// `Ĵ_{xy} = tr(γ_x P_y) A_x`.
    pub bi_observable: BiObservable,
    /// `Ĵ²_y = Σ_x tr(γ_x P_y) A_x`.
    pub pointer_observable: Observable,
    /// Post-processing kernel `tr(γ_x P_y)` taking `A` to `Ĵ²`.
    pub kernel: StochasticMatrix,
}

pub fn holevo_model_quantities(
    spec: &HolevoSeparableSpec,
    probe: &Observable,
    tol: Tolerance,
) -> Result<HolevoModelQuantities> {
    if probe.dim() != spec.dim_k() {
        return Err(Error::dims(format!(
            "probe on {} for a probe space of dimension {}",
            probe.dim(),
            spec.dim_k()
        )));
    }
    let (dh, dk) = (spec.dim_h(), spec.dim_k());
    let a = &spec.observable;
    let nx = a.len();
    let ny = probe.len();

    let kernel_entries: Vec<Vec<f64>> = spec
        .gammas
        .iter()
        .map(|g| {
            probe
                .effects()
                .iter()
                .map(|p| trace_product(g.matrix(), p.matrix()).re)
                .collect()
        })
        .collect();
    let kernel = StochasticMatrix::from_entries_unchecked(
        a.outcomes().to_vec(),
        probe.outcomes().to_vec(),
        kernel_entries,
    );

    let interaction_duals = (0..nx)
        .map(|x| {
            let alpha = kron(spec.betas[x].matrix(), spec.gammas[x].matrix());
            let ax = a.effects()[x].matrix().clone();
            LinearMap::from_fn(dh * dk, dh, move |m| {
                ax.scale_complex(trace_product(&alpha, m))
            })
        })
        .collect();

    let grid: Vec<Vec<LinearMap>> = (0..nx)
        .map(|x| {
            (0..ny)
                .map(|y| {
                    let w = kernel.get(x, y);
                    let ax = a.effects()[x].matrix();
                    let beta = spec.betas[x].matrix();
                    LinearMap::from_fn(dh, dh, |rho| beta.scale_complex(trace_product(rho, ax) * w))
                })
                .collect()
        })
        .collect();
    let bi_instrument =
        BiInstrument::from_grid_unchecked(a.outcomes().to_vec(), probe.outcomes().to_vec(), grid);

    let instrument_ops = (0..ny)
        .map(|y| {
            LinearMap::from_fn(dh, dh, |rho| {
                (0..nx).fold(CMatrix::zeros(dh, dh), |acc, x| {
                    let p = trace_product(rho, a.effects()[x].matrix());
                    acc + spec.betas[x].matrix().scale_complex(p * kernel.get(x, y))
                })
            })
        })
        .collect();
    let instrument = Instrument::from_parts_unchecked(probe.outcomes().to_vec(), instrument_ops);

    let reduced = holevo_instrument(&HolevoSpec::new(a.clone(), spec.betas.clone())?, tol)?;

    let bi_grid = (0..nx)
        .map(|x| {
            (0..ny)
                .map(|y| a.effects()[x].matrix().scale(kernel.get(x, y)))
                .collect()
        })
        .collect();
    let bi_observable = BiObservable::from_grid_unchecked(
        a.outcomes().to_vec(),
        probe.outcomes().to_vec(),
        bi_grid,
    );

    let pointer_observable = crate::effects::post_process(a, &kernel)?;

    Ok(HolevoModelQuantities {
        interaction_duals,
        bi_instrument,
        instrument,
        reduced,
        bi_observable,
        pointer_observable,
        kernel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{dual_map_distance, map_distance};
    use crate::effects::marginals;
    use crate::matkernel::{hermitian_basis, C64};
    use crate::scenario::random::{
        random_channel, random_instrument, random_observable, random_pure_state, random_state,
        random_unit_vector, InstanceRng,
    };

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn random_model(dh: usize, dk: usize, rng: &mut InstanceRng) -> MeasurementModel {
        let ins = random_instrument(dh, dh * dk, 2, rng).unwrap();
        let probe = random_observable(dk, 3, rng).unwrap();
        MeasurementModel::new(dh, dk, ins, probe, tol()).unwrap()
    }

    fn random_separable(
        dh: usize,
        dk: usize,
        n: usize,
        rng: &mut InstanceRng,
    ) -> KrausSeparableChannel {
        let ch = random_channel(dh, dh, n, rng).unwrap();
        let states = (0..n).map(|_| random_state(dk, rng)).collect();
        KrausSeparableChannel::new(ch.operation().kraus().to_vec(), states, tol()).unwrap()
    }

    #[test]
    fn model_validation() {
        let mut rng = InstanceRng::new(0);
        let ins = random_instrument(2, 4, 2, &mut rng).unwrap();
        assert!(MeasurementModel::new(2, 3, ins.clone(), Observable::trivial(3), tol()).is_err());
        assert!(MeasurementModel::new(2, 2, ins, Observable::trivial(3), tol()).is_err());
    }

    #[test]
    fn trivial_probe_reduces_to_partial_trace() {
        let mut rng = InstanceRng::new(1);
        let m = random_model(2, 2, &mut rng)
            .with_probe(Observable::trivial(2), tol())
            .unwrap();
        let bi = measured_bi_instrument(&m);
        let reduced = reduced_instrument(&m);
        for x in 0..2 {
            assert!(map_distance(bi.op(x, 0), &reduced.ops()[x]) < 1e-14);
        }
        let j2 = measured_instrument(&m);
        assert_eq!(j2.len(), 1);
        assert!(map_distance(&j2.ops()[0], &reduced.total()) < 1e-14);

        let hat = measured_bi_observable(&m);
        let ihat = m.interaction().measured_observable();
        for x in 0..2 {
            assert!(
                hat.effect(x, 0)
                    .matrix()
                    .max_abs_diff(ihat.effects()[x].matrix())
                    < 1e-13
            );
        }
        assert!(measured_pointer_observable(&m).max_abs_diff(&Observable::trivial(2)) < 1e-12);
    }

    #[test]
    fn bi_instrument_matches_index_level_oracle() {
        let mut rng = InstanceRng::new(2);
        let m = random_model(2, 2, &mut rng);
        let bi = measured_bi_instrument(&m);
        let rho = random_state(2, &mut rng);
        for (x, op) in m.interaction().ops().iter().enumerate() {
            for y in 0..m.probe().len() {
                let prod = &op.apply_matrix(rho.matrix()) * &m.lifted_probe(y);
                let rows = prod.to_rows();
                let got = bi.op(x, y).apply_matrix(rho.matrix());
                for i in 0..2 {
                    for j in 0..2 {
                        let oracle: C64 = (0..2).map(|k| rows[2 * i + k][2 * j + k]).sum();
                        assert!((got.get(i, j) - oracle).norm() < 1e-14);
                    }
                }
            }
        }
        let total = bi.to_instrument().total();
        let out = total.apply_matrix(rho.matrix());
        assert!((out.trace().re - 1.0).abs() < 1e-12);

        let (j1, j2) = bi.marginals();
        assert!(j1.map_distance(&reduced_instrument(&m)) < 1e-13);
        assert!(j2.map_distance(&measured_instrument(&m)) < 1e-13);
    }

    #[test]
    fn bi_observable_is_trace_dual() {
        let mut rng = InstanceRng::new(3);
        let m = random_model(2, 3, &mut rng);
        let hat = measured_bi_observable(&m);
        hat.to_observable().validate(tol()).unwrap();
        let bi = measured_bi_instrument(&m);
        let rho = random_state(2, &mut rng);
        for x in 0..2 {
            for y in 0..3 {
                let lhs = trace_product(rho.matrix(), hat.effect(x, y).matrix());
                let rhs = bi.op(x, y).apply_matrix(rho.matrix()).trace();
                assert!((lhs - rhs).norm() < 1e-13);
            }
        }
        let (m1, _) = marginals(&hat);
        let other = m
            .with_probe(random_observable(3, 2, &mut rng).unwrap(), tol())
            .unwrap();
        let (m1b, _) = marginals(&measured_bi_observable(&other));
        assert!(m1.max_abs_diff(&m1b) < 1e-13);
        assert!(m1.max_abs_diff(&m.interaction().measured_observable()) < 1e-13);
    }

    #[test]
    fn pointer_observable_is_measured_effect_of_pointer_instrument() {
        let mut rng = InstanceRng::new(4);
        let m = random_model(3, 2, &mut rng);
        let pointer = measured_pointer_observable(&m);
        pointer.validate(tol()).unwrap();
        assert!(pointer.max_abs_diff(&measured_instrument(&m).measured_observable()) < 1e-12);
        let (_, m2) = marginals(&measured_bi_observable(&m));
        assert!(pointer.max_abs_diff(&m2) < 1e-12);
    }

    #[test]
    fn kraus_separable_examples() {
        let mut rng = InstanceRng::new(5);
        let pure = random_pure_state(2, &mut rng);
        let ks = KrausSeparableChannel::new(vec![CMatrix::identity(2)], vec![pure.clone()], tol())
            .unwrap();
        let ch = kraus_separable_total(&ks, tol()).unwrap();
        let rho = random_state(2, &mut rng);
        let expect = kron(rho.matrix(), pure.matrix());
        assert!(ch.apply_matrix(rho.matrix()).max_abs_diff(&expect) < 1e-13);
        assert!(
            ks.dual_product(&CMatrix::identity(2), &CMatrix::identity(2))
                .max_abs_diff(&CMatrix::identity(2))
                < 1e-14
        );

        let ks = random_separable(2, 3, 3, &mut rng);
        let ch = kraus_separable_total(&ks, tol()).unwrap();
        let formula = LinearMap::from_fn(2, 6, |r| ks.apply(r));
        assert!(map_distance(&ch, &formula) < 1e-13);
        for a in hermitian_basis(2) {
            for b in hermitian_basis(3) {
                let generic = ch.dual_matrix(&kron(&a, &b));
                assert!(generic.max_abs_diff(&ks.dual_product(&a, &b)) < 1e-13);
            }
        }

        let bad =
            KrausSeparableChannel::new(vec![CMatrix::identity(2).scale(0.5)], vec![pure], tol());
        assert_eq!(
            bad.unwrap_err().invariant_name(),
            Some("trace preservation")
        );
    }

    #[test]
    fn kraus_separable_pointer_formulas() {
        let mut rng = InstanceRng::new(6);
        let ks = random_separable(2, 2, 3, &mut rng);
        let probe = random_observable(2, 3, &mut rng).unwrap();
        let ch = kraus_separable_total(&ks, tol()).unwrap();
        let model =
            MeasurementModel::new(2, 2, Instrument::from_channel(&ch), probe.clone(), tol())
                .unwrap();
        let generic_j2 = measured_instrument(&model);
        assert!(generic_j2.map_distance(&ks.pointer_instrument(&probe).unwrap()) < 1e-13);
        let generic_hat = measured_pointer_observable(&model);
        assert!(generic_hat.max_abs_diff(&ks.pointer_observable(&probe).unwrap()) < 1e-13);
        assert!(ks.coefficients(&probe).unwrap().row_sum_defect() < 1e-13);
    }

    #[test]
    fn simple_separable_examples() {
        let ket0 = CMatrix::basis_ket(2, 0);
        let ks = simple_kraus_separable(
            vec![CMatrix::identity(2)],
            std::slice::from_ref(&ket0),
            tol(),
        )
        .unwrap();
        let ch = kraus_separable_total(&ks, tol()).unwrap();
        let mut rng = InstanceRng::new(7);
        let rho = random_state(2, &mut rng);
        let expect = kron(rho.matrix(), &CMatrix::diag(&[1.0, 0.0]));
        assert!(ch.apply_matrix(rho.matrix()).max_abs_diff(&expect) < 1e-14);

        // K_i†(φ1⊗φ2) = ⟨ψ_i, φ2⟩ A_i† φ1
        let a_ops = random_channel(2, 2, 2, &mut rng)
            .unwrap()
            .operation()
            .kraus()
            .to_vec();
        let psis = vec![
            random_unit_vector(3, &mut rng),
            random_unit_vector(3, &mut rng),
        ];
        let lifted = lifted_kraus(&a_ops, &psis);
        let phi1 = crate::scenario::random::ginibre(2, 1, &mut rng);
        let phi2 = crate::scenario::random::ginibre(3, 1, &mut rng);
        for (i, k) in lifted.iter().enumerate() {
            let lhs = &k.adjoint() * &kron(&phi1, &phi2);
            let inner = (&psis[i].adjoint() * &phi2).get(0, 0);
            let rhs = (&a_ops[i].adjoint() * &phi1).scale_complex(inner);
            assert!(lhs.max_abs_diff(&rhs) < 1e-13);
        }

        let ks = simple_kraus_separable(a_ops.clone(), &psis, tol()).unwrap();
        let lifted_ch = Channel::new(lifted, tol()).unwrap();
        let formula = LinearMap::from_fn(2, 6, |r| ks.apply(r));
        assert!(map_distance(&lifted_ch, &formula) < 1e-13);

        assert!(
            simple_kraus_separable(a_ops, &[psis[0].scale(2.0), psis[1].clone()], tol()).is_err()
        );
    }

    #[test]
    fn holevo_separable_quantities_match_generic_pipeline() {
        let mut rng = InstanceRng::new(8);
        let a = random_observable(2, 3, &mut rng).unwrap();
        let betas = (0..3).map(|_| random_state(2, &mut rng)).collect();
        let gammas = (0..3).map(|_| random_state(2, &mut rng)).collect();
        let spec = HolevoSeparableSpec::new(a.clone(), betas, gammas).unwrap();
        let probe = random_observable(2, 2, &mut rng).unwrap();
        let q = holevo_model_quantities(&spec, &probe, tol()).unwrap();
        let model = spec.model(probe, tol()).unwrap();

        for (x, op) in model.interaction().ops().iter().enumerate() {
            assert!(dual_map_distance(op, &q.interaction_duals[x].dual()) < 1e-13);
        }
        assert!(measured_bi_instrument(&model).map_distance(&q.bi_instrument) < 1e-13);
        assert!(measured_instrument(&model).map_distance(&q.instrument) < 1e-13);
        assert!(reduced_instrument(&model).map_distance(&q.reduced) < 1e-13);
        assert!(measured_bi_observable(&model).max_abs_diff(&q.bi_observable) < 1e-13);
        assert!(measured_pointer_observable(&model).max_abs_diff(&q.pointer_observable) < 1e-13);
        assert!(q.kernel.row_sum_defect() < 1e-13);
    }

    #[test]
    fn holevo_separable_special_cases() {
        let mut rng = InstanceRng::new(9);
        let a = random_observable(2, 3, &mut rng).unwrap();
        let betas: Vec<State> = (0..3).map(|_| random_state(2, &mut rng)).collect();
        let gamma = random_state(3, &mut rng);
        let spec = HolevoSeparableSpec::new(a, betas, vec![gamma.clone(); 3]).unwrap();

        let q = holevo_model_quantities(&spec, &Observable::trivial(3), tol()).unwrap();
        assert!(q.pointer_observable.max_abs_diff(&Observable::trivial(2)) < 1e-12);

        let probe = random_observable(3, 2, &mut rng).unwrap();
        let q = holevo_model_quantities(&spec, &probe, tol()).unwrap();
        for (y, p) in probe.effects().iter().enumerate() {
            let w = trace_product(gamma.matrix(), p.matrix()).re;
            let expect = CMatrix::identity(2).scale(w);
            assert!(
                q.pointer_observable.effects()[y]
                    .matrix()
                    .max_abs_diff(&expect)
                    < 1e-12
            );
        }
        assert!(holevo_model_quantities(&spec, &Observable::trivial(2), tol()).is_err());
    }
}
