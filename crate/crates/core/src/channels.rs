//! Operations in Kraus form, channels, dual maps and conditioning.
//!
//! Two representations of linear maps share the [`QuantumMap`] trait:
//! [`Operation`] (Kraus list) and [`LinearMap`] (transfer matrix obtained by
//! evaluating a map on matrix units). Kraus lists are never compared
//! directly; [`map_distance`] compares two maps by their action on a
//! Hermitian spanning set.

use crate::effects::{Effect, Observable};
use crate::error::{Error, Result};
use crate::matkernel::{hermitian_basis, is_psd, CMatrix, Tolerance, C64, ZERO};

/// A linear map `L(C^{dim_in}) → L(C^{dim_out})` together with its dual.
pub trait QuantumMap: Clone {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;

    /// Schrödinger-picture action on an arbitrary `dim_in × dim_in` operator.
    fn apply_matrix(&self, m: &CMatrix) -> CMatrix;

    /// Heisenberg-picture action: the unique map with `tr[ρ·dual(a)] = tr[apply(ρ)·a]`.
    fn dual_matrix(&self, a: &CMatrix) -> CMatrix;

    /// Pointwise sum of two maps with equal dimensions.
    fn combine(&self, other: &Self) -> Self;

    /// Sequential product: `self` first, then `next`.
    fn then(&self, next: &Self) -> Self;

    /// `Σ` over a nonempty list of maps.
    fn sum_all(maps: &[Self]) -> Self {
        let (first, rest) = maps.split_first().expect("nonempty map list");
        rest.iter().fold(first.clone(), |acc, m| acc.combine(m))
    }

    fn to_linear_map(&self) -> LinearMap {
        LinearMap::from_fn(self.dim_in(), self.dim_out(), |m| self.apply_matrix(m))
    }
}

/// Largest entrywise deviation between two maps over a Hermitian spanning set of inputs.
pub fn map_distance<A: QuantumMap, B: QuantumMap>(a: &A, b: &B) -> f64 {
    if a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out() {
        return f64::INFINITY;
    }
    hermitian_basis(a.dim_in())
        .iter()
        .map(|e| a.apply_matrix(e).max_abs_diff(&b.apply_matrix(e)))
        .fold(0.0, f64::max)
}

/// Largest entrywise deviation between two dual maps over a Hermitian spanning set.
pub fn dual_map_distance<A: QuantumMap, B: QuantumMap>(a: &A, b: &B) -> f64 {
    if a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out() {
        return f64::INFINITY;
    }
    hermitian_basis(a.dim_out())
        .iter()
        .map(|e| a.dual_matrix(e).max_abs_diff(&b.dual_matrix(e)))
        .fold(0.0, f64::max)
}

/// Trace-non-increasing completely positive map `ρ ↦ Σ K_i ρ K_i†`.
#[derive(Clone, Debug, PartialEq)]
pub struct Operation {
    kraus: Vec<CMatrix>,
    dim_in: usize,
    dim_out: usize,
}

impl Operation {
    pub fn new(kraus: Vec<CMatrix>, tol: Tolerance) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| {
            Error::invariant(
                "kraus list",
                "an operation needs at least one Kraus operator",
            )
        })?;
        let (dim_out, dim_in) = first.shape();
        if kraus.iter().any(|k| k.shape() != (dim_out, dim_in)) {
            return Err(Error::dims("Kraus operators must share one shape"));
        }
        let op = Operation {
            kraus,
            dim_in,
            dim_out,
        };
        let residual = &CMatrix::identity(dim_in) - &op.kraus_gram();
        if !is_psd(&residual, tol) {
            return Err(Error::invariant(
                "trace non-increase",
                "Σ K†K exceeds the identity",
            ));
        }
        Ok(op)
    }

    pub(crate) fn from_kraus_unchecked(kraus: Vec<CMatrix>, dim_in: usize, dim_out: usize) -> Self {
        Operation {
            kraus,
            dim_in,
            dim_out,
        }
    }

    /// Zero operation, represented by a single zero Kraus operator.
    pub fn zero(dim_in: usize, dim_out: usize) -> Self {
        Operation {
            kraus: vec![CMatrix::zeros(dim_out, dim_in)],
            dim_in,
            dim_out,
        }
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// `Σ K_i† K_i`.
    pub fn kraus_gram(&self) -> CMatrix {
        self.kraus
            .iter()
            .fold(CMatrix::zeros(self.dim_in, self.dim_in), |acc, k| {
                acc + &k.adjoint() * k
            })
    }

    /// Entrywise distance of `Σ K†K` from the identity.
    pub fn channel_defect(&self) -> f64 {
        self.kraus_gram()
            .max_abs_diff(&CMatrix::identity(self.dim_in))
    }

    pub fn is_channel(&self, tol: Tolerance) -> bool {
        self.channel_defect() <= tol.atol()
    }

    pub fn validate_channel(&self, tol: Tolerance) -> Result<()> {
        let defect = self.channel_defect();
        if defect > tol.atol() {
            return Err(Error::invariant(
                "trace preservation",
                format!("Σ K†K differs from I by {defect:e}"),
            ));
        }
        Ok(())
    }

    /// Same map with every Kraus operator multiplied by `factor`.
    pub fn scaled_kraus(&self, factor: f64) -> Operation {
        Operation {
            kraus: self.kraus.iter().map(|k| k.scale(factor)).collect(),
            dim_in: self.dim_in,
            dim_out: self.dim_out,
        }
    }

    /// `ρ ↦ Σ K ρ K†` on a state.
    pub fn apply(&self, rho: &crate::effects::State) -> Result<CMatrix> {
        if rho.dim() != self.dim_in {
            return Err(Error::dims(format!(
                "operation expects input dimension {}, state has {}",
                self.dim_in,
                rho.dim()
            )));
        }
        Ok(self.apply_matrix(rho.matrix()))
    }

    /// `a ↦ Σ K† a K`, symmetrised.
    pub fn dual_apply(&self, a: &Effect) -> Result<Effect> {
        if a.dim() != self.dim_out {
            return Err(Error::dims(format!(
                "dual map expects effects on dimension {}, got {}",
                self.dim_out,
                a.dim()
            )));
        }
        Ok(Effect::from_matrix_unchecked(
            self.dual_matrix(a.matrix()).hermitian_part(),
        ))
    }

    /// The effect `a` with `tr[I(ρ)] = tr(ρa)`, i.e. `I*(I)`.
    pub fn measured_effect(&self) -> Effect {
        Effect::from_matrix_unchecked(self.kraus_gram().hermitian_part())
    }
}

impl QuantumMap for Operation {
    fn dim_in(&self) -> usize {
        self.dim_in
    }

    fn dim_out(&self) -> usize {
        self.dim_out
    }

    fn apply_matrix(&self, m: &CMatrix) -> CMatrix {
        self.kraus
            .iter()
            .fold(CMatrix::zeros(self.dim_out, self.dim_out), |acc, k| {
                acc + &(k * m) * &k.adjoint()
            })
    }

    fn dual_matrix(&self, a: &CMatrix) -> CMatrix {
        self.kraus
            .iter()
            .fold(CMatrix::zeros(self.dim_in, self.dim_in), |acc, k| {
                acc + &(&k.adjoint() * a) * k
            })
    }

    fn combine(&self, other: &Self) -> Self {
        assert_eq!(
            (self.dim_in, self.dim_out),
            (other.dim_in, other.dim_out),
            "combined operations differ in shape"
        );
        let mut kraus = self.kraus.clone();
        kraus.extend(other.kraus.iter().cloned());
        Operation {
            kraus,
            dim_in: self.dim_in,
            dim_out: self.dim_out,
        }
    }

    fn then(&self, next: &Self) -> Self {
        assert_eq!(
            self.dim_out, next.dim_in,
            "sequential product of non-chaining operations"
        );
        let kraus = self
            .kraus
            .iter()
            .flat_map(|k| next.kraus.iter().map(move |l| l * k))
            .collect();
        Operation {
            kraus,
            dim_in: self.dim_in,
            dim_out: next.dim_out,
        }
    }
}

/// Trace-preserving operation.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel(Operation);

impl Channel {
    pub fn new(kraus: Vec<CMatrix>, tol: Tolerance) -> Result<Self> {
        Channel::from_operation(Operation::new(kraus, tol)?, tol)
    }

    pub fn from_operation(op: Operation, tol: Tolerance) -> Result<Self> {
        op.validate_channel(tol)?;
        Ok(Channel(op))
    }

    pub(crate) fn from_kraus_unchecked(kraus: Vec<CMatrix>, dim_in: usize, dim_out: usize) -> Self {
        Channel(Operation::from_kraus_unchecked(kraus, dim_in, dim_out))
    }

    pub fn identity(n: usize) -> Self {
        Channel(Operation::from_kraus_unchecked(
            vec![CMatrix::identity(n)],
            n,
            n,
        ))
    }

    /// `ρ ↦ UρU†` for a unitary (or isometry) `U`.
    pub fn unitary(u: CMatrix, tol: Tolerance) -> Result<Self> {
        Channel::new(vec![u], tol)
    }

    pub fn operation(&self) -> &Operation {
        &self.0
    }

    pub fn into_operation(self) -> Operation {
        self.0
    }
}

impl QuantumMap for Channel {
    fn dim_in(&self) -> usize {
        self.0.dim_in
    }

    fn dim_out(&self) -> usize {
        self.0.dim_out
    }

    fn apply_matrix(&self, m: &CMatrix) -> CMatrix {
        self.0.apply_matrix(m)
    }

    fn dual_matrix(&self, a: &CMatrix) -> CMatrix {
        self.0.dual_matrix(a)
    }

    fn combine(&self, other: &Self) -> Self {
        Channel(self.0.combine(&other.0))
    }

    fn then(&self, next: &Self) -> Self {
        Channel(self.0.then(&next.0))
    }
}

/// A linear map stored as its transfer matrix on row-major vectorised operators.
///
/// Column `i·dim_in + j` holds the row-major vectorisation of the image of
/// the matrix unit `|i⟩⟨j|`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    dim_in: usize,
    dim_out: usize,
    transfer: CMatrix,
}

impl LinearMap {
    /// Tabulates `f` on the matrix units. `f` must be linear.
    pub fn from_fn(dim_in: usize, dim_out: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let mut entries = vec![ZERO; dim_out * dim_out * dim_in * dim_in];
        let ncols = dim_in * dim_in;
        for i in 0..dim_in {
            for j in 0..dim_in {
                let image = f(&CMatrix::unit(dim_in, dim_in, i, j));
                assert_eq!(
                    image.shape(),
                    (dim_out, dim_out),
                    "map image has the wrong shape"
                );
                for k in 0..dim_out {
                    for l in 0..dim_out {
                        entries[(k * dim_out + l) * ncols + i * dim_in + j] = image.get(k, l);
                    }
                }
            }
        }
        let transfer = CMatrix::from_row_major(dim_out * dim_out, ncols, entries)
            .expect("finite transfer matrix");
        LinearMap {
            dim_in,
            dim_out,
            transfer,
        }
    }

    pub fn transfer(&self) -> &CMatrix {
        &self.transfer
    }

    /// The dual of this map, viewed as a map in its own right.
    pub fn dual(&self) -> LinearMap {
        LinearMap::from_fn(self.dim_out, self.dim_in, |a| self.dual_matrix(a))
    }
}

fn vectorize(m: &CMatrix) -> CMatrix {
    CMatrix::ket(&m.to_rows().concat())
}

fn unvectorize(v: &CMatrix, n: usize) -> CMatrix {
    let entries: Vec<C64> = (0..n * n).map(|k| v.get(k, 0)).collect();
    CMatrix::from_row_major(n, n, entries).expect("finite entries")
}

impl QuantumMap for LinearMap {
    fn dim_in(&self) -> usize {
        self.dim_in
    }

    fn dim_out(&self) -> usize {
        self.dim_out
    }

    fn apply_matrix(&self, m: &CMatrix) -> CMatrix {
        unvectorize(&(&self.transfer * &vectorize(m)), self.dim_out)
    }

    fn dual_matrix(&self, a: &CMatrix) -> CMatrix {
        // tr[ρ b] = tr[Φ(ρ) a]  ⇒  b_{ji} = Σ_{kl} T[(k,l),(i,j)] a_{lk}
        let (n_in, n_out) = (self.dim_in, self.dim_out);
        let mut b = vec![ZERO; n_in * n_in];
        for i in 0..n_in {
            for j in 0..n_in {
                let col = i * n_in + j;
                let mut acc = ZERO;
                for k in 0..n_out {
                    for l in 0..n_out {
                        acc += self.transfer.get(k * n_out + l, col) * a.get(l, k);
                    }
                }
                b[j * n_in + i] = acc;
            }
        }
        CMatrix::from_row_major(n_in, n_in, b).expect("finite entries")
    }

    fn combine(&self, other: &Self) -> Self {
        assert_eq!(
            (self.dim_in, self.dim_out),
            (other.dim_in, other.dim_out),
            "combined maps differ in shape"
        );
        LinearMap {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            transfer: &self.transfer + &other.transfer,
        }
    }

    fn then(&self, next: &Self) -> Self {
        assert_eq!(
            self.dim_out, next.dim_in,
            "sequential product of non-chaining maps"
        );
        LinearMap {
            dim_in: self.dim_in,
            dim_out: next.dim_out,
            transfer: &next.transfer * &self.transfer,
        }
    }

    fn to_linear_map(&self) -> LinearMap {
        self.clone()
    }
}

/// `Σ K ρ K†`.
pub fn apply(op: &Operation, rho: &crate::effects::State) -> Result<CMatrix> {
    op.apply(rho)
}

/// `I*(a) = Σ K† a K`.
pub fn dual_apply(op: &Operation, a: &Effect) -> Result<Effect> {
    op.dual_apply(a)
}

pub fn measured_effect(op: &Operation) -> Effect {
    op.measured_effect()
}

/// `I∘J`: first `i`, then `j`; Kraus operators `L_b K_a`.
pub fn sequential_product(i: &Operation, j: &Operation) -> Result<Operation> {
    if i.dim_out != j.dim_in {
        return Err(Error::dims(format!(
            "first operation outputs dimension {}, second expects {}",
            i.dim_out, j.dim_in
        )));
    }
    Ok(i.then(j))
}

/// `(b|I) = I*(b)`.
pub fn condition_effect(ch: &Channel, b: &Effect) -> Result<Effect> {
    ch.operation().dual_apply(b)
}

/// `(B|I)_x = I*(B_x)`.
pub fn condition_observable(ch: &Channel, b: &Observable) -> Result<Observable> {
    if b.dim() != ch.dim_out() {
        return Err(Error::dims(format!(
            "channel outputs dimension {}, observable lives on {}",
            ch.dim_out(),
            b.dim()
        )));
    }
    let effects = b
        .effects()
        .iter()
        .map(|e| ch.operation().dual_matrix(e.matrix()).hermitian_part())
        .collect();
    Ok(Observable::from_parts_unchecked(
        b.outcomes().to_vec(),
        effects,
    ))
}

/// Completes a sub-normalised family `Σ b_x ≤ I` to the observable
/// `B_x = b_x + (I - Σ b_x)/n`, `n` the number of effects.
///
/// Labels are `"0"`, `"1"`, ... in input order.
pub fn complete_subnormalized(ch: &Channel, bs: &[Effect], tol: Tolerance) -> Result<Observable> {
    let n = bs.len();
    if n == 0 {
        return Err(Error::invariant("outcome space", "no effects to complete"));
    }
    let d = ch.dim_out();
    if let Some(b) = bs.iter().find(|b| b.dim() != d) {
        return Err(Error::dims(format!(
            "effect on dimension {} for channel output {d}",
            b.dim()
        )));
    }
    let sum = CMatrix::sum(bs.iter().map(Effect::matrix)).expect("nonempty");
    let residual = &CMatrix::identity(d) - &sum;
    if !is_psd(&residual, tol) {
        return Err(Error::invariant(
            "subnormalization",
            "Σ b_x is not below the identity",
        ));
    }
    let share = residual.scale(1.0 / n as f64);
    let effects = bs.iter().map(|b| b.matrix() + &share).collect();
    let labels = (0..n).map(|i| i.to_string()).collect();
    Ok(Observable::from_parts_unchecked(labels, effects))
}
