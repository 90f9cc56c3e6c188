//! States, effects and observables together with the classical operations on
//! outcome spaces: distributions, post-processing, parts, marginals and
//! affine combinations.
//!
//! Outcome labels are strings. Their declaration order fixes the index
//! order of effect lists, bi-observable grids and stochastic matrices.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::matkernel::{is_effect, is_psd, trace_product, CMatrix, Tolerance};

/// Label for the single outcome of a trivial observable `{I}`.
pub const TRIVIAL_LABEL: &str = "1";

/// Label of the pair `(x, y)` in a product outcome space.
pub fn pair_label(x: &str, y: &str) -> String {
    format!("{x}⊗{y}")
}

fn require_square(m: &CMatrix) -> Result<usize> {
    if m.is_square() {
        Ok(m.rows())
    } else {
        Err(Error::dims(format!(
            "expected a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )))
    }
}

fn check_labels(labels: &[String]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::invariant("outcome space", "outcome space is empty"));
    }
    let mut seen = BTreeSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::invariant(
                "outcome space",
                format!("duplicate label `{l}`"),
            ));
        }
    }
    Ok(())
}

fn label_index(labels: &[String], label: &str) -> Result<usize> {
    labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

/// Density operator: positive with unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct State(CMatrix);

impl State {
    pub fn new(m: CMatrix, tol: Tolerance) -> Result<Self> {
        require_square(&m)?;
        if !is_psd(&m, tol) {
            return Err(Error::invariant(
                "positivity",
                "state is not a positive operator",
            ));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > tol.atol() || tr.im.abs() > tol.atol() {
            return Err(Error::invariant(
                "trace",
                format!("state has trace {tr}, expected 1"),
            ));
        }
        Ok(State(m))
    }

    /// Normalises a nonzero positive operator to unit trace.
    pub fn normalized(m: &CMatrix, tol: Tolerance) -> Result<Self> {
        let tr = m.trace().re;
        if tr <= tol.atol() {
            return Err(Error::invariant(
                "trace",
                "cannot normalise an operator with vanishing trace",
            ));
        }
        State::new(m.hermitian_part().scale(tr.recip()), tol)
    }

    /// Maximally mixed state `I/n`.
    pub fn maximally_mixed(n: usize) -> Self {
        State(CMatrix::identity(n).scale(1.0 / n as f64))
    }

    /// Pure state `|v⟩⟨v|` for a unit vector `v`.
    pub fn pure(v: &CMatrix, tol: Tolerance) -> Result<Self> {
        if v.cols() != 1 {
            return Err(Error::dims("pure state needs a column vector"));
        }
        State::new(CMatrix::projector(v), tol)
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        State(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }
}

/// Operator `a` with `0 ≤ a ≤ I`.
#[derive(Clone, Debug, PartialEq)]
pub struct Effect(CMatrix);

impl Effect {
    pub fn new(m: CMatrix, tol: Tolerance) -> Result<Self> {
        require_square(&m)?;
        if !is_effect(&m, tol) {
            return Err(Error::invariant(
                "effect bound",
                "operator is not between 0 and I",
            ));
        }
        Ok(Effect(m))
    }

    pub fn identity(n: usize) -> Self {
        Effect(CMatrix::identity(n))
    }

    pub fn zero(n: usize) -> Self {
        Effect(CMatrix::zeros(n, n))
    }

    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Effect(m)
    }

    /// `I - a`.
    pub fn complement(&self) -> Self {
        Effect(&CMatrix::identity(self.dim()) - &self.0)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }
}

/// Finite family of effects summing to the identity (a POVM).
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    outcomes: Vec<String>,
    effects: Vec<Effect>,
}

impl Observable {
    pub fn new(outcomes: Vec<String>, effects: Vec<CMatrix>, tol: Tolerance) -> Result<Self> {
        check_labels(&outcomes)?;
        if outcomes.len() != effects.len() {
            return Err(Error::invariant(
                "outcome space",
                format!("{} labels for {} effects", outcomes.len(), effects.len()),
            ));
        }
        let dim = require_square(&effects[0])?;
        if effects.iter().any(|e| e.shape() != (dim, dim)) {
            return Err(Error::dims(
                "effects of an observable must share one dimension",
            ));
        }
        let effects = outcomes
            .iter()
            .zip(effects)
            .map(|(l, m)| {
                Effect::new(m, tol).map_err(|e| match e {
                    Error::Invariant { invariant, detail } => {
                        Error::invariant(invariant, format!("effect `{l}`: {detail}"))
                    }
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let obs = Observable { outcomes, effects };
        let defect = obs.normalization_defect();
        if defect > tol.atol() {
            return Err(Error::invariant(
                "normalization",
                format!("effects sum to I only within {defect:e}"),
            ));
        }
        Ok(obs)
    }

    /// Convenience: labels `"0"`, `"1"`, ... in order.
    pub fn with_index_labels(effects: Vec<CMatrix>, tol: Tolerance) -> Result<Self> {
        let labels = (0..effects.len()).map(|i| i.to_string()).collect();
        Observable::new(labels, effects, tol)
    }

    /// `{I}` on dimension `n`.
    pub fn trivial(n: usize) -> Self {
        Observable {
            outcomes: vec![TRIVIAL_LABEL.to_string()],
            effects: vec![Effect::identity(n)],
        }
    }

    pub(crate) fn from_parts_unchecked(outcomes: Vec<String>, effects: Vec<CMatrix>) -> Self {
        Observable {
            outcomes,
            effects: effects
                .into_iter()
                .map(Effect::from_matrix_unchecked)
                .collect(),
        }
    }

    /// Re-checks every invariant at `tol`.
    pub fn validate(&self, tol: Tolerance) -> Result<()> {
        Observable::new(
            self.outcomes.clone(),
            self.effects.iter().map(|e| e.matrix().clone()).collect(),
            tol,
        )
        .map(|_| ())
    }

    /// `max |Σ_x A_x - I|` entrywise.
    pub fn normalization_defect(&self) -> f64 {
        let sum = CMatrix::sum(self.effects.iter().map(Effect::matrix)).expect("nonempty");
        sum.max_abs_diff(&CMatrix::identity(self.dim()))
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        label_index(&self.outcomes, label)
    }

    pub fn effect(&self, label: &str) -> Result<&Effect> {
        Ok(&self.effects[self.index_of(label)?])
    }

    /// `A(Δ) = Σ_{x∈Δ} A_x`.
    pub fn effect_of_set(&self, subset: &[&str]) -> Result<CMatrix> {
        let mut acc = CMatrix::zeros(self.dim(), self.dim());
        for label in subset {
            acc += self.effect(label)?.matrix();
        }
        Ok(acc)
    }

    /// Largest entrywise deviation between two observables on the same outcome list.
    pub fn max_abs_diff(&self, other: &Observable) -> f64 {
        if self.outcomes != other.outcomes {
            return f64::INFINITY;
        }
        self.effects
            .iter()
            .zip(&other.effects)
            .fold(0.0, |acc, (a, b)| {
                acc.max(a.matrix().max_abs_diff(b.matrix()))
            })
    }
}

/// Observable indexed by a product `Ω₁ × Ω₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiObservable {
    outcomes1: Vec<String>,
    outcomes2: Vec<String>,
    grid: Vec<Vec<Effect>>,
}

impl BiObservable {
    pub fn new(
        outcomes1: Vec<String>,
        outcomes2: Vec<String>,
        grid: Vec<Vec<CMatrix>>,
        tol: Tolerance,
    ) -> Result<Self> {
        check_labels(&outcomes1)?;
        check_labels(&outcomes2)?;
        if grid.len() != outcomes1.len() || grid.iter().any(|row| row.len() != outcomes2.len()) {
            return Err(Error::invariant(
                "outcome space",
                "grid shape does not match the outcome spaces",
            ));
        }
        let flat = Observable::new(
            pair_labels(&outcomes1, &outcomes2),
            grid.iter().flatten().cloned().collect(),
            tol,
        )?;
        let mut effects = flat.effects.into_iter();
        let grid = outcomes1
            .iter()
            .map(|_| effects.by_ref().take(outcomes2.len()).collect())
            .collect();
        Ok(BiObservable {
            outcomes1,
            outcomes2,
            grid,
        })
    }

    pub(crate) fn from_grid_unchecked(
        outcomes1: Vec<String>,
        outcomes2: Vec<String>,
        grid: Vec<Vec<CMatrix>>,
    ) -> Self {
        let grid = grid
            .into_iter()
            .map(|row| row.into_iter().map(Effect::from_matrix_unchecked).collect())
            .collect();
        BiObservable {
            outcomes1,
            outcomes2,
            grid,
        }
    }

    pub fn outcomes1(&self) -> &[String] {
        &self.outcomes1
    }

    pub fn outcomes2(&self) -> &[String] {
        &self.outcomes2
    }

    pub fn dim(&self) -> usize {
        self.grid[0][0].dim()
    }

    pub fn effect(&self, x: usize, y: usize) -> &Effect {
        &self.grid[x][y]
    }

    pub fn grid(&self) -> &[Vec<Effect>] {
        &self.grid
    }

    /// The same effects as a flat observable on pair labels `x⊗y`, row-major.
    pub fn to_observable(&self) -> Observable {
        Observable {
            outcomes: pair_labels(&self.outcomes1, &self.outcomes2),
            effects: self.grid.iter().flatten().cloned().collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &BiObservable) -> f64 {
        if self.outcomes1 != other.outcomes1 || self.outcomes2 != other.outcomes2 {
            return f64::INFINITY;
        }
        self.to_observable().max_abs_diff(&other.to_observable())
    }

    /// Coordinate projection `(x, y) ↦ x` on the flattened outcome space.
    pub fn first_projection(&self) -> OutcomeMap {
        let map = (0..self.outcomes1.len())
            .flat_map(|x| std::iter::repeat_n(x, self.outcomes2.len()))
            .collect();
        OutcomeMap {
            sources: pair_labels(&self.outcomes1, &self.outcomes2),
            targets: self.outcomes1.clone(),
            map,
        }
    }

    /// Coordinate projection `(x, y) ↦ y` on the flattened outcome space.
    pub fn second_projection(&self) -> OutcomeMap {
        let map = (0..self.outcomes1.len())
            .flat_map(|_| 0..self.outcomes2.len())
            .collect();
        OutcomeMap {
            sources: pair_labels(&self.outcomes1, &self.outcomes2),
            targets: self.outcomes2.clone(),
            map,
        }
    }
}

pub(crate) fn pair_labels(a: &[String], b: &[String]) -> Vec<String> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| pair_label(x, y)))
        .collect()
}

/// Row-stochastic kernel `λ_{xy}` from source to target outcomes.
///
/// Entries are accepted in `[-atol, 1+atol]` and clamped into `[0, 1]`;
/// each row must sum to one within `atol`.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    sources: Vec<String>,
    targets: Vec<String>,
    entries: Vec<Vec<f64>>,
}

impl StochasticMatrix {
    pub fn new(
        sources: Vec<String>,
        targets: Vec<String>,
        entries: Vec<Vec<f64>>,
        tol: Tolerance,
    ) -> Result<Self> {
        check_labels(&sources)?;
        check_labels(&targets)?;
        if entries.len() != sources.len() || entries.iter().any(|r| r.len() != targets.len()) {
            return Err(Error::dims(
                "stochastic matrix shape does not match its label sets",
            ));
        }
        let atol = tol.atol();
        let mut clamped = Vec::with_capacity(entries.len());
        for (x, row) in sources.iter().zip(entries) {
            if let Some(v) = row.iter().find(|v| !(-atol..=1.0 + atol).contains(*v)) {
                return Err(Error::invariant(
                    "stochastic entry",
                    format!("row `{x}` has entry {v} outside [0,1]"),
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > atol {
                return Err(Error::invariant(
                    "row sum",
                    format!("row `{x}` sums to {sum}"),
                ));
            }
            clamped.push(row.into_iter().map(|v| v.clamp(0.0, 1.0)).collect());
        }
        Ok(StochasticMatrix {
            sources,
            targets,
            entries: clamped,
        })
    }

    pub fn identity(labels: &[String]) -> Self {
        let n = labels.len();
        StochasticMatrix {
            sources: labels.to_vec(),
            targets: labels.to_vec(),
            entries: (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub(crate) fn from_entries_unchecked(
        sources: Vec<String>,
        targets: Vec<String>,
        entries: Vec<Vec<f64>>,
    ) -> Self {
        StochasticMatrix {
            sources,
            targets,
            entries,
        }
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries[x][y]
    }

    /// `max_x |Σ_y λ_{xy} - 1|`.
    pub fn row_sum_defect(&self) -> f64 {
        self.entries
            .iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Kernel of "first `self`, then `next`": `δ_{xz} = Σ_y μ_{yz} λ_{xy}`.
    pub fn then(&self, next: &StochasticMatrix) -> Result<StochasticMatrix> {
        if self.targets != next.sources {
            return Err(Error::dims("inner label sets of composed kernels differ"));
        }
        let entries = self
            .entries
            .iter()
            .map(|row| {
                (0..next.targets.len())
                    .map(|z| {
                        row.iter()
                            .enumerate()
                            .map(|(y, l)| next.entries[y][z] * l)
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Ok(StochasticMatrix {
            sources: self.sources.clone(),
            targets: next.targets.clone(),
            entries,
        })
    }
}

/// Surjection between finite outcome spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeMap {
    sources: Vec<String>,
    targets: Vec<String>,
    map: Vec<usize>,
}

impl OutcomeMap {
    /// Builds the map from `(source, target)` pairs; must be total on
    /// `sources` and hit every label of `targets`.
    pub fn new(
        sources: Vec<String>,
        targets: Vec<String>,
        pairs: &BTreeMap<String, String>,
    ) -> Result<Self> {
        check_labels(&sources)?;
        check_labels(&targets)?;
        let map = sources
            .iter()
            .map(|s| {
                let t = pairs
                    .get(s)
                    .ok_or_else(|| Error::invariant("totality", format!("no image for `{s}`")))?;
                label_index(&targets, t)
            })
            .collect::<Result<Vec<_>>>()?;
        let f = OutcomeMap {
            sources,
            targets,
            map,
        };
        f.check_surjective()?;
        Ok(f)
    }

    /// Builds the map from target indices, one per source label.
    pub fn from_indices(
        sources: Vec<String>,
        targets: Vec<String>,
        map: Vec<usize>,
    ) -> Result<Self> {
        check_labels(&sources)?;
        check_labels(&targets)?;
        if map.len() != sources.len() {
            return Err(Error::invariant(
                "totality",
                "map does not cover every source label",
            ));
        }
        if let Some(&bad) = map.iter().find(|&&t| t >= targets.len()) {
            return Err(Error::UnknownLabel(format!("target index {bad}")));
        }
        let f = OutcomeMap {
            sources,
            targets,
            map,
        };
        f.check_surjective()?;
        Ok(f)
    }

    pub fn identity(labels: &[String]) -> Self {
        OutcomeMap {
            sources: labels.to_vec(),
            targets: labels.to_vec(),
            map: (0..labels.len()).collect(),
        }
    }

    fn check_surjective(&self) -> Result<()> {
        let hit: BTreeSet<usize> = self.map.iter().copied().collect();
        match (0..self.targets.len()).find(|t| !hit.contains(t)) {
            Some(t) => Err(Error::NonSurjective(self.targets[t].clone())),
            None => Ok(()),
        }
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn image_index(&self, x: usize) -> usize {
        self.map[x]
    }

    /// `g ∘ self`.
    pub fn then(&self, g: &OutcomeMap) -> Result<OutcomeMap> {
        if self.targets != g.sources {
            return Err(Error::dims("composed outcome maps do not chain"));
        }
        Ok(OutcomeMap {
            sources: self.sources.clone(),
            targets: g.targets.clone(),
            map: self.map.iter().map(|&y| g.map[y]).collect(),
        })
    }

    /// The indicator kernel `λ_{xy} = [f(x) = y]`.
    pub fn to_stochastic(&self) -> StochasticMatrix {
        let entries = self
            .map
            .iter()
            .map(|&t| {
                (0..self.targets.len())
                    .map(|y| if y == t { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        StochasticMatrix::from_entries_unchecked(
            self.sources.clone(),
            self.targets.clone(),
            entries,
        )
    }
}

/// Born rule `tr(ρa)`.
pub fn born_probability(rho: &State, a: &Effect) -> Result<f64> {
    if rho.dim() != a.dim() {
        return Err(Error::dims(format!(
            "state on {} vs effect on {}",
            rho.dim(),
            a.dim()
        )));
    }
    let p = trace_product(rho.matrix(), a.matrix());
    debug_assert!(
        p.im.abs() <= 1e-6,
        "Born probability has imaginary part {}",
        p.im
    );
    Ok(p.re)
}

/// `Φ_ρ^A(Δ) = tr[ρ A(Δ)]`.
pub fn observable_distribution(rho: &State, a: &Observable, subset: &[&str]) -> Result<f64> {
    if rho.dim() != a.dim() {
        return Err(Error::dims(format!(
            "state on {} vs observable on {}",
            rho.dim(),
            a.dim()
        )));
    }
    subset
        .iter()
        .map(|label| born_probability(rho, a.effect(label)?))
        .sum()
}

/// Full distribution of `A` in `ρ`, in outcome order.
pub fn distribution(rho: &State, a: &Observable) -> Result<Vec<f64>> {
    a.effects()
        .iter()
        .map(|e| born_probability(rho, e))
        .collect()
}

/// `B_y = Σ_x λ_{xy} A_x`.
pub fn post_process(a: &Observable, lam: &StochasticMatrix) -> Result<Observable> {
    let rows = a
        .outcomes()
        .iter()
        .map(|x| label_index(lam.sources(), x))
        .collect::<Result<Vec<_>>>()?;
    if lam.sources().len() != a.len() {
        return Err(Error::dims(
            "kernel rows do not match the observable's outcomes",
        ));
    }
    let n = a.dim();
    let effects = (0..lam.targets().len())
        .map(|y| {
            let mut acc = CMatrix::zeros(n, n);
            for (x, e) in a.effects().iter().enumerate() {
                let w = lam.get(rows[x], y);
                if w != 0.0 {
                    acc += &e.matrix().scale(w);
                }
            }
            acc
        })
        .collect();
    Ok(Observable::from_parts_unchecked(
        lam.targets().to_vec(),
        effects,
    ))
}

/// `f(A)_y = Σ{A_x : f(x) = y}`.
pub fn part(a: &Observable, f: &OutcomeMap) -> Result<Observable> {
    if f.sources() != a.outcomes() {
        return Err(Error::dims(
            "outcome map is not defined on the observable's outcome space",
        ));
    }
    let n = a.dim();
    let mut effects = vec![CMatrix::zeros(n, n); f.targets().len()];
    for (x, e) in a.effects().iter().enumerate() {
        effects[f.image_index(x)] += e.matrix();
    }
    Ok(Observable::from_parts_unchecked(
        f.targets().to_vec(),
        effects,
    ))
}

/// `(A¹, A²)` with `A¹_x = Σ_y A_{xy}` and `A²_y = Σ_x A_{xy}`.
pub fn marginals(c: &BiObservable) -> (Observable, Observable) {
    let n = c.dim();
    let first = c
        .grid
        .iter()
        .map(|row| CMatrix::sum(row.iter().map(Effect::matrix)).expect("nonempty row"))
        .collect();
    let second = (0..c.outcomes2.len())
        .map(|y| {
            c.grid.iter().fold(CMatrix::zeros(n, n), |acc, row| {
                acc + row[y].matrix().clone()
            })
        })
        .collect();
    (
        Observable::from_parts_unchecked(c.outcomes1.clone(), first),
        Observable::from_parts_unchecked(c.outcomes2.clone(), second),
    )
}

/// `B_x = Σ_i λ_i A_{i,x}` for observables sharing one outcome space.
pub fn affine_combination(
    observables: &[Observable],
    weights: &[f64],
    tol: Tolerance,
) -> Result<Observable> {
    let first = observables
        .first()
        .ok_or_else(|| Error::invariant("weights", "no observables to combine"))?;
    if observables.len() != weights.len() {
        return Err(Error::invariant(
            "weights",
            "one weight per observable is required",
        ));
    }
    if observables.iter().any(|o| o.outcomes() != first.outcomes()) {
        return Err(Error::invariant(
            "outcome space",
            "combined observables must share outcomes",
        ));
    }
    if observables.iter().any(|o| o.dim() != first.dim()) {
        return Err(Error::dims("combined observables must share one dimension"));
    }
    if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(Error::invariant(
            "weights",
            format!("weight {w} outside [0,1]"),
        ));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > tol.atol() {
        return Err(Error::invariant(
            "weight sum",
            format!("weights sum to {total}"),
        ));
    }
    let n = first.dim();
    let effects = (0..first.len())
        .map(|x| {
            observables
                .iter()
                .zip(weights)
                .fold(CMatrix::zeros(n, n), |acc, (o, &w)| {
                    acc + o.effects()[x].matrix().scale(w)
                })
        })
        .collect();
    Ok(Observable::from_parts_unchecked(
        first.outcomes().to_vec(),
        effects,
    ))
}

/// Checks that `C` is a joint bi-observable for `A` and `B`.
pub fn certify_coexistence(
    a: &Observable,
    b: &Observable,
    c: &BiObservable,
    tol: Tolerance,
) -> bool {
    if a.dim() != c.dim() || b.dim() != c.dim() {
        return false;
    }
    let (c1, c2) = marginals(c);
    c1.max_abs_diff(a) <= tol.atol() && c2.max_abs_diff(b) <= tol.atol()
}
