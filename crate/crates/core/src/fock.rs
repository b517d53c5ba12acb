//! Sparse Fock-space states over named bosonic modes.
//!
//! A state is a map from occupation-number basis vectors to complex
//! amplitudes. Only nonzero terms are stored, so states that touch a handful
//! of basis vectors stay cheap even when the mode count grows. Basis vectors
//! are ordered lexicographically by their occupation lists, which makes
//! iteration order (and everything derived from it: serialization, sampling,
//! printing) deterministic.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex amplitude attached to a basis term.
pub type Amplitude = Complex64;

/// Amplitudes with magnitude below this threshold are dropped after every
/// state operation, so exact interference cancellations leave no residue.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// A squared norm within this distance of 1 counts as normalized.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Ordered set of mode labels shared by all states of one experiment.
///
/// The registry fixes both the number of modes and their order; occupation
/// vectors are indexed against it. Labels must be unique and non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeRegistry {
    labels: Vec<Arc<str>>,
}

impl ModeRegistry {
    /// Builds a registry from an ordered list of labels.
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<Arc<str>> = labels
            .into_iter()
            .map(|s| Arc::from(s.into().into_boxed_str()))
            .collect();
        if labels.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::DuplicateLabel(label.to_string()));
            }
        }
        Ok(Self { labels })
    }

    /// Number of modes.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Always false: registries hold at least one mode.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Mode handle at `index`, if in range.
    pub fn mode(&self, index: usize) -> Option<ModeId> {
        self.labels.get(index).map(|label| ModeId {
            index,
            label: label.clone(),
        })
    }

    /// Mode handle with the given label, if present.
    pub fn by_label(&self, label: &str) -> Option<ModeId> {
        self.labels
            .iter()
            .position(|l| &**l == label)
            .and_then(|i| self.mode(i))
    }

    /// Labels in registry order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|l| &**l)
    }

    /// All mode handles in registry order.
    pub fn modes(&self) -> impl Iterator<Item = ModeId> + '_ {
        (0..self.len()).map(|i| self.mode(i).expect("index in range"))
    }

    /// Concatenation of two registries; errors if any label repeats.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        for label in other.labels() {
            if self.labels.iter().any(|l| &**l == label) {
                return Err(Error::OverlappingRegistries(label.to_string()));
            }
        }
        let labels = self
            .labels
            .iter()
            .chain(other.labels.iter())
            .cloned()
            .collect();
        Ok(Self { labels })
    }

    /// Registry with the modes at `drop` (sorted, unique indices) removed.
    pub(crate) fn without(&self, drop: &[usize]) -> Result<Self> {
        let labels: Vec<Arc<str>> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(i, _)| drop.binary_search(i).is_err())
            .map(|(_, l)| l.clone())
            .collect();
        if labels.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        Ok(Self { labels })
    }
}

/// Handle naming one mode of a registry: a position plus its label.
///
/// Handles are only valid against the registry that produced them (or an
/// equal one); state operations check this and reject stale handles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeId {
    index: usize,
    label: Arc<str>,
}

impl ModeId {
    /// Position of this mode in its registry.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Label of this mode.
    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)
    }
}

/// One occupation-number basis vector: photon counts per mode, in registry
/// order. Ordering is lexicographic on the counts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FockBasisState(Vec<u8>);

impl FockBasisState {
    pub(crate) fn new(occ: Vec<u8>) -> Self {
        Self(occ)
    }

    /// Photon count per mode, in registry order.
    pub fn occupations(&self) -> &[u8] {
        &self.0
    }

    /// Total photon number across all modes.
    pub fn total_photons(&self) -> u32 {
        self.0.iter().map(|&n| u32::from(n)).sum()
    }
}

impl fmt::Display for FockBasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ">")
    }
}

/// Whether a state's squared norm is 1 or some other recorded weight.
///
/// Conditional states (projection remainders) carry their branch probability
/// as a weight instead of being silently rescaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormStatus {
    /// Squared norm is 1 within [`NORM_TOLERANCE`].
    Normalized,
    /// Squared norm is the recorded value.
    Weighted(f64),
}

/// Sparse pure state: a superposition of occupation-number basis vectors.
#[derive(Debug, Clone)]
pub struct PureState {
    registry: Arc<ModeRegistry>,
    terms: BTreeMap<FockBasisState, Amplitude>,
    norm: NormStatus,
}

impl PureState {
    /// The vacuum: a single term with zero photons everywhere, amplitude 1.
    pub fn vacuum(registry: &Arc<ModeRegistry>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(
            FockBasisState::new(vec![0; registry.len()]),
            Amplitude::new(1.0, 0.0),
        );
        Self {
            registry: registry.clone(),
            terms,
            norm: NormStatus::Normalized,
        }
    }

    /// Builds a state from explicit (occupations, amplitude) pairs.
    ///
    /// Occupation vectors must match the registry length; amplitudes must be
    /// finite. Duplicate occupation vectors accumulate. Terms below
    /// [`PRUNE_THRESHOLD`] are dropped afterwards.
    pub fn from_terms<I>(registry: &Arc<ModeRegistry>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u8>, Amplitude)>,
    {
        let mut map: BTreeMap<FockBasisState, Amplitude> = BTreeMap::new();
        for (occ, amp) in terms {
            if occ.len() != registry.len() {
                return Err(Error::OccupationLength {
                    got: occ.len(),
                    expected: registry.len(),
                });
            }
            if !amp.re.is_finite() || !amp.im.is_finite() {
                return Err(Error::NonFiniteAmplitude);
            }
            *map.entry(FockBasisState::new(occ))
                .or_insert(Amplitude::new(0.0, 0.0)) += amp;
        }
        map.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        let norm_sqr: f64 = map.values().map(|a| a.norm_sqr()).sum();
        let norm = if (norm_sqr - 1.0).abs() <= NORM_TOLERANCE {
            NormStatus::Normalized
        } else {
            NormStatus::Weighted(norm_sqr)
        };
        Ok(Self {
            registry: registry.clone(),
            terms: map,
            norm,
        })
    }

    /// Internal constructor for operations that already know the outcome's
    /// norm bookkeeping. Prunes tiny amplitudes.
    pub(crate) fn from_parts(
        registry: Arc<ModeRegistry>,
        mut terms: BTreeMap<FockBasisState, Amplitude>,
        norm: NormStatus,
    ) -> Self {
        terms.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        Self {
            registry,
            terms,
            norm,
        }
    }

    /// Registry the state lives on.
    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    /// Basis terms in lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = (&FockBasisState, Amplitude)> {
        self.terms.iter().map(|(b, a)| (b, *a))
    }

    /// Number of stored basis terms.
    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Amplitude on the given occupation vector (zero if absent or if the
    /// length does not match).
    pub fn amplitude(&self, occ: &[u8]) -> Amplitude {
        self.terms
            .get(&FockBasisState::new(occ.to_vec()))
            .copied()
            .unwrap_or(Amplitude::new(0.0, 0.0))
    }

    /// Squared norm, summed over stored terms.
    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// Recorded norm bookkeeping.
    pub fn status(&self) -> NormStatus {
        self.norm
    }

    /// Recorded weight: 1 for normalized states, the stored squared norm for
    /// weighted ones.
    pub fn weight(&self) -> f64 {
        match self.norm {
            NormStatus::Normalized => 1.0,
            NormStatus::Weighted(w) => w,
        }
    }

    /// Whether the state is flagged as normalized.
    pub fn is_normalized(&self) -> bool {
        matches!(self.norm, NormStatus::Normalized)
    }

    /// Rescaled copy with squared norm 1. Errors on (near-)zero norm.
    pub fn normalized(&self) -> Result<Self> {
        let ns = self.norm_sqr();
        if ns < PRUNE_THRESHOLD * PRUNE_THRESHOLD {
            return Err(Error::ZeroNorm);
        }
        if matches!(self.norm, NormStatus::Normalized) {
            let mut out = self.clone();
            out.norm = NormStatus::Normalized;
            return Ok(out);
        }
        let scale = 1.0 / ns.sqrt();
        let terms = self
            .terms
            .iter()
            .map(|(b, a)| (b.clone(), a * scale))
            .collect();
        Ok(Self {
            registry: self.registry.clone(),
            terms,
            norm: NormStatus::Normalized,
        })
    }

    /// Adds one photon to `mode`, applying the bosonic sqrt(n+1) factor to
    /// each term.
    ///
    /// When every term has the mode empty the factor is 1 and the norm
    /// bookkeeping carries over unchanged; otherwise the result is weighted
    /// by its new squared norm, because the creation operator is not
    /// norm-preserving on occupied modes.
    pub fn create_photon(&self, mode: &ModeId) -> Result<Self> {
        let idx = self.resolve_mode(mode)?;
        let mut terms = BTreeMap::new();
        let mut bare = true;
        for (basis, amp) in &self.terms {
            let n = basis.occupations()[idx];
            if n == u8::MAX {
                return Err(Error::OccupationOverflow);
            }
            if n > 0 {
                bare = false;
            }
            let mut occ = basis.occupations().to_vec();
            occ[idx] = n + 1;
            let factor = f64::from(u16::from(n) + 1).sqrt();
            terms.insert(FockBasisState::new(occ), amp * factor);
        }
        let norm = if bare {
            self.norm
        } else {
            NormStatus::Weighted(terms.values().map(|a: &Amplitude| a.norm_sqr()).sum())
        };
        Ok(Self::from_parts(self.registry.clone(), terms, norm))
    }

    /// Tensor product. Registries are concatenated; labels must not overlap.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let registry = Arc::new(self.registry.concat(&other.registry)?);
        let mut terms = BTreeMap::new();
        for (b1, a1) in &self.terms {
            for (b2, a2) in &other.terms {
                let mut occ = Vec::with_capacity(b1.occupations().len() + b2.occupations().len());
                occ.extend_from_slice(b1.occupations());
                occ.extend_from_slice(b2.occupations());
                terms.insert(FockBasisState::new(occ), a1 * a2);
            }
        }
        let norm = match (self.norm, other.norm) {
            (NormStatus::Normalized, NormStatus::Normalized) => NormStatus::Normalized,
            _ => NormStatus::Weighted(self.weight() * other.weight()),
        };
        Ok(Self::from_parts(registry, terms, norm))
    }

    /// Hermitian inner product `<self|other>` (conjugate-linear in `self`).
    /// Both states must live on the same registry.
    pub fn inner_product(&self, other: &Self) -> Result<Amplitude> {
        self.check_same_registry(other)?;
        let (small, large) = if self.terms.len() <= other.terms.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut sum = Amplitude::new(0.0, 0.0);
        for (basis, amp) in &small.terms {
            if let Some(other_amp) = large.terms.get(basis) {
                // Conjugation always falls on self's amplitude.
                sum += if std::ptr::eq(small, self) {
                    amp.conj() * other_amp
                } else {
                    other_amp.conj() * amp
                };
            }
        }
        Ok(sum)
    }

    /// Squared overlap `|<target|self>|^2 / <self|self>` with a normalized
    /// target, clamped into [0, 1]. Errors if `target` is not normalized or
    /// if `self` has zero norm.
    pub fn fidelity(&self, target: &Self) -> Result<f64> {
        if !target.is_normalized() {
            return Err(Error::NotNormalized(target.norm_sqr()));
        }
        let ns = self.norm_sqr();
        if ns < PRUNE_THRESHOLD * PRUNE_THRESHOLD {
            return Err(Error::ZeroNorm);
        }
        let overlap = target.inner_product(self)?;
        Ok((overlap.norm_sqr() / ns).min(1.0))
    }

    /// JSON encoding of the state. See `PureStateDto` for the schema.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_dto()).expect("state serialization cannot fail")
    }

    /// Parses a state from the JSON produced by [`PureState::to_json`].
    pub fn from_json(json: &str) -> Result<Self> {
        Self::from_dto(serde_json::from_str(json)?)
    }

    fn to_dto(&self) -> PureStateDto {
        PureStateDto {
            modes: self.registry.labels().map(str::to_owned).collect(),
            terms: self
                .terms
                .iter()
                .map(|(b, a)| TermDto {
                    occ: b.occupations().to_vec(),
                    re: a.re,
                    im: a.im,
                })
                .collect(),
        }
    }

    fn from_dto(dto: PureStateDto) -> Result<Self> {
        let registry = Arc::new(ModeRegistry::new(dto.modes)?);
        Self::from_terms(
            &registry,
            dto.terms
                .into_iter()
                .map(|t| (t.occ, Amplitude::new(t.re, t.im))),
        )
    }

    pub(crate) fn resolve_mode(&self, mode: &ModeId) -> Result<usize> {
        match self.registry.labels.get(mode.index) {
            Some(label) if *label == mode.label => Ok(mode.index),
            _ => Err(Error::UnknownMode {
                label: mode.label.to_string(),
                index: mode.index,
            }),
        }
    }

    pub(crate) fn check_same_registry(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.registry, &other.registry) || self.registry == other.registry {
            Ok(())
        } else {
            Err(Error::RegistryMismatch)
        }
    }
}

/// Wire format for a pure state: mode labels plus one entry per basis term.
#[derive(Serialize, Deserialize)]
struct PureStateDto {
    modes: Vec<String>,
    terms: Vec<TermDto>,
}

#[derive(Serialize, Deserialize)]
struct TermDto {
    occ: Vec<u8>,
    re: f64,
    im: f64,
}

/// Statistical mixture of normalized pure states with probabilities.
#[derive(Debug, Clone)]
pub struct MixedState {
    branches: Vec<(f64, PureState)>,
}

impl MixedState {
    /// Builds a mixture. Probabilities must lie in [0, 1] and sum to 1
    /// within [`NORM_TOLERANCE`]; every branch must be normalized and all
    /// branches must share one registry.
    pub fn new(branches: Vec<(f64, PureState)>) -> Result<Self> {
        let Some(((_, first), rest)) = branches.split_first() else {
            return Err(Error::EmptyRegistry);
        };
        for (_, state) in rest {
            first.check_same_registry(state)?;
        }
        let mut total = 0.0;
        for (p, state) in &branches {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::OutOfRange {
                    name: "branch probability",
                    value: *p,
                    range: "[0, 1]",
                });
            }
            if !state.is_normalized() {
                return Err(Error::NotNormalized(state.norm_sqr()));
            }
            total += p;
        }
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::OutOfRange {
                name: "sum of branch probabilities",
                value: total,
                range: "within 1e-12 of 1",
            });
        }
        Ok(Self { branches })
    }

    /// Branches as (probability, state) pairs.
    pub fn branches(&self) -> &[(f64, PureState)] {
        &self.branches
    }

    /// Registry shared by all branches.
    pub fn registry(&self) -> &Arc<ModeRegistry> {
        self.branches[0].1.registry()
    }

    /// JSON encoding: `{"branches": [{"prob": p, "state": {...}}, ...]}`.
    pub fn to_json(&self) -> String {
        let dto = MixedStateDto {
            branches: self
                .branches
                .iter()
                .map(|(p, s)| BranchDto {
                    prob: *p,
                    state: s.to_dto(),
                })
                .collect(),
        };
        serde_json::to_string(&dto).expect("mixture serialization cannot fail")
    }

    /// Parses a mixture from the JSON produced by [`MixedState::to_json`].
    pub fn from_json(json: &str) -> Result<Self> {
        let dto: MixedStateDto = serde_json::from_str(json)?;
        let mut branches = Vec::with_capacity(dto.branches.len());
        for b in dto.branches {
            branches.push((b.prob, PureState::from_dto(b.state)?));
        }
        Self::new(branches)
    }
}

#[derive(Serialize, Deserialize)]
struct MixedStateDto {
    branches: Vec<BranchDto>,
}

#[derive(Serialize, Deserialize)]
struct BranchDto {
    prob: f64,
    state: PureStateDto,
}
