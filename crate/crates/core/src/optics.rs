//! Linear-optical elements and photodetection on sparse Fock states.
//!
//! Conventions used throughout:
//!
//! * A two-mode element with matrix `U` maps input creation operators to
//!   output ones as `in_i -> sum_j U[j][i] out_j`, i.e. columns are inputs
//!   and rows are outputs.
//! * The variable beam splitter [`vbs`] with transmission `t` has matrix
//!   `[[sqrt(t), -sqrt(1-t)], [sqrt(1-t), sqrt(t)]]`: a photon entering the
//!   first mode stays there with amplitude `sqrt(t)`.
//! * The balanced splitter [`bs50`] has matrix
//!   `[[1, 1], [1, -1]] / sqrt(2)`: both inputs feed the first output (the
//!   "plus" port) with a positive sign, and the second input reaches the
//!   second output (the "minus" port) with a sign flip. Two indistinguishable
//!   photons, one per input, therefore bunch: the coincidence amplitude
//!   cancels exactly and only the two-photon terms (2,0) and (0,2) survive.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::{Amplitude, FockBasisState, MixedState, ModeId, NormStatus, PureState};

/// Largest photon total on a mode pair the expansion supports. Factorials up
/// to this size are exactly representable products in f64 to within one part
/// in 1e15, which keeps the scattering coefficients at full precision.
pub const MAX_PAIR_PHOTONS: u16 = 34;

const FACTORIAL: [f64; MAX_PAIR_PHOTONS as usize + 1] = {
    let mut f = [1.0f64; MAX_PAIR_PHOTONS as usize + 1];
    let mut i = 1;
    while i < f.len() {
        f[i] = f[i - 1] * i as f64;
        i += 1;
    }
    f
};

fn factorial(n: u16) -> f64 {
    FACTORIAL[n as usize]
}

fn binomial(n: u16, k: u16) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// A 2x2 mode transformation, checked for unitarity on construction.
#[derive(Debug, Clone)]
pub struct TwoModeElement {
    matrix: [[Amplitude; 2]; 2],
}

impl TwoModeElement {
    /// Builds an element from its matrix; errors unless the matrix is
    /// unitary within 1e-12.
    pub fn new(matrix: [[Amplitude; 2]; 2]) -> Result<Self> {
        let elem = Self { matrix };
        if elem.is_unitary() {
            Ok(elem)
        } else {
            Err(Error::NonUnitary)
        }
    }

    /// Builds an element without the unitarity check. Non-unitary matrices
    /// break photon-number conservation; this exists so self-checks can
    /// inject a deliberately wrong element and watch the pipeline notice.
    #[doc(hidden)]
    pub fn new_unchecked(matrix: [[Amplitude; 2]; 2]) -> Self {
        Self { matrix }
    }

    /// The transformation matrix, rows = outputs, columns = inputs.
    pub fn matrix(&self) -> &[[Amplitude; 2]; 2] {
        &self.matrix
    }

    /// Whether `U U^dagger = I` within 1e-12 per entry.
    pub fn is_unitary(&self) -> bool {
        let u = &self.matrix;
        let mut max_dev = 0.0f64;
        for r in 0..2 {
            for c in 0..2 {
                let sum: Amplitude = (0..2).map(|k| u[r][k] * u[c][k].conj()).sum();
                let target = if r == c { 1.0 } else { 0.0 };
                max_dev = max_dev.max((sum - target).norm());
            }
        }
        max_dev <= 1e-12
    }
}

/// Variable beam splitter with transmission `t` in [0, 1].
///
/// Matrix `[[sqrt(t), -sqrt(1-t)], [sqrt(1-t), sqrt(t)]]`. The first mode is
/// the transmitted path, the second the reflected one.
pub fn vbs(t: f64) -> Result<TwoModeElement> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            range: "[0, 1]",
        });
    }
    let ct = t.sqrt();
    let st = (1.0 - t).sqrt();
    TwoModeElement::new([
        [Amplitude::new(ct, 0.0), Amplitude::new(-st, 0.0)],
        [Amplitude::new(st, 0.0), Amplitude::new(ct, 0.0)],
    ])
}

/// Balanced beam splitter, matrix `[[1, 1], [1, -1]] / sqrt(2)`.
///
/// Output 0 is the plus port, output 1 the minus port.
pub fn bs50() -> TwoModeElement {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    TwoModeElement::new([
        [Amplitude::new(h, 0.0), Amplitude::new(h, 0.0)],
        [Amplitude::new(h, 0.0), Amplitude::new(-h, 0.0)],
    ])
    .expect("balanced splitter is unitary")
}

/// Scatters the photons of one (m, n) input pair through `u`.
///
/// Expands `(sum_j U[j][0] out_j)^m (sum_j U[j][1] out_j)^n` applied to
/// vacuum and collects the amplitude on each output pair `|p, q>`, including
/// the sqrt(m! n!) input and sqrt(p! q!) output normalizations.
fn scatter_pair(m: u8, n: u8, u: &[[Amplitude; 2]; 2]) -> Vec<(u8, u8, Amplitude)> {
    let m = u16::from(m);
    let n = u16::from(n);
    let total = m + n;
    let input_norm = (factorial(m) * factorial(n)).sqrt();
    let mut out = Vec::with_capacity(usize::from(total) + 1);
    for p in 0..=total {
        let q = total - p;
        let mut sum = Amplitude::new(0.0, 0.0);
        let i_lo = p.saturating_sub(n);
        let i_hi = m.min(p);
        for i in i_lo..=i_hi {
            let j = p - i;
            let weight = binomial(m, i) * binomial(n, j);
            sum += weight
                * u[0][0].powu(u32::from(i))
                * u[1][0].powu(u32::from(m - i))
                * u[0][1].powu(u32::from(j))
                * u[1][1].powu(u32::from(n - j));
        }
        let coeff = sum * (factorial(p) * factorial(q)).sqrt() / input_norm;
        out.push((p as u8, q as u8, coeff));
    }
    out
}

/// Applies a two-mode element to the given pair of modes of a state.
///
/// Every other mode is untouched. The element must be unitary (guaranteed by
/// [`TwoModeElement::new`]); the two modes must be distinct and belong to the
/// state's registry. Norm bookkeeping carries over unchanged because the map
/// is norm-preserving.
pub fn apply_two_mode(
    state: &PureState,
    elem: &TwoModeElement,
    modes: (&ModeId, &ModeId),
) -> Result<PureState> {
    let i0 = state.resolve_mode(modes.0)?;
    let i1 = state.resolve_mode(modes.1)?;
    if i0 == i1 {
        return Err(Error::OverlappingPairs(modes.0.label().to_string()));
    }
    let u = elem.matrix();
    let mut out: BTreeMap<FockBasisState, Amplitude> = BTreeMap::new();
    for (basis, amp) in state.terms() {
        let m = basis.occupations()[i0];
        let n = basis.occupations()[i1];
        if u16::from(m) + u16::from(n) > MAX_PAIR_PHOTONS {
            return Err(Error::OccupationOverflow);
        }
        if m == 0 && n == 0 {
            *out.entry(basis.clone()).or_insert(Amplitude::new(0.0, 0.0)) += amp;
            continue;
        }
        for (p, q, coeff) in scatter_pair(m, n, u) {
            let mut occ = basis.occupations().to_vec();
            occ[i0] = p;
            occ[i1] = q;
            *out.entry(FockBasisState::new(occ))
                .or_insert(Amplitude::new(0.0, 0.0)) += amp * coeff;
        }
    }
    Ok(PureState::from_parts(
        state.registry().clone(),
        out,
        state.status(),
    ))
}

/// Multiplies each term by `exp(i * phase * n)` where `n` is the photon
/// count in `mode`. Leaves the norm untouched.
pub fn apply_phase(state: &PureState, mode: &ModeId, phase: f64) -> Result<PureState> {
    if !phase.is_finite() {
        return Err(Error::OutOfRange {
            name: "phase",
            value: phase,
            range: "finite values",
        });
    }
    let idx = state.resolve_mode(mode)?;
    let mut out = BTreeMap::new();
    for (basis, amp) in state.terms() {
        let n = basis.occupations()[idx];
        let rot = Amplitude::from_polar(1.0, phase * f64::from(n));
        out.insert(basis.clone(), amp * rot);
    }
    Ok(PureState::from_parts(
        state.registry().clone(),
        out,
        state.status(),
    ))
}

/// Uniform single-photon loss: the input survives intact with probability
/// `eta` and is replaced by vacuum with probability `1 - eta`.
///
/// This is the exact channel for states carrying at most one photon in
/// total, where "lose a photon" and "become vacuum" coincide; inputs with a
/// multi-photon term are rejected.
#[derive(Debug, Clone, Copy)]
pub struct LossChannel {
    eta: f64,
}

impl LossChannel {
    /// Builds the channel; `eta` is the survival probability in [0, 1].
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::OutOfRange {
                name: "eta",
                value: eta,
                range: "[0, 1]",
            });
        }
        Ok(Self { eta })
    }

    /// Survival probability.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Applies the channel to a normalized state with at most one photon
    /// per basis term.
    pub fn apply(&self, state: &PureState) -> Result<MixedState> {
        if !state.is_normalized() {
            return Err(Error::NotNormalized(state.norm_sqr()));
        }
        for (basis, _) in state.terms() {
            let photons = basis.total_photons();
            if photons > 1 {
                return Err(Error::MultiPhotonLoss(photons));
            }
        }
        let vacuum = PureState::vacuum(state.registry());
        let branches = if self.eta == 1.0 {
            vec![(1.0, state.clone())]
        } else if self.eta == 0.0 {
            vec![(1.0, vacuum)]
        } else {
            vec![(self.eta, state.clone()), (1.0 - self.eta, vacuum)]
        };
        MixedState::new(branches)
    }
}

/// Output port of a balanced splitter pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    /// First output: both inputs arrive in phase.
    Plus,
    /// Second output: the second input arrives with a sign flip.
    Minus,
}

/// Photon counts seen by number-resolving detectors, one (plus, minus) count
/// pair per balanced splitter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionPattern {
    counts: Vec<(u8, u8)>,
}

impl DetectionPattern {
    /// The accepted pattern that clicks once in the given port of each pair.
    pub fn accepted(ports: &[Port]) -> Self {
        let counts = ports
            .iter()
            .map(|p| match p {
                Port::Plus => (1, 0),
                Port::Minus => (0, 1),
            })
            .collect();
        Self { counts }
    }

    /// An arbitrary pattern from raw per-pair counts.
    pub fn from_counts(counts: Vec<(u8, u8)>) -> Self {
        Self { counts }
    }

    /// Per-pair (plus, minus) photon counts.
    pub fn counts(&self) -> &[(u8, u8)] {
        &self.counts
    }

    /// Number of detector pairs the pattern covers.
    pub fn num_pairs(&self) -> usize {
        self.counts.len()
    }

    /// True when every pair saw exactly one photon, in one port only.
    pub fn is_accepted(&self) -> bool {
        self.counts.iter().all(|&c| c == (1, 0) || c == (0, 1))
    }

    /// Ports of an accepted pattern; `None` when not accepted.
    pub fn ports(&self) -> Option<Vec<Port>> {
        self.counts
            .iter()
            .map(|&c| match c {
                (1, 0) => Some(Port::Plus),
                (0, 1) => Some(Port::Minus),
                _ => None,
            })
            .collect()
    }

    /// Stable index of an accepted pattern: the pairs read as a binary
    /// number, first pair most significant, plus = 0 and minus = 1. The
    /// all-plus pattern gets id 0. Returns `None` for rejected patterns.
    pub fn id(&self) -> Option<usize> {
        let ports = self.ports()?;
        let mut id = 0usize;
        for port in ports {
            id = (id << 1) | usize::from(port == Port::Minus);
        }
        Some(id)
    }

    /// Indices of the pairs that clicked in the minus port. Empty for
    /// rejected patterns' multi-photon pairs too, so callers should gate on
    /// [`DetectionPattern::is_accepted`] first.
    pub fn minus_pairs(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == (0, 1))
            .map(|(k, _)| k)
    }

    /// All `2^pairs` accepted patterns in id order.
    pub fn all_accepted(pairs: usize) -> Vec<Self> {
        (0..1usize << pairs)
            .map(|code| {
                let ports: Vec<Port> = (0..pairs)
                    .map(|k| {
                        if code >> (pairs - 1 - k) & 1 == 1 {
                            Port::Minus
                        } else {
                            Port::Plus
                        }
                    })
                    .collect();
                Self::accepted(&ports)
            })
            .collect()
    }
}

/// Projects a state onto a detection pattern over the given detector pairs.
///
/// Returns the outcome probability (relative to the state's weight) and the
/// remainder: the unnormalized conditional state on the kept modes, carrying
/// the probability as its weight. Detector modes are removed from the
/// remainder's registry; at least one mode must survive.
pub fn project_pattern(
    state: &PureState,
    pairs: &[(ModeId, ModeId)],
    pattern: &DetectionPattern,
) -> Result<(f64, PureState)> {
    if pattern.num_pairs() != pairs.len() {
        return Err(Error::PatternLengthMismatch {
            pattern: pattern.num_pairs(),
            pairs: pairs.len(),
        });
    }
    let mut detector_idx = Vec::with_capacity(pairs.len());
    let mut seen = Vec::new();
    for (plus, minus) in pairs {
        let ip = state.resolve_mode(plus)?;
        let im = state.resolve_mode(minus)?;
        for (idx, mode) in [(ip, plus), (im, minus)] {
            if seen.contains(&idx) {
                return Err(Error::OverlappingPairs(mode.label().to_string()));
            }
            seen.push(idx);
        }
        detector_idx.push((ip, im));
    }
    seen.sort_unstable();
    let kept_registry = Arc::new(state.registry().without(&seen)?);

    let mut prob = 0.0;
    let mut kept_terms: BTreeMap<FockBasisState, Amplitude> = BTreeMap::new();
    'terms: for (basis, amp) in state.terms() {
        let occ = basis.occupations();
        for (k, &(ip, im)) in detector_idx.iter().enumerate() {
            if (occ[ip], occ[im]) != pattern.counts()[k] {
                continue 'terms;
            }
        }
        prob += amp.norm_sqr();
        let kept: Vec<u8> = occ
            .iter()
            .enumerate()
            .filter(|(i, _)| seen.binary_search(i).is_err())
            .map(|(_, &n)| n)
            .collect();
        *kept_terms
            .entry(FockBasisState::new(kept))
            .or_insert(Amplitude::new(0.0, 0.0)) += amp;
    }
    Ok((
        prob,
        PureState::from_parts(kept_registry, kept_terms, NormStatus::Weighted(prob)),
    ))
}
