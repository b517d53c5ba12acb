//! The heralded amplification protocol for a shared single photon.
//!
//! One photon is delocalized over `n` spatial modes (a W state), then
//! damped by uniform loss. Each mode is teleported through a local
//! quantum-scissor stage:
//!
//! 1. An ancilla photon enters mode `h_k` and meets a variable splitter of
//!    transmission `t` whose reflected arm is the output mode `o_k`.
//! 2. The transmitted arm interferes with the signal mode `a_k` on a
//!    balanced splitter, wired so that the ancilla reaches both detectors
//!    in phase while the signal acquires a sign flip on the minus port.
//! 3. Number-resolving detectors watch the pair `(h_k, o_k... )` outputs;
//!    a run is kept only when every pair shows exactly one click.
//!
//! Conditioned on acceptance, the photon (when it survived the loss) sits
//! in the output modes `o_1..o_n` in a W state whose component signs encode
//! which minus detectors fired; flipping those signs back (feed-forward
//! phase correction) restores the W state exactly. The vacuum component is
//! heralded with a smaller relative weight, which is the amplification: the
//! conditional survival probability `eta'` exceeds `eta` whenever
//! `t < 1/2`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{
    Amplitude, FockBasisState, MixedState, ModeId, ModeRegistry, NormStatus, PureState,
};
use crate::optics::{
    apply_phase, apply_two_mode, bs50, vbs, DetectionPattern, LossChannel, TwoModeElement,
};

/// Largest supported number of signal modes. The exact pipeline enumerates
/// all `2^n` accepted click patterns over a state with `n * 2^n` basis
/// terms, so the cost roughly doubles per extra mode.
pub const MAX_MODES: u32 = 16;

/// Validated protocol parameters: mode count `n`, survival probability
/// `eta` of the input photon, and splitter transmission `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    n: u32,
    eta: f64,
    t: f64,
}

impl ProtocolConfig {
    /// Validates `2 <= n <= MAX_MODES` and `eta, t` in `[0, 1]`.
    pub fn new(n: u32, eta: f64, t: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewModes(n));
        }
        if n > MAX_MODES {
            return Err(Error::TooManyModes(n));
        }
        for (name, value) in [("eta", eta), ("t", t)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfRange {
                    name,
                    value,
                    range: "[0, 1]",
                });
            }
        }
        Ok(Self { n, eta, t })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

/// The W state: one photon shared evenly over modes `a1..an`, every
/// component with amplitude `1/sqrt(n)` and positive sign.
pub fn build_w_state(n: u32) -> Result<PureState> {
    if n < 2 {
        return Err(Error::TooFewModes(n));
    }
    let registry = Arc::new(ModeRegistry::new((1..=n).map(|k| format!("a{k}")))?);
    Ok(w_state_over(&registry))
}

/// W state over an arbitrary registry, one component per mode.
pub(crate) fn w_state_over(registry: &Arc<ModeRegistry>) -> PureState {
    let n = registry.len();
    let amp = Amplitude::new(1.0 / (n as f64).sqrt(), 0.0);
    let terms = (0..n).map(|k| {
        let mut occ = vec![0u8; n];
        occ[k] = 1;
        (occ, amp)
    });
    PureState::from_terms(registry, terms).expect("W state terms are well-formed")
}

/// Feed-forward correction: flips the sign of the kept mode behind every
/// minus-port click.
///
/// The state's modes must correspond one-to-one, in order, to the pattern's
/// detector pairs (mode `k` is the output of stage `k`). Only accepted
/// patterns can be corrected.
pub fn phase_correct(state: &PureState, pattern: &DetectionPattern) -> Result<PureState> {
    if !pattern.is_accepted() {
        return Err(Error::PatternNotAccepted);
    }
    if state.registry().len() != pattern.num_pairs() {
        return Err(Error::PatternLengthMismatch {
            pattern: pattern.num_pairs(),
            pairs: state.registry().len(),
        });
    }
    let mut out = state.clone();
    for k in pattern.minus_pairs() {
        let mode = out.registry().mode(k).expect("index within registry");
        out = apply_phase(&out, &mode, std::f64::consts::PI)?;
    }
    Ok(out)
}

/// Everything recorded about one accepted click pattern.
#[derive(Debug, Clone)]
pub struct PatternOutcome {
    /// The pattern itself (always accepted).
    pub pattern: DetectionPattern,
    /// Unconditional probability of seeing this pattern.
    pub prob: f64,
    /// Normalized surviving-photon state after phase correction; vacuum
    /// when the pattern heralds no surviving photon (or cannot occur).
    pub heralded: PureState,
    /// Fidelity of the corrected heralded state to the W state on the
    /// output modes.
    pub fidelity_to_w: f64,
}

/// Full exact description of one protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    pub n: u32,
    pub eta: f64,
    pub t: f64,
    /// Conditional survival probability of the photon given acceptance.
    pub eta_prime: f64,
    /// Probability that all detector pairs herald success.
    pub success_prob: f64,
    /// `eta_prime / eta`, or its boundary limit.
    pub gain: f64,
    /// True when `(eta, t)` lies on the boundary of the unit square and the
    /// gain is a limit or degenerate value.
    pub gain_is_limit: bool,
    /// One record per accepted pattern, in pattern-id order.
    pub per_pattern: Vec<PatternOutcome>,
    /// The heralded output averaged over patterns after correction:
    /// `eta' |W><W| + (1 - eta') |vac><vac|` on the output modes.
    pub output_state: MixedState,
}

impl ProtocolOutcome {
    /// JSON summary:
    /// `{"n","eta","t","eta_prime","p_success","gain","patterns":[{"id","prob","fidelity"}]}`.
    pub fn to_json(&self) -> String {
        let dto = OutcomeDto {
            n: self.n,
            eta: self.eta,
            t: self.t,
            eta_prime: self.eta_prime,
            p_success: self.success_prob,
            gain: self.gain,
            patterns: self
                .per_pattern
                .iter()
                .map(|p| PatternDto {
                    id: p.pattern.id().expect("per-pattern records are accepted"),
                    prob: p.prob,
                    fidelity: p.fidelity_to_w,
                })
                .collect(),
        };
        serde_json::to_string(&dto).expect("outcome serialization cannot fail")
    }
}

#[derive(Serialize)]
struct OutcomeDto {
    n: u32,
    eta: f64,
    t: f64,
    eta_prime: f64,
    p_success: f64,
    gain: f64,
    patterns: Vec<PatternDto>,
}

#[derive(Serialize)]
struct PatternDto {
    id: usize,
    prob: f64,
    fidelity: f64,
}

/// One loss branch evolved through every splitter, ready for detection.
struct EvolvedBranch {
    prob: f64,
    /// Whether this branch still carries the signal photon.
    carries_signal: bool,
    state: PureState,
}

/// The full pre-detection picture shared by the exact run and the sampler.
struct Evolved {
    branches: Vec<EvolvedBranch>,
    /// Detector pair per stage: (plus port, minus port) = (h_k, a_k).
    pairs: Vec<(ModeId, ModeId)>,
    /// Sorted indices of all detector modes (to drop from remainders).
    drop: Vec<usize>,
    /// Registry of the output modes `o1..on`.
    kept_registry: Arc<ModeRegistry>,
}

impl Evolved {
    /// Resolved (plus, minus) column indices of the detector pairs.
    fn cols(&self) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .map(|(p, m)| (p.index(), m.index()))
            .collect()
    }
}

/// Builds the lossy W state, attaches the split ancillas, and interferes
/// every signal mode with its transmitted ancilla on `bs`.
fn evolve(cfg: &ProtocolConfig, bs: &TwoModeElement) -> Result<Evolved> {
    let n = cfg.n as usize;
    let w = build_w_state(cfg.n)?;
    let mix = LossChannel::new(cfg.eta)?.apply(&w)?;
    let splitter = vbs(cfg.t)?;

    // Ancilla for stage k: photon into h_k, variable splitter onto
    // (h_k, o_k); the reflected arm o_k is the stage's output mode.
    let mut ancillas: Option<PureState> = None;
    for k in 1..=n {
        let reg = Arc::new(ModeRegistry::new([format!("h{k}"), format!("o{k}")])?);
        let photon = PureState::vacuum(&reg).create_photon(&reg.mode(0).expect("mode 0"))?;
        let split = apply_two_mode(
            &photon,
            &splitter,
            (&reg.mode(0).expect("mode 0"), &reg.mode(1).expect("mode 1")),
        )?;
        ancillas = Some(match ancillas {
            None => split,
            Some(joint) => joint.tensor(&split)?,
        });
    }
    let ancillas = ancillas.expect("n >= 2 stages");

    let mut branches = Vec::with_capacity(mix.branches().len());
    for (prob, branch) in mix.branches() {
        let carries_signal = branch.terms().any(|(b, _)| b.total_photons() > 0);
        let mut state = branch.tensor(&ancillas)?;
        for k in 1..=n {
            let h = state
                .registry()
                .by_label(&format!("h{k}"))
                .expect("ancilla mode present");
            let a = state
                .registry()
                .by_label(&format!("a{k}"))
                .expect("signal mode present");
            // Ancilla first: it reaches both ports in phase, the signal
            // picks up the minus-port sign flip.
            state = apply_two_mode(&state, bs, (&h, &a))?;
        }
        branches.push(EvolvedBranch {
            prob: *prob,
            carries_signal,
            state,
        });
    }

    let registry = branches[0].state.registry().clone();
    let mut pairs = Vec::with_capacity(n);
    let mut drop = Vec::with_capacity(2 * n);
    for k in 1..=n {
        let plus = registry
            .by_label(&format!("h{k}"))
            .expect("ancilla mode present");
        let minus = registry
            .by_label(&format!("a{k}"))
            .expect("signal mode present");
        drop.push(plus.index());
        drop.push(minus.index());
        pairs.push((plus, minus));
    }
    drop.sort_unstable();
    let kept_registry = Arc::new(registry.without(&drop)?);
    Ok(Evolved {
        branches,
        pairs,
        drop,
        kept_registry,
    })
}

type DetectorKey = Vec<(u8, u8)>;
type Group = (f64, BTreeMap<FockBasisState, Amplitude>);

/// Splits a state by detector readout in one pass: for each distinct
/// per-pair count tuple, the total probability mass and the kept-mode
/// amplitudes. Equivalent to projecting every pattern separately.
fn group_by_detectors(
    state: &PureState,
    cols: &[(usize, usize)],
    drop: &[usize],
) -> BTreeMap<DetectorKey, Group> {
    let mut out: BTreeMap<DetectorKey, Group> = BTreeMap::new();
    for (basis, amp) in state.terms() {
        let occ = basis.occupations();
        let key: DetectorKey = cols.iter().map(|&(p, m)| (occ[p], occ[m])).collect();
        let kept: Vec<u8> = occ
            .iter()
            .enumerate()
            .filter(|(i, _)| drop.binary_search(i).is_err())
            .map(|(_, &c)| c)
            .collect();
        let entry = out.entry(key).or_insert_with(|| (0.0, BTreeMap::new()));
        entry.0 += amp.norm_sqr();
        *entry
            .1
            .entry(FockBasisState::new(kept))
            .or_insert(Amplitude::new(0.0, 0.0)) += amp;
    }
    out
}

/// Runs the protocol exactly and reports every figure of merit.
///
/// Boundary handling matches the closed forms: at `t = 0` nothing is ever
/// accepted and the outcome carries the limits `eta' = 1`, `gain = 1/eta`;
/// the corners `(eta, t) = (0, 0)` and `(1, 1)` are rejected. Patterns of
/// zero probability report vacuum as their heralded state.
pub fn run_nla(cfg: &ProtocolConfig) -> Result<ProtocolOutcome> {
    run_protocol(cfg, &bs50())
}

/// Same as [`run_nla`] with a caller-supplied interference element, so
/// self-checks can inject a wrong one and watch the invariants break.
#[doc(hidden)]
pub fn run_nla_with_element(cfg: &ProtocolConfig, bs: &TwoModeElement) -> Result<ProtocolOutcome> {
    run_protocol(cfg, bs)
}

fn run_protocol(cfg: &ProtocolConfig, bs: &TwoModeElement) -> Result<ProtocolOutcome> {
    let ev = evolve(cfg, bs)?;
    let cols = ev.cols();
    let w_kept = w_state_over(&ev.kept_registry);
    let groups: Vec<BTreeMap<DetectorKey, Group>> = ev
        .branches
        .iter()
        .map(|b| group_by_detectors(&b.state, &cols, &ev.drop))
        .collect();

    let mut success = 0.0;
    let mut signal_mass = 0.0;
    let mut per_pattern = Vec::with_capacity(1usize << cfg.n);
    for pattern in DetectionPattern::all_accepted(cfg.n as usize) {
        let key: DetectorKey = pattern.counts().to_vec();
        let mut prob = 0.0;
        let mut signal_remainder: Option<PureState> = None;
        for (branch, group) in ev.branches.iter().zip(&groups) {
            let Some((p, kept)) = group.get(&key) else {
                continue;
            };
            prob += branch.prob * p;
            if branch.carries_signal {
                signal_mass += branch.prob * p;
                if *p > 0.0 {
                    signal_remainder = Some(PureState::from_parts(
                        ev.kept_registry.clone(),
                        kept.clone(),
                        NormStatus::Weighted(*p),
                    ));
                }
            }
        }
        success += prob;
        let (heralded, fidelity_to_w) = match signal_remainder {
            Some(rem) if rem.norm_sqr() > 0.0 => {
                let corrected = phase_correct(&rem, &pattern)?;
                (corrected.normalized()?, corrected.fidelity(&w_kept)?)
            }
            _ => {
                let vac = PureState::vacuum(&ev.kept_registry);
                let fid = vac.fidelity(&w_kept)?;
                (vac, fid)
            }
        };
        per_pattern.push(PatternOutcome {
            pattern,
            prob,
            heralded,
            fidelity_to_w,
        });
    }

    let (eta, t) = (cfg.eta, cfg.t);
    let gain_is_limit = eta == 0.0 || eta == 1.0 || t == 0.0 || t == 1.0;
    let (eta_prime, gain) = if success > 0.0 {
        let ep = signal_mass / success;
        let g = if eta > 0.0 { ep / eta } else { (1.0 - t) / t };
        (ep, g)
    } else {
        // Acceptance only vanishes identically at t = 0 (or the corners).
        if (eta == 0.0 && t == 0.0) || (eta == 1.0 && t == 1.0) {
            return Err(Error::UndefinedLimit {
                quantity: "gain",
                eta,
                t,
            });
        }
        (1.0, 1.0 / eta)
    };

    let mut output_branches = Vec::new();
    if eta_prime > 0.0 {
        output_branches.push((eta_prime, w_kept));
    }
    if eta_prime < 1.0 {
        output_branches.push((1.0 - eta_prime, PureState::vacuum(&ev.kept_registry)));
    }
    let output_state = MixedState::new(output_branches)?;

    Ok(ProtocolOutcome {
        n: cfg.n,
        eta,
        t,
        eta_prime,
        success_prob: success,
        gain,
        gain_is_limit,
        per_pattern,
        output_state,
    })
}

/// Probability of every possible detector readout (accepted or not),
/// ordered by per-pair counts. The probabilities sum to 1.
pub fn detection_distribution(cfg: &ProtocolConfig) -> Result<Vec<(DetectionPattern, f64)>> {
    detection_distribution_with_element(cfg, &bs50())
}

/// Same as [`detection_distribution`] with a caller-supplied interference
/// element; see [`run_nla_with_element`].
#[doc(hidden)]
pub fn detection_distribution_with_element(
    cfg: &ProtocolConfig,
    bs: &TwoModeElement,
) -> Result<Vec<(DetectionPattern, f64)>> {
    let ev = evolve(cfg, bs)?;
    let cols = ev.cols();
    let mut acc: BTreeMap<DetectorKey, f64> = BTreeMap::new();
    for branch in &ev.branches {
        for (key, (p, _)) in group_by_detectors(&branch.state, &cols, &ev.drop) {
            *acc.entry(key).or_insert(0.0) += branch.prob * p;
        }
    }
    Ok(acc
        .into_iter()
        .map(|(key, p)| (DetectionPattern::from_counts(key), p))
        .collect())
}

/// Monte Carlo estimates of the figures of merit from repeated runs.
#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub n: u32,
    pub eta: f64,
    pub t: f64,
    pub shots: u64,
    pub seed: u64,
    /// Shots in which every detector pair heralded success.
    pub accepted: u64,
    /// Accepted shots in which the signal photon had survived the loss.
    pub signal_accepted: u64,
    /// Estimated success probability and its binomial standard error.
    pub p_hat: f64,
    pub p_se: f64,
    /// Estimated conditional survival and its standard error (zero when no
    /// shot was accepted).
    pub eta_prime_hat: f64,
    pub eta_prime_se: f64,
    /// Estimated gain; absent when `eta = 0` leaves it undefined.
    pub gain_hat: Option<f64>,
    pub gain_se: Option<f64>,
}

/// Shots per deterministic sampling block. Each block draws from its own
/// seeded stream, so results depend only on `(seed, shots)` and not on how
/// the work is batched.
const BLOCK_SHOTS: u64 = 1 << 16;

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&block.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Index of the outcome a uniform draw `u` selects, given cumulative
/// probabilities; the final entry absorbs any floating-point shortfall.
fn pick(cum: &[f64], u: f64) -> usize {
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

/// Samples the protocol shot by shot and reports empirical estimates.
///
/// Every shot draws a loss branch and then a detector readout from that
/// branch's exact outcome distribution. The stream is deterministic in
/// `(seed, shots)`: shot `i` always consumes the same two draws from the
/// block-`i / 65536` generator.
pub fn sample_run(cfg: &ProtocolConfig, shots: u64, seed: u64) -> Result<SampleOutcome> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let ev = evolve(cfg, &bs50())?;
    let cols = ev.cols();

    let mut branch_cum = Vec::with_capacity(ev.branches.len());
    let mut running = 0.0;
    for b in &ev.branches {
        running += b.prob;
        branch_cum.push(running);
    }

    struct Table {
        cum: Vec<f64>,
        accepted: Vec<bool>,
    }
    let tables: Vec<Table> = ev
        .branches
        .iter()
        .map(|b| {
            let mut cum = Vec::new();
            let mut accepted = Vec::new();
            let mut running = 0.0;
            for (key, (p, _)) in group_by_detectors(&b.state, &cols, &ev.drop) {
                running += p;
                cum.push(running);
                accepted.push(DetectionPattern::from_counts(key).is_accepted());
            }
            Table { cum, accepted }
        })
        .collect();

    let mut accepted = 0u64;
    let mut signal_accepted = 0u64;
    let blocks = shots.div_ceil(BLOCK_SHOTS);
    for block in 0..blocks {
        let mut rng = block_rng(seed, block);
        let in_block = (shots - block * BLOCK_SHOTS).min(BLOCK_SHOTS);
        for _ in 0..in_block {
            // Both draws happen unconditionally to keep the stream layout
            // independent of the parameters.
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            let bi = pick(&branch_cum, u);
            let oi = pick(&tables[bi].cum, v);
            if tables[bi].accepted[oi] {
                accepted += 1;
                if ev.branches[bi].carries_signal {
                    signal_accepted += 1;
                }
            }
        }
    }

    let shots_f = shots as f64;
    let p_hat = accepted as f64 / shots_f;
    let p_se = (p_hat * (1.0 - p_hat) / shots_f).sqrt();
    let (eta_prime_hat, eta_prime_se) = if accepted > 0 {
        let ep = signal_accepted as f64 / accepted as f64;
        (ep, (ep * (1.0 - ep) / accepted as f64).sqrt())
    } else {
        (0.0, 0.0)
    };
    let (gain_hat, gain_se) = if cfg.eta > 0.0 {
        (Some(eta_prime_hat / cfg.eta), Some(eta_prime_se / cfg.eta))
    } else {
        (None, None)
    };

    Ok(SampleOutcome {
        n: cfg.n,
        eta: cfg.eta,
        t: cfg.t,
        shots,
        seed,
        accepted,
        signal_accepted,
        p_hat,
        p_se,
        eta_prime_hat,
        eta_prime_se,
        gain_hat,
        gain_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics;
    use crate::optics::{project_pattern, Port};
    use proptest::prelude::*;

    fn cfg(n: u32, eta: f64, t: f64) -> ProtocolConfig {
        ProtocolConfig::new(n, eta, t).unwrap()
    }

    #[test]
    fn config_validates_ranges() {
        assert!(matches!(
            ProtocolConfig::new(1, 0.5, 0.5),
            Err(Error::TooFewModes(1))
        ));
        assert!(matches!(
            ProtocolConfig::new(17, 0.5, 0.5),
            Err(Error::TooManyModes(17))
        ));
        assert!(matches!(
            ProtocolConfig::new(3, 1.5, 0.5),
            Err(Error::OutOfRange { name: "eta", .. })
        ));
        assert!(matches!(
            ProtocolConfig::new(3, 0.5, -0.1),
            Err(Error::OutOfRange { name: "t", .. })
        ));
    }

    #[test]
    fn w_state_has_uniform_single_photon_components() {
        let w = build_w_state(3).unwrap();
        assert_eq!(
            w.registry().labels().collect::<Vec<_>>(),
            vec!["a1", "a2", "a3"]
        );
        assert_eq!(w.num_terms(), 3);
        let amp = 1.0 / 3f64.sqrt();
        for occ in [[1, 0, 0], [0, 1, 0], [0, 0, 1]] {
            assert!((w.amplitude(&occ) - Amplitude::new(amp, 0.0)).norm() < 1e-15);
        }
        assert!(w.is_normalized());
        assert!(matches!(build_w_state(1), Err(Error::TooFewModes(1))));
        let w2 = build_w_state(2).unwrap();
        assert!((w2.amplitude(&[1, 0]).re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn balanced_fixed_point_reproduces_known_values() {
        // At n = 3, eta = t = 1/2: P = 1/8, eta' = 1/2, G = 1.
        let out = run_nla(&cfg(3, 0.5, 0.5)).unwrap();
        assert!((out.success_prob - 0.125).abs() < 1e-15);
        assert!((out.eta_prime - 0.5).abs() < 1e-15);
        assert!((out.gain - 1.0).abs() < 1e-15);
        assert!(!out.gain_is_limit);
        assert_eq!(out.per_pattern.len(), 8);
        for (i, p) in out.per_pattern.iter().enumerate() {
            assert_eq!(p.pattern.id(), Some(i));
            assert!((p.prob - 0.125 / 8.0).abs() < 1e-16);
            assert!((p.fidelity_to_w - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lossy_unbalanced_run_matches_hand_computed_values() {
        // n = 3, eta = 0.2, t = 0.3:
        // P = 0.2 * 0.7 * 0.09 + 0.8 * 0.027 = 0.0342,
        // eta' = 0.0126 / 0.0342 = 7/19, G = 35/19.
        let out = run_nla(&cfg(3, 0.2, 0.3)).unwrap();
        assert!((out.success_prob - 0.0342).abs() < 1e-15);
        assert!((out.eta_prime - 7.0 / 19.0).abs() < 1e-14);
        assert!((out.gain - 35.0 / 19.0).abs() < 1e-13);
        for p in &out.per_pattern {
            assert!((p.prob - 0.0342 / 8.0).abs() < 1e-16);
            assert!((p.fidelity_to_w - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn five_mode_run_agrees_with_closed_forms() {
        let c = cfg(5, 0.3, 0.4);
        let out = run_nla(&c).unwrap();
        let p = analytics::success_prob(0.3, 0.4, 5).unwrap();
        let ep = analytics::eta_prime(0.3, 0.4, 5).unwrap();
        let g = analytics::gain(0.3, 0.4).unwrap();
        assert!((out.success_prob - p).abs() < 1e-12 * p);
        assert!((out.eta_prime - ep).abs() < 1e-12);
        assert!((out.gain - g.value).abs() < 1e-12 * g.value);
        assert_eq!(out.per_pattern.len(), 32);
        let sum: f64 = out.per_pattern.iter().map(|p| p.prob).sum();
        assert!((sum - out.success_prob).abs() < 1e-15);
    }

    #[test]
    fn heralded_signs_follow_the_minus_clicks() {
        // Pure W branch (eta = 1), n = 3, t = 0.3, pattern (+, -, +):
        // each component j carries sqrt((1-t) t^2 / 3) / sqrt(8), with a
        // minus sign exactly on the component behind the minus click.
        let t = 0.3;
        let ev = evolve(&cfg(3, 1.0, t), &bs50()).unwrap();
        assert_eq!(ev.branches.len(), 1);
        let pattern = DetectionPattern::accepted(&[Port::Plus, Port::Minus, Port::Plus]);
        let (prob, rem) = project_pattern(&ev.branches[0].state, &ev.pairs, &pattern).unwrap();
        let c = (0.7f64 * 0.09 / 3.0 / 8.0).sqrt();
        assert!((prob - 3.0 * c * c).abs() < 1e-15);
        assert_eq!(
            rem.registry().labels().collect::<Vec<_>>(),
            vec!["o1", "o2", "o3"]
        );
        assert!((rem.amplitude(&[1, 0, 0]) - Amplitude::new(c, 0.0)).norm() < 1e-15);
        assert!((rem.amplitude(&[0, 1, 0]) - Amplitude::new(-c, 0.0)).norm() < 1e-15);
        assert!((rem.amplitude(&[0, 0, 1]) - Amplitude::new(c, 0.0)).norm() < 1e-15);

        // The correction flips exactly that sign back.
        let corrected = phase_correct(&rem, &pattern).unwrap();
        for occ in [[1, 0, 0], [0, 1, 0], [0, 0, 1]] {
            assert!((corrected.amplitude(&occ) - Amplitude::new(c, 0.0)).norm() < 1e-15);
        }
        let w_kept = w_state_over(rem.registry());
        assert!((corrected.fidelity(&w_kept).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_minus_pattern_heralds_the_negated_w_state() {
        // Every component flips sign: a global phase, so the uncorrected
        // fidelity to W is already 1, and correction keeps it there.
        let ev = evolve(&cfg(3, 1.0, 0.3), &bs50()).unwrap();
        let pattern = DetectionPattern::accepted(&[Port::Minus; 3]);
        let (_, rem) = project_pattern(&ev.branches[0].state, &ev.pairs, &pattern).unwrap();
        let c = (0.7f64 * 0.09 / 3.0 / 8.0).sqrt();
        for occ in [[1, 0, 0], [0, 1, 0], [0, 0, 1]] {
            assert!((rem.amplitude(&occ) - Amplitude::new(-c, 0.0)).norm() < 1e-15);
        }
        let w_kept = w_state_over(rem.registry());
        assert!((rem.fidelity(&w_kept).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_minus_pattern_uncorrected_fidelity_is_one_ninth() {
        // One sign flipped out of three: |<W|psi>|^2 = ((3 - 2)/3)^2 = 1/9.
        let ev = evolve(&cfg(3, 1.0, 0.3), &bs50()).unwrap();
        let pattern = DetectionPattern::accepted(&[Port::Minus, Port::Plus, Port::Plus]);
        let (_, rem) = project_pattern(&ev.branches[0].state, &ev.pairs, &pattern).unwrap();
        let w_kept = w_state_over(rem.registry());
        assert!((rem.fidelity(&w_kept).unwrap() - 1.0 / 9.0).abs() < 1e-13);
    }

    #[test]
    fn phase_correct_validates_its_inputs() {
        let r = Arc::new(ModeRegistry::new(["o1", "o2"]).unwrap());
        let s = PureState::vacuum(&r);
        let rejected = DetectionPattern::from_counts(vec![(1, 1), (1, 0)]);
        assert!(matches!(
            phase_correct(&s, &rejected),
            Err(Error::PatternNotAccepted)
        ));
        let too_long = DetectionPattern::accepted(&[Port::Plus; 3]);
        assert!(matches!(
            phase_correct(&s, &too_long),
            Err(Error::PatternLengthMismatch { .. })
        ));
        let ok = DetectionPattern::accepted(&[Port::Plus, Port::Minus]);
        assert!(phase_correct(&s, &ok).is_ok());
    }

    #[test]
    fn output_state_is_the_heralded_two_branch_mixture() {
        let out = run_nla(&cfg(3, 0.2, 0.3)).unwrap();
        let branches = out.output_state.branches();
        assert_eq!(branches.len(), 2);
        assert!((branches[0].0 - 7.0 / 19.0).abs() < 1e-14);
        let w_kept = w_state_over(out.output_state.registry());
        assert!((branches[0].1.fidelity(&w_kept).unwrap() - 1.0).abs() < 1e-14);
        assert!((branches[1].0 - 12.0 / 19.0).abs() < 1e-14);
        assert_eq!(
            branches[1].1.amplitude(&[0, 0, 0]),
            Amplitude::new(1.0, 0.0)
        );
    }

    #[test]
    fn boundary_runs_take_their_limits() {
        // t = 0: nothing is accepted, the heralded limits apply.
        let out = run_nla(&cfg(3, 0.4, 0.0)).unwrap();
        assert_eq!(out.success_prob, 0.0);
        assert_eq!(out.eta_prime, 1.0);
        assert!((out.gain - 2.5).abs() < 1e-15);
        assert!(out.gain_is_limit);
        assert!(out.per_pattern.iter().all(|p| p.prob == 0.0));

        // eta = 0: the vacuum is heralded, gain is the (1-t)/t limit.
        let out = run_nla(&cfg(3, 0.0, 0.25)).unwrap();
        assert_eq!(out.eta_prime, 0.0);
        assert_eq!(out.gain, 3.0);
        assert!(out.gain_is_limit);
        assert_eq!(out.output_state.branches().len(), 1);

        // eta = 1: lossless input, unit gain.
        let out = run_nla(&cfg(3, 1.0, 0.25)).unwrap();
        assert!((out.eta_prime - 1.0).abs() < 1e-14);
        assert!((out.gain - 1.0).abs() < 1e-14);
        assert!(out.gain_is_limit);

        // The two corners have no meaningful limit.
        assert!(matches!(
            run_nla(&cfg(3, 0.0, 0.0)),
            Err(Error::UndefinedLimit { .. })
        ));
        assert!(matches!(
            run_nla(&cfg(3, 1.0, 1.0)),
            Err(Error::UndefinedLimit { .. })
        ));
    }

    #[test]
    fn outcome_json_has_the_documented_shape() {
        let out = run_nla(&cfg(3, 0.5, 0.5)).unwrap();
        let json = out.to_json();
        assert!(json.starts_with(r#"{"n":3,"eta":0.5,"t":0.5,"eta_prime":"#));
        assert!(json.contains(r#""patterns":[{"id":0,"#));
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        let obj = value.as_object().unwrap();
        let mut keys: Vec<_> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            vec![
                "eta",
                "eta_prime",
                "gain",
                "n",
                "p_success",
                "patterns",
                "t"
            ]
        );
        let patterns = obj["patterns"].as_array().unwrap();
        assert_eq!(patterns.len(), 8);
        let mut pkeys: Vec<_> = patterns[0]
            .as_object()
            .unwrap()
            .keys()
            .map(String::as_str)
            .collect();
        pkeys.sort_unstable();
        assert_eq!(pkeys, vec!["fidelity", "id", "prob"]);
    }

    #[test]
    fn detection_distribution_is_complete_and_consistent() {
        let c = cfg(3, 0.4, 0.35);
        let dist = detection_distribution(&c).unwrap();
        let total: f64 = dist.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-13);
        let accepted_sum: f64 = dist
            .iter()
            .filter(|(pat, _)| pat.is_accepted())
            .map(|(_, p)| p)
            .sum();
        let out = run_nla(&c).unwrap();
        assert!((accepted_sum - out.success_prob).abs() < 1e-15);
        // Double clicks from photon bunching must appear.
        assert!(dist
            .iter()
            .any(|(pat, p)| pat.counts().contains(&(2, 0)) && *p > 0.0));
    }

    #[test]
    fn grouped_projection_matches_individual_projections() {
        // The batched split over detector readouts must agree bit for bit
        // with projecting each pattern on its own.
        let ev = evolve(&cfg(3, 0.6, 0.45), &bs50()).unwrap();
        for pattern in DetectionPattern::all_accepted(3) {
            let mut grouped = 0.0;
            let mut individual = 0.0;
            for branch in &ev.branches {
                let group = group_by_detectors(&branch.state, &ev.cols(), &ev.drop);
                if let Some((p, _)) = group.get(pattern.counts()) {
                    grouped += branch.prob * p;
                }
                let (p, _) = project_pattern(&branch.state, &ev.pairs, &pattern).unwrap();
                individual += branch.prob * p;
            }
            assert_eq!(grouped, individual);
        }
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let c = cfg(3, 0.5, 0.5);
        let a = sample_run(&c, 20_000, 42).unwrap();
        let b = sample_run(&c, 20_000, 42).unwrap();
        assert_eq!(a.accepted, b.accepted);
        assert_eq!(a.signal_accepted, b.signal_accepted);
        assert_eq!(a.p_hat, b.p_hat);
        let other = sample_run(&c, 20_000, 43).unwrap();
        assert!(other.accepted != a.accepted || other.signal_accepted != a.signal_accepted);
    }

    #[test]
    fn sampling_estimates_sit_within_five_sigma() {
        let c = cfg(3, 0.5, 0.5);
        let s = sample_run(&c, 200_000, 7).unwrap();
        assert!((s.p_hat - 0.125).abs() < 5.0 * s.p_se);
        assert!((s.eta_prime_hat - 0.5).abs() < 5.0 * s.eta_prime_se);
        let g = s.gain_hat.unwrap();
        assert!((g - 1.0).abs() < 5.0 * s.gain_se.unwrap());
    }

    #[test]
    fn sampling_handles_degenerate_parameters() {
        assert!(matches!(
            sample_run(&cfg(3, 0.5, 0.5), 0, 1),
            Err(Error::ZeroShots)
        ));
        // t = 0: no shot is ever accepted.
        let s = sample_run(&cfg(3, 0.5, 0.0), 1_000, 1).unwrap();
        assert_eq!(s.accepted, 0);
        assert_eq!(s.eta_prime_hat, 0.0);
        // eta = 0: gain is undefined, acceptance still happens.
        let s = sample_run(&cfg(2, 0.0, 0.5), 1_000, 1).unwrap();
        assert!(s.gain_hat.is_none());
        assert!(s.accepted > 0);
        assert_eq!(s.signal_accepted, 0);
        // A single shot works.
        let s = sample_run(&cfg(2, 0.5, 0.5), 1, 9).unwrap();
        assert!(s.accepted <= 1);
    }

    #[test]
    fn sampling_block_boundary_is_seamless() {
        // Crossing the 65536-shot block boundary keeps the prefix stream:
        // the first block's draws are unchanged, so the counts never drop.
        let c = cfg(2, 0.5, 0.5);
        let small = sample_run(&c, BLOCK_SHOTS, 5).unwrap();
        let large = sample_run(&c, BLOCK_SHOTS + 1_000, 5).unwrap();
        assert!(large.accepted >= small.accepted);
        assert!(large.shots == BLOCK_SHOTS + 1_000);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prop_exact_run_matches_closed_forms(
            n in 2u32..=4,
            eta in 0.05f64..=0.95,
            t in 0.05f64..=0.95,
        ) {
            let out = run_nla(&cfg(n, eta, t)).unwrap();
            let p = analytics::success_prob(eta, t, n).unwrap();
            let ep = analytics::eta_prime(eta, t, n).unwrap();
            let g = analytics::gain(eta, t).unwrap().value;
            prop_assert!((out.success_prob - p).abs() <= 1e-12 * p.max(1e-6));
            prop_assert!((out.eta_prime - ep).abs() <= 1e-12);
            prop_assert!((out.gain - g).abs() <= 1e-12 * g.max(1.0));
        }

        #[test]
        fn prop_patterns_are_uniform_and_perfectly_corrected(
            n in 2u32..=4,
            eta in 0.05f64..=0.95,
            t in 0.05f64..=0.95,
        ) {
            let out = run_nla(&cfg(n, eta, t)).unwrap();
            let share = out.success_prob / f64::from(1u32 << n);
            for p in &out.per_pattern {
                prop_assert!((p.prob - share).abs() < 1e-14);
                prop_assert!(p.fidelity_to_w > 1.0 - 1e-12);
            }
            let total: f64 = out.per_pattern.iter().map(|p| p.prob).sum();
            prop_assert!((total - out.success_prob).abs() < 1e-14);
        }

        #[test]
        fn prop_detection_distribution_sums_to_one(
            n in 2u32..=4,
            eta in 0.0f64..=1.0,
            t in 0.05f64..=0.95,
        ) {
            let dist = detection_distribution(&cfg(n, eta, t)).unwrap();
            let total: f64 = dist.iter().map(|(_, p)| p).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
