//! Multi-hop teleportation over a chain of partially entangled GHZ triples.
//!
//! Particle layout: the triple shared by an upstream node `U` and its
//! downstream neighbour `W` (downstream = toward the destination) keeps one
//! *tail* particle at `U` and two *head* particles `h1`, `h2` at `W`.
//!
//! The channel between the node currently holding the tail and the
//! destination is `m|0,00⟩ + k|1,11⟩` over `(tail, H1, H2)`. A swap node
//! Bell-measures `(h2 of its upstream triple, its tail)` and measures its
//! upstream `h1` in the Hadamard basis; the source finally Bell-measures
//! `(data, tail)` and the destination Hadamard-measures `H1`, leaving the
//! data on `H2` up to a Pauli and an amplitude imbalance `(m, k)`.
//!
//! A `Ψ` swap outcome leaves the new tail anti-correlated with the
//! destination pair, i.e. the channel carries an `X` on its tail. The frame is
//! never corrected physically; the next Bell outcome measured against that
//! tail is read with its class flipped (`φ± ↔ Ψ±`). [`ChannelFrame`]
//! implements that bookkeeping, and the Pauli correction itself is exactly the
//! phase-free product of the per-hop table entries.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{BellOutcome, BitOutcome, ComplexAmp, Matrix4, PauliOp, QubitId, StateVector};

/// Longest chain the state-vector paths accept.
pub const EXACT_HOP_LIMIT: usize = 6;

/// Degree of entanglement `n` of `(|000⟩ + n|111⟩)/√(1+n²)`, `0 < n ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct EntanglementDegree(f64);

impl EntanglementDegree {
    pub const MAXIMAL: EntanglementDegree = EntanglementDegree(1.0);

    pub fn new(n: f64) -> Result<Self> {
        if n > 0.0 && n <= 1.0 {
            Ok(EntanglementDegree(n))
        } else {
            Err(Error::Parameter(format!(
                "entanglement degree {n} outside (0, 1]"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for EntanglementDegree {
    type Error = Error;
    fn try_from(n: f64) -> Result<Self> {
        Self::new(n)
    }
}

impl From<EntanglementDegree> for f64 {
    fn from(n: EntanglementDegree) -> f64 {
        n.0
    }
}

impl fmt::Display for EntanglementDegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unnormalized coefficients of `m|0..0⟩ + k|1..1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelCoeffs {
    pub m: f64,
    pub k: f64,
}

impl ChannelCoeffs {
    pub fn swapped(self) -> Self {
        ChannelCoeffs {
            m: self.k,
            k: self.m,
        }
    }

    pub fn min(self) -> f64 {
        self.m.min(self.k)
    }

    pub fn max(self) -> f64 {
        self.m.max(self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HopMeasurement {
    pub bell: BellOutcome,
    pub had: BitOutcome,
}

impl HopMeasurement {
    pub fn new(bell: BellOutcome, had: BitOutcome) -> Self {
        HopMeasurement { bell, had }
    }
}

impl fmt::Display for HopMeasurement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.bell, self.had)
    }
}

/// Measurement pairs in the order they are produced: swap nodes from the
/// destination side toward the source, then `(source Bell, destination H1)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementLog {
    pub pairs: Vec<HopMeasurement>,
}

impl MeasurementLog {
    pub fn new(pairs: Vec<HopMeasurement>) -> Self {
        MeasurementLog { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn push(&mut self, h: HopMeasurement) {
        self.pairs.push(h);
    }

    /// Everything but the final pair.
    pub fn swaps(&self) -> &[HopMeasurement] {
        match self.pairs.split_last() {
            Some((_, rest)) => rest,
            None => &[],
        }
    }

    pub fn final_pair(&self) -> Option<HopMeasurement> {
        self.pairs.last().copied()
    }
}

impl fmt::Display for MeasurementLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.pairs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub success: bool,
    pub output: Option<StateVector>,
    pub log: MeasurementLog,
    /// Channel coefficients `(m_N, k_N)` after all swaps.
    pub coeffs: ChannelCoeffs,
    /// Probability that the amplitude correction succeeds on this branch.
    pub attempt_prob: f64,
}

/// Channel state before any swap: the destination's own triple.
pub fn initial_coeffs(n: EntanglementDegree) -> ChannelCoeffs {
    ChannelCoeffs { m: 1.0, k: n.0 }
}

/// Coefficient recurrence for one swap; `bell` is read in the channel's own
/// frame (see [`ChannelFrame`]).
pub fn swap_update(c: ChannelCoeffs, bell: BellOutcome, n: EntanglementDegree) -> ChannelCoeffs {
    if bell.is_psi() {
        ChannelCoeffs {
            m: n.0 * c.m,
            k: c.k,
        }
    } else {
        ChannelCoeffs {
            m: c.m,
            k: n.0 * c.k,
        }
    }
}

/// Pauli lookup keyed by `(Bell outcome, Hadamard-basis outcome)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorrectionTable([PauliOp; 8]);

impl CorrectionTable {
    pub const STANDARD: CorrectionTable = CorrectionTable([
        PauliOp::Identity, // φ+, 0
        PauliOp::Z,        // φ+, 1
        PauliOp::Z,        // φ-, 0
        PauliOp::Identity, // φ-, 1
        PauliOp::X,        // Ψ+, 0
        PauliOp::ZX,       // Ψ+, 1
        PauliOp::ZX,       // Ψ-, 0
        PauliOp::X,        // Ψ-, 1
    ]);

    fn index(h: HopMeasurement) -> usize {
        let bell = match h.bell {
            BellOutcome::PhiPlus => 0,
            BellOutcome::PhiMinus => 1,
            BellOutcome::PsiPlus => 2,
            BellOutcome::PsiMinus => 3,
        };
        2 * bell + h.had.bit()
    }

    pub fn lookup(&self, h: HopMeasurement) -> PauliOp {
        self.0[Self::index(h)]
    }

    /// Copy with one entry replaced.
    pub fn with_entry(mut self, h: HopMeasurement, op: PauliOp) -> Self {
        self.0[Self::index(h)] = op;
        self
    }

    pub fn compose(&self, log: &MeasurementLog) -> PauliOp {
        log.pairs
            .iter()
            .fold(PauliOp::Identity, |acc, &h| acc.then(self.lookup(h)))
    }
}

impl Default for CorrectionTable {
    fn default() -> Self {
        Self::STANDARD
    }
}

pub fn pauli_for(h: HopMeasurement) -> PauliOp {
    CorrectionTable::STANDARD.lookup(h)
}

pub fn compose_corrections(log: &MeasurementLog) -> PauliOp {
    CorrectionTable::STANDARD.compose(log)
}

/// Channel coefficients plus the `X` frame sitting on the current tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelFrame {
    pub coeffs: ChannelCoeffs,
    pub tail_flipped: bool,
    n: EntanglementDegree,
}

impl ChannelFrame {
    pub fn new(n: EntanglementDegree) -> Self {
        ChannelFrame {
            coeffs: initial_coeffs(n),
            tail_flipped: false,
            n,
        }
    }

    /// Translate a Bell outcome measured against the tail into the channel frame.
    pub fn effective(&self, raw: BellOutcome) -> BellOutcome {
        if self.tail_flipped {
            raw.flip_class()
        } else {
            raw
        }
    }

    /// Absorb a swap; returns the outcome as seen in the channel frame.
    pub fn absorb_swap(&mut self, raw: BellOutcome) -> BellOutcome {
        let eff = self.effective(raw);
        self.coeffs = swap_update(self.coeffs, eff, self.n);
        self.tail_flipped = eff.is_psi();
        eff
    }

    /// Coefficients of the destination qubit `a|0⟩ + b|1⟩ ∝ mα|0⟩ + kβ|1⟩`
    /// once the Pauli correction for the source outcome has been applied.
    pub fn target_coeffs(&self, source_raw: BellOutcome) -> ChannelCoeffs {
        if self.effective(source_raw).is_psi() {
            self.coeffs.swapped()
        } else {
            self.coeffs
        }
    }
}

/// Replay the swap part of a log.
pub fn replay_channel(swaps: &[HopMeasurement], n: EntanglementDegree) -> ChannelFrame {
    let mut frame = ChannelFrame::new(n);
    for h in swaps {
        frame.absorb_swap(h.bell);
    }
    frame
}

/// What the destination does with a complete log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryPlan {
    pub pauli: PauliOp,
    /// Coefficients on `|0⟩`, `|1⟩` of the Pauli-corrected destination qubit.
    pub target: ChannelCoeffs,
    /// Channel coefficients before the source measurement.
    pub channel: ChannelCoeffs,
}

pub fn recovery_plan(
    log: &MeasurementLog,
    n: EntanglementDegree,
    table: &CorrectionTable,
) -> Result<RecoveryPlan> {
    let last = log
        .final_pair()
        .ok_or_else(|| Error::Parameter("empty measurement log".into()))?;
    let frame = replay_channel(log.swaps(), n);
    Ok(RecoveryPlan {
        pauli: table.compose(log),
        target: frame.target_coeffs(last.bell),
        channel: frame.coeffs,
    })
}

/// Amplitude-correction unitary on `(target, auxiliary)`.
///
/// The auxiliary starts in `|0⟩`; the larger computational component of the
/// target is rescaled by `r = min(m,k)/max(m,k)` on the `aux = |0⟩` branch,
/// which is the returned success outcome.
pub fn correction_unitary(c: ChannelCoeffs) -> Result<(Matrix4, BitOutcome)> {
    if !(c.m > 0.0 && c.k > 0.0) || !c.m.is_finite() || !c.k.is_finite() {
        return Err(Error::Parameter(format!(
            "channel coefficients ({}, {}) must be positive",
            c.m, c.k
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut u = [[zero; 4]; 4];
    let r = c.min() / c.max();
    if r >= 1.0 {
        for (i, row) in u.iter_mut().enumerate() {
            row[i] = one;
        }
        return Ok((u, BitOutcome::Zero));
    }
    let s = (1.0 - r * r).sqrt();
    // basis index 2·target + aux
    let (block, fixed) = if c.m > c.k { (0, 2) } else { (2, 0) };
    u[block][block] = Complex64::new(r, 0.0);
    u[block + 1][block] = Complex64::new(s, 0.0);
    u[block][block + 1] = Complex64::new(s, 0.0);
    u[block + 1][block + 1] = Complex64::new(-r, 0.0);
    u[fixed][fixed] = one;
    u[fixed + 1][fixed + 1] = one;
    Ok((u, BitOutcome::Zero))
}

/// Closed-form end-to-end success probability over `i` GHZ triples.
pub fn analytic_success(i: usize, n: EntanglementDegree) -> Result<f64> {
    if i == 0 {
        return Err(Error::Parameter("hop count must be at least 1".into()));
    }
    let n2 = n.0 * n.0;
    // n^{2a}/(1+n²)^i = q^a (1-q)^(i-a)
    let q = n2 / (1.0 + n2);
    let term = |a: usize| q.powi(a as i32) * (1.0 - q).powi((i - a) as i32);
    let p = if i % 2 == 1 {
        2.0 * (0..=(i - 1) / 2)
            .map(|j| binomial(i, j) * term(i - j))
            .sum::<f64>()
    } else {
        let h = i / 2;
        binomial(i, h) * term(h)
            + (1..=h)
                .map(|j| binomial(i, h - j) * 2.0 * term(h + j))
                .sum::<f64>()
    };
    Ok(p.min(1.0))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Aggregate of the exhaustive branch enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSummary {
    /// Σ branch probability × correction success probability.
    pub success: f64,
    /// Σ branch probability; 1 up to rounding.
    pub total_prob: f64,
    /// Smallest output fidelity over branches whose correction can succeed.
    pub min_fidelity: f64,
    pub branches: usize,
}

/// Exhaustive state-vector evaluation of the chain with the standard table.
pub fn exact_chain_success(
    hops: usize,
    n: EntanglementDegree,
    alpha: ComplexAmp,
    beta: ComplexAmp,
) -> Result<f64> {
    Ok(enumerate_chain(hops, n, alpha, beta, &CorrectionTable::STANDARD)?.success)
}

/// Walk every Bell × Hadamard outcome sequence of a `hops`-triple chain.
pub fn enumerate_chain(
    hops: usize,
    n: EntanglementDegree,
    alpha: ComplexAmp,
    beta: ComplexAmp,
    table: &CorrectionTable,
) -> Result<OracleSummary> {
    check_hops(hops)?;
    let input = StateVector::new_qubit(alpha, beta)?;
    let ghz = StateVector::ghz_triple(n.0)?;
    let mut walk = Enumeration {
        n,
        table,
        input: &input,
        ghz: &ghz,
        summary: OracleSummary {
            success: 0.0,
            total_prob: 0.0,
            min_fidelity: 1.0,
            branches: 0,
        },
        log: MeasurementLog::default(),
    };
    // destination triple: tail 0, H1 1, H2 2
    walk.swaps(ghz.clone(), 0, hops - 1, 1.0)?;
    Ok(walk.summary)
}

fn check_hops(hops: usize) -> Result<()> {
    if hops == 0 {
        return Err(Error::Parameter("hop count must be at least 1".into()));
    }
    if hops > EXACT_HOP_LIMIT {
        return Err(Error::Capacity {
            requested: hops,
            limit: EXACT_HOP_LIMIT,
        });
    }
    Ok(())
}

const H1: QubitId = 1;
const H2: QubitId = 2;

struct Enumeration<'a> {
    n: EntanglementDegree,
    table: &'a CorrectionTable,
    input: &'a StateVector,
    ghz: &'a StateVector,
    summary: OracleSummary,
    log: MeasurementLog,
}

impl Enumeration<'_> {
    fn swaps(&mut self, state: StateVector, tail: QubitId, left: usize, prob: f64) -> Result<()> {
        if left == 0 {
            return self.finish(state, tail, prob);
        }
        let up = state.next_label();
        let (u_tail, x1, x2) = (up, up + 1, up + 2);
        let joint = state.tensor(self.ghz)?;
        for bell in BellOutcome::ALL {
            let pb = joint.project_bell(x2, tail, bell)?;
            let Some(mut s) = pb.state else { continue };
            s.apply_hadamard(x1)?;
            for had in BitOutcome::ALL {
                let ph = s.project_computational(x1, had)?;
                let Some(rest) = ph.state else { continue };
                self.log.push(HopMeasurement::new(bell, had));
                self.swaps(rest, u_tail, left - 1, prob * pb.prob * ph.prob)?;
                self.log.pairs.pop();
            }
        }
        Ok(())
    }

    fn finish(&mut self, state: StateVector, tail: QubitId, prob: f64) -> Result<()> {
        let data = state.next_label();
        let joint = state.tensor(self.input)?;
        for bell in BellOutcome::ALL {
            let pb = joint.project_bell(data, tail, bell)?;
            let Some(mut s) = pb.state else { continue };
            s.apply_hadamard(H1)?;
            for had in BitOutcome::ALL {
                let ph = s.project_computational(H1, had)?;
                let Some(mut out) = ph.state else { continue };
                let branch = prob * pb.prob * ph.prob;
                self.log.push(HopMeasurement::new(bell, had));
                let plan = recovery_plan(&self.log, self.n, self.table)?;
                self.log.pairs.pop();

                out.apply_pauli(H2, plan.pauli)?;
                let (u, ok) = correction_unitary(plan.target)?;
                let aux = out.next_label();
                let mut s2 = out.tensor(&StateVector::basis(BitOutcome::Zero))?;
                s2.apply_two_qubit_unitary(H2, aux, &u)?;
                let pa = s2.project_computational(aux, ok)?;

                self.summary.branches += 1;
                self.summary.total_prob += branch;
                self.summary.success += branch * pa.prob;
                if let Some(result) = pa.state {
                    let f = result.fidelity(self.input)?;
                    self.summary.min_fidelity = self.summary.min_fidelity.min(f);
                }
            }
        }
        Ok(())
    }
}

/// Outcome of the destination's recovery step.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub log: MeasurementLog,
    pub success: bool,
    pub output: Option<StateVector>,
    pub fidelity: Option<f64>,
    pub coeffs: ChannelCoeffs,
    pub attempt_prob: f64,
}

/// Quantum side of a route, driven one protocol step at a time.
///
/// Calls must come in protocol order: `swap` once per intermediate node
/// (destination side first), `measure_source`, then `recover`.
pub trait QuantumChannel {
    fn swap(&mut self, rng: &mut dyn RngCore) -> Result<HopMeasurement>;
    fn measure_source(&mut self, rng: &mut dyn RngCore) -> Result<BellOutcome>;
    fn recover(
        &mut self,
        swaps: &[HopMeasurement],
        source_bell: BellOutcome,
        rng: &mut dyn RngCore,
    ) -> Result<Recovery>;
}

/// Full state-vector channel. Triples are brought in lazily as the reply
/// walks upstream, so at most six qubits are live.
#[derive(Debug, Clone)]
pub struct ExactChannel {
    n: EntanglementDegree,
    table: CorrectionTable,
    input: StateVector,
    ghz: StateVector,
    state: StateVector,
    tail: QubitId,
    swaps_done: usize,
    stage: Stage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Swapping,
    Measured,
    Done,
}

impl ExactChannel {
    pub fn new(input: &StateVector, n: EntanglementDegree) -> Result<Self> {
        Self::with_table(input, n, CorrectionTable::STANDARD)
    }

    pub fn with_table(
        input: &StateVector,
        n: EntanglementDegree,
        table: CorrectionTable,
    ) -> Result<Self> {
        if input.num_qubits() != 1 {
            return Err(Error::Parameter("input must be a single qubit".into()));
        }
        let ghz = StateVector::ghz_triple(n.0)?;
        Ok(ExactChannel {
            n,
            table,
            input: input.clone(),
            state: ghz.clone(),
            ghz,
            tail: 0,
            swaps_done: 0,
            stage: Stage::Swapping,
        })
    }

    fn expect(&self, stage: Stage, what: &str) -> Result<()> {
        if self.stage == stage {
            Ok(())
        } else {
            Err(Error::Protocol(format!("{what} called out of order")))
        }
    }
}

impl QuantumChannel for ExactChannel {
    fn swap(&mut self, rng: &mut dyn RngCore) -> Result<HopMeasurement> {
        self.expect(Stage::Swapping, "swap")?;
        if self.swaps_done + 1 >= EXACT_HOP_LIMIT {
            return Err(Error::Capacity {
                requested: self.swaps_done + 2,
                limit: EXACT_HOP_LIMIT,
            });
        }
        let up = self.state.next_label();
        let joint = self.state.tensor(&self.ghz)?;
        let (bell, mut s) = joint.sample_bell(up + 2, self.tail, rng)?;
        s.apply_hadamard(up + 1)?;
        let (had, rest) = s.sample_computational(up + 1, rng)?;
        self.state = rest;
        self.tail = up;
        self.swaps_done += 1;
        Ok(HopMeasurement::new(bell, had))
    }

    fn measure_source(&mut self, rng: &mut dyn RngCore) -> Result<BellOutcome> {
        self.expect(Stage::Swapping, "measure_source")?;
        let data = self.state.next_label();
        let joint = self.state.tensor(&self.input)?;
        let (bell, rest) = joint.sample_bell(data, self.tail, rng)?;
        self.state = rest;
        self.stage = Stage::Measured;
        Ok(bell)
    }

    fn recover(
        &mut self,
        swaps: &[HopMeasurement],
        source_bell: BellOutcome,
        rng: &mut dyn RngCore,
    ) -> Result<Recovery> {
        self.expect(Stage::Measured, "recover")?;
        self.stage = Stage::Done;
        let mut s = self.state.clone();
        s.apply_hadamard(H1)?;
        let (had, mut out) = s.sample_computational(H1, rng)?;
        let mut pairs = swaps.to_vec();
        pairs.push(HopMeasurement::new(source_bell, had));
        let log = MeasurementLog::new(pairs);
        let plan = recovery_plan(&log, self.n, &self.table)?;

        out.apply_pauli(H2, plan.pauli)?;
        let (u, ok) = correction_unitary(plan.target)?;
        let aux = out.next_label();
        let mut s2 = out.tensor(&StateVector::basis(BitOutcome::Zero))?;
        s2.apply_two_qubit_unitary(H2, aux, &u)?;
        let attempt_prob = s2.project_computational(aux, ok)?.prob;
        let (bit, result) = s2.sample_computational(aux, rng)?;
        let success = bit == ok;
        let fidelity = if success {
            Some(result.fidelity(&self.input)?)
        } else {
            None
        };
        Ok(Recovery {
            log,
            success,
            output: success.then_some(result),
            fidelity,
            coeffs: plan.channel,
            attempt_prob,
        })
    }
}

/// Coefficient-tracking channel: samples outcomes from the same distribution
/// as [`ExactChannel`] without building a state vector.
#[derive(Debug, Clone)]
pub struct TrackedChannel {
    n: EntanglementDegree,
    table: CorrectionTable,
    input: StateVector,
    alpha2: f64,
    beta2: f64,
    frame: ChannelFrame,
    stage: Stage,
}

impl TrackedChannel {
    pub fn new(input: &StateVector, n: EntanglementDegree) -> Result<Self> {
        if input.num_qubits() != 1 {
            return Err(Error::Parameter("input must be a single qubit".into()));
        }
        Ok(TrackedChannel {
            n,
            table: CorrectionTable::STANDARD,
            input: input.clone(),
            alpha2: input.amplitude(0).norm_sqr(),
            beta2: input.amplitude(1).norm_sqr(),
            frame: ChannelFrame::new(n),
            stage: Stage::Swapping,
        })
    }

    pub fn frame(&self) -> &ChannelFrame {
        &self.frame
    }

    fn draw(&self, w_phi: f64, w_psi: f64, rng: &mut dyn RngCore) -> BellOutcome {
        let psi = rng.gen::<f64>() * (w_phi + w_psi) >= w_phi;
        let minus = rng.gen::<bool>();
        // outcome in the channel frame, reported as measured against the tail
        self.frame.effective(BellOutcome::from_parts(psi, minus))
    }
}

impl QuantumChannel for TrackedChannel {
    fn swap(&mut self, rng: &mut dyn RngCore) -> Result<HopMeasurement> {
        if self.stage != Stage::Swapping {
            return Err(Error::Protocol("swap called out of order".into()));
        }
        let ChannelCoeffs { m, k } = self.frame.coeffs;
        let n2 = self.n.0 * self.n.0;
        let raw = self.draw(m * m + n2 * k * k, n2 * m * m + k * k, rng);
        let had = BitOutcome::from_bit(rng.gen());
        self.frame.absorb_swap(raw);
        Ok(HopMeasurement::new(raw, had))
    }

    fn measure_source(&mut self, rng: &mut dyn RngCore) -> Result<BellOutcome> {
        if self.stage != Stage::Swapping {
            return Err(Error::Protocol("measure_source called out of order".into()));
        }
        let ChannelCoeffs { m, k } = self.frame.coeffs;
        let (a, b) = (self.alpha2, self.beta2);
        let raw = self.draw(m * m * a + k * k * b, k * k * a + m * m * b, rng);
        self.stage = Stage::Measured;
        Ok(raw)
    }

    fn recover(
        &mut self,
        swaps: &[HopMeasurement],
        source_bell: BellOutcome,
        rng: &mut dyn RngCore,
    ) -> Result<Recovery> {
        if self.stage != Stage::Measured {
            return Err(Error::Protocol("recover called out of order".into()));
        }
        self.stage = Stage::Done;
        let had = BitOutcome::from_bit(rng.gen());
        let mut pairs = swaps.to_vec();
        pairs.push(HopMeasurement::new(source_bell, had));
        let log = MeasurementLog::new(pairs);
        let plan = recovery_plan(&log, self.n, &self.table)?;
        let t = plan.target;
        let norm = t.m * t.m * self.alpha2 + t.k * t.k * self.beta2;
        let attempt_prob = (t.min() * t.min() / norm).min(1.0);
        let success = rng.gen::<f64>() < attempt_prob;
        Ok(Recovery {
            log,
            success,
            output: success.then(|| self.input.clone()),
            fidelity: success.then_some(1.0),
            coeffs: plan.channel,
            attempt_prob,
        })
    }
}

/// Drive a channel through `hops` triples: `hops - 1` swaps, then the source.
pub fn run_chain(
    channel: &mut dyn QuantumChannel,
    hops: usize,
    rng: &mut dyn RngCore,
) -> Result<ChainResult> {
    if hops == 0 {
        return Err(Error::Parameter("hop count must be at least 1".into()));
    }
    let mut swaps = Vec::with_capacity(hops - 1);
    for _ in 1..hops {
        swaps.push(channel.swap(rng)?);
    }
    let bell = channel.measure_source(rng)?;
    let rec = channel.recover(&swaps, bell, rng)?;
    Ok(ChainResult {
        success: rec.success,
        output: rec.output,
        log: rec.log,
        coeffs: rec.coeffs,
        attempt_prob: rec.attempt_prob,
    })
}

/// Sampled end-to-end run on the full state vector.
pub fn simulate_chain<R: RngCore>(
    input: &StateVector,
    hops: usize,
    n: EntanglementDegree,
    rng: &mut R,
) -> Result<ChainResult> {
    check_hops(hops)?;
    let mut channel = ExactChannel::new(input, n)?;
    run_chain(&mut channel, hops, rng)
}

/// Sampled run on the coefficient recurrence alone.
///
/// The source outcome distribution depends on `|α|², |β|²`, so the input is
/// still required even though no state vector is built.
pub fn track_chain<R: RngCore>(
    hops: usize,
    n: EntanglementDegree,
    input: &StateVector,
    rng: &mut R,
) -> Result<(MeasurementLog, ChannelCoeffs)> {
    let mut channel = TrackedChannel::new(input, n)?;
    let r = run_chain(&mut channel, hops, rng)?;
    Ok((r.log, r.coeffs))
}

/// Run a chain with the tracked backend and return the full result.
pub fn track_chain_result<R: RngCore>(
    hops: usize,
    n: EntanglementDegree,
    input: &StateVector,
    rng: &mut R,
) -> Result<ChainResult> {
    let mut channel = TrackedChannel::new(input, n)?;
    run_chain(&mut channel, hops, rng)
}

/// Input qubit with uniformly random Bloch-sphere direction.
pub fn random_input<R: Rng + ?Sized>(rng: &mut R) -> StateVector {
    let cos_theta: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let half = cos_theta.acos() / 2.0;
    let alpha = Complex64::new(half.cos(), 0.0);
    let beta = Complex64::from_polar(half.sin(), phi);
    StateVector::new_qubit(alpha, beta).expect("unit vector")
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn arb_hop() -> impl Strategy<Value = HopMeasurement> {
        (0usize..4, any::<bool>())
            .prop_map(|(b, h)| HopMeasurement::new(BellOutcome::ALL[b], BitOutcome::from_bit(h)))
    }

    proptest! {
        #[test]
        fn success_is_a_probability(i in 1usize..200, n in 0.01f64..=1.0) {
            let p = analytic_success(i, EntanglementDegree::new(n).unwrap()).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
        }

        #[test]
        fn success_never_rises_with_hops(i in 1usize..150, n in 0.01f64..=1.0) {
            let d = EntanglementDegree::new(n).unwrap();
            let (a, b) = (analytic_success(i, d).unwrap(), analytic_success(i + 1, d).unwrap());
            prop_assert!(b <= a + 1e-12);
        }

        #[test]
        fn odd_and_next_even_hops_agree(t in 1usize..60, n in 0.01f64..=1.0) {
            let d = EntanglementDegree::new(n).unwrap();
            let odd = analytic_success(2 * t - 1, d).unwrap();
            let even = analytic_success(2 * t, d).unwrap();
            prop_assert!((odd - even).abs() <= 1e-12 * odd.max(1e-300) + 1e-15);
        }

        #[test]
        fn stronger_entanglement_never_hurts(i in 1usize..60, lo in 0.01f64..1.0, step in 0.0f64..0.5) {
            let hi = (lo + step).min(1.0);
            let p_lo = analytic_success(i, EntanglementDegree::new(lo).unwrap()).unwrap();
            let p_hi = analytic_success(i, EntanglementDegree::new(hi).unwrap()).unwrap();
            prop_assert!(p_hi + 1e-12 >= p_lo);
        }

        #[test]
        fn correction_ignores_swap_order(hops in prop::collection::vec(arb_hop(), 1..12)) {
            let forward = compose_corrections(&MeasurementLog::new(hops.clone()));
            let mut rev = hops;
            rev.reverse();
            prop_assert_eq!(forward, compose_corrections(&MeasurementLog::new(rev)));
        }
    }
}
