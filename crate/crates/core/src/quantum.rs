//! Small exact state-vector engine.
//!
//! Qubits carry stable labels. Measuring a qubit removes it from the
//! register, so the remaining labels keep pointing at the same physical
//! particles while the amplitude array shrinks.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ComplexAmp = Complex64;
pub type QubitId = u32;

/// Largest register the engine will build.
pub const MAX_QUBITS: usize = 16;
/// Tolerance on the squared norm of a live state.
pub const NORM_TOL: f64 = 1e-10;
/// Tolerance when accepting user-supplied amplitudes.
pub const INPUT_NORM_TOL: f64 = 1e-9;
/// Tolerance on `U†U = I`.
pub const UNITARY_TOL: f64 = 1e-9;
/// Branches below this probability are reported without a collapsed state.
pub const ZERO_PROB: f64 = 1e-15;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub type Matrix2 = [[Complex64; 2]; 2];
pub type Matrix4 = [[Complex64; 4]; 4];

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BitOutcome {
    Zero,
    One,
}

impl BitOutcome {
    pub const ALL: [BitOutcome; 2] = [BitOutcome::Zero, BitOutcome::One];

    pub fn bit(self) -> usize {
        match self {
            BitOutcome::Zero => 0,
            BitOutcome::One => 1,
        }
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            BitOutcome::One
        } else {
            BitOutcome::Zero
        }
    }
}

impl fmt::Display for BitOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bit())
    }
}

/// Outcome of a measurement in the Bell basis
/// `φ± = (|00⟩ ± |11⟩)/√2`, `Ψ± = (|01⟩ ± |10⟩)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
    ];

    /// True for the anti-correlated pair `Ψ±`.
    pub fn is_psi(self) -> bool {
        matches!(self, BellOutcome::PsiPlus | BellOutcome::PsiMinus)
    }

    pub fn is_minus(self) -> bool {
        matches!(self, BellOutcome::PhiMinus | BellOutcome::PsiMinus)
    }

    pub fn from_parts(psi: bool, minus: bool) -> Self {
        match (psi, minus) {
            (false, false) => BellOutcome::PhiPlus,
            (false, true) => BellOutcome::PhiMinus,
            (true, false) => BellOutcome::PsiPlus,
            (true, true) => BellOutcome::PsiMinus,
        }
    }

    /// The outcome obtained when the second qubit carries an extra `X`:
    /// `φ± ↔ Ψ±`, sign preserved.
    pub fn flip_class(self) -> Self {
        Self::from_parts(!self.is_psi(), self.is_minus())
    }

    /// Basis vector over `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub fn vector(self) -> [Complex64; 4] {
        let h = FRAC_1_SQRT_2;
        match self {
            BellOutcome::PhiPlus => [c(h), c(0.0), c(0.0), c(h)],
            BellOutcome::PhiMinus => [c(h), c(0.0), c(0.0), c(-h)],
            BellOutcome::PsiPlus => [c(0.0), c(h), c(h), c(0.0)],
            BellOutcome::PsiMinus => [c(0.0), c(h), c(-h), c(0.0)],
        }
    }
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BellOutcome::PhiPlus => "phi+",
            BellOutcome::PhiMinus => "phi-",
            BellOutcome::PsiPlus => "psi+",
            BellOutcome::PsiMinus => "psi-",
        };
        f.write_str(s)
    }
}

/// Single-qubit Pauli correction, up to global phase. `ZX` applies `X` first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliOp {
    Identity,
    X,
    Z,
    ZX,
}

impl PauliOp {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => PauliOp::Identity,
            (true, false) => PauliOp::X,
            (false, true) => PauliOp::Z,
            (true, true) => PauliOp::ZX,
        }
    }

    pub fn has_x(self) -> bool {
        matches!(self, PauliOp::X | PauliOp::ZX)
    }

    pub fn has_z(self) -> bool {
        matches!(self, PauliOp::Z | PauliOp::ZX)
    }

    /// `self` followed by `next`, ignoring global phase.
    pub fn then(self, next: PauliOp) -> PauliOp {
        PauliOp::from_bits(self.has_x() ^ next.has_x(), self.has_z() ^ next.has_z())
    }

    pub fn matrix(self) -> Matrix2 {
        let (o, z) = (c(1.0), c(0.0));
        match self {
            PauliOp::Identity => [[o, z], [z, o]],
            PauliOp::X => [[z, o], [o, z]],
            PauliOp::Z => [[o, z], [z, -o]],
            // Z·X
            PauliOp::ZX => [[z, o], [-o, z]],
        }
    }
}

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PauliOp::Identity => "I",
            PauliOp::X => "X",
            PauliOp::Z => "Z",
            PauliOp::ZX => "ZX",
        };
        f.write_str(s)
    }
}

pub fn hadamard_matrix() -> Matrix2 {
    let h = c(FRAC_1_SQRT_2);
    [[h, h], [h, -h]]
}

/// Result of projecting onto one measurement branch.
///
/// `state` is `None` when the branch has (numerically) zero probability.
#[derive(Debug, Clone)]
pub struct Projection {
    pub prob: f64,
    pub state: Option<StateVector>,
}

/// Pure state over a labelled qubit register.
///
/// Slot 0 is the most significant bit of the amplitude index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    labels: Vec<QubitId>,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// A single qubit `alpha|0⟩ + beta|1⟩` with label 0.
    pub fn new_qubit(alpha: ComplexAmp, beta: ComplexAmp) -> Result<Self> {
        let norm_sqr = alpha.norm_sqr() + beta.norm_sqr();
        if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > INPUT_NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(StateVector {
            labels: vec![0],
            amps: vec![alpha, beta],
        })
    }

    pub fn basis(bit: BitOutcome) -> Self {
        let mut amps = vec![c(0.0); 2];
        amps[bit.bit()] = c(1.0);
        StateVector {
            labels: vec![0],
            amps,
        }
    }

    /// Build from raw amplitudes; labels are `0..num_qubits`.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(Error::Capacity {
                requested: num_qubits,
                limit: MAX_QUBITS,
            });
        }
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > INPUT_NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(StateVector {
            labels: (0..num_qubits as QubitId).collect(),
            amps,
        })
    }

    /// The partially entangled triple `(|000⟩ + n|111⟩)/√(1+n²)`, labels 0, 1, 2.
    pub fn ghz_triple(n: f64) -> Result<Self> {
        if !(n > 0.0 && n <= 1.0) {
            return Err(Error::Parameter(format!(
                "entanglement degree {n} outside (0, 1]"
            )));
        }
        let norm = (1.0 + n * n).sqrt();
        let mut amps = vec![c(0.0); 8];
        amps[0] = c(1.0 / norm);
        amps[7] = c(n / norm);
        Ok(StateVector {
            labels: vec![0, 1, 2],
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[QubitId] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Amplitude of the basis state whose slot bits are `index` (slot 0 = MSB).
    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// One past the largest label in use.
    pub fn next_label(&self) -> QubitId {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn contains(&self, q: QubitId) -> bool {
        self.labels.contains(&q)
    }

    fn slot(&self, q: QubitId) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == q)
            .ok_or(Error::UnknownQubit(q))
    }

    fn bit_pos(&self, slot: usize) -> usize {
        self.num_qubits() - 1 - slot
    }

    /// Product state; the labels of `other` are shifted by `self.next_label()`.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let requested = self.num_qubits() + other.num_qubits();
        if requested > MAX_QUBITS {
            return Err(Error::Capacity {
                requested,
                limit: MAX_QUBITS,
            });
        }
        let offset = self.next_label();
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().map(|l| l + offset));
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(StateVector { labels, amps })
    }

    /// Apply an arbitrary 2×2 matrix to qubit `q`. The caller guarantees unitarity.
    pub fn apply_single(&mut self, q: QubitId, u: &Matrix2) -> Result<()> {
        let mask = 1usize << self.bit_pos(self.slot(q)?);
        for i in 0..self.amps.len() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let (a0, a1) = (self.amps[i], self.amps[j]);
            self.amps[i] = u[0][0] * a0 + u[0][1] * a1;
            self.amps[j] = u[1][0] * a0 + u[1][1] * a1;
        }
        Ok(())
    }

    pub fn apply_hadamard(&mut self, q: QubitId) -> Result<()> {
        self.apply_single(q, &hadamard_matrix())
    }

    pub fn apply_pauli(&mut self, q: QubitId, op: PauliOp) -> Result<()> {
        if op == PauliOp::Identity {
            // still validate the label
            self.slot(q)?;
            return Ok(());
        }
        self.apply_single(q, &op.matrix())
    }

    /// Apply `u` to the ordered pair `(q1, q2)`; matrix index is `2·b1 + b2`.
    pub fn apply_two_qubit_unitary(&mut self, q1: QubitId, q2: QubitId, u: &Matrix4) -> Result<()> {
        if q1 == q2 {
            return Err(Error::DuplicateQubit(q1));
        }
        check_unitary(u)?;
        let m1 = 1usize << self.bit_pos(self.slot(q1)?);
        let m2 = 1usize << self.bit_pos(self.slot(q2)?);
        for i in 0..self.amps.len() {
            if i & (m1 | m2) != 0 {
                continue;
            }
            let idx = [i, i | m2, i | m1, i | m1 | m2];
            let v = idx.map(|k| self.amps[k]);
            for (r, &k) in idx.iter().enumerate() {
                self.amps[k] = (0..4).map(|col| u[r][col] * v[col]).sum();
            }
        }
        Ok(())
    }

    /// Contract the qubits in `qs` against the bra `coeffs` (indexed by the
    /// bits of `qs`, first qubit most significant) and drop them.
    fn contract(&self, qs: &[QubitId], coeffs: &[Complex64]) -> Result<Projection> {
        debug_assert_eq!(coeffs.len(), 1 << qs.len());
        let mut positions = Vec::with_capacity(qs.len());
        for (i, &q) in qs.iter().enumerate() {
            if qs[..i].contains(&q) {
                return Err(Error::DuplicateQubit(q));
            }
            positions.push(self.bit_pos(self.slot(q)?));
        }
        let nq = self.num_qubits();
        let keep: Vec<usize> = (0..nq).rev().filter(|p| !positions.contains(p)).collect();
        let mut out = vec![c(0.0); 1 << keep.len()];
        for (i, amp) in self.amps.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let mut sel = 0usize;
            for &p in &positions {
                sel = (sel << 1) | ((i >> p) & 1);
            }
            let coef = coeffs[sel];
            if coef.norm_sqr() == 0.0 {
                continue;
            }
            let mut r = 0usize;
            for &p in &keep {
                r = (r << 1) | ((i >> p) & 1);
            }
            out[r] += coef.conj() * amp;
        }
        let prob: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        if prob <= ZERO_PROB {
            return Ok(Projection { prob, state: None });
        }
        let scale = 1.0 / prob.sqrt();
        for a in &mut out {
            *a *= scale;
        }
        let labels = self
            .labels
            .iter()
            .copied()
            .filter(|l| !qs.contains(l))
            .collect();
        Ok(Projection {
            prob,
            state: Some(StateVector { labels, amps: out }),
        })
    }

    /// Project qubit `q` onto `|outcome⟩` and remove it.
    pub fn project_computational(&self, q: QubitId, outcome: BitOutcome) -> Result<Projection> {
        let mut coeffs = [c(0.0); 2];
        coeffs[outcome.bit()] = c(1.0);
        self.contract(&[q], &coeffs)
    }

    /// Project `(q1, q2)` onto a Bell vector and remove both.
    pub fn project_bell(
        &self,
        q1: QubitId,
        q2: QubitId,
        outcome: BellOutcome,
    ) -> Result<Projection> {
        self.contract(&[q1, q2], &outcome.vector())
    }

    pub fn sample_computational<R: Rng + ?Sized>(
        &self,
        q: QubitId,
        rng: &mut R,
    ) -> Result<(BitOutcome, StateVector)> {
        let branches = BitOutcome::ALL
            .iter()
            .map(|&b| Ok((b, self.project_computational(q, b)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(pick_branch(branches, rng))
    }

    pub fn sample_bell<R: Rng + ?Sized>(
        &self,
        q1: QubitId,
        q2: QubitId,
        rng: &mut R,
    ) -> Result<(BellOutcome, StateVector)> {
        let branches = BellOutcome::ALL
            .iter()
            .map(|&b| Ok((b, self.project_bell(q1, q2, b)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(pick_branch(branches, rng))
    }

    /// `|⟨a|b⟩|²` over slot order.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        if self.num_qubits() != other.num_qubits() {
            return Err(Error::SizeMismatch {
                left: self.num_qubits(),
                right: other.num_qubits(),
            });
        }
        let overlap: Complex64 = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(overlap.norm_sqr().clamp(0.0, 1.0))
    }
}

fn pick_branch<O: Copy, R: Rng + ?Sized>(
    branches: Vec<(O, Projection)>,
    rng: &mut R,
) -> (O, StateVector) {
    let total: f64 = branches.iter().map(|(_, p)| p.prob).sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = None;
    for (outcome, proj) in branches {
        if let Some(state) = proj.state {
            if u < proj.prob {
                return (outcome, state);
            }
            u -= proj.prob;
            last = Some((outcome, state));
        }
    }
    // rounding can leave u marginally above the last cumulative bound
    last.expect("at least one branch has nonzero probability")
}

pub fn check_unitary(u: &Matrix4) -> Result<()> {
    let mut deviation = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let dot: Complex64 = (0..4).map(|k| u[k][i].conj() * u[k][j]).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            deviation = deviation.max((dot - c(expect)).norm());
        }
    }
    if deviation.is_finite() && deviation <= UNITARY_TOL {
        Ok(())
    } else {
        Err(Error::NotUnitary { deviation })
    }
}
