//! State propagation and spectral scans.
//!
//! The propagator works sector by sector: the Hamiltonian and the
//! non-Hermitian loss term −i(κ/2) a†a both conserve the total excitation
//! number, so each excitation sector of the initial state evolves
//! independently. Within a sector the time-dependent generator is integrated
//! with the fourth-order commutator-free Magnus scheme (two exponentials per
//! step, evaluated at the Gauss points), and steps are aligned to every
//! breakpoint of the pulse schedule so that no step straddles a kink.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigh, expm_apply, match_by_overlap, one_norm, CMatrix, CVector, ExpWork};
use crate::model::{BasisState, SystemModel};
use crate::pulses::{CompiledSchedule, PulseSpec};

/// Default integration step, 2 ps.
pub const DEFAULT_STEP_NS: f64 = 0.002;
/// Largest tolerated change of any final population when the step is halved.
pub const STEP_CONVERGENCE_TOL: f64 = 1e-8;

/// Complex amplitudes over a model's basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: CVector,
}

impl QuantumState {
    /// Normalizes `amplitudes`; fails on a zero vector.
    pub fn from_amplitudes(system: &SystemModel, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != system.dim() {
            return Err(Error::Dimension {
                expected: system.dim(),
                got: amplitudes.len(),
            });
        }
        let v = CVector::from_vec(amplitudes);
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidArgument("state vector has zero or non-finite norm".into()));
        }
        Ok(Self { amplitudes: v / Complex64::new(n, 0.0) })
    }

    pub fn basis(system: &SystemModel, state: &BasisState) -> Result<Self> {
        let mut v = CVector::zeros(system.dim());
        v[system.basis_index(state)?] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    /// Product state built from one local amplitude vector per mode (modes
    /// not listed are in |0⟩). Each local vector is normalized.
    pub fn product(system: &SystemModel, local: &[(&str, Vec<Complex64>)]) -> Result<Self> {
        let mut per_mode: Vec<Vec<Complex64>> = system
            .modes()
            .iter()
            .map(|m| {
                let mut v = vec![Complex64::new(0.0, 0.0); m.levels()];
                v[0] = Complex64::new(1.0, 0.0);
                v
            })
            .collect();
        for (name, amps) in local {
            let i = system.mode_index(name)?;
            let levels = system.modes()[i].levels();
            if amps.len() > levels {
                if amps[levels..].iter().any(|a| a.norm() > 0.0) {
                    return Err(Error::Occupation {
                        mode: name.to_string(),
                        occupation: amps.len() - 1,
                        levels,
                    });
                }
            }
            let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return Err(Error::InvalidArgument(format!("zero local state for `{name}`")));
            }
            let mut v = vec![Complex64::new(0.0, 0.0); levels];
            for (k, a) in amps.iter().take(levels).enumerate() {
                v[k] = a / norm;
            }
            per_mode[i] = v;
        }
        let amps = (0..system.dim())
            .map(|idx| {
                (0..system.modes().len())
                    .map(|m| per_mode[m][system.occupation(idx, m)])
                    .product()
            })
            .collect();
        Ok(Self {
            amplitudes: CVector::from_vec(amps),
        })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// |amplitude|² per basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// |amplitude|² per basis state.
pub fn populations(state: &QuantumState, system: &SystemModel) -> Result<BTreeMap<BasisState, f64>> {
    check_dim(state, system)?;
    Ok(state
        .probabilities()
        .into_iter()
        .enumerate()
        .map(|(i, p)| (system.basis_state(i).unwrap(), p))
        .collect())
}

/// Marginal occupation distribution of one mode, summed over all others.
pub fn marginal(state: &QuantumState, system: &SystemModel, mode: &str) -> Result<Vec<f64>> {
    check_dim(state, system)?;
    Ok(marginal_of(&state.probabilities(), system, system.mode_index(mode)?))
}

pub(crate) fn marginal_of(probs: &[f64], system: &SystemModel, mode: usize) -> Vec<f64> {
    let mut out = vec![0.0; system.modes()[mode].levels()];
    for (i, p) in probs.iter().enumerate() {
        out[system.occupation(i, mode)] += p;
    }
    out
}

fn check_dim(state: &QuantumState, system: &SystemModel) -> Result<()> {
    if state.dim() != system.dim() {
        return Err(Error::Dimension {
            expected: system.dim(),
            got: state.dim(),
        });
    }
    Ok(())
}

/// Integrator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagateOptions {
    pub step_ns: f64,
    /// Re-run at half the step and fail if any final population moves by
    /// more than [`STEP_CONVERGENCE_TOL`]. The finer run is returned.
    pub check_convergence: bool,
    /// Record populations roughly every this many ns (always records the
    /// initial and final state).
    pub record_every_ns: Option<f64>,
    /// Absolute start time of the evolution on the schedule's clock.
    pub t_start: f64,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            step_ns: DEFAULT_STEP_NS,
            check_convergence: true,
            record_every_ns: None,
            t_start: 0.0,
        }
    }
}

impl PropagateOptions {
    pub fn unchecked(step_ns: f64) -> Self {
        Self {
            step_ns,
            check_convergence: false,
            ..Self::default()
        }
    }
}

/// Recorded evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Per recorded time, |amplitude|² per basis index.
    pub populations: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    pub final_state: QuantumState,
    /// Largest final-population change seen by the step-halving check.
    pub step_check: Option<f64>,
}

impl Trajectory {
    pub fn final_populations(&self) -> &[f64] {
        self.populations.last().expect("trajectory records the final state")
    }

    /// Population of one basis state over time.
    pub fn series(&self, system: &SystemModel, state: &BasisState) -> Result<Vec<f64>> {
        let i = system.basis_index(state)?;
        Ok(self.populations.iter().map(|p| p[i]).collect())
    }
}

/// Evolves `initial` for `duration` ns under the schedule, with loss rates
/// κ (GHz) on the named resonator modes.
pub fn propagate(
    system: &SystemModel,
    schedule: &PulseSpec,
    initial: &QuantumState,
    duration: f64,
    dissipators: &BTreeMap<String, f64>,
    options: &PropagateOptions,
) -> Result<Trajectory> {
    let prop = Propagator::new(system, schedule, dissipators)?;
    prop.run(initial, duration, options)
}

/// Reusable propagator for one system, schedule and set of loss rates.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    system: &'a SystemModel,
    schedule: CompiledSchedule,
    breakpoints: Vec<f64>,
    loss: Vec<f64>,
    base: Vec<f64>,
    active: Vec<usize>,
}

struct SectorOp {
    indices: Vec<usize>,
    /// Static part: hopping, idle diagonal and loss.
    fixed: CMatrix,
    /// Occupation of each active tunable mode, per sector element.
    occupations: Vec<Vec<f64>>,
    /// Per lossy mode: (sector row, basis index after emission, √rate).
    jumps: Vec<Vec<(usize, usize, f64)>>,
}

impl<'a> Propagator<'a> {
    pub fn new(system: &'a SystemModel, schedule: &PulseSpec, dissipators: &BTreeMap<String, f64>) -> Result<Self> {
        let compiled = schedule.compile(system)?;
        let mut loss = vec![0.0; system.modes().len()];
        for (name, &kappa) in dissipators {
            let i = system.mode_index(name)?;
            if !system.modes()[i].is_resonator() {
                return Err(Error::InvalidArgument(format!("dissipator on non-resonator mode `{name}`")));
            }
            if !(kappa >= 0.0) {
                return Err(Error::InvalidArgument(format!("negative loss rate on `{name}`")));
            }
            loss[i] = kappa;
        }
        Ok(Self {
            system,
            active: compiled.active_modes(),
            schedule: compiled,
            breakpoints: schedule.breakpoints(),
            loss,
            base: system.modes().iter().map(|m| m.frequency()).collect(),
        })
    }

    fn sector_op(&self, n: usize) -> Result<SectorOp> {
        let sys = self.system;
        let indices = sys.sector_indices(n)?;
        let diag = sys.diagonal_energies(&self.base);
        let hop = sys.hopping_matrix();
        let d = indices.len();
        let mut fixed = CMatrix::from_fn(d, d, |r, c| hop[(indices[r], indices[c])]);
        for (r, &i) in indices.iter().enumerate() {
            let decay: f64 = (0..sys.modes().len())
                .map(|m| 0.5 * TAU * self.loss[m] * sys.occupation(i, m) as f64)
                .sum();
            fixed[(r, r)] += Complex64::new(diag[i], -decay);
        }
        let occupations = self
            .active
            .iter()
            .map(|&m| indices.iter().map(|&i| sys.occupation(i, m) as f64).collect())
            .collect();
        let mut jumps = Vec::new();
        for (m, &kappa) in self.loss.iter().enumerate() {
            if kappa <= 0.0 {
                continue;
            }
            let mut list = Vec::new();
            for (r, &i) in indices.iter().enumerate() {
                let n_m = sys.occupation(i, m);
                if n_m > 0 {
                    let mut after = sys.basis_state(i)?;
                    after.0[m] -= 1;
                    list.push((r, sys.basis_index(&after)?, (TAU * kappa * n_m as f64).sqrt()));
                }
            }
            jumps.push(list);
        }
        Ok(SectorOp {
            indices,
            fixed,
            occupations,
            jumps,
        })
    }

    /// Sector generator for one CF4 exponential: half the static part plus
    /// the weighted pulse offsets at the two Gauss points.
    fn exponent(&self, op: &SectorOp, off1: &[f64], off2: &[f64], w1: f64, w2: f64, g: &mut CMatrix) {
        g.copy_from(&op.fixed);
        *g *= Complex64::new(0.5, 0.0);
        for (k, &m) in self.active.iter().enumerate() {
            let shift = TAU * (w1 * off1[m] + w2 * off2[m]);
            if shift != 0.0 {
                for (r, n) in op.occupations[k].iter().enumerate() {
                    g[(r, r)] += Complex64::new(shift * n, 0.0);
                }
            }
        }
    }

    /// Step boundaries covering [t0, t1], refined at schedule breakpoints.
    fn grid(&self, t0: f64, t1: f64, step: f64) -> Vec<f64> {
        let mut cuts = vec![t0];
        cuts.extend(self.breakpoints.iter().copied().filter(|&b| b > t0 + 1e-12 && b < t1 - 1e-12));
        cuts.push(t1);
        let mut grid = vec![t0];
        for w in cuts.windows(2) {
            let len = w[1] - w[0];
            let n = (len / step - 1e-9).ceil().max(1.0) as usize;
            for k in 1..=n {
                grid.push(if k == n { w[1] } else { w[0] + len * k as f64 / n as f64 });
            }
        }
        grid
    }

    /// Evolves `initial` over `[options.t_start, options.t_start + duration]`.
    pub fn run(&self, initial: &QuantumState, duration: f64, options: &PropagateOptions) -> Result<Trajectory> {
        check_dim(initial, self.system)?;
        if !(options.step_ns > 0.0) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", options.step_ns)));
        }
        if !(duration >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative duration {duration}")));
        }
        let coarse = self.run_once(initial, duration, options.step_ns, options)?;
        if !options.check_convergence {
            return Ok(coarse);
        }
        let mut fine = self.run_once(initial, duration, 0.5 * options.step_ns, options)?;
        let change = coarse
            .final_populations()
            .iter()
            .zip(fine.final_populations())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change > STEP_CONVERGENCE_TOL {
            return Err(Error::Convergence { change });
        }
        fine.step_check = Some(change);
        Ok(fine)
    }

    fn run_once(&self, initial: &QuantumState, duration: f64, step: f64, options: &PropagateOptions) -> Result<Trajectory> {
        let sys = self.system;
        let t0 = options.t_start;
        let t1 = t0 + duration;
        let grid = self.grid(t0, t1, step);

        // Sectors with non-zero weight in the initial state.
        let mut sectors: Vec<usize> = (0..sys.dim())
            .filter(|&i| initial.amplitudes[i].norm_sqr() > 0.0)
            .map(|i| sys.excitations(i))
            .collect();
        sectors.sort_unstable();
        sectors.dedup();
        let ops: Vec<SectorOp> = sectors.iter().map(|&n| self.sector_op(n)).collect::<Result<_>>()?;
        let mut psis: Vec<CVector> = ops
            .iter()
            .map(|op| CVector::from_fn(op.indices.len(), |r, _| initial.amplitudes[op.indices[r]]))
            .collect();

        let record_every = options.record_every_ns.filter(|&r| r > 0.0);
        let mut times = vec![t0];
        let mut pops = vec![initial.probabilities()];
        let mut norms = vec![initial.norm()];
        let mut next_record = record_every.map(|r| t0 + r);

        let (c1, c2, a1, a2) = cf4_coefficients();
        let mut off1 = vec![0.0; sys.modes().len()];
        let mut off2 = vec![0.0; sys.modes().len()];
        let mut work = ExpWork::default();
        let mut gen: Vec<CMatrix> = ops.iter().map(|op| op.fixed.clone()).collect();

        for w in grid.windows(2) {
            let (ta, h) = (w[0], w[1] - w[0]);
            self.schedule.offsets_into(ta + c1 * h, &mut off1);
            self.schedule.offsets_into(ta + c2 * h, &mut off2);
            for ((op, psi), g) in ops.iter().zip(psis.iter_mut()).zip(gen.iter_mut()) {
                // Applied first: exp(-i h (a2 H1 + a1 H2)); then exp(-i h (a1 H1 + a2 H2)).
                for (w1, w2) in [(a2, a1), (a1, a2)] {
                    self.exponent(op, &off1, &off2, w1, w2, g);
                    expm_apply(g, h, psi, &mut work);
                }
            }
            let tb = w[1];
            let last = (tb - t1).abs() < 1e-12;
            let due = next_record.map_or(false, |nr| tb >= nr - 1e-9);
            if due || last {
                let full = assemble(sys.dim(), &ops, &psis);
                times.push(tb);
                pops.push(full.iter().map(|a| a.norm_sqr()).collect());
                norms.push(full.norm());
                if let (Some(r), Some(nr)) = (record_every, next_record.as_mut()) {
                    while *nr <= tb + 1e-9 {
                        *nr += r;
                    }
                }
            }
        }
        let final_state = QuantumState {
            amplitudes: assemble(sys.dim(), &ops, &psis),
        };
        if grid.len() == 1 {
            // zero duration: the initial record is also the final one
            times.push(t1);
            pops.push(final_state.probabilities());
            norms.push(final_state.norm());
        }
        Ok(Trajectory {
            times,
            populations: pops,
            norms,
            final_state,
            step_check: None,
        })
    }
}

/// Gauss nodes (c1, c2) and exponent weights (a1, a2) of the CF4 scheme.
fn cf4_coefficients() -> (f64, f64, f64, f64) {
    let s = 3f64.sqrt() / 6.0;
    (0.5 - s, 0.5 + s, 0.25 - s, 0.25 + s)
}

fn assemble(dim: usize, ops: &[SectorOp], psis: &[CVector]) -> CVector {
    let mut full = CVector::zeros(dim);
    for (op, psi) in ops.iter().zip(psis) {
        for (r, &i) in op.indices.iter().enumerate() {
            full[i] = psi[r];
        }
    }
    full
}

// ---------------------------------------------------------------------------
// Density-matrix evolution with photon emission

/// Excitation-sector diagonal blocks of a density matrix.
///
/// Hamiltonian and loss conserve the excitation number and a photon jump
/// lowers it by one, so populations only ever need the blocks on the
/// diagonal; coherences between sectors are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorDensity {
    dim: usize,
    /// (sector, basis indices, block), sectors ascending from 0.
    blocks: Vec<(usize, Vec<usize>, CMatrix)>,
}

impl SectorDensity {
    /// Blocks of |ψ⟩⟨ψ| for every sector up to the highest one occupied.
    pub fn from_state(system: &SystemModel, state: &QuantumState) -> Result<Self> {
        check_dim(state, system)?;
        let top = (0..system.dim())
            .filter(|&i| state.amplitudes[i].norm_sqr() > 0.0)
            .map(|i| system.excitations(i))
            .max()
            .unwrap_or(0);
        let blocks = (0..=top)
            .map(|n| {
                let idx = system.sector_indices(n)?;
                let v = CVector::from_fn(idx.len(), |r, _| state.amplitudes[idx[r]]);
                let rho = &v * v.adjoint();
                Ok((n, idx, rho))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            dim: system.dim(),
            blocks,
        })
    }

    /// Diagonal, per basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (_, idx, rho) in &self.blocks {
            for (r, &i) in idx.iter().enumerate() {
                out[i] = rho[(r, r)].re;
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        self.probabilities().iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn blocks(&self) -> impl Iterator<Item = (&[usize], &CMatrix)> {
        self.blocks.iter().map(|(_, idx, rho)| (idx.as_slice(), rho))
    }
}

/// Result of a density-matrix run.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRun {
    pub final_density: SectorDensity,
    /// Final state conditioned on no emission, unnormalized; its squared norm
    /// is the probability that no photon left.
    pub no_jump: QuantumState,
    pub step_check: Option<f64>,
}

/// Lindblad evolution with jump operators √κ a on the resonators, restricted
/// to the sector-diagonal blocks. Unlike [`propagate`], population that
/// leaves through a resonator keeps evolving in the lower sector.
pub fn propagate_density(
    system: &SystemModel,
    schedule: &PulseSpec,
    initial: &QuantumState,
    duration: f64,
    dissipators: &BTreeMap<String, f64>,
    options: &PropagateOptions,
) -> Result<DensityRun> {
    Propagator::new(system, schedule, dissipators)?.run_density(initial, duration, options)
}

/// Jump term of one sector: for each lossy mode, pairs of (row in the upper
/// block, row in the lower block, √rate).
type Lowering = Vec<Vec<(usize, usize, f64)>>;

struct DensityWork {
    term: Vec<CMatrix>,
    tmp: Vec<CMatrix>,
    adj: Vec<CMatrix>,
}

impl<'a> Propagator<'a> {
    pub fn run_density(&self, initial: &QuantumState, duration: f64, options: &PropagateOptions) -> Result<DensityRun> {
        check_dim(initial, self.system)?;
        if !(options.step_ns > 0.0) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", options.step_ns)));
        }
        if !(duration >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative duration {duration}")));
        }
        let coarse = self.run_density_once(initial, duration, options.step_ns, options)?;
        if !options.check_convergence {
            return Ok(coarse);
        }
        let mut fine = self.run_density_once(initial, duration, 0.5 * options.step_ns, options)?;
        let change = coarse
            .final_density
            .probabilities()
            .iter()
            .zip(fine.final_density.probabilities())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change > STEP_CONVERGENCE_TOL {
            return Err(Error::Convergence { change });
        }
        fine.step_check = Some(change);
        Ok(fine)
    }

    fn run_density_once(
        &self,
        initial: &QuantumState,
        duration: f64,
        step: f64,
        options: &PropagateOptions,
    ) -> Result<DensityRun> {
        let sys = self.system;
        let t0 = options.t_start;
        let grid = self.grid(t0, t0 + duration, step);
        let mut density = SectorDensity::from_state(sys, initial)?;
        let ops: Vec<SectorOp> = density
            .blocks
            .iter()
            .map(|(n, _, _)| self.sector_op(*n))
            .collect::<Result<_>>()?;
        // lowering maps from sector n into the block of sector n - 1
        let mut pos = vec![usize::MAX; sys.dim()];
        for op in &ops {
            for (r, &i) in op.indices.iter().enumerate() {
                pos[i] = r;
            }
        }
        let lowering: Vec<Lowering> = ops
            .iter()
            .map(|op| {
                op.jumps
                    .iter()
                    .map(|list| list.iter().map(|&(r, target, amp)| (r, pos[target], amp)).collect())
                    .collect()
            })
            .collect();
        let max_rate = ops
            .iter()
            .flat_map(|op| op.jumps.iter().flatten())
            .map(|&(_, _, amp)| amp * amp)
            .fold(0.0, f64::max);

        let mut psis: Vec<CVector> = ops
            .iter()
            .map(|op| CVector::from_fn(op.indices.len(), |r, _| initial.amplitudes[op.indices[r]]))
            .collect();
        let (c1, c2, a1, a2) = cf4_coefficients();
        let mut off1 = vec![0.0; sys.modes().len()];
        let mut off2 = vec![0.0; sys.modes().len()];
        let mut work = ExpWork::default();
        let mut gen: Vec<CMatrix> = ops.iter().map(|op| op.fixed.clone()).collect();
        let mut dw = DensityWork {
            term: density.blocks.iter().map(|b| b.2.clone()).collect(),
            tmp: density.blocks.iter().map(|b| b.2.clone()).collect(),
            adj: gen.clone(),
        };

        for w in grid.windows(2) {
            let (ta, h) = (w[0], w[1] - w[0]);
            self.schedule.offsets_into(ta + c1 * h, &mut off1);
            self.schedule.offsets_into(ta + c2 * h, &mut off2);
            for (w1, w2) in [(a2, a1), (a1, a2)] {
                for ((op, g), psi) in ops.iter().zip(gen.iter_mut()).zip(psis.iter_mut()) {
                    self.exponent(op, &off1, &off2, w1, w2, g);
                    expm_apply(g, h, psi, &mut work);
                }
                lindblad_exp_apply(&gen, &lowering, 0.5 * max_rate, h, &mut density, &mut dw);
            }
        }
        Ok(DensityRun {
            final_density: density,
            no_jump: QuantumState {
                amplitudes: assemble(sys.dim(), &ops, &psis),
            },
            step_check: None,
        })
    }
}

/// σ ← exp(h 𝓛) σ for the stacked sector blocks, where
/// 𝓛σ_n = −i(K_n σ_n − σ_n K_n†) + ½ Σ_m J_m σ_{n+1} J_m† and the K_n
/// already carry the −iκ/2 loss. The factor ½ matches the halved static part
/// of each CF4 exponential.
///
/// 𝓛 preserves hermiticity, so every Taylor term is Hermitian and
/// σK† = (Kσ)†. A real shift of K's diagonal cancels in the commutator and is
/// removed to keep the series short.
fn lindblad_exp_apply(
    gen: &[CMatrix],
    lowering: &[Lowering],
    jump_norm: f64,
    h: f64,
    density: &mut SectorDensity,
    w: &mut DensityWork,
) {
    let nb = gen.len();
    let mut k_norm: f64 = 0.0;
    for (shifted, g) in w.adj.iter_mut().zip(gen) {
        shifted.copy_from(g);
        let d = shifted.nrows();
        let (lo, hi) = (0..d)
            .map(|i| shifted[(i, i)].re)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        let mid = Complex64::new(0.5 * (lo + hi), 0.0);
        for i in 0..d {
            shifted[(i, i)] -= mid;
        }
        k_norm = k_norm.max(one_norm(shifted));
    }
    let norm = h * (2.0 * k_norm + jump_norm);
    let substeps = (norm / 0.5).ceil().max(1.0) as usize;
    let dt = h / substeps as f64;
    let zero = Complex64::new(0.0, 0.0);
    for _ in 0..substeps {
        for (t, b) in w.term.iter_mut().zip(&density.blocks) {
            t.copy_from(&b.2);
        }
        for k in 1..=60 {
            let c = Complex64::new(0.0, -dt / k as f64);
            for n in 0..nb {
                let tmp = &mut w.tmp[n];
                tmp.gemm(c, &w.adj[n], &w.term[n], zero);
                // tmp <- c K σ + (c K σ)†
                let d = tmp.nrows();
                for i in 0..d {
                    for j in 0..i {
                        let v = tmp[(i, j)] + tmp[(j, i)].conj();
                        tmp[(i, j)] = v;
                        tmp[(j, i)] = v.conj();
                    }
                    tmp[(i, i)] = Complex64::new(2.0 * tmp[(i, i)].re, 0.0);
                }
                if n + 1 < nb {
                    let f = 0.5 * dt / k as f64;
                    let upper = &w.term[n + 1];
                    for list in &lowering[n + 1] {
                        for &(r, a, ar) in list {
                            for &(s, b, as_) in list {
                                tmp[(a, b)] += upper[(r, s)] * (f * ar * as_);
                            }
                        }
                    }
                }
            }
            std::mem::swap(&mut w.term, &mut w.tmp);
            let mut t_norm = 0.0;
            let mut p_norm = 0.0;
            for (b, t) in density.blocks.iter_mut().zip(&w.term) {
                b.2 += t;
                t_norm += t.norm_squared();
                p_norm += b.2.norm_squared();
            }
            if t_norm <= 1e-34 * p_norm.max(1e-300) {
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Dressed basis

/// Eigenbasis of the Hermitian idle Hamiltonian, each eigenvector labelled by
/// the bare basis state it overlaps most.
#[derive(Debug, Clone)]
pub struct DressedBasis {
    /// `vectors[i]` is the dressed state labelled by bare index `i`.
    vectors: Vec<(Vec<usize>, CVector)>,
    dim: usize,
}

impl DressedBasis {
    pub fn at_idle(system: &SystemModel) -> Result<Self> {
        let h = system.assemble_hamiltonian(&system.idle_frequencies())?;
        let mut vectors = vec![(Vec::new(), CVector::zeros(0)); system.dim()];
        for n in 0..=system.max_excitations() {
            let idx = system.sector_indices(n)?;
            let block = CMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])]);
            let (_, vecs) = eigh(&block);
            let perm = match_by_overlap(&CMatrix::identity(idx.len(), idx.len()), &vecs);
            for (r, &i) in idx.iter().enumerate() {
                let mut v = vecs.column(perm[r]).into_owned();
                // fix the phase so the labelling component is real positive
                let phase = v[r] / Complex64::new(v[r].norm().max(1e-300), 0.0);
                v /= phase;
                vectors[i] = (idx.clone(), v);
            }
        }
        Ok(Self {
            vectors,
            dim: system.dim(),
        })
    }

    /// Probability of each dressed state, indexed by its bare label.
    pub fn probabilities(&self, state: &QuantumState) -> Vec<f64> {
        assert_eq!(state.dim(), self.dim);
        self.vectors
            .iter()
            .map(|(idx, v)| {
                idx.iter()
                    .zip(v.iter())
                    .map(|(&i, c)| c.conj() * state.amplitudes[i])
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .collect()
    }

    /// Dressed-state populations of a sector-block density matrix, indexed by
    /// bare label.
    pub fn density_probabilities(&self, density: &SectorDensity) -> Vec<f64> {
        assert_eq!(density.dim(), self.dim);
        let mut out = vec![0.0; self.dim];
        let mut pos = vec![usize::MAX; self.dim];
        for (idx, rho) in density.blocks() {
            for (r, &i) in idx.iter().enumerate() {
                pos[i] = r;
            }
            for &i in idx {
                let (vidx, v) = &self.vectors[i];
                let mut acc = Complex64::new(0.0, 0.0);
                for (&j, cj) in vidx.iter().zip(v.iter()) {
                    for (&k, ck) in vidx.iter().zip(v.iter()) {
                        acc += cj.conj() * rho[(pos[j], pos[k])] * ck;
                    }
                }
                out[i] = acc.re;
            }
        }
        out
    }

    /// Dressed counterpart of a bare basis state.
    pub fn state(&self, system: &SystemModel, label: &BasisState) -> Result<QuantumState> {
        let i = system.basis_index(label)?;
        let (idx, v) = &self.vectors[i];
        let mut amps = CVector::zeros(self.dim);
        for (&j, c) in idx.iter().zip(v.iter()) {
            amps[j] = *c;
        }
        Ok(QuantumState { amplitudes: amps })
    }

    /// Maps a bare-basis superposition onto the dressed basis.
    pub fn dress(&self, bare: &QuantumState) -> QuantumState {
        let mut amps = CVector::zeros(self.dim);
        for (i, (idx, v)) in self.vectors.iter().enumerate() {
            let a = bare.amplitudes[i];
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for (&j, c) in idx.iter().zip(v.iter()) {
                amps[j] += a * c;
            }
        }
        QuantumState { amplitudes: amps }
    }
}

// ---------------------------------------------------------------------------
// Spectra

/// Eigenenergies of one excitation sector along a coupler-frequency scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumCurve {
    pub coupler: String,
    pub sector: usize,
    pub frequencies: Vec<f64>,
    /// Bare-state label of each trace at the first scan point.
    pub labels: Vec<BasisState>,
    /// `energies[trace][point]`, lab-frame GHz.
    pub energies: Vec<Vec<f64>>,
}

impl SpectrumCurve {
    pub fn trace(&self, label: &BasisState) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Diagonalizes sector `sector` at `points` evenly spaced coupler frequencies
/// in `[range.0, range.1]` and follows each eigenstate by maximum overlap.
pub fn spectrum_scan(
    system: &SystemModel,
    coupler: &str,
    range: (f64, f64),
    points: usize,
    sector: usize,
) -> Result<SpectrumCurve> {
    if points < 2 {
        return Err(Error::InvalidArgument("spectrum scan needs at least 2 points".into()));
    }
    let ci = system.mode_index(coupler)?;
    if !system.modes()[ci].tunable {
        return Err(Error::InvalidArgument(format!("`{coupler}` is not tunable")));
    }
    let idx = system.sector_indices(sector)?;
    let d = idx.len();
    let shift = sector as f64 * system.frame();
    let mut freqs_all: Vec<f64> = system.modes().iter().map(|m| m.frequency()).collect();
    let frequencies: Vec<f64> = (0..points)
        .map(|k| range.0 + (range.1 - range.0) * k as f64 / (points - 1) as f64)
        .collect();
    let mut energies = vec![Vec::with_capacity(points); d];
    let mut labels = Vec::new();
    let mut prev: Option<CMatrix> = None;
    for &f in &frequencies {
        freqs_all[ci] = f;
        let h = system.hamiltonian_with(&freqs_all);
        let block = CMatrix::from_fn(d, d, |r, c| h[(idx[r], idx[c])]);
        let (vals, vecs) = eigh(&block);
        let perm = match &prev {
            None => {
                let perm = match_by_overlap(&CMatrix::identity(d, d), &vecs);
                labels = idx.iter().map(|&i| system.basis_state(i).unwrap()).collect();
                perm
            }
            Some(p) => match_by_overlap(p, &vecs),
        };
        for (trace, &col) in perm.iter().enumerate() {
            energies[trace].push(vals[col] / TAU + shift);
        }
        prev = Some(CMatrix::from_fn(d, d, |r, c| vecs[(r, perm[c])]));
    }
    Ok(SpectrumCurve {
        coupler: coupler.to_string(),
        sector,
        frequencies,
        labels,
        energies,
    })
}

/// Location (GHz) and size (GHz) of the closest approach of two traces.
pub fn avoided_crossing(curve: &SpectrumCurve, a: usize, b: usize) -> Result<(f64, f64)> {
    let n = curve.frequencies.len();
    if a >= curve.energies.len() || b >= curve.energies.len() || a == b {
        return Err(Error::InvalidArgument(format!("invalid trace pair ({a}, {b})")));
    }
    let diff: Vec<f64> = (0..n).map(|k| curve.energies[a][k] - curve.energies[b][k]).collect();
    let f = &curve.frequencies;
    // Genuine crossing (uncoupled or diabatically followed): interpolate the root.
    for k in 0..n - 1 {
        if diff[k] == 0.0 {
            return Ok((f[k], 0.0));
        }
        if diff[k].signum() != diff[k + 1].signum() {
            let x = f[k] + (f[k + 1] - f[k]) * diff[k] / (diff[k] - diff[k + 1]);
            return Ok((x, 0.0));
        }
    }
    let gap: Vec<f64> = diff.iter().map(|d| d.abs()).collect();
    let k = (0..n).min_by(|&i, &j| gap[i].total_cmp(&gap[j])).unwrap();
    if k == 0 || k == n - 1 {
        return Err(Error::NoCrossing(k));
    }
    // vertex of the parabola through the three points around the minimum
    let (x0, x1, x2) = (f[k - 1], f[k], f[k + 1]);
    let (y0, y1, y2) = (gap[k - 1], gap[k], gap[k + 1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let qa = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let qb = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if qa <= 0.0 {
        return Ok((x1, y1));
    }
    let xv = (-qb / (2.0 * qa)).clamp(x0, x2);
    let qc = y1 - qa * x1 * x1 - qb * x1;
    let yv = (qa * xv * xv + qb * xv + qc).max(0.0);
    Ok((xv, yv.min(y1)))
}
