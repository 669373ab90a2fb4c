//! Coupler-frequency trajectories.
//!
//! A [`PulseSpec`] is a flat schedule of waveforms, each bound to one tunable
//! mode (channel) and a start time. Sampling returns the frequency *offset*
//! of each channel from its idle point; channels without an active segment
//! sit at offset zero.
//!
//! The adiabatic waveform follows the constant-margin solution of
//! |dΔ/dt| = β (Δ² + 4g²)^{3/2} / g, where Δ = ω_q − ω_c is the qubit–coupler
//! detuning in GHz.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, match_by_overlap, CMatrix};
use crate::model::SystemModel;

/// Default rise/fall time of square pulses.
pub const DEFAULT_SQUARE_EDGE_NS: f64 = 0.5;

const SQRT_ARG_EPS: f64 = 1e-12;

/// Parameters of the adiabatic (constant-margin) detuning trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticPulseParams {
    /// Duration, ns.
    pub tau: f64,
    /// Detuning Δ(0), GHz.
    pub f0: f64,
    /// Detuning Δ(τ), GHz.
    pub f_tau: f64,
    /// Shaping coupling strength, GHz.
    pub g: f64,
}

impl AdiabaticPulseParams {
    pub fn new(tau: f64, f0: f64, f_tau: f64, g: f64) -> Result<Self> {
        let p = Self { tau, f0, f_tau, g };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.tau, self.f0, self.f_tau, self.g].iter().all(|x| x.is_finite());
        if !finite || !(self.tau > 0.0) || !(self.g > 0.0) {
            return Err(Error::InvalidPulse(format!(
                "adiabatic pulse needs tau > 0 and g > 0 (tau = {}, g = {})",
                self.tau, self.g
            )));
        }
        if self.f0 == 0.0 && self.f_tau == 0.0 {
            return Err(Error::InvalidPulse("degenerate trajectory: f0 = f_tau = 0".into()));
        }
        // u(t) is linear in t, so the square-root argument is smallest at an endpoint.
        for u in [self.delta(), self.u_at(self.tau)] {
            if 1.0 - 16.0 * u * u <= SQRT_ARG_EPS {
                return Err(Error::InvalidPulse(format!(
                    "square-root argument {} <= {SQRT_ARG_EPS} inside [0, tau]",
                    1.0 - 16.0 * u * u
                )));
            }
        }
        Ok(())
    }

    /// Offset δ fixing Δ(0) = f0.
    pub fn delta(&self) -> f64 {
        -self.f0 / (16.0 * self.f0 * self.f0 + 64.0 * self.g * self.g).sqrt()
    }

    /// Margin prefactor β fixing Δ(τ) = f_τ.
    pub fn beta(&self) -> f64 {
        let s = self.f_tau * self.f_tau + 4.0 * self.g * self.g;
        (-4.0 * self.delta() * s - self.f_tau * s.sqrt()) / (4.0 * self.g * self.tau * s)
    }

    fn u_at(&self, t: f64) -> f64 {
        self.beta() * self.g * t + self.delta()
    }

    /// Time at which the trajectory crosses Δ = 0.
    pub fn zero_crossing(&self) -> f64 {
        -self.delta() / (self.beta() * self.g)
    }

    /// Right-hand side of the adiabatic-margin ODE, dΔ/dt = −β (Δ² + 4g²)^{3/2} / g.
    pub fn margin_rate(&self, detuning: f64) -> f64 {
        -self.beta() * (detuning * detuning + 4.0 * self.g * self.g).powf(1.5) / self.g
    }
}

/// Detuning Δ(t) in GHz of the adiabatic trajectory, for 0 ≤ t ≤ τ.
pub fn adiabatic_detuning(params: &AdiabaticPulseParams, t: f64) -> Result<f64> {
    if !(0.0..=params.tau).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} outside [0, {}]",
            params.tau
        )));
    }
    let (beta, delta, g) = (params.beta(), params.delta(), params.g);
    let bgt = beta * g * t;
    let arg = 1.0 - 16.0 * bgt * bgt - 32.0 * beta * delta * g * t - 16.0 * delta * delta;
    if !(arg > SQRT_ARG_EPS) {
        return Err(Error::InvalidPulse(format!(
            "square-root argument {arg} <= {SQRT_ARG_EPS} at t = {t}"
        )));
    }
    Ok(-8.0 * g * (bgt + delta) / arg.sqrt())
}

fn adiabatic_unchecked(params: &AdiabaticPulseParams, t: f64) -> f64 {
    let u = params.u_at(t.clamp(0.0, params.tau));
    -8.0 * params.g * u / (1.0 - 16.0 * u * u).sqrt()
}

/// Raised-cosine transition from 0 to 1 over `[0, edge]`.
fn rise(x: f64, edge: f64) -> f64 {
    if edge <= 0.0 || x >= edge {
        1.0
    } else if x <= 0.0 {
        0.0
    } else {
        0.5 * (1.0 - (PI * x / edge).cos())
    }
}

fn zero() -> f64 {
    0.0
}

fn default_edge() -> f64 {
    DEFAULT_SQUARE_EDGE_NS
}

/// One waveform on one channel. All amplitudes are frequency offsets from
/// the channel's idle point in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", content = "params", rename_all = "lowercase")]
pub enum Waveform {
    /// Constant offset for `duration`, with raised-cosine edges of length
    /// `edge` inside the window.
    Square {
        amplitude: f64,
        duration: f64,
        #[serde(default = "default_edge")]
        edge: f64,
    },
    /// Linear interpolation from `start` to `end` over `duration`, preceded
    /// and followed by raised-cosine connectors of length `edge` to and from
    /// the idle point.
    Ramp {
        start: f64,
        end: f64,
        duration: f64,
        #[serde(default = "zero")]
        edge: f64,
    },
    /// Adiabatic detuning trajectory against a qubit at `qubit_ghz`; the
    /// coupler frequency is ω_c(t) = qubit_ghz − Δ(t) and the offset is taken
    /// from `idle_ghz`. Connectors as for ramps.
    Adiabatic {
        #[serde(flatten)]
        params: AdiabaticPulseParams,
        qubit_ghz: f64,
        idle_ghz: f64,
        #[serde(default = "zero")]
        edge: f64,
    },
}

impl Waveform {
    pub fn square(amplitude: f64, duration: f64) -> Self {
        Waveform::Square {
            amplitude,
            duration,
            edge: DEFAULT_SQUARE_EDGE_NS,
        }
    }

    pub fn hard_square(amplitude: f64, duration: f64) -> Self {
        Waveform::Square {
            amplitude,
            duration,
            edge: 0.0,
        }
    }

    pub fn ramp(start: f64, end: f64, duration: f64) -> Self {
        Waveform::Ramp {
            start,
            end,
            duration,
            edge: 0.0,
        }
    }

    pub fn adiabatic(params: AdiabaticPulseParams, qubit_ghz: f64, idle_ghz: f64) -> Self {
        Waveform::Adiabatic {
            params,
            qubit_ghz,
            idle_ghz,
            edge: 0.0,
        }
    }

    pub fn with_edge(mut self, new_edge: f64) -> Self {
        match &mut self {
            Waveform::Square { edge, .. } | Waveform::Ramp { edge, .. } | Waveform::Adiabatic { edge, .. } => {
                *edge = new_edge
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPulse(msg));
        match *self {
            Waveform::Square { amplitude, duration, edge } => {
                if !amplitude.is_finite() || !(duration > 0.0) || !(edge >= 0.0) || 2.0 * edge > duration {
                    return bad(format!("square pulse amplitude {amplitude}, duration {duration}, edge {edge}"));
                }
            }
            Waveform::Ramp { start, end, duration, edge } => {
                if !start.is_finite() || !end.is_finite() || !(duration > 0.0) || !(edge >= 0.0) {
                    return bad(format!("ramp pulse {start} -> {end} over {duration} (edge {edge})"));
                }
            }
            Waveform::Adiabatic { params, qubit_ghz, idle_ghz, edge } => {
                params.validate()?;
                if !qubit_ghz.is_finite() || !idle_ghz.is_finite() || !(edge >= 0.0) {
                    return bad("adiabatic pulse anchors must be finite".into());
                }
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        match *self {
            Waveform::Square { duration, .. } => duration,
            Waveform::Ramp { duration, edge, .. } => duration + 2.0 * edge,
            Waveform::Adiabatic { params, edge, .. } => params.tau + 2.0 * edge,
        }
    }

    /// Offset at local time `t` (0 at the start of the waveform); zero
    /// outside `[0, duration)`.
    pub fn offset(&self, t: f64) -> f64 {
        let total = self.duration();
        if !(t >= 0.0 && t < total) {
            return 0.0;
        }
        match *self {
            Waveform::Square { amplitude, edge, .. } => amplitude * rise(t, edge) * rise(total - t, edge),
            Waveform::Ramp { start, end, duration, edge } => {
                if t < edge {
                    start * rise(t, edge)
                } else if t > edge + duration {
                    end * rise(total - t, edge)
                } else {
                    start + (end - start) * (t - edge) / duration
                }
            }
            Waveform::Adiabatic { params, qubit_ghz, idle_ghz, edge } => {
                let anchor = qubit_ghz - idle_ghz;
                if t < edge {
                    (anchor - params.f0) * rise(t, edge)
                } else if t > edge + params.tau {
                    (anchor - params.f_tau) * rise(total - t, edge)
                } else {
                    anchor - adiabatic_unchecked(&params, t - edge)
                }
            }
        }
    }

    /// Local times where the waveform or its derivatives are not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let total = self.duration();
        let mut out = vec![0.0, total];
        match *self {
            Waveform::Square { edge, .. } => {
                if edge > 0.0 {
                    out.extend([edge, total - edge]);
                }
            }
            Waveform::Ramp { edge, .. } | Waveform::Adiabatic { edge, .. } => {
                if edge > 0.0 {
                    out.extend([edge, total - edge]);
                }
            }
        }
        out
    }
}

/// A waveform placed on a channel at an absolute start time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledWaveform {
    pub channel: String,
    pub start_ns: f64,
    #[serde(flatten)]
    pub waveform: Waveform,
}

/// Coupler-frequency schedule over one or more channels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PulseSpec {
    entries: Vec<ScheduledWaveform>,
}

impl PulseSpec {
    /// Empty schedule: every coupler stays idle.
    pub fn idle() -> Self {
        Self::default()
    }

    pub fn single(channel: &str, waveform: Waveform) -> Result<Self> {
        waveform.validate()?;
        Ok(Self {
            entries: vec![ScheduledWaveform {
                channel: channel.to_string(),
                start_ns: 0.0,
                waveform,
            }],
        })
    }

    pub fn square(channel: &str, amplitude: f64, duration: f64) -> Result<Self> {
        Self::single(channel, Waveform::square(amplitude, duration))
    }

    pub fn ramp(channel: &str, start: f64, end: f64, duration: f64) -> Result<Self> {
        Self::single(channel, Waveform::ramp(start, end, duration))
    }

    pub fn adiabatic(channel: &str, params: AdiabaticPulseParams, qubit_ghz: f64, idle_ghz: f64) -> Result<Self> {
        Self::single(channel, Waveform::adiabatic(params, qubit_ghz, idle_ghz))
    }

    /// Places each part at its start time. Segments on the same channel must
    /// not overlap.
    pub fn composite(parts: Vec<(f64, PulseSpec)>) -> Result<Self> {
        let mut entries = Vec::new();
        for (start, part) in parts {
            if !(start >= 0.0) {
                return Err(Error::InvalidPulse(format!("negative start time {start}")));
            }
            for e in part.entries {
                entries.push(ScheduledWaveform {
                    start_ns: e.start_ns + start,
                    ..e
                });
            }
        }
        Self::from_entries(entries)
    }

    pub fn from_entries(entries: Vec<ScheduledWaveform>) -> Result<Self> {
        let spec = Self { entries };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<ScheduledWaveform> = serde_json::from_str(text)?;
        Self::from_entries(entries)
    }

    pub fn entries(&self) -> &[ScheduledWaveform] {
        &self.entries
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.entries {
            e.waveform.validate()?;
            if !(e.start_ns >= 0.0) {
                return Err(Error::InvalidPulse(format!("negative start time {}", e.start_ns)));
            }
        }
        let mut by_channel: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        for e in &self.entries {
            if e.channel.is_empty() {
                return Err(Error::InvalidPulse("empty channel name".into()));
            }
            by_channel
                .entry(e.channel.as_str())
                .or_default()
                .push((e.start_ns, e.start_ns + e.waveform.duration()));
        }
        for (ch, mut spans) in by_channel {
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in spans.windows(2) {
                if w[1].0 < w[0].1 - 1e-12 {
                    return Err(Error::InvalidPulse(format!(
                        "overlapping segments on channel {ch}: [{}, {}) and [{}, {})",
                        w[0].0, w[0].1, w[1].0, w[1].1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Latest end time over all channels.
    pub fn duration(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.start_ns + e.waveform.duration())
            .fold(0.0, f64::max)
    }

    pub fn channels(&self) -> Vec<String> {
        let mut out: Vec<String> = self.entries.iter().map(|e| e.channel.clone()).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Keeps only the segments on `channels`.
    pub fn restricted<S: AsRef<str>>(&self, channels: &[S]) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|e| channels.iter().any(|c| c.as_ref() == e.channel))
                .cloned()
                .collect(),
        }
    }

    /// Shifts every segment by `dt` ns.
    pub fn delayed(&self, dt: f64) -> Result<Self> {
        Self::composite(vec![(dt, self.clone())])
    }

    /// Frequency offset per channel at absolute time `t` (GHz).
    pub fn sample(&self, t: f64) -> BTreeMap<String, f64> {
        let mut out: BTreeMap<String, f64> = self.channels().into_iter().map(|c| (c, 0.0)).collect();
        for e in &self.entries {
            *out.get_mut(&e.channel).unwrap() += e.waveform.offset(t - e.start_ns);
        }
        out
    }

    /// Absolute times where the schedule is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .entries
            .iter()
            .flat_map(|e| e.waveform.breakpoints().into_iter().map(move |b| b + e.start_ns))
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        out
    }

    /// Binds channel names to mode indices of `system`.
    pub fn compile(&self, system: &SystemModel) -> Result<CompiledSchedule> {
        self.validate()?;
        let mut entries = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let mode = system.mode_index(&e.channel)?;
            if !system.modes()[mode].tunable {
                return Err(Error::InvalidPulse(format!("channel {} is not a tunable mode", e.channel)));
            }
            entries.push((mode, e.start_ns, e.waveform));
        }
        Ok(CompiledSchedule {
            entries,
            n_modes: system.modes().len(),
        })
    }
}

/// Frequency offset per channel at time `t`; channels without an active
/// segment read zero.
pub fn sample_pulse(spec: &PulseSpec, t: f64) -> BTreeMap<String, f64> {
    spec.sample(t)
}

/// Schedule bound to mode indices, for the integrator's inner loop.
#[derive(Debug, Clone)]
pub struct CompiledSchedule {
    entries: Vec<(usize, f64, Waveform)>,
    n_modes: usize,
}

impl CompiledSchedule {
    /// Writes per-mode offsets (GHz) at time `t` into `out`.
    pub fn offsets_into(&self, t: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_modes);
        out.iter_mut().for_each(|x| *x = 0.0);
        for (mode, start, w) in &self.entries {
            out[*mode] += w.offset(t - start);
        }
    }

    pub fn active_modes(&self) -> Vec<usize> {
        let mut m: Vec<usize> = self.entries.iter().map(|e| e.0).collect();
        m.sort_unstable();
        m.dedup();
        m
    }
}

/// Adiabaticity ratio sampled along a pulse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdiabaticityProfile {
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max: f64,
}

/// Evaluates |⟨Ψn|∂H/∂t|Ψm⟩| / |En − Em|² along `spec` inside excitation
/// sector `sector`, for the eigenstate pair `pair` (indices into the
/// energy-ordered spectrum at the first sample). Eigenstates are followed by
/// maximum overlap; ∂H/∂t is a central finite difference of the assembled H.
///
/// Samples sit at the midpoints of `samples` equal sub-intervals of
/// `window` (defaults to the whole schedule).
pub fn adiabaticity_metric(
    system: &SystemModel,
    spec: &PulseSpec,
    sector: usize,
    pair: (usize, usize),
    samples: usize,
    window: Option<(f64, f64)>,
) -> Result<AdiabaticityProfile> {
    if samples < 2 {
        return Err(Error::InvalidArgument("adiabaticity metric needs at least 2 samples".into()));
    }
    let idx = system.sector_indices(sector)?;
    if pair.0 >= idx.len() || pair.1 >= idx.len() || pair.0 == pair.1 {
        return Err(Error::InvalidArgument(format!(
            "eigenstate pair {:?} invalid for sector of size {}",
            pair,
            idx.len()
        )));
    }
    let compiled = spec.compile(system)?;
    let (t0, t1) = window.unwrap_or((0.0, spec.duration().max(1e-9)));
    let dt_sample = (t1 - t0) / samples as f64;
    let fd = 1e-4 * dt_sample;
    let base: Vec<f64> = system.modes().iter().map(|m| m.frequency()).collect();
    let mut offsets = vec![0.0; base.len()];
    let block_at = |t: f64, offsets: &mut [f64]| -> CMatrix {
        compiled.offsets_into(t, offsets);
        let freqs: Vec<f64> = base.iter().zip(offsets.iter()).map(|(b, o)| b + o).collect();
        let h = system.hamiltonian_with(&freqs);
        CMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])])
    };

    let mut times = Vec::with_capacity(samples);
    let mut ratios = Vec::with_capacity(samples);
    let mut tracked: Option<CMatrix> = None;
    let mut labels = [pair.0, pair.1];
    for k in 0..samples {
        let t = t0 + (k as f64 + 0.5) * dt_sample;
        let h = block_at(t, &mut offsets);
        let (vals, vecs) = eigh(&h);
        if let Some(prev) = &tracked {
            let perm = match_by_overlap(prev, &vecs);
            labels = [perm[pair.0], perm[pair.1]];
            // Keep the tracked frame in the original labelling.
            let reordered = CMatrix::from_fn(vecs.nrows(), vecs.ncols(), |r, c| vecs[(r, perm[c])]);
            tracked = Some(reordered);
        } else {
            tracked = Some(vecs.clone());
        }
        let gap = (vals[labels[0]] - vals[labels[1]]).abs();
        if gap < 1e-12 {
            return Err(Error::DegenerateGap { time_ns: t, gap });
        }
        let hp = block_at(t + fd, &mut offsets);
        let hm = block_at(t - fd, &mut offsets);
        let dh = (hp - hm) / num_complex::Complex64::new(2.0 * fd, 0.0);
        let vn = vecs.column(labels[0]);
        let vm = vecs.column(labels[1]);
        let elem = (vn.adjoint() * &dh * vm)[(0, 0)].norm();
        times.push(t);
        ratios.push(elem / (gap * gap));
    }
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(AdiabaticityProfile { times, ratios, max })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig3a(g: f64) -> AdiabaticPulseParams {
        AdiabaticPulseParams::new(100.0, -1.5, -1.0, g).unwrap()
    }

    #[test]
    fn boundary_values() {
        let p = fig3a(0.071);
        assert!((adiabatic_detuning(&p, 0.0).unwrap() - p.f0).abs() < 1e-12);
        assert!((adiabatic_detuning(&p, p.tau).unwrap() - p.f_tau).abs() / p.f_tau.abs() < 1e-9);
    }

    #[test]
    fn zero_crossing_root() {
        let p = AdiabaticPulseParams::new(40.0, -0.3, 0.5, 0.05).unwrap();
        let t = p.zero_crossing();
        assert!(t > 0.0 && t < p.tau);
        assert!(adiabatic_detuning(&p, t).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(AdiabaticPulseParams::new(0.0, 1.0, -1.0, 0.1).is_err());
        assert!(AdiabaticPulseParams::new(10.0, 1.0, -1.0, 0.0).is_err());
        assert!(AdiabaticPulseParams::new(10.0, 0.0, 0.0, 0.1).is_err());
        // |f| / g so large that 1 - 16u^2 underflows the threshold.
        assert!(AdiabaticPulseParams::new(10.0, 1e9, -1.0, 1e-3).is_err());
        let p = fig3a(0.05);
        assert!(adiabatic_detuning(&p, 101.0).is_err());
    }

    #[test]
    fn square_and_ramp_sampling() {
        let sq = PulseSpec::square("C0", -0.2, 10.0).unwrap();
        assert_eq!(sample_pulse(&sq, 5.0)["C0"], -0.2);
        assert_eq!(sample_pulse(&sq, 11.0)["C0"], 0.0);
        let r = PulseSpec::ramp("C0", 0.0, -1.0, 20.0).unwrap();
        assert!((sample_pulse(&r, 10.0)["C0"] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn composite_duration_83ns() {
        let qc = |ch: &str, d: f64| PulseSpec::square(ch, -0.5, d).unwrap();
        let spec = PulseSpec::composite(vec![
            (0.0, qc("C0", 31.0)),
            (31.0, qc("C2", 30.0)),
            (0.0, qc("C1", 5.0)),
            (61.0, PulseSpec::ramp("C0", 0.2, 0.6, 22.0).unwrap()),
        ])
        .unwrap();
        assert!((spec.duration() - 83.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_segments_rejected() {
        let a = PulseSpec::square("C0", 0.1, 10.0).unwrap();
        assert!(PulseSpec::composite(vec![(0.0, a.clone()), (5.0, a.clone())]).is_err());
        assert!(PulseSpec::composite(vec![(0.0, a.clone()), (10.0, a)]).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let spec = PulseSpec::composite(vec![
            (0.0, PulseSpec::adiabatic("C0", fig3a(0.05), 5.176, 6.376).unwrap()),
            (100.0, PulseSpec::square("C1", 0.3, 5.0).unwrap()),
        ])
        .unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"shape\":\"adiabatic\""));
        assert_eq!(PulseSpec::from_json(&text).unwrap(), spec);
    }

    #[test]
    fn square_edge_default_applies_when_omitted() {
        let text = r#"[{"channel":"C1","start_ns":0,"shape":"square","params":{"amplitude":0.5,"duration":5}}]"#;
        let spec = PulseSpec::from_json(text).unwrap();
        match spec.entries()[0].waveform {
            Waveform::Square { edge, .. } => assert_eq!(edge, DEFAULT_SQUARE_EDGE_NS),
            _ => unreachable!(),
        }
    }
}
