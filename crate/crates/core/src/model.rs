//! Device parameters, basis bookkeeping and Hamiltonian assembly.
//!
//! Frequencies are linear (GHz, i.e. ω/2π) everywhere in the public API and
//! times are in ns. Assembled matrices are angular (rad/ns) with ħ = 1. The
//! Hamiltonian is the rotating-wave Kerr-oscillator network
//!
//! ```text
//! H = Σ_m ω_m n_m + (α_m / 2) n_m (n_m - 1) + Σ_(a,b) g_ab (a† b + b† a)
//! ```
//!
//! written in a frame rotating at `frame_ghz` on every mode. Because H
//! conserves the total excitation number, the frame only shifts each
//! excitation sector by a constant.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transmon (qubit or coupler) parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    pub frequency: f64,
    pub anharmonicity: f64,
    pub levels: usize,
}

/// Readout resonator parameters. `dispersive_shift` is informational only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    pub frequency: f64,
    pub linewidth: f64,
    pub levels: usize,
    pub dispersive_shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModeParams {
    Transmon(TransmonParams),
    Resonator(ResonatorParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub name: String,
    pub params: ModeParams,
    /// Tunable modes (couplers) take their frequency from a pulse schedule;
    /// `frequency` is then the idle point.
    pub tunable: bool,
}

impl Mode {
    pub fn frequency(&self) -> f64 {
        match self.params {
            ModeParams::Transmon(p) => p.frequency,
            ModeParams::Resonator(p) => p.frequency,
        }
    }

    pub fn levels(&self) -> usize {
        match self.params {
            ModeParams::Transmon(p) => p.levels,
            ModeParams::Resonator(p) => p.levels,
        }
    }

    pub fn anharmonicity(&self) -> f64 {
        match self.params {
            ModeParams::Transmon(p) => p.anharmonicity,
            ModeParams::Resonator(_) => 0.0,
        }
    }

    pub fn linewidth(&self) -> f64 {
        match self.params {
            ModeParams::Transmon(_) => 0.0,
            ModeParams::Resonator(p) => p.linewidth,
        }
    }

    pub fn is_resonator(&self) -> bool {
        matches!(self.params, ModeParams::Resonator(_))
    }

    fn set_levels(&mut self, levels: usize) {
        match &mut self.params {
            ModeParams::Transmon(p) => p.levels = levels,
            ModeParams::Resonator(p) => p.levels = levels,
        }
    }
}

/// Exchange coupling between two modes, stored by mode index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub mode_a: usize,
    pub mode_b: usize,
    pub strength: f64,
}

impl Coupling {
    pub fn connects(&self, a: usize, b: usize) -> bool {
        (self.mode_a == a && self.mode_b == b) || (self.mode_a == b && self.mode_b == a)
    }
}

/// Occupation tuple, one entry per mode in model order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisState(pub Vec<usize>);

impl BasisState {
    pub fn new(occupations: impl Into<Vec<usize>>) -> Self {
        Self(occupations.into())
    }

    pub fn excitations(&self) -> usize {
        self.0.iter().sum()
    }

    /// Compact label such as `012`; entries above 9 are comma separated.
    pub fn label(&self) -> String {
        if self.0.iter().all(|&n| n < 10) {
            self.0.iter().map(|n| n.to_string()).collect()
        } else {
            self.0
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}⟩", self.label())
    }
}

// ---------------------------------------------------------------------------
// Config file schema

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Transmon,
    Resonator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeConfig {
    pub name: String,
    pub kind: ModeKind,
    pub frequency_ghz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anharmonicity_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_ghz: Option<f64>,
    pub levels: usize,
    #[serde(default)]
    pub tunable: bool,
    /// Coherence data carried along for bookkeeping; never simulated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_us: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub a: String,
    pub b: String,
    pub g_ghz: f64,
}

/// On-disk device description (JSON or TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub modes: Vec<ModeConfig>,
    #[serde(default)]
    pub couplings: Vec<CouplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_ghz: Option<f64>,
}

impl DeviceConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Overrides the coupling strength between two named modes, adding the
    /// coupling if it does not exist yet.
    pub fn set_coupling(&mut self, a: &str, b: &str, g_ghz: f64) {
        match self
            .couplings
            .iter_mut()
            .find(|c| (c.a == a && c.b == b) || (c.a == b && c.b == a))
        {
            Some(c) => c.g_ghz = g_ghz,
            None => self.couplings.push(CouplingConfig {
                a: a.into(),
                b: b.into(),
                g_ghz,
            }),
        }
    }

    pub fn mode_mut(&mut self, name: &str) -> Option<&mut ModeConfig> {
        self.modes.iter_mut().find(|m| m.name == name)
    }
}

// ---------------------------------------------------------------------------

/// Validated device model with a fixed, enumerated product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    modes: Vec<Mode>,
    couplings: Vec<Coupling>,
    frame: f64,
    strides: Vec<usize>,
    dim: usize,
    warnings: Vec<String>,
}

/// Validates a device description and enumerates its basis.
pub fn build_system(config: &DeviceConfig) -> Result<SystemModel> {
    if config.modes.is_empty() {
        return Err(Error::Model("at least one mode is required".into()));
    }
    let mut warnings = Vec::new();
    let mut modes: Vec<Mode> = Vec::with_capacity(config.modes.len());
    for m in &config.modes {
        if modes.iter().any(|x| x.name == m.name) {
            return Err(Error::Model(format!("duplicate mode name `{}`", m.name)));
        }
        if !(m.frequency_ghz > 0.0) || !m.frequency_ghz.is_finite() {
            return Err(Error::Model(format!(
                "modes.{}.frequency_ghz must be positive, got {}",
                m.name, m.frequency_ghz
            )));
        }
        if m.levels < 2 {
            return Err(Error::Model(format!(
                "modes.{}.levels must be at least 2, got {}",
                m.name, m.levels
            )));
        }
        let params = match m.kind {
            ModeKind::Transmon => {
                let anharmonicity = m.anharmonicity_ghz.unwrap_or(0.0);
                if anharmonicity > 0.0 {
                    warnings.push(format!(
                        "mode `{}` has positive anharmonicity {anharmonicity} GHz",
                        m.name
                    ));
                }
                ModeParams::Transmon(TransmonParams {
                    frequency: m.frequency_ghz,
                    anharmonicity,
                    levels: m.levels,
                })
            }
            ModeKind::Resonator => {
                let linewidth = m.kappa_ghz.unwrap_or(0.0);
                if linewidth < 0.0 {
                    return Err(Error::Model(format!(
                        "modes.{}.kappa_ghz must be non-negative",
                        m.name
                    )));
                }
                ModeParams::Resonator(ResonatorParams {
                    frequency: m.frequency_ghz,
                    linewidth,
                    levels: m.levels,
                    dispersive_shift: m.chi_ghz.unwrap_or(0.0),
                })
            }
        };
        modes.push(Mode {
            name: m.name.clone(),
            params,
            tunable: m.tunable,
        });
    }

    let index_of = |name: &str| {
        modes
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| Error::UnknownMode(name.to_string()))
    };
    let mut couplings: Vec<Coupling> = Vec::new();
    for c in &config.couplings {
        let a = index_of(&c.a)?;
        let b = index_of(&c.b)?;
        if a == b {
            return Err(Error::Model(format!("mode `{}` coupled to itself", c.a)));
        }
        if couplings.iter().any(|x| x.connects(a, b)) {
            return Err(Error::Model(format!(
                "duplicate coupling between `{}` and `{}`",
                c.a, c.b
            )));
        }
        couplings.push(Coupling {
            mode_a: a,
            mode_b: b,
            strength: c.g_ghz,
        });
    }

    let frame = match config.frame_ghz {
        Some(f) => f,
        None => default_frame(&modes),
    };
    Ok(SystemModel::from_parts(modes, couplings, frame, warnings))
}

fn default_frame(modes: &[Mode]) -> f64 {
    modes
        .iter()
        .find(|m| matches!(m.params, ModeParams::Transmon(_)) && !m.tunable)
        .unwrap_or(&modes[0])
        .frequency()
}

impl SystemModel {
    fn from_parts(modes: Vec<Mode>, couplings: Vec<Coupling>, frame: f64, warnings: Vec<String>) -> Self {
        let mut strides = vec![1; modes.len()];
        for i in (0..modes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * modes[i + 1].levels();
        }
        let dim = modes.iter().map(Mode::levels).product();
        Self {
            modes,
            couplings,
            frame,
            strides,
            dim,
            warnings,
        }
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn frame(&self) -> f64 {
        self.frame
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn mode_index(&self, name: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| Error::UnknownMode(name.to_string()))
    }

    pub fn mode(&self, name: &str) -> Result<&Mode> {
        Ok(&self.modes[self.mode_index(name)?])
    }

    pub fn coupling(&self, a: &str, b: &str) -> Option<f64> {
        let (a, b) = (self.mode_index(a).ok()?, self.mode_index(b).ok()?);
        self.couplings
            .iter()
            .find(|c| c.connects(a, b))
            .map(|c| c.strength)
    }

    pub fn tunable_modes(&self) -> impl Iterator<Item = (usize, &Mode)> {
        self.modes.iter().enumerate().filter(|(_, m)| m.tunable)
    }

    /// Same device with a different rotating frame.
    pub fn with_frame(&self, frame: f64) -> Self {
        Self {
            frame,
            ..self.clone()
        }
    }

    /// Same device with every truncation set to `levels`.
    pub fn with_levels(&self, levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::Model(format!("levels must be at least 2, got {levels}")));
        }
        let mut modes = self.modes.clone();
        for m in &mut modes {
            m.set_levels(levels);
        }
        Ok(Self::from_parts(
            modes,
            self.couplings.clone(),
            self.frame,
            self.warnings.clone(),
        ))
    }

    /// Modes that are linked through couplings, each group in model order.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.modes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for c in &self.couplings {
            if c.strength == 0.0 {
                continue;
            }
            let (ra, rb) = (find(&mut parent, c.mode_a), find(&mut parent, c.mode_b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        groups.into_values().collect()
    }

    /// Restriction of the model to the given modes (kept in model order).
    pub fn subsystem(&self, mode_indices: &[usize]) -> Result<Self> {
        let mut idx: Vec<usize> = mode_indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        if idx.is_empty() || idx.iter().any(|&i| i >= self.modes.len()) {
            return Err(Error::Model("invalid subsystem mode list".into()));
        }
        let modes = idx.iter().map(|&i| self.modes[i].clone()).collect();
        let couplings = self
            .couplings
            .iter()
            .filter_map(|c| {
                let a = idx.iter().position(|&i| i == c.mode_a)?;
                let b = idx.iter().position(|&i| i == c.mode_b)?;
                Some(Coupling {
                    mode_a: a,
                    mode_b: b,
                    strength: c.strength,
                })
            })
            .collect();
        Ok(Self::from_parts(modes, couplings, self.frame, Vec::new()))
    }

    // -- basis -------------------------------------------------------------

    /// Position of an occupation tuple in the basis enumeration (last mode
    /// varies fastest).
    pub fn basis_index(&self, state: &BasisState) -> Result<usize> {
        if state.0.len() != self.modes.len() {
            return Err(Error::Dimension {
                expected: self.modes.len(),
                got: state.0.len(),
            });
        }
        let mut index = 0;
        for ((&n, mode), &stride) in state.0.iter().zip(&self.modes).zip(&self.strides) {
            if n >= mode.levels() {
                return Err(Error::Occupation {
                    mode: mode.name.clone(),
                    occupation: n,
                    levels: mode.levels(),
                });
            }
            index += n * stride;
        }
        Ok(index)
    }

    /// Inverse of [`basis_index`](Self::basis_index).
    pub fn basis_state(&self, index: usize) -> Result<BasisState> {
        if index >= self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: index,
            });
        }
        Ok(BasisState(
            self.strides
                .iter()
                .zip(&self.modes)
                .map(|(&s, m)| (index / s) % m.levels())
                .collect(),
        ))
    }

    pub fn basis(&self) -> Vec<BasisState> {
        (0..self.dim).map(|i| self.basis_state(i).unwrap()).collect()
    }

    /// Occupation of mode `mode` in basis state `index`.
    #[inline]
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % self.modes[mode].levels()
    }

    pub fn excitations(&self, index: usize) -> usize {
        (0..self.modes.len()).map(|m| self.occupation(index, m)).sum()
    }

    pub fn max_excitations(&self) -> usize {
        self.modes.iter().map(|m| m.levels() - 1).sum()
    }

    /// Basis indices with total occupation `n`, in basis order.
    pub fn sector_indices(&self, n: usize) -> Result<Vec<usize>> {
        let max = self.max_excitations();
        if n > max {
            return Err(Error::Sector { requested: n, max });
        }
        Ok((0..self.dim).filter(|&i| self.excitations(i) == n).collect())
    }

    // -- Hamiltonian ---------------------------------------------------------

    /// Static frequencies, with tunable modes at their idle points.
    pub fn idle_frequencies(&self) -> BTreeMap<String, f64> {
        self.tunable_modes()
            .map(|(_, m)| (m.name.clone(), m.frequency()))
            .collect()
    }

    /// Assembles the rotating-frame Hamiltonian (rad/ns). Every tunable mode
    /// must appear in `coupler_frequencies`; other entries must name tunable
    /// modes as well.
    pub fn assemble_hamiltonian(&self, coupler_frequencies: &BTreeMap<String, f64>) -> Result<DMatrix<Complex64>> {
        for name in coupler_frequencies.keys() {
            let m = self.mode(name)?;
            if !m.tunable {
                return Err(Error::Model(format!("mode `{name}` is not tunable")));
            }
        }
        let mut freqs = Vec::with_capacity(self.modes.len());
        for m in &self.modes {
            if m.tunable {
                let f = coupler_frequencies
                    .get(&m.name)
                    .ok_or_else(|| Error::MissingFrequency(m.name.clone()))?;
                freqs.push(*f);
            } else {
                freqs.push(m.frequency());
            }
        }
        Ok(self.hamiltonian_with(&freqs))
    }

    /// Hamiltonian for explicit per-mode frequencies (GHz, model order).
    pub fn hamiltonian_with(&self, freqs: &[f64]) -> DMatrix<Complex64> {
        let diag = self.diagonal_energies(freqs);
        let mut h = self.hopping_matrix();
        for (i, e) in diag.into_iter().enumerate() {
            h[(i, i)] += Complex64::new(e, 0.0);
        }
        h
    }

    /// Diagonal energies (rad/ns) for explicit per-mode frequencies.
    pub fn diagonal_energies(&self, freqs: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                self.modes
                    .iter()
                    .enumerate()
                    .map(|(m, mode)| {
                        let n = self.occupation(i, m) as f64;
                        TAU * ((freqs[m] - self.frame) * n + 0.5 * mode.anharmonicity() * n * (n - 1.0))
                    })
                    .sum()
            })
            .collect()
    }

    /// Off-diagonal exchange terms 2π g (a† b + b† a).
    pub fn hopping_matrix(&self) -> DMatrix<Complex64> {
        let mut h = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        for c in &self.couplings {
            let (a, b) = (c.mode_a, c.mode_b);
            let g = TAU * c.strength;
            for i in 0..self.dim {
                let na = self.occupation(i, a);
                let nb = self.occupation(i, b);
                // a† b |.., na, .., nb, ..⟩
                if nb > 0 && na + 1 < self.modes[a].levels() {
                    let j = i + self.strides[a] - self.strides[b];
                    let amp = g * (((na + 1) * nb) as f64).sqrt();
                    h[(j, i)] += Complex64::new(amp, 0.0);
                    h[(i, j)] += Complex64::new(amp, 0.0);
                }
            }
        }
        h
    }

    /// Total number operator as a diagonal matrix.
    pub fn number_operator(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            if i == j {
                Complex64::new(self.excitations(i) as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Block of `h` restricted to total occupation `n`, with its labels.
    pub fn excitation_block(&self, h: &DMatrix<Complex64>, n: usize) -> Result<(DMatrix<Complex64>, Vec<BasisState>)> {
        if h.nrows() != self.dim || h.ncols() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: h.nrows(),
            });
        }
        let idx = self.sector_indices(n)?;
        let block = DMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])]);
        let labels = idx.iter().map(|&i| self.basis_state(i).unwrap()).collect();
        Ok((block, labels))
    }

    /// Resonator linewidths keyed by mode name (only non-zero entries).
    pub fn dissipators(&self) -> BTreeMap<String, f64> {
        self.modes
            .iter()
            .filter(|m| m.is_resonator() && m.linewidth() > 0.0)
            .map(|m| (m.name.clone(), m.linewidth()))
            .collect()
    }
}
