//! Closed-form results used as oracles and for design estimates.
//!
//! Frequencies and couplings are taken in GHz (cyclic) unless a type says
//! otherwise; the formulas convert to rad/ns internally.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on |κ − 2g| (rad/ns) under which a coupler-resonator pair is
/// treated as critically damped.
pub const CRITICAL_TOL: f64 = 1e-9;

/// Populations (qubit, coupler) of a resonant swap after time `t` ns.
pub fn rabi_population(g: f64, t: f64) -> (f64, f64) {
    let c = (TAU * g * t).cos();
    let pq = c * c;
    (pq, 1.0 - pq)
}

/// Damping regime of a resonant coupler-resonator pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DampingKind {
    UnderDamped,
    Critical,
    OverDamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DampingRegime {
    /// κ² − 4g² in (rad/ns)².
    pub discriminant: f64,
    pub kind: DampingKind,
}

impl DampingRegime {
    /// Classifies a pair with coupling `g_cr` and linewidth `kappa`, both GHz.
    pub fn classify(g_cr: f64, kappa: f64) -> Self {
        let (g, k) = (TAU * g_cr, TAU * kappa);
        let kind = if (k - 2.0 * g).abs() < CRITICAL_TOL {
            DampingKind::Critical
        } else if k < 2.0 * g {
            DampingKind::UnderDamped
        } else {
            DampingKind::OverDamped
        };
        Self {
            discriminant: k * k - 4.0 * g * g,
            kind,
        }
    }
}

/// Coupler amplitude ψ(t) for the resonant damped swap with ψ(0) = 1,
/// ψ'(0) = 0.
///
/// The coupler amplitude obeys ψ'' + κψ' + g²ψ = 0 (angular units), which
/// places critical damping at κ = 2g. Here κ is the decay rate of the
/// resonator amplitude, so it corresponds to a resonator linewidth (energy
/// decay rate) of 2κ in a device description.
pub fn damped_coupler_amplitude(g_cr: f64, kappa: f64, t: f64) -> f64 {
    let (g, k) = (TAU * g_cr, TAU * kappa);
    let decay = (-0.5 * k * t).exp();
    match DampingRegime::classify(g_cr, kappa).kind {
        DampingKind::Critical => decay * (1.0 + 0.5 * k * t),
        DampingKind::UnderDamped => {
            let w = 0.5 * (4.0 * g * g - k * k).sqrt();
            decay * ((w * t).cos() + 0.5 * k / w * (w * t).sin())
        }
        DampingKind::OverDamped => {
            let w = 0.5 * (k * k - 4.0 * g * g).sqrt();
            let x = w * t;
            if x < 1.0 {
                decay * (x.cosh() + 0.5 * k * t * sinhc(x))
            } else {
                // decaying exponentials only, so large t cannot overflow
                let slow = (-(0.5 * k - w) * t).exp();
                let fast = (-(0.5 * k + w) * t).exp();
                let r = 0.25 * k / w;
                (0.5 + r) * slow + (0.5 - r) * fast
            }
        }
    }
}

fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0
    } else {
        x.sinh() / x
    }
}

/// |ψ_c(t)|² of the damped swap.
pub fn damped_coupler_population(g_cr: f64, kappa: f64, t: f64) -> f64 {
    let a = damped_coupler_amplitude(g_cr, kappa, t);
    (a * a).min(1.0)
}

/// Asymptotic decay rate (rad/ns) of the coupler population envelope.
pub fn asymptotic_decay_rate(g_cr: f64, kappa: f64) -> f64 {
    let (g, k) = (TAU * g_cr, TAU * kappa);
    if k <= 2.0 * g {
        k
    } else {
        k - (k * k - 4.0 * g * g).sqrt()
    }
}

/// κ/g ratio that empties the coupler fastest.
pub fn fastest_decay_ratio() -> f64 {
    2.0
}

/// One point of [`decay_rate_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub ratio: f64,
    /// Fitted envelope decay rate of |ψ_c|² in units of g (angular).
    pub fitted_rate: f64,
    pub asymptotic_rate: f64,
}

/// Fits the exponential envelope of |ψ_c|² over the tail window
/// g·t ∈ [20, 80] for `points` ratios κ/g evenly spaced in `[lo, hi]`.
/// Returns the scan and the index of the fastest decay.
pub fn decay_rate_scan(lo: f64, hi: f64, points: usize) -> Result<(Vec<DecayPoint>, usize)> {
    if points < 2 || !(hi > lo) || !(lo >= 0.0) {
        return Err(Error::InvalidArgument("decay scan needs points >= 2 and 0 <= lo < hi".into()));
    }
    let g = 1.0 / TAU; // g = 1 rad/ns, so rates come out in units of g
    let scan: Vec<DecayPoint> = (0..points)
        .map(|i| {
            let ratio = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            let kappa = ratio * g;
            DecayPoint {
                ratio,
                fitted_rate: fit_envelope_rate(g, kappa, 20.0, 80.0),
                asymptotic_rate: asymptotic_decay_rate(g, kappa),
            }
        })
        .collect();
    let best = (0..points)
        .max_by(|&a, &b| scan[a].fitted_rate.total_cmp(&scan[b].fitted_rate))
        .unwrap();
    Ok((scan, best))
}

/// Least-squares slope of ln|ψ_c|² through its local maxima in [t0, t1]
/// (or through all samples when the tail is monotone).
fn fit_envelope_rate(g_cr: f64, kappa: f64, t0: f64, t1: f64) -> f64 {
    let n = 6000;
    let samples: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let t = t0 + (t1 - t0) * i as f64 / n as f64;
            (t, damped_coupler_population(g_cr, kappa, t))
        })
        .collect();
    let peaks: Vec<(f64, f64)> = samples
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1 && w[1].1 > 0.0)
        .map(|w| w[1])
        .collect();
    let pts: Vec<(f64, f64)> = if peaks.len() >= 2 {
        peaks
    } else {
        samples.into_iter().filter(|p| p.1 > 0.0).collect()
    };
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1.ln()));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), p| {
        (a + (p.0 - mx) * (p.1.ln() - my), b + (p.0 - mx) * (p.0 - mx))
    });
    -sxy / sxx
}

/// Time (ns) after which |ψ_c|² stays below `threshold`.
pub fn threshold_crossing_time(g_cr: f64, kappa: f64, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside (0, 1)")));
    }
    let rate = asymptotic_decay_rate(g_cr, kappa);
    if !(rate > 0.0) {
        return Err(Error::InvalidArgument("no decay without loss".into()));
    }
    let (g, k) = (TAU * g_cr, TAU * kappa);
    // upper bound on the envelope prefactor in each regime
    let prefactor = match DampingRegime::classify(g_cr, kappa).kind {
        DampingKind::UnderDamped => {
            let w = 0.5 * (4.0 * g * g - k * k).sqrt();
            1.0 + (0.5 * k / w).powi(2)
        }
        DampingKind::Critical => 1.0,
        DampingKind::OverDamped => 1.0,
    };
    // critical: (1 + x)² e^{-2x} ≤ e^{-x} beyond x ≈ 2.5, so pad the bound
    let t_max = ((prefactor / threshold).ln() / rate).max(0.0) * 2.0 + 10.0 / rate;
    let n = 200_000;
    let dt = t_max / n as f64;
    let last_above = (0..=n)
        .rev()
        .find(|&i| damped_coupler_population(g_cr, kappa, i as f64 * dt) >= threshold)
        .unwrap_or(0);
    let (mut a, mut b) = (last_above as f64 * dt, (last_above + 1) as f64 * dt);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if damped_coupler_population(g_cr, kappa, m) >= threshold {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Landau–Zener parameters in angular units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LzParams {
    /// Coupling, rad/ns.
    pub g: f64,
    /// Sweep rate of the level splitting, rad/ns².
    pub rate: f64,
}

impl LzParams {
    pub fn new(g: f64, rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !(g >= 0.0) {
            return Err(Error::InvalidArgument(format!("LZ needs rate > 0 and g >= 0, got g={g}, rate={rate}")));
        }
        Ok(Self { g, rate })
    }

    /// From a coupling in GHz and a detuning sweep rate in GHz/ns.
    pub fn from_cyclic(g_ghz: f64, rate_ghz_per_ns: f64) -> Result<Self> {
        Self::new(TAU * g_ghz, TAU * rate_ghz_per_ns)
    }
}

/// Probability of a diabatic transition through the avoided crossing.
pub fn lz_transition_probability(params: &LzParams) -> f64 {
    (-2.0 * PI * params.g * params.g / params.rate).exp()
}

/// Unit convention of the reset-time estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Inputs are Ω/2π in GHz; each stage lasts 1/Ω.
    Angular,
    /// Inputs are used directly as rates in 1/ns.
    Cyclic,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::Angular => "angular",
            Convention::Cyclic => "cyclic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResetTime {
    pub ns: f64,
    pub convention: Convention,
}

impl fmt::Display for ResetTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ns ({} convention)", self.ns, self.convention)
    }
}

/// Sum of the three stage times: resonator swap, qubit swap and resonator
/// emptying, from rates given in GHz.
pub fn total_reset_time(omega_r: f64, omega_q: f64, kappa: f64, convention: Convention) -> Result<ResetTime> {
    if !(omega_r > 0.0 && omega_q > 0.0 && kappa > 0.0) {
        return Err(Error::InvalidArgument("reset-time rates must be positive".into()));
    }
    let scale = match convention {
        Convention::Angular => TAU,
        Convention::Cyclic => 1.0,
    };
    Ok(ResetTime {
        ns: 1.0 / (scale * omega_r) + 1.0 / (scale * omega_q) + 1.0 / (scale * kappa),
        convention,
    })
}

/// Coupler count for a distance-`d` rotated surface code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CouplerBudget {
    pub distance: usize,
    pub data_qubits: usize,
    pub ancilla_qubits: usize,
    /// Couplers available between data and ancilla qubits.
    pub available: usize,
    /// Couplers needed to give every qubit its own reset path.
    pub required: usize,
    pub feasible: bool,
}

pub fn surface_code_coupler_budget(d: usize) -> Result<CouplerBudget> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("code distance must be >= 2, got {d}")));
    }
    let available = 4 * d * (d - 1);
    let required = 3 * d * d - 1;
    Ok(CouplerBudget {
        distance: d,
        data_qubits: d * d,
        ancilla_qubits: d * d - 1,
        available,
        required,
        feasible: available >= required,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rabi_points() {
        assert_eq!(rabi_population(0.047, 0.0), (1.0, 0.0));
        let t: f64 = 1.0 / (4.0 * 0.047);
        assert!((t - 5.319).abs() < 1e-3);
        assert!(rabi_population(0.047, t).0 < 1e-20);
        let (a, b) = rabi_population(0.047, t / 2.0);
        assert!((a - 0.5).abs() < 1e-12 && (b - 0.5).abs() < 1e-12);
    }

    #[test]
    fn damped_initial_and_undamped_limit() {
        for k in [0.0, 0.01, 0.094, 0.3] {
            assert!((damped_coupler_population(0.047, k, 0.0) - 1.0).abs() < 1e-15);
        }
        for t in [0.3, 2.0, 7.7] {
            let c = (TAU * 0.047 * t).cos();
            assert!((damped_coupler_population(0.047, 0.0, t) - c * c).abs() < 1e-12);
        }
    }

    #[test]
    fn regime_classification() {
        assert_eq!(DampingRegime::classify(0.05, 0.05).kind, DampingKind::UnderDamped);
        assert_eq!(DampingRegime::classify(0.05, 0.1).kind, DampingKind::Critical);
        assert_eq!(DampingRegime::classify(0.05, 0.2).kind, DampingKind::OverDamped);
        assert!(DampingRegime::classify(0.05, 0.2).discriminant > 0.0);
    }

    #[test]
    fn continuous_across_critical_point() {
        let g = 0.05;
        for t in [1.0, 5.0, 20.0] {
            let c = damped_coupler_population(g, 2.0 * g, t);
            let lo = damped_coupler_population(g, 2.0 * g * (1.0 - 1e-10), t);
            let hi = damped_coupler_population(g, 2.0 * g * (1.0 + 1e-10), t);
            assert!((c - lo).abs() < 1e-8 && (c - hi).abs() < 1e-8, "{c} {lo} {hi}");
        }
    }

    #[test]
    fn scan_peaks_at_critical() {
        assert_eq!(fastest_decay_ratio(), 2.0);
        let (scan, best) = decay_rate_scan(0.5, 4.0, 36).unwrap();
        assert!((scan[best].ratio - 2.0).abs() <= 0.2 + 1e-9);
    }

    #[test]
    fn over_damped_slower_than_critical() {
        let g = 0.05;
        let crit = threshold_crossing_time(g, 2.0 * g, 1e-3).unwrap();
        let over = threshold_crossing_time(g, 10.0 * g, 1e-3).unwrap();
        assert!(over > crit);
        assert!((damped_coupler_population(g, 2.0 * g, crit) - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn lz_limits() {
        assert_eq!(lz_transition_probability(&LzParams::new(0.0, 1.0).unwrap()), 1.0);
        let rate = 3.0;
        let g = (rate * 2f64.ln() / TAU).sqrt();
        assert!((lz_transition_probability(&LzParams::new(g, rate).unwrap()) - 0.5).abs() < 1e-14);
        assert!(LzParams::new(0.1, 0.0).is_err());
    }

    #[test]
    fn reset_time_conventions() {
        let a = total_reset_time(0.010, 0.060, 0.010, Convention::Angular).unwrap();
        assert!((a.ns - 34.48).abs() < 0.01);
        assert!(a.to_string().contains("angular"));
        let c = total_reset_time(0.010, 0.060, 0.010, Convention::Cyclic).unwrap();
        assert!((c.ns - 216.67).abs() < 0.01);
        let h = total_reset_time(0.020, 0.120, 0.020, Convention::Cyclic).unwrap();
        assert!((h.ns - c.ns / 2.0).abs() < 1e-12);
    }

    #[test]
    fn coupler_budget() {
        let b3 = surface_code_coupler_budget(3).unwrap();
        assert_eq!((b3.available, b3.required, b3.feasible), (24, 26, false));
        let b4 = surface_code_coupler_budget(4).unwrap();
        assert_eq!((b4.available, b4.required, b4.feasible), (48, 47, true));
        let b5 = surface_code_coupler_budget(5).unwrap();
        assert_eq!((b5.data_qubits, b5.ancilla_qubits, b5.available, b5.required), (25, 24, 80, 74));
        assert!(surface_code_coupler_budget(1).is_err());
    }
}
