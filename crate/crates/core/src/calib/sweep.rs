use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// One swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(name: &str, unit: &str, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(format!("axis `{name}` is empty")));
        }
        let up = values.windows(2).all(|w| w[1] > w[0]);
        let down = values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("axis `{name}` must be strictly monotone and finite")));
        }
        Ok(Self {
            name: name.to_string(),
            unit: unit.to_string(),
            values,
        })
    }

    /// `points` evenly spaced values over `[lo, hi]`.
    pub fn linspace(name: &str, unit: &str, lo: f64, hi: f64, points: usize) -> Result<Self> {
        let values = match points {
            0 => Vec::new(),
            1 => vec![lo],
            n => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        };
        Self::new(name, unit, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the value closest to `v`.
    pub fn nearest(&self, v: f64) -> usize {
        (0..self.values.len())
            .min_by(|&a, &b| (self.values[a] - v).abs().total_cmp(&(self.values[b] - v).abs()))
            .unwrap_or(0)
    }
}

/// Grid point where the objective failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointFailure {
    pub ix: usize,
    pub iy: usize,
    pub message: String,
}

/// Objective values over two axes; `errors[ix][iy]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub axis_x: SweepAxis,
    pub axis_y: SweepAxis,
    pub errors: Vec<Vec<f64>>,
    pub failures: Vec<PointFailure>,
}

impl SweepGrid {
    /// Smallest finite entry as (ix, iy, value).
    pub fn minimum(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (ix, col) in self.errors.iter().enumerate() {
            for (iy, &v) in col.iter().enumerate() {
                if v.is_finite() && best.map_or(true, |b| v < b.2) {
                    best = Some((ix, iy, v));
                }
            }
        }
        best
    }

    /// CSV: the first row holds the x values, each further row a y value
    /// followed by the errors along x. Failed points are written as NaN.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\\{}", self.axis_y.name, self.axis_x.name);
        for x in &self.axis_x.values {
            out.push(',');
            out.push_str(&fmt_f64(*x));
        }
        out.push('\n');
        for (iy, y) in self.axis_y.values.iter().enumerate() {
            out.push_str(&fmt_f64(*y));
            for ix in 0..self.axis_x.len() {
                out.push(',');
                out.push_str(&fmt_f64(self.errors[ix][iy]));
            }
            out.push('\n');
        }
        out
    }

    /// JSON sidecar describing the axes, failed points and the hash of the
    /// scenario that produced the grid.
    pub fn sidecar(&self, scenario_hash: &str) -> serde_json::Value {
        json!({
            "axis_x": self.axis_x,
            "axis_y": self.axis_y,
            "shape": [self.axis_x.len(), self.axis_y.len()],
            "layout": "rows follow axis_y, columns follow axis_x",
            "failures": self.failures,
            "scenario_sha256": scenario_hash,
        })
    }
}

/// Evaluates `objective([x, y])` at every grid point, in parallel. Failures
/// and values outside [0, 1] become NaN with a diagnostic.
pub fn sweep2d<F>(objective: F, axis_x: SweepAxis, axis_y: SweepAxis) -> Result<SweepGrid>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if axis_x.is_empty() || axis_y.is_empty() {
        return Err(Error::InvalidArgument("sweep axes must be non-empty".into()));
    }
    let points: Vec<(usize, usize)> = (0..axis_x.len())
        .flat_map(|ix| (0..axis_y.len()).map(move |iy| (ix, iy)))
        .collect();
    let values: Vec<std::result::Result<f64, String>> = points
        .par_iter()
        .map(|&(ix, iy)| match objective(&[axis_x.values[ix], axis_y.values[iy]]) {
            Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
            Ok(v) => Err(format!("objective value {v} outside [0, 1]")),
            Err(e) => Err(e.to_string()),
        })
        .collect();
    let mut errors = vec![vec![f64::NAN; axis_y.len()]; axis_x.len()];
    let mut failures = Vec::new();
    for (&(ix, iy), v) in points.iter().zip(values) {
        match v {
            Ok(v) => errors[ix][iy] = v,
            Err(message) => failures.push(PointFailure { ix, iy, message }),
        }
    }
    Ok(SweepGrid {
        axis_x,
        axis_y,
        errors,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// A 1D slice of a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineCut {
    /// Axis held fixed.
    pub fixed: Axis,
    pub index: usize,
    pub value: f64,
    /// Values along the other axis.
    pub coordinates: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Holds `axis` at the gridline nearest `value` and returns the errors along
/// the other axis.
pub fn line_cut(grid: &SweepGrid, axis: Axis, value: f64) -> Result<LineCut> {
    if grid.errors.is_empty() || grid.errors[0].is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let held = match axis {
        Axis::X => &grid.axis_x,
        Axis::Y => &grid.axis_y,
    };
    let (lo, hi) = held
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(value >= lo - 1e-12 && value <= hi + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "cut value {value} outside axis `{}` range [{lo}, {hi}]",
            held.name
        )));
    }
    let index = held.nearest(value);
    let (coordinates, errors) = match axis {
        Axis::X => (grid.axis_y.values.clone(), grid.errors[index].clone()),
        Axis::Y => (
            grid.axis_x.values.clone(),
            grid.errors.iter().map(|col| col[index]).collect(),
        ),
    };
    Ok(LineCut {
        fixed: axis,
        index,
        value: held.values[index],
        coordinates,
        errors,
    })
}

fn sinusoid_residual(x: &[f64], y: &[f64], period: f64) -> f64 {
    let w = std::f64::consts::TAU / period;
    let rows: Vec<[f64; 3]> = x.iter().map(|&t| [1.0, (w * t).cos(), (w * t).sin()]).collect();
    let a = DMatrix::from_fn(x.len(), 3, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(y);
    match a.clone().svd(true, true).solve(&b, 1e-12) {
        Ok(c) => (a * c - b).norm_squared(),
        Err(_) => f64::INFINITY,
    }
}

/// Period of the best-fitting sinusoid a + b cos(2πx/T) + c sin(2πx/T)
/// through the finite samples. Candidates range from four sample spacings
/// to twice the sampled span.
pub fn fit_period(x: &[f64], y: &[f64]) -> Result<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .unzip();
    if xs.len() < 5 {
        return Err(Error::InvalidArgument("period fit needs at least 5 finite samples".into()));
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = hi - lo;
    let t_min = 4.0 * span / (xs.len() - 1) as f64;
    let t_max = 2.0 * span;
    let n = 2000;
    let cand: Vec<f64> = (0..n)
        .map(|k| t_min * (t_max / t_min).powf(k as f64 / (n - 1) as f64))
        .collect();
    let res: Vec<f64> = cand.iter().map(|&t| sinusoid_residual(&xs, &ys, t)).collect();
    let k = (0..n).min_by(|&a, &b| res[a].total_cmp(&res[b])).unwrap_or(0);
    // golden-section refinement between the neighbouring candidates
    let (mut a, mut b) = (cand[k.saturating_sub(1)], cand[(k + 1).min(n - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if sinusoid_residual(&xs, &ys, c) < sinusoid_residual(&xs, &ys, d) {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(0.5 * (a + b))
}
