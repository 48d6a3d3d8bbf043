use serde::{Deserialize, Serialize};

use crate::docspec::{Control, InteractionSpec};
use crate::expr::{Env, Value};

pub const DEFAULT_GRID_POINTS: usize = 11;
pub const DEFAULT_CAP: usize = 10_000;
/// Floor for grid density reduction.
pub const MIN_GRID_POINTS: usize = 3;

/// Sample values for one swept input (`r`, or `p.x` for a drag axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub name: String,
    pub samples: Vec<Value>,
}

/// Cartesian grid over every controllable input. Enumeration order is
/// row-major with the first axis varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub axes: Vec<SweepAxis>,
    /// Requested points per numeric axis.
    pub grid_points_per_variable: usize,
    /// Points per numeric axis after fitting under `cap`.
    pub effective_grid_points: usize,
    pub cap: usize,
    pub total_samples: usize,
    /// Set when even the density floor exceeds `cap` and the grid was cut
    /// off after `cap` samples.
    pub truncated: bool,
}

impl SweepPlan {
    /// Raw control values for every sample, in enumeration order.
    pub fn samples(&self) -> impl Iterator<Item = Env> + '_ {
        let full: usize = self.axes.iter().map(|a| a.samples.len()).product();
        (0..full.min(self.total_samples)).map(move |mut idx| {
            let mut picks = vec![0; self.axes.len()];
            for (slot, axis) in picks.iter_mut().zip(&self.axes).rev() {
                *slot = idx % axis.samples.len();
                idx /= axis.samples.len();
            }
            let mut env = Env::new();
            for (axis, &i) in self.axes.iter().zip(&picks) {
                env = env.with(&axis.name, axis.samples[i]);
            }
            env
        })
    }

    pub fn axis(&self, name: &str) -> Option<&SweepAxis> {
        self.axes.iter().find(|a| a.name == name)
    }
}

/// `g` evenly spaced points over `[lo, hi]` that include `default`: when
/// the default is not already a grid point it replaces the nearest
/// interior point, so the count stays at `g`.
pub fn axis_samples(lo: f64, hi: f64, default: f64, g: usize) -> Vec<f64> {
    let g = g.max(MIN_GRID_POINTS);
    let span = hi - lo;
    let mut pts: Vec<f64> = (0..g)
        .map(|i| {
            if i == g - 1 {
                hi
            } else {
                lo + span * (i as f64) / ((g - 1) as f64)
            }
        })
        .collect();
    let snap = 1e-9 * span.abs().max(f64::MIN_POSITIVE);
    if let Some(hit) = pts.iter().position(|p| (p - default).abs() <= snap) {
        pts[hit] = default;
        return pts;
    }
    let nearest = (1..g - 1)
        .min_by(|&a, &b| {
            (pts[a] - default)
                .abs()
                .total_cmp(&(pts[b] - default).abs())
        })
        .expect("g >= 3 leaves an interior point");
    pts[nearest] = default;
    pts
}

enum Dim {
    Numeric { name: String, lo: f64, hi: f64, default: f64 },
    Discrete(SweepAxis),
}

/// Builds the sweep for `spec`. Numeric axes get `grid_points` samples,
/// reduced uniformly (never below 3) until the product fits `cap`.
pub fn plan_sweep(spec: &InteractionSpec, grid_points: usize, cap: usize) -> SweepPlan {
    let grid_points = grid_points.max(MIN_GRID_POINTS);
    let cap = cap.max(1);
    let mut dims = Vec::new();
    for v in spec.controllables() {
        match &v.control {
            Control::Slider {
                min, max, default, ..
            } => dims.push(Dim::Numeric {
                name: v.name.clone(),
                lo: *min,
                hi: *max,
                default: *default,
            }),
            Control::Dropdown { options, .. } => dims.push(Dim::Discrete(SweepAxis {
                name: v.name.clone(),
                samples: options.iter().map(|o| Value::Num(o.value)).collect(),
            })),
            Control::Toggle { .. } => dims.push(Dim::Discrete(SweepAxis {
                name: v.name.clone(),
                samples: vec![Value::Bool(false), Value::Bool(true)],
            })),
            Control::Drag {
                x_min,
                x_max,
                y_min,
                y_max,
                default,
            } => {
                dims.push(Dim::Numeric {
                    name: format!("{}.x", v.name),
                    lo: *x_min,
                    hi: *x_max,
                    default: default.x,
                });
                dims.push(Dim::Numeric {
                    name: format!("{}.y", v.name),
                    lo: *y_min,
                    hi: *y_max,
                    default: default.y,
                });
            }
            Control::Derived { .. } => {}
        }
    }

    let numeric = dims.iter().filter(|d| matches!(d, Dim::Numeric { .. })).count() as u32;
    let discrete: usize = dims
        .iter()
        .map(|d| match d {
            Dim::Discrete(a) => a.samples.len(),
            Dim::Numeric { .. } => 1,
        })
        .product();
    let count = |g: usize| -> u128 { discrete as u128 * (g as u128).pow(numeric) };

    let mut g = grid_points;
    while g > MIN_GRID_POINTS && count(g) > cap as u128 {
        g -= 1;
    }
    let full = count(g);
    let truncated = full > cap as u128;
    let total_samples = if truncated { cap } else { full as usize };

    let axes = dims
        .into_iter()
        .map(|d| match d {
            Dim::Numeric {
                name,
                lo,
                hi,
                default,
            } => SweepAxis {
                name,
                samples: axis_samples(lo, hi, default, g).into_iter().map(Value::Num).collect(),
            },
            Dim::Discrete(a) => a,
        })
        .collect();
    SweepPlan {
        axes,
        grid_points_per_variable: grid_points,
        effective_grid_points: g,
        cap,
        total_samples,
        truncated,
    }
}
