use serde::{Deserialize, Serialize};

/// Hand-crafted estimate of completion time in seconds before any data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PriorMean {
    /// Linear interpolation in seconds between anchors sorted by x; constant
    /// extrapolation outside them.
    PiecewiseLinear1D { anchors: Vec<(f64, f64)> },
    /// `base + sum_i slope_i * (x_i - origin_i)`.
    Plane2D {
        base_seconds: f64,
        origin: Vec<f64>,
        slopes: Vec<f64>,
    },
    Constant { seconds: f64 },
}

/// Lower clamp keeping `log` of the prior finite.
const MIN_SECONDS: f64 = 1e-3;

impl PriorMean {
    pub fn piecewise(mut anchors: Vec<(f64, f64)>) -> Self {
        anchors.sort_by(|a, b| a.0.total_cmp(&b.0));
        PriorMean::PiecewiseLinear1D { anchors }
    }

    pub fn seconds(&self, x: &[f64]) -> f64 {
        let s = match self {
            PriorMean::PiecewiseLinear1D { anchors } => interpolate(anchors, x[0]),
            PriorMean::Plane2D {
                base_seconds,
                origin,
                slopes,
            } => {
                base_seconds
                    + x.iter()
                        .zip(origin.iter().zip(slopes))
                        .map(|(v, (o, s))| s * (v - o))
                        .sum::<f64>()
            }
            PriorMean::Constant { seconds } => *seconds,
        };
        s.max(MIN_SECONDS)
    }

    pub fn log_seconds(&self, x: &[f64]) -> f64 {
        self.seconds(x).ln()
    }
}

fn interpolate(anchors: &[(f64, f64)], x: f64) -> f64 {
    match anchors {
        [] => 1.0,
        [(_, y)] => *y,
        _ => {
            let (x0, y0) = anchors[0];
            if x <= x0 {
                return y0;
            }
            for w in anchors.windows(2) {
                let ((xa, ya), (xb, yb)) = (w[0], w[1]);
                if x <= xb {
                    if xb == xa {
                        return yb;
                    }
                    return ya + (yb - ya) * (x - xa) / (xb - xa);
                }
            }
            anchors[anchors.len() - 1].1
        }
    }
}
