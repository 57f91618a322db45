//! Velocity/acceleration/jerk smoothness cost.

use serde::{Deserialize, Serialize};

use super::banded::BandedSym;
use crate::kinematics::JointConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub velocity: f64,
    pub acceleration: f64,
    pub jerk: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            velocity: 1.0,
            acceleration: 1.0,
            jerk: 1.0,
        }
    }
}

const STENCILS: [&[f64]; 3] = [&[-1.0, 1.0], &[1.0, -2.0, 1.0], &[-1.0, 3.0, -3.0, 1.0]];

impl CostWeights {
    fn by_order(&self) -> [f64; 3] {
        [self.velocity, self.acceleration, self.jerk]
    }

    /// Sum of weighted squared finite differences over `seq`, computed
    /// stencil by stencil.
    pub fn evaluate<'a>(&self, seq: impl Iterator<Item = &'a [f64]> + Clone) -> f64 {
        let rows: Vec<&[f64]> = seq.collect();
        let mut total = 0.0;
        for (stencil, w) in STENCILS.iter().zip(self.by_order()) {
            if w == 0.0 || rows.len() < stencil.len() {
                continue;
            }
            for win in rows.windows(stencil.len()) {
                let dof = win[0].len();
                for j in 0..dof {
                    let d: f64 = stencil.iter().zip(win).map(|(c, q)| c * q[j]).sum();
                    total += w * d * d;
                }
            }
        }
        total
    }
}

/// The cost restricted to one joint is `s' Q s` for the scalar sequence `s`.
/// `Q` is symmetric with half-bandwidth 3; stored as `q[i][k] = Q[i][i + k]`.
#[derive(Debug, Clone)]
pub(crate) struct SmoothnessForm {
    q: Vec<[f64; 4]>,
}

impl SmoothnessForm {
    pub fn new(len: usize, weights: &CostWeights) -> Self {
        let mut q = vec![[0.0; 4]; len];
        for (stencil, w) in STENCILS.iter().zip(weights.by_order()) {
            if w == 0.0 || len < stencil.len() {
                continue;
            }
            for start in 0..=(len - stencil.len()) {
                for (a, ca) in stencil.iter().enumerate() {
                    for (b, cb) in stencil.iter().enumerate().skip(a) {
                        q[start + a][b - a] += w * ca * cb;
                    }
                }
            }
        }
        Self { q }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j - i > 3 {
            0.0
        } else {
            self.q[i][j - i]
        }
    }

    /// `(Q s)_i` for a scalar sequence accessed through `s(i)`.
    pub fn apply(&self, s: impl Fn(usize) -> f64, i: usize) -> f64 {
        let n = self.len();
        let lo = i.saturating_sub(3);
        let hi = (i + 3).min(n - 1);
        (lo..=hi).map(|j| self.entry(i, j) * s(j)).sum()
    }

    /// Hessian of the cost with respect to the free sequence entries
    /// `first_free..len` of every joint, in waypoint-major order.
    pub fn hessian(&self, first_free: usize, dof: usize) -> BandedSym {
        let free = self.len() - first_free;
        let mut h = BandedSym::zeros(free * dof, 3 * dof);
        for a in 0..free {
            for b in a..(a + 4).min(free) {
                let v = 2.0 * self.entry(first_free + a, first_free + b);
                if v == 0.0 {
                    continue;
                }
                for j in 0..dof {
                    h.add(b * dof + j, a * dof + j, v);
                }
            }
        }
        h
    }
}

/// Smoothness cost over `prefix ++ waypoints`.
pub fn sequence_cost(
    prefix: &[JointConfig],
    waypoints: &[JointConfig],
    weights: &CostWeights,
) -> f64 {
    weights.evaluate(prefix.iter().chain(waypoints).map(|q| &q[..]))
}
