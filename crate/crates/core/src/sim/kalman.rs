//! Constant-velocity Kalman filter for smoothing noisy wrist detections.

use nalgebra::{Matrix2x4, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Mat2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanParams {
    /// White-noise acceleration standard deviation, m/s^2.
    pub accel_std: f64,
    /// Measurement noise standard deviation per axis, m.
    pub meas_std: f64,
    /// Initial velocity standard deviation, m/s.
    pub init_vel_std: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            accel_std: 1.0,
            meas_std: 0.01,
            init_vel_std: 0.5,
        }
    }
}

impl KalmanParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("accel_std", self.accel_std),
            ("meas_std", self.meas_std),
            ("init_vel_std", self.init_vel_std),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("kalman.{name}"), "must be > 0"));
            }
        }
        Ok(())
    }
}

/// State `[x, y, vx, vy]` and its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub params: KalmanParams,
}

impl KalmanState {
    pub fn new(position: Vec2, params: KalmanParams) -> Self {
        let r = params.meas_std * params.meas_std;
        let v = params.init_vel_std * params.init_vel_std;
        Self {
            x: Vector4::new(position.x, position.y, 0.0, 0.0),
            p: Matrix4::from_diagonal(&Vector4::new(r, r, v, v)),
            params,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x[0], self.x[1])
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.x[2], self.x[3])
    }

    fn transition(dt: f64) -> Matrix4<f64> {
        let mut f = Matrix4::identity();
        f[(0, 2)] = dt;
        f[(1, 3)] = dt;
        f
    }

    fn process_noise(&self, dt: f64) -> Matrix4<f64> {
        let q = self.params.accel_std * self.params.accel_std;
        let (a, b, c) = (dt.powi(3) / 3.0, dt.powi(2) / 2.0, dt);
        let mut m = Matrix4::zeros();
        for i in 0..2 {
            m[(i, i)] = a * q;
            m[(i, i + 2)] = b * q;
            m[(i + 2, i)] = b * q;
            m[(i + 2, i + 2)] = c * q;
        }
        m
    }
}

fn check_psd(p: &Matrix4<f64>) -> Result<()> {
    let asym = (p - p.transpose()).abs().max();
    if !p.iter().all(|v| v.is_finite()) || asym > 1e-9 * (1.0 + p.abs().max()) {
        return Err(Error::Kalman("covariance lost symmetry".into()));
    }
    let eig = p.symmetric_eigenvalues();
    let floor = -1e-12 * (1.0 + p.trace().abs());
    if eig.iter().any(|e| *e < floor) {
        return Err(Error::Kalman(format!(
            "covariance is not positive semi-definite (min eigenvalue {})",
            eig.min()
        )));
    }
    Ok(())
}

/// Predicts over `dt`, then corrects with the measurement if one arrived.
/// Returns the posterior position.
pub fn kalman_smooth(ks: &mut KalmanState, measurement: Option<Vec2>, dt: f64) -> Result<Vec2> {
    if !(dt > 0.0) {
        return Err(Error::Kalman(format!("dt must be > 0, got {dt}")));
    }
    let f = KalmanState::transition(dt);
    ks.x = f * ks.x;
    ks.p = f * ks.p * f.transpose() + ks.process_noise(dt);

    if let Some(z) = measurement {
        let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let r = Mat2::identity() * ks.params.meas_std.powi(2);
        let s = h * ks.p * h.transpose() + r;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::Kalman("singular innovation covariance".into()))?;
        let k = ks.p * h.transpose() * s_inv;
        let innov = z - h * ks.x;
        ks.x += k * innov;
        // Joseph form keeps the update symmetric and PSD under rounding.
        let ikh = Matrix4::identity() - k * h;
        ks.p = ikh * ks.p * ikh.transpose() + k * r * k.transpose();
    }
    ks.p = (ks.p + ks.p.transpose()) * 0.5;
    check_psd(&ks.p)?;
    Ok(ks.position())
}
