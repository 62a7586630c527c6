//! Qubit state representations: Bloch vector and 2x2 density-matrix view.
//!
//! The Bloch vector is the authoritative state representation everywhere in
//! this crate; the density matrix exists as a bridge for the Kraus-operator
//! machinery and for projective-measurement bookkeeping.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// States may exceed the unit ball by at most this much before being rejected.
pub const EPS_BALL: f64 = 1e-9;
/// Purity defect tolerance for states that are supposed to be pure.
pub const EPS_PURITY: f64 = 1e-9;
/// Round-trip tolerance between the Bloch and density-matrix views.
pub const EPS_ROUND: f64 = 1e-12;

/// Measurement axis in the x-z plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Z,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Z => "z",
        }
    }
}

/// Qubit state as real Bloch coordinates (x, y, z).
///
/// Exact states satisfy x^2 + y^2 + z^2 <= 1; pure states sit on the unit
/// sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochState {
    /// Builds a state, rejecting non-finite coordinates and states outside
    /// the Bloch ball (beyond `EPS_BALL`).
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::NonFinite {
                context: "Bloch coordinates",
            });
        }
        let s = Self { x, y, z };
        if !s.in_ball() {
            return Err(Error::OutsideBall {
                norm_sq: s.norm_sq(),
            });
        }
        Ok(s)
    }

    pub const fn new_unchecked(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    /// x^2 + y^2 + z^2 <= 1 + EPS_BALL.
    pub fn in_ball(&self) -> bool {
        self.norm_sq() <= 1.0 + EPS_BALL
    }

    /// |x^2 + y^2 + z^2 - 1|, zero for pure states.
    pub fn purity_defect(&self) -> f64 {
        (self.norm_sq() - 1.0).abs()
    }

    pub fn is_pure(&self) -> bool {
        self.purity_defect() <= EPS_PURITY
    }

    /// Bloch component along a measurement axis.
    pub fn component(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Z => self.z,
        }
    }

    /// Spin component along the direction at angle `phi` in the x-z plane:
    /// l_phi = cos(phi) x + sin(phi) z.
    pub fn project_direction(&self, phi: f64) -> f64 {
        phi.cos() * self.x + phi.sin() * self.z
    }

    /// Euclidean distance to another Bloch vector.
    pub fn distance(&self, other: &BlochState) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Hermitian unit-trace 2x2 matrix in the sigma_z eigenbasis.
///
/// Entry order is row-major: [[rho_00, rho_01], [rho_10, rho_11]], with
/// index 0 the +1 eigenstate of sigma_z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    pub elems: [[Complex64; 2]; 2],
}

impl DensityMatrix {
    pub fn new(elems: [[Complex64; 2]; 2]) -> Self {
        Self { elems }
    }

    pub fn trace(&self) -> Complex64 {
        self.elems[0][0] + self.elems[1][1]
    }

    pub fn determinant(&self) -> Complex64 {
        self.elems[0][0] * self.elems[1][1] - self.elems[0][1] * self.elems[1][0]
    }

    /// Largest deviation from rho = rho^dagger.
    pub fn hermiticity_defect(&self) -> f64 {
        let d0 = self.elems[0][0].im.abs();
        let d1 = self.elems[1][1].im.abs();
        let off = (self.elems[0][1] - self.elems[1][0].conj()).norm();
        d0.max(d1).max(off)
    }

    /// Checks Hermiticity, unit trace and positive semidefiniteness within
    /// the module tolerances.
    pub fn validate(&self) -> Result<()> {
        let defect = self.hermiticity_defect();
        if defect > EPS_BALL {
            return Err(Error::NotHermitian { defect });
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > EPS_BALL || tr.im.abs() > EPS_BALL {
            return Err(Error::BadTrace { trace: tr.re });
        }
        let det = self.determinant().re;
        if det < -EPS_BALL {
            return Err(Error::OutsideBall {
                norm_sq: 1.0 - 4.0 * det,
            });
        }
        Ok(())
    }
}

/// rho = (I + x sigma_x + y sigma_y + z sigma_z) / 2.
pub fn bloch_to_density(s: &BlochState) -> Result<DensityMatrix> {
    if !(s.x.is_finite() && s.y.is_finite() && s.z.is_finite()) {
        return Err(Error::NonFinite {
            context: "Bloch coordinates",
        });
    }
    if !s.in_ball() {
        return Err(Error::OutsideBall {
            norm_sq: s.norm_sq(),
        });
    }
    Ok(DensityMatrix::new([
        [
            Complex64::new(0.5 * (1.0 + s.z), 0.0),
            Complex64::new(0.5 * s.x, -0.5 * s.y),
        ],
        [
            Complex64::new(0.5 * s.x, 0.5 * s.y),
            Complex64::new(0.5 * (1.0 - s.z), 0.0),
        ],
    ]))
}

/// Bloch components as traces against the Pauli operators:
/// x = Tr[rho sigma_x], y = Tr[rho sigma_y], z = Tr[rho sigma_z].
pub fn density_to_bloch(m: &DensityMatrix) -> Result<BlochState> {
    let defect = m.hermiticity_defect();
    if defect > EPS_BALL {
        return Err(Error::NotHermitian { defect });
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > EPS_BALL {
        return Err(Error::BadTrace { trace: tr.re });
    }
    let x = (m.elems[0][1] + m.elems[1][0]).re;
    let y = (m.elems[1][0] - m.elems[0][1]).im;
    let z = (m.elems[0][0] - m.elems[1][1]).re;
    BlochState::new(x, y, z)
}

/// x^2 + y^2 + z^2 <= 1, within EPS_BALL.
pub fn bloch_ball_check(s: &BlochState) -> bool {
    s.in_ball()
}
