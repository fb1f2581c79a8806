//! Symmetric second-order tensors stored with their six independent
//! components.
//!
//! Plane-strain quantities are embedded in full 3D tensors (out-of-plane
//! shear strains and the `zz` strain are zero, the `zz` stress is not), so
//! the invariants below are always the 3D ones.
//!
//! Contraction convention: `double_contract(a, b) = Σᵢⱼ aᵢⱼ bᵢⱼ`, i.e. every
//! off-diagonal product is counted twice. All other modules go through these
//! functions instead of contracting components by hand.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Symmetric 3×3 tensor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub yz: f64,
    pub xz: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 {
        xx: 0.0,
        yy: 0.0,
        zz: 0.0,
        xy: 0.0,
        yz: 0.0,
        xz: 0.0,
    };

    pub const IDENTITY: SymTensor2 = SymTensor2 {
        xx: 1.0,
        yy: 1.0,
        zz: 1.0,
        xy: 0.0,
        yz: 0.0,
        xz: 0.0,
    };

    pub fn new(xx: f64, yy: f64, zz: f64, xy: f64, yz: f64, xz: f64) -> Self {
        SymTensor2 { xx, yy, zz, xy, yz, xz }
    }

    pub fn diag(xx: f64, yy: f64, zz: f64) -> Self {
        SymTensor2 { xx, yy, zz, ..Self::ZERO }
    }

    /// Plane-strain tensor from in-plane components; `zz`, `yz`, `xz` are zero.
    pub fn plane(xx: f64, yy: f64, xy: f64) -> Self {
        SymTensor2 { xx, yy, xy, ..Self::ZERO }
    }

    /// Symmetric part of a 2D displacement gradient `[[du_x/dx, du_x/dy], [du_y/dx, du_y/dy]]`.
    pub fn from_gradient_2d(grad: [[f64; 2]; 2]) -> Self {
        Self::plane(grad[0][0], grad[1][1], 0.5 * (grad[0][1] + grad[1][0]))
    }

    /// Component matrix, mainly for tests and diagnostics.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }

    pub fn max_abs(&self) -> f64 {
        [self.xx, self.yy, self.zz, self.xy, self.yz, self.xz]
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn trace(&self) -> f64 {
        trace(self)
    }

    pub fn deviator(&self) -> SymTensor2 {
        deviator(self)
    }

    pub fn j2(&self) -> f64 {
        j2(self)
    }
}

pub fn trace(t: &SymTensor2) -> f64 {
    t.xx + t.yy + t.zz
}

/// `t − ⅓ tr(t) I`
pub fn deviator(t: &SymTensor2) -> SymTensor2 {
    let p = trace(t) / 3.0;
    SymTensor2 {
        xx: t.xx - p,
        yy: t.yy - p,
        zz: t.zz - p,
        ..*t
    }
}

/// Second principal invariant of the deviator, `½ tr(t_D²)`. Never negative.
pub fn j2(t: &SymTensor2) -> f64 {
    // Differences of normal components avoid cancellation for nearly
    // hydrostatic states: ½ tr(t_D²) = ⅙ Σ (tᵢᵢ − tⱼⱼ)² + Σ off-diagonal².
    let a = t.xx - t.yy;
    let b = t.yy - t.zz;
    let c = t.zz - t.xx;
    (a * a + b * b + c * c) / 6.0 + t.xy * t.xy + t.yz * t.yz + t.xz * t.xz
}

pub fn double_contract(a: &SymTensor2, b: &SymTensor2) -> f64 {
    a.xx * b.xx + a.yy * b.yy + a.zz * b.zz + 2.0 * (a.xy * b.xy + a.yz * b.yz + a.xz * b.xz)
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2 {
            xx: self.xx + o.xx,
            yy: self.yy + o.yy,
            zz: self.zz + o.zz,
            xy: self.xy + o.xy,
            yz: self.yz + o.yz,
            xz: self.xz + o.xz,
        }
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, o: SymTensor2) {
        *self = *self + o;
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, o: SymTensor2) -> SymTensor2 {
        self + (-o)
    }
}

impl Neg for SymTensor2 {
    type Output = SymTensor2;
    fn neg(self) -> SymTensor2 {
        self * -1.0
    }
}

impl Mul<f64> for SymTensor2 {
    type Output = SymTensor2;
    fn mul(self, s: f64) -> SymTensor2 {
        SymTensor2 {
            xx: self.xx * s,
            yy: self.yy * s,
            zz: self.zz * s,
            xy: self.xy * s,
            yz: self.yz * s,
            xz: self.xz * s,
        }
    }
}

impl Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, t: SymTensor2) -> SymTensor2 {
        t * self
    }
}
