//! The single-qubit Clifford group: 24 elements with composition and
//! inverse tables and per-element ZXZXZ decompositions
//! `U = RZ(a) * RX(pi/2) * RZ(b) * RX(pi/2) * RZ(c)`.

use std::sync::OnceLock;

use num_complex::Complex64;

const PHASE_TOL: f64 = 1e-9;

/// Dense 2x2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        Mat2([
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        ])
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }

    pub fn adjoint(&self) -> Mat2 {
        let a = &self.0;
        Mat2([
            [a[0][0].conj(), a[1][0].conj()],
            [a[0][1].conj(), a[1][1].conj()],
        ])
    }

    /// Maximum absolute deviation from `other` after aligning global phase.
    pub fn phase_distance(&self, other: &Mat2) -> f64 {
        // Align using the entry of `other` with the largest magnitude.
        let mut best = (0usize, 0usize);
        let mut mag = -1.0;
        for i in 0..2 {
            for j in 0..2 {
                let m = other.0[i][j].norm();
                if m > mag {
                    mag = m;
                    best = (i, j);
                }
            }
        }
        let (i, j) = best;
        if self.0[i][j].norm() < 1e-12 {
            return 2.0;
        }
        let phase = other.0[i][j] / self.0[i][j];
        if (phase.norm() - 1.0).abs() > 1e-6 {
            return 2.0;
        }
        let mut dev = 0.0f64;
        for r in 0..2 {
            for c in 0..2 {
                dev = dev.max((self.0[r][c] * phase - other.0[r][c]).norm());
            }
        }
        dev
    }
}

/// `RZ(theta) = diag(e^{-i theta/2}, e^{i theta/2})`.
pub fn rz(theta: f64) -> Mat2 {
    let half = theta / 2.0;
    Mat2([
        [Complex64::from_polar(1.0, -half), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::from_polar(1.0, half)],
    ])
}

/// Rotation by `theta` about the unit axis `(nx, ny, nz)`.
pub fn rotation_axis(theta: f64, nx: f64, ny: f64, nz: f64) -> Mat2 {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    // cos(theta/2) I - i sin(theta/2) (nx X + ny Y + nz Z)
    Mat2([
        [
            Complex64::new(c, -s * nz),
            Complex64::new(-s * ny, -s * nx),
        ],
        [
            Complex64::new(s * ny, -s * nx),
            Complex64::new(c, s * nz),
        ],
    ])
}

pub fn rx(theta: f64) -> Mat2 {
    rotation_axis(theta, 1.0, 0.0, 0.0)
}

#[derive(Debug, Clone)]
pub struct CliffordElement {
    pub matrix: Mat2,
    /// Angles `(a, b, c)` with `U = RZ(a) RX(pi/2) RZ(b) RX(pi/2) RZ(c)`
    /// up to global phase.
    pub zxzxz: (f64, f64, f64),
    pub inverse: usize,
}

pub struct CliffordTable {
    elements: Vec<CliffordElement>,
    compose: Vec<[u8; 24]>,
}

impl CliffordTable {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn element(&self, index: usize) -> &CliffordElement {
        &self.elements[index]
    }

    /// Index of the product `U_i * U_j` (apply `j` first, then `i`).
    pub fn compose(&self, i: usize, j: usize) -> usize {
        self.compose[i][j] as usize
    }

    pub fn inverse(&self, i: usize) -> usize {
        self.elements[i].inverse
    }

    /// Net element of a sequence applied in time order.
    pub fn net_of_sequence(&self, sequence: &[u8]) -> usize {
        let mut net = 0usize;
        for &idx in sequence {
            net = self.compose(idx as usize, net);
        }
        net
    }
}

/// The 24-element single-qubit Clifford table, built once.
pub fn clifford_table() -> &'static CliffordTable {
    static TABLE: OnceLock<CliffordTable> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

fn build_table() -> CliffordTable {
    use std::f64::consts::FRAC_PI_2;

    // Generate the group from H and S by breadth-first closure.
    let h = {
        let s = 1.0 / 2.0f64.sqrt();
        Mat2([
            [Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)],
        ])
    };
    let s_gate = Mat2([
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)],
    ]);

    let mut matrices: Vec<Mat2> = vec![Mat2::identity()];
    let mut frontier = vec![Mat2::identity()];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for m in &frontier {
            for g in [&h, &s_gate] {
                let product = g.mul(m);
                if matrices.iter().all(|k| k.phase_distance(&product) > PHASE_TOL) {
                    matrices.push(product);
                    next.push(product);
                }
            }
        }
        frontier = next;
    }
    assert_eq!(matrices.len(), 24, "single-qubit Clifford group has 24 elements");

    // ZXZXZ angles: quarter-turn Z rotations suffice for every element.
    let quarter_turns = [0.0, FRAC_PI_2, 2.0 * FRAC_PI_2, 3.0 * FRAC_PI_2];
    let x90 = rx(FRAC_PI_2);
    let decompose = |target: &Mat2| -> (f64, f64, f64) {
        for &a in &quarter_turns {
            for &b in &quarter_turns {
                for &c in &quarter_turns {
                    let u = rz(a).mul(&x90).mul(&rz(b)).mul(&x90).mul(&rz(c));
                    if u.phase_distance(target) <= PHASE_TOL {
                        return (a, b, c);
                    }
                }
            }
        }
        panic!("no ZXZXZ decomposition found for a Clifford element");
    };

    let find = |m: &Mat2, matrices: &[Mat2]| -> usize {
        matrices
            .iter()
            .position(|k| k.phase_distance(m) <= PHASE_TOL)
            .expect("product stays inside the group")
    };

    let mut compose = Vec::with_capacity(24);
    for i in 0..24 {
        let mut row = [0u8; 24];
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = find(&matrices[i].mul(&matrices[j]), &matrices) as u8;
        }
        compose.push(row);
    }

    let elements = matrices
        .iter()
        .map(|m| {
            let inverse = find(&m.adjoint(), &matrices);
            CliffordElement {
                matrix: *m,
                zxzxz: decompose(m),
                inverse,
            }
        })
        .collect();

    CliffordTable { elements, compose }
}
