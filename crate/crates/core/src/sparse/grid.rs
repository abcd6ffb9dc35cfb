use serde::{Deserialize, Serialize};

use super::{SparseError, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// 5-point Poisson on the unit square.
    P2D,
    /// 7-point Poisson on the unit cube.
    P3D,
    /// 5-point upwind convection-diffusion.
    C2D,
    /// 7-point upwind convection-diffusion.
    C3D,
}

impl GridKind {
    pub fn dim(self) -> usize {
        match self {
            GridKind::P2D | GridKind::C2D => 2,
            GridKind::P3D | GridKind::C3D => 3,
        }
    }
}

impl std::str::FromStr for GridKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "p2d" => Ok(GridKind::P2D),
            "p3d" => Ok(GridKind::P3D),
            "c2d" => Ok(GridKind::C2D),
            "c3d" => Ok(GridKind::C3D),
            other => Err(format!("unknown grid problem {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridProblem {
    pub kind: GridKind,
    /// Interior points per side.
    pub k: usize,
    /// Viscosity of the convection-diffusion problems.
    pub nu: f64,
}

impl GridProblem {
    pub fn new(kind: GridKind, k: usize) -> Self {
        GridProblem { kind, k, nu: 1e-4 }
    }

    /// Grid extents, `[k, k, 1]` in 2D.
    pub fn dims(&self) -> [usize; 3] {
        match self.kind.dim() {
            2 => [self.k, self.k, 1],
            _ => [self.k, self.k, self.k],
        }
    }

    pub fn n(&self) -> usize {
        self.dims().iter().product()
    }

    /// Row index of grid point `(i, j, l)`; x varies fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        i + self.k * (j + self.k * l)
    }

    fn velocity(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        match self.kind {
            GridKind::P2D | GridKind::P3D => [0.0; 3],
            GridKind::C2D => [x * (1.0 - x) * (2.0 * y - 1.0), y * (1.0 - y) * (2.0 * x - 1.0), 0.0],
            GridKind::C3D => [
                2.0 * x * (1.0 - x) * (2.0 * y - 1.0) * z,
                -y * (1.0 - y) * (2.0 * x - 1.0),
                -(2.0 * x - 1.0) * (2.0 * y - 1.0) * z * (1.0 - z),
            ],
        }
    }
}

/// Finite-difference matrix with homogeneous Dirichlet boundary nodes
/// eliminated, scaled by `h^2`.
///
/// Poisson gives the familiar `2d` diagonal and `-1` couplings. The
/// convection-diffusion problems discretize `-nu Lap u + v . grad u` with
/// first-order upwinding, so along an axis with velocity `v` the upstream
/// neighbour receives `-nu - h |v|` and the diagonal `2 nu + h |v|`.
pub fn generate_grid_problem(p: &GridProblem) -> Result<SparseMatrix<f64>, SparseError> {
    if p.k < 2 {
        return Err(SparseError::InvalidGrid(format!("k must be at least 2, got {}", p.k)));
    }
    let convective = matches!(p.kind, GridKind::C2D | GridKind::C3D);
    if convective && !(p.nu > 0.0 && p.nu.is_finite()) {
        return Err(SparseError::InvalidGrid(format!("viscosity must be positive, got {}", p.nu)));
    }
    let nu = if convective { p.nu } else { 1.0 };
    let dim = p.kind.dim();
    let [kx, ky, kz] = p.dims();
    let h = 1.0 / (p.k as f64 + 1.0);
    let n = p.n();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(n * (2 * dim + 1));
    let mut values = Vec::with_capacity(n * (2 * dim + 1));
    row_ptr.push(0);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(7);
    for l in 0..kz {
        for j in 0..ky {
            for i in 0..kx {
                let pos = [i, j, l];
                let coord = [(i + 1) as f64 * h, (j + 1) as f64 * h, (l + 1) as f64 * h];
                let v = p.velocity(coord[0], coord[1], coord[2]);
                let row = p.index(i, j, l);
                entries.clear();
                let mut diag = 0.0;
                for (axis, &va) in v.iter().enumerate().take(dim) {
                    let va = va * h;
                    diag += 2.0 * nu + va.abs();
                    let back = -nu - va.max(0.0);
                    let fwd = -nu - (-va).max(0.0);
                    let stride = [1, p.k, p.k * p.k][axis];
                    if pos[axis] > 0 {
                        entries.push((row - stride, back));
                    }
                    if pos[axis] + 1 < p.k {
                        entries.push((row + stride, fwd));
                    }
                }
                entries.push((row, diag));
                entries.sort_by_key(|e| e.0);
                for &(c, val) in &entries {
                    col_idx.push(c);
                    values.push(val);
                }
                row_ptr.push(col_idx.len());
            }
        }
    }
    SparseMatrix::new(n, row_ptr, col_idx, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;

    #[test]
    fn p2d_k3() {
        let a = generate_grid_problem(&GridProblem::new(GridKind::P2D, 3)).unwrap();
        assert_eq!((a.n(), a.nnz()), (9, 33));
        for i in 0..9 {
            let (cols, vals) = a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                assert_eq!(v, if c == i { 4.0 } else { -1.0 });
            }
        }
        assert_eq!(a, a.adjoint());
    }

    #[test]
    fn p3d_k2() {
        let a = generate_grid_problem(&GridProblem::new(GridKind::P3D, 2)).unwrap();
        assert_eq!(a.n(), 8);
        // every corner of a 2x2x2 cube has three interior neighbours
        assert_eq!(a.nnz(), 8 * 4);
        for i in 0..8 {
            assert_eq!(a.get(i, i), 6.0);
        }
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(0, 2), -1.0);
        assert_eq!(a.get(0, 4), -1.0);
        assert_eq!(a, a.adjoint());
    }

    /// Independent dense assembly straight from the upwind formulas.
    fn c2d_oracle(k: usize, nu: f64) -> DenseMatrix<f64> {
        let n = k * k;
        let h = 1.0 / (k as f64 + 1.0);
        let mut d = DenseMatrix::zeros(n, n);
        for j in 0..k {
            for i in 0..k {
                let x = (i + 1) as f64 * h;
                let y = (j + 1) as f64 * h;
                let vx = x * (1.0 - x) * (2.0 * y - 1.0);
                let vy = y * (1.0 - y) * (2.0 * x - 1.0);
                let r = i + k * j;
                // -nu Lap u scaled by h^2
                d[(r, r)] += 4.0 * nu;
                let mut nb = |ii: isize, jj: isize, c: f64| {
                    if ii >= 0 && jj >= 0 && (ii as usize) < k && (jj as usize) < k {
                        d[(r, ii as usize + k * jj as usize)] += c;
                    }
                };
                nb(i as isize - 1, j as isize, -nu);
                nb(i as isize + 1, j as isize, -nu);
                nb(i as isize, j as isize - 1, -nu);
                nb(i as isize, j as isize + 1, -nu);
                // v . grad u scaled by h^2, backward difference when v > 0
                if vx > 0.0 {
                    nb(i as isize - 1, j as isize, -h * vx);
                } else {
                    nb(i as isize + 1, j as isize, h * vx);
                }
                if vy > 0.0 {
                    nb(i as isize, j as isize - 1, -h * vy);
                } else {
                    nb(i as isize, j as isize + 1, h * vy);
                }
                d[(r, r)] += h * (vx.abs() + vy.abs());
            }
        }
        d
    }

    #[test]
    fn c2d_matches_stencil_oracle() {
        let p = GridProblem::new(GridKind::C2D, 4);
        let a = generate_grid_problem(&p).unwrap();
        let oracle = c2d_oracle(4, 1e-4);
        assert!(a.to_dense().sub_matrix(&oracle).max_abs() < 1e-15);
        for i in 0..a.n() {
            let (cols, vals) = a.row(i);
            let off: f64 = cols.iter().zip(vals).filter(|(&c, _)| c != i).map(|(_, v)| v.abs()).sum();
            assert!(a.get(i, i) >= off - 1e-15);
        }
    }

    #[test]
    fn c3d_is_row_diagonally_dominant() {
        let a = generate_grid_problem(&GridProblem::new(GridKind::C3D, 5)).unwrap();
        assert_eq!(a.n(), 125);
        for i in 0..a.n() {
            let (cols, vals) = a.row(i);
            let off: f64 = cols.iter().zip(vals).filter(|(&c, _)| c != i).map(|(_, v)| v.abs()).sum();
            assert!(a.get(i, i) >= off - 1e-15);
        }
    }

    #[test]
    fn small_k_rejected() {
        assert!(matches!(
            generate_grid_problem(&GridProblem::new(GridKind::P2D, 1)),
            Err(SparseError::InvalidGrid(_))
        ));
    }
}
