//! Uniform box grids, cell-centered fields and the flux-form operators with
//! zero-flux (homogeneous Neumann) boundary faces.
//!
//! Every operator is written as a sum over interior faces. Boundary faces
//! carry no flux, so cell sums of the Laplacian and of the chemotaxis
//! divergence telescope to zero.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform rectilinear grid with 1 to 3 axes. Fields are stored row-major,
/// i.e. the last axis varies fastest.
#[derive(Debug, Clone)]
pub struct Grid<T> {
    dims: Vec<usize>,
    spacing: Vec<T>,
    extent: Vec<T>,
    strides: Vec<usize>,
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }
}

/// Builds a grid with `dims[a]` cells of width `extent[a] / dims[a]` along axis `a`.
pub fn build_grid<T: Real>(dims: &[usize], extent: &[T]) -> Result<Arc<Grid<T>>> {
    Grid::new(dims, extent).map(Arc::new)
}

impl<T: Real> Grid<T> {
    pub fn new(dims: &[usize], extent: &[T]) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return Err(Error::InvalidDomain(format!(
                "expected 1 to 3 axes, got {}",
                dims.len()
            )));
        }
        if dims.len() != extent.len() {
            return Err(Error::InvalidDomain(format!(
                "{} cell counts but {} extents",
                dims.len(),
                extent.len()
            )));
        }
        if let Some(a) = dims.iter().position(|&n| n == 0) {
            return Err(Error::InvalidDomain(format!("axis {a} has zero cells")));
        }
        if let Some(a) = extent.iter().position(|&e| !(e > T::zero() && e.is_finite())) {
            return Err(Error::InvalidDomain(format!(
                "axis {a} has non-positive extent {}",
                extent[a]
            )));
        }
        let spacing = dims
            .iter()
            .zip(extent)
            .map(|(&n, &e)| e / T::from_usize(n).unwrap())
            .collect();
        let mut strides = vec![1; dims.len()];
        for a in (0..dims.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        Ok(Self {
            dims: dims.to_vec(),
            spacing,
            extent: extent.to_vec(),
            strides,
        })
    }

    /// Same as [`Grid::new`] but from the cell widths, so that a grid read back
    /// from a snapshot has bit-identical spacing.
    pub fn with_spacing(dims: &[usize], spacing: &[T]) -> Result<Self> {
        if dims.len() != spacing.len() {
            return Err(Error::InvalidDomain(format!(
                "{} cell counts but {} spacings",
                dims.len(),
                spacing.len()
            )));
        }
        let extent: Vec<T> = dims
            .iter()
            .zip(spacing)
            .map(|(&n, &h)| h * T::from_usize(n).unwrap())
            .collect();
        let mut g = Self::new(dims, &extent)?;
        g.spacing = spacing.to_vec();
        Ok(g)
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[T] {
        &self.spacing
    }

    pub fn extent(&self) -> &[T] {
        &self.extent
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> T {
        self.spacing.iter().fold(T::one(), |acc, &h| acc * h)
    }

    /// |Ω|
    pub fn volume(&self) -> T {
        self.extent.iter().fold(T::one(), |acc, &e| acc * e)
    }

    /// Multi-index of a linear cell index.
    pub fn index_of(&self, cell: usize) -> Vec<usize> {
        self.dims
            .iter()
            .zip(&self.strides)
            .map(|(&n, &s)| (cell / s) % n)
            .collect()
    }

    /// Physical coordinates of the center of `cell`.
    pub fn cell_center(&self, cell: usize) -> Vec<T> {
        self.index_of(cell)
            .into_iter()
            .zip(&self.spacing)
            .map(|(i, &h)| (T::from_usize(i).unwrap() + T::half()) * h)
            .collect()
    }

    /// Calls `f(axis, lo, hi)` for every interior face, `hi = lo + stride(axis)`.
    #[inline]
    pub(crate) fn for_each_face(&self, mut f: impl FnMut(usize, usize, usize)) {
        let len = self.len();
        for (axis, (&n, &stride)) in self.dims.iter().zip(&self.strides).enumerate() {
            if n < 2 {
                continue;
            }
            for lo in 0..len {
                if (lo / stride) % n + 1 < n {
                    f(axis, lo, lo + stride);
                }
            }
        }
    }

    /// 1/h² per axis.
    pub(crate) fn inv_h2(&self) -> Vec<T> {
        self.spacing.iter().map(|&h| T::one() / (h * h)).collect()
    }

    /// Sum of 1/h_a² over the interior faces of every cell: the diagonal of −Δ_h.
    pub(crate) fn laplacian_diagonal(&self) -> Vec<T> {
        let w = self.inv_h2();
        let mut diag = vec![T::zero(); self.len()];
        self.for_each_face(|a, lo, hi| {
            diag[lo] = diag[lo] + w[a];
            diag[hi] = diag[hi] + w[a];
        });
        diag
    }

    /// out = Δ_h w on raw slices.
    pub(crate) fn laplacian_into(&self, w: &[T], out: &mut [T]) {
        let inv_h2 = self.inv_h2();
        out.iter_mut().for_each(|o| *o = T::zero());
        self.for_each_face(|a, lo, hi| {
            let flux = (w[hi] - w[lo]) * inv_h2[a];
            out[lo] = out[lo] + flux;
            out[hi] = out[hi] - flux;
        });
    }
}

/// One real value per cell of a grid.
#[derive(Debug, Clone)]
pub struct Field<T> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(grid: &Arc<Grid<T>>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: &Arc<Grid<T>>, value: T) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![value; grid.len()],
        }
    }

    /// Wraps raw values; rejects a wrong length or non-finite entries.
    pub fn from_values(grid: &Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite value at cell {i}")));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: &Arc<Grid<T>>, mut f: impl FnMut(&[T]) -> T) -> Self {
        let values = (0..grid.len()).map(|c| f(&grid.cell_center(c))).collect();
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub(crate) fn from_parts(grid: &Arc<Grid<T>>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_parts(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        ensure_same_grid(self, other)?;
        Ok(Self::from_parts(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |a, &b| a.min(b))
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |a, &b| a.max(b))
    }

    /// Position and value of the smallest entry.
    pub fn argmin(&self) -> (usize, T) {
        self.values
            .iter()
            .enumerate()
            .fold((0, T::infinity()), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
    }

    /// Position and value of the largest entry.
    pub fn argmax(&self) -> (usize, T) {
        self.values
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
    }

    pub fn linf(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    /// Σ w_i · vol
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.cell_volume()
    }

    /// ‖w‖₂² = Σ w_i² · vol
    pub fn l2_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>() * self.grid.cell_volume()
    }

    /// Σ |w_i| · vol
    pub fn l1(&self) -> T {
        self.values.iter().map(|&v| v.abs()).sum::<T>() * self.grid.cell_volume()
    }

    /// ‖a − b‖₂²
    pub fn dist_l2_sq(&self, other: &Self) -> Result<T> {
        ensure_same_grid(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            * self.grid.cell_volume())
    }

    /// ‖a − b‖∞
    pub fn dist_linf(&self, other: &Self) -> Result<T> {
        ensure_same_grid(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }
}

pub(crate) fn ensure_same_grid<T: Real>(a: &Field<T>, b: &Field<T>) -> Result<()> {
    if Arc::ptr_eq(&a.grid, &b.grid) || *a.grid == *b.grid {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "fields live on grids {:?} and {:?}",
            a.grid.dims(),
            b.grid.dims()
        )))
    }
}

fn ensure_on<T: Real>(g: &Arc<Grid<T>>, w: &Field<T>) -> Result<()> {
    if Arc::ptr_eq(g, &w.grid) || **g == *w.grid {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "field on grid {:?} applied with grid {:?}",
            w.grid.dims(),
            g.dims()
        )))
    }
}

/// How the advected coefficient is sampled on a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaceFluxSpec {
    /// Arithmetic mean of the two adjacent cells.
    #[default]
    Central,
    /// Donor cell: the coefficient of the cell the transport velocity leaves.
    Upwind,
}

impl std::str::FromStr for FaceFluxSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "central" => Ok(Self::Central),
            "upwind" => Ok(Self::Upwind),
            other => Err(format!("unknown flux scheme `{other}` (central|upwind)")),
        }
    }
}

impl FaceFluxSpec {
    /// Face coefficient for a face whose driving gradient (lo → hi) is `drive`.
    /// Transport runs along +drive, so the upwind donor is `lo` when drive > 0.
    #[inline]
    pub(crate) fn sample<T: Real>(self, c_lo: T, c_hi: T, drive: T) -> T {
        match self {
            FaceFluxSpec::Central => T::half() * (c_lo + c_hi),
            FaceFluxSpec::Upwind => {
                if drive > T::zero() {
                    c_lo
                } else {
                    c_hi
                }
            }
        }
    }
}

/// Δ_h w with zero-flux boundaries.
pub fn laplacian_apply<T: Real>(g: &Arc<Grid<T>>, w: &Field<T>) -> Result<Field<T>> {
    ensure_on(g, w)?;
    let mut out = vec![T::zero(); g.len()];
    g.laplacian_into(&w.values, &mut out);
    Ok(Field::from_parts(g, out))
}

/// Cell-centered |∇w|²: per axis the mean of the squared gradients on the two
/// faces of the cell, a boundary face contributing zero.
pub fn grad_sq<T: Real>(g: &Arc<Grid<T>>, w: &Field<T>) -> Result<Field<T>> {
    ensure_on(g, w)?;
    let inv_h2 = g.inv_h2();
    let mut out = vec![T::zero(); g.len()];
    g.for_each_face(|a, lo, hi| {
        let d = w.values[hi] - w.values[lo];
        let contrib = T::half() * d * d * inv_h2[a];
        out[lo] = out[lo] + contrib;
        out[hi] = out[hi] + contrib;
    });
    Ok(Field::from_parts(g, out))
}

/// ‖∇_h w‖₂² summed over interior faces, Σ_faces ((w_hi − w_lo)/h)² · vol.
/// Equals the cell integral of [`grad_sq`].
pub fn grad_norm_sq<T: Real>(g: &Arc<Grid<T>>, w: &Field<T>) -> Result<T> {
    ensure_on(g, w)?;
    let inv_h2 = g.inv_h2();
    let mut acc = T::zero();
    g.for_each_face(|a, lo, hi| {
        let d = w.values[hi] - w.values[lo];
        acc = acc + d * d * inv_h2[a];
    });
    Ok(acc * g.cell_volume())
}

/// ∇·(coeff ∇(z²)) in flux form. The face flux is the sampled coefficient times
/// the face gradient of z².
pub fn div_chemotaxis_flux<T: Real>(
    g: &Arc<Grid<T>>,
    coeff: &Field<T>,
    z: &Field<T>,
    spec: FaceFluxSpec,
) -> Result<Field<T>> {
    ensure_on(g, coeff)?;
    ensure_on(g, z)?;
    if let Some(i) = coeff.values.iter().position(|&c| c < T::zero()) {
        return Err(Error::Contract(format!(
            "negative advected coefficient {} at cell {i}",
            coeff.values[i]
        )));
    }
    let zv = &z.values;
    let inv_h: Vec<T> = g.spacing().iter().map(|&h| T::one() / h).collect();
    Ok(Field::from_parts(
        g,
        div_face_flux(g, &coeff.values, spec, |a, lo, hi| {
            (zv[hi] * zv[hi] - zv[lo] * zv[lo]) * inv_h[a]
        }),
    ))
}

/// Divergence of the face flux `sample(coeff) · drive(face)`; `drive` is the
/// gradient across the face in the lo → hi direction.
pub(crate) fn div_face_flux<T: Real>(
    g: &Grid<T>,
    coeff: &[T],
    spec: FaceFluxSpec,
    drive: impl Fn(usize, usize, usize) -> T,
) -> Vec<T> {
    let inv_h: Vec<T> = g.spacing().iter().map(|&h| T::one() / h).collect();
    let mut out = vec![T::zero(); g.len()];
    g.for_each_face(|a, lo, hi| {
        let d = drive(a, lo, hi);
        let flux = spec.sample(coeff[lo], coeff[hi], d) * d * inv_h[a];
        out[lo] = out[lo] + flux;
        out[hi] = out[hi] - flux;
    });
    out
}
