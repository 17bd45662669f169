use crate::error::{param_err, shape_err, Result};
use crate::numcore::{DenseMatrix, DenseVector, Rng};

/// The `k×d` slot matrix plus its write switch.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    slots: DenseMatrix,
    pub writes_enabled: bool,
}

impl MemoryState {
    pub fn from_matrix(slots: DenseMatrix) -> Self {
        Self {
            slots,
            writes_enabled: true,
        }
    }

    pub fn slots(&self) -> usize {
        self.slots.rows()
    }

    pub fn dim(&self) -> usize {
        self.slots.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.slots
    }

    pub fn matrix_mut(&mut self) -> &mut DenseMatrix {
        &mut self.slots
    }

    pub fn row(&self, j: usize) -> &[f64] {
        self.slots.row(j)
    }
}

/// Fresh memory with `N(0, 1)` entries, writes enabled.
pub fn memory_init(rng: &mut Rng, slots: usize, dim: usize) -> Result<MemoryState> {
    if slots == 0 || dim == 0 {
        return Err(param_err(format!(
            "memory needs slots >= 1 and dim >= 1, got {slots}x{dim}"
        )));
    }
    let data = (0..slots * dim).map(|_| rng.next_normal()).collect();
    Ok(MemoryState::from_matrix(DenseMatrix::new(slots, dim, data)?))
}

/// Erase-then-add update aggregated over a batch.
///
/// With `zbar = mean(z)` and `zhbar_j = mean(z_j · h)`, every row becomes
/// `M[j]·(1 - zbar_j) + zhbar_j`. A disabled memory is returned unchanged.
pub fn write_memory(mem: &MemoryState, batch_z: &[DenseVector], batch_h: &[DenseVector]) -> Result<MemoryState> {
    if batch_z.is_empty() {
        return Err(param_err("memory write needs a nonempty batch"));
    }
    if batch_z.len() != batch_h.len() {
        return Err(shape_err("write_memory", batch_z.len(), batch_h.len()));
    }
    if !mem.writes_enabled {
        return Ok(mem.clone());
    }
    let (k, d) = mem.slots.shape();
    for (z, h) in batch_z.iter().zip(batch_h) {
        if z.len() != k {
            return Err(shape_err("write_memory (key)", k, z.len()));
        }
        if h.len() != d {
            return Err(shape_err("write_memory (value)", d, h.len()));
        }
        let total: f64 = z.iter().sum();
        if z.iter().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(param_err(format!("write key must be a distribution, sums to {total}")));
        }
    }

    let n = batch_z.len() as f64;
    let mut next = mem.clone();
    for j in 0..k {
        let zbar = batch_z.iter().map(|z| z[j]).sum::<f64>() / n;
        let mut add = vec![0.0; d];
        for (z, h) in batch_z.iter().zip(batch_h) {
            let w = z[j];
            for (a, hv) in add.iter_mut().zip(h.iter()) {
                *a += w * hv;
            }
        }
        let keep = 1.0 - zbar;
        for (m, a) in next.slots.row_mut(j).iter_mut().zip(add) {
            *m = *m * keep + a / n;
        }
    }
    Ok(next)
}
