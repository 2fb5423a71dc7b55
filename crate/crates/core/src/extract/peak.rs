use num_complex::Complex64;

use crate::beamspace::{BeamspaceGrid, PathAtom};
use crate::parallel;
use crate::synth::PathParams;

/// Maximum-magnitude grid entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: (usize, usize, usize),
    pub aoa: f64,
    pub aod: f64,
    pub delay: f64,
    pub value: Complex64,
}

impl Peak {
    pub fn to_path(&self) -> PathParams {
        PathParams::new(self.value, self.delay, self.aod, self.aoa)
    }
}

/// Largest `|value|`, ties resolved to the lexicographically smallest
/// `(aoa, aod, delay)` index. An all-zero grid yields a zero-valued peak at
/// the origin.
pub fn find_peak(grid: &BeamspaceGrid) -> Peak {
    residual_peak(grid, &[])
}

/// Peak of `grid − Σ atoms`, evaluated on the fly without writing the grid.
pub fn residual_peak(grid: &BeamspaceGrid, atoms: &[PathAtom]) -> Peak {
    let [m_rx, m_tx, n_delay] = grid.values.dims();
    let data = grid.values.as_slice();
    let rows: Vec<(f64, usize, Complex64)> = parallel::map_range(m_rx, |i| {
        let mut best = (-1.0, 0, Complex64::new(0.0, 0.0));
        let mut coef = Vec::with_capacity(atoms.len());
        for j in 0..m_tx {
            coef.clear();
            coef.extend(atoms.iter().map(|a| a.gain * a.aoa[i] * a.aod[j]));
            let base = (i * m_tx + j) * n_delay;
            for (k, v) in data[base..base + n_delay].iter().enumerate() {
                let mut r = *v;
                for (c, a) in coef.iter().zip(atoms) {
                    r -= c * a.delay[k];
                }
                let p = r.norm_sqr();
                if p > best.0 {
                    best = (p, base + k, r);
                }
            }
        }
        best
    });
    let (_, flat, value) =
        rows.into_iter().fold((-1.0, 0, Complex64::new(0.0, 0.0)), |acc, row| if row.0 > acc.0 { row } else { acc });
    let (i, j, k) = grid.values.unravel(flat);
    Peak { index: (i, j, k), aoa: grid.aoa_at(i), aod: grid.aod_at(j), delay: grid.delay_at(k), value }
}
