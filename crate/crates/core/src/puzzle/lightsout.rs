//! n x n Lights Out mechanics. Pressing a light toggles itself and its
//! orthogonal neighbors; every move is its own inverse and moves commute.

use crate::error::{Error, Result};
use crate::puzzle::{Move, State};

pub(crate) struct LightsMech {
    n: usize,
    /// Cells toggled by each press.
    toggles: Vec<Vec<u16>>,
    labels: Vec<String>,
}

impl LightsMech {
    pub(crate) fn new(n: usize) -> Self {
        assert!((2..=8).contains(&n));
        let mut toggles = Vec::with_capacity(n * n);
        let mut labels = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                let mut cells = vec![(r * n + c) as u16];
                if r > 0 {
                    cells.push(((r - 1) * n + c) as u16);
                }
                if r + 1 < n {
                    cells.push(((r + 1) * n + c) as u16);
                }
                if c > 0 {
                    cells.push((r * n + c - 1) as u16);
                }
                if c + 1 < n {
                    cells.push((r * n + c + 1) as u16);
                }
                toggles.push(cells);
                labels.push(format!("{r},{c}"));
            }
        }
        LightsMech { n, toggles, labels }
    }

    pub(crate) fn goal(&self) -> State {
        State::from_cells(vec![0; self.n * self.n])
    }

    pub(crate) fn apply(&self, cells: &[u8], m: Move, out: &mut [u8]) {
        out.copy_from_slice(cells);
        for &i in &self.toggles[m.index()] {
            out[i as usize] ^= 1;
        }
    }

    pub(crate) fn label(&self, m: Move) -> &str {
        &self.labels[m.index()]
    }

    pub(crate) fn validate(&self, cells: &[u8]) -> Result<()> {
        if cells.iter().any(|&b| b > 1) {
            return Err(Error::Parse("lights must be 0 or 1".into()));
        }
        Ok(())
    }
}
