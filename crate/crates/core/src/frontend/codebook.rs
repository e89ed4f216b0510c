use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::ula_steering;
use crate::error::{Error, Result};

/// Analog beam codebook `D` (`M x N`, unit-norm columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub matrix: DMatrix<Complex64>,
}

impl Codebook {
    /// DFT codebook on the sine grid `-1 + (2n + 1) / N`, `n = 0..N`.
    pub fn dft(antennas: usize, codewords: usize) -> Result<Self> {
        if codewords == 0 || codewords > antennas {
            return Err(Error::Config(format!(
                "codebook size must satisfy 1 <= N <= M, got N = {codewords}, M = {antennas}"
            )));
        }
        let mut matrix = DMatrix::zeros(antennas, codewords);
        for n in 0..codewords {
            let sine = -1.0 + (2 * n + 1) as f64 / codewords as f64;
            matrix.set_column(n, &ula_steering(antennas, sine)?);
        }
        Ok(Self { matrix })
    }

    pub fn antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    /// `D^H D`.
    pub fn gram(&self) -> DMatrix<Complex64> {
        self.matrix.adjoint() * &self.matrix
    }
}
