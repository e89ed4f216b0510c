use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dimensions of the stacked variable `x = [p; vec(C); vec(V); vec(W)]`.
///
/// All `vec` operations are column-major, so a block can be unpacked with
/// `unvec_{rows, cols}` exactly as it was packed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub users: usize,
    pub codewords: usize,
    pub chains: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    #[serde(rename = "p")]
    Power,
    #[serde(rename = "c")]
    Selection,
    #[serde(rename = "v")]
    Combiner,
    #[serde(rename = "w")]
    Beamformer,
}

impl Layout {
    pub fn new(users: usize, codewords: usize, chains: usize) -> Result<Self> {
        if users == 0 || chains == 0 || codewords == 0 {
            return Err(Error::Config("layout dimensions must be positive".into()));
        }
        Ok(Self {
            users,
            codewords,
            chains,
        })
    }

    /// `K + N S + S^2 + S K`.
    pub fn len(&self) -> usize {
        self.users + self.codewords * self.chains + self.chains * self.chains + self.chains * self.users
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self, block: Block) -> Range<usize> {
        let p = self.users;
        let c = p + self.codewords * self.chains;
        let v = c + self.chains * self.chains;
        let w = v + self.chains * self.users;
        match block {
            Block::Power => 0..p,
            Block::Selection => p..c,
            Block::Combiner => c..v,
            Block::Beamformer => v..w,
        }
    }

    pub fn block_of(&self, t: usize) -> Block {
        [Block::Power, Block::Selection, Block::Combiner, Block::Beamformer]
            .into_iter()
            .find(|&b| self.range(b).contains(&t))
            .expect("coordinate index out of layout")
    }

    /// Stacked index of `c_ij`.
    pub fn selection_index(&self, row: usize, col: usize) -> usize {
        self.users + col * self.codewords + row
    }
}

/// Selection matrix `C` (`N x S`), either relaxed into `[0, 1]` or binary.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMatrix {
    pub matrix: DMatrix<f64>,
    pub relaxed: bool,
}

impl SelectionMatrix {
    pub fn relaxed(matrix: DMatrix<f64>) -> Result<Self> {
        let sel = Self {
            matrix,
            relaxed: true,
        };
        sel.validate()?;
        Ok(sel)
    }

    pub fn binary(matrix: DMatrix<f64>) -> Result<Self> {
        let sel = Self {
            matrix,
            relaxed: false,
        };
        sel.validate()?;
        Ok(sel)
    }

    /// Binary selection from the chosen codeword of every RF chain.
    pub fn from_assignment(codewords: usize, rows: &[usize]) -> Result<Self> {
        let mut matrix = DMatrix::zeros(codewords, rows.len());
        for (j, &i) in rows.iter().enumerate() {
            if i >= codewords {
                return Err(Error::Config(format!("codeword {i} out of range {codewords}")));
            }
            matrix[(i, j)] = 1.0;
        }
        Self::binary(matrix)
    }

    pub fn validate(&self) -> Result<()> {
        if self.relaxed {
            if let Some(v) = self.matrix.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Domain(format!("relaxed selection entry {v} outside [0, 1]")));
            }
            return Ok(());
        }
        if let Some(v) = self.matrix.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::Domain(format!("binary selection entry {v} is not 0 or 1")));
        }
        for (j, col) in self.matrix.column_iter().enumerate() {
            if col.sum() != 1.0 {
                return Err(Error::Domain(format!("RF chain {j} selects {} codewords", col.sum())));
            }
        }
        for (i, row) in self.matrix.row_iter().enumerate() {
            if row.sum() > 1.0 {
                return Err(Error::Domain(format!("codeword {i} assigned to {} chains", row.sum())));
            }
        }
        Ok(())
    }

    /// Selected codeword per RF chain (binary matrices only).
    pub fn assignment(&self) -> Option<Vec<usize>> {
        if self.relaxed {
            return None;
        }
        self.matrix
            .column_iter()
            .map(|col| col.iter().position(|&v| v == 1.0))
            .collect()
    }
}

/// The design variables `(P, C, V, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoint {
    pub powers: Vec<f64>,
    /// `N x S`, relaxed during optimization and binary on output.
    pub selection: DMatrix<f64>,
    /// `V`, `S x S`.
    pub digital_combiner: DMatrix<Complex64>,
    /// `W = [w_1 .. w_K]`, `S x K`.
    pub beamformers: DMatrix<Complex64>,
}

impl DesignPoint {
    /// Default starting point: half power, uniform selection, identity
    /// combiner, identity-column beamformers.
    pub fn initial(layout: Layout, p_max: &[f64]) -> Result<Self> {
        if p_max.len() != layout.users {
            return Err(Error::dim("DesignPoint::initial", layout.users, p_max.len()));
        }
        if layout.users > layout.chains {
            return Err(Error::Config(format!(
                "identity beamformers need K <= S, got K = {}, S = {}",
                layout.users, layout.chains
            )));
        }
        Ok(Self {
            powers: p_max.iter().map(|p| p / 2.0).collect(),
            selection: DMatrix::from_element(layout.codewords, layout.chains, 1.0 / layout.codewords as f64),
            digital_combiner: DMatrix::identity(layout.chains, layout.chains),
            beamformers: DMatrix::identity(layout.chains, layout.users),
        })
    }

    pub fn layout(&self) -> Layout {
        Layout {
            users: self.powers.len(),
            codewords: self.selection.nrows(),
            chains: self.selection.ncols(),
        }
    }

    pub fn validate_shape(&self) -> Result<Layout> {
        let layout = self.layout();
        let (s, k) = (layout.chains, layout.users);
        if self.digital_combiner.shape() != (s, s) {
            return Err(Error::dim("digital combiner", format!("{s}x{s}"), format!("{:?}", self.digital_combiner.shape())));
        }
        if self.beamformers.shape() != (s, k) {
            return Err(Error::dim("beamformers", format!("{s}x{k}"), format!("{:?}", self.beamformers.shape())));
        }
        Ok(layout)
    }

    /// Checks `0 <= p <= p_max` and relaxed selection entries in `[0, 1]`.
    pub fn check_box(&self, p_max: &[f64]) -> Result<()> {
        for (k, (&p, &cap)) in self.powers.iter().zip(p_max).enumerate() {
            if !(p >= 0.0 && p <= cap) {
                return Err(Error::Domain(format!("power of user {k} = {p} outside [0, {cap}]")));
            }
        }
        if let Some(c) = self.selection.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::Domain(format!("selection entry {c} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn stack(&self) -> Vec<Complex64> {
        let mut x = Vec::with_capacity(self.layout().len());
        x.extend(self.powers.iter().map(|&p| Complex64::new(p, 0.0)));
        x.extend(self.selection.iter().map(|&c| Complex64::new(c, 0.0)));
        x.extend(self.digital_combiner.iter().copied());
        x.extend(self.beamformers.iter().copied());
        x
    }

    /// Inverse of [`DesignPoint::stack`]; imaginary parts of the real blocks
    /// are dropped.
    pub fn unstack(layout: Layout, x: &[Complex64]) -> Result<Self> {
        if x.len() != layout.len() {
            return Err(Error::dim("DesignPoint::unstack", layout.len(), x.len()));
        }
        let (n, s, k) = (layout.codewords, layout.chains, layout.users);
        let re = |r: Range<usize>| x[r].iter().map(|z| z.re).collect::<Vec<_>>();
        Ok(Self {
            powers: re(layout.range(Block::Power)),
            selection: DMatrix::from_vec(n, s, re(layout.range(Block::Selection))),
            digital_combiner: DMatrix::from_column_slice(s, s, &x[layout.range(Block::Combiner)]),
            beamformers: DMatrix::from_column_slice(s, k, &x[layout.range(Block::Beamformer)]),
        })
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// Per-user effective digital stage `V w_k`, as the columns of `V W`.
    pub fn combined_beamformers(&self) -> DMatrix<Complex64> {
        &self.digital_combiner * &self.beamformers
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&StackedJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let stacked: StackedJson = serde_json::from_str(text)?;
        stacked.into_design()
    }
}

/// Warm-start file layout; blocks appear in stacking order and complex
/// entries are `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct StackedJson {
    users: usize,
    codewords: usize,
    chains: usize,
    p: Vec<f64>,
    c: Vec<f64>,
    v: Vec<[f64; 2]>,
    w: Vec<[f64; 2]>,
}

impl From<&DesignPoint> for StackedJson {
    fn from(x: &DesignPoint) -> Self {
        let layout = x.layout();
        let pair = |z: &Complex64| [z.re, z.im];
        Self {
            users: layout.users,
            codewords: layout.codewords,
            chains: layout.chains,
            p: x.powers.clone(),
            c: x.selection.as_slice().to_vec(),
            v: x.digital_combiner.iter().map(pair).collect(),
            w: x.beamformers.iter().map(pair).collect(),
        }
    }
}

impl StackedJson {
    fn into_design(self) -> Result<DesignPoint> {
        let layout = Layout::new(self.users, self.codewords, self.chains)?;
        let mut x = Vec::with_capacity(layout.len());
        x.extend(self.p.iter().map(|&p| Complex64::new(p, 0.0)));
        x.extend(self.c.iter().map(|&c| Complex64::new(c, 0.0)));
        x.extend(self.v.iter().chain(&self.w).map(|z| Complex64::new(z[0], z[1])));
        DesignPoint::unstack(layout, &x)
    }
}

/// Zero stacked vector for a layout.
pub fn zero_stacked(layout: Layout) -> Vec<Complex64> {
    vec![ZERO; layout.len()]
}
