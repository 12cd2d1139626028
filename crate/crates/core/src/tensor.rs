//! Sparse d-mode tensors in coordinate form, slice sums, target vectors and
//! log-domain scaling vectors.
//!
//! Indices are 0-based in memory. Entries are kept sorted lexicographically
//! by index tuple, every stored value is strictly positive, and a zero entry
//! is represented by its absence. All reductions walk the entries in that
//! sorted order so results are reproducible bit for bit.

use crate::error::{Error, Result, SliceId};

/// Largest exponent magnitude accepted by [`SparseTensor::apply_scaling`].
pub const DEFAULT_EXPONENT_CAP: f64 = 700.0;

/// Default relative tolerance for the equal-totals check on targets.
pub const DEFAULT_COMPAT_TOL: f64 = 1e-9;

/// Start of each mode's block inside a stacked vector of length `Σ dims`.
pub fn mode_offsets(dims: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(dims.len());
    let mut acc = 0;
    for &m in dims {
        offsets.push(acc);
        acc += m;
    }
    offsets
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    dims: Vec<usize>,
    /// Row-major `nnz × d` index table.
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseTensor {
    /// Builds a tensor from 0-based `(index tuple, value)` pairs in any order.
    ///
    /// Duplicate tuples, out-of-range indices and values that are not
    /// strictly positive and finite are rejected.
    pub fn from_entries(dims: Vec<usize>, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidTensor("tensor needs at least one mode".into()));
        }
        if let Some(pos) = dims.iter().position(|&m| m == 0) {
            return Err(Error::InvalidTensor(format!("dimension of mode {} is zero", pos + 1)));
        }
        let d = dims.len();
        let mut entries = entries;
        for (idx, value) in &entries {
            if idx.len() != d {
                return Err(Error::InvalidTensor(format!(
                    "index tuple {:?} has {} components, expected {}",
                    idx,
                    idx.len(),
                    d
                )));
            }
            if let Some(k) = (0..d).find(|&k| idx[k] >= dims[k]) {
                return Err(Error::InvalidTensor(format!(
                    "index {} out of range in mode {} (dimension {})",
                    idx[k] + 1,
                    k + 1,
                    dims[k]
                )));
            }
            if !value.is_finite() || *value <= 0.0 {
                return Err(Error::InvalidTensor(format!(
                    "entry {:?} has value {} (must be finite and > 0)",
                    one_based(idx),
                    value
                )));
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidTensor(format!(
                "duplicate index tuple {:?}",
                one_based(&w[0].0)
            )));
        }
        let mut indices = Vec::with_capacity(entries.len() * d);
        let mut values = Vec::with_capacity(entries.len());
        for (idx, value) in entries {
            indices.extend_from_slice(&idx);
            values.push(value);
        }
        Ok(Self { dims, indices, values })
    }

    /// Builds a tensor from a dense row-major array, dropping exact zeros.
    pub fn from_dense(dims: Vec<usize>, data: &[f64]) -> Result<Self> {
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "dense data has {} values, dims {:?} need {}",
                data.len(),
                dims,
                len
            )));
        }
        let mut entries = Vec::new();
        for (flat, &value) in data.iter().enumerate() {
            if value == 0.0 {
                continue;
            }
            entries.push((unravel(flat, &dims), value));
        }
        Self::from_entries(dims, entries)
    }

    /// Convenience constructor for matrices given as rows.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let m1 = rows.len();
        let m2 = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m2) {
            return Err(Error::DimensionMismatch("ragged matrix rows".into()));
        }
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_dense(vec![m1, m2], &data)
    }

    pub fn ones(dims: Vec<usize>) -> Result<Self> {
        let len: usize = dims.iter().product();
        Self::from_dense(dims, &vec![1.0; len])
    }

    pub fn num_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Ambient dimension `n = Σ m_k` of the scaling space.
    pub fn stacked_len(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index tuple of the `e`-th stored entry.
    pub fn index(&self, e: usize) -> &[usize] {
        let d = self.dims.len();
        &self.indices[e * d..(e + 1) * d]
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.indices
            .chunks_exact(self.dims.len())
            .zip(self.values.iter().copied())
    }

    /// Value at `idx`, zero when the tuple is not in the support.
    pub fn get(&self, idx: &[usize]) -> f64 {
        let d = self.dims.len();
        let (mut lo, mut hi) = (0, self.nnz());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.indices[mid * d..(mid + 1) * d].cmp(idx) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return self.values[mid],
            }
        }
        0.0
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Ambient positions `offset_k + i_k` of every entry, row-major `nnz × d`.
    pub fn stacked_positions(&self) -> Vec<usize> {
        let offsets = mode_offsets(&self.dims);
        self.entries()
            .flat_map(|(idx, _)| idx.iter().zip(&offsets).map(|(i, o)| i + o).collect::<Vec<_>>())
            .collect()
    }

    /// Same support, new values in entry order.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            dims: self.dims.clone(),
            indices: self.indices.clone(),
            values,
        }
    }

    /// The `(k, i_k)`-slice sums for mode `k`.
    pub fn slice_sums(&self, k: usize) -> Result<Vec<f64>> {
        if k >= self.num_modes() {
            return Err(Error::ModeOutOfRange {
                mode: k,
                num_modes: self.num_modes(),
            });
        }
        let mut sums = vec![0.0; self.dims[k]];
        for (idx, value) in self.entries() {
            sums[idx[k]] += value;
        }
        Ok(sums)
    }

    pub fn all_slice_sums(&self) -> Vec<Vec<f64>> {
        let mut sums: Vec<Vec<f64>> = self.dims.iter().map(|&m| vec![0.0; m]).collect();
        for (idx, value) in self.entries() {
            for (k, &i) in idx.iter().enumerate() {
                sums[k][i] += value;
            }
        }
        sums
    }

    /// Every `(k, i_k)` whose slice holds no entry, in mode then index order.
    pub fn zero_slices(&self) -> Vec<SliceId> {
        let mut hit: Vec<Vec<bool>> = self.dims.iter().map(|&m| vec![false; m]).collect();
        for (idx, _) in self.entries() {
            for (k, &i) in idx.iter().enumerate() {
                hit[k][i] = true;
            }
        }
        hit.iter()
            .enumerate()
            .flat_map(|(k, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &h)| !h)
                    .map(move |(i, _)| (k, i))
            })
            .collect()
    }

    pub fn validate_no_zero_slice(&self) -> Result<()> {
        let zero = self.zero_slices();
        if zero.is_empty() {
            Ok(())
        } else {
            Err(Error::ZeroSlices(zero))
        }
    }

    /// True iff both tensors have exactly the same support.
    pub fn same_zero_pattern(&self, other: &SparseTensor) -> Result<bool> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(self.indices == other.indices)
    }

    /// Exponent sums `x_{1,i_1} + … + x_{d,i_d}` over the support, in entry order.
    pub fn exponent_sums(&self, x: &ScalingVectors) -> Result<Vec<f64>> {
        self.check_scaling_dims(x)?;
        let offsets = mode_offsets(&self.dims);
        let y = x.as_slice();
        Ok(self
            .entries()
            .map(|(idx, _)| idx.iter().zip(&offsets).map(|(i, o)| y[i + o]).sum())
            .collect())
    }

    /// Positive diagonal scaling `b · exp(x_{1,i_1} + … + x_{d,i_d})` with the
    /// default exponent cap.
    pub fn apply_scaling(&self, x: &ScalingVectors) -> Result<SparseTensor> {
        self.apply_scaling_with_cap(x, DEFAULT_EXPONENT_CAP)
    }

    pub fn apply_scaling_with_cap(&self, x: &ScalingVectors, cap: f64) -> Result<SparseTensor> {
        let sums = self.exponent_sums(x)?;
        let mut values = Vec::with_capacity(sums.len());
        for (&b, &t) in self.values.iter().zip(&sums) {
            if t.is_nan() {
                return Err(Error::NonFinite("NaN in scaling vector".into()));
            }
            if t.abs() > cap {
                return Err(Error::ExponentOverflow { value: t, cap });
            }
            values.push(b * t.exp());
        }
        Ok(self.with_values(values))
    }

    /// Reorders modes so that new mode `j` is old mode `perm[j]`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<SparseTensor> {
        check_permutation(perm, self.num_modes())?;
        let dims = perm.iter().map(|&k| self.dims[k]).collect();
        let entries = self
            .entries()
            .map(|(idx, v)| (perm.iter().map(|&k| idx[k]).collect(), v))
            .collect();
        SparseTensor::from_entries(dims, entries)
    }

    fn check_scaling_dims(&self, x: &ScalingVectors) -> Result<()> {
        if x.dims() != self.dims.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "scaling dims {:?} vs tensor dims {:?}",
                x.dims(),
                self.dims
            )));
        }
        Ok(())
    }
}

fn one_based(idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|i| i + 1).collect()
}

fn unravel(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        idx[k] = flat % dims[k];
        flat /= dims[k];
    }
    idx
}

fn check_permutation(perm: &[usize], d: usize) -> Result<()> {
    let mut seen = vec![false; d];
    if perm.len() != d {
        return Err(Error::DimensionMismatch(format!("permutation of length {} for {} modes", perm.len(), d)));
    }
    for &k in perm {
        if k >= d || seen[k] {
            return Err(Error::InvalidTensor(format!("{:?} is not a permutation", perm)));
        }
        seen[k] = true;
    }
    Ok(())
}

/// Prescribed slice sums `s_1, …, s_d`, all components strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSums {
    sums: Vec<Vec<f64>>,
}

impl TargetSums {
    pub fn new(sums: Vec<Vec<f64>>) -> Result<Self> {
        if sums.is_empty() {
            return Err(Error::InvalidTensor("targets need at least one mode".into()));
        }
        for (k, s) in sums.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::InvalidTensor(format!("target mode {} is empty", k + 1)));
            }
            for (i, &v) in s.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::NonPositiveTarget { slice: (k, i), value: v });
                }
            }
        }
        Ok(Self { sums })
    }

    /// Targets read back from a tensor's own slice sums.
    pub fn from_tensor(t: &SparseTensor) -> Result<Self> {
        Self::new(t.all_slice_sums())
    }

    pub fn num_modes(&self) -> usize {
        self.sums.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.sums.iter().map(Vec::len).collect()
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        &self.sums[k]
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.sums
    }

    pub fn totals(&self) -> Vec<f64> {
        self.sums.iter().map(|s| s.iter().sum()).collect()
    }

    /// Mean of the mode totals.
    pub fn common_total(&self) -> f64 {
        let totals = self.totals();
        totals.iter().sum::<f64>() / totals.len() as f64
    }

    /// All targets concatenated mode by mode.
    pub fn stacked(&self) -> Vec<f64> {
        self.sums.iter().flatten().copied().collect()
    }

    /// Equal-totals check: `max − min ≤ rel_tol · max` over the mode totals.
    pub fn check_compatibility(&self, rel_tol: f64) -> Result<()> {
        let totals = self.totals();
        let max = totals.iter().copied().fold(f64::MIN, f64::max);
        let min = totals.iter().copied().fold(f64::MAX, f64::min);
        if max - min <= rel_tol * max {
            Ok(())
        } else {
            Err(Error::IncompatibleTargets { min, max })
        }
    }

    /// Each mode rescaled so that its total is exactly `total`.
    pub fn normalized_to(&self, total: f64) -> TargetSums {
        let sums = self
            .sums
            .iter()
            .map(|s| {
                let t: f64 = s.iter().sum();
                s.iter().map(|v| v * total / t).collect()
            })
            .collect();
        TargetSums { sums }
    }

    pub fn scaled(&self, factor: f64) -> Result<TargetSums> {
        TargetSums::new(
            self.sums
                .iter()
                .map(|s| s.iter().map(|v| v * factor).collect())
                .collect(),
        )
    }

    pub fn permute_modes(&self, perm: &[usize]) -> Result<TargetSums> {
        check_permutation(perm, self.num_modes())?;
        TargetSums::new(perm.iter().map(|&k| self.sums[k].clone()).collect())
    }

    pub fn check_dims(&self, t: &SparseTensor) -> Result<()> {
        if self.dims() != t.dims() {
            return Err(Error::DimensionMismatch(format!(
                "target dims {:?} vs tensor dims {:?}",
                self.dims(),
                t.dims()
            )));
        }
        Ok(())
    }
}

/// Log-domain scaling exponents `x_1, …, x_d`, stored stacked as one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingVectors {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl ScalingVectors {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().sum();
        if data.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "stacked scaling vector has length {}, dims {:?} need {}",
                data.len(),
                dims,
                n
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let n = dims.iter().sum();
        Self {
            dims: dims.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn from_modes(modes: Vec<Vec<f64>>) -> Self {
        let dims = modes.iter().map(Vec::len).collect();
        let data = modes.into_iter().flatten().collect();
        Self { dims, data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        let off = mode_offsets(&self.dims)[k];
        &self.data[off..off + self.dims[k]]
    }

    pub fn mode_mut(&mut self, k: usize) -> &mut [f64] {
        let off = mode_offsets(&self.dims)[k];
        &mut self.data[off..off + self.dims[k]]
    }

    pub fn modes(&self) -> Vec<Vec<f64>> {
        (0..self.dims.len()).map(|k| self.mode(k).to_vec()).collect()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, other: &ScalingVectors) -> Result<ScalingVectors> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self {
            dims: self.dims.clone(),
            data,
        })
    }
}

/// Largest relative slice-sum mismatch `|sum − s| / s` over every `(k, i_k)`.
pub fn residual(a: &SparseTensor, s: &TargetSums) -> Result<f64> {
    s.check_dims(a)?;
    Ok(residual_of_sums(&a.all_slice_sums(), s))
}

pub(crate) fn residual_of_sums(sums: &[Vec<f64>], s: &TargetSums) -> f64 {
    sums.iter()
        .zip(s.modes())
        .flat_map(|(got, want)| got.iter().zip(want).map(|(g, w)| (g - w).abs() / w))
        .fold(0.0, f64::max)
}
