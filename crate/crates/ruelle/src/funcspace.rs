//! Cylinder functions and cylinder weights.
//!
//! A `GridFunction` of depth `k` is a real function on the sequence space
//! that depends only on the first `k` coordinates, tabulated on all length-`k`
//! node words in lexicographic order (first symbol most significant).
//! Depth-`k` functions are dense among Lipschitz functions with error
//! `O(2^-k * Lip)`, and every operation reports the depth it returns.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::words::{index_to_word, word_count};
use crate::{AprioriSpace, Error, Result};

/// A real function depending on the first `depth` coordinates.
#[derive(Debug, Clone)]
pub struct GridFunction {
    space: Arc<AprioriSpace>,
    depth: usize,
    values: Vec<f64>,
}

impl GridFunction {
    /// Tabulate `eval` on every word of length `depth`, in lexicographic
    /// order (first symbol most significant).
    pub fn from_evaluator<F>(space: &Arc<AprioriSpace>, depth: usize, mut eval: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> f64,
    {
        let n = space.len();
        let count = word_count(n, depth)?;
        let values = (0..count)
            .map(|i| eval(&index_to_word(i, n, depth)))
            .collect();
        Self::from_values(space, depth, values)
    }

    /// Wrap an existing value table (length must be `n^depth`).
    pub fn from_values(space: &Arc<AprioriSpace>, depth: usize, values: Vec<f64>) -> Result<Self> {
        let count = word_count(space.len(), depth)?;
        if values.len() != count {
            return Err(Error::DimensionMismatch(format!(
                "depth {depth} needs {count} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "grid function values must be finite".into(),
            ));
        }
        Ok(Self {
            space: Arc::clone(space),
            depth,
            values,
        })
    }

    /// The depth-0 constant function.
    pub fn constant(space: &Arc<AprioriSpace>, value: f64) -> Self {
        Self {
            space: Arc::clone(space),
            depth: 0,
            values: vec![value],
        }
    }

    pub fn space(&self) -> &Arc<AprioriSpace> {
        &self.space
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn same_space(&self, other: &Self) -> bool {
        self.space.same_space(&other.space)
    }

    /// View the function as one of larger depth; pointwise values are
    /// unchanged (the table is replicated over the new trailing coordinates).
    pub fn embed(&self, depth: usize) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::InvalidArgument(format!(
                "cannot embed depth {} into smaller depth {depth}",
                self.depth
            )));
        }
        if depth == self.depth {
            return Ok(self.clone());
        }
        let n = self.space.len();
        let count = word_count(n, depth)?;
        let block = word_count(n, depth - self.depth)?;
        let values = (0..count).map(|i| self.values[i / block]).collect();
        Self::from_values(&self.space, depth, values)
    }

    /// `g ∘ sigma^j`: the value at a word is the value of `g` on the word
    /// with its first `j` symbols dropped. Depth grows by `j`.
    pub fn compose_shift(&self, j: usize) -> Result<Self> {
        if j == 0 {
            return Ok(self.clone());
        }
        let n = self.space.len();
        let depth = self.depth + j;
        let count = word_count(n, depth)?;
        let tail = self.values.len();
        // Trailing `self.depth` symbols of word i are i mod n^depth.
        let values = (0..count).map(|i| self.values[i % tail]).collect();
        Self::from_values(&self.space, depth, values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Tabulated Lipschitz constant for the metric
    /// `d(x, y) = sum_n 2^-n d_M(x_n, y_n)`: the largest difference quotient
    /// over word pairs differing in a single coordinate.
    pub fn lipschitz_estimate(&self) -> f64 {
        let n = self.space.len();
        let mut lip: f64 = 0.0;
        for (i, &vi) in self.values.iter().enumerate() {
            let word = index_to_word(i, n, self.depth);
            // Position p is coordinate p+1, weighted 2^-(p+1).
            let mut stride = self.values.len();
            for (p, &sym) in word.iter().enumerate() {
                stride /= n;
                let scale = 2f64.powi(-(p as i32 + 1));
                let base = i - sym * stride;
                for alt in 0..n {
                    if alt == sym {
                        continue;
                    }
                    let dist = scale * self.space.metric(sym, alt);
                    lip = lip.max((vi - self.values[base + alt * stride]).abs() / dist);
                }
            }
        }
        lip
    }

    /// Pointwise combination after embedding both arguments to a common depth.
    pub fn zip_with<F>(&self, other: &Self, op: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64,
    {
        if !self.same_space(other) {
            return Err(Error::SpaceMismatch);
        }
        let depth = self.depth.max(other.depth);
        let a = self.embed(depth)?;
        let b = other.embed(depth)?;
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(&x, &y)| op(x, y))
            .collect();
        Self::from_values(&self.space, depth, values)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x - y)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x * y)
    }

    pub fn scale(&self, c: f64) -> Self {
        let values = self.values.iter().map(|v| c * v).collect();
        Self {
            space: Arc::clone(&self.space),
            depth: self.depth,
            values,
        }
    }

    pub fn add_scalar(&self, c: f64) -> Self {
        let values = self.values.iter().map(|v| c + v).collect();
        Self {
            space: Arc::clone(&self.space),
            depth: self.depth,
            values,
        }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, op: F) -> Result<Self> {
        let values = self.values.iter().map(|&v| op(v)).collect();
        Self::from_values(&self.space, self.depth, values)
    }

    /// CSV rows `s1,..,sk,value` in lexicographic word order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.space.len();
        let header: Vec<String> = (1..=self.depth)
            .map(|i| format!("s{i}"))
            .chain(std::iter::once("value".into()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let word = index_to_word(i, n, self.depth);
            let mut row: Vec<String> = word.iter().map(|s| s.to_string()).collect();
            row.push(format!("{v:.17e}"));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Parse the format written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: BufRead>(space: &Arc<AprioriSpace>, depth: usize, input: R) -> Result<Self> {
        let n = space.len();
        let count = word_count(n, depth)?;
        let mut values = vec![f64::NAN; count];
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != depth + 1 {
                return Err(Error::InvalidArgument(format!(
                    "line {}: expected {} fields, got {}",
                    lineno + 1,
                    depth + 1,
                    fields.len()
                )));
            }
            let mut index = 0usize;
            for f in &fields[..depth] {
                let sym: usize = f.parse().map_err(|_| {
                    Error::InvalidArgument(format!("line {}: bad symbol {f:?}", lineno + 1))
                })?;
                if sym >= n {
                    return Err(Error::InvalidArgument(format!(
                        "line {}: symbol {sym} out of range",
                        lineno + 1
                    )));
                }
                index = index * n + sym;
            }
            values[index] = fields[depth].parse().map_err(|_| {
                Error::InvalidArgument(format!("line {}: bad value", lineno + 1))
            })?;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("missing rows in csv".into()));
        }
        Self::from_values(space, depth, values)
    }
}

/// Nonnegative weights on depth-`k` cylinders summing to one: the marginal of
/// a shift-invariant probability on the first `k` coordinates.
#[derive(Debug, Clone)]
pub struct GibbsWeights {
    space: Arc<AprioriSpace>,
    depth: usize,
    weights: Vec<f64>,
}

const MASS_TOL: f64 = 1e-12;

impl GibbsWeights {
    pub fn from_weights(
        space: &Arc<AprioriSpace>,
        depth: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let count = word_count(space.len(), depth)?;
        if weights.len() != count {
            return Err(Error::DimensionMismatch(format!(
                "depth {depth} needs {count} weights, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidArgument(
                "cylinder weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidArgument(format!(
                "cylinder weights sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            space: Arc::clone(space),
            depth,
            weights,
        })
    }

    pub fn space(&self) -> &Arc<AprioriSpace> {
        &self.space
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight of the cylinder at a word index.
    pub fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    /// Marginal on the first `depth - 1` coordinates (sum over the last).
    pub fn marginalize_last(&self) -> Result<Self> {
        if self.depth == 0 {
            return Err(Error::InvalidArgument(
                "cannot marginalize a depth-0 weight".into(),
            ));
        }
        let n = self.space.len();
        let weights = self
            .weights
            .chunks(n)
            .map(|block| block.iter().sum())
            .collect();
        Ok(Self {
            space: Arc::clone(&self.space),
            depth: self.depth - 1,
            weights,
        })
    }

    /// Marginal on the last `depth - 1` coordinates (sum over the first).
    pub fn marginalize_first(&self) -> Result<Self> {
        if self.depth == 0 {
            return Err(Error::InvalidArgument(
                "cannot marginalize a depth-0 weight".into(),
            ));
        }
        let n = self.space.len();
        let tail = self.weights.len() / n;
        let mut weights = vec![0.0; tail];
        for (i, &w) in self.weights.iter().enumerate() {
            weights[i % tail] += w;
        }
        Ok(Self {
            space: Arc::clone(&self.space),
            depth: self.depth - 1,
            weights,
        })
    }

    /// Largest gap between the drop-first and drop-last marginals; zero for
    /// the restriction of a shift-invariant measure.
    pub fn shift_consistency_error(&self) -> f64 {
        if self.depth == 0 {
            return 0.0;
        }
        let a = self.marginalize_last().expect("depth > 0");
        let b = self.marginalize_first().expect("depth > 0");
        a.weights
            .iter()
            .zip(&b.weights)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// CSV rows `s1,..,sk,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.space.len();
        let header: Vec<String> = (1..=self.depth)
            .map(|i| format!("s{i}"))
            .chain(std::iter::once("weight".into()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (i, w) in self.weights.iter().enumerate() {
            let word = index_to_word(i, n, self.depth);
            let mut row: Vec<String> = word.iter().map(|s| s.to_string()).collect();
            row.push(format!("{w:.17e}"));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `∫ f g dmu` over depth-`mu.depth` words; shallower arguments are embedded
/// first. Errors if either argument is deeper than the weights (deepen the
/// measure instead, its marginals cannot be refined).
pub fn inner_product(f: &GridFunction, g: &GridFunction, mu: &GibbsWeights) -> Result<f64> {
    if !f.same_space(g) || !f.space().same_space(mu.space()) {
        return Err(Error::SpaceMismatch);
    }
    if f.depth() > mu.depth() || g.depth() > mu.depth() {
        return Err(Error::DimensionMismatch(format!(
            "inner product needs weights of depth >= {}, got {}",
            f.depth().max(g.depth()),
            mu.depth()
        )));
    }
    let fe = f.embed(mu.depth())?;
    let ge = g.embed(mu.depth())?;
    Ok(fe
        .values()
        .iter()
        .zip(ge.values())
        .zip(mu.weights())
        .map(|((&x, &y), &w)| w * x * y)
        .sum())
}

/// `∫ f dmu`, a convenience for `inner_product(f, 1, mu)`.
pub fn integrate(f: &GridFunction, mu: &GibbsWeights) -> Result<f64> {
    let one = GridFunction::constant(f.space(), 1.0);
    inner_product(f, &one, mu)
}
