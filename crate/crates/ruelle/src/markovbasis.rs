//! Two-symbol Markov measures and the explicit orthonormal structure of the
//! kernel of their transfer operator.
//!
//! A positive row-stochastic matrix `P` with stationary row `pi` defines the
//! Markov measure `mu[w] = pi_{w1} P_{w1 w2} ... P_{w_{n-1} w_n}` and the
//! normalized kernel `J_{ij} = pi_i P_{ij} / pi_j`, whose columns sum to one.
//! Under counting weights on `{0,1}` the potential `log J` is literally
//! normalized, and:
//!
//! * the two-level Haar family `e_w` is orthonormal in `L^2(mu)`;
//! * the differences `a_w` of sibling Haar functions are annihilated by the
//!   transfer operator (`L e_alpha = sqrt(J_{alpha1 alpha2}) e_{sigma alpha}`
//!   makes this a two-line computation), and after normalization give an
//!   orthonormal family in the kernel;
//! * the kernel of the operator restricted to depth-2 tables is
//!   two-dimensional and supplies the two completion elements that the
//!   word-indexed family misses.
//!
//! The cylinder measure here is exact rational arithmetic up to square
//! roots, which makes this module the reference oracle for the spectral
//! routes elsewhere in the crate.

use std::fmt;
use std::sync::Arc;

use crate::funcspace::inner_product;
use crate::transfer::{kernel_project, normalization_error, TransferMatrix, NORMALIZED_TOL};
use crate::words::index_to_word;
use crate::{AprioriSpace, Error, GibbsWeights, GridFunction, Result};

/// Words up to this length index kernel basis elements (depth cap 7).
pub const MAX_BASIS_WORD_LEN: usize = 5;

const STOCHASTIC_TOL: f64 = 1e-14;

/// A finite word over `{0,1}`; the empty word is allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(symbols: &[u8]) -> Result<Self> {
        if symbols.iter().any(|&s| s > 1) {
            return Err(Error::InvalidArgument("word symbols must be 0 or 1".into()));
        }
        Ok(Self(symbols.to_vec()))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    /// The word with `symbol` prepended.
    pub fn prepend(&self, symbol: u8) -> Self {
        let mut v = Vec::with_capacity(self.len() + 1);
        v.push(symbol);
        v.extend_from_slice(&self.0);
        Self(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "(empty)");
        }
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// All nonempty words of length `1..=max_len`, shortest first, lexicographic
/// within a length.
pub fn words_up_to(max_len: usize) -> Vec<Word> {
    let mut out = Vec::new();
    for len in 1..=max_len {
        for idx in 0..(1usize << len) {
            let symbols: Vec<u8> = (0..len)
                .map(|p| ((idx >> (len - 1 - p)) & 1) as u8)
                .collect();
            out.push(Word(symbols));
        }
    }
    out
}

/// A two-state Markov chain with its stationary row and normalized kernel.
#[derive(Debug, Clone)]
pub struct MarkovSpec {
    p: [[f64; 2]; 2],
    pi: [f64; 2],
    j: [[f64; 2]; 2],
    space: Arc<AprioriSpace>,
}

impl MarkovSpec {
    pub fn new(p: [[f64; 2]; 2]) -> Result<Self> {
        for row in &p {
            if row.iter().any(|&x| !x.is_finite() || x <= 0.0) {
                return Err(Error::InvalidArgument(
                    "transition matrix entries must be positive".into(),
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidArgument(format!(
                    "transition row sums to {sum}, expected 1"
                )));
            }
        }
        // pi = (q, p) / (p + q) for off-diagonals p = P01, q = P10.
        let (tp, tq) = (p[0][1], p[1][0]);
        let pi = [tq / (tp + tq), tp / (tp + tq)];
        let mut j = [[0.0; 2]; 2];
        for i in 0..2 {
            for l in 0..2 {
                j[i][l] = pi[i] * p[i][l] / pi[l];
            }
        }
        for col in [j[0][0] + j[1][0], j[0][1] + j[1][1]] {
            debug_assert!((col - 1.0).abs() < 1e-12, "column sum {col}");
        }
        let space = AprioriSpace::finite_alphabet(2, Some(&[1.0, 1.0]))?;
        Ok(Self { p, pi, j, space })
    }

    pub fn transition(&self) -> &[[f64; 2]; 2] {
        &self.p
    }

    pub fn stationary(&self) -> &[f64; 2] {
        &self.pi
    }

    pub fn kernel(&self) -> &[[f64; 2]; 2] {
        &self.j
    }

    /// The counting-mode symbol space `{0,1}` the chain lives on.
    pub fn space(&self) -> &Arc<AprioriSpace> {
        &self.space
    }

    /// The normalized potential `log J` as a depth-2 function.
    pub fn log_j_potential(&self) -> GridFunction {
        let j = self.j;
        GridFunction::from_evaluator(&self.space, 2, |w| j[w[0]][w[1]].ln())
            .expect("depth 2 on two symbols")
    }

    /// Exact Markov measure of a cylinder; the empty word has full mass.
    pub fn cylinder_measure(&self, word: &Word) -> f64 {
        let s = word.symbols();
        if s.is_empty() {
            return 1.0;
        }
        let mut m = self.pi[s[0] as usize];
        for pair in s.windows(2) {
            m *= self.p[pair[0] as usize][pair[1] as usize];
        }
        m
    }

    /// Exact depth-`depth` cylinder weights of the Markov measure.
    pub fn gibbs_weights(&self, depth: usize) -> Result<GibbsWeights> {
        if depth == 0 {
            return GibbsWeights::from_weights(&self.space, 0, vec![1.0]);
        }
        let count = 1usize << depth;
        let weights = (0..count)
            .map(|i| {
                let w: Vec<u8> = index_to_word(i, 2, depth).iter().map(|&s| s as u8).collect();
                self.cylinder_measure(&Word(w))
            })
            .collect();
        GibbsWeights::from_weights(&self.space, depth, weights)
    }
}

/// Two-level Haar function `e_w`, supported on `[w0] ∪ [w1]`, unit norm in
/// `L^2(mu)` and mean zero.
///
/// For the empty word this is `sqrt(pi_1/pi_0) 1_[0] - sqrt(pi_0/pi_1) 1_[1]`
/// (the unit-norm two-point difference; the same sibling-contrast pattern as
/// the word-indexed family with the stationary row in place of a transition
/// row).
pub fn haar_e(spec: &MarkovSpec, word: &Word) -> Result<GridFunction> {
    if word.len() + 1 > MAX_BASIS_WORD_LEN + 2 {
        return Err(Error::DepthOverflow {
            requested: word.len() + 1,
            values: 1u128 << (word.len() + 1),
            max: 1 << (MAX_BASIS_WORD_LEN + 2),
        });
    }
    if word.is_empty() {
        let pi = spec.pi;
        let values = vec![(pi[1] / pi[0]).sqrt(), -(pi[0] / pi[1]).sqrt()];
        return GridFunction::from_values(&spec.space, 1, values);
    }
    let s = word.symbols();
    let last = s[s.len() - 1] as usize;
    let mass = spec.cylinder_measure(word);
    let plus = (spec.p[last][1] / spec.p[last][0]).sqrt() / mass.sqrt();
    let minus = (spec.p[last][0] / spec.p[last][1]).sqrt() / mass.sqrt();
    let depth = word.len() + 1;
    GridFunction::from_evaluator(&spec.space, depth, |u| {
        if u[..depth - 1].iter().zip(s).any(|(&a, &b)| a != b as usize) {
            0.0
        } else if u[depth - 1] == 0 {
            plus
        } else {
            -minus
        }
    })
}

/// Normalized kernel element `a_w / ||a_w||` built from the sibling pair
/// `e_{0w}, e_{1w}`; annihilated by the transfer operator of `log J`.
pub fn kernel_a(spec: &MarkovSpec, word: &Word) -> Result<GridFunction> {
    if word.is_empty() {
        return Err(Error::InvalidArgument(
            "kernel elements are indexed by nonempty words".into(),
        ));
    }
    if word.len() > MAX_BASIS_WORD_LEN {
        return Err(Error::DepthOverflow {
            requested: word.len() + 2,
            values: 1u128 << (word.len() + 2),
            max: 1 << (MAX_BASIS_WORD_LEN + 2),
        });
    }
    let first = word.symbols()[0] as usize;
    let pi = spec.pi;
    let c0 = pi[first].sqrt() / (pi[0].sqrt() * spec.p[0][first].sqrt());
    let c1 = pi[first].sqrt() / (pi[1].sqrt() * spec.p[1][first].sqrt());
    let e0 = haar_e(spec, &word.prepend(0))?;
    let e1 = haar_e(spec, &word.prepend(1))?;
    let a = e0.scale(c0).sub(&e1.scale(c1))?;
    // The sibling Haar functions are orthonormal, so ||a||^2 = c0^2 + c1^2.
    let norm = (c0 * c0 + c1 * c1).sqrt();
    Ok(a.scale(1.0 / norm))
}

/// Orthonormal basis of the kernel of the transfer operator restricted to
/// depth-2 tables: the two elements that complete the word-indexed family.
///
/// The span is canonical; the representatives are fixed by Gram-Schmidt in
/// `L^2(mu)` with largest-norm-first pivoting and the sign convention that
/// the first nonzero coordinate is positive.
pub fn complete_depth2_kernel(spec: &MarkovSpec) -> Result<[GridFunction; 2]> {
    let f = spec.log_j_potential();
    let matrix = TransferMatrix::new(&f, 2)?;
    let dense = matrix.dense();
    let null = nullspace(&dense, 4);
    if null.len() != 2 {
        return Err(Error::DegenerateKernel);
    }
    let mu = spec.gibbs_weights(2)?;
    let to_gf = |v: &[f64]| GridFunction::from_values(&spec.space, 2, v.to_vec());
    let mut basis: Vec<GridFunction> = null.iter().map(|v| to_gf(v)).collect::<Result<_>>()?;

    let norm =
        |g: &GridFunction| -> Result<f64> { Ok(inner_product(g, g, &mu)?.sqrt()) };
    if norm(&basis[0])? < norm(&basis[1])? {
        basis.swap(0, 1);
    }
    let n0 = norm(&basis[0])?;
    if n0 < 1e-12 {
        return Err(Error::DegenerateKernel);
    }
    let u0 = basis[0].scale(1.0 / n0);
    let overlap = inner_product(&basis[1], &u0, &mu)?;
    let ortho = basis[1].sub(&u0.scale(overlap))?;
    let n1 = norm(&ortho)?;
    if n1 < 1e-12 {
        return Err(Error::DegenerateKernel);
    }
    let u1 = ortho.scale(1.0 / n1);

    let fix_sign = |g: GridFunction| -> GridFunction {
        match g.values().iter().find(|v| v.abs() > 1e-10) {
            Some(&v) if v < 0.0 => g.scale(-1.0),
            _ => g,
        }
    };
    Ok([fix_sign(u0), fix_sign(u1)])
}

/// Nullspace of a row-major `dim x dim` matrix by reduced row echelon form
/// with partial pivoting; deterministic for a fixed input.
fn nullspace(mat: &[f64], dim: usize) -> Vec<Vec<f64>> {
    let mut a = mat.to_vec();
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let mut pivot_of_row: Vec<usize> = Vec::new();
    let mut row = 0usize;
    for col in 0..dim {
        // Largest remaining pivot in this column.
        let (best, best_val) = (row..dim)
            .map(|r| (r, a[r * dim + col].abs()))
            .fold((row, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_val <= tol {
            continue;
        }
        a.swap_within(best, row, dim);
        let p = a[row * dim + col];
        for c in 0..dim {
            a[row * dim + c] /= p;
        }
        for r in 0..dim {
            if r != row {
                let factor = a[r * dim + col];
                if factor != 0.0 {
                    for c in 0..dim {
                        a[r * dim + c] -= factor * a[row * dim + c];
                    }
                }
            }
        }
        pivot_of_row.push(col);
        row += 1;
        if row == dim {
            break;
        }
    }
    let pivots: Vec<usize> = pivot_of_row.clone();
    let free: Vec<usize> = (0..dim).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = vec![0.0; dim];
            v[fc] = 1.0;
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[r * dim + fc];
            }
            v
        })
        .collect()
}

trait SwapRows {
    fn swap_within(&mut self, r1: usize, r2: usize, dim: usize);
}

impl SwapRows for Vec<f64> {
    fn swap_within(&mut self, r1: usize, r2: usize, dim: usize) {
        if r1 == r2 {
            return;
        }
        for c in 0..dim {
            self.swap(r1 * dim + c, r2 * dim + c);
        }
    }
}

/// Coefficients of a function against the kernel family: one per listed word
/// plus the two depth-2 completion elements.
#[derive(Debug, Clone)]
pub struct ExpansionCoefficients {
    pub by_word: Vec<(Word, f64)>,
    pub completion: [f64; 2],
}

impl ExpansionCoefficients {
    /// Assemble the represented combination back into a function.
    pub fn reconstruct(&self, spec: &MarkovSpec) -> Result<GridFunction> {
        let pair = complete_depth2_kernel(spec)?;
        let mut acc = pair[0]
            .scale(self.completion[0])
            .add(&pair[1].scale(self.completion[1]))?;
        for (word, coeff) in &self.by_word {
            if *coeff != 0.0 {
                acc = acc.add(&kernel_a(spec, word)?.scale(*coeff))?;
            }
        }
        Ok(acc)
    }
}

/// Inner products of `phi` against the kernel family (the listed words plus
/// the completion pair). Reconstruction is exact when `phi` lies in the
/// kernel and the word list covers its depth; for arbitrary `phi` this is
/// the orthogonal projection.
pub fn expansion_coefficients(
    spec: &MarkovSpec,
    phi: &GridFunction,
    word_list: &[Word],
) -> Result<ExpansionCoefficients> {
    let mut depth = phi.depth().max(2);
    for w in word_list {
        depth = depth.max(w.len() + 2);
    }
    let mu = spec.gibbs_weights(depth)?;
    let mut by_word = Vec::with_capacity(word_list.len());
    for w in word_list {
        let basis = kernel_a(spec, w)?;
        by_word.push((w.clone(), inner_product(phi, &basis, &mu)?));
    }
    let pair = complete_depth2_kernel(spec)?;
    let completion = [
        inner_product(phi, &pair[0], &mu)?,
        inner_product(phi, &pair[1], &mu)?,
    ];
    Ok(ExpansionCoefficients {
        by_word,
        completion,
    })
}

/// The coefficient form of the directional derivative
/// `∫ (xi - zeta) eta dmu = sum_w (phi_w - f_w) eta_w`, where `xi`, `zeta`
/// are the kernel parts of `phi` and `f` and the sums run over the kernel
/// family. Cross-checked internally against the direct integral.
pub fn coeff_directional_derivative(
    spec: &MarkovSpec,
    phi: &GridFunction,
    f_norm: &GridFunction,
    eta: &GridFunction,
    word_list: &[Word],
) -> Result<f64> {
    let err = normalization_error(f_norm)?;
    if err > NORMALIZED_TOL {
        return Err(Error::NotNormalized(err));
    }
    let tol = 1e-13;
    let xi = kernel_project(f_norm, phi, tol)?.kernel;
    let zeta = kernel_project(f_norm, f_norm, tol)?.kernel;
    let phi_coeffs = expansion_coefficients(spec, &xi, word_list)?;
    let f_coeffs = expansion_coefficients(spec, &zeta, word_list)?;
    let eta_coeffs = expansion_coefficients(spec, eta, word_list)?;

    // All three expansions share word_list order.
    let mut sum = 0.0;
    for ((_, pc), ((_, fc), (_, ec))) in phi_coeffs
        .by_word
        .iter()
        .zip(f_coeffs.by_word.iter().zip(&eta_coeffs.by_word))
    {
        sum += (pc - fc) * ec;
    }
    for i in 0..2 {
        sum += (phi_coeffs.completion[i] - f_coeffs.completion[i]) * eta_coeffs.completion[i];
    }

    let direct = crate::thermo::functional_directional_derivative(f_norm, eta, phi)?;
    if (sum - direct).abs() > 1e-10 * direct.abs().max(1.0) {
        return Err(Error::ConsistencyCheck(format!(
            "coefficient sum {sum:.14e} vs direct integral {direct:.14e}"
        )));
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::apply_transfer;

    fn uniform() -> MarkovSpec {
        MarkovSpec::new([[0.5, 0.5], [0.5, 0.5]]).unwrap()
    }

    fn asym() -> MarkovSpec {
        MarkovSpec::new([[0.7, 0.3], [0.4, 0.6]]).unwrap()
    }

    #[test]
    fn spec_construction() {
        let m = uniform();
        assert_eq!(m.stationary(), &[0.5, 0.5]);
        assert_eq!(m.kernel()[0][1], 0.5);

        let m = asym();
        assert!((m.stationary()[0] - 4.0 / 7.0).abs() < 1e-15);
        assert!((m.stationary()[1] - 3.0 / 7.0).abs() < 1e-15);
        for l in 0..2 {
            let col = m.kernel()[0][l] + m.kernel()[1][l];
            assert!((col - 1.0).abs() < 1e-14);
        }
        // pi P = pi
        let pi = m.stationary();
        for l in 0..2 {
            let v = pi[0] * m.transition()[0][l] + pi[1] * m.transition()[1][l];
            assert!((v - pi[l]).abs() < 1e-14);
        }

        assert!(MarkovSpec::new([[1.0, 0.0], [0.5, 0.5]]).is_err());
        assert!(MarkovSpec::new([[0.6, 0.3], [0.5, 0.5]]).is_err());
    }

    #[test]
    fn cylinder_measures() {
        let m = uniform();
        assert_eq!(m.cylinder_measure(&Word::new(&[0]).unwrap()), 0.5);
        let m = asym();
        let w01 = Word::new(&[0, 1]).unwrap();
        assert!((m.cylinder_measure(&w01) - (4.0 / 7.0) * 0.3).abs() < 1e-15);
        assert_eq!(m.cylinder_measure(&Word::empty()), 1.0);
        // Partition of unity over length-3 words.
        let total: f64 = words_up_to(3)
            .iter()
            .filter(|w| w.len() == 3)
            .map(|w| m.cylinder_measure(w))
            .sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn log_j_is_normalized() {
        for m in [uniform(), asym()] {
            let f = m.log_j_potential();
            assert!(normalization_error(&f).unwrap() < 1e-14);
        }
    }

    #[test]
    fn haar_unit_norm_and_orthogonal() {
        let m = asym();
        let mu = m.gibbs_weights(5).unwrap();
        let mut family = vec![haar_e(&m, &Word::empty()).unwrap()];
        for w in words_up_to(3) {
            family.push(haar_e(&m, &w).unwrap());
        }
        let one = GridFunction::constant(m.space(), 1.0);
        for (i, ei) in family.iter().enumerate() {
            assert!(inner_product(ei, &one, &mu).unwrap().abs() < 1e-14);
            for (j, ej) in family.iter().enumerate() {
                let g = inner_product(ei, ej, &mu).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-13, "gram[{i}][{j}] = {g}");
            }
        }
    }

    #[test]
    fn uniform_chain_haar_example() {
        // e_(0) = sqrt(2) 1_[00] - sqrt(2) 1_[01]
        let m = uniform();
        let e = haar_e(&m, &Word::new(&[0]).unwrap()).unwrap();
        let r2 = 2f64.sqrt();
        assert_eq!(e.depth(), 2);
        let vals = e.values();
        assert!((vals[0] - r2).abs() < 1e-15);
        assert!((vals[1] + r2).abs() < 1e-15);
        assert_eq!(vals[2], 0.0);
        assert_eq!(vals[3], 0.0);
    }

    #[test]
    fn basis_word_length_is_capped() {
        let m = uniform();
        let long = Word::new(&[0, 1, 0, 1, 0, 1]).unwrap();
        assert!(matches!(
            kernel_a(&m, &long),
            Err(Error::DepthOverflow { .. })
        ));
        assert!(kernel_a(&m, &Word::new(&[0, 1, 0, 1, 0]).unwrap()).is_ok());
        assert!(matches!(
            kernel_a(&m, &Word::empty()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn kernel_elements_are_killed_and_unit() {
        let m = asym();
        let f = m.log_j_potential();
        for w in words_up_to(3) {
            let a = kernel_a(&m, &w).unwrap();
            let mu = m.gibbs_weights(a.depth()).unwrap();
            assert!((inner_product(&a, &a, &mu).unwrap() - 1.0).abs() < 1e-13);
            let la = apply_transfer(&f, &a).unwrap();
            assert!(la.sup_norm() < 1e-13, "||L a_{w}|| = {}", la.sup_norm());
        }
    }

    #[test]
    fn uniform_chain_kernel_example() {
        // a_(0) = sqrt(2) (e_00 - e_10) before normalization, so the
        // normalized element is (e_00 - e_10)/sqrt(2).
        let m = uniform();
        let a = kernel_a(&m, &Word::new(&[0]).unwrap()).unwrap();
        let e00 = haar_e(&m, &Word::new(&[0, 0]).unwrap()).unwrap();
        let e10 = haar_e(&m, &Word::new(&[1, 0]).unwrap()).unwrap();
        let expect = e00.sub(&e10).unwrap().scale(1.0 / 2f64.sqrt());
        assert!(a.sub(&expect).unwrap().sup_norm() < 1e-14);
    }

    #[test]
    fn completion_pair_is_orthonormal_kernel() {
        for m in [uniform(), asym()] {
            let pair = complete_depth2_kernel(&m).unwrap();
            let f = m.log_j_potential();
            let mu = m.gibbs_weights(2).unwrap();
            for (i, gi) in pair.iter().enumerate() {
                assert!(apply_transfer(&f, gi).unwrap().sup_norm() < 1e-12);
                for (j, gj) in pair.iter().enumerate() {
                    let g = inner_product(gi, gj, &mu).unwrap();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g - expect).abs() < 1e-12);
                }
            }
            // Orthogonal to the word-indexed elements (level separation).
            let mu5 = m.gibbs_weights(5).unwrap();
            for w in words_up_to(3) {
                let a = kernel_a(&m, &w).unwrap();
                for g in &pair {
                    assert!(inner_product(&a, g, &mu5).unwrap().abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn expansion_recovers_coefficients() {
        let m = asym();
        let words = words_up_to(2);
        // phi = a basis element -> unit coefficient there, zero elsewhere.
        let target = Word::new(&[1, 0]).unwrap();
        let phi = kernel_a(&m, &target).unwrap();
        let coeffs = expansion_coefficients(&m, &phi, &words).unwrap();
        for (w, c) in &coeffs.by_word {
            let expect = if *w == target { 1.0 } else { 0.0 };
            assert!((c - expect).abs() < 1e-12, "coeff at {w} = {c}");
        }
        assert!(coeffs.completion[0].abs() < 1e-12);
        assert!(coeffs.completion[1].abs() < 1e-12);

        // phi = 0 -> all zeros.
        let zero = GridFunction::constant(m.space(), 0.0);
        let coeffs = expansion_coefficients(&m, &zero, &words).unwrap();
        assert!(coeffs.by_word.iter().all(|(_, c)| c.abs() < 1e-15));
    }

    #[test]
    fn kernel_reconstruction_depth4() {
        // A combination inside the kernel with components on every level
        // reachable at depth 4 is reproduced from words up to length 2 plus
        // the completion pair.
        let m = asym();
        let words = words_up_to(2);
        let pair = complete_depth2_kernel(&m).unwrap();
        let mut phi = pair[0].scale(0.8).add(&pair[1].scale(-0.35)).unwrap();
        let mut c = 0.4;
        for w in &words {
            phi = phi.add(&kernel_a(&m, w).unwrap().scale(c)).unwrap();
            c = -0.8 * c + 0.1;
        }
        let coeffs = expansion_coefficients(&m, &phi, &words).unwrap();
        let back = coeffs.reconstruct(&m).unwrap();
        let mu = m.gibbs_weights(phi.depth().max(back.depth())).unwrap();
        let diff = back.sub(&phi).unwrap();
        let l2 = inner_product(&diff, &diff, &mu).unwrap().sqrt();
        assert!(l2 < 1e-10, "reconstruction residual {l2}");
    }
}
