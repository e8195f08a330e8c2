use serde::{Deserialize, Serialize};

use super::PolyError;

/// Default upper bound on the number of monomials in a basis.
pub const DEFAULT_BASIS_CAP: usize = 200_000;

/// Compact descriptor of a basis; enough to rebuild it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisSpec {
    pub dim: usize,
    pub degree: usize,
    pub multilinear: bool,
}

impl BasisSpec {
    /// Closed-form basis size: `C(d+l, l)` in general, `sum_{k<=l} C(d, k)` when multilinear.
    pub fn size(&self) -> u128 {
        if self.multilinear {
            (0..=self.degree.min(self.dim))
                .map(|k| binomial(self.dim as u128, k as u128))
                .fold(0u128, |a, b| a.saturating_add(b))
        } else {
            binomial((self.dim + self.degree) as u128, self.degree as u128)
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Monomials of total degree at most `degree` in `dim` variables, in graded
/// lexicographic order: by degree, then by the sorted variable-index sequence
/// (so `x1^2, x1x2, ..., x1xd, x2^2, ...`).
///
/// Monomial `j > 0` is stored as its parent (the monomial with the last
/// variable removed) times one variable, which makes feature evaluation one
/// multiplication per monomial.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    spec: BasisSpec,
    vars: Vec<Vec<usize>>,
    parent: Vec<usize>,
    last_var: Vec<usize>,
}

/// Enumerates the canonical basis, rejecting anything larger than [`DEFAULT_BASIS_CAP`].
pub fn enumerate_basis(dim: usize, degree: usize, multilinear: bool) -> Result<MonomialBasis, PolyError> {
    MonomialBasis::with_cap(BasisSpec { dim, degree, multilinear }, DEFAULT_BASIS_CAP)
}

impl MonomialBasis {
    pub fn new(spec: BasisSpec) -> Result<Self, PolyError> {
        Self::with_cap(spec, DEFAULT_BASIS_CAP)
    }

    pub fn with_cap(spec: BasisSpec, cap: usize) -> Result<Self, PolyError> {
        if spec.dim == 0 {
            return Err(PolyError::ZeroDimension);
        }
        let size = spec.size();
        if size > cap as u128 {
            return Err(PolyError::BasisTooLarge { size, cap });
        }
        let size = size as usize;
        let mut vars: Vec<Vec<usize>> = Vec::with_capacity(size);
        let mut parent = Vec::with_capacity(size);
        let mut last_var = Vec::with_capacity(size);
        vars.push(Vec::new());
        parent.push(0);
        last_var.push(0);
        let mut prev_start = 0;
        for _ in 1..=spec.degree {
            let prev_end = vars.len();
            for p in prev_start..prev_end {
                let first = match vars[p].last() {
                    None => 0,
                    Some(&v) if spec.multilinear => v + 1,
                    Some(&v) => v,
                };
                for j in first..spec.dim {
                    let mut seq = vars[p].clone();
                    seq.push(j);
                    vars.push(seq);
                    parent.push(p);
                    last_var.push(j);
                }
            }
            prev_start = prev_end;
        }
        debug_assert_eq!(vars.len(), size);
        Ok(MonomialBasis { spec, vars, parent, last_var })
    }

    pub fn spec(&self) -> BasisSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn degree(&self) -> usize {
        self.spec.degree
    }

    pub fn is_multilinear(&self) -> bool {
        self.spec.multilinear
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Sorted (0-based) variable indices of monomial `j`, with repetition.
    pub fn variables(&self, j: usize) -> &[usize] {
        &self.vars[j]
    }

    /// Exponent vector of monomial `j`.
    pub fn exponents(&self, j: usize) -> Vec<u32> {
        let mut e = vec![0u32; self.spec.dim];
        for &v in &self.vars[j] {
            e[v] += 1;
        }
        e
    }

    /// Human-readable name such as `1`, `x1`, `x1*x3`, `x2^2`.
    pub fn monomial_name(&self, j: usize) -> String {
        let e = self.exponents(j);
        let parts: Vec<String> = e
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0)
            .map(|(i, &p)| if p == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, p) })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }

    /// Writes the feature vector `m(x)` into `out` (length `len()`).
    #[inline]
    pub fn features_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.spec.dim);
        debug_assert_eq!(out.len(), self.vars.len());
        out[0] = 1.0;
        for j in 1..out.len() {
            out[j] = out[self.parent[j]] * x[self.last_var[j]];
        }
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>, PolyError> {
        if x.len() != self.spec.dim {
            return Err(PolyError::DimensionMismatch { expected: self.spec.dim, got: x.len() });
        }
        let mut out = vec![0.0; self.len()];
        self.features_into(x, &mut out);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degree_one_in_two_variables() {
        let b = enumerate_basis(2, 1, false).unwrap();
        let names: Vec<_> = (0..b.len()).map(|j| b.monomial_name(j)).collect();
        assert_eq!(names, ["1", "x1", "x2"]);
    }

    #[test]
    fn degree_two_general_has_six_terms_in_graded_lex_order() {
        let b = enumerate_basis(2, 2, false).unwrap();
        let names: Vec<_> = (0..b.len()).map(|j| b.monomial_name(j)).collect();
        assert_eq!(names, ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]);
    }

    #[test]
    fn multilinear_three_variables_degree_two() {
        let b = enumerate_basis(3, 2, true).unwrap();
        assert_eq!(b.len(), 7);
        let names: Vec<_> = (0..b.len()).map(|j| b.monomial_name(j)).collect();
        assert_eq!(names, ["1", "x1", "x2", "x3", "x1*x2", "x1*x3", "x2*x3"]);
    }

    #[test]
    fn multilinear_degree_beyond_dimension_saturates() {
        let b = enumerate_basis(3, 5, true).unwrap();
        assert_eq!(b.len(), 8);
    }

    #[test]
    fn cap_rejects_large_bases() {
        let err = enumerate_basis(100, 4, false).unwrap_err();
        assert!(matches!(err, PolyError::BasisTooLarge { .. }));
        let err = MonomialBasis::with_cap(BasisSpec { dim: 4, degree: 2, multilinear: false }, 10).unwrap_err();
        assert!(matches!(err, PolyError::BasisTooLarge { size: 15, cap: 10 }));
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(enumerate_basis(0, 1, false), Err(PolyError::ZeroDimension)));
    }

    #[test]
    fn features_match_direct_products() {
        let b = enumerate_basis(3, 3, false).unwrap();
        let x = [0.5, -2.0, 3.0];
        let m = b.features(&x).unwrap();
        for (j, mj) in m.iter().enumerate() {
            let e = b.exponents(j);
            let direct: f64 = e.iter().zip(&x).map(|(&p, &v)| v.powi(p as i32)).product();
            assert!((mj - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    fn brute_count(d: usize, l: usize, multilinear: bool) -> usize {
        // Count exponent vectors with bounded total degree by odometer enumeration.
        let max_e = if multilinear { 1 } else { l };
        let mut e = vec![0usize; d];
        let mut count = 0;
        loop {
            if e.iter().sum::<usize>() <= l {
                count += 1;
            }
            let mut i = 0;
            loop {
                if i == d {
                    return count;
                }
                e[i] += 1;
                if e[i] <= max_e {
                    break;
                }
                e[i] = 0;
                i += 1;
            }
        }
    }

    proptest! {
        #[test]
        fn size_matches_closed_form_and_enumeration(d in 1usize..6, l in 0usize..5, ml in any::<bool>()) {
            let b = enumerate_basis(d, l, ml).unwrap();
            prop_assert_eq!(b.len() as u128, b.spec().size());
            prop_assert_eq!(b.len(), brute_count(d, l, ml));
            let again = enumerate_basis(d, l, ml).unwrap();
            prop_assert_eq!(&b, &again);
            let mut seen = std::collections::HashSet::new();
            for j in 0..b.len() {
                prop_assert!(seen.insert(b.exponents(j)));
            }
        }
    }
}
