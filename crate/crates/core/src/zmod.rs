//! Exact arithmetic and dense linear algebra over prime fields `Z_p`.
//!
//! Moduli up to 128 bits are supported. Elements are stored as `u128`
//! residues; for `p < 2^63` products fit in a `u128` and dot products use
//! lazy reduction, which is the path every default-size run takes.

use std::fmt;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZmodError {
    #[error("{0} is not prime")]
    NotPrime(u128),
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("operands live in different fields (p={left} vs p={right})")]
    ModulusMismatch { left: u128, right: u128 },
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("security parameter {0} outside supported range 2..=128")]
    BadLambda(u32),
}

/// Products of two residues below this bound fit in a `u128` with room for
/// one more addend.
const FAST_BOUND: u128 = 1 << 63;
const LAZY_LIMIT: u128 = 1 << 127;

/// A prime modulus `p`. Construction checks primality.
///
/// Odd moduli below `2^63` carry Montgomery constants (`R = 2^64`) used by
/// the scalar multiplication hot path.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeModulus {
    p: u128,
    mont: Option<Montgomery>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Montgomery {
    p: u64,
    /// `-p^{-1} mod 2^64`
    neg_inv: u64,
    /// `2^128 mod p`
    r2: u128,
}

impl Montgomery {
    fn new(p: u64) -> Self {
        // Newton iteration for p^{-1} mod 2^64
        let mut inv: u64 = p;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(p.wrapping_mul(inv)));
        }
        let r = (1u128 << 64) % u128::from(p);
        Self {
            p,
            neg_inv: inv.wrapping_neg(),
            r2: (r * r) % u128::from(p),
        }
    }

    /// `t * 2^-64 mod p` for `t < p * 2^64`.
    #[inline]
    fn redc(self, t: u128) -> u128 {
        let m = (t as u64).wrapping_mul(self.neg_inv);
        let u = (t + u128::from(m) * u128::from(self.p)) >> 64;
        if u >= u128::from(self.p) {
            u - u128::from(self.p)
        } else {
            u
        }
    }
}

impl fmt::Debug for PrimeModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={}", self.p)
    }
}

impl fmt::Display for PrimeModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.p)
    }
}

impl PrimeModulus {
    pub fn new(p: u128) -> Result<Self, ZmodError> {
        if is_prime(p) {
            Ok(Self::from_prime(p))
        } else {
            Err(ZmodError::NotPrime(p))
        }
    }

    fn from_prime(p: u128) -> Self {
        let mont = (p < FAST_BOUND && p % 2 == 1).then(|| Montgomery::new(p as u64));
        Self { p, mont }
    }

    #[inline]
    pub fn value(self) -> u128 {
        self.p
    }

    pub fn bits(self) -> u32 {
        128 - self.p.leading_zeros()
    }

    #[inline]
    fn fast(self) -> bool {
        self.p < FAST_BOUND
    }

    #[inline]
    pub fn reduce(self, a: u128) -> u128 {
        a % self.p
    }

    #[inline]
    pub fn add(self, a: u128, b: u128) -> u128 {
        let (s, carry) = a.overflowing_add(b);
        if carry || s >= self.p {
            s.wrapping_sub(self.p)
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(self, a: u128, b: u128) -> u128 {
        if a >= b {
            a - b
        } else {
            self.p - (b - a)
        }
    }

    #[inline]
    pub fn neg(self, a: u128) -> u128 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(self, a: u128, b: u128) -> u128 {
        match self.mont {
            Some(m) => m.redc(m.redc(a * m.r2) * b),
            None if self.fast() => (a * b) % self.p,
            None => mul_wide(a, b, self.p),
        }
    }

    /// Precompute a multiplier for repeated use with [`Self::mul_prepared`].
    #[inline]
    pub fn prepare(self, k: u128) -> u128 {
        match self.mont {
            Some(m) => m.redc(k * m.r2),
            None => k,
        }
    }

    /// `k * b mod p` where `prepared = prepare(k)`.
    #[inline]
    pub fn mul_prepared(self, prepared: u128, b: u128) -> u128 {
        match self.mont {
            Some(m) => m.redc(prepared * b),
            None if self.fast() => (prepared * b) % self.p,
            None => mul_wide(prepared, b, self.p),
        }
    }

    pub fn pow(self, mut base: u128, mut exp: u128) -> u128 {
        let mut acc = 1 % self.p;
        base %= self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat; `None` for zero.
    pub fn inv(self, a: u128) -> Option<u128> {
        let a = a % self.p;
        if a == 0 {
            None
        } else {
            Some(self.pow(a, self.p - 2))
        }
    }

    pub fn random<R: Rng + ?Sized>(self, rng: &mut R) -> u128 {
        rng.gen_range(0..self.p)
    }

    pub fn random_nonzero<R: Rng + ?Sized>(self, rng: &mut R) -> u128 {
        rng.gen_range(1..self.p)
    }

    /// Inner product with lazy reduction on the fast path.
    pub fn dot<'a, I>(self, pairs: I) -> u128
    where
        I: IntoIterator<Item = (&'a u128, &'a u128)>,
    {
        if self.fast() {
            let mut acc: u128 = 0;
            for (a, b) in pairs {
                acc += u128::from(*a as u64) * u128::from(*b as u64);
                if acc >= LAZY_LIMIT {
                    acc %= self.p;
                }
            }
            acc % self.p
        } else {
            pairs.into_iter().fold(0, |acc, (a, b)| self.add(acc, self.mul(*a, *b)))
        }
    }
}

/// `a * b mod m` for any 128-bit modulus by shift-and-add.
fn mul_wide(mut a: u128, mut b: u128, m: u128) -> u128 {
    a %= m;
    b %= m;
    let mut acc: u128 = 0;
    while b > 0 {
        if b & 1 == 1 {
            acc = add_mod(acc, a, m);
        }
        a = add_mod(a, a, m);
        b >>= 1;
    }
    acc
}

#[inline]
fn add_mod(a: u128, b: u128, m: u128) -> u128 {
    let (s, carry) = a.overflowing_add(b);
    if carry || s >= m {
        s.wrapping_sub(m)
    } else {
        s
    }
}

fn mul_any(a: u128, b: u128, m: u128) -> u128 {
    if m < FAST_BOUND {
        (a * b) % m
    } else {
        mul_wide(a, b, m)
    }
}

fn pow_any(mut base: u128, mut exp: u128, m: u128) -> u128 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_any(acc, base, m);
        }
        base = mul_any(base, base, m);
        exp >>= 1;
    }
    acc
}

const MR_ROUNDS: usize = 64;
const TRIAL_LIMIT: u128 = 1 << 16;

/// Primality test: trial division by every integer below `2^16`, then 64
/// Miller-Rabin rounds. Witnesses come from a generator seeded by `n`, so the
/// answer is a deterministic function of `n`.
pub fn is_prime(n: u128) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u128;
    while d < TRIAL_LIMIT && d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    if d * d > n {
        return true;
    }
    let mut odd = n - 1;
    let mut twos = 0;
    while odd.is_multiple_of(2) {
        odd /= 2;
        twos += 1;
    }
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(n as u64 ^ (n >> 64) as u64);
    'witness: for _ in 0..MR_ROUNDS {
        let a = rng.gen_range(2..n - 1);
        let mut x = pow_any(a, odd, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..twos {
            x = mul_any(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Sample a prime with bit length exactly `lambda`, i.e. in
/// `[2^(lambda-1), 2^lambda)`, so always `p <= 2^lambda`.
pub fn gen_prime<R: Rng + ?Sized>(lambda: u32, rng: &mut R) -> Result<PrimeModulus, ZmodError> {
    if !(2..=128).contains(&lambda) {
        return Err(ZmodError::BadLambda(lambda));
    }
    let low = 1u128 << (lambda - 1);
    let high = if lambda == 128 {
        u128::MAX
    } else {
        (1u128 << lambda) - 1
    };
    loop {
        let candidate = rng.gen_range(low..=high);
        if is_prime(candidate) {
            return Ok(PrimeModulus::from_prime(candidate));
        }
    }
}

/// Row-major matrix over `Z_p`. Entries are always reduced.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u128>,
    modulus: PrimeModulus,
}

impl fmt::Debug for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FieldMatrix {}x{} mod {}", self.rows, self.cols, self.modulus)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

impl FieldMatrix {
    pub fn zeros(modulus: PrimeModulus, rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
            modulus,
        }
    }

    pub fn identity(modulus: PrimeModulus, dim: usize) -> Self {
        let mut m = Self::zeros(modulus, dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1;
        }
        m
    }

    /// Build from rows of (unreduced) integers.
    pub fn from_rows(modulus: PrimeModulus, rows: &[Vec<u128>]) -> Result<Self, ZmodError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(ZmodError::DimensionMismatch {
                    left: (rows.len(), cols),
                    right: (1, row.len()),
                });
            }
            data.extend(row.iter().map(|&x| modulus.reduce(x)));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
            modulus,
        })
    }

    /// Build from a row-major list of (unreduced) integers.
    pub fn from_entries(
        modulus: PrimeModulus,
        rows: usize,
        cols: usize,
        entries: Vec<u128>,
    ) -> Result<Self, ZmodError> {
        if entries.len() != rows * cols {
            return Err(ZmodError::DimensionMismatch {
                left: (rows, cols),
                right: (1, entries.len()),
            });
        }
        Ok(Self {
            rows,
            cols,
            data: entries.into_iter().map(|x| modulus.reduce(x)).collect(),
            modulus,
        })
    }

    pub fn random<R: Rng + ?Sized>(modulus: PrimeModulus, rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| modulus.random(rng)).collect();
        Self {
            rows,
            cols,
            data,
            modulus,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> PrimeModulus {
        self.modulus
    }

    pub fn entries(&self) -> &[u128] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[u128] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u128 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: u128) {
        self.data[r * self.cols + c] = self.modulus.reduce(value);
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|r| (0..self.cols).all(|c| self.get(r, c) == u128::from(r == c)))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.modulus, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    pub fn scale(&self, k: u128) -> Self {
        let p = self.modulus;
        let k = p.reduce(k);
        Self {
            data: self.data.iter().map(|&x| p.mul(x, k)).collect(),
            ..self.clone()
        }
    }

    fn check_same_field(&self, other_modulus: PrimeModulus) -> Result<(), ZmodError> {
        if self.modulus != other_modulus {
            return Err(ZmodError::ModulusMismatch {
                left: self.modulus.value(),
                right: other_modulus.value(),
            });
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self, ZmodError> {
        self.check_same_field(other.modulus)?;
        if self.cols != other.rows {
            return Err(ZmodError::DimensionMismatch {
                left: (self.rows, self.cols),
                right: (other.rows, other.cols),
            });
        }
        let p = self.modulus;
        let bt = other.transpose();
        let mut out = Self::zeros(p, self.rows, other.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for c in 0..other.cols {
                out.data[r * other.cols + c] = p.dot(row.iter().zip(bt.row(c)));
            }
        }
        Ok(out)
    }

    /// Inverse by Gauss-Jordan elimination.
    pub fn inverse(&self) -> Result<Self, ZmodError> {
        if self.rows != self.cols {
            return Err(ZmodError::NotSquare(self.rows, self.cols));
        }
        if self.modulus.fast() && self.modulus.value() > 2 {
            self.inverse_lazy()
        } else {
            self.inverse_generic()
        }
    }

    /// Gauss-Jordan on the augmented matrix `[A | I]` with row updates left
    /// unreduced until the `u128` headroom is spent.
    fn inverse_lazy(&self) -> Result<Self, ZmodError> {
        let n = self.rows;
        let p = self.modulus;
        let pv = p.value();
        let budget = ((u128::MAX - pv) / ((pv - 1) * (pv - 1))).min(1 << 20) as usize;
        let w = 2 * n;
        let mut a = vec![0u128; n * w];
        for r in 0..n {
            a[r * w..r * w + n].copy_from_slice(self.row(r));
            a[r * w + n + r] = 1;
        }
        let mut pending = 0;
        let mut pivot_row = vec![0u128; w];
        for col in 0..n {
            if pending >= budget {
                a.iter_mut().for_each(|x| *x %= pv);
                pending = 0;
            }
            for r in 0..n {
                a[r * w + col] %= pv;
            }
            let pivot = (col..n)
                .find(|&r| a[r * w + col] != 0)
                .ok_or(ZmodError::SingularMatrix)?;
            if pivot != col {
                for c in 0..w {
                    a.swap(pivot * w + c, col * w + c);
                }
            }
            let scale = p.prepare(p.inv(a[col * w + col]).expect("pivot is nonzero"));
            for c in col..w {
                let x = a[col * w + c] % pv;
                let y = p.mul_prepared(scale, x);
                a[col * w + c] = y;
                pivot_row[c] = y;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[r * w + col];
                if factor == 0 {
                    continue;
                }
                let neg = u128::from((pv - factor) as u64);
                let row = &mut a[r * w + col..(r + 1) * w];
                for (x, y) in row.iter_mut().zip(&pivot_row[col..]) {
                    *x += neg * u128::from(*y as u64);
                }
            }
            pending += 1;
        }
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            data.extend(a[r * w + n..(r + 1) * w].iter().map(|x| x % pv));
        }
        Ok(Self {
            rows: n,
            cols: n,
            data,
            modulus: p,
        })
    }

    fn inverse_generic(&self) -> Result<Self, ZmodError> {
        let n = self.rows;
        let p = self.modulus;
        let mut a = self.data.clone();
        let mut inv = Self::identity(p, n).data;
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| a[r * n + col] != 0)
                .ok_or(ZmodError::SingularMatrix)?;
            if pivot != col {
                for c in 0..n {
                    a.swap(pivot * n + c, col * n + c);
                    inv.swap(pivot * n + c, col * n + c);
                }
            }
            let scale = p.prepare(p.inv(a[col * n + col]).expect("pivot is nonzero"));
            for c in 0..n {
                a[col * n + c] = p.mul_prepared(scale, a[col * n + c]);
                inv[col * n + c] = p.mul_prepared(scale, inv[col * n + c]);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[r * n + col];
                if factor == 0 {
                    continue;
                }
                let neg = p.prepare(p.neg(factor));
                // columns left of `col` are already zero in the pivot row
                for c in col..n {
                    let t = p.mul_prepared(neg, a[col * n + c]);
                    a[r * n + c] = p.add(a[r * n + c], t);
                }
                for c in 0..n {
                    let t = p.mul_prepared(neg, inv[col * n + c]);
                    inv[r * n + c] = p.add(inv[r * n + c], t);
                }
            }
        }
        Ok(Self {
            rows: n,
            cols: n,
            data: inv,
            modulus: p,
        })
    }

    /// Rank by row reduction.
    pub fn rank(&self) -> usize {
        let p = self.modulus;
        let (n, m) = (self.rows, self.cols);
        let mut a = self.data.clone();
        let mut rank = 0;
        for col in 0..m {
            let Some(pivot) = (rank..n).find(|&r| a[r * m + col] != 0) else {
                continue;
            };
            for c in 0..m {
                a.swap(pivot * m + c, rank * m + c);
            }
            let scale = p.inv(a[rank * m + col]).expect("nonzero pivot");
            for r in rank + 1..n {
                let factor = p.mul(a[r * m + col], scale);
                if factor == 0 {
                    continue;
                }
                for c in col..m {
                    let t = p.mul(factor, a[rank * m + c]);
                    a[r * m + c] = p.sub(a[r * m + c], t);
                }
            }
            rank += 1;
        }
        rank
    }

    /// Row vector times matrix.
    pub fn left_mul_vec(&self, v: &FieldVector) -> Result<FieldVector, ZmodError> {
        self.check_same_field(v.modulus)?;
        if v.dim() != self.rows {
            return Err(ZmodError::DimensionMismatch {
                left: (1, v.dim()),
                right: (self.rows, self.cols),
            });
        }
        let p = self.modulus;
        let t = self.transpose();
        let data = (0..self.cols).map(|c| p.dot(v.data.iter().zip(t.row(c)))).collect();
        Ok(FieldVector { data, modulus: p })
    }

    /// Matrix times column vector.
    pub fn mul_vec(&self, v: &FieldVector) -> Result<FieldVector, ZmodError> {
        self.check_same_field(v.modulus)?;
        if v.dim() != self.cols {
            return Err(ZmodError::DimensionMismatch {
                left: (self.rows, self.cols),
                right: (v.dim(), 1),
            });
        }
        let p = self.modulus;
        let data = (0..self.rows).map(|r| p.dot(self.row(r).iter().zip(&v.data))).collect();
        Ok(FieldVector { data, modulus: p })
    }
}

/// Dense vector over `Z_p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldVector {
    data: Vec<u128>,
    modulus: PrimeModulus,
}

impl FieldVector {
    pub fn zeros(modulus: PrimeModulus, dim: usize) -> Self {
        Self {
            data: vec![0; dim],
            modulus,
        }
    }

    pub fn from_values(modulus: PrimeModulus, values: impl IntoIterator<Item = u128>) -> Self {
        Self {
            data: values.into_iter().map(|x| modulus.reduce(x)).collect(),
            modulus,
        }
    }

    pub fn random<R: Rng + ?Sized>(modulus: PrimeModulus, dim: usize, rng: &mut R) -> Self {
        Self {
            data: (0..dim).map(|_| modulus.random(rng)).collect(),
            modulus,
        }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn modulus(&self) -> PrimeModulus {
        self.modulus
    }

    pub fn entries(&self) -> &[u128] {
        &self.data
    }

    pub fn get(&self, i: usize) -> u128 {
        self.data[i]
    }

    pub fn set(&mut self, i: usize, value: u128) {
        self.data[i] = self.modulus.reduce(value);
    }

    pub fn dot(&self, other: &Self) -> Result<u128, ZmodError> {
        if self.modulus != other.modulus {
            return Err(ZmodError::ModulusMismatch {
                left: self.modulus.value(),
                right: other.modulus.value(),
            });
        }
        if self.dim() != other.dim() {
            return Err(ZmodError::DimensionMismatch {
                left: (1, self.dim()),
                right: (other.dim(), 1),
            });
        }
        Ok(self.modulus.dot(self.data.iter().zip(&other.data)))
    }
}

/// Sample a uniformly random invertible matrix together with its inverse.
/// Singular draws are rejected; the elimination that detects them also
/// produces the inverse.
pub fn sample_invertible<R: Rng + ?Sized>(
    modulus: PrimeModulus,
    dim: usize,
    rng: &mut R,
) -> (FieldMatrix, FieldMatrix) {
    loop {
        let m = FieldMatrix::random(modulus, dim, dim, rng);
        if let Ok(inv) = m.inverse() {
            return (m, inv);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn p(v: u128) -> PrimeModulus {
        PrimeModulus::new(v).unwrap()
    }

    fn trial_division(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn primality_agrees_with_trial_division_below_a_million() {
        for n in 0..1_000_000u64 {
            assert_eq!(is_prime(n as u128), trial_division(n), "n={n}");
        }
    }

    #[test]
    fn known_large_primes_and_composites() {
        assert!(is_prime((1u128 << 61) - 1));
        assert!(is_prime((1u128 << 127) - 1));
        assert!(!is_prime(((1u128 << 61) - 1) * 1_000_003));
        // Carmichael number
        assert!(!is_prime(561));
        assert!(!is_prime(3_215_031_751));
    }

    #[test]
    fn gen_prime_ranges() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..50 {
            let q = gen_prime(2, &mut rng).unwrap().value();
            assert!(q == 2 || q == 3);
        }
        for lambda in 3..=20 {
            let q = gen_prime(lambda, &mut rng).unwrap().value();
            assert!(q <= 1 << lambda);
            assert!(trial_division(q as u64));
        }
        let q = gen_prime(8, &mut rng).unwrap().value();
        assert!(q <= 256);
        let big = gen_prime(128, &mut rng).unwrap();
        assert_eq!(big.bits(), 128);
        assert_eq!(gen_prime(1, &mut rng), Err(ZmodError::BadLambda(1)));
    }

    #[test]
    fn gen_prime_is_deterministic_per_seed() {
        let a = gen_prime(61, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        let b = gen_prime(61, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hand_checked_products_and_inverses() {
        let f = p(5);
        let a = FieldMatrix::from_rows(f, &[vec![1, 1], vec![0, 1]]).unwrap();
        let b = FieldMatrix::from_rows(f, &[vec![1, 4], vec![0, 1]]).unwrap();
        assert!(a.mul(&b).unwrap().is_identity());
        assert_eq!(a.inverse().unwrap(), b);
        let id = FieldMatrix::identity(f, 3);
        assert_eq!(id.inverse().unwrap(), id);
        let m = FieldMatrix::random(f, 3, 3, &mut ChaCha20Rng::seed_from_u64(3));
        assert_eq!(id.mul(&m).unwrap(), m);
        let singular = FieldMatrix::from_rows(f, &[vec![1, 2], vec![2, 4]]).unwrap();
        assert_eq!(singular.inverse(), Err(ZmodError::SingularMatrix));
        assert_eq!(singular.rank(), 1);
    }

    #[test]
    fn mismatch_errors() {
        let a = FieldMatrix::identity(p(5), 2);
        let b = FieldMatrix::identity(p(7), 2);
        assert!(matches!(a.mul(&b), Err(ZmodError::ModulusMismatch { .. })));
        let c = FieldMatrix::zeros(p(5), 3, 3);
        assert!(matches!(a.mul(&c), Err(ZmodError::DimensionMismatch { .. })));
        assert_eq!(
            FieldMatrix::zeros(p(5), 2, 3).inverse(),
            Err(ZmodError::NotSquare(2, 3))
        );
        assert_eq!(PrimeModulus::new(9), Err(ZmodError::NotPrime(9)));
    }

    #[test]
    fn associativity_random_triples() {
        let f = p(1_000_003);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..100 {
            let a = FieldMatrix::random(f, 3, 3, &mut rng);
            let b = FieldMatrix::random(f, 3, 3, &mut rng);
            let c = FieldMatrix::random(f, 3, 3, &mut rng);
            let left = a.mul(&b).unwrap().mul(&c).unwrap();
            let right = a.mul(&b.mul(&c).unwrap()).unwrap();
            assert_eq!(left, right);
        }
    }

    #[test]
    fn sample_invertible_mod_two_dim_one() {
        let f = p(2);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (m, inv) = sample_invertible(f, 1, &mut rng);
        assert_eq!(m.entries(), &[1]);
        assert_eq!(inv.entries(), &[1]);
    }

    fn det3(m: &FieldMatrix) -> u128 {
        let f = m.modulus();
        let g = |r, c| m.get(r, c);
        let term = |a: u128, b: u128, c: u128| f.mul(f.mul(a, b), c);
        let pos = f.add(
            f.add(term(g(0, 0), g(1, 1), g(2, 2)), term(g(0, 1), g(1, 2), g(2, 0))),
            term(g(0, 2), g(1, 0), g(2, 1)),
        );
        let neg = f.add(
            f.add(term(g(0, 2), g(1, 1), g(2, 0)), term(g(0, 0), g(1, 2), g(2, 1))),
            term(g(0, 1), g(1, 0), g(2, 2)),
        );
        f.sub(pos, neg)
    }

    #[test]
    fn sample_invertible_mod_two_dim_three_has_nonzero_determinant() {
        let f = p(2);
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let (m, inv) = sample_invertible(f, 3, &mut rng);
            assert_eq!(det3(&m), 1);
            assert!(m.mul(&inv).unwrap().is_identity());
        }
    }

    #[test]
    fn sample_invertible_61_bit() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let f = gen_prime(61, &mut rng).unwrap();
        for _ in 0..100 {
            let (m, inv) = sample_invertible(f, 10, &mut rng);
            assert!(m.mul(&inv).unwrap().is_identity());
            assert!(inv.mul(&m).unwrap().is_identity());
        }
    }

    #[test]
    fn wide_modulus_arithmetic() {
        let f = p((1u128 << 127) - 1);
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let (m, inv) = sample_invertible(f, 4, &mut rng);
        assert!(m.mul(&inv).unwrap().is_identity());
        let a = f.random_nonzero(&mut rng);
        assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
    }

    #[test]
    fn vector_products() {
        let f = p(7);
        let m = FieldMatrix::from_rows(f, &[vec![1, 2], vec![3, 4]]).unwrap();
        let v = FieldVector::from_values(f, [1, 1]);
        assert_eq!(m.left_mul_vec(&v).unwrap().entries(), &[4, 6]);
        assert_eq!(m.mul_vec(&v).unwrap().entries(), &[3, 0]);
        assert_eq!(v.dot(&v).unwrap(), 2);
    }

    proptest::proptest! {
        #[test]
        fn results_stay_reduced(a in 0u128..1_000_003, b in 0u128..1_000_003) {
            let f = p(1_000_003);
            for r in [f.add(a, b), f.sub(a, b), f.mul(a, b), f.neg(a)] {
                proptest::prop_assert!(r < f.value());
            }
            proptest::prop_assert_eq!(f.sub(f.add(a, b), b), a);
        }
    }
}
