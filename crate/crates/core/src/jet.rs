//! Truncated multivariate Taylor expansions ("jets") with complex
//! coefficients.
//!
//! A [`Jet`] stores the Taylor coefficients `c_a` of a function
//! `f(z0 + h) = sum_a c_a h^a` for every multi-index `a` of total degree at
//! most the order of its [`JetSpace`]. Coefficients are kept densely, indexed
//! by a graded ranking of multi-indices; products, partial derivatives and
//! analytic compositions are table-driven.
//!
//! Each jet additionally tracks its *usable order*: a partial derivative
//! lowers it by one, binary operations take the minimum of their operands.
//! Coefficients above the usable order are always zero. A negative usable
//! order marks a jet whose derivative budget is exhausted.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{DtnError, Result};

/// Precomputed index tables for jets in `n_vars` variables truncated at
/// total degree `order`.
pub struct JetSpace {
    n_vars: usize,
    order: usize,
    exponents: Vec<Vec<u8>>,
    degrees: Vec<usize>,
    degree_offsets: Vec<usize>,
    lookup: HashMap<Vec<u8>, usize>,
    // (lhs, rhs, product) index triples, sorted by the degree of the product.
    products: Vec<(u32, u32, u32)>,
    products_end: Vec<usize>,
    // per variable: (source, target, multiplicity)
    partials: Vec<Vec<(u32, u32, f64)>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("n_vars", &self.n_vars)
            .field("order", &self.order)
            .field("len", &self.exponents.len())
            .finish()
    }
}

type SpaceCache = Mutex<HashMap<(usize, usize), Arc<JetSpace>>>;

static SPACES: OnceLock<SpaceCache> = OnceLock::new();

impl JetSpace {
    /// Shared table for the given shape. Tables are built once per shape.
    pub fn get(n_vars: usize, order: usize) -> Arc<JetSpace> {
        let cache = SPACES.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((n_vars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(n_vars, order)))
            .clone()
    }

    fn build(n_vars: usize, order: usize) -> JetSpace {
        assert!(n_vars > 0, "jet space needs at least one variable");
        assert!(order < 256, "jet order must fit in u8 exponents");

        let mut exponents = Vec::new();
        let mut degrees = Vec::new();
        let mut degree_offsets = Vec::with_capacity(order + 2);
        for d in 0..=order {
            degree_offsets.push(exponents.len());
            for m in multi_indices(n_vars, d) {
                exponents.push(m);
                degrees.push(d);
            }
        }
        degree_offsets.push(exponents.len());

        let lookup: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();

        let mut products = Vec::new();
        for (i, a) in exponents.iter().enumerate() {
            for (j, b) in exponents.iter().enumerate() {
                if degrees[i] + degrees[j] > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i as u32, j as u32, lookup[&sum] as u32));
            }
        }
        products.sort_by_key(|&(_, _, k)| (degrees[k as usize], k));
        let mut products_end = vec![0; order + 1];
        for (d, end) in products_end.iter_mut().enumerate() {
            *end = products
                .iter()
                .take_while(|&&(_, _, k)| degrees[k as usize] <= d)
                .count();
        }

        let partials = (0..n_vars)
            .map(|v| {
                exponents
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e[v] > 0)
                    .map(|(i, e)| {
                        let mut t = e.clone();
                        t[v] -= 1;
                        (i as u32, lookup[&t] as u32, f64::from(e[v]))
                    })
                    .collect()
            })
            .collect();

        JetSpace {
            n_vars,
            order,
            exponents,
            degrees,
            degree_offsets,
            lookup,
            products,
            products_end,
            partials,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self, index: usize) -> &[u8] {
        &self.exponents[index]
    }

    pub fn degree(&self, index: usize) -> usize {
        self.degrees[index]
    }

    pub fn index_of(&self, exponents: &[u8]) -> Option<usize> {
        self.lookup.get(exponents).copied()
    }

    /// Number of coefficients of total degree at most `order`.
    fn len_up_to(&self, order: i32) -> usize {
        if order < 0 {
            0
        } else {
            self.degree_offsets[(order as usize).min(self.order) + 1]
        }
    }
}

/// All multi-indices in `n_vars` variables of total degree exactly `degree`,
/// in lexicographically descending order.
pub fn multi_indices(n_vars: usize, degree: usize) -> Vec<Vec<u8>> {
    fn rec(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, left: usize, remaining: usize) {
        if left == 1 {
            cur.push(remaining as u8);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=remaining).rev() {
            cur.push(k as u8);
            rec(out, cur, left - 1, remaining - k);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n_vars == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(&mut out, &mut Vec::with_capacity(n_vars), n_vars, degree);
    out
}

/// `a!` for a multi-index, computed in exact integer arithmetic.
pub fn multi_factorial(a: &[u8]) -> u128 {
    a.iter()
        .map(|&k| (1..=u128::from(k)).product::<u128>())
        .product()
}

#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: i32,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c != Complex64::new(0.0, 0.0) {
                map.entry(&self.space.exponents[i], c);
            }
        }
        map.finish()?;
        write!(f, " @order {}", self.order)
    }
}

impl Jet {
    pub fn zero(space: &Arc<JetSpace>) -> Jet {
        Jet {
            space: space.clone(),
            order: space.order as i32,
            coeffs: vec![Complex64::new(0.0, 0.0); space.len()],
        }
    }

    pub fn constant(space: &Arc<JetSpace>, value: impl Into<Complex64>) -> Jet {
        let mut j = Jet::zero(space);
        j.coeffs[0] = value.into();
        j
    }

    /// The coordinate function of variable `var`, expanded at `base`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, base: f64) -> Jet {
        assert!(var < space.n_vars, "variable index out of range");
        let mut j = Jet::constant(space, base);
        if space.order >= 1 {
            let mut e = vec![0u8; space.n_vars];
            e[var] = 1;
            j.coeffs[space.lookup[&e]] = Complex64::new(1.0, 0.0);
        }
        j
    }

    /// Builds a jet from explicit `(exponents, coefficient)` pairs. Entries
    /// above the space order are dropped.
    pub fn from_terms<'a, I>(space: &Arc<JetSpace>, terms: I) -> Result<Jet>
    where
        I: IntoIterator<Item = (&'a [u8], Complex64)>,
    {
        let mut j = Jet::zero(space);
        for (e, c) in terms {
            if e.len() != space.n_vars {
                return Err(DtnError::InvalidInput(format!(
                    "monomial {:?} has {} exponents, expected {}",
                    e,
                    e.len(),
                    space.n_vars
                )));
            }
            let deg: usize = e.iter().map(|&k| usize::from(k)).sum();
            if deg > space.order {
                continue;
            }
            j.coeffs[space.lookup[e]] += c;
        }
        Ok(j)
    }

    /// Builds a jet from a dense coefficient vector in the space's ranking.
    pub fn from_coeffs(space: &Arc<JetSpace>, order: i32, coeffs: Vec<Complex64>) -> Result<Jet> {
        if coeffs.len() != space.len() {
            return Err(DtnError::InvalidInput(format!(
                "coefficient vector has length {}, expected {}",
                coeffs.len(),
                space.len()
            )));
        }
        Ok(Jet {
            space: space.clone(),
            order: order.min(space.order as i32),
            coeffs,
        }
        .with_order(order))
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn n_vars(&self) -> usize {
        self.space.n_vars
    }

    /// Usable order: the highest total degree whose coefficients are valid.
    pub fn order(&self) -> i32 {
        self.order
    }

    pub fn is_exhausted(&self) -> bool {
        self.order < 0
    }

    /// Value at the base point.
    pub fn value(&self) -> Complex64 {
        if self.order < 0 {
            Complex64::new(f64::NAN, f64::NAN)
        } else {
            self.coeffs[0]
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Taylor coefficient of the monomial `h^exponents`.
    pub fn coeff(&self, exponents: &[u8]) -> Complex64 {
        self.space
            .index_of(exponents)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// Partial derivative `d^a f` at the base point.
    pub fn derivative(&self, exponents: &[u8]) -> Complex64 {
        self.coeff(exponents) * multi_factorial(exponents) as f64
    }

    fn same_space(&self, other: &Jet) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) {
            Ok(())
        } else {
            Err(DtnError::ShapeMismatch {
                left_vars: self.space.n_vars,
                left_order: self.space.order,
                right_vars: other.space.n_vars,
                right_order: other.space.order,
            })
        }
    }

    fn with_order(mut self, order: i32) -> Jet {
        let keep = self.space.len_up_to(order);
        for c in &mut self.coeffs[keep..] {
            *c = Complex64::new(0.0, 0.0);
        }
        self.order = order.min(self.space.order as i32);
        self
    }

    /// Drops every coefficient above `order`.
    pub fn truncated(&self, order: i32) -> Jet {
        self.clone().with_order(order.min(self.order))
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet> {
        self.same_space(other)?;
        let order = self.order.min(other.order);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Jet {
            space: self.space.clone(),
            order,
            coeffs,
        }
        .with_order(order))
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet> {
        self.same_space(other)?;
        let order = self.order.min(other.order);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Jet {
            space: self.space.clone(),
            order,
            coeffs,
        }
        .with_order(order))
    }

    /// Truncated Cauchy product.
    pub fn try_mul(&self, other: &Jet) -> Result<Jet> {
        self.same_space(other)?;
        let order = self.order.min(other.order);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.space.len()];
        if order >= 0 {
            let end = self.space.products_end[order as usize];
            for &(i, j, k) in &self.space.products[..end] {
                let a = self.coeffs[i as usize];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                coeffs[k as usize] += a * other.coeffs[j as usize];
            }
        }
        Ok(Jet {
            space: self.space.clone(),
            order,
            coeffs,
        })
    }

    pub fn scale(&self, factor: impl Into<Complex64>) -> Jet {
        let f = factor.into();
        Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * f).collect(),
        }
    }

    pub fn add_scalar(&self, value: impl Into<Complex64>) -> Jet {
        let mut j = self.clone();
        if j.order >= 0 {
            j.coeffs[0] += value.into();
        }
        j
    }

    /// Partial derivative with respect to variable `var`; the usable order
    /// drops by one.
    pub fn partial(&self, var: usize) -> Jet {
        assert!(var < self.space.n_vars, "variable index out of range");
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.space.len()];
        for &(src, dst, m) in &self.space.partials[var] {
            coeffs[dst as usize] = self.coeffs[src as usize] * m;
        }
        Jet {
            space: self.space.clone(),
            order: self.order - 1,
            coeffs,
        }
        .with_order(self.order - 1)
    }

    /// Mixed partial `d^a` given as per-variable counts.
    pub fn partial_multi(&self, vars: &[usize], counts: &[u8]) -> Jet {
        let mut out = self.clone();
        for (&v, &k) in vars.iter().zip(counts) {
            for _ in 0..k {
                out = out.partial(v);
            }
        }
        out
    }

    /// `sum_k taylor[k] (self - self(0))^k`, i.e. `f(self)` for an analytic
    /// `f` whose scaled derivatives at the base value are `taylor`.
    pub fn compose(&self, taylor: &[Complex64]) -> Jet {
        let mut h = self.clone();
        if h.order >= 0 {
            h.coeffs[0] = Complex64::new(0.0, 0.0);
        }
        let top = if self.order < 0 {
            0
        } else {
            self.order as usize
        };
        let top = top.min(taylor.len().saturating_sub(1));
        let mut acc = Jet::constant(&self.space, taylor[top]).with_order(self.order);
        for k in (0..top).rev() {
            acc = (&acc * &h).add_scalar(taylor[k]);
        }
        acc.with_order(self.order)
    }

    /// Multiplicative inverse. `quantity` names the value in the error
    /// raised when the constant term vanishes.
    pub fn inv(&self, quantity: &str) -> Result<Jet> {
        let a0 = self.value();
        if self.order < 0 || !(a0.norm() > 1e-300) || !a0.norm().is_finite() {
            return Err(DtnError::Singularity {
                quantity: quantity.to_string(),
                value: a0.norm(),
            });
        }
        let n = self.order.max(0) as usize;
        let mut taylor = Vec::with_capacity(n + 1);
        let r = a0.inv();
        let mut p = r;
        for _ in 0..=n {
            taylor.push(p);
            p = -p * r;
        }
        Ok(self.compose(&taylor))
    }

    /// Principal square root; the constant term must be real and positive.
    pub fn sqrt(&self, quantity: &str) -> Result<Jet> {
        let a0 = self.value();
        let real_positive = a0.re > 0.0 && a0.im.abs() <= 1e-12 * a0.re.abs();
        if self.order < 0 || !real_positive {
            return Err(DtnError::Singularity {
                quantity: quantity.to_string(),
                value: a0.re,
            });
        }
        let a0 = a0.re;
        let n = self.order as usize;
        let mut taylor = Vec::with_capacity(n + 1);
        // binom(1/2, k) / a0^k * sqrt(a0)
        let mut c = a0.sqrt();
        for k in 0..=n {
            taylor.push(Complex64::new(c, 0.0));
            let kf = k as f64;
            c *= (0.5 - kf) / ((kf + 1.0) * a0);
        }
        Ok(self.compose(&taylor))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let n = self.order.max(0) as usize;
        let mut taylor = Vec::with_capacity(n + 1);
        let mut c = e;
        for k in 0..=n {
            taylor.push(c);
            c /= (k + 1) as f64;
        }
        self.compose(&taylor)
    }

    pub fn conj(&self) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c.conj()).collect(),
        }
    }

    pub fn re(&self) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| Complex64::new(c.re, 0.0))
                .collect(),
        }
    }

    pub fn im(&self) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .map(|c| Complex64::new(c.im, 0.0))
                .collect(),
        }
    }

    /// Sets the deviation of each listed variable to zero, i.e. restricts
    /// the jet to the slice through the base point where those variables
    /// are held fixed.
    pub fn fix_vars(&self, vars: &[usize]) -> Jet {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let e = &self.space.exponents[i];
            if vars.iter().any(|&v| e[v] > 0) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Largest coefficient modulus.
    pub fn max_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// True when every coefficient is below `tol` in modulus.
    pub fn is_zero_within(&self, tol: f64) -> bool {
        self.max_norm() <= tol
    }

    /// Re-expands the jet about `base + offset`, reading it as the exact
    /// polynomial its coefficients define. Exact for polynomial data of
    /// degree at most the space order.
    pub fn recenter(&self, offset: &[f64]) -> Result<Jet> {
        if offset.len() != self.space.n_vars {
            return Err(DtnError::InvalidInput(format!(
                "offset has {} components, expected {}",
                offset.len(),
                self.space.n_vars
            )));
        }
        let k = self.space.order;
        // powers[v][p] = (offset_v + h_v)^p
        let powers: Vec<Vec<Jet>> = offset
            .iter()
            .enumerate()
            .map(|(v, &o)| {
                let base = Jet::variable(&self.space, v, o);
                let mut ps = vec![Jet::constant(&self.space, 1.0)];
                for p in 1..=k {
                    let next = &ps[p - 1] * &base;
                    ps.push(next);
                }
                ps
            })
            .collect();
        let mut out = Jet::zero(&self.space);
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut term = Jet::constant(&self.space, *c);
            for (v, &p) in self.space.exponents[i].iter().enumerate() {
                if p > 0 {
                    term = &term * &powers[v][usize::from(p)];
                }
            }
            out += &term;
        }
        Ok(out.with_order(self.order))
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Jet) -> bool {
        Arc::ptr_eq(&self.space, &other.space)
            && self.order == other.order
            && self.coeffs == other.coeffs
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                self.$checked(rhs).expect("jet operands must share a space")
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        *self = &*self - rhs;
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
