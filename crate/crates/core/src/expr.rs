//! Structured scalar expressions over a vector of decision variables.
//!
//! An [`Expr`] is an affine part plus a sum of rank-one curvature atoms, so
//! values, gradients and Hessians all come out in closed form. An expression
//! is convex when every atom coefficient is non-negative.

use std::fmt;

use crate::num::Scalar;

/// `constant + sum(coeff * x[var])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine<T> {
    pub constant: T,
    pub terms: Vec<(usize, T)>,
}

impl<T: Scalar> Affine<T> {
    pub fn constant(c: T) -> Self {
        Self { constant: c, terms: Vec::new() }
    }

    pub fn var(index: usize) -> Self {
        Self { constant: T::zero(), terms: vec![(index, T::one())] }
    }

    pub fn with_term(mut self, index: usize, coeff: T) -> Self {
        self.terms.push((index, coeff));
        self
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            constant: self.constant * s,
            terms: self.terms.iter().map(|&(i, c)| (i, c * s)).collect(),
        }
    }

    /// `self + other`.
    pub fn plus(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self { constant: self.constant + other.constant, terms }
    }

    pub fn eval(&self, x: &[T]) -> T {
        self.terms.iter().fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }

    fn support(&self, out: &mut Vec<usize>) {
        out.extend(self.terms.iter().map(|&(i, _)| i));
    }
}

/// One curvature term. Every atom has a rank-one Hessian.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom<T> {
    /// `coeff / arg`, domain `arg > 0`.
    Reciprocal { coeff: T, arg: Affine<T> },
    /// `coeff * num^2 / den`, domain `den > 0`.
    QuadOverLin { coeff: T, num: Affine<T>, den: Affine<T> },
    /// `coeff * arg^2`.
    Square { coeff: T, arg: Affine<T> },
    /// `coeff * exp(arg)`, domain: finite value.
    Exp { coeff: T, arg: Affine<T> },
}

impl<T: Scalar> Atom<T> {
    pub fn coeff(&self) -> T {
        match self {
            Self::Reciprocal { coeff, .. }
            | Self::QuadOverLin { coeff, .. }
            | Self::Square { coeff, .. }
            | Self::Exp { coeff, .. } => *coeff,
        }
    }

    fn negated(&self) -> Self {
        match self {
            Self::Reciprocal { coeff, arg } => Self::Reciprocal { coeff: -*coeff, arg: arg.clone() },
            Self::QuadOverLin { coeff, num, den } => Self::QuadOverLin { coeff: -*coeff, num: num.clone(), den: den.clone() },
            Self::Square { coeff, arg } => Self::Square { coeff: -*coeff, arg: arg.clone() },
            Self::Exp { coeff, arg } => Self::Exp { coeff: -*coeff, arg: arg.clone() },
        }
    }

    /// `None` outside the domain.
    pub fn eval(&self, x: &[T]) -> Option<T> {
        match self {
            Self::Reciprocal { coeff, arg } => {
                let a = arg.eval(x);
                (a > T::zero()).then(|| *coeff / a)
            }
            Self::QuadOverLin { coeff, num, den } => {
                let d = den.eval(x);
                let q = num.eval(x);
                (d > T::zero()).then(|| *coeff * q * q / d)
            }
            Self::Square { coeff, arg } => {
                let a = arg.eval(x);
                Some(*coeff * a * a)
            }
            Self::Exp { coeff, arg } => {
                let v = *coeff * arg.eval(x).exp();
                v.is_finite().then_some(v)
            }
        }
    }

    fn support(&self, out: &mut Vec<usize>) {
        match self {
            Self::Reciprocal { arg, .. } | Self::Square { arg, .. } | Self::Exp { arg, .. } => arg.support(out),
            Self::QuadOverLin { num, den, .. } => {
                num.support(out);
                den.support(out);
            }
        }
    }
}

/// Affine part plus curvature atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr<T> {
    pub affine: Affine<T>,
    pub atoms: Vec<Atom<T>>,
}

impl<T: Scalar> From<Affine<T>> for Expr<T> {
    fn from(affine: Affine<T>) -> Self {
        Self { affine, atoms: Vec::new() }
    }
}

impl<T: Scalar> Expr<T> {
    pub fn zero() -> Self {
        Affine::constant(T::zero()).into()
    }

    pub fn neg(&self) -> Self {
        Self {
            affine: self.affine.scaled(-T::one()),
            atoms: self.atoms.iter().map(Atom::negated).collect(),
        }
    }

    pub fn plus(mut self, other: &Self) -> Self {
        self.affine = self.affine.plus(&other.affine);
        self.atoms.extend(other.atoms.iter().cloned());
        self
    }

    pub fn plus_affine(mut self, a: &Affine<T>) -> Self {
        self.affine = self.affine.plus(a);
        self
    }

    pub fn is_convex(&self) -> bool {
        self.atoms.iter().all(|a| a.coeff() >= T::zero())
    }

    pub fn eval(&self, x: &[T]) -> Option<T> {
        self.atoms
            .iter()
            .try_fold(self.affine.eval(x), |acc, atom| atom.eval(x).map(|v| acc + v))
    }

    /// Sorted, de-duplicated variable indices the expression depends on.
    pub fn support(&self) -> Vec<usize> {
        let mut s = Vec::new();
        self.affine.support(&mut s);
        for a in &self.atoms {
            a.support(&mut s);
        }
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Dense gradient of length `n`.
    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        let support: Vec<usize> = (0..x.len()).collect();
        let mut local = LocalDerivatives::new(support.len());
        self.derivatives(x, &support, &mut local);
        local.grad
    }

    /// Dense Hessian (row-major `n x n`).
    pub fn hessian(&self, x: &[T]) -> Vec<T> {
        let n = x.len();
        let support: Vec<usize> = (0..n).collect();
        let mut local = LocalDerivatives::new(n);
        self.derivatives(x, &support, &mut local);
        let mut h = vec![T::zero(); n * n];
        for (kappa, v) in &local.curvature {
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = h[i * n + j] + *kappa * v[i] * v[j];
                }
            }
        }
        h
    }

    /// Value, gradient and rank-one Hessian factors restricted to `support`
    /// (which must contain every index the expression uses). Returns `None`
    /// outside the domain.
    pub fn derivatives(&self, x: &[T], support: &[usize], out: &mut LocalDerivatives<T>) -> Option<T> {
        out.reset(support.len());
        let pos = |i: usize| support.binary_search(&i).expect("index in support");
        let mut value = self.affine.eval(x);
        for &(i, c) in &self.affine.terms {
            let p = pos(i);
            out.grad[p] = out.grad[p] + c;
        }
        let dense = |a: &Affine<T>| {
            let mut v = vec![T::zero(); support.len()];
            for &(i, c) in &a.terms {
                let p = pos(i);
                v[p] = v[p] + c;
            }
            v
        };
        let two = T::lit(2.0);
        for atom in &self.atoms {
            match atom {
                Atom::Reciprocal { coeff, arg } => {
                    let a = arg.eval(x);
                    if !(a > T::zero()) {
                        return None;
                    }
                    value = value + *coeff / a;
                    let g = dense(arg);
                    let s = -*coeff / (a * a);
                    for (o, gi) in out.grad.iter_mut().zip(&g) {
                        *o = *o + s * *gi;
                    }
                    out.curvature.push((two * *coeff / (a * a * a), g));
                }
                Atom::QuadOverLin { coeff, num, den } => {
                    let d = den.eval(x);
                    if !(d > T::zero()) {
                        return None;
                    }
                    let q = num.eval(x);
                    let r = q / d;
                    value = value + *coeff * q * r;
                    let gq = dense(num);
                    let gd = dense(den);
                    let w: Vec<T> = gq.iter().zip(&gd).map(|(&a, &b)| a - r * b).collect();
                    for ((o, a), b) in out.grad.iter_mut().zip(&gq).zip(&gd) {
                        *o = *o + *coeff * (two * r * *a - r * r * *b);
                    }
                    out.curvature.push((two * *coeff / d, w));
                }
                Atom::Square { coeff, arg } => {
                    let a = arg.eval(x);
                    value = value + *coeff * a * a;
                    let g = dense(arg);
                    for (o, gi) in out.grad.iter_mut().zip(&g) {
                        *o = *o + two * *coeff * a * *gi;
                    }
                    out.curvature.push((two * *coeff, g));
                }
                Atom::Exp { coeff, arg } => {
                    let e = *coeff * arg.eval(x).exp();
                    if !e.is_finite() {
                        return None;
                    }
                    value = value + e;
                    let g = dense(arg);
                    for (o, gi) in out.grad.iter_mut().zip(&g) {
                        *o = *o + e * *gi;
                    }
                    out.curvature.push((e, g));
                }
            }
        }
        Some(value)
    }
}

/// Scratch space for [`Expr::derivatives`]: gradient on the support and
/// Hessian as `sum(kappa * v v^T)`.
#[derive(Debug, Clone, Default)]
pub struct LocalDerivatives<T> {
    pub grad: Vec<T>,
    pub curvature: Vec<(T, Vec<T>)>,
}

impl<T: Scalar> LocalDerivatives<T> {
    pub fn new(n: usize) -> Self {
        Self { grad: vec![T::zero(); n], curvature: Vec::new() }
    }

    fn reset(&mut self, n: usize) {
        self.grad.clear();
        self.grad.resize(n, T::zero());
        self.curvature.clear();
    }
}

fn fmt_affine<T: Scalar>(a: &Affine<T>, names: &dyn Fn(usize) -> String, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "{:e}", a.constant)?;
    for &(i, c) in &a.terms {
        write!(f, " + {:e}*{}", c, names(i))?;
    }
    Ok(())
}

/// Human-readable rendering with variable names, one term per segment.
pub struct Named<'a, T> {
    pub expr: &'a Expr<T>,
    pub names: &'a dyn Fn(usize) -> String,
}

impl<T: Scalar> fmt::Display for Named<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_affine(&self.expr.affine, self.names, f)?;
        for atom in &self.expr.atoms {
            match atom {
                Atom::Reciprocal { coeff, arg } => {
                    write!(f, " + {coeff:e}/(")?;
                    fmt_affine(arg, self.names, f)?;
                    write!(f, ")")?;
                }
                Atom::QuadOverLin { coeff, num, den } => {
                    write!(f, " + {coeff:e}*(")?;
                    fmt_affine(num, self.names, f)?;
                    write!(f, ")^2/(")?;
                    fmt_affine(den, self.names, f)?;
                    write!(f, ")")?;
                }
                Atom::Square { coeff, arg } => {
                    write!(f, " + {coeff:e}*(")?;
                    fmt_affine(arg, self.names, f)?;
                    write!(f, ")^2")?;
                }
                Atom::Exp { coeff, arg } => {
                    write!(f, " + {coeff:e}*exp(")?;
                    fmt_affine(arg, self.names, f)?;
                    write!(f, ")")?;
                }
            }
        }
        Ok(())
    }
}
