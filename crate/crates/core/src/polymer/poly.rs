//! Real polynomials in up to three variables and harmonic polynomial families.

use std::collections::BTreeMap;

/// Sparse polynomial `sum c_e x^e0 y^e1 z^e2`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly {
    terms: BTreeMap<[u32; 3], f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial([0, 0, 0], 1.0)
    }

    pub fn monomial(e: [u32; 3], c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(e, c);
        p
    }

    /// The coordinate function `x_a`.
    pub fn var(a: usize) -> Self {
        let mut e = [0; 3];
        e[a] = 1;
        Self::monomial(e, 1.0)
    }

    fn add_term(&mut self, e: [u32; 3], c: f64) {
        if c == 0.0 {
            return;
        }
        let v = self.terms.entry(e).or_insert(0.0);
        *v += c;
        if *v == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut p = Self::zero();
        for (e, v) in &self.terms {
            p.add_term(*e, v * c);
        }
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (e, v) in &other.terms {
            p.add_term(*e, *v);
        }
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero();
        for (ea, va) in &self.terms {
            for (eb, vb) in &other.terms {
                p.add_term([ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]], va * vb);
            }
        }
        p
    }

    pub fn deriv(&self, a: usize) -> Self {
        let mut p = Self::zero();
        for (e, v) in &self.terms {
            if e[a] > 0 {
                let mut f = *e;
                f[a] -= 1;
                p.add_term(f, v * e[a] as f64);
            }
        }
        p
    }

    pub fn laplacian(&self, dim: usize) -> Self {
        (0..dim).fold(Self::zero(), |acc, a| acc.add(&self.deriv(a).deriv(a)))
    }

    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(e, v)| v * x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32))
            .sum()
    }

    /// Highest total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e[0] + e[1] + e[2]).max()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A homogeneous harmonic polynomial of degree `l`, tagged by its azimuthal
/// index `m` (positive: cosine type, negative: sine type).
#[derive(Debug, Clone)]
pub struct Harmonic {
    pub l: usize,
    pub m: i32,
    pub poly: Poly,
}

/// Basis of harmonic polynomials of degree `0..=lmax` in `dim` variables.
///
/// In two variables these are `Re (x + i y)^l` and `Im (x + i y)^l`; in three
/// they are the unnormalized real solid harmonics.
pub fn harmonics(dim: usize, lmax: usize) -> Vec<Harmonic> {
    match dim {
        2 => harmonics_2d(lmax),
        3 => harmonics_3d(lmax),
        _ => panic!("unsupported dimension {dim}"),
    }
}

fn harmonics_2d(lmax: usize) -> Vec<Harmonic> {
    let mut out = vec![Harmonic { l: 0, m: 0, poly: Poly::one() }];
    let (x, y) = (Poly::var(0), Poly::var(1));
    let (mut c, mut s) = (Poly::one(), Poly::zero());
    for l in 1..=lmax {
        let c1 = c.mul(&x).sub(&s.mul(&y));
        let s1 = s.mul(&x).add(&c.mul(&y));
        c = c1;
        s = s1;
        out.push(Harmonic { l, m: l as i32, poly: c.clone() });
        out.push(Harmonic { l, m: -(l as i32), poly: s.clone() });
    }
    out
}

fn harmonics_3d(lmax: usize) -> Vec<Harmonic> {
    let (x, y, z) = (Poly::var(0), Poly::var(1), Poly::var(2));
    let r2 = x.mul(&x).add(&y.mul(&y)).add(&z.mul(&z));
    // sectoral polynomials (x + i y)^m split into real and imaginary part
    let mut sect = vec![(Poly::one(), Poly::zero())];
    for m in 1..=lmax {
        let (c, s) = &sect[m - 1];
        sect.push((c.mul(&x).sub(&s.mul(&y)), s.mul(&x).add(&c.mul(&y))));
    }
    // Q[l][m] carries the z, r^2 dependence; harmonic = Q * sectoral part
    let mut q: Vec<Vec<Poly>> = vec![vec![Poly::zero(); lmax + 1]; lmax + 1];
    for m in 0..=lmax {
        q[m][m] = Poly::one();
        if m < lmax {
            q[m + 1][m] = z.scale((2 * m + 1) as f64);
        }
        for l in (m + 1)..lmax {
            let a = z.mul(&q[l][m]).scale((2 * l + 1) as f64);
            let b = r2.mul(&q[l - 1][m]).scale((l + m) as f64);
            q[l + 1][m] = a.sub(&b).scale(1.0 / (l + 1 - m) as f64);
        }
    }
    let mut out = Vec::new();
    for l in 0..=lmax {
        out.push(Harmonic { l, m: 0, poly: q[l][0].clone() });
        for m in 1..=l {
            out.push(Harmonic { l, m: m as i32, poly: q[l][m].mul(&sect[m].0) });
            out.push(Harmonic { l, m: -(m as i32), poly: q[l][m].mul(&sect[m].1) });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_monomial() {
        let p = Poly::monomial([3, 1, 0], 2.0);
        assert_eq!(p.deriv(0), Poly::monomial([2, 1, 0], 6.0));
        assert!(p.deriv(2).is_zero());
    }

    #[test]
    fn harmonic_counts() {
        assert_eq!(harmonics(2, 4).len(), 9);
        assert_eq!(harmonics(3, 4).len(), 25);
    }

    #[test]
    fn harmonics_are_harmonic_and_homogeneous() {
        for dim in [2, 3] {
            for h in harmonics(dim, 6) {
                let lap = h.poly.laplacian(dim);
                assert!(lap.max_coeff() <= 1e-9 * h.poly.max_coeff(), "dim {dim} l {} m {} not harmonic", h.l, h.m);
                assert_eq!(h.poly.degree(), Some(h.l as u32));
            }
        }
    }

    #[test]
    fn low_order_3d_harmonics() {
        // l = 2, m = 0 is 3 z^2 - r^2 up to a factor
        let h = harmonics(3, 2);
        let p = &h.iter().find(|h| h.l == 2 && h.m == 0).unwrap().poly;
        let v = p.eval(&[0.0, 0.0, 1.0]);
        let w = p.eval(&[1.0, 0.0, 0.0]);
        assert!((v / w + 2.0).abs() < 1e-14);
    }
}
