//! Exact finite-alphabet probability arithmetic.
//!
//! Symbols are indices `0..size`. Multi-axis arrays are stored row-major with
//! the last axis varying fastest. Axes are identified by name, so kernels can
//! be composed onto joints without positional bookkeeping:
//!
//! ```
//! use twosided::prob::{Alphabet, ConditionalKernel, JointDist, compose_joint, mutual_information};
//!
//! let x = Alphabet::new("x", 2).unwrap();
//! let y = Alphabet::new("y", 2).unwrap();
//! let px = JointDist::new(vec![x.clone()], vec![0.5, 0.5]).unwrap();
//! let bsc = ConditionalKernel::new(vec![x], y, vec![0.9, 0.1, 0.1, 0.9]).unwrap();
//! let joint = compose_joint(&px, &bsc).unwrap();
//! let mi = mutual_information(&joint).unwrap();
//! assert!((mi - 0.531004406).abs() < 1e-8);
//! ```
//!
//! All logarithms are base 2; every functional is reported in bits.

use crate::error::{Error, Result};

/// Normalization tolerance applied to every distribution on input.
pub const NORM_TOL: f64 = 1e-9;

/// Largest number of axes a joint distribution may carry.
pub const MAX_AXES: usize = 6;

/// A named finite alphabet `{0, .., size-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    name: String,
    size: usize,
}

impl Alphabet {
    pub fn new(name: impl Into<String>, size: usize) -> Result<Self> {
        let name = name.into();
        if size == 0 {
            return Err(Error::InvalidArgument(format!(
                "alphabet `{name}` must have at least one symbol"
            )));
        }
        if name.is_empty() {
            return Err(Error::InvalidArgument("alphabet name is empty".into()));
        }
        Ok(Alphabet { name, size })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Same symbols under a different name.
    pub fn renamed(&self, name: impl Into<String>) -> Alphabet {
        Alphabet {
            name: name.into(),
            size: self.size,
        }
    }
}

fn check_mass(what: &str, mass: &[f64]) -> Result<()> {
    let mut total = 0.0;
    for (i, &p) in mass.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::invalid_dist(
                what,
                format!("entry {i} is not finite"),
            ));
        }
        if p < 0.0 {
            return Err(Error::invalid_dist(
                what,
                format!("entry {i} is negative ({p})"),
            ));
        }
        total += p;
    }
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::invalid_dist(
            what,
            format!("total mass {total} differs from 1 by more than {NORM_TOL}"),
        ));
    }
    Ok(())
}

/// `-p log2 p` with `0 log 0 = 0`.
#[inline]
pub(crate) fn neg_plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Entropy in bits of a nonnegative vector summing to one.
#[inline]
pub(crate) fn entropy_of(mass: &[f64]) -> f64 {
    mass.iter().map(|&p| neg_plogp(p)).sum()
}

pub(crate) fn product(sizes: &[usize]) -> usize {
    sizes.iter().product()
}

/// Row-major flat index of a multi-index.
#[inline]
pub(crate) fn flat_index(sizes: &[usize], idx: &[usize]) -> usize {
    let mut flat = 0;
    for (s, i) in sizes.iter().zip(idx) {
        flat = flat * s + i;
    }
    flat
}

/// Advances a row-major multi-index; returns false after the last one.
#[inline]
pub(crate) fn advance(sizes: &[usize], idx: &mut [usize]) -> bool {
    for k in (0..sizes.len()).rev() {
        idx[k] += 1;
        if idx[k] < sizes[k] {
            return true;
        }
        idx[k] = 0;
    }
    false
}

/// A distribution over one alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist {
    alphabet: Alphabet,
    mass: Vec<f64>,
}

impl Dist {
    pub fn new(alphabet: Alphabet, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != alphabet.size() {
            return Err(Error::invalid_dist(
                alphabet.name(),
                format!(
                    "{} entries for an alphabet of size {}",
                    mass.len(),
                    alphabet.size()
                ),
            ));
        }
        check_mass(alphabet.name(), &mass)?;
        Ok(Dist { alphabet, mass })
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let n = alphabet.size();
        Dist {
            alphabet,
            mass: vec![1.0 / n as f64; n],
        }
    }

    pub fn point(alphabet: Alphabet, symbol: usize) -> Result<Self> {
        if symbol >= alphabet.size() {
            return Err(Error::InvalidArgument(format!(
                "symbol {symbol} outside alphabet `{}`",
                alphabet.name()
            )));
        }
        let mut mass = vec![0.0; alphabet.size()];
        mass[symbol] = 1.0;
        Ok(Dist { alphabet, mass })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn into_joint(self) -> JointDist {
        JointDist {
            axes: vec![self.alphabet],
            mass: self.mass,
        }
    }
}

/// Entropy `H(p)` in bits.
pub fn entropy(p: &Dist) -> f64 {
    entropy_of(&p.mass)
}

/// A joint distribution over named axes.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    axes: Vec<Alphabet>,
    mass: Vec<f64>,
}

fn check_axes(axes: &[Alphabet]) -> Result<()> {
    if axes.is_empty() || axes.len() > MAX_AXES {
        return Err(Error::AxisMismatch(format!(
            "a joint needs between 1 and {MAX_AXES} axes, got {}",
            axes.len()
        )));
    }
    for (i, a) in axes.iter().enumerate() {
        if axes[..i].iter().any(|b| b.name() == a.name()) {
            return Err(Error::AxisMismatch(format!(
                "duplicate axis `{}`",
                a.name()
            )));
        }
    }
    Ok(())
}

impl JointDist {
    pub fn new(axes: Vec<Alphabet>, mass: Vec<f64>) -> Result<Self> {
        check_axes(&axes)?;
        let sizes: Vec<usize> = axes.iter().map(Alphabet::size).collect();
        let what = axes
            .iter()
            .map(Alphabet::name)
            .collect::<Vec<_>>()
            .join(",");
        if mass.len() != product(&sizes) {
            return Err(Error::invalid_dist(
                what,
                format!("{} entries for shape {sizes:?}", mass.len()),
            ));
        }
        check_mass(&what, &mass)?;
        Ok(JointDist { axes, mass })
    }

    /// Product distribution of independent factors.
    pub fn product_of(factors: &[Dist]) -> Result<Self> {
        let axes: Vec<Alphabet> = factors.iter().map(|d| d.alphabet.clone()).collect();
        check_axes(&axes)?;
        let sizes: Vec<usize> = axes.iter().map(Alphabet::size).collect();
        let mut mass = Vec::with_capacity(product(&sizes));
        let mut idx = vec![0; sizes.len()];
        loop {
            mass.push(factors.iter().zip(&idx).map(|(d, &i)| d.mass[i]).product());
            if !advance(&sizes, &mut idx) {
                break;
            }
        }
        JointDist::new(axes, mass)
    }

    pub fn axes(&self) -> &[Alphabet] {
        &self.axes
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Alphabet::size).collect()
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name() == name)
            .ok_or_else(|| Error::AxisMismatch(format!("no axis named `{name}`")))
    }

    pub fn axis(&self, name: &str) -> Result<&Alphabet> {
        Ok(&self.axes[self.axis_index(name)?])
    }

    /// Probability of one multi-index (axis order).
    pub fn prob(&self, idx: &[usize]) -> f64 {
        self.mass[flat_index(&self.shape(), idx)]
    }

    /// Sums out every axis not in `keep`; the result has axes in `keep` order.
    pub fn marginalize(&self, keep: &[&str]) -> Result<JointDist> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument(
                "marginalize needs at least one axis to keep".into(),
            ));
        }
        let positions = keep
            .iter()
            .map(|n| self.axis_index(n))
            .collect::<Result<Vec<_>>>()?;
        let axes: Vec<Alphabet> = positions.iter().map(|&p| self.axes[p].clone()).collect();
        check_axes(&axes)?;
        let in_sizes = self.shape();
        let out_sizes: Vec<usize> = axes.iter().map(Alphabet::size).collect();
        let mut out = vec![0.0; product(&out_sizes)];
        let mut idx = vec![0; in_sizes.len()];
        let mut sub = vec![0; positions.len()];
        for &m in &self.mass {
            for (s, &p) in sub.iter_mut().zip(&positions) {
                *s = idx[p];
            }
            out[flat_index(&out_sizes, &sub)] += m;
            advance(&in_sizes, &mut idx);
        }
        Ok(JointDist { axes, mass: out })
    }

    /// Collapses groups of axes into single product axes named `a,b,..`.
    pub fn merge(&self, groups: &[&[&str]]) -> Result<JointDist> {
        let order: Vec<&str> = groups.iter().flat_map(|g| g.iter().copied()).collect();
        if groups.iter().any(|g| g.is_empty()) {
            return Err(Error::InvalidArgument("empty axis group".into()));
        }
        let m = self.marginalize(&order)?;
        let mut axes = Vec::with_capacity(groups.len());
        for g in groups {
            let mut size = 1;
            for n in g.iter() {
                size *= m.axis(n)?.size();
            }
            axes.push(Alphabet {
                name: g.join(","),
                size,
            });
        }
        check_axes(&axes)?;
        Ok(JointDist { axes, mass: m.mass })
    }

    /// Joint entropy of all axes.
    pub fn entropy(&self) -> f64 {
        entropy_of(&self.mass)
    }

    /// Entropy of the sub-vector on `names`.
    pub fn entropy_of(&self, names: &[&str]) -> Result<f64> {
        Ok(self.marginalize(names)?.entropy())
    }

    /// `H(target | given)`; an empty `given` yields `H(target)`.
    pub fn conditional_entropy(&self, target: &[&str], given: &[&str]) -> Result<f64> {
        let both: Vec<&str> = given.iter().chain(target).copied().collect();
        let h_both = self.entropy_of(&both)?;
        let h_given = if given.is_empty() {
            0.0
        } else {
            self.entropy_of(given)?
        };
        Ok(h_both - h_given)
    }

    /// `I(A;B)` between two groups of axes.
    pub fn mutual_information_between(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        mutual_information(&self.merge(&[a, b])?)
    }

    /// `I(A;B|C)` between groups of axes.
    pub fn conditional_mutual_information_between(
        &self,
        a: &[&str],
        b: &[&str],
        c: &[&str],
    ) -> Result<f64> {
        conditional_mutual_information(&self.merge(&[a, b, c])?)
    }

    /// Single-axis view as a [`Dist`].
    pub fn to_dist(&self) -> Result<Dist> {
        if self.axes.len() != 1 {
            return Err(Error::AxisMismatch(format!(
                "expected one axis, found {}",
                self.axes.len()
            )));
        }
        Ok(Dist {
            alphabet: self.axes[0].clone(),
            mass: self.mass.clone(),
        })
    }
}

/// Sums out every axis of `j` not listed in `keep`.
pub fn marginalize(j: &JointDist, keep: &[&str]) -> Result<JointDist> {
    j.marginalize(keep)
}

/// `I(A;B)` of a two-axis joint.
pub fn mutual_information(j: &JointDist) -> Result<f64> {
    if j.axes.len() != 2 {
        return Err(Error::AxisMismatch(format!(
            "mutual information needs 2 axes, found {}",
            j.axes.len()
        )));
    }
    let (na, nb) = (j.axes[0].size(), j.axes[1].size());
    let mut pa = vec![0.0; na];
    let mut pb = vec![0.0; nb];
    for a in 0..na {
        for b in 0..nb {
            let m = j.mass[a * nb + b];
            pa[a] += m;
            pb[b] += m;
        }
    }
    let mut mi = 0.0;
    for a in 0..na {
        for b in 0..nb {
            let m = j.mass[a * nb + b];
            if m > 0.0 {
                mi += m * (m / (pa[a] * pb[b])).log2();
            }
        }
    }
    Ok(mi)
}

/// `I(A;B|C)` of a three-axis joint whose last axis is the conditioning one.
pub fn conditional_mutual_information(j: &JointDist) -> Result<f64> {
    if j.axes.len() != 3 {
        return Err(Error::AxisMismatch(format!(
            "conditional mutual information needs 3 axes, found {}",
            j.axes.len()
        )));
    }
    let (na, nb, nc) = (j.axes[0].size(), j.axes[1].size(), j.axes[2].size());
    let at = |a: usize, b: usize, c: usize| j.mass[(a * nb + b) * nc + c];
    let mut pc = vec![0.0; nc];
    let mut pac = vec![0.0; na * nc];
    let mut pbc = vec![0.0; nb * nc];
    for a in 0..na {
        for b in 0..nb {
            for c in 0..nc {
                let m = at(a, b, c);
                pc[c] += m;
                pac[a * nc + c] += m;
                pbc[b * nc + c] += m;
            }
        }
    }
    let mut cmi = 0.0;
    for a in 0..na {
        for b in 0..nb {
            for c in 0..nc {
                let m = at(a, b, c);
                if m > 0.0 {
                    cmi += m * (m * pc[c] / (pac[a * nc + c] * pbc[b * nc + c])).log2();
                }
            }
        }
    }
    Ok(cmi)
}

/// A row-stochastic kernel `p(to | from_axes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalKernel {
    from_axes: Vec<Alphabet>,
    to_axis: Alphabet,
    rows: Vec<f64>,
}

impl ConditionalKernel {
    /// `rows` is flat: one block of `to_axis.size()` entries per conditioning
    /// tuple, tuples in row-major order of `from_axes`.
    pub fn new(from_axes: Vec<Alphabet>, to_axis: Alphabet, rows: Vec<f64>) -> Result<Self> {
        let mut all = from_axes.clone();
        all.push(to_axis.clone());
        check_axes(&all)?;
        let n_rows = product(&from_axes.iter().map(Alphabet::size).collect::<Vec<_>>());
        let width = to_axis.size();
        if rows.len() != n_rows * width {
            return Err(Error::invalid_dist(
                format!("{}|kernel", to_axis.name()),
                format!("{} entries, expected {}", rows.len(), n_rows * width),
            ));
        }
        for r in 0..n_rows {
            check_mass(
                &format!("{} row {r}", to_axis.name()),
                &rows[r * width..(r + 1) * width],
            )?;
        }
        Ok(ConditionalKernel {
            from_axes,
            to_axis,
            rows,
        })
    }

    pub fn uniform(from_axes: Vec<Alphabet>, to_axis: Alphabet) -> Result<Self> {
        let n_rows = product(&from_axes.iter().map(Alphabet::size).collect::<Vec<_>>());
        let w = to_axis.size();
        ConditionalKernel::new(from_axes, to_axis, vec![1.0 / w as f64; n_rows * w])
    }

    pub fn from_axes(&self) -> &[Alphabet] {
        &self.from_axes
    }

    pub fn to_axis(&self) -> &Alphabet {
        &self.to_axis
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len() / self.to_axis.size()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.to_axis.size();
        &self.rows[r * w..(r + 1) * w]
    }

    pub fn row_index(&self, from: &[usize]) -> usize {
        let sizes: Vec<usize> = self.from_axes.iter().map(Alphabet::size).collect();
        flat_index(&sizes, from)
    }

    pub fn prob(&self, from: &[usize], to: usize) -> f64 {
        self.row(self.row_index(from))[to]
    }

    /// The same kernel with conditioning axes listed in `order`.
    pub fn reorder(&self, order: &[&str]) -> Result<ConditionalKernel> {
        if order.len() != self.from_axes.len() {
            return Err(Error::AxisMismatch(format!(
                "reorder lists {} axes, kernel has {}",
                order.len(),
                self.from_axes.len()
            )));
        }
        let positions = order
            .iter()
            .map(|n| {
                self.from_axes
                    .iter()
                    .position(|a| a.name() == *n)
                    .ok_or_else(|| Error::AxisMismatch(format!("kernel has no input axis `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let new_axes: Vec<Alphabet> = positions
            .iter()
            .map(|&p| self.from_axes[p].clone())
            .collect();
        check_axes(&new_axes)?;
        let new_sizes: Vec<usize> = new_axes.iter().map(Alphabet::size).collect();
        let w = self.to_axis.size();
        let mut rows = vec![0.0; self.rows.len()];
        let mut idx = vec![0; new_sizes.len()];
        let mut old = vec![0; new_sizes.len()];
        if !new_sizes.is_empty() {
            loop {
                for (k, &p) in positions.iter().enumerate() {
                    old[p] = idx[k];
                }
                let src = self.row_index(&old);
                let dst = flat_index(&new_sizes, &idx);
                rows[dst * w..(dst + 1) * w].copy_from_slice(self.row(src));
                if !advance(&new_sizes, &mut idx) {
                    break;
                }
            }
        } else {
            rows.copy_from_slice(&self.rows);
        }
        Ok(ConditionalKernel {
            from_axes: new_axes,
            to_axis: self.to_axis.clone(),
            rows,
        })
    }
}

/// A deterministic function from conditioning tuples to output symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicMap {
    from_axes: Vec<Alphabet>,
    to_axis: Alphabet,
    table: Vec<usize>,
}

impl DeterministicMap {
    pub fn new(from_axes: Vec<Alphabet>, to_axis: Alphabet, table: Vec<usize>) -> Result<Self> {
        let mut all = from_axes.clone();
        all.push(to_axis.clone());
        check_axes(&all)?;
        let n = product(&from_axes.iter().map(Alphabet::size).collect::<Vec<_>>());
        if table.len() != n {
            return Err(Error::InvalidArgument(format!(
                "map table has {} entries, expected {n}",
                table.len()
            )));
        }
        if let Some(bad) = table.iter().find(|&&t| t >= to_axis.size()) {
            return Err(Error::InvalidArgument(format!(
                "map output {bad} outside alphabet `{}`",
                to_axis.name()
            )));
        }
        Ok(DeterministicMap {
            from_axes,
            to_axis,
            table,
        })
    }

    pub fn from_axes(&self) -> &[Alphabet] {
        &self.from_axes
    }

    pub fn to_axis(&self) -> &Alphabet {
        &self.to_axis
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn apply(&self, from: &[usize]) -> usize {
        let sizes: Vec<usize> = self.from_axes.iter().map(Alphabet::size).collect();
        self.table[flat_index(&sizes, from)]
    }

    /// The 0/1 kernel this map induces.
    pub fn to_kernel(&self) -> ConditionalKernel {
        let w = self.to_axis.size();
        let mut rows = vec![0.0; self.table.len() * w];
        for (r, &t) in self.table.iter().enumerate() {
            rows[r * w + t] = 1.0;
        }
        ConditionalKernel {
            from_axes: self.from_axes.clone(),
            to_axis: self.to_axis.clone(),
            rows,
        }
    }
}

/// Appends `k`'s output axis to `base`: mass `base(..) * k(to | from)`.
pub fn compose_joint(base: &JointDist, k: &ConditionalKernel) -> Result<JointDist> {
    let positions = k
        .from_axes
        .iter()
        .map(|a| {
            let p = base.axis_index(a.name())?;
            if base.axes[p].size() != a.size() {
                return Err(Error::AxisMismatch(format!(
                    "axis `{}` has size {} in the joint but {} in the kernel",
                    a.name(),
                    base.axes[p].size(),
                    a.size()
                )));
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    if base.axis_index(k.to_axis.name()).is_ok() {
        return Err(Error::AxisMismatch(format!(
            "joint already has an axis named `{}`",
            k.to_axis.name()
        )));
    }
    let mut axes = base.axes.clone();
    axes.push(k.to_axis.clone());
    check_axes(&axes)?;
    let sizes = base.shape();
    let w = k.to_axis.size();
    let mut mass = Vec::with_capacity(base.mass.len() * w);
    let mut idx = vec![0; sizes.len()];
    let mut from = vec![0; positions.len()];
    for &m in &base.mass {
        for (f, &p) in from.iter_mut().zip(&positions) {
            *f = idx[p];
        }
        let row = k.row(k.row_index(&from));
        mass.extend(row.iter().map(|&r| m * r));
        advance(&sizes, &mut idx);
    }
    Ok(JointDist { axes, mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn a(name: &str, n: usize) -> Alphabet {
        Alphabet::new(name, n).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let b = a("x", 2);
        assert_abs_diff_eq!(entropy(&Dist::uniform(b.clone())), 1.0, epsilon = 1e-15);
        assert_eq!(entropy(&Dist::new(b.clone(), vec![1.0, 0.0]).unwrap()), 0.0);
        // mpmath, 30 digits: 0.468995593589281221253589330383
        let h = entropy(&Dist::new(b, vec![0.9, 0.1]).unwrap());
        assert_abs_diff_eq!(h, 0.468_995_593_589_281_2, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_mass() {
        let b = a("x", 2);
        assert!(Dist::new(b.clone(), vec![1.1, -0.1]).is_err());
        assert!(Dist::new(b.clone(), vec![0.5, 0.5 + 2e-9]).is_err());
        assert!(Dist::new(b.clone(), vec![0.5, 0.5 + 5e-10]).is_ok());
        assert!(Dist::new(b, vec![f64::NAN, 1.0]).is_err());
        assert!(Alphabet::new("z", 0).is_err());
    }

    #[test]
    fn mutual_information_examples() {
        let (x, y) = (a("x", 2), a("y", 2));
        let prod = JointDist::new(vec![x.clone(), y.clone()], vec![0.25; 4]).unwrap();
        assert_abs_diff_eq!(mutual_information(&prod).unwrap(), 0.0, epsilon = 1e-15);
        let copy = JointDist::new(vec![x.clone(), y.clone()], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_abs_diff_eq!(mutual_information(&copy).unwrap(), 1.0, epsilon = 1e-15);
        let bsc = JointDist::new(vec![x, y], vec![0.45, 0.05, 0.05, 0.45]).unwrap();
        assert_abs_diff_eq!(
            mutual_information(&bsc).unwrap(),
            0.531_004_406_410_718_8,
            epsilon = 1e-13
        );
        assert!(mutual_information(&bsc.marginalize(&["x"]).unwrap()).is_err());
    }

    #[test]
    fn conditional_mi_examples() {
        let (x, y, c) = (a("a", 2), a("b", 2), a("c", 2));
        // A = B = C uniform
        let mut m = vec![0.0; 8];
        m[0] = 0.5;
        m[7] = 0.5;
        let j = JointDist::new(vec![x.clone(), y.clone(), c.clone()], m).unwrap();
        assert_abs_diff_eq!(
            conditional_mutual_information(&j).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        // C independent of a correlated (A,B)
        let ab = [0.4, 0.1, 0.1, 0.4];
        let pc = [0.3, 0.7];
        let mass: Vec<f64> = (0..8).map(|i| ab[i / 2] * pc[i % 2]).collect();
        let j = JointDist::new(vec![x, y, c], mass).unwrap();
        let cmi = conditional_mutual_information(&j).unwrap();
        let mi = mutual_information(&j.marginalize(&["a", "b"]).unwrap()).unwrap();
        assert_abs_diff_eq!(cmi, mi, epsilon = 1e-14);
    }

    #[test]
    fn compose_and_marginalize() {
        let (s1, s2, x, y) = (a("s1", 2), a("s2", 2), a("x", 2), a("y", 2));
        let ps = JointDist::new(vec![s1.clone(), s2.clone()], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let px =
            ConditionalKernel::new(vec![s1.clone()], x.clone(), vec![0.6, 0.4, 0.2, 0.8]).unwrap();
        let j = compose_joint(&ps, &px).unwrap();
        // p(s1=1,s2=0,x=1) = 0.3 * 0.8
        assert_abs_diff_eq!(j.prob(&[1, 0, 1]), 0.24, epsilon = 1e-15);
        let ch = ConditionalKernel::uniform(vec![x, s1, s2], y).unwrap();
        let full = compose_joint(&j, &ch).unwrap();
        assert_abs_diff_eq!(full.mass().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        let back = full.marginalize(&["s1", "s2"]).unwrap();
        for (p, q) in back.mass().iter().zip(ps.mass()) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-15);
        }
        assert!(full.marginalize(&[]).is_err());
        assert!(compose_joint(&full, &px).is_err());
    }

    #[test]
    fn marginalize_reorders() {
        let (p, q) = (a("p", 2), a("q", 3));
        let j = JointDist::new(vec![p, q], vec![0.1, 0.2, 0.3, 0.05, 0.15, 0.2]).unwrap();
        let t = j.marginalize(&["q", "p"]).unwrap();
        assert_eq!(t.axes()[0].name(), "q");
        assert_abs_diff_eq!(t.prob(&[2, 1]), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(t.prob(&[0, 1]), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn kernel_reorder_round_trip() {
        let (x, s, y) = (a("x", 2), a("s", 3), a("y", 2));
        let rows: Vec<f64> = (0..6)
            .flat_map(|r| {
                let p = (r as f64 + 1.0) / 8.0;
                [p, 1.0 - p]
            })
            .collect();
        let k = ConditionalKernel::new(vec![x, s], y, rows).unwrap();
        let r = k.reorder(&["s", "x"]).unwrap();
        assert_abs_diff_eq!(r.prob(&[2, 1], 0), k.prob(&[1, 2], 0), epsilon = 0.0);
        assert_eq!(r.reorder(&["x", "s"]).unwrap(), k);
    }

    #[test]
    fn deterministic_map_kernel() {
        let (u, s, x) = (a("u", 2), a("s1", 2), a("x", 3));
        let m = DeterministicMap::new(vec![u, s], x, vec![0, 2, 1, 1]).unwrap();
        let k = m.to_kernel();
        assert_eq!(k.row(1), &[0.0, 0.0, 1.0]);
        assert_eq!(m.apply(&[1, 0]), 1);
        assert!(DeterministicMap::new(vec![a("u", 1)], a("x", 2), vec![2]).is_err());
    }
}
