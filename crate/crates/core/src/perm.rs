//! Finite permutation groups stored as explicit element sets.
//!
//! Points are 0-based internally and 1-based in cycle notation. Two products
//! are available:
//!
//! * [`Permutation::compose`]: `(a∘b)(i) = a(b(i))`, ordinary function
//!   composition.
//! * [`Permutation::then`]: `a.then(b) = b∘a`, apply `a` first. This is the
//!   product under which right cosets `Hσ` and the induced action on them
//!   are written, and under which `(Qσ)τ = Q(στ)` for the right action on
//!   quasi-means.
//!
//! ρ_H is a homomorphism with respect to either product, as long as the same
//! one is used on both sides.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

/// Largest degree for which whole-group enumeration is allowed.
pub const MAX_ENUM_DEGREE: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            image: (0..n).collect(),
        }
    }

    /// From 0-based images; `image[i] = σ(i)`.
    pub fn from_images(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &x in &image {
            if x >= n || seen[x] {
                return Err(Error::InvalidPermutation(format!(
                    "{image:?} is not a bijection on 0..{n}"
                )));
            }
            seen[x] = true;
        }
        Ok(Permutation { image })
    }

    /// From 1-based images, as permutations are usually written by hand.
    pub fn from_one_based(image: &[usize]) -> Result<Self> {
        if image.contains(&0) {
            return Err(Error::InvalidPermutation(
                "point 0 in 1-based images".into(),
            ));
        }
        Self::from_images(image.iter().map(|x| x - 1).collect())
    }

    /// A product of cycles given with 1-based points. Cycles are chained by
    /// composition: the rightmost acts first.
    pub fn from_cycles(n: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut acc = Permutation::identity(n);
        for cycle in cycles {
            let c = Self::cycle(n, cycle)?;
            acc = acc.compose(&c)?;
        }
        Ok(acc)
    }

    fn cycle(n: usize, points: &[usize]) -> Result<Self> {
        let mut image: Vec<usize> = (0..n).collect();
        let mut seen = BTreeSet::new();
        for &p in points {
            if p == 0 || p > n {
                return Err(Error::InvalidPermutation(format!(
                    "point {p} outside 1..={n}"
                )));
            }
            if !seen.insert(p) {
                return Err(Error::InvalidPermutation(format!(
                    "point {p} repeated in a cycle"
                )));
            }
        }
        for (k, &p) in points.iter().enumerate() {
            image[p - 1] = points[(k + 1) % points.len()] - 1;
        }
        Ok(Permutation { image })
    }

    /// Parse cycle notation such as `(1 2 3 4)(5 6)`, `(13)(24)` or `()`.
    ///
    /// Inside a cycle, points are separated by spaces or commas; a cycle
    /// written without separators is read one digit per point.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let s = text.trim();
        let err = |msg: &str| Error::InvalidPermutation(format!("{msg} in {text:?}"));
        if s.is_empty() {
            return Err(err("empty permutation"));
        }
        let mut acc = Permutation::identity(n);
        let mut rest = s;
        while !rest.is_empty() {
            rest = rest.trim_start();
            if rest.is_empty() {
                break;
            }
            let body_start = rest.strip_prefix('(').ok_or_else(|| err("expected '('"))?;
            let close = body_start.find(')').ok_or_else(|| err("unclosed '('"))?;
            let body = body_start[..close].trim();
            rest = &body_start[close + 1..];
            if body.is_empty() {
                continue;
            }
            let points: Vec<usize> = if body.contains([' ', ',']) {
                body.split([' ', ','])
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse::<usize>().map_err(|_| err("bad point")))
                    .collect::<Result<_>>()?
            } else {
                body.chars()
                    .map(|c| {
                        c.to_digit(10)
                            .map(|d| d as usize)
                            .ok_or_else(|| err("bad point"))
                    })
                    .collect::<Result<_>>()?
            };
            acc = acc.compose(&Self::cycle(n, &points)?)?;
        }
        Ok(acc)
    }

    pub fn degree(&self) -> usize {
        self.image.len()
    }

    /// σ(i), 0-based.
    pub fn apply(&self, i: usize) -> usize {
        self.image[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.image
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.degree() != other.degree() {
            return Err(Error::DegreeMismatch {
                left: self.degree(),
                right: other.degree(),
            });
        }
        Ok(self.compose_unchecked(other))
    }

    pub(crate) fn compose_unchecked(&self, other: &Permutation) -> Permutation {
        Permutation {
            image: other.image.iter().map(|&j| self.image[j]).collect(),
        }
    }

    /// Apply `self`, then `other`.
    pub fn then(&self, other: &Permutation) -> Result<Permutation> {
        other.compose(self)
    }

    pub fn inverse(&self) -> Permutation {
        let mut image = vec![0; self.degree()];
        for (i, &x) in self.image.iter().enumerate() {
            image[x] = i;
        }
        Permutation { image }
    }

    /// Disjoint cycles of length ≥ 2, 1-based, each starting at its smallest
    /// point.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.degree()];
        let mut out = Vec::new();
        for start in 0..self.degree() {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start + 1];
            seen[start] = true;
            let mut x = self.image[start];
            while x != start {
                seen[x] = true;
                cycle.push(x + 1);
                x = self.image[x];
            }
            if cycle.len() > 1 {
                out.push(cycle);
            }
        }
        out
    }

    pub fn is_even(&self) -> bool {
        self.cycles().iter().map(|c| c.len() - 1).sum::<usize>() % 2 == 0
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return f.write_str("()");
        }
        for c in cycles {
            let parts: Vec<String> = c.iter().map(|p| p.to_string()).collect();
            write!(f, "({})", parts.join(" "))?;
        }
        Ok(())
    }
}

/// All permutations of `0..n` in lexicographic order of their image arrays.
pub fn all_permutations(n: usize) -> Result<Vec<Permutation>> {
    if n > MAX_ENUM_DEGREE {
        return Err(Error::DegreeTooLarge {
            degree: n,
            limit: MAX_ENUM_DEGREE,
        });
    }
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![Permutation {
        image: current.clone(),
    }];
    // next lexicographic permutation
    while let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) {
        let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(Permutation {
            image: current.clone(),
        });
    }
    Ok(out)
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Sym,
    Alt,
    Dihedral,
}

/// A subgroup of Sym(n), stored as its full element set. Equality compares
/// element sets only.
#[derive(Debug, Clone)]
pub struct PermGroup {
    degree: usize,
    elements: BTreeSet<Permutation>,
    generators: Vec<Permutation>,
}

impl PartialEq for PermGroup {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree && self.elements == other.elements
    }
}

impl Eq for PermGroup {}

impl PermGroup {
    /// Smallest subgroup of Sym(n) containing `gens`, by breadth-first
    /// closure.
    pub fn generate(degree: usize, gens: &[Permutation]) -> Result<Self> {
        for g in gens {
            if g.degree() != degree {
                return Err(Error::DegreeMismatch {
                    left: degree,
                    right: g.degree(),
                });
            }
        }
        let mut elements = BTreeSet::new();
        let id = Permutation::identity(degree);
        elements.insert(id.clone());
        let mut queue = VecDeque::from([id]);
        while let Some(x) = queue.pop_front() {
            for g in gens {
                let y = x.compose_unchecked(g);
                if elements.insert(y.clone()) {
                    queue.push_back(y);
                }
            }
        }
        Ok(PermGroup {
            degree,
            elements,
            generators: gens.iter().filter(|g| !g.is_identity()).cloned().collect(),
        })
    }

    /// Wrap an element set after checking it is a group.
    pub fn from_elements(degree: usize, elements: BTreeSet<Permutation>) -> Result<Self> {
        if elements.iter().any(|e| e.degree() != degree) {
            return Err(Error::InvalidPermutation(
                "mixed degrees in element set".into(),
            ));
        }
        if !is_closed(&elements) || !elements.contains(&Permutation::identity(degree)) {
            return Err(Error::NotAGroup {
                survivors: elements.len(),
            });
        }
        let generators = small_generating_set(&elements);
        Ok(PermGroup {
            degree,
            elements,
            generators,
        })
    }

    pub fn trivial(degree: usize) -> Self {
        PermGroup {
            degree,
            elements: BTreeSet::from([Permutation::identity(degree)]),
            generators: Vec::new(),
        }
    }

    pub fn symmetric(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::UnsupportedDegree {
                what: "Sym",
                degree: n,
            });
        }
        let elements: BTreeSet<_> = all_permutations(n)?.into_iter().collect();
        let mut generators = Vec::new();
        if n >= 2 {
            generators.push(Permutation::from_cycles(n, &[&[1, 2]])?);
        }
        if n >= 3 {
            let rot: Vec<usize> = (1..=n).collect();
            generators.push(Permutation::from_cycles(n, &[&rot])?);
        }
        Ok(PermGroup {
            degree: n,
            elements,
            generators,
        })
    }

    pub fn alternating(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::UnsupportedDegree {
                what: "Alt",
                degree: n,
            });
        }
        let elements: BTreeSet<_> = all_permutations(n)?
            .into_iter()
            .filter(Permutation::is_even)
            .collect();
        let generators = (3..=n)
            .map(|k| Permutation::from_cycles(n, &[&[1, 2, k]]))
            .collect::<Result<_>>()?;
        Ok(PermGroup {
            degree: n,
            elements,
            generators,
        })
    }

    /// Di(n) generated by the rotation `(1 2 … n)` and the mirror
    /// `(2 n)(3 n−1)⋯`.
    pub fn dihedral(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::UnsupportedDegree {
                what: "dihedral group",
                degree: n,
            });
        }
        let rot: Vec<usize> = (1..=n).collect();
        let rotation = Permutation::from_cycles(n, &[&rot])?;
        let pairs: Vec<[usize; 2]> = (2..=n)
            .map(|a| [a, n + 2 - a])
            .filter(|[a, b]| a < b)
            .collect();
        let cycles: Vec<&[usize]> = pairs.iter().map(|p| p.as_slice()).collect();
        let mirror = Permutation::from_cycles(n, &cycles)?;
        Self::generate(n, &[rotation, mirror])
    }

    pub fn named(kind: GroupKind, n: usize) -> Result<Self> {
        match kind {
            GroupKind::Sym => Self::symmetric(n),
            GroupKind::Alt => Self::alternating(n),
            GroupKind::Dihedral => Self::dihedral(n),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> impl Iterator<Item = &Permutation> {
        self.elements.iter()
    }

    pub fn element_set(&self) -> &BTreeSet<Permutation> {
        &self.elements
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    pub fn contains(&self, p: &Permutation) -> bool {
        self.elements.contains(p)
    }

    /// Whether every element of `self` lies in `other`.
    pub fn is_subgroup_of(&self, other: &PermGroup) -> Result<bool> {
        self.check_degree(other)?;
        Ok(self.elements.is_subset(&other.elements))
    }

    /// Whether `self` is normal in `other` (and a subgroup of it).
    pub fn is_normal_in(&self, other: &PermGroup) -> Result<bool> {
        if !self.is_subgroup_of(other)? {
            return Ok(false);
        }
        let gens = if other.generators.is_empty() {
            small_generating_set(&other.elements)
        } else {
            other.generators.clone()
        };
        Ok(gens.iter().all(|g| {
            let g_inv = g.inverse();
            self.elements
                .iter()
                .all(|h| self.contains(&g.compose_unchecked(h).compose_unchecked(&g_inv)))
        }))
    }

    /// Image of the group under conjugation `x ↦ g x g⁻¹`.
    pub fn conjugate_by(&self, g: &Permutation) -> PermGroup {
        let g_inv = g.inverse();
        let elements = self
            .elements
            .iter()
            .map(|h| g.compose_unchecked(h).compose_unchecked(&g_inv))
            .collect();
        let generators = self
            .generators
            .iter()
            .map(|h| g.compose_unchecked(h).compose_unchecked(&g_inv))
            .collect();
        PermGroup {
            degree: self.degree,
            elements,
            generators,
        }
    }

    /// Whether the group moves every point to every other point.
    pub fn is_transitive(&self) -> bool {
        if self.degree == 0 {
            return true;
        }
        let orbit: BTreeSet<usize> = self.elements.iter().map(|g| g.apply(0)).collect();
        orbit.len() == self.degree
    }

    /// A standard name when the group equals Sym(n), Alt(n) or Di(n) in the
    /// standard labeling.
    pub fn standard_name(&self) -> Option<String> {
        let n = self.degree;
        if n > MAX_ENUM_DEGREE {
            return None;
        }
        if self.order() == factorial(n) {
            return Some(format!("Sym({n})"));
        }
        if n >= 2
            && self.order() * 2 == factorial(n)
            && self.elements.iter().all(Permutation::is_even)
        {
            return Some(format!("Alt({n})"));
        }
        if n >= 3 && self.order() == 2 * n {
            if let Ok(d) = Self::dihedral(n) {
                if d.elements == self.elements {
                    return Some(format!("dihedral D{n}"));
                }
            }
        }
        None
    }

    /// Like [`PermGroup::standard_name`], but also recognizes conjugates of
    /// the dihedral group.
    pub fn describe(&self) -> Option<String> {
        if let Some(name) = self.standard_name() {
            return Some(name);
        }
        let n = self.degree;
        if (4..=MAX_ENUM_DEGREE).contains(&n) && self.order() == 2 * n {
            let d = Self::dihedral(n).ok()?;
            let conj = all_permutations(n)
                .ok()?
                .into_iter()
                .any(|g| d.conjugate_by(&g).elements == self.elements);
            if conj {
                return Some(format!("conjugate of dihedral D{n}"));
            }
        }
        None
    }

    fn check_degree(&self, other: &PermGroup) -> Result<()> {
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch {
                left: self.degree,
                right: other.degree,
            });
        }
        Ok(())
    }
}

/// Closure test for a finite set of permutations.
pub fn is_closed(elements: &BTreeSet<Permutation>) -> bool {
    elements.iter().all(|a| {
        elements
            .iter()
            .all(|b| elements.contains(&a.compose_unchecked(b)))
    })
}

/// Greedy generating set: walk the elements in lexicographic order and keep
/// each one not already generated.
fn small_generating_set(elements: &BTreeSet<Permutation>) -> Vec<Permutation> {
    let Some(first) = elements.iter().next() else {
        return Vec::new();
    };
    let degree = first.degree();
    let mut gens = Vec::new();
    let mut span = PermGroup::trivial(degree);
    for e in elements {
        if !span.contains(e) {
            gens.push(e.clone());
            span = PermGroup::generate(degree, &gens).expect("same degree");
        }
    }
    gens
}

/// Representatives of the right cosets `Hσ` of a subgroup of Sym(n), with a
/// lookup from every permutation of degree n to its coset index.
#[derive(Debug, Clone)]
pub struct CosetTransversal {
    subgroup: PermGroup,
    reps: Vec<Permutation>,
    coset_of: HashMap<Permutation, usize>,
}

impl CosetTransversal {
    /// Lexicographically smallest representative of each right coset, in
    /// lexicographic order; the identity comes first.
    pub fn right(subgroup: &PermGroup) -> Result<Self> {
        let n = subgroup.degree();
        let mut coset_of = HashMap::with_capacity(factorial(n));
        let mut reps = Vec::new();
        for sigma in all_permutations(n)? {
            if coset_of.contains_key(&sigma) {
                continue;
            }
            let idx = reps.len();
            for h in subgroup.elements() {
                // h·σ applies h first
                coset_of.insert(sigma.compose_unchecked(h), idx);
            }
            reps.push(sigma);
        }
        Ok(CosetTransversal {
            subgroup: subgroup.clone(),
            reps,
            coset_of,
        })
    }

    /// Use explicit representatives, in the given order.
    pub fn with_reps(subgroup: &PermGroup, reps: Vec<Permutation>) -> Result<Self> {
        let n = subgroup.degree();
        let r = factorial(n) / subgroup.order();
        if reps.len() != r {
            return Err(Error::InvalidTransversal(format!(
                "expected {r} representatives, got {}",
                reps.len()
            )));
        }
        let mut coset_of = HashMap::with_capacity(factorial(n));
        for (idx, sigma) in reps.iter().enumerate() {
            if sigma.degree() != n {
                return Err(Error::DegreeMismatch {
                    left: n,
                    right: sigma.degree(),
                });
            }
            for h in subgroup.elements() {
                if coset_of.insert(sigma.compose_unchecked(h), idx).is_some() {
                    return Err(Error::InvalidTransversal(format!(
                        "{sigma} shares a coset with an earlier representative"
                    )));
                }
            }
        }
        Ok(CosetTransversal {
            subgroup: subgroup.clone(),
            reps,
            coset_of,
        })
    }

    pub fn subgroup(&self) -> &PermGroup {
        &self.subgroup
    }

    pub fn reps(&self) -> &[Permutation] {
        &self.reps
    }

    /// Number of cosets r = n!/|H|.
    pub fn index(&self) -> usize {
        self.reps.len()
    }

    pub fn degree(&self) -> usize {
        self.subgroup.degree()
    }

    /// Index of the coset containing `sigma`.
    pub fn coset_index(&self, sigma: &Permutation) -> Result<usize> {
        self.coset_of
            .get(sigma)
            .copied()
            .ok_or(Error::DegreeMismatch {
                left: self.degree(),
                right: sigma.degree(),
            })
    }

    /// ρ_H(σ): the permutation τ of the cosets with `Hσ_i σ = Hσ_{τ(i)}`.
    pub fn induced_action(&self, sigma: &Permutation) -> Result<Permutation> {
        let image = self
            .reps
            .iter()
            .map(|rep| self.coset_index(&rep.then(sigma)?))
            .collect::<Result<Vec<_>>>()?;
        Permutation::from_images(image)
    }

    /// ρ_H(G) as a subgroup of Sym(r).
    pub fn homomorphism_image(&self, group: &PermGroup) -> Result<PermGroup> {
        let elements = group
            .elements()
            .map(|g| self.induced_action(g))
            .collect::<Result<BTreeSet<_>>>()?;
        PermGroup::from_elements(self.index(), elements)
    }

    /// Largest G ≤ Sym(n) with ρ_H(G) ⊆ `target`, by filtering Sym(n).
    pub fn preimage_of(&self, target: &PermGroup) -> Result<PermGroup> {
        if target.degree() != self.index() {
            return Err(Error::DegreeMismatch {
                left: self.index(),
                right: target.degree(),
            });
        }
        let mut elements = BTreeSet::new();
        for sigma in all_permutations(self.degree())? {
            if target.contains(&self.induced_action(&sigma)?) {
                elements.insert(sigma);
            }
        }
        PermGroup::from_elements(self.degree(), elements)
    }

    /// ker ρ_H.
    pub fn kernel(&self) -> Result<PermGroup> {
        self.preimage_of(&PermGroup::trivial(self.index()))
    }

    /// Check ρ_H(a∘b) = ρ_H(a)∘ρ_H(b) over every pair in `sample`.
    pub fn is_homomorphism_on(&self, sample: &[(Permutation, Permutation)]) -> Result<bool> {
        for (a, b) in sample {
            let lhs = self.induced_action(&a.compose(b)?)?;
            let rhs = self.induced_action(a)?.compose(&self.induced_action(b)?)?;
            if lhs != rhs {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
