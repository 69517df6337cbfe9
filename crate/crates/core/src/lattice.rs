//! Geometry of `Z^d`: sites, L1 balls `V_i(k)` and the set maps `π^{(i,k)}`.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

/// A point of `Z^d`. Ordering is lexicographic on the coordinates.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(SmallVec<[i64; 4]>);

impl Site {
    pub fn new(coords: impl IntoIterator<Item = i64>) -> Self {
        Site(coords.into_iter().collect())
    }

    pub fn origin(dim: usize) -> Self {
        Site(SmallVec::from_elem(0, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|x| x.abs()).sum()
    }

    pub fn l1_distance(&self, other: &Site) -> i64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (n, x) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Add<&Site> for &Site {
    type Output = Site;

    fn add(self, rhs: &Site) -> Site {
        debug_assert_eq!(self.dim(), rhs.dim());
        Site(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub<&Site> for &Site {
    type Output = Site;

    fn sub(self, rhs: &Site) -> Site {
        debug_assert_eq!(self.dim(), rhs.dim());
        Site(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

/// A finite set of sites, iterated in lexicographic order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteSet(BTreeSet<Site>);

impl SiteSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(site: Site) -> Self {
        let mut set = Self::new();
        set.insert(site);
        set
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.0.contains(site)
    }

    pub fn insert(&mut self, site: Site) -> bool {
        self.0.insert(site)
    }

    pub fn remove(&mut self, site: &Site) -> bool {
        self.0.remove(site)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Site> + DoubleEndedIterator + '_ {
        self.0.iter()
    }

    /// Lexicographically smallest member.
    pub fn first(&self) -> Option<&Site> {
        self.0.first()
    }

    pub fn nth(&self, n: usize) -> Option<&Site> {
        self.0.iter().nth(n)
    }

    pub fn union_with(&mut self, other: &SiteSet) {
        for s in other.iter() {
            self.0.insert(s.clone());
        }
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn translate(&self, shift: &Site) -> SiteSet {
        self.0.iter().map(|s| s + shift).collect()
    }
}

impl FromIterator<Site> for SiteSet {
    fn from_iter<T: IntoIterator<Item = Site>>(iter: T) -> Self {
        SiteSet(iter.into_iter().collect())
    }
}

impl IntoIterator for SiteSet {
    type Item = Site;
    type IntoIter = std::collections::btree_set::IntoIter<Site>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

impl<'a> IntoIterator for &'a SiteSet {
    type Item = &'a Site;
    type IntoIter = std::collections::btree_set::Iter<'a, Site>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Offsets `j` with `‖j‖₁ ≤ k`, in lexicographic order. Empty for `k = -1`.
pub fn ball_offsets(dim: usize, k: i64) -> Vec<Site> {
    let mut out = Vec::new();
    if k < 0 {
        return out;
    }
    let mut coords = vec![0i64; dim];
    push_offsets(&mut coords, 0, k, &mut out);
    out
}

fn push_offsets(coords: &mut [i64], axis: usize, budget: i64, out: &mut Vec<Site>) {
    if axis == coords.len() {
        out.push(Site::new(coords.iter().copied()));
        return;
    }
    for x in -budget..=budget {
        coords[axis] = x;
        push_offsets(coords, axis + 1, budget - x.abs(), out);
    }
    coords[axis] = 0;
}

/// Offsets with `‖j‖₁ = r` exactly, in lexicographic order.
pub fn sphere_offsets(dim: usize, r: i64) -> Vec<Site> {
    if r < 0 {
        return Vec::new();
    }
    ball_offsets(dim, r)
        .into_iter()
        .filter(|s| s.l1_norm() == r)
        .collect()
}

/// `V_i(k) = { j : ‖j − i‖₁ ≤ k }`.
pub fn l1_ball(center: &Site, k: i64) -> SiteSet {
    ball_offsets(center.dim(), k)
        .iter()
        .map(|o| center + o)
        .collect()
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, j| acc * (n - j) / (j + 1))
}

/// `|V_i(k)|` from the closed sum `Σ_{j ≤ min(d,k)} 2^j C(d,j) C(k,j)`.
pub fn ball_volume(dim: usize, k: i64) -> u128 {
    if k < 0 {
        return 0;
    }
    let (d, k) = (dim as u128, k as u128);
    (0..=d.min(k))
        .map(|j| (1u128 << j) * binomial(d, j) * binomial(k, j))
        .sum()
}

/// `π^{(i,k)}(F)`: replaces `i` by `V_i(k)` when `i ∈ F`; `k = -1` removes it.
pub fn pi_map(center: &Site, k: i64, set: &SiteSet) -> SiteSet {
    let mut out = set.clone();
    apply_pi_map(center, k, &mut out);
    out
}

/// In-place form of [`pi_map`].
pub fn apply_pi_map(center: &Site, k: i64, set: &mut SiteSet) {
    if !set.contains(center) {
        return;
    }
    if k < 0 {
        set.remove(center);
    } else {
        for o in ball_offsets(center.dim(), k) {
            set.insert(center + &o);
        }
    }
}
