//! Dense coefficient tensors and the index combinatorics around them: mode
//! subsets, set partitions of modes, slices with some indices fixed and the
//! regrouping of modes into partition blocks.
//!
//! Modes and index values are 0-based in the API. Anything that is printed or
//! serialized (subsets, partitions, partition specs) uses 1-based mode labels.

use std::cmp::Ordering;
use std::fmt;

use itertools::Itertools;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result, Scalar};

/// Largest supported tensor order.
pub const MAX_ORDER: usize = 6;

/// Bell numbers B(0)..=B(MAX_ORDER).
pub const BELL: [usize; MAX_ORDER + 1] = [1, 1, 2, 5, 15, 52, 203];

/// Dense `d`-mode array of reals with the same dimension `n` in every mode,
/// row-major with mode 0 slowest. A 0-mode tensor holds a single scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefTensor<T> {
    order: usize,
    dim: usize,
    entries: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct TensorFile<E> {
    d: usize,
    n: usize,
    entries: E,
}

fn checked_len(order: usize, dim: usize) -> Result<usize> {
    (0..order)
        .try_fold(1usize, |acc, _| acc.checked_mul(dim))
        .ok_or_else(|| Error::Capacity(format!("{dim}^{order} entries overflow")))
}

impl<T: Scalar> CoefTensor<T> {
    pub fn new(order: usize, dim: usize, entries: Vec<T>) -> Result<Self> {
        if order == 0 {
            return Err(Error::Dimension("tensor order d must be at least 1".into()));
        }
        if dim == 0 {
            return Err(Error::Dimension(
                "mode dimension n must be at least 1".into(),
            ));
        }
        if order > MAX_ORDER {
            return Err(Error::Capacity(format!(
                "order {order} exceeds the supported maximum {MAX_ORDER}"
            )));
        }
        let expected = checked_len(order, dim)?;
        if entries.len() != expected {
            return Err(Error::Dimension(format!(
                "entries has length {} but n^d = {dim}^{order} = {expected}",
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::Value(format!("entry {pos} is not finite")));
        }
        Ok(Self {
            order,
            dim,
            entries,
        })
    }

    pub fn zeros(order: usize, dim: usize) -> Result<Self> {
        Self::new(order, dim, vec![T::zero(); checked_len(order, dim)?])
    }

    /// The 0-mode tensor holding `value`; `dim` is kept for bookkeeping only.
    pub fn scalar(value: T, dim: usize) -> Self {
        Self {
            order: 0,
            dim,
            entries: vec![value],
        }
    }

    pub fn from_fn(order: usize, dim: usize, mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let len = checked_len(order, dim)?;
        let mut idx = vec![0; order];
        let entries = (0..len)
            .map(|flat| {
                decode_into(flat, dim, &mut idx);
                f(&idx)
            })
            .collect();
        Self::new(order, dim, entries)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<T> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|x| x.is_zero())
    }

    pub fn flat_index(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.order {
            return Err(Error::Index(format!(
                "index has {} coordinates, tensor has {} modes",
                idx.len(),
                self.order
            )));
        }
        idx.iter().try_fold(0usize, |acc, &i| {
            if i >= self.dim {
                Err(Error::Index(format!(
                    "index {} out of range 1..={}",
                    i + 1,
                    self.dim
                )))
            } else {
                Ok(acc * self.dim + i)
            }
        })
    }

    pub fn get(&self, idx: &[usize]) -> Result<T> {
        Ok(self.entries[self.flat_index(idx)?])
    }

    /// Multi-index of a flat position.
    pub fn unravel(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.order];
        decode_into(flat, self.dim, &mut idx);
        idx
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            order: self.order,
            dim: self.dim,
            entries: self.entries.iter().map(|&x| x * c).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.entries.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// Average over all `d!` permutations of the index tuple. Every member of
    /// a permutation orbit receives the identical value, so the output is
    /// exactly symmetric and the operation is exactly idempotent.
    pub fn symmetrize(&self) -> Self {
        if self.order <= 1 {
            return self.clone();
        }
        let perms: Vec<Vec<usize>> = (0..self.order).permutations(self.order).collect();
        let count = T::of_usize(perms.len());
        let mut out = self.entries.clone();
        let mut idx = vec![0; self.order];
        let mut permuted = vec![0; self.order];
        let mut positions = Vec::with_capacity(perms.len());
        for flat in 0..self.entries.len() {
            decode_into(flat, self.dim, &mut idx);
            if idx.windows(2).any(|w| w[0] > w[1]) {
                continue;
            }
            positions.clear();
            for perm in &perms {
                for (slot, &src) in permuted.iter_mut().zip(perm) {
                    *slot = idx[src];
                }
                positions.push(encode(&permuted, self.dim));
            }
            let first = self.entries[positions[0]];
            let value = if positions.iter().all(|&q| self.entries[q] == first) {
                first
            } else {
                positions.iter().map(|&q| self.entries[q]).sum::<T>() / count
            };
            for &q in &positions {
                out[q] = value;
            }
        }
        Self {
            order: self.order,
            dim: self.dim,
            entries: out,
        }
    }

    /// Zero every entry whose index tuple repeats a value.
    pub fn zero_generalized_diagonal(&self) -> Self {
        let mut idx = vec![0; self.order];
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(flat, &x)| {
                decode_into(flat, self.dim, &mut idx);
                if has_repeat(&idx) {
                    T::zero()
                } else {
                    x
                }
            })
            .collect();
        Self {
            order: self.order,
            dim: self.dim,
            entries,
        }
    }

    /// First entry violating permutation symmetry (up to `tol`) or the
    /// vanishing generalized diagonal, if any.
    pub fn hypothesis_violation(&self, tol: T) -> Option<String> {
        let mut idx = vec![0; self.order];
        let mut permuted = vec![0; self.order];
        let perms: Vec<Vec<usize>> = (0..self.order).permutations(self.order).collect();
        for (flat, &x) in self.entries.iter().enumerate() {
            decode_into(flat, self.dim, &mut idx);
            if has_repeat(&idx) && x.abs() > tol {
                return Some(format!(
                    "nonzero generalized-diagonal entry {} at index {}",
                    x,
                    one_based(&idx)
                ));
            }
            for perm in &perms {
                for (slot, &src) in permuted.iter_mut().zip(perm) {
                    *slot = idx[src];
                }
                let y = self.entries[encode(&permuted, self.dim)];
                if (x - y).abs() > tol {
                    return Some(format!(
                        "asymmetric entries: {} at index {} vs {} at index {}",
                        x,
                        one_based(&idx),
                        y,
                        one_based(&permuted)
                    ));
                }
            }
        }
        None
    }

    /// Subtensor over the modes not in `fixed.modes`, with the fixed modes
    /// pinned to `fixed.values`. Remaining modes keep their relative order.
    pub fn slice(&self, fixed: &IndexTuple) -> Result<Self> {
        if fixed.modes.order() != self.order {
            return Err(Error::Index(format!(
                "index tuple is over {} modes, tensor has {}",
                fixed.modes.order(),
                self.order
            )));
        }
        if let Some(&v) = fixed.values.iter().find(|&&v| v >= self.dim) {
            return Err(Error::Index(format!(
                "index {} out of range 1..={}",
                v + 1,
                self.dim
            )));
        }
        let free: Vec<usize> = fixed.modes.complement().members().collect();
        let strides: Vec<usize> = (0..self.order)
            .map(|m| self.dim.pow((self.order - 1 - m) as u32))
            .collect();
        let base: usize = fixed
            .modes
            .members()
            .zip(&fixed.values)
            .map(|(m, &v)| v * strides[m])
            .sum();
        let out_len = self.dim.pow(free.len() as u32);
        let mut idx = vec![0; free.len()];
        let entries = (0..out_len)
            .map(|flat| {
                decode_into(flat, self.dim, &mut idx);
                let off: usize = free.iter().zip(&idx).map(|(&m, &v)| v * strides[m]).sum();
                self.entries[base + off]
            })
            .collect();
        Ok(Self {
            order: free.len(),
            dim: self.dim,
            entries,
        })
    }

    /// Regroup modes into the blocks of `partition`: block `l` becomes a single
    /// mode of size `n^{|block|}` indexed row-major within the block.
    pub fn group_flatten(&self, partition: &Partition) -> Result<GroupedTensor<T>> {
        if partition.ground() != &ModeSubset::full(self.order) {
            return Err(Error::Partition(format!(
                "partition ground set {} does not cover the {} modes of the tensor",
                partition.ground(),
                self.order
            )));
        }
        let dims: Vec<usize> = partition
            .blocks()
            .iter()
            .map(|b| self.dim.pow(b.len() as u32))
            .collect();
        let mut block_of = vec![(0usize, 0usize); self.order];
        for (l, b) in partition.blocks().iter().enumerate() {
            for (pos, m) in b.members().enumerate() {
                block_of[m] = (l, b.len() - 1 - pos);
            }
        }
        let block_strides: Vec<usize> = (0..dims.len())
            .map(|l| dims[l + 1..].iter().product())
            .collect();
        let mut out = vec![T::zero(); self.entries.len()];
        let mut idx = vec![0; self.order];
        for (flat, &x) in self.entries.iter().enumerate() {
            decode_into(flat, self.dim, &mut idx);
            let target: usize = idx
                .iter()
                .zip(&block_of)
                .map(|(&v, &(l, power))| v * self.dim.pow(power as u32) * block_strides[l])
                .sum();
            out[target] = x;
        }
        Ok(GroupedTensor { dims, entries: out })
    }
}

impl<T: Scalar> Serialize for CoefTensor<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorFile {
            d: self.order,
            n: self.dim,
            entries: self.entries.as_slice(),
        }
        .serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for CoefTensor<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = TensorFile::<Vec<T>>::deserialize(d)?;
        CoefTensor::new(raw.d, raw.n, raw.entries).map_err(D::Error::custom)
    }
}

fn decode_into(mut flat: usize, dim: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = flat % dim;
        flat /= dim;
    }
}

fn encode(idx: &[usize], dim: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * dim + i)
}

fn has_repeat(idx: &[usize]) -> bool {
    idx.iter()
        .enumerate()
        .any(|(k, a)| idx[k + 1..].contains(a))
}

fn one_based(idx: &[usize]) -> String {
    format!("({})", idx.iter().map(|i| i + 1).join(","))
}

/// A tensor whose modes have arbitrary sizes, the output of
/// [`CoefTensor::group_flatten`]. Row-major, mode 0 slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedTensor<T> {
    dims: Vec<usize>,
    entries: Vec<T>,
}

impl<T: Scalar> GroupedTensor<T> {
    pub fn new(dims: Vec<usize>, entries: Vec<T>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if dims.contains(&0) || entries.len() != len {
            return Err(Error::Dimension(format!(
                "grouped dims {:?} need {len} entries, got {}",
                dims,
                entries.len()
            )));
        }
        Ok(Self { dims, entries })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|x| x.is_zero())
    }

    /// Contract every mode except `keep` against `vectors`; the entry of
    /// `vectors` at `keep` is ignored.
    pub fn contract_except(&self, vectors: &[Vec<T>], keep: usize) -> Vec<T> {
        debug_assert_eq!(vectors.len(), self.dims.len());
        let mut cur: Vec<T> = self.entries.clone();
        // Trailing modes first: each step removes the fastest-varying mode.
        for m in (keep + 1..self.dims.len()).rev() {
            let w = self.dims[m];
            let x = &vectors[m];
            cur = cur
                .chunks_exact(w)
                .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
                .collect();
        }
        // Leading modes: each step removes the slowest-varying mode.
        for (x, &w) in vectors.iter().zip(&self.dims).take(keep) {
            let rest = cur.len() / w;
            let mut next = vec![T::zero(); rest];
            for (a, chunk) in cur.chunks_exact(rest).enumerate() {
                let xa = x[a];
                if xa.is_zero() {
                    continue;
                }
                for (o, &c) in next.iter_mut().zip(chunk) {
                    *o = *o + xa * c;
                }
            }
            cur = next;
        }
        cur
    }

    /// Value of the multilinear form at `vectors`.
    pub fn form(&self, vectors: &[Vec<T>]) -> T {
        let last = self.dims.len() - 1;
        crate::scalar::dot(&self.contract_except(vectors, last), &vectors[last])
    }
}

/// A subset `I` of the modes `{0, .., d-1}` of an order-`d` tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModeSubset {
    order: usize,
    mask: u32,
}

impl ModeSubset {
    pub fn empty(order: usize) -> Self {
        Self { order, mask: 0 }
    }

    pub fn full(order: usize) -> Self {
        Self {
            order,
            mask: if order == 0 { 0 } else { (1u32 << order) - 1 },
        }
    }

    /// Build from 0-based members.
    pub fn from_members(order: usize, members: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &m in members {
            if m >= order {
                return Err(Error::Index(format!("mode {} outside 1..={order}", m + 1)));
            }
            if mask & (1 << m) != 0 {
                return Err(Error::Partition(format!("mode {} repeated", m + 1)));
            }
            mask |= 1 << m;
        }
        Ok(Self { order, mask })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn contains(&self, mode: usize) -> bool {
        mode < self.order && self.mask & (1 << mode) != 0
    }

    pub fn is_subset_of(&self, other: &ModeSubset) -> bool {
        self.mask & !other.mask == 0
    }

    /// 0-based members in increasing order.
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.order).filter(move |&m| self.mask & (1 << m) != 0)
    }

    pub fn complement(&self) -> Self {
        Self {
            order: self.order,
            mask: Self::full(self.order).mask & !self.mask,
        }
    }

    fn union(&self, other: &Self) -> Self {
        Self {
            order: self.order,
            mask: self.mask | other.mask,
        }
    }

    fn one_based(&self) -> Vec<usize> {
        self.members().map(|m| m + 1).collect()
    }
}

impl Ord for ModeSubset {
    /// By size, then lexicographically on sorted members.
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.members().cmp(other.members()))
    }
}

impl PartialOrd for ModeSubset {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ModeSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.one_based().iter().join(","))
    }
}

impl Serialize for ModeSubset {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

/// All `2^d` subsets of the modes, ordered by size then lexicographically.
pub fn enumerate_subsets(order: usize) -> Result<Vec<ModeSubset>> {
    if order > MAX_ORDER {
        return Err(Error::Capacity(format!(
            "order {order} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    let mut subsets: Vec<ModeSubset> = (0..1u32 << order)
        .map(|mask| ModeSubset { order, mask })
        .collect();
    subsets.sort();
    Ok(subsets)
}

/// A set partition of a subset of modes. Blocks are nonempty, disjoint, cover
/// `ground`, and are kept sorted by their smallest element.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    ground: ModeSubset,
    blocks: Vec<ModeSubset>,
}

impl Partition {
    pub fn new(ground: ModeSubset, mut blocks: Vec<ModeSubset>) -> Result<Self> {
        let mut seen = ModeSubset::empty(ground.order());
        for b in &blocks {
            if b.order() != ground.order() {
                return Err(Error::Partition("blocks over different mode counts".into()));
            }
            if b.is_empty() {
                return Err(Error::Partition("empty block".into()));
            }
            if b.mask & seen.mask != 0 {
                return Err(Error::Partition(format!(
                    "block {b} overlaps another block"
                )));
            }
            seen = seen.union(b);
        }
        if seen != ground {
            return Err(Error::Partition(format!(
                "blocks cover {seen} but the ground set is {ground}"
            )));
        }
        blocks.sort_by_key(|b| b.members().next());
        Ok(Self { ground, blocks })
    }

    /// The unique partition of the empty set, with no blocks.
    pub fn empty(order: usize) -> Self {
        Self {
            ground: ModeSubset::empty(order),
            blocks: Vec::new(),
        }
    }

    /// Parse `"1,3|2"`: blocks separated by `|`, 1-based modes separated by `,`.
    /// The blocks must cover all `order` modes.
    pub fn parse(spec: &str, order: usize) -> Result<Self> {
        let bad = |why: String| Error::Input(format!("partition spec {spec:?}: {why}"));
        let mut blocks = Vec::new();
        for part in spec.split('|') {
            let members = part
                .split(',')
                .map(|tok| {
                    let tok = tok.trim();
                    let m: usize = tok
                        .parse()
                        .map_err(|_| bad(format!("{tok:?} is not a mode number")))?;
                    if m == 0 || m > order {
                        return Err(bad(format!("mode {m} outside 1..={order}")));
                    }
                    Ok(m - 1)
                })
                .collect::<Result<Vec<_>>>()?;
            blocks.push(ModeSubset::from_members(order, &members).map_err(|e| bad(e.to_string()))?);
        }
        Self::new(ModeSubset::full(order), blocks).map_err(|e| bad(e.to_string()))
    }

    pub fn ground(&self) -> &ModeSubset {
        &self.ground
    }

    pub fn blocks(&self) -> &[ModeSubset] {
        &self.blocks
    }

    /// Number of blocks `|J|`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// True when every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.ground == coarser.ground
            && self
                .blocks
                .iter()
                .all(|b| coarser.blocks.iter().any(|c| b.is_subset_of(c)))
    }

    /// Relabel the ground set's members to `0..|ground|` in increasing order,
    /// matching the mode numbering of a slice over that ground set.
    pub fn compact(&self) -> Partition {
        let members: Vec<usize> = self.ground.members().collect();
        let k = members.len();
        let relabel = |b: &ModeSubset| {
            let mask = b
                .members()
                .map(|m| 1u32 << members.iter().position(|&x| x == m).unwrap())
                .fold(0, |a, x| a | x);
            ModeSubset { order: k, mask }
        };
        Partition {
            ground: ModeSubset::full(k),
            blocks: self.blocks.iter().map(relabel).collect(),
        }
    }

    fn one_based(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|b| b.one_based()).collect()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.blocks.iter().join(","))
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

/// All Bell(|s|) partitions of `s`, finest first. Generated from restricted
/// growth strings in decreasing lexicographic order.
pub fn enumerate_partitions(s: &ModeSubset) -> Result<Vec<Partition>> {
    let members: Vec<usize> = s.members().collect();
    let k = members.len();
    if k > MAX_ORDER {
        return Err(Error::Capacity(format!(
            "cannot partition {k} > {MAX_ORDER} modes"
        )));
    }
    if k == 0 {
        return Ok(vec![Partition::empty(s.order())]);
    }
    let mut strings = Vec::with_capacity(BELL[k]);
    let mut rgs = vec![0usize; k];
    collect_rgs(&mut rgs, 1, 0, &mut strings);
    strings.reverse();
    Ok(strings
        .into_iter()
        .map(|code| {
            let nblocks = code.iter().max().unwrap() + 1;
            let mut masks = vec![0u32; nblocks];
            for (pos, &b) in code.iter().enumerate() {
                masks[b] |= 1 << members[pos];
            }
            Partition {
                ground: *s,
                blocks: masks
                    .into_iter()
                    .map(|mask| ModeSubset {
                        order: s.order(),
                        mask,
                    })
                    .collect(),
            }
        })
        .collect())
}

fn collect_rgs(rgs: &mut Vec<usize>, pos: usize, max: usize, out: &mut Vec<Vec<usize>>) {
    if pos == rgs.len() {
        out.push(rgs.clone());
        return;
    }
    for v in 0..=max + 1 {
        rgs[pos] = v;
        collect_rgs(rgs, pos + 1, max.max(v), out);
    }
}

/// A partial multi-index `i_I`: one value per mode in `modes`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexTuple {
    pub modes: ModeSubset,
    pub values: Vec<usize>,
}

impl IndexTuple {
    pub fn new(modes: ModeSubset, values: Vec<usize>) -> Result<Self> {
        if values.len() != modes.len() {
            return Err(Error::Index(format!(
                "{} values for {} fixed modes",
                values.len(),
                modes.len()
            )));
        }
        Ok(Self { modes, values })
    }

    /// All `n^{|modes|}` tuples over `modes`, row-major.
    pub fn all(modes: ModeSubset, dim: usize) -> impl Iterator<Item = IndexTuple> {
        let k = modes.len();
        let count = dim.pow(k as u32);
        (0..count).map(move |flat| {
            let mut values = vec![0; k];
            decode_into(flat, dim, &mut values);
            IndexTuple { modes, values }
        })
    }
}
