//! Coloured rooted trees for additive-noise SDEs: enumeration by order, order and
//! density, and the relevant f-rooted trees behind the weak order conditions.
//!
//! Stochastic nodes are leaves; only colour-0 nodes and the f-root carry subtrees.
//! Orders are handled internally as integer half-units.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;

/// A tree in canonical form: children are sorted, so `==` is isomorphism.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ColoredTree {
    Empty,
    Stochastic(u32),
    Deterministic(Vec<ColoredTree>),
    FRoot(Vec<ColoredTree>),
}

use ColoredTree::*;

impl ColoredTree {
    pub fn leaf() -> Self {
        Deterministic(Vec::new())
    }

    /// Stochastic leaf of colour `l >= 1`.
    pub fn stochastic(l: u32) -> Self {
        assert!(l >= 1, "stochastic colours start at 1");
        Stochastic(l)
    }

    pub fn deterministic(children: Vec<ColoredTree>) -> Self {
        Deterministic(sorted(children))
    }

    pub fn f_root(children: Vec<ColoredTree>) -> Self {
        FRoot(sorted(children))
    }

    pub fn children(&self) -> &[ColoredTree] {
        match self {
            Deterministic(c) | FRoot(c) => c,
            _ => &[],
        }
    }

    pub fn canonical(&self) -> Self {
        match self {
            Deterministic(c) => Self::deterministic(c.iter().map(|t| t.canonical()).collect()),
            FRoot(c) => Self::f_root(c.iter().map(|t| t.canonical()).collect()),
            t => t.clone(),
        }
    }

    pub fn is_canonical(&self) -> bool {
        let c = self.children();
        c.windows(2).all(|w| w[0] <= w[1]) && c.iter().all(|t| t.is_canonical())
    }

    /// Twice the order; deterministic nodes weigh 2, stochastic leaves 1.
    pub fn weight(&self) -> u32 {
        match self {
            Empty => 0,
            Stochastic(_) => 1,
            Deterministic(c) => 2 + c.iter().map(|t| t.weight()).sum::<u32>(),
            FRoot(c) => c.iter().map(|t| t.weight()).sum(),
        }
    }

    pub fn rho(&self) -> Ratio<i64> {
        Ratio::new(self.weight() as i64, 2)
    }

    pub fn density(&self) -> Ratio<i64> {
        match self {
            Empty | Stochastic(_) => Ratio::from_integer(1),
            Deterministic(c) | FRoot(c) => {
                let mut product = Ratio::from_integer(1);
                for t in c {
                    product *= t.density();
                }
                for run in c.chunk_by(|a, b| a == b) {
                    product /= factorial(run.len() as i64);
                }
                product
            }
        }
    }

    /// Number of stochastic leaves of each colour.
    pub fn color_counts(&self) -> BTreeMap<u32, usize> {
        let mut counts = BTreeMap::new();
        self.count_colors(&mut counts);
        counts
    }

    fn count_colors(&self, counts: &mut BTreeMap<u32, usize>) {
        match self {
            Stochastic(l) => *counts.entry(*l).or_default() += 1,
            Deterministic(c) | FRoot(c) => c.iter().for_each(|t| t.count_colors(counts)),
            Empty => {}
        }
    }

    pub fn colors(&self) -> BTreeSet<u32> {
        self.color_counts().into_keys().collect()
    }

    /// Relabels stochastic colours through `map` and re-canonicalises.
    pub fn recolor(&self, map: &impl Fn(u32) -> u32) -> Self {
        match self {
            Stochastic(l) => Stochastic(map(*l)),
            Deterministic(c) => Self::deterministic(c.iter().map(|t| t.recolor(map)).collect()),
            FRoot(c) => Self::f_root(c.iter().map(|t| t.recolor(map)).collect()),
            Empty => Empty,
        }
    }

    /// The same tree with every stochastic colour set to 1.
    pub fn erase_colors(&self) -> Self {
        self.recolor(&|_| 1)
    }

    /// Smallest tree reachable by permuting the colours `1..=m`.
    pub fn permutation_canonical(&self, m: u32) -> Self {
        let mut best = self.clone();
        for perm in permutations(m) {
            let t = self.recolor(&|l| perm[(l - 1) as usize]);
            if t < best {
                best = t;
            }
        }
        best
    }

    /// Whether the root's children split into two nonempty groups whose stochastic
    /// colour sets are disjoint.
    pub fn is_decomposable(&self) -> bool {
        let children = self.children();
        let k = children.len();
        if k < 2 {
            return false;
        }
        let sets: Vec<BTreeSet<u32>> = children.iter().map(|t| t.colors()).collect();
        // Fixing the last child in the second group visits each partition once.
        (1u64..(1 << (k - 1))).any(|mask| {
            let mut first = BTreeSet::<u32>::new();
            let mut second = BTreeSet::<u32>::new();
            for (i, s) in sets.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    first.extend(s);
                } else {
                    second.extend(s);
                }
            }
            first.is_disjoint(&second)
        })
    }

    /// Bracket notation with colour indices replaced by `j, k, …` in order of appearance.
    pub fn pattern(&self) -> String {
        let mut names = BTreeMap::new();
        let mut order = Vec::new();
        self.collect_color_order(&mut order);
        for l in order {
            let next = names.len();
            names.entry(l).or_insert_with(|| PATTERN_NAMES[next % PATTERN_NAMES.len()].to_string());
        }
        let mut out = String::new();
        self.write_with(&mut out, &|l| names[&l].clone());
        out
    }

    fn collect_color_order(&self, order: &mut Vec<u32>) {
        match self {
            Stochastic(l) => order.push(*l),
            Deterministic(c) | FRoot(c) => c.iter().for_each(|t| t.collect_color_order(order)),
            Empty => {}
        }
    }

    fn write_with(&self, out: &mut String, name: &impl Fn(u32) -> String) {
        match self {
            Empty => out.push('∅'),
            Stochastic(l) => {
                out.push_str("•_");
                out.push_str(&name(*l));
            }
            Deterministic(c) if c.is_empty() => out.push_str("•_0"),
            FRoot(c) if c.is_empty() => out.push_str("•_f"),
            Deterministic(c) | FRoot(c) => {
                out.push('[');
                for (i, t) in c.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    t.write_with(out, name);
                }
                out.push_str(if matches!(self, FRoot(_)) { "]_f" } else { "]_0" });
            }
        }
    }
}

const PATTERN_NAMES: [&str; 4] = ["j", "k", "l", "n"];

impl fmt::Display for ColoredTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        self.write_with(&mut out, &|l| l.to_string());
        f.write_str(&out)
    }
}

fn sorted(mut children: Vec<ColoredTree>) -> Vec<ColoredTree> {
    children.sort();
    children
}

fn factorial(n: i64) -> i64 {
    (1..=n).product()
}

fn permutations(m: u32) -> Vec<Vec<u32>> {
    fn go(rest: &mut Vec<u32>, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            prefix.push(x);
            go(rest, prefix, out);
            prefix.pop();
            rest.insert(i, x);
        }
    }
    let mut out = Vec::new();
    go(&mut (1..=m).collect(), &mut Vec::new(), &mut out);
    out
}

/// All multisets (as sorted vectors) drawn from `pool` with total weight exactly `target`.
fn multisets(pool: &[ColoredTree], target: u32) -> Vec<Vec<ColoredTree>> {
    fn go(
        pool: &[ColoredTree],
        start: usize,
        remaining: u32,
        current: &mut Vec<ColoredTree>,
        out: &mut Vec<Vec<ColoredTree>>,
    ) {
        if remaining == 0 {
            out.push(current.clone());
            return;
        }
        for i in start..pool.len() {
            let w = pool[i].weight();
            if w <= remaining {
                current.push(pool[i].clone());
                go(pool, i, remaining - w, current, out);
                current.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(pool, 0, target, &mut Vec::new(), &mut out);
    out
}

/// Nonempty trees of weight at most `max_weight`, sorted.
fn nonempty_trees(max_weight: u32, m: u32) -> Vec<ColoredTree> {
    let mut by_weight: Vec<Vec<ColoredTree>> = vec![Vec::new(); max_weight as usize + 1];
    if max_weight >= 1 {
        by_weight[1] = (1..=m).map(Stochastic).collect();
    }
    for w in 2..=max_weight {
        let mut pool: Vec<ColoredTree> = by_weight[..(w - 1) as usize].concat();
        pool.sort();
        by_weight[w as usize] = multisets(&pool, w - 2).into_iter().map(Deterministic).collect();
    }
    let mut all = by_weight.concat();
    all.sort();
    all
}

/// Every tree of `T_add` (including `∅`) with order at most `max_order`, sorted.
pub fn enumerate_tadd(max_order: Ratio<i64>, m: u32) -> Vec<ColoredTree> {
    assert!(max_order >= Ratio::from_integer(0), "max_order must be nonnegative");
    let max_weight = (max_order * 2).floor().to_integer() as u32;
    let mut all = vec![Empty];
    all.extend(nonempty_trees(max_weight, m));
    all
}

/// f-rooted trees of order `p` with an even number of leaves of every colour that
/// cannot be split into two f-trees with disjoint stochastic colours.
pub fn relevant_f_trees(p: u32, m: u32) -> Vec<ColoredTree> {
    let target = 2 * p;
    let pool = nonempty_trees(target, m);
    multisets(&pool, target)
        .into_iter()
        .map(FRoot)
        .filter(|u| u.color_counts().values().all(|c| c % 2 == 0))
        .filter(|u| !u.is_decomposable())
        .collect()
}

/// Trees that coincide once stochastic colours are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeFamily {
    pub shape: ColoredTree,
    pub members: Vec<ColoredTree>,
}

impl ShapeFamily {
    /// Bracket notation of the first member with colours written as `j, k, …`.
    pub fn pattern(&self) -> String {
        self.members[0].pattern()
    }
}

pub fn shape_families(trees: &[ColoredTree]) -> Vec<ShapeFamily> {
    let mut groups: BTreeMap<ColoredTree, Vec<ColoredTree>> = BTreeMap::new();
    for t in trees {
        groups.entry(t.erase_colors()).or_default().push(t.clone());
    }
    groups
        .into_iter()
        .map(|(shape, members)| ShapeFamily { shape, members })
        .collect()
}

/// Classes of trees equal up to a permutation of the colours `1..=m`.
pub fn color_permutation_classes(trees: &[ColoredTree], m: u32) -> Vec<ColoredTree> {
    trees
        .iter()
        .map(|t| t.permutation_canonical(m))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}
