use std::collections::{BTreeMap, BTreeSet};

use fixedbitset::FixedBitSet;
use rayon::prelude::*;
use thiserror::Error;

/// Items are dense ids into a sorted universe; each transaction is a set of
/// item ids labelled by its entry point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransactionDB {
    pub items: Vec<String>,
    pub labels: Vec<String>,
    pub transactions: Vec<BTreeSet<usize>>,
}

impl TransactionDB {
    pub fn new(rows: Vec<(String, BTreeSet<String>)>) -> Self {
        let universe: BTreeSet<&String> = rows.iter().flat_map(|(_, t)| t).collect();
        let items: Vec<String> = universe.into_iter().cloned().collect();
        let id: BTreeMap<&str, usize> = items.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let transactions = rows.iter().map(|(_, t)| t.iter().map(|s| id[s.as_str()]).collect()).collect();
        TransactionDB { labels: rows.into_iter().map(|(l, _)| l).collect(), items, transactions }
    }

    /// Database over raw item ids; labels are the transaction indices.
    pub fn from_ids(n_items: usize, transactions: Vec<BTreeSet<usize>>) -> Self {
        TransactionDB {
            items: (0..n_items).map(|i| i.to_string()).collect(),
            labels: (0..transactions.len()).map(|i| i.to_string()).collect(),
            transactions,
        }
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// Transactions containing every item of `set`.
    pub fn supporters(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        (0..self.len()).filter(|&t| set.is_subset(&self.transactions[t])).collect()
    }

    /// Items shared by all transactions in `tids`; every item when empty.
    pub fn closure(&self, tids: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut it = tids.iter();
        let Some(&first) = it.next() else { return (0..self.items.len()).collect() };
        let mut out = self.transactions[first].clone();
        for &t in it {
            out.retain(|i| self.transactions[t].contains(i));
        }
        out
    }

    pub fn item_names<'a>(&'a self, set: &'a BTreeSet<usize>) -> impl Iterator<Item = &'a str> + 'a {
        set.iter().map(|&i| self.items[i].as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClosedItemset {
    pub items: BTreeSet<usize>,
    pub supporters: BTreeSet<usize>,
}

impl ClosedItemset {
    pub fn support_count(&self) -> usize {
        self.supporters.len()
    }
}

struct Bits {
    item_tids: Vec<FixedBitSet>,
    rows: Vec<FixedBitSet>,
    n_items: usize,
}

impl Bits {
    fn new(db: &TransactionDB) -> Self {
        let n_items = db.items.len();
        let mut item_tids = vec![FixedBitSet::with_capacity(db.len()); n_items];
        let mut rows = vec![FixedBitSet::with_capacity(n_items); db.len()];
        for (t, row) in db.transactions.iter().enumerate() {
            for &i in row {
                item_tids[i].insert(t);
                rows[t].insert(i);
            }
        }
        Bits { item_tids, rows, n_items }
    }

    fn closure(&self, tids: &FixedBitSet) -> FixedBitSet {
        let mut out = FixedBitSet::with_capacity(self.n_items);
        out.insert_range(..);
        for t in tids.ones() {
            out.intersect_with(&self.rows[t]);
        }
        out
    }

    fn to_closed(&self, items: &FixedBitSet, tids: &FixedBitSet) -> ClosedItemset {
        ClosedItemset { items: items.ones().collect(), supporters: tids.ones().collect() }
    }

    /// Prefix-preserving closure extension: from closed `p` with tidset
    /// `tids`, extend by every item after `core` not already in `p`.
    fn expand(&self, p: &FixedBitSet, tids: &FixedBitSet, core: usize, min: usize, out: &mut Vec<ClosedItemset>) {
        for e in core..self.n_items {
            if let Some((q, qt)) = self.extension(p, tids, e, min) {
                out.push(self.to_closed(&q, &qt));
                self.expand(&q, &qt, e + 1, min, out);
            }
        }
    }

    fn extension(
        &self,
        p: &FixedBitSet,
        tids: &FixedBitSet,
        e: usize,
        min: usize,
    ) -> Option<(FixedBitSet, FixedBitSet)> {
        if p.contains(e) {
            return None;
        }
        let mut qt = tids.clone();
        qt.intersect_with(&self.item_tids[e]);
        if qt.count_ones(..) < min {
            return None;
        }
        let q = self.closure(&qt);
        // The closure may not add any item before e that p lacks.
        let grew_before = q.ones().take_while(|&i| i < e).any(|i| !p.contains(i));
        (!grew_before).then_some((q, qt))
    }
}

/// Frequent closed itemsets with at least `min_count` supporters, excluding
/// the empty set. Enumerated by closure extension without candidate
/// generation; top-level branches run in parallel.
pub fn mine_closed_itemsets(db: &TransactionDB, min_count: usize) -> BTreeSet<ClosedItemset> {
    let min = min_count.max(1);
    if db.len() < min {
        return BTreeSet::new();
    }
    let bits = Bits::new(db);
    let mut all_tids = FixedBitSet::with_capacity(db.len());
    all_tids.insert_range(..);
    let root = bits.closure(&all_tids);
    let mut found: Vec<ClosedItemset> = (0..bits.n_items)
        .into_par_iter()
        .flat_map_iter(|e| {
            let mut out = Vec::new();
            if let Some((q, qt)) = bits.extension(&root, &all_tids, e, min) {
                out.push(bits.to_closed(&q, &qt));
                bits.expand(&q, &qt, e + 1, min, &mut out);
            }
            out
        })
        .collect();
    if root.count_ones(..) > 0 {
        found.push(bits.to_closed(&root, &all_tids));
    }
    found.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("brute force limited to {max} items, database has {found}")]
pub struct SizeError {
    pub max: usize,
    pub found: usize,
}

pub const BRUTE_FORCE_MAX_ITEMS: usize = 20;

/// Reference enumeration straight from the definitions: every non-empty
/// item subset that is frequent and equals the closure of its supporters.
pub fn brute_force_closed(db: &TransactionDB, min_count: usize) -> Result<BTreeSet<ClosedItemset>, SizeError> {
    let n = db.items.len();
    if n > BRUTE_FORCE_MAX_ITEMS {
        return Err(SizeError { max: BRUTE_FORCE_MAX_ITEMS, found: n });
    }
    let min = min_count.max(1);
    let mut out = BTreeSet::new();
    for mask in 1u32..(1u32 << n) {
        let set: BTreeSet<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let supporters = db.supporters(&set);
        if supporters.len() >= min && db.closure(&supporters) == set {
            out.insert(ClosedItemset { items: set, supporters });
        }
    }
    Ok(out)
}
