//! Level-wise frequent itemset mining over (transaction, item) pairs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::host::{Connection, HostError};

pub type Transactions = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ItemsetResult {
    /// Sorted, distinct.
    pub items: Vec<String>,
    pub support: u64,
}

impl fmt::Display for ItemsetResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}:{}", self.items.join(","), self.support)
    }
}

/// All itemsets contained in at least `minsup` transactions, ordered by
/// size and then items. `minsup` of 0 is treated as 1.
pub fn frequent_itemsets(transactions: &Transactions, minsup: u64) -> Vec<ItemsetResult> {
    let minsup = minsup.max(1);
    let baskets: Vec<&BTreeSet<String>> = transactions.values().collect();

    let mut counts: BTreeMap<&String, u64> = BTreeMap::new();
    for b in &baskets {
        for item in b.iter() {
            *counts.entry(item).or_default() += 1;
        }
    }
    let mut level: Vec<(Vec<&String>, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= minsup)
        .map(|(i, c)| (alloc::vec![i], c))
        .collect();

    let mut out = Vec::new();
    while !level.is_empty() {
        let frequent: BTreeSet<&[&String]> = level.iter().map(|(s, _)| s.as_slice()).collect();
        let mut next = Vec::new();
        for (i, (a, _)) in level.iter().enumerate() {
            for (b, _) in &level[i + 1..] {
                let k = a.len();
                if a[..k - 1] != b[..k - 1] {
                    // Level is sorted, so later itemsets share even less.
                    break;
                }
                let mut cand = a.clone();
                cand.push(b[k - 1]);
                let all_subsets_frequent = (0..cand.len()).all(|skip| {
                    let sub: Vec<&String> = cand
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != skip)
                        .map(|(_, s)| *s)
                        .collect();
                    frequent.contains(sub.as_slice())
                });
                if !all_subsets_frequent {
                    continue;
                }
                let support = baskets
                    .iter()
                    .filter(|b| cand.iter().all(|item| b.contains(*item)))
                    .count() as u64;
                if support >= minsup {
                    next.push((cand, support));
                }
            }
        }
        out.extend(level.drain(..).map(|(items, support)| ItemsetResult {
            items: items.into_iter().cloned().collect(),
            support,
        }));
        level = next;
    }
    out
}

/// Reads `minsup <n>` from a module initialization string.
pub fn parse_minsup(init: &str) -> Option<u64> {
    let mut words = init.split_whitespace();
    match (words.next(), words.next(), words.next()) {
        (Some(k), Some(v), None) if k.eq_ignore_ascii_case("minsup") => v.parse().ok().filter(|&n| n >= 1),
        _ => None,
    }
}

/// Loads (transaction, item) pairs from `table` through the host, skipping
/// rows where either value is NULL.
pub fn load_transactions(
    conn: &Connection<'_>,
    table: &str,
    txn_column: &str,
    item_column: &str,
) -> Result<Transactions, HostError> {
    let rows = conn.execute(&format!("SELECT {txn_column}, {item_column} FROM {table}"))?;
    let mut t = Transactions::new();
    for row in rows {
        if let [Some(txn), Some(item)] = row.as_slice() {
            t.entry(txn.clone()).or_default().insert(item.clone());
        }
    }
    Ok(t)
}
