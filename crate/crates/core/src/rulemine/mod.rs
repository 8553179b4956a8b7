//! Closed itemset mining over per-entry-point check sets and targeted
//! association rules that point out entry points missing their siblings'
//! checks.

mod closed;
mod ratio;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkmining::CheckSet;

pub use closed::{
    brute_force_closed, mine_closed_itemsets, ClosedItemset, SizeError, TransactionDB, BRUTE_FORCE_MAX_ITEMS,
};
pub use ratio::{parse_confidence, parse_rational, to_f64, MinSupport, Rational, ThresholdError};

/// Default confidence threshold, 0.85.
pub fn default_minconf() -> Rational {
    Ratio::new(85, 100)
}

/// A rule `X => Y` for one target transaction, with counts kept exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetedRule {
    pub target: usize,
    pub antecedent: BTreeSet<usize>,
    pub consequent: BTreeSet<usize>,
    pub supporters: BTreeSet<usize>,
    /// Transactions containing the antecedent.
    pub antecedent_count: usize,
    pub transactions: usize,
}

impl TargetedRule {
    pub fn support(&self) -> Rational {
        Ratio::new(self.supporters.len() as u64, self.transactions as u64)
    }

    pub fn confidence(&self) -> Rational {
        Ratio::new(self.supporters.len() as u64, self.antecedent_count as u64)
    }
}

/// Rules for transaction `j`: for each closed `I` meeting `j` partially,
/// `X = A_j ∩ I` and `Y = I \ A_j`. Identical `(X, Y)` pairs keep the
/// instance with the larger support.
pub fn generate_targeted_rules(
    db: &TransactionDB,
    closed: &BTreeSet<ClosedItemset>,
    j: usize,
    minconf: Rational,
) -> Vec<TargetedRule> {
    let a = &db.transactions[j];
    let mut best: BTreeMap<(BTreeSet<usize>, BTreeSet<usize>), TargetedRule> = BTreeMap::new();
    for c in closed {
        let x: BTreeSet<usize> = a.intersection(&c.items).copied().collect();
        let y: BTreeSet<usize> = c.items.difference(a).copied().collect();
        if x.is_empty() || y.is_empty() || c.supporters.len() < 2 {
            continue;
        }
        let rule = TargetedRule {
            target: j,
            antecedent_count: db.supporters(&x).len(),
            antecedent: x,
            consequent: y,
            supporters: c.supporters.clone(),
            transactions: db.len(),
        };
        if rule.confidence() < minconf {
            continue;
        }
        let key = (rule.antecedent.clone(), rule.consequent.clone());
        match best.get(&key) {
            Some(old) if old.supporters.len() >= rule.supporters.len() => {}
            _ => {
                best.insert(key, rule);
            }
        }
    }
    best.into_values().collect()
}

/// True when the target's non-empty check set is a frequent closed itemset
/// whose supporters include enough entry points with exactly these checks
/// (at least one besides the target).
pub fn mark_consistent(db: &TransactionDB, closed: &BTreeSet<ClosedItemset>, j: usize, min_count: usize) -> bool {
    let a = &db.transactions[j];
    closed.iter().any(|c| {
        &c.items == a && c.supporters.iter().filter(|&&t| &db.transactions[t] == a).count() >= min_count.max(2)
    })
}

/// Ratio of recommendations to antecedent checks at which a rule is dropped.
pub const MAX_CONSEQUENT_RATIO: usize = 5;
/// Largest consequent kept.
pub const MAX_CONSEQUENT: usize = 100;

pub fn keep_rule(x_len: usize, y_len: usize) -> bool {
    y_len < MAX_CONSEQUENT_RATIO * x_len && y_len <= MAX_CONSEQUENT
}

pub fn filter_rules(rules: Vec<TargetedRule>) -> Vec<TargetedRule> {
    rules.into_iter().filter(|r| keep_rule(r.antecedent.len(), r.consequent.len())).collect()
}

/// A rule over check strings and entry point names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationRule {
    pub service: String,
    pub target: String,
    pub antecedent: Vec<String>,
    pub consequent: Vec<String>,
    pub supporters: Vec<String>,
    #[serde(with = "ratio::serde_ratio")]
    pub support: Rational,
    #[serde(with = "ratio::serde_ratio")]
    pub confidence: Rational,
}

/// Mining results for a whole corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub minsup: String,
    #[serde(with = "ratio::serde_ratio")]
    pub minconf: Rational,
    pub rules: Vec<AssociationRule>,
    /// Entry points whose check set is shared by another entry point.
    pub consistent: BTreeMap<String, bool>,
}

fn names(db: &TransactionDB, ids: &BTreeSet<usize>) -> Vec<String> {
    db.item_names(ids).map(str::to_string).collect()
}

/// Mines each service separately; rules are sorted by target, confidence
/// (highest first), antecedent, then consequent.
pub fn mine_rules(check_sets: &[CheckSet], minsup: MinSupport, minconf: Rational) -> RuleSet {
    let mut services: BTreeMap<&str, Vec<&CheckSet>> = BTreeMap::new();
    for cs in check_sets {
        services.entry(cs.service_name()).or_default().push(cs);
    }
    let mut rules = Vec::new();
    let mut consistent = BTreeMap::new();
    for (service, sets) in services {
        let db = TransactionDB::new(sets.iter().map(|cs| (cs.entry_point.to_string(), cs.checks.clone())).collect());
        let min = minsup.min_count(db.len());
        let closed = mine_closed_itemsets(&db, min);
        let per_target: Vec<(usize, Vec<TargetedRule>, bool)> = (0..db.len())
            .into_par_iter()
            .map(|j| {
                let rs = filter_rules(generate_targeted_rules(&db, &closed, j, minconf));
                (j, rs, mark_consistent(&db, &closed, j, min))
            })
            .collect();
        for (j, rs, ok) in per_target {
            consistent.insert(db.labels[j].clone(), ok);
            rules.extend(rs.into_iter().map(|r| AssociationRule {
                service: service.to_string(),
                target: db.labels[r.target].clone(),
                antecedent: names(&db, &r.antecedent),
                consequent: names(&db, &r.consequent),
                supporters: r.supporters.iter().map(|&t| db.labels[t].clone()).collect(),
                support: r.support(),
                confidence: r.confidence(),
            }));
        }
    }
    rules.sort_by(|a, b| {
        (&a.target, Reverse(a.confidence), &a.antecedent, &a.consequent).cmp(&(
            &b.target,
            Reverse(b.confidence),
            &b.antecedent,
            &b.consequent,
        ))
    });
    RuleSet { minsup: minsup.to_string(), minconf, rules, consistent }
}
