//! Brute-force reference semantics: exact evaluation, answer sets, and an
//! exhaustive search for databases within a small edit distance.

use std::collections::{HashMap, HashSet};

use crate::db::{Database, Elem, Explorer, RelId};
use crate::error::{Error, Result};
use crate::neighbourhood::{extract_neighbourhood, NbType, TypeRegistry, TypeSet};
use crate::query::{Clause, HanfSentence, QueryNF, SphereAtom};
use crate::splits::FoundTuples;

pub fn eval_sphere(db: &Database, tuple: &[Elem], s: &SphereAtom) -> bool {
    if tuple.len() != s.ty.arity() {
        return false;
    }
    let set = TypeSet::new(s.ty.radius(), s.ty.arity(), [s.ty.clone()]).unwrap();
    let found = set.checker().contains(db, tuple);
    found
}

/// Number of elements whose neighbourhood has the given 1-centre type.
pub fn count_type(db: &Database, t: &NbType) -> usize {
    assert_eq!(t.arity(), 1, "counting needs a 1-centre type");
    let set = TypeSet::new(t.radius(), 1, [t.clone()]).unwrap();
    let mut ch = set.checker();
    (0..db.n() as Elem).filter(|&e| ch.contains(db, &[e])).count()
}

pub fn eval_hanf(db: &Database, h: &HanfSentence) -> bool {
    h.holds_with_count(count_type(db, &h.ty))
}

/// Whether some tuple of `db` has type `t`. Candidate tuples for each
/// component are collected by leader, then one per component is chosen with
/// all components pairwise farther apart than 2r+1.
pub fn realises(db: &Database, t: &NbType) -> bool {
    let shape = t.shape();
    let r = t.radius();
    let rep = t.representative();
    let reg = TypeRegistry::new();
    let mut lists: Vec<Vec<Vec<Elem>>> = Vec::new();
    for g in &shape.groups {
        let centres: Vec<Elem> = g.iter().map(|&j| t.centres()[j]).collect();
        let comp = rep.gaifman_ball(&centres[..1], rep.n());
        let frag = rep.induced(&comp);
        let local: Vec<Elem> = centres.iter().map(|&c| frag.local_of(c).unwrap()).collect();
        let nb = crate::neighbourhood::Neighbourhood {
            fragment: frag,
            centres: local,
            radius: r,
        };
        let sub = reg.intern(&nb);
        let set = TypeSet::new(r, g.len(), [sub]).unwrap();
        let mut ft = FoundTuples::new(&set);
        let mut list = Vec::new();
        for a in 0..db.n() as Elem {
            ft.for_each(db, &[a], |b| {
                list.push(b.to_vec());
                true
            });
        }
        if list.is_empty() {
            return false;
        }
        lists.push(list);
    }
    let mut ex = Explorer::default();
    let mut chosen: Vec<&Vec<Elem>> = Vec::new();
    pick(db, r, &lists, &mut chosen, &mut ex)
}

fn pick<'l>(
    db: &Database,
    r: usize,
    lists: &'l [Vec<Vec<Elem>>],
    chosen: &mut Vec<&'l Vec<Elem>>,
    ex: &mut Explorer,
) -> bool {
    let g = chosen.len();
    if g == lists.len() {
        return true;
    }
    let forbidden: HashSet<Elem> = chosen
        .iter()
        .flat_map(|t| t.iter().copied())
        .flat_map(|x| db.gaifman_ball(&[x], 2 * r + 1))
        .collect();
    for cand in &lists[g] {
        if cand.iter().any(|x| forbidden.contains(x)) {
            continue;
        }
        chosen.push(cand);
        if pick(db, r, lists, chosen, ex) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Exact evaluator with cached sentence counts for one database.
#[derive(Debug)]
pub struct Evaluator<'q> {
    db: &'q Database,
    q: &'q QueryNF,
    spheres: TypeSet,
    counts: HashMap<NbType, usize>,
}

impl<'q> Evaluator<'q> {
    pub fn new(db: &'q Database, q: &'q QueryNF) -> Self {
        Evaluator {
            db,
            q,
            spheres: q.sphere_types(),
            counts: HashMap::new(),
        }
    }

    pub fn count(&mut self, t: &NbType) -> usize {
        if let Some(&c) = self.counts.get(t) {
            return c;
        }
        let c = count_type(self.db, t);
        self.counts.insert(t.clone(), c);
        c
    }

    pub fn sentences_hold(&mut self, clause: usize) -> bool {
        let q = self.q;
        q.clauses[clause].sentences.iter().all(|h| {
            let c = self.count(&h.ty);
            h.holds_with_count(c)
        })
    }

    /// `∃x̄ sph_τ(x̄) ∧ ψ` for the clause.
    pub fn clause_holds(&mut self, clause: usize) -> bool {
        self.sentences_hold(clause) && realises(self.db, &self.q.clauses[clause].sphere.ty)
    }

    /// Indices of clauses whose sentences hold.
    pub fn active_clauses(&mut self) -> Vec<usize> {
        (0..self.q.clauses.len()).filter(|&i| self.sentences_hold(i)).collect()
    }

    pub fn eval(&mut self, tuple: &[Elem]) -> bool {
        if tuple.len() != self.q.k {
            return false;
        }
        let spheres = &self.spheres;
        match spheres.checker().matches(self.db, tuple) {
            Some(i) => self.sentences_hold(i),
            None => false,
        }
    }
}

pub fn eval_query(db: &Database, tuple: &[Elem], q: &QueryNF) -> bool {
    Evaluator::new(db, q).eval(tuple)
}

pub fn clause_holds(db: &Database, q: &QueryNF, clause: usize) -> bool {
    Evaluator::new(db, q).clause_holds(clause)
}

pub fn decode_tuple(mut index: u64, n: usize, k: usize, out: &mut [Elem]) {
    for j in (0..k).rev() {
        out[j] = (index % n as u64) as Elem;
        index /= n as u64;
    }
}

fn power(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, _| acc.saturating_mul(n as u128))
}

/// All answers in lexicographic order, by checking every k-tuple.
pub fn answer_set(db: &Database, q: &QueryNF, budget: u128) -> Result<Vec<Vec<Elem>>> {
    let total = power(db.n(), q.k);
    if total > budget {
        return Err(Error::BudgetExceeded {
            size: total,
            cap: budget,
        });
    }
    let mut ev = Evaluator::new(db, q);
    let active = ev.active_clauses();
    let set = TypeSet::new(q.radius, q.k, active.iter().map(|&i| q.clauses[i].sphere.ty.clone()))?;
    let mut ch = set.checker();
    let mut out = Vec::new();
    let mut t = vec![0 as Elem; q.k];
    for idx in 0..total as u64 {
        decode_tuple(idx, db.n(), q.k, &mut t);
        if ch.contains(db, &t) {
            out.push(t.clone());
        }
    }
    Ok(out)
}

/// Membership for local queries: one neighbourhood extraction and type lookup.
pub fn local_member(db: &Database, tuple: &[Elem], q: &QueryNF) -> Result<bool> {
    if !q.is_local() {
        return Err(Error::NotLocal);
    }
    if tuple.len() != q.k {
        return Err(Error::CentreCountMismatch {
            expected: q.k,
            found: tuple.len(),
        });
    }
    Ok(q.sphere_types().checker().contains(db, tuple))
}

/// Number of permitted edits, ⌊ε·d·n⌋.
pub fn edit_budget(eps: f64, d: usize, n: usize) -> usize {
    (eps * d as f64 * n as f64 + 1e-9).floor().max(0.0) as usize
}

fn binomial(n: u128, k: u128) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Whether `tuple` is an answer in some database at most ⌊εdn⌋ tuple edits
/// away (degree bound kept) in which its r-type is unchanged.
pub fn closeness_check(db: &Database, tuple: &[Elem], q: &QueryNF, eps: f64, cap: u128) -> Result<bool> {
    Ok(closeness_check_many(db, &[tuple.to_vec()], q, eps, cap)?[0])
}

/// Batched closeness: one exhaustive pass over edit sets serves all tuples.
pub fn closeness_check_many(
    db: &Database,
    tuples: &[Vec<Elem>],
    q: &QueryNF,
    eps: f64,
    cap: u128,
) -> Result<Vec<bool>> {
    let n = db.n();
    let d = db.degree_bound();
    let mut ev = Evaluator::new(db, q);
    let spheres = q.sphere_types();
    let mut sph = spheres.checker();
    let mut result = vec![false; tuples.len()];
    let mut pending: Vec<(usize, usize)> = Vec::new();
    for (ti, t) in tuples.iter().enumerate() {
        if t.len() != q.k {
            return Err(Error::CentreCountMismatch {
                expected: q.k,
                found: t.len(),
            });
        }
        if let Some(i) = sph.matches(db, t) {
            if ev.sentences_hold(i) {
                result[ti] = true;
            } else {
                pending.push((ti, i));
            }
        }
    }
    let budget = edit_budget(eps, d, n);
    if pending.is_empty() || budget == 0 {
        return Ok(result);
    }

    let schema = db.schema().clone();
    let existing: HashSet<(RelId, Vec<Elem>)> = db.all_tuples().into_iter().collect();
    let mut universe: Vec<(RelId, Vec<Elem>)> = db.all_tuples();
    for (rel, r) in schema.relations().iter().enumerate() {
        let total = power(n, r.arity);
        if total > cap {
            return Err(Error::BudgetExceeded { size: total, cap });
        }
        let mut t = vec![0 as Elem; r.arity];
        for idx in 0..total as u64 {
            decode_tuple(idx, n, r.arity, &mut t);
            if r.symmetric && t[0] >= t[1] {
                continue;
            }
            if !existing.contains(&(rel, t.clone())) {
                universe.push((rel, t.clone()));
            }
        }
    }
    let u = universe.len() as u128;
    let mut space: u128 = 0;
    for j in 1..=budget as u128 {
        if j > u {
            break;
        }
        space = space.saturating_add(binomial(u, j));
    }
    if space > cap {
        return Err(Error::BudgetExceeded { size: space, cap });
    }

    let mut sentence_types: Vec<NbType> = Vec::new();
    for &(_, i) in &pending {
        for h in &q.clauses[i].sentences {
            if !sentence_types.contains(&h.ty) {
                sentence_types.push(h.ty.clone());
            }
        }
    }
    let sets: Vec<TypeSet> = sentence_types
        .iter()
        .map(|t| TypeSet::new(t.radius(), 1, [t.clone()]).unwrap())
        .collect();
    let mut checkers: Vec<_> = sets.iter().map(|s| s.checker()).collect();
    let max_rh = sentence_types.iter().map(|t| t.radius()).max().unwrap_or(0);
    let mut base_mask = vec![0u64; n];
    let mut base_count = vec![0usize; sentence_types.len()];
    for e in 0..n as Elem {
        for (s, ch) in checkers.iter_mut().enumerate() {
            if ch.contains(db, &[e]) {
                base_mask[e as usize] |= 1 << s;
                base_count[s] += 1;
            }
        }
    }
    let balls: Vec<HashSet<Elem>> = pending
        .iter()
        .map(|&(ti, _)| db.gaifman_ball(&tuples[ti], q.radius).into_iter().collect())
        .collect();

    let mut comb: Vec<usize> = Vec::new();
    let mut ex = Explorer::default();
    for size in 1..=budget.min(universe.len()) {
        comb.clear();
        comb.extend(0..size);
        loop {
            let toggled: HashSet<usize> = comb.iter().copied().collect();
            let base =
                db.all_tuples().into_iter().enumerate().filter_map(
                    |(i, t)| {
                        if toggled.contains(&i) {
                            None
                        } else {
                            Some(t)
                        }
                    },
                );
            let inserted: Vec<(RelId, Vec<Elem>)> = comb
                .iter()
                .filter(|&&i| i >= existing.len())
                .map(|&i| universe[i].clone())
                .collect();
            let edited = Database::new(schema.clone(), n, d, base.chain(inserted));
            if let Ok(edited) = edited {
                let touched: Vec<Elem> = comb.iter().flat_map(|&i| universe[i].1.iter().copied()).collect();
                let mut affected: Vec<Elem> = ex.ball(db, &touched, max_rh).to_vec();
                affected.extend_from_slice(ex.ball(&edited, &touched, max_rh));
                affected.sort_unstable();
                affected.dedup();
                let mut count: Vec<i64> = base_count.iter().map(|&c| c as i64).collect();
                for &e in &affected {
                    for (s, ch) in checkers.iter_mut().enumerate() {
                        let before = base_mask[e as usize] >> s & 1 == 1;
                        let after = ch.contains(&edited, &[e]);
                        count[s] += after as i64 - before as i64;
                    }
                }
                let holds = |clause: &Clause| {
                    clause.sentences.iter().all(|h| {
                        let s = sentence_types.iter().position(|t| *t == h.ty).unwrap();
                        h.holds_with_count(count[s] as usize)
                    })
                };
                for (p, &(ti, i)) in pending.iter().enumerate() {
                    if result[ti] || !holds(&q.clauses[i]) {
                        continue;
                    }
                    let untouched = touched.iter().all(|x| !balls[p].contains(x));
                    if untouched || sph.matches(&edited, &tuples[ti]) == Some(i) {
                        result[ti] = true;
                    }
                }
                if pending.iter().all(|&(ti, _)| result[ti]) {
                    return Ok(result);
                }
            }
            if !next_combination(&mut comb, universe.len()) {
                break;
            }
        }
    }
    Ok(result)
}

fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Type of a tuple, for callers holding a registry.
pub fn type_of(db: &Database, tuple: &[Elem], r: usize, reg: &TypeRegistry) -> Result<NbType> {
    let nb = extract_neighbourhood(db, tuple, r)?;
    Ok(reg.intern(&nb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workloads::{disjoint_copies, figure1};

    #[test]
    fn sphere_examples() {
        let reg = TypeRegistry::new();
        let s1 = SphereAtom {
            ty: figure1::tau1(&reg),
        };
        let pair = [figure1::C1, figure1::C2];
        assert!(eval_sphere(&figure1::n1(), &pair, &s1));
        assert!(!eval_sphere(&figure1::n2(), &pair, &s1));
        let two = disjoint_copies(&[(2, &figure1::n1())]);
        assert!(!eval_sphere(&two, &[figure1::C1, 8 + figure1::C2], &s1));
    }

    #[test]
    fn counting_examples() {
        let reg = TypeRegistry::new();
        let t4 = figure1::tau4(&reg);
        assert_eq!(count_type(&figure1::planted(1, 1), &t4), 1);
        assert_eq!(count_type(&figure1::planted(1, 5), &t4), 1);
        assert_eq!(count_type(&figure1::n4(), &t4), 1);
        let empty = crate::workloads::graph(0, 3, &[]);
        assert_eq!(count_type(&empty, &t4), 0);
        let q = figure1::example_query(&reg);
        let neg = &q.clauses[1].sentences[0];
        assert!(!eval_hanf(&figure1::planted(1, 1), neg));
        let two = HanfSentence {
            sign: crate::query::Sign::Positive,
            threshold: 2,
            ty: t4,
        };
        assert!(!eval_hanf(&figure1::planted(1, 1), &two));
    }

    #[test]
    fn query_examples() {
        let reg = TypeRegistry::new();
        let q = figure1::example_query(&reg);
        let pair = [figure1::C1, figure1::C2];
        assert!(eval_query(&figure1::n1(), &pair, &q));
        let g = figure1::planted(1, 2);
        assert!(!eval_query(&g, &figure1::centre_pair(1), &q));
        let answers = answer_set(&g, &q, 1 << 20).unwrap();
        assert_eq!(answers, vec![figure1::centre_pair(0).to_vec()]);
        let only_tau2 = figure1::planted(0, 3);
        let answers = answer_set(&only_tau2, &q, 1 << 20).unwrap();
        assert_eq!(answers.len(), 3);
        assert!(matches!(answer_set(&g, &q, 10), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn realisation() {
        let reg = TypeRegistry::new();
        let g = figure1::planted(1, 2);
        assert!(realises(&g, &figure1::tau1(&reg)));
        assert!(realises(&g, &figure1::tau2(&reg)));
        assert!(!realises(&g, &figure1::tau3(&reg)));
        let cross = reg.type_of(&g, &[0, 8], 2).unwrap();
        assert_eq!(cross.components(), 2);
        assert!(realises(&g, &cross));
        assert!(!realises(&figure1::n1(), &cross));
        let q = figure1::example_query(&reg);
        let mut ev = Evaluator::new(&g, &q);
        assert!(ev.clause_holds(0));
        assert!(!ev.clause_holds(1));
    }

    #[test]
    fn local_membership() {
        let reg = TypeRegistry::new();
        let q = figure1::tau1_query(&reg);
        let g = figure1::planted(2, 2);
        assert!(local_member(&g, &figure1::centre_pair(1), &q).unwrap());
        assert!(!local_member(&g, &figure1::centre_pair(2), &q).unwrap());
        assert!(matches!(
            local_member(&g, &[0, 3], &figure1::example_query(&reg)),
            Err(Error::NotLocal)
        ));
    }

    #[test]
    fn closeness_examples() {
        let reg = TypeRegistry::new();
        let q = figure1::example_query(&reg);
        let g = figure1::planted(1, 1);
        let tau2_pair = figure1::centre_pair(1).to_vec();
        let d = 3.0;
        let n = g.n() as f64;
        let eps_one = 1.0 / (d * n);
        assert!(!closeness_check(&g, &tau2_pair, &q, 0.0, 1 << 30).unwrap());
        assert!(closeness_check(&g, &tau2_pair, &q, eps_one, 1 << 30).unwrap());
        assert!(closeness_check(&g, &figure1::centre_pair(0), &q, 0.0, 1 << 30).unwrap());
        let n3 = disjoint_copies(&[(1, &figure1::n3()), (1, &figure1::n1())]);
        let tau3_pair = figure1::centre_pair(0).to_vec();
        let eps_two = 2.0 / (d * n3.n() as f64);
        assert!(!closeness_check(&n3, &tau3_pair, &q, eps_two, 1 << 30).unwrap());
        assert!(matches!(
            closeness_check(&g, &tau2_pair, &q, 3.0 * eps_one, 1000),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
