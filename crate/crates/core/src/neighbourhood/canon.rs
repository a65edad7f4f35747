//! Canonical labelling of small structures with ordered centres.
//!
//! Colour refinement followed by individualisation of the first non-singleton
//! cell; the least leaf encoding is the canonical code. Automorphisms found at
//! equal leaves prune the search.

use crate::db::{Database, Elem, RelId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canonical {
    /// Complete isomorphism invariant of (structure, centres).
    pub code: Vec<u32>,
    /// `order[p]` is the element placed at position `p`.
    pub order: Vec<Elem>,
}

fn mix(h: u64, x: u64) -> u64 {
    let mut z = (h ^ x).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Distinct centres get colours `0..c` in order of first occurrence, the rest `c`.
pub(crate) fn initial_colours(n: usize, centres: &[Elem]) -> Vec<u32> {
    let mut distinct: Vec<Elem> = Vec::new();
    for &c in centres {
        if !distinct.contains(&c) {
            distinct.push(c);
        }
    }
    let rest = distinct.len() as u32;
    let mut colours = vec![rest; n];
    for (i, &c) in distinct.iter().enumerate() {
        colours[c as usize] = i as u32;
    }
    normalise(&mut colours);
    colours
}

/// Renumbers colours to dense ranks preserving their order.
fn normalise(colours: &mut [u32]) -> usize {
    let mut vals: Vec<u32> = colours.to_vec();
    vals.sort_unstable();
    vals.dedup();
    for c in colours.iter_mut() {
        *c = vals.binary_search(c).unwrap() as u32;
    }
    vals.len()
}

/// Iterated colour refinement to the coarsest stable partition refining `colours`.
pub(crate) fn refine(s: &Database, colours: &mut [u32]) {
    let n = s.n();
    let rels = s.schema().relations();
    let mut cells = normalise(colours);
    let mut keys: Vec<(u32, u64, u32)> = Vec::with_capacity(n);
    let mut entries: Vec<u64> = Vec::new();
    while cells < n {
        keys.clear();
        for v in 0..n as Elem {
            entries.clear();
            for &(rel, t) in s.incident(v) {
                let tup = s.tuple(rel as RelId, t as usize);
                let mut h = mix(0x51, rel as u64);
                if rels[rel as usize].symmetric {
                    let other = if tup[0] == v { tup[1] } else { tup[0] };
                    h = mix(h, colours[other as usize] as u64);
                } else {
                    for (p, &x) in tup.iter().enumerate() {
                        let mark = if x == v { 1u64 << 40 } else { 0 };
                        h = mix(h, (p as u64) << 48 | mark | colours[x as usize] as u64);
                    }
                }
                entries.push(h);
            }
            entries.sort_unstable();
            let sig = entries.iter().fold(0xABCDu64, |h, &e| mix(h, e));
            keys.push((colours[v as usize], sig, v));
        }
        keys.sort_unstable();
        let mut rank = 0u32;
        for i in 0..n {
            if i > 0 && (keys[i].0, keys[i].1) != (keys[i - 1].0, keys[i - 1].1) {
                rank += 1;
            }
            colours[keys[i].2 as usize] = rank;
        }
        let new_cells = rank as usize + 1;
        if new_cells == cells {
            break;
        }
        cells = new_cells;
    }
}

fn individualise(colours: &[u32], v: Elem) -> Vec<u32> {
    let cv = colours[v as usize];
    colours
        .iter()
        .enumerate()
        .map(|(u, &c)| {
            if c > cv || (c == cv && u as Elem != v) {
                c + 1
            } else {
                c
            }
        })
        .collect()
}

/// Encoding of the structure under the ordering given by discrete colours.
fn encode(s: &Database, centres: &[Elem], pos: &[u32]) -> Vec<u32> {
    let mut code = vec![s.n() as u32, centres.len() as u32];
    code.extend(centres.iter().map(|&c| pos[c as usize]));
    let mut mapped: Vec<u32> = Vec::new();
    for (rel, r) in s.schema().relations().iter().enumerate() {
        let ar = r.arity;
        mapped.clear();
        for t in s.tuples(rel) {
            let start = mapped.len();
            mapped.extend(t.iter().map(|&x| pos[x as usize]));
            if r.symmetric && mapped[start] > mapped[start + 1] {
                mapped.swap(start, start + 1);
            }
        }
        let mut rows: Vec<&[u32]> = mapped.chunks_exact(ar).collect();
        rows.sort_unstable();
        code.push(rows.len() as u32);
        for row in rows {
            code.extend_from_slice(row);
        }
    }
    code
}

struct Search<'a> {
    s: &'a Database,
    centres: &'a [Elem],
    best: Option<(Vec<u32>, Vec<u32>, Vec<Elem>)>,
    autos: Vec<Vec<u32>>,
}

fn find(uf: &mut [u32], x: u32) -> u32 {
    let mut r = x;
    while uf[r as usize] != r {
        r = uf[r as usize];
    }
    let mut y = x;
    while uf[y as usize] != r {
        let next = uf[y as usize];
        uf[y as usize] = r;
        y = next;
    }
    r
}

impl<'a> Search<'a> {
    /// Returns `Some(depth)` to abandon every node deeper than `depth`.
    fn dfs(&mut self, mut colours: Vec<u32>, path: &mut Vec<Elem>) -> Option<usize> {
        refine(self.s, &mut colours);
        let n = self.s.n();
        let mut count = vec![0u32; n];
        for &c in &colours {
            count[c as usize] += 1;
        }
        let target = (0..n).find(|&c| count[c] > 1);
        let Some(target) = target else {
            let code = encode(self.s, self.centres, &colours);
            let mut order = vec![0 as Elem; n];
            for (v, &c) in colours.iter().enumerate() {
                order[c as usize] = v as Elem;
            }
            let cmp = self.best.as_ref().map(|(bc, _, _)| code.cmp(bc));
            match cmp {
                None | Some(std::cmp::Ordering::Less) => self.best = Some((code, colours, path.clone())),
                Some(std::cmp::Ordering::Greater) => {}
                Some(std::cmp::Ordering::Equal) => {
                    // g maps the best leaf onto this one: g(best_order[p]) = order[p].
                    let (_, bpos, bpath) = self.best.as_ref().unwrap();
                    let g: Vec<u32> = (0..n).map(|v| order[bpos[v] as usize]).collect();
                    let common = path.iter().zip(bpath).take_while(|(a, b)| a == b).count();
                    self.autos.push(g);
                    return Some(common);
                }
            }
            return None;
        };
        let cell: Vec<Elem> = (0..n as Elem)
            .filter(|&v| colours[v as usize] as usize == target)
            .collect();
        let mut explored: Vec<Elem> = Vec::new();
        for &v in &cell {
            if !explored.is_empty() && self.pruned(v, path, &explored) {
                continue;
            }
            explored.push(v);
            path.push(v);
            let r = self.dfs(individualise(&colours, v), path);
            path.pop();
            if let Some(depth) = r {
                if depth < path.len() {
                    return Some(depth);
                }
            }
        }
        None
    }

    fn pruned(&self, v: Elem, path: &[Elem], explored: &[Elem]) -> bool {
        let n = self.s.n();
        let mut uf: Vec<u32> = (0..n as u32).collect();
        let mut any = false;
        for g in &self.autos {
            if path.iter().all(|&p| g[p as usize] == p) {
                any = true;
                for x in 0..n {
                    let (a, b) = (find(&mut uf, x as u32), find(&mut uf, g[x]));
                    if a != b {
                        uf[a as usize] = b;
                    }
                }
            }
        }
        if !any {
            return false;
        }
        let rv = find(&mut uf, v);
        explored.iter().any(|&u| find(&mut uf, u) == rv)
    }
}

pub fn canonical_form(s: &Database, centres: &[Elem]) -> Canonical {
    let colours = initial_colours(s.n(), centres);
    let mut search = Search {
        s,
        centres,
        best: None,
        autos: Vec::new(),
    };
    search.dfs(colours, &mut Vec::new());
    let (code, pos, _) = search.best.expect("search reaches a leaf");
    let mut order = vec![0 as Elem; s.n()];
    for (v, &c) in pos.iter().enumerate() {
        order[c as usize] = v as Elem;
    }
    Canonical { code, order }
}

/// Lexicographically least isomorphism from `(a, ca)` onto `(b, cb)` mapping
/// centres to centres in order, as `map[x] = image of x`.
pub fn least_isomorphism(a: &Database, ca: &[Elem], b: &Database, cb: &[Elem]) -> Option<Vec<Elem>> {
    if a.n() != b.n() || ca.len() != cb.len() || a.total_tuples() != b.total_tuples() {
        return None;
    }
    let mut col_a = initial_colours(a.n(), ca);
    let mut col_b = initial_colours(b.n(), cb);
    refine(a, &mut col_a);
    refine(b, &mut col_b);
    let mut sa = col_a.clone();
    let mut sb = col_b.clone();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return None;
    }
    let mut forced: Vec<Option<Elem>> = vec![None; a.n()];
    for (&x, &y) in ca.iter().zip(cb) {
        match forced[x as usize] {
            Some(prev) if prev != y => return None,
            _ => forced[x as usize] = Some(y),
        }
    }
    let mut map: Vec<Option<Elem>> = vec![None; a.n()];
    let mut used = vec![false; b.n()];
    let ok = assign(a, b, &col_a, &col_b, &forced, &mut map, &mut used, 0);
    if ok {
        Some(map.into_iter().map(|m| m.unwrap()).collect())
    } else {
        None
    }
}

#[allow(clippy::too_many_arguments)]
fn assign(
    a: &Database,
    b: &Database,
    col_a: &[u32],
    col_b: &[u32],
    forced: &[Option<Elem>],
    map: &mut [Option<Elem>],
    used: &mut [bool],
    x: usize,
) -> bool {
    if x == a.n() {
        return true;
    }
    let candidates: Vec<Elem> = match forced[x] {
        Some(y) => vec![y],
        None => (0..b.n() as Elem).collect(),
    };
    for y in candidates {
        if used[y as usize] || col_b[y as usize] != col_a[x] {
            continue;
        }
        map[x] = Some(y);
        used[y as usize] = true;
        let consistent = a.incident(x as Elem).iter().all(|&(rel, t)| {
            let tup = a.tuple(rel as RelId, t as usize);
            let img: Option<Vec<Elem>> = tup.iter().map(|&z| map[z as usize]).collect();
            match img {
                Some(img) => b.contains_tuple(rel as RelId, &img),
                None => true,
            }
        });
        if consistent && assign(a, b, col_a, col_b, forced, map, used, x + 1) {
            return true;
        }
        map[x] = None;
        used[y as usize] = false;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::db::Schema;
    use std::sync::Arc;

    fn graph(n: usize, edges: &[(u32, u32)]) -> Database {
        Database::new(
            Arc::new(Schema::graph()),
            n,
            n,
            edges.iter().map(|&(a, b)| (0, vec![a, b])),
        )
        .unwrap()
    }

    fn relabel(g: &Database, perm: &[u32]) -> Database {
        let edges: Vec<(u32, u32)> = g
            .tuples(0)
            .map(|t| (perm[t[0] as usize], perm[t[1] as usize]))
            .collect();
        graph(g.n(), &edges)
    }

    #[test]
    fn invariant_under_relabelling() {
        let g = graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)]);
        let perm = [3, 5, 0, 1, 4, 2];
        let h = relabel(&g, &perm);
        let a = canonical_form(&g, &[0]);
        let b = canonical_form(&h, &[perm[0]]);
        assert_eq!(a.code, b.code);
        let c = canonical_form(&g, &[1]);
        assert_ne!(a.code, c.code);
    }

    #[test]
    fn centre_order_matters() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let a = canonical_form(&g, &[0, 1]);
        let b = canonical_form(&g, &[1, 0]);
        let c = canonical_form(&g, &[2, 1]);
        assert_ne!(a.code, b.code);
        assert_eq!(a.code, c.code);
        let d = canonical_form(&g, &[1, 1]);
        assert_ne!(d.code, canonical_form(&g, &[1]).code);
    }

    #[test]
    fn regular_graphs_need_branching() {
        // Two 3-regular graphs on 6 vertices: prism and K_{3,3}.
        let prism = graph(
            6,
            &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (0, 3), (1, 4), (2, 5)],
        );
        let k33 = graph(
            6,
            &[(0, 3), (0, 4), (0, 5), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5)],
        );
        assert_ne!(canonical_form(&prism, &[]).code, canonical_form(&k33, &[]).code);
        let p2 = relabel(&prism, &[5, 3, 1, 0, 4, 2]);
        assert_eq!(canonical_form(&prism, &[]).code, canonical_form(&p2, &[]).code);
    }

    #[test]
    fn least_isomorphism_is_lexicographic() {
        let g = graph(3, &[(0, 1), (0, 2)]);
        let m = least_isomorphism(&g, &[0], &g, &[0]).unwrap();
        assert_eq!(m, vec![0, 1, 2]);
        let h = graph(3, &[(2, 1), (2, 0)]);
        let m = least_isomorphism(&g, &[0], &h, &[2]).unwrap();
        assert_eq!(m, vec![2, 0, 1]);
        assert!(least_isomorphism(&g, &[1], &h, &[2]).is_none());
    }
}
