use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, RwLock};

use super::canon::{canonical_form, least_isomorphism, Canonical};
use super::{extract_neighbourhood, Neighbourhood};
use crate::db::{Database, Elem, RelId};
use crate::error::{Error, Result};

pub type TypeId = u32;

/// Centre layout of a type: which coordinates share a connected component of
/// the neighbourhood, and how far each coordinate is from its group leader.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeShape {
    /// Coordinates per component, ordered by their least coordinate (the leader).
    pub groups: Vec<Vec<usize>>,
    pub group_of: Vec<usize>,
    /// Distance from the coordinate's group leader inside the representative.
    pub offset: Vec<usize>,
}

impl TypeShape {
    pub fn components(&self) -> usize {
        self.groups.len()
    }

    pub fn leaders(&self) -> impl Iterator<Item = usize> + '_ {
        self.groups.iter().map(|g| g[0])
    }
}

#[derive(Debug)]
struct TypeInfo {
    id: TypeId,
    radius: usize,
    code: Vec<u32>,
    rep: Database,
    centres: Vec<Elem>,
    shape: TypeShape,
}

/// Isomorphism type of an r-neighbourhood with ordered centres.
///
/// The representative's elements are numbered in canonical order, so the
/// element at position `p` (1-based) is `p - 1`; centres come first.
#[derive(Debug, Clone)]
pub struct NbType(Arc<TypeInfo>);

impl PartialEq for NbType {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.radius == other.0.radius && self.0.code == other.0.code)
    }
}

impl Eq for NbType {}

impl Hash for NbType {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.radius.hash(state);
        self.0.code.hash(state);
    }
}

impl NbType {
    pub fn id(&self) -> TypeId {
        self.0.id
    }

    pub fn radius(&self) -> usize {
        self.0.radius
    }

    pub fn code(&self) -> &[u32] {
        &self.0.code
    }

    pub fn representative(&self) -> &Database {
        &self.0.rep
    }

    pub fn centres(&self) -> &[Elem] {
        &self.0.centres
    }

    /// Number of centres k.
    pub fn arity(&self) -> usize {
        self.0.centres.len()
    }

    pub fn size(&self) -> usize {
        self.0.rep.n()
    }

    pub fn shape(&self) -> &TypeShape {
        &self.0.shape
    }

    pub fn components(&self) -> usize {
        self.0.shape.components()
    }

    /// Element of the representative at a 1-based position.
    pub fn representative_element(&self, position: usize) -> Result<Elem> {
        if position == 0 || position > self.size() {
            return Err(Error::IndexOutOfRange {
                what: "position",
                value: position as u64,
                bound: self.size() as u64,
            });
        }
        Ok((position - 1) as Elem)
    }

    /// Lexicographically least isomorphism from `nb` onto the representative,
    /// as representative elements indexed by local elements of `nb`.
    pub fn embedding_into_representative(&self, nb: &Neighbourhood) -> Result<Vec<Elem>> {
        least_isomorphism(nb.db(), &nb.centres, &self.0.rep, &self.0.centres).ok_or(Error::TypeMismatch)
    }

    /// Cost in edits of planting a fresh copy of the representative: isolate
    /// `size` elements (at most `d` deletions each) and insert its tuples.
    pub fn insertion_cost(&self, d: usize) -> usize {
        self.size() * d + self.0.rep.total_tuples()
    }

    pub fn describe(&self) -> String {
        format!(
            "type#{} (r={}, k={}, |N|={}, tuples={}, components={})",
            self.0.id,
            self.0.radius,
            self.arity(),
            self.size(),
            self.0.rep.total_tuples(),
            self.components()
        )
    }
}

fn shape_of(rep: &Database, centres: &[Elem]) -> TypeShape {
    let n = rep.n();
    let mut comp: Vec<usize> = vec![usize::MAX; n];
    let mut next = 0;
    for &c in centres {
        if comp[c as usize] != usize::MAX {
            continue;
        }
        let ball = rep.gaifman_ball(&[c], n);
        for &x in &ball {
            comp[x as usize] = next;
        }
        next += 1;
    }
    let k = centres.len();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of = vec![0usize; k];
    let mut comp_group: HashMap<usize, usize> = HashMap::new();
    for (i, &c) in centres.iter().enumerate() {
        let g = *comp_group.entry(comp[c as usize]).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
        group_of[i] = g;
    }
    let mut offset = vec![0usize; k];
    for g in &groups {
        let leader = centres[g[0]];
        for &i in &g[1..] {
            offset[i] = rep.distance(leader, centres[i], n).expect("same component");
        }
    }
    TypeShape {
        groups,
        group_of,
        offset,
    }
}

/// Largest possible r-ball around one element when every element has at most
/// `delta` Gaifman neighbours.
pub fn ball_bound(delta: usize, rho: usize) -> u64 {
    let delta = delta as u64;
    let mut total: u64 = 1;
    let mut layer: u64 = delta;
    for _ in 0..rho {
        total = total.saturating_add(layer);
        layer = layer.saturating_mul(delta.saturating_sub(1));
    }
    total
}

#[derive(Debug, Default)]
struct Inner {
    by_key: HashMap<(usize, Vec<u32>), NbType>,
    all: Vec<NbType>,
}

/// Interns neighbourhood types; ids are stable for the registry's lifetime.
#[derive(Debug, Default)]
pub struct TypeRegistry {
    inner: RwLock<Inner>,
}

impl TypeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap().all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: TypeId) -> Option<NbType> {
        self.inner.read().unwrap().all.get(id as usize).cloned()
    }

    pub fn lookup_code(&self, radius: usize, code: &[u32]) -> Option<NbType> {
        self.inner.read().unwrap().by_key.get(&(radius, code.to_vec())).cloned()
    }

    pub fn intern(&self, nb: &Neighbourhood) -> NbType {
        let canon = canonical_form(nb.db(), &nb.centres);
        self.intern_canonical(nb.db(), &nb.centres, nb.radius, canon)
    }

    pub(crate) fn intern_canonical(&self, s: &Database, centres: &[Elem], radius: usize, canon: Canonical) -> NbType {
        let key = (radius, canon.code);
        if let Some(t) = self.inner.read().unwrap().by_key.get(&key) {
            return t.clone();
        }
        let mut pos = vec![0 as Elem; s.n()];
        for (p, &v) in canon.order.iter().enumerate() {
            pos[v as usize] = p as Elem;
        }
        let tuples = (0..s.schema().relations().len()).flat_map(|rel| {
            s.tuples(rel)
                .map(|t| (rel as RelId, t.iter().map(|&x| pos[x as usize]).collect()))
                .collect::<Vec<_>>()
        });
        let rep = Database::new(s.schema().clone(), s.n(), s.degree_bound(), tuples)
            .expect("relabelled neighbourhood is valid");
        let rep_centres: Vec<Elem> = centres.iter().map(|&c| pos[c as usize]).collect();
        let shape = shape_of(&rep, &rep_centres);
        let mut inner = self.inner.write().unwrap();
        if let Some(t) = inner.by_key.get(&key) {
            return t.clone();
        }
        let t = NbType(Arc::new(TypeInfo {
            id: inner.all.len() as TypeId,
            radius,
            code: key.1.clone(),
            rep,
            centres: rep_centres,
            shape,
        }));
        inner.by_key.insert(key, t.clone());
        inner.all.push(t.clone());
        t
    }

    /// Type of the r-neighbourhood of `tuple` in `db`.
    pub fn type_of(&self, db: &Database, tuple: &[Elem], r: usize) -> Result<NbType> {
        let nb = extract_neighbourhood(db, tuple, r)?;
        Ok(self.intern(&nb))
    }

    pub fn types(&self) -> Vec<NbType> {
        self.inner.read().unwrap().all.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::db::Schema;

    fn path(n: usize) -> Database {
        let edges = (0..n as Elem - 1).map(|i| (0, vec![i, i + 1]));
        Database::new(Arc::new(Schema::graph()), n, 2, edges).unwrap()
    }

    #[test]
    fn interning_and_representatives() {
        let reg = TypeRegistry::new();
        let db = path(12);
        let a = reg.type_of(&db, &[5], 2).unwrap();
        let b = reg.type_of(&db, &[6], 2).unwrap();
        let c = reg.type_of(&db, &[0], 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.id(), b.id());
        assert_ne!(a, c);
        assert_eq!(a.size(), 5);
        assert_eq!(a.centres(), &[0]);
        assert_eq!(a.representative_element(1).unwrap(), 0);
        assert!(a.representative_element(6).is_err());
        let nb = extract_neighbourhood(&db, &[6], 2).unwrap();
        let emb = a.embedding_into_representative(&nb).unwrap();
        assert_eq!(emb[nb.centres[0] as usize], 0);
        let nb0 = extract_neighbourhood(&db, &[0], 2).unwrap();
        assert!(matches!(
            a.embedding_into_representative(&nb0),
            Err(Error::TypeMismatch)
        ));
    }

    #[test]
    fn shapes() {
        let reg = TypeRegistry::new();
        let db = path(20);
        let t = reg.type_of(&db, &[3, 5, 15, 4], 1).unwrap();
        assert_eq!(t.shape().groups, vec![vec![0, 1, 3], vec![2]]);
        assert_eq!(t.shape().offset, vec![0, 2, 0, 1]);
        let far = reg.type_of(&db, &[3, 7], 1).unwrap();
        assert_eq!(far.components(), 2);
        let adjacent = reg.type_of(&db, &[3, 6], 1).unwrap();
        assert_eq!(adjacent.components(), 1);
        let near = reg.type_of(&db, &[3, 5], 1).unwrap();
        assert_eq!(near.components(), 1);
    }

    #[test]
    fn ball_bounds() {
        assert_eq!(ball_bound(3, 0), 1);
        assert_eq!(ball_bound(3, 1), 4);
        assert_eq!(ball_bound(3, 2), 10);
        assert_eq!(ball_bound(2, 5), 11);
        assert_eq!(ball_bound(0, 4), 1);
    }
}
