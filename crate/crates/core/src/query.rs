//! Queries in Hanf normal form: a disjunction of clauses, each a sphere
//! formula conjoined with signed counting sentences.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::db::Schema;
use crate::error::{parse_err, Error, Result};
use crate::neighbourhood::{
    extract_neighbourhood, neighbourhood_block_text, parse_neighbourhood_block, NbType, TypeRegistry, TypeSet,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SphereAtom {
    pub ty: NbType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negated,
}

/// `∃≥m x sph_τ(x)`, possibly negated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HanfSentence {
    pub sign: Sign,
    pub threshold: usize,
    pub ty: NbType,
}

impl HanfSentence {
    pub fn radius(&self) -> usize {
        self.ty.radius()
    }

    /// Truth value given the number of elements realising the type.
    pub fn holds_with_count(&self, count: usize) -> bool {
        (count >= self.threshold) != (self.sign == Sign::Negated)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub sphere: SphereAtom,
    pub sentences: Vec<HanfSentence>,
}

#[derive(Debug, Clone)]
pub struct QueryNF {
    pub k: usize,
    pub radius: usize,
    pub d: usize,
    pub schema: Arc<Schema>,
    pub clauses: Vec<Clause>,
}

impl PartialEq for QueryNF {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k
            && self.radius == other.radius
            && self.d == other.d
            && self.schema == other.schema
            && self.clauses == other.clauses
    }
}

impl QueryNF {
    /// Builds a query from clauses, merging clauses with equal sphere types.
    pub fn new(k: usize, radius: usize, d: usize, schema: Arc<Schema>, clauses: Vec<Clause>) -> Result<Self> {
        let mut out: Vec<Clause> = Vec::new();
        for mut c in clauses {
            if c.sphere.ty.arity() != k {
                return Err(Error::CentreCountMismatch {
                    expected: k,
                    found: c.sphere.ty.arity(),
                });
            }
            if c.sphere.ty.radius() != radius {
                return Err(Error::RadiusMismatch(c.sphere.ty.radius(), radius));
            }
            for h in &c.sentences {
                if h.ty.arity() != 1 {
                    return Err(Error::CentreCountMismatch {
                        expected: 1,
                        found: h.ty.arity(),
                    });
                }
                if h.radius() > radius {
                    return Err(Error::RadiusMismatch(h.radius(), radius));
                }
                if h.threshold == 0 {
                    return Err(Error::Invalid("counting threshold must be at least 1".into()));
                }
            }
            c.sentences.dedup();
            match out.iter_mut().find(|o| o.sphere == c.sphere) {
                None => out.push(c),
                Some(o) => {
                    if c.sentences.is_empty() {
                        o.sentences.clear();
                    } else if !o.sentences.is_empty() && o.sentences != c.sentences {
                        return Err(Error::Invalid(
                            "two clauses share a sphere type but differ in their sentences".into(),
                        ));
                    }
                }
            }
        }
        Ok(QueryNF {
            k,
            radius,
            d,
            schema,
            clauses: out,
        })
    }

    /// Largest number of connected components among the clause sphere types.
    pub fn conn(&self) -> usize {
        self.clauses.iter().map(|c| c.sphere.ty.components()).max().unwrap_or(1)
    }

    pub fn is_local(&self) -> bool {
        self.clauses.iter().all(|c| c.sentences.is_empty())
    }

    pub fn sphere_types(&self) -> TypeSet {
        TypeSet::new(self.radius, self.k, self.clauses.iter().map(|c| c.sphere.ty.clone()))
            .expect("clause spheres share radius and arity")
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("QUERY k={} r={} d={}\n", self.k, self.radius, self.d);
        for c in &self.clauses {
            s.push_str("CLAUSE\nSPHERE\n");
            let t = &c.sphere.ty;
            s.push_str(&neighbourhood_block_text(t.representative(), t.centres()));
            for h in &c.sentences {
                let sign = if h.sign == Sign::Positive { '+' } else { '-' };
                let _ = write!(s, "HANF {sign} >= {}", h.threshold);
                if h.radius() != self.radius {
                    let _ = write!(s, " r={}", h.radius());
                }
                s.push('\n');
                s.push_str(&neighbourhood_block_text(h.ty.representative(), h.ty.centres()));
            }
        }
        s.push_str("END\n");
        s
    }
}

fn kv(tok: &str, key: &str, line: usize) -> Result<usize> {
    tok.strip_prefix(key)
        .and_then(|v| v.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(line, format!("expected `{key}=<value>`, found `{tok}`")))
}

enum BlockKind {
    Sphere(Option<usize>),
    Hanf {
        sign: Sign,
        exact: bool,
        m: usize,
        r: Option<usize>,
    },
}

struct Block<'t> {
    kind: BlockKind,
    start: usize,
    lines: Vec<&'t str>,
}

/// Parses the query text format; types are interned in `registry`.
pub fn parse_query(text: &str, schema: Arc<Schema>, registry: &TypeRegistry) -> Result<QueryNF> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut clauses_raw: Vec<Vec<Block>> = Vec::new();
    let mut current: Option<Block> = None;
    let mut ended = false;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = crate::db::strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if ended {
            return Err(parse_err(lineno, "content after END"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let keyword = toks[0];
        if header.is_none() {
            if keyword != "QUERY" || toks.len() != 4 {
                return Err(parse_err(lineno, "expected `QUERY k=<k> r=<r> d=<d>`"));
            }
            header = Some((
                kv(toks[1], "k", lineno)?,
                kv(toks[2], "r", lineno)?,
                kv(toks[3], "d", lineno)?,
            ));
            continue;
        }
        match keyword {
            "CLAUSE" | "SPHERE" | "HANF" | "END" => {
                if let Some(b) = current.take() {
                    clauses_raw
                        .last_mut()
                        .ok_or_else(|| parse_err(b.start, "block outside CLAUSE"))?
                        .push(b);
                }
            }
            _ => {}
        }
        match keyword {
            "CLAUSE" => clauses_raw.push(Vec::new()),
            "SPHERE" => {
                let r = match toks.get(1) {
                    Some(t) => Some(kv(t, "r", lineno)?),
                    None => None,
                };
                current = Some(Block {
                    kind: BlockKind::Sphere(r),
                    start: lineno + 1,
                    lines: Vec::new(),
                });
            }
            "HANF" => {
                if toks.len() < 4 || toks.len() > 5 {
                    return Err(parse_err(lineno, "expected `HANF <+|-> >= <m> [r=<r>]`"));
                }
                let sign = match toks[1] {
                    "+" => Sign::Positive,
                    "-" => Sign::Negated,
                    t => return Err(parse_err(lineno, format!("bad sign `{t}`"))),
                };
                let exact = match toks[2] {
                    ">=" => false,
                    "=" => true,
                    t => return Err(parse_err(lineno, format!("bad comparison `{t}`"))),
                };
                if exact && sign == Sign::Negated {
                    return Err(parse_err(
                        lineno,
                        "a negated exact count is a disjunction and cannot appear in a clause",
                    ));
                }
                let m: usize = toks[3]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad threshold `{}`", toks[3])))?;
                if m == 0 && !exact {
                    return Err(parse_err(lineno, "threshold must be at least 1"));
                }
                let r = match toks.get(4) {
                    Some(t) => Some(kv(t, "r", lineno)?),
                    None => None,
                };
                current = Some(Block {
                    kind: BlockKind::Hanf { sign, exact, m, r },
                    start: lineno + 1,
                    lines: Vec::new(),
                });
            }
            "END" => ended = true,
            _ => match current.as_mut() {
                Some(b) => b.lines.push(raw),
                None => return Err(parse_err(lineno, format!("unexpected `{keyword}`"))),
            },
        }
    }
    let (k, r, d) = header.ok_or_else(|| parse_err(0, "missing QUERY header"))?;
    if !ended {
        return Err(parse_err(text.lines().count(), "missing END"));
    }
    let mut clauses = Vec::new();
    for blocks in clauses_raw {
        let mut sphere: Option<SphereAtom> = None;
        let mut sentences = Vec::new();
        for b in blocks {
            let cs = parse_neighbourhood_block(schema.clone(), &b.lines, d, b.start)?;
            match b.kind {
                BlockKind::Sphere(given) => {
                    if sphere.is_some() {
                        return Err(parse_err(b.start - 1, "second SPHERE block in clause"));
                    }
                    if cs.centres.len() != k {
                        return Err(Error::CentreCountMismatch {
                            expected: k,
                            found: cs.centres.len(),
                        });
                    }
                    let given = given.unwrap_or(r);
                    if given < r {
                        return Err(Error::RadiusMismatch(given, r));
                    }
                    let nb = cs.into_neighbourhood(given)?;
                    let cut = extract_neighbourhood(nb.db(), &nb.centres, r)?;
                    sphere = Some(SphereAtom {
                        ty: registry.intern(&cut),
                    });
                }
                BlockKind::Hanf { sign, exact, m, r: hr } => {
                    if cs.centres.len() != 1 {
                        return Err(Error::CentreCountMismatch {
                            expected: 1,
                            found: cs.centres.len(),
                        });
                    }
                    let hr = hr.unwrap_or(r);
                    if hr > r {
                        return Err(Error::RadiusMismatch(hr, r));
                    }
                    let ty = registry.intern(&cs.into_neighbourhood(hr)?);
                    if exact {
                        if m > 0 {
                            sentences.push(HanfSentence {
                                sign: Sign::Positive,
                                threshold: m,
                                ty: ty.clone(),
                            });
                        }
                        sentences.push(HanfSentence {
                            sign: Sign::Negated,
                            threshold: m + 1,
                            ty,
                        });
                    } else {
                        sentences.push(HanfSentence { sign, threshold: m, ty });
                    }
                }
            }
        }
        let sphere = sphere.ok_or_else(|| parse_err(0, "clause without SPHERE block"))?;
        clauses.push(Clause { sphere, sentences });
    }
    QueryNF::new(k, r, d, schema, clauses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workloads::figure1;

    #[test]
    fn example_query_metadata() {
        let reg = TypeRegistry::new();
        let q = figure1::example_query(&reg);
        assert_eq!(q.k, 2);
        assert_eq!(q.radius, 2);
        assert_eq!(q.clauses.len(), 2);
        assert_eq!(q.conn(), 1);
        assert!(!q.is_local());
        let text = q.to_text();
        let again = parse_query(&text, q.schema.clone(), &reg).unwrap();
        assert_eq!(again, q);
    }

    #[test]
    fn local_and_empty() {
        let reg = TypeRegistry::new();
        let s = Arc::new(Schema::graph());
        let q = parse_query("QUERY k=1 r=1 d=2\nEND\n", s.clone(), &reg).unwrap();
        assert!(q.is_local());
        assert_eq!(q.clauses.len(), 0);
        let text = "QUERY k=1 r=1 d=2\nCLAUSE\nSPHERE\nDOMAIN 2\nCENTRES 1\nE 1 2\nEND\n";
        let q = parse_query(text, s, &reg).unwrap();
        assert!(q.is_local());
        assert_eq!(q.conn(), 1);
    }

    #[test]
    fn errors() {
        let reg = TypeRegistry::new();
        let s = Arc::new(Schema::graph());
        let wrong_k = "QUERY k=3 r=1 d=2\nCLAUSE\nSPHERE\nDOMAIN 2\nCENTRES 1 2\nE 1 2\nEND\n";
        assert!(matches!(
            parse_query(wrong_k, s.clone(), &reg),
            Err(Error::CentreCountMismatch { expected: 3, found: 2 })
        ));
        let small_r = "QUERY k=1 r=2 d=2\nCLAUSE\nSPHERE r=1\nDOMAIN 2\nCENTRES 1\nE 1 2\nEND\n";
        assert!(matches!(
            parse_query(small_r, s.clone(), &reg),
            Err(Error::RadiusMismatch(1, 2))
        ));
        let deg = "QUERY k=1 r=1 d=1\nCLAUSE\nSPHERE\nDOMAIN 3\nCENTRES 1\nE 1 2\nE 1 3\nEND\n";
        assert!(matches!(
            parse_query(deg, s.clone(), &reg),
            Err(Error::DegreeExceeded { .. })
        ));
        let no_end = "QUERY k=1 r=1 d=2\nCLAUSE\nSPHERE\nDOMAIN 1\nCENTRES 1\n";
        assert!(matches!(parse_query(no_end, s.clone(), &reg), Err(Error::Parse { .. })));
        let neg_exact =
            "QUERY k=1 r=1 d=2\nCLAUSE\nSPHERE\nDOMAIN 1\nCENTRES 1\nHANF - = 2\nDOMAIN 1\nCENTRES 1\nEND\n";
        assert!(matches!(parse_query(neg_exact, s, &reg), Err(Error::Parse { .. })));
    }

    #[test]
    fn larger_sphere_is_cut_to_radius() {
        let reg = TypeRegistry::new();
        let s = Arc::new(Schema::graph());
        let text = "QUERY k=1 r=1 d=2\nCLAUSE\nSPHERE r=2\nDOMAIN 3\nCENTRES 1\nE 1 2\nE 2 3\nEND\n";
        let q = parse_query(text, s, &reg).unwrap();
        assert_eq!(q.clauses[0].sphere.ty.size(), 2);
    }

    #[test]
    fn exact_count_expands() {
        let reg = TypeRegistry::new();
        let s = Arc::new(Schema::graph());
        let text = "QUERY k=1 r=1 d=2\nCLAUSE\nSPHERE\nDOMAIN 1\nCENTRES 1\nHANF + = 2\nDOMAIN 1\nCENTRES 1\nEND\n";
        let q = parse_query(text, s, &reg).unwrap();
        let hs = &q.clauses[0].sentences;
        assert_eq!(hs.len(), 2);
        assert_eq!((hs[0].sign, hs[0].threshold), (Sign::Positive, 2));
        assert_eq!((hs[1].sign, hs[1].threshold), (Sign::Negated, 3));
    }

    #[test]
    fn disjoint_sphere_has_two_components() {
        let reg = TypeRegistry::new();
        let s = Arc::new(Schema::graph());
        let text = "QUERY k=2 r=1 d=2\nCLAUSE\nSPHERE\nDOMAIN 4\nCENTRES 1 3\nE 1 2\nE 3 4\nEND\n";
        let q = parse_query(text, s, &reg).unwrap();
        assert_eq!(q.conn(), 2);
    }
}
