//! r-neighbourhoods of tuples and their isomorphism types.

pub mod canon;
mod types;
mod typeset;

pub use canon::{canonical_form, least_isomorphism, Canonical};
pub use types::{ball_bound, NbType, TypeId, TypeRegistry, TypeShape};
pub use typeset::{Classifier, TypeChecker, TypeSet};

use std::fmt::Write as _;
use std::sync::Arc;

use crate::db::{strip_comment, Database, Elem, Fragment, Schema};
use crate::error::{parse_err, Error, Result};

/// Induced r-ball around a tuple of centres, with local element names.
#[derive(Debug, Clone)]
pub struct Neighbourhood {
    pub fragment: Fragment,
    /// Centres as local elements of `fragment.db`, in tuple order.
    pub centres: Vec<Elem>,
    pub radius: usize,
}

impl Neighbourhood {
    pub fn db(&self) -> &Database {
        &self.fragment.db
    }

    pub fn len(&self) -> usize {
        self.fragment.db.n()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn extract_neighbourhood(db: &Database, tuple: &[Elem], r: usize) -> Result<Neighbourhood> {
    if let Some(&bad) = tuple.iter().find(|&&e| e as usize >= db.n()) {
        return Err(Error::IndexOutOfRange {
            what: "element",
            value: bad as u64 + 1,
            bound: db.n() as u64,
        });
    }
    let ball = db.gaifman_ball(tuple, r);
    let fragment = db.induced(&ball);
    let centres = tuple.iter().map(|&a| fragment.local_of(a).unwrap()).collect();
    Ok(Neighbourhood {
        fragment,
        centres,
        radius: r,
    })
}

/// A standalone structure with centres, as written in neighbourhood blocks.
#[derive(Debug, Clone)]
pub struct CentredStructure {
    pub db: Database,
    pub centres: Vec<Elem>,
}

impl CentredStructure {
    /// Checks that every element lies within distance `r` of a centre.
    pub fn into_neighbourhood(self, r: usize) -> Result<Neighbourhood> {
        let ball = self.db.gaifman_ball(&self.centres, r);
        if ball.len() != self.db.n() {
            let missing = (0..self.db.n() as Elem).find(|e| ball.binary_search(e).is_err());
            return Err(Error::Invalid(format!(
                "element {} is farther than {r} from every centre",
                missing.unwrap() + 1
            )));
        }
        let original = (0..self.db.n() as Elem).collect();
        Ok(Neighbourhood {
            fragment: Fragment { db: self.db, original },
            centres: self.centres,
            radius: r,
        })
    }
}

/// Parses `DOMAIN m`, `CENTRES c1 .. ck` and tuple lines (1-based elements).
/// `first_line` is used for error positions.
pub fn parse_neighbourhood_block(
    schema: Arc<Schema>,
    lines: &[&str],
    d: usize,
    first_line: usize,
) -> Result<CentredStructure> {
    let mut n: Option<usize> = None;
    let mut centres: Option<Vec<Elem>> = None;
    let mut body = String::new();
    for (i, raw) in lines.iter().enumerate() {
        let line = strip_comment(raw);
        let lineno = first_line + i;
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        match toks.next().unwrap() {
            "DOMAIN" => {
                let v = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| parse_err(lineno, "expected `DOMAIN <m>`"))?;
                n = Some(v);
                body.push_str(&format!("domain {v}\n"));
            }
            "CENTRES" | "CENTERS" => {
                let size = n.ok_or_else(|| parse_err(lineno, "CENTRES before DOMAIN"))?;
                let mut cs = Vec::new();
                for t in toks {
                    let v: u64 = t.parse().map_err(|_| parse_err(lineno, format!("bad centre `{t}`")))?;
                    if v == 0 || v > size as u64 {
                        return Err(Error::ElementOutOfRange { element: v, n: size });
                    }
                    cs.push((v - 1) as Elem);
                }
                centres = Some(cs);
            }
            _ => {
                if n.is_none() {
                    return Err(parse_err(lineno, "tuple before DOMAIN"));
                }
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    n.ok_or_else(|| parse_err(first_line, "missing DOMAIN"))?;
    let centres = centres.ok_or_else(|| parse_err(first_line, "missing CENTRES"))?;
    let db = Database::parse(schema, &body, d).map_err(|e| match e {
        Error::Parse { line, msg } => parse_err(first_line + line.saturating_sub(1), msg),
        e => e,
    })?;
    Ok(CentredStructure { db, centres })
}

pub fn neighbourhood_block_text(db: &Database, centres: &[Elem]) -> String {
    let mut s = format!("DOMAIN {}\nCENTRES", db.n());
    for c in centres {
        let _ = write!(s, " {}", c + 1);
    }
    s.push('\n');
    for line in db.to_text().lines().skip(1) {
        s.push_str(line);
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_round_trip() {
        let schema = Arc::new(Schema::graph());
        let text = "DOMAIN 3\nCENTRES 2\nE 1 2\nE 2 3\n";
        let lines: Vec<&str> = text.lines().collect();
        let cs = parse_neighbourhood_block(schema.clone(), &lines, 3, 1).unwrap();
        assert_eq!(cs.centres, vec![1]);
        let out = neighbourhood_block_text(&cs.db, &cs.centres);
        assert_eq!(out, text);
        assert!(cs.clone().into_neighbourhood(1).is_ok());
        let far = "DOMAIN 3\nCENTRES 1\nE 1 2\nE 2 3\n";
        let lines: Vec<&str> = far.lines().collect();
        let cs = parse_neighbourhood_block(schema, &lines, 3, 1).unwrap();
        assert!(cs.into_neighbourhood(1).is_err());
    }
}
