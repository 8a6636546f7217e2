//! Exact cover by 3-sets (X3C) and its reduction to the feasibility version
//! of SILS: column j of M is the incidence vector of the j-th triple, b = 1
//! and σ = n/3, so Mx = b with ‖x‖₀ = σ holds exactly when the chosen
//! triples partition the ground set.

use crate::instance::SilsInstance;
use crate::linalg::{Mat, Vector};
use crate::{Result, SilsError};

/// Ground set {1, …, n} and a collection of 3-element subsets of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct X3cInstance {
    pub n: usize,
    pub collection: Vec<[usize; 3]>,
}

impl X3cInstance {
    pub fn new(n: usize, collection: Vec<[usize; 3]>) -> Result<Self> {
        if n == 0 {
            return Err(SilsError::InvalidInstance("ground set must be non-empty".into()));
        }
        for (k, t) in collection.iter().enumerate() {
            if t.iter().any(|&e| e == 0 || e > n) {
                return Err(SilsError::InvalidInstance(format!("subset {k} has an element outside 1..={n}")));
            }
            if t[0] == t[1] || t[0] == t[2] || t[1] == t[2] {
                return Err(SilsError::InvalidInstance(format!("subset {k} has repeated elements")));
            }
        }
        Ok(Self { n, collection })
    }

    /// Text format: first line n, then one subset per line (three 1-based
    /// elements separated by whitespace or commas). `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, first) = lines.next().ok_or(SilsError::Parse { line: 1, msg: "empty X3C file".into() })?;
        let n: usize = first.parse().map_err(|_| SilsError::Parse { line, msg: format!("bad ground-set size '{first}'") })?;
        let mut collection = Vec::new();
        for (line, l) in lines {
            let elems: Vec<usize> = l
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse().map_err(|_| SilsError::Parse { line, msg: format!("bad element '{t}'") }))
                .collect::<Result<_>>()?;
            if elems.len() != 3 {
                return Err(SilsError::Parse { line, msg: format!("expected 3 elements, found {}", elems.len()) });
            }
            collection.push([elems[0], elems[1], elems[2]]);
        }
        Self::new(n, collection)
    }
}

/// The reduced SILS instance. When 3 ∤ n the same M and b are returned with
/// σ = ⌈n/3⌉, which is infeasible (the coordinate sum of Mx is a multiple of
/// three). If σ exceeds the number of triples, zero columns pad M up to σ;
/// they cannot contribute to Mx, so feasibility is unchanged.
pub fn reduce_x3c(x3c: &X3cInstance) -> Result<SilsInstance> {
    let x3c = X3cInstance::new(x3c.n, x3c.collection.clone())?;
    let n = x3c.n;
    let sigma = n.div_ceil(3);
    let d = x3c.collection.len().max(sigma);
    let mut m = Mat::zeros(n, d);
    for (j, t) in x3c.collection.iter().enumerate() {
        for &e in t {
            m[(e - 1, j)] = 1.0;
        }
    }
    SilsInstance::new(m, Vector::from_element(n, 1.0), sigma)
}

/// Exhaustive search for an exact cover (indices into the collection, in
/// increasing order). Always branches on the smallest uncovered element.
pub fn exact_cover_oracle(x3c: &X3cInstance) -> Result<Option<Vec<usize>>> {
    if x3c.collection.len() > 25 {
        return Err(SilsError::Budget(x3c.collection.len() as f64));
    }
    if x3c.n % 3 != 0 {
        return Ok(None);
    }
    fn search(x3c: &X3cInstance, covered: &mut Vec<bool>, chosen: &mut Vec<usize>) -> bool {
        let Some(e) = (1..=x3c.n).find(|&e| !covered[e]) else { return true };
        for (j, t) in x3c.collection.iter().enumerate() {
            if t.contains(&e) && t.iter().all(|&f| !covered[f]) {
                for &f in t {
                    covered[f] = true;
                }
                chosen.push(j);
                if search(x3c, covered, chosen) {
                    return true;
                }
                chosen.pop();
                for &f in t {
                    covered[f] = false;
                }
            }
        }
        false
    }
    let mut covered = vec![false; x3c.n + 1];
    let mut chosen = Vec::new();
    if search(x3c, &mut covered, &mut chosen) {
        chosen.sort_unstable();
        Ok(Some(chosen))
    } else {
        Ok(None)
    }
}
