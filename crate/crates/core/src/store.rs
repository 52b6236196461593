//! Indexed triple storage with pattern matching, conjunctive queries with
//! safe negation, and transitive reachability.
//!
//! Every triple is kept in three permutation indexes (SPO, POS, OSP) so that
//! each of the eight wildcard shapes is a prefix range scan on one of them.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::ops::Bound;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Where a triple came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Inferred,
    Extracted(String),
}

impl Provenance {
    pub fn page(&self) -> Option<&str> {
        match self {
            Provenance::Extracted(p) => Some(p),
            Provenance::Inferred => None,
        }
    }

    pub fn is_inferred(&self) -> bool {
        matches!(self, Provenance::Inferred)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Inferred => f.write_str("inferred"),
            Provenance::Extracted(p) => write!(f, "extracted:{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub provenance: Provenance,
}

impl Triple {
    pub fn extracted(s: impl Into<String>, p: impl Into<String>, o: impl Into<String>, page: impl Into<String>) -> Self {
        Triple {
            subject: s.into(),
            predicate: p.into(),
            object: o.into(),
            provenance: Provenance::Extracted(page.into()),
        }
    }

    pub fn inferred(s: impl Into<String>, p: impl Into<String>, o: impl Into<String>) -> Self {
        Triple {
            subject: s.into(),
            predicate: p.into(),
            object: o.into(),
            provenance: Provenance::Inferred,
        }
    }

    pub fn spo(&self) -> (&str, &str, &str) {
        (&self.subject, &self.predicate, &self.object)
    }

    /// One line of the debug dump format: `<s> <p> <o> <provenance>`.
    pub fn dump_line(&self) -> String {
        format!("<{}> <{}> <{}> <{}>", self.subject, self.predicate, self.object, self.provenance)
    }
}

type Atom = Arc<str>;
type Key = (Atom, Atom, Atom, Provenance);

/// In-memory triple store.
#[derive(Debug, Default, Clone)]
pub struct TripleStore {
    atoms: HashMap<Arc<str>, ()>,
    spo: BTreeSet<Key>,
    pos: BTreeSet<Key>,
    osp: BTreeSet<Key>,
    by_page: HashMap<String, BTreeSet<(Atom, Atom, Atom)>>,
    inferred: BTreeSet<(Atom, Atom, Atom)>,
}

fn lower(a: Option<&Atom>, b: Option<&Atom>, c: Option<&Atom>) -> Key {
    let empty: Atom = Arc::from("");
    (
        a.cloned().unwrap_or_else(|| empty.clone()),
        b.cloned().unwrap_or_else(|| empty.clone()),
        c.cloned().unwrap_or(empty),
        Provenance::Inferred,
    )
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, s: &str) -> Atom {
        if let Some((k, _)) = self.atoms.get_key_value(s) {
            return k.clone();
        }
        let a: Atom = Arc::from(s);
        self.atoms.insert(a.clone(), ());
        a
    }

    fn lookup(&self, s: &str) -> Option<Atom> {
        self.atoms.get_key_value(s).map(|(k, _)| k.clone())
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    /// Adds `t`; duplicates are ignored. Returns whether it was new.
    pub fn insert(&mut self, t: Triple) -> bool {
        let s = self.intern(&t.subject);
        let p = self.intern(&t.predicate);
        let o = self.intern(&t.object);
        if !self.spo.insert((s.clone(), p.clone(), o.clone(), t.provenance.clone())) {
            return false;
        }
        self.pos.insert((p.clone(), o.clone(), s.clone(), t.provenance.clone()));
        self.osp.insert((o.clone(), s.clone(), p.clone(), t.provenance.clone()));
        match t.provenance {
            Provenance::Extracted(page) => {
                self.by_page.entry(page).or_default().insert((s, p, o));
            }
            Provenance::Inferred => {
                self.inferred.insert((s, p, o));
            }
        }
        true
    }

    fn remove_key(&mut self, s: Atom, p: Atom, o: Atom, prov: Provenance) {
        self.spo.remove(&(s.clone(), p.clone(), o.clone(), prov.clone()));
        self.pos.remove(&(p.clone(), o.clone(), s.clone(), prov.clone()));
        self.osp.remove(&(o, s, p, prov));
    }

    /// Removes every triple extracted from `page`; returns how many.
    pub fn retract_page(&mut self, page: &str) -> usize {
        let Some(keys) = self.by_page.remove(page) else {
            return 0;
        };
        let n = keys.len();
        for (s, p, o) in keys {
            self.remove_key(s, p, o, Provenance::Extracted(page.to_owned()));
        }
        n
    }

    /// Drops all inferred triples.
    pub fn clear_inferred(&mut self) -> usize {
        let keys = std::mem::take(&mut self.inferred);
        let n = keys.len();
        for (s, p, o) in keys {
            self.remove_key(s, p, o, Provenance::Inferred);
        }
        n
    }

    pub fn clear(&mut self) {
        *self = TripleStore::default();
    }

    /// Pages that currently own extracted triples.
    pub fn pages(&self) -> impl Iterator<Item = &str> {
        self.by_page.keys().map(String::as_str)
    }

    /// All triples, both provenances, ordered by subject, predicate, object.
    pub fn iter(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().map(|(s, p, o, prov)| to_triple(s, p, o, prov))
    }

    /// Triples matching the given constants; `None` is a wildcard.
    /// Results are ordered by subject, predicate, object, provenance.
    pub fn matching(&self, s: Option<&str>, p: Option<&str>, o: Option<&str>) -> Vec<Triple> {
        let mut out = Vec::new();
        self.for_each_match(s, p, o, |s, p, o, prov| out.push(to_triple(s, p, o, prov)));
        if s.is_none() && (p.is_some() || o.is_some()) {
            // POS / OSP scans come back in index order
            out.sort();
        }
        out
    }

    /// Distinct `(s, p, o)` matches ignoring provenance.
    pub fn matching_spo(&self, s: Option<&str>, p: Option<&str>, o: Option<&str>) -> BTreeSet<(String, String, String)> {
        let mut out = BTreeSet::new();
        self.for_each_match(s, p, o, |s, p, o, _| {
            out.insert((s.to_string(), p.to_string(), o.to_string()));
        });
        out
    }

    pub fn contains(&self, s: &str, p: &str, o: &str) -> bool {
        let mut found = false;
        self.for_each_match(Some(s), Some(p), Some(o), |_, _, _, _| found = true);
        found
    }

    fn for_each_match(
        &self,
        s: Option<&str>,
        p: Option<&str>,
        o: Option<&str>,
        mut f: impl FnMut(&Atom, &Atom, &Atom, &Provenance),
    ) {
        let atom = |x: Option<&str>| -> Result<Option<Atom>, ()> {
            match x {
                None => Ok(None),
                Some(v) => self.lookup(v).map(Some).ok_or(()),
            }
        };
        // an unknown constant cannot match anything
        let (Ok(s), Ok(p), Ok(o)) = (atom(s), atom(p), atom(o)) else {
            return;
        };
        match (&s, &p, &o) {
            (Some(_), _, _) if p.is_some() || o.is_none() => {
                // SPO covers s, sp, spo, and s** scans
                let start = lower(s.as_ref(), p.as_ref(), o.as_ref());
                for (ks, kp, ko, prov) in self.spo.range((Bound::Included(start), Bound::Unbounded)) {
                    if Some(ks) != s.as_ref() || p.as_ref().is_some_and(|p| p != kp) {
                        break;
                    }
                    if o.as_ref().is_some_and(|o| o != ko) {
                        if p.is_some() {
                            break;
                        }
                        continue;
                    }
                    f(ks, kp, ko, prov);
                }
            }
            (Some(_), None, Some(_)) => {
                let start = lower(o.as_ref(), s.as_ref(), None);
                for (ko, ks, kp, prov) in self.osp.range((Bound::Included(start), Bound::Unbounded)) {
                    if Some(ko) != o.as_ref() || Some(ks) != s.as_ref() {
                        break;
                    }
                    f(ks, kp, ko, prov);
                }
            }
            (None, Some(_), _) => {
                let start = lower(p.as_ref(), o.as_ref(), None);
                for (kp, ko, ks, prov) in self.pos.range((Bound::Included(start), Bound::Unbounded)) {
                    if Some(kp) != p.as_ref() || o.as_ref().is_some_and(|o| o != ko) {
                        break;
                    }
                    f(ks, kp, ko, prov);
                }
            }
            (None, None, Some(_)) => {
                let start = lower(o.as_ref(), None, None);
                for (ko, ks, kp, prov) in self.osp.range((Bound::Included(start), Bound::Unbounded)) {
                    if Some(ko) != o.as_ref() {
                        break;
                    }
                    f(ks, kp, ko, prov);
                }
            }
            (None, None, None) => {
                for (ks, kp, ko, prov) in &self.spo {
                    f(ks, kp, ko, prov);
                }
            }
            _ => unreachable!(),
        }
    }

    /// Nodes reachable from `start` by one or more `predicate` edges.
    /// `start` itself is included only when it lies on a cycle.
    pub fn reachable(&self, start: &str, predicate: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start.to_owned()]);
        while let Some(node) = queue.pop_front() {
            for (_, _, next) in self.matching_spo(Some(&node), Some(predicate), None) {
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    /// Evaluates a conjunctive pattern with safe negation.
    pub fn query(&self, q: &QueryPattern) -> Result<Vec<Binding>, QueryError> {
        q.check()?;
        let mut bindings: Vec<Binding> = vec![BTreeMap::new()];
        for pattern in &q.patterns {
            let mut next = Vec::new();
            for b in &bindings {
                let s = pattern.subject.resolve(b);
                let o = pattern.object.resolve(b);
                for (ms, _, mo) in self.matching_spo(s, Some(&pattern.predicate), o) {
                    let mut extended = b.clone();
                    if bind(&mut extended, &pattern.subject, &ms) && bind(&mut extended, &pattern.object, &mo) {
                        next.push(extended);
                    }
                }
            }
            bindings = next;
            if bindings.is_empty() {
                break;
            }
        }
        let result: BTreeSet<Binding> = bindings
            .into_iter()
            .filter(|b| {
                q.negations.iter().all(|n| {
                    let s = n.subject.resolve(b);
                    let o = n.object.resolve(b);
                    !self.matching_spo(s, Some(&n.predicate), o).iter().any(|(ms, _, mo)| {
                        let mut local = b.clone();
                        bind(&mut local, &n.subject, ms) && bind(&mut local, &n.object, mo)
                    })
                })
            })
            .collect();
        Ok(result.into_iter().collect())
    }

    /// The debug dump: one `<s> <p> <o> <provenance>` line per triple.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for t in self.iter() {
            out.push_str(&t.dump_line());
            out.push('\n');
        }
        out
    }
}

fn to_triple(s: &Atom, p: &Atom, o: &Atom, prov: &Provenance) -> Triple {
    Triple {
        subject: s.to_string(),
        predicate: p.to_string(),
        object: o.to_string(),
        provenance: prov.clone(),
    }
}

fn bind(b: &mut Binding, term: &Term, value: &str) -> bool {
    match term {
        Term::Const(c) => c == value,
        Term::Var(v) => match b.get(v) {
            Some(existing) => existing == value,
            None => {
                b.insert(v.clone(), value.to_owned());
                true
            }
        },
    }
}

/// Variable name → node id.
pub type Binding = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(String),
    Var(String),
}

impl Term {
    fn resolve<'a>(&'a self, b: &'a Binding) -> Option<&'a str> {
        match self {
            Term::Const(c) => Some(c),
            Term::Var(v) => b.get(v).map(String::as_str),
        }
    }

    pub fn var_name(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

/// `?name` is a variable, anything else a constant.
impl FromStr for Term {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.strip_prefix('?') {
            Some(v) => Term::Var(v.to_owned()),
            None => Term::Const(s.to_owned()),
        })
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => f.write_str(c),
            Term::Var(v) => write!(f, "?{v}"),
        }
    }
}

impl Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(s.parse().unwrap_or_else(|never| match never {}))
    }
}

/// One `subject predicate object` pattern; the predicate is always a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub subject: Term,
    pub predicate: String,
    pub object: Term,
}

impl TriplePattern {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Self {
        TriplePattern {
            subject: subject.parse().unwrap_or_else(|never| match never {}),
            predicate: predicate.to_owned(),
            object: object.parse().unwrap_or_else(|never| match never {}),
        }
    }

    fn vars(&self) -> impl Iterator<Item = &str> {
        self.subject.var_name().into_iter().chain(self.object.var_name())
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.predicate, self.object)
    }
}

/// Whitespace-separated `s p o`, e.g. `?t type Assertion`.
impl FromStr for TriplePattern {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        match parts.as_slice() {
            [s, p, o] if !p.starts_with('?') => Ok(TriplePattern::new(s, p, o)),
            [_, p, _] => Err(QueryError::BadPattern(format!("predicate `{p}` must be a constant"))),
            _ => Err(QueryError::BadPattern(format!("expected `subject predicate object`, got `{s}`"))),
        }
    }
}

impl Serialize for TriplePattern {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (&self.subject, &self.predicate, &self.object).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TriplePattern {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (s, p, o) = <(String, String, String)>::deserialize(deserializer)?;
        if p.starts_with('?') {
            return Err(serde::de::Error::custom("predicate must be a constant"));
        }
        Ok(TriplePattern::new(&s, &p, &o))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPattern {
    pub patterns: Vec<TriplePattern>,
    #[serde(default)]
    pub negations: Vec<TriplePattern>,
}

impl QueryPattern {
    pub fn new(patterns: Vec<TriplePattern>, negations: Vec<TriplePattern>) -> Self {
        QueryPattern { patterns, negations }
    }

    /// Each negated pattern must mention at least one variable bound by the
    /// positive patterns. Its other variables are existential: the row is
    /// dropped if any assignment to them matches.
    pub fn check(&self) -> Result<(), QueryError> {
        let bound: BTreeSet<&str> = self.patterns.iter().flat_map(TriplePattern::vars).collect();
        for n in &self.negations {
            if !n.vars().any(|v| bound.contains(v)) {
                let name = n.vars().next().map_or_else(|| n.to_string(), str::to_owned);
                return Err(QueryError::UnsafeNegation(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("negated pattern shares no variable with the positive patterns ({0})")]
    UnsafeNegation(String),
    #[error("bad pattern: {0}")]
    BadPattern(String),
}
