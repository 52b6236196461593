//! The document ontology and the rule engine that materializes its
//! consequences.
//!
//! Four rules are applied to a fixpoint:
//!
//! | rule | premises                                   | conclusion          |
//! |------|--------------------------------------------|---------------------|
//! | R1   | `x type C`, `C ⊑* D`                       | `x type D`          |
//! | R2   | `x p y`, `p ⊑* q`                          | `x q y`             |
//! | R3   | `p` transitive, `x p y`, `y p z`           | `x p z`             |
//! | R4   | `x p y`, `domain(p) = C`, `range(p) = D`   | `x type C`, `y type D` |

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::store::Triple;

pub const TYPE: &str = "type";

pub mod class {
    pub const THEORY: &str = "Theory";
    pub const STATEMENT: &str = "Statement";
    pub const SYMBOL: &str = "Symbol";
    pub const DEFINITION: &str = "Definition";
    pub const AXIOM: &str = "Axiom";
    pub const ASSERTION: &str = "Assertion";
    pub const PROOF: &str = "Proof";
    pub const EXAMPLE: &str = "Example";
    pub const NOTATION_DEFINITION: &str = "NotationDefinition";
    pub const FORMULA: &str = "Formula";
}

pub mod prop {
    pub const PROVES: &str = "proves";
    pub const DEFINES: &str = "defines";
    pub const EXEMPLIFIES: &str = "exemplifies";
    pub const RENDERS: &str = "renders";
    pub const USES: &str = "uses";
    pub const IMPORTS: &str = "imports";
    pub const HOME_THEORY_OF: &str = "homeTheoryOf";
    pub const CONTAINS: &str = "contains";
    pub const DEPENDS_ON: &str = "dependsOn";
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchemaError {
    #[error("`{0}` is not a declared class")]
    UnknownClass(String),
    #[error("`{0}` is not a declared property")]
    UnknownProperty(String),
    #[error("cycle in {0} through `{1}`")]
    Cycle(&'static str, String),
}

/// Classes, properties and the relations between them. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OntologySchema {
    pub classes: BTreeSet<String>,
    pub subclass_of: BTreeSet<(String, String)>,
    pub properties: BTreeSet<String>,
    pub subproperty_of: BTreeSet<(String, String)>,
    pub transitive: BTreeSet<String>,
    /// A property with several domain classes has the union of them as its
    /// domain; only single-class domains yield typing conclusions.
    pub domain: BTreeMap<String, Vec<String>>,
    pub range: BTreeMap<String, Vec<String>>,
}

fn pairs(items: &[(&str, &str)]) -> BTreeSet<(String, String)> {
    items.iter().map(|(a, b)| ((*a).to_owned(), (*b).to_owned())).collect()
}

fn names(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| (*s).to_owned()).collect()
}

/// The compiled-in document ontology.
pub fn builtin_schema() -> OntologySchema {
    use class::*;
    use prop::*;
    let statement_kinds = [SYMBOL, DEFINITION, AXIOM, ASSERTION, PROOF, EXAMPLE, NOTATION_DEFINITION];
    let mut subclass: Vec<(&str, &str)> = statement_kinds.iter().map(|k| (*k, STATEMENT)).collect();
    subclass.sort();
    let typed = |items: &[(&str, &[&str])]| -> BTreeMap<String, Vec<String>> {
        items
            .iter()
            .map(|(p, cs)| ((*p).to_owned(), cs.iter().map(|c| (*c).to_owned()).collect()))
            .collect()
    };
    OntologySchema {
        classes: names(&[THEORY, STATEMENT, SYMBOL, DEFINITION, AXIOM, ASSERTION, PROOF, EXAMPLE, NOTATION_DEFINITION, FORMULA]),
        subclass_of: pairs(&subclass),
        properties: names(&[PROVES, DEFINES, EXEMPLIFIES, RENDERS, USES, IMPORTS, HOME_THEORY_OF, CONTAINS, DEPENDS_ON]),
        subproperty_of: pairs(&[(IMPORTS, DEPENDS_ON), (HOME_THEORY_OF, CONTAINS)]),
        transitive: names(&[DEPENDS_ON, CONTAINS]),
        domain: typed(&[
            (PROVES, &[PROOF]),
            (RENDERS, &[NOTATION_DEFINITION]),
            (USES, &[FORMULA]),
            (IMPORTS, &[THEORY]),
            (CONTAINS, &[STATEMENT, THEORY]),
        ]),
        range: typed(&[
            (PROVES, &[ASSERTION]),
            (RENDERS, &[SYMBOL]),
            (USES, &[SYMBOL]),
            (IMPORTS, &[THEORY]),
        ]),
    }
}

/// Reflexive-transitive closure of a relation given as edge pairs.
fn closure(edges: &BTreeSet<(String, String)>, nodes: &BTreeSet<String>) -> HashMap<String, BTreeSet<String>> {
    let mut direct: HashMap<&str, Vec<&str>> = HashMap::new();
    for (a, b) in edges {
        direct.entry(a.as_str()).or_default().push(b.as_str());
    }
    nodes
        .iter()
        .map(|n| {
            let mut seen = BTreeSet::from([n.clone()]);
            let mut stack = vec![n.as_str()];
            while let Some(x) = stack.pop() {
                for &y in direct.get(x).into_iter().flatten() {
                    if seen.insert(y.to_owned()) {
                        stack.push(y);
                    }
                }
            }
            (n.clone(), seen)
        })
        .collect()
}

impl OntologySchema {
    /// Checks the structural invariants: acyclic hierarchies and declared vocabulary.
    pub fn check(&self) -> Result<(), SchemaError> {
        for (a, b) in &self.subclass_of {
            for c in [a, b] {
                if !self.classes.contains(c) {
                    return Err(SchemaError::UnknownClass(c.clone()));
                }
            }
        }
        for (a, b) in &self.subproperty_of {
            for p in [a, b] {
                if !self.properties.contains(p) {
                    return Err(SchemaError::UnknownProperty(p.clone()));
                }
            }
        }
        for p in self.transitive.iter().chain(self.domain.keys()).chain(self.range.keys()) {
            if !self.properties.contains(p) {
                return Err(SchemaError::UnknownProperty(p.clone()));
            }
        }
        for c in self.domain.values().chain(self.range.values()).flatten() {
            if !self.classes.contains(c) {
                return Err(SchemaError::UnknownClass(c.clone()));
            }
        }
        let acyclic = |edges: &BTreeSet<(String, String)>, nodes: &BTreeSet<String>, what: &'static str| {
            let mut direct: HashMap<&str, Vec<&str>> = HashMap::new();
            for (a, b) in edges {
                direct.entry(a).or_default().push(b);
            }
            for n in nodes {
                let mut seen = HashSet::new();
                let mut stack: Vec<&str> = direct.get(n.as_str()).cloned().unwrap_or_default();
                while let Some(x) = stack.pop() {
                    if x == n {
                        return Err(SchemaError::Cycle(what, n.clone()));
                    }
                    if seen.insert(x) {
                        stack.extend(direct.get(x).into_iter().flatten());
                    }
                }
            }
            Ok(())
        };
        acyclic(&self.subclass_of, &self.classes, "subClassOf")?;
        acyclic(&self.subproperty_of, &self.properties, "subPropertyOf")
    }

    /// `C` and all its (transitive) superclasses.
    pub fn superclasses(&self, c: &str) -> BTreeSet<String> {
        let mut nodes = self.classes.clone();
        nodes.insert(c.to_owned());
        closure(&self.subclass_of, &nodes).remove(c).unwrap_or_default()
    }

    /// Read-only export of the schema as triples.
    pub fn dump_triples(&self) -> Vec<Triple> {
        let mut out = Vec::new();
        for (a, b) in &self.subclass_of {
            out.push(Triple::inferred(a, "subClassOf", b));
        }
        for (a, b) in &self.subproperty_of {
            out.push(Triple::inferred(a, "subPropertyOf", b));
        }
        for p in &self.transitive {
            out.push(Triple::inferred(p, "transitive", "true"));
        }
        out
    }
}

/// Derives everything the rules entail from `extracted`, returning only the
/// triples not already present there, each marked inferred.
pub fn entail<'a, I>(extracted: I, schema: &OntologySchema) -> BTreeSet<Triple>
where
    I: IntoIterator<Item = &'a Triple>,
{
    let input: HashSet<(&str, &str, &str)> = extracted.into_iter().map(Triple::spo).collect();
    Reasoner::new(schema).run(&input)
}

/// Semi-naive forward chainer over interned node ids.
struct Reasoner {
    superclasses: HashMap<String, BTreeSet<String>>,
    superproperties: HashMap<String, BTreeSet<String>>,
    transitive: BTreeSet<String>,
    domain: HashMap<String, String>,
    range: HashMap<String, String>,
}

type Fact = (u32, u32, u32);

#[derive(Default)]
struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    fn id(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.ids.get(s) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(s.to_owned());
        self.ids.insert(s.to_owned(), i);
        i
    }
}

impl Reasoner {
    fn new(schema: &OntologySchema) -> Self {
        let single = |m: &BTreeMap<String, Vec<String>>| -> HashMap<String, String> {
            m.iter()
                .filter_map(|(p, cs)| match cs.as_slice() {
                    [c] => Some((p.clone(), c.clone())),
                    _ => None,
                })
                .collect()
        };
        Reasoner {
            superclasses: closure(&schema.subclass_of, &schema.classes),
            superproperties: closure(&schema.subproperty_of, &schema.properties),
            transitive: schema.transitive.clone(),
            domain: single(&schema.domain),
            range: single(&schema.range),
        }
    }

    fn run(&self, input: &HashSet<(&str, &str, &str)>) -> BTreeSet<Triple> {
        let mut names = Interner::default();
        let type_id = names.id(TYPE);
        // class/property tables keyed by interned id
        let mut supers_c: HashMap<u32, Vec<u32>> = HashMap::new();
        for (c, sup) in &self.superclasses {
            let c = names.id(c);
            let ids = sup.iter().map(|s| names.id(s)).collect();
            supers_c.insert(c, ids);
        }
        let mut supers_p: HashMap<u32, Vec<u32>> = HashMap::new();
        for (p, sup) in &self.superproperties {
            let p = names.id(p);
            let ids = sup.iter().map(|s| names.id(s)).collect();
            supers_p.insert(p, ids);
        }
        let transitive: HashSet<u32> = self.transitive.iter().map(|p| names.id(p)).collect();
        let domain: HashMap<u32, u32> = self.domain.iter().map(|(p, c)| (names.id(p), names.id(c))).collect();
        let range: HashMap<u32, u32> = self.range.iter().map(|(p, c)| (names.id(p), names.id(c))).collect();

        let mut facts: HashSet<Fact> = HashSet::new();
        // (p, s) -> objects and (p, o) -> subjects, for transitive predicates only
        let mut forward: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        let mut backward: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        let mut queue: Vec<Fact> = Vec::new();

        let add = |f: Fact,
                       facts: &mut HashSet<Fact>,
                       queue: &mut Vec<Fact>,
                       forward: &mut HashMap<(u32, u32), Vec<u32>>,
                       backward: &mut HashMap<(u32, u32), Vec<u32>>| {
            if facts.insert(f) {
                if transitive.contains(&f.1) {
                    forward.entry((f.1, f.0)).or_default().push(f.2);
                    backward.entry((f.1, f.2)).or_default().push(f.0);
                }
                queue.push(f);
            }
        };

        let input_ids: HashSet<Fact> = input
            .iter()
            .map(|(s, p, o)| (names.id(s), names.id(p), names.id(o)))
            .collect();
        for &f in &input_ids {
            add(f, &mut facts, &mut queue, &mut forward, &mut backward);
        }

        while let Some((s, p, o)) = queue.pop() {
            let mut derived: Vec<Fact> = Vec::new();
            if p == type_id {
                // R1
                for &d in supers_c.get(&o).into_iter().flatten() {
                    derived.push((s, type_id, d));
                }
            } else {
                // R2
                for &q in supers_p.get(&p).into_iter().flatten() {
                    derived.push((s, q, o));
                }
                // R3
                if transitive.contains(&p) {
                    for &z in forward.get(&(p, o)).into_iter().flatten() {
                        derived.push((s, p, z));
                    }
                    for &x in backward.get(&(p, s)).into_iter().flatten() {
                        derived.push((x, p, o));
                    }
                }
                // R4
                if let Some(&c) = domain.get(&p) {
                    derived.push((s, type_id, c));
                }
                if let Some(&c) = range.get(&p) {
                    derived.push((o, type_id, c));
                }
            }
            for f in derived {
                add(f, &mut facts, &mut queue, &mut forward, &mut backward);
            }
        }

        facts
            .difference(&input_ids)
            .map(|&(s, p, o)| {
                Triple::inferred(&names.names[s as usize], &names.names[p as usize], &names.names[o as usize])
            })
            .collect()
    }
}
