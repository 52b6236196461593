//! Generators and reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mathwiki_core::model::{
    DublinCore, Document, Fixity, Formula, NotationDefinition, Statement, StatementKind, SymbolRef, Target,
    TextBlock, Theory,
};
use mathwiki_core::ontology::{OntologySchema, TYPE};
use mathwiki_core::store::Triple;
use mathwiki_core::wiki::Wiki;
use num_bigint::BigInt;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub type Spo = (String, String, String);

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn spo_set<'a>(ts: impl IntoIterator<Item = &'a Triple>) -> BTreeSet<Spo> {
    ts.into_iter()
        .map(|t| (t.subject.clone(), t.predicate.clone(), t.object.clone()))
        .collect()
}

// ---------------------------------------------------------------- formulae

pub fn formula(rng: &mut StdRng, symbols: &[SymbolRef], depth: usize) -> Formula {
    let leaf = depth == 0 || rng.gen_bool(0.35);
    if leaf {
        return match rng.gen_range(0..4) {
            0 if !symbols.is_empty() => Formula::Sym(symbols.choose(rng).unwrap().clone()),
            1 => Formula::var(&format!("x{}", rng.gen_range(0..5))),
            2 => Formula::Int(BigInt::from(rng.gen_range(-1000i64..1000)) * BigInt::from(10u64).pow(rng.gen_range(0..25))),
            _ => Formula::int(rng.gen_range(0..100)),
        };
    }
    let head = if symbols.is_empty() || rng.gen_bool(0.1) {
        if rng.gen_bool(0.5) {
            Formula::var("g")
        } else {
            formula(rng, symbols, depth - 1)
        }
    } else {
        Formula::Sym(symbols.choose(rng).unwrap().clone())
    };
    let n = rng.gen_range(1..=3);
    Formula::apply(head, (0..n).map(|_| formula(rng, symbols, depth - 1)).collect())
}

// ---------------------------------------------------------------- documents

const WORDS: &[&str] = &["we", "show", "a", "<", "&", "b>c", "\"q\"", "it's", "äöü", "∀x", "proof", "by", "x+1"];

fn words(rng: &mut StdRng) -> String {
    let n = rng.gen_range(1..5);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn informal(rng: &mut StdRng, pages: &[String]) -> Vec<TextBlock> {
    // Adjacent text blocks would merge on parsing, so texts alternate with links.
    let mut out = Vec::new();
    let mut last_text = false;
    for _ in 0..rng.gen_range(0..4) {
        if !last_text && (pages.is_empty() || rng.gen_bool(0.5)) {
            out.push(TextBlock::Text(words(rng)));
            last_text = true;
        } else if !pages.is_empty() {
            let label = if rng.gen_bool(0.3) { String::new() } else { words(rng) };
            out.push(TextBlock::PageLink {
                target: pages.choose(rng).unwrap().clone(),
                label,
            });
            last_text = false;
        }
    }
    out
}

fn metadata(rng: &mut StdRng) -> DublinCore {
    let pick = |rng: &mut StdRng| rng.gen_bool(0.3).then(|| words(rng));
    DublinCore {
        title: pick(rng),
        creator: pick(rng),
        description: pick(rng),
        date: rng.gen_bool(0.2).then(|| "2008-06-01".to_owned()),
    }
}

/// Knobs for the document generator.
#[derive(Debug, Clone)]
pub struct DocShape {
    pub max_theories: usize,
    pub max_statements: usize,
    pub formula_depth: usize,
    pub text: bool,
}

impl Default for DocShape {
    fn default() -> Self {
        DocShape {
            max_theories: 4,
            max_statements: 6,
            formula_depth: 3,
            text: true,
        }
    }
}

const KINDS: [StatementKind; 7] = StatementKind::ALL;

fn steps(rng: &mut StdRng, home: &str, symbols: &[SymbolRef], pages: &[String], depth: usize, next: &mut usize, shape: &DocShape) -> Vec<Statement> {
    if depth == 0 || rng.gen_bool(0.6) {
        return Vec::new();
    }
    let n = rng.gen_range(1..3);
    (0..n)
        .map(|_| {
            *next += 1;
            let id = format!("s{next}");
            let kind = *[StatementKind::Assertion, StatementKind::Proof, StatementKind::Axiom, StatementKind::Example]
                .choose(rng)
                .unwrap();
            let mut s = Statement::new(&id, kind, home);
            if kind == StatementKind::Proof {
                s.for_target = Some(Target::page(pages.choose(rng).unwrap()));
                s.steps = steps(rng, home, symbols, pages, depth - 1, next, shape);
            }
            if rng.gen_bool(0.7) {
                s.formal = Some(formula(rng, symbols, shape.formula_depth));
            }
            if shape.text {
                s.informal = informal(rng, pages);
            }
            s
        })
        .collect()
}

/// A valid document. Theories `t0, t1, ...` import only earlier theories
/// (plus, rarely, a theory that is not in the document), so imports form a DAG.
pub fn document(rng: &mut StdRng, shape: &DocShape) -> Document {
    let n_theories = rng.gen_range(1..=shape.max_theories);
    let tag = rng.gen_range(0..1000);
    let theory_ids: Vec<String> = (0..n_theories).map(|i| format!("th{tag}x{i}")).collect();
    let mut symbols: Vec<SymbolRef> = vec![SymbolRef::new("ext", "f")];
    let mut pages: Vec<String> = vec!["ext/lemma".into()];
    let mut theories = Vec::new();
    for (i, id) in theory_ids.iter().enumerate() {
        let mut t = Theory::new(id);
        for j in 0..i {
            if rng.gen_bool(0.4) {
                t.imports.push(theory_ids[j].clone());
            }
        }
        if rng.gen_bool(0.05) {
            t.imports.push("elsewhere".into());
        }
        if shape.text {
            t.metadata = metadata(rng);
        }
        let n = rng.gen_range(0..=shape.max_statements);
        let mut next_step = 0;
        for k in 0..n {
            let sid = format!("st{k}");
            let kind = *KINDS.choose(rng).unwrap();
            let page = format!("{id}/{sid}");
            let mut s = Statement::new(&sid, kind, id);
            match kind {
                StatementKind::SymbolDecl => {
                    symbols.push(SymbolRef::new(id, &sid));
                }
                StatementKind::NotationDecl => {
                    let sym = symbols.choose(rng).unwrap().clone();
                    let fixity = *[Fixity::Infix, Fixity::Prefix, Fixity::Postfix, Fixity::Mixfix].choose(rng).unwrap();
                    let operator = match fixity {
                        Fixity::Mixfix => ["|#1|", "#1 choose #2", "[#2; #1]"].choose(rng).unwrap().to_string(),
                        _ => ["+", "·", "∘", "sin", "!", "<=", "&"].choose(rng).unwrap().to_string(),
                    };
                    s = Statement::notation_decl(
                        &sid,
                        id,
                        NotationDefinition {
                            for_symbol: sym,
                            fixity,
                            operator,
                            precedence: rng.gen_range(-5..50),
                        },
                    );
                    pages.push(page);
                    t.statements.push(s);
                    continue;
                }
                _ => {}
            }
            if kind.requires_target() || (kind.allows_target() && rng.gen_bool(0.5)) {
                let target = if kind == StatementKind::Definition {
                    symbols
                        .iter()
                        .rev()
                        .find(|s| rng.gen_bool(0.7) && s.theory != "ext")
                        .map(SymbolRef::declaration_page)
                        .unwrap_or_else(|| pages.choose(rng).unwrap().clone())
                } else {
                    pages.choose(rng).unwrap().clone()
                };
                s.for_target = Some(Target::Page(target));
            }
            if kind != StatementKind::SymbolDecl && rng.gen_bool(0.7) {
                s.formal = Some(formula(rng, &symbols, shape.formula_depth));
            }
            if shape.text {
                s.informal = informal(rng, &pages);
                if rng.gen_bool(0.2) {
                    s.metadata = metadata(rng);
                }
            }
            if kind == StatementKind::Proof {
                s.steps = steps(rng, id, &symbols, &pages, 2, &mut next_step, shape);
            }
            pages.push(page);
            t.statements.push(s);
        }
        pages.push(id.clone());
        theories.push(t);
    }
    Document { theories }
}

/// Imports a generated document into a fresh wiki.
pub fn wiki_from(doc: &Document) -> Wiki {
    let mut w = Wiki::new();
    w.import_document(&mathwiki_core::omdoc::serialize_document(doc), "gen").unwrap();
    w
}

// ---------------------------------------------------------------- entailment

/// Random triples over the schema vocabulary and up to `max_nodes` nodes.
pub fn random_triples(rng: &mut StdRng, schema: &OntologySchema, max_nodes: usize) -> Vec<Triple> {
    let n_nodes = rng.gen_range(1..=max_nodes);
    let nodes: Vec<String> = (0..n_nodes).map(|i| format!("n{i}")).collect();
    let classes: Vec<&String> = schema.classes.iter().collect();
    let mut props: Vec<String> = schema.properties.iter().cloned().collect();
    props.push("other".into());
    let n = rng.gen_range(0..=nodes.len() * 2);
    (0..n)
        .map(|_| {
            let s = nodes.choose(rng).unwrap().clone();
            if rng.gen_bool(0.3) {
                let c = (*classes.choose(rng).unwrap()).clone();
                Triple::extracted(s, TYPE, c, "p")
            } else {
                let p = props.choose(rng).unwrap().clone();
                let o = nodes.choose(rng).unwrap().clone();
                Triple::extracted(s, p, o, "p")
            }
        })
        .collect()
}

/// Applies every rule to every pair of facts until nothing changes, then
/// returns the facts that were not in the input.
pub fn naive_entail(input: &BTreeSet<Spo>, schema: &OntologySchema) -> BTreeSet<Spo> {
    let mut facts = input.clone();
    loop {
        let mut new = BTreeSet::new();
        for (s, p, o) in &facts {
            if p == TYPE {
                for (sub, sup) in &schema.subclass_of {
                    if sub == o {
                        new.insert((s.clone(), TYPE.to_owned(), sup.clone()));
                    }
                }
            }
            for (sub, sup) in &schema.subproperty_of {
                if sub == p {
                    new.insert((s.clone(), sup.clone(), o.clone()));
                }
            }
            if let Some([c]) = schema.domain.get(p).map(Vec::as_slice) {
                new.insert((s.clone(), TYPE.to_owned(), c.clone()));
            }
            if let Some([c]) = schema.range.get(p).map(Vec::as_slice) {
                new.insert((o.clone(), TYPE.to_owned(), c.clone()));
            }
            if schema.transitive.contains(p) {
                for (s2, p2, o2) in &facts {
                    if p2 == p && s2 == o {
                        new.insert((s.clone(), p.clone(), o2.clone()));
                    }
                }
            }
        }
        let before = facts.len();
        facts.extend(new);
        if facts.len() == before {
            break;
        }
    }
    facts.difference(input).cloned().collect()
}

// ---------------------------------------------------------------- graphs

/// Random DAG on `n` nodes: edges only go from lower to higher index.
pub fn random_dag(rng: &mut StdRng, n: usize) -> Vec<(usize, usize)> {
    let density = rng.gen_range(0.0..0.15);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                edges.push((i, j));
            }
        }
    }
    edges.shuffle(rng);
    edges
}

/// Warshall's algorithm over a boolean adjacency matrix.
pub fn warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut m = vec![vec![false; n]; n];
    for &(a, b) in edges {
        m[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if m[i][k] {
                for j in 0..n {
                    if m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
    }
    m
}

// ---------------------------------------------------------------- invalidation

/// Pages that must be re-rendered when `symbol`'s notation changes,
/// computed from page contents alone: statement pages with a formula using
/// it, plus their home theory pages.
pub fn invalidation_oracle(w: &Wiki, symbol: &SymbolRef) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for p in w.list_pages() {
        let Some(s) = w.content(&p.name).and_then(|c| c.as_statement()) else {
            continue;
        };
        if s.formulas().iter().any(|f| f.symbols_used().contains(symbol)) {
            out.insert(p.name.clone());
            if w.exists(&s.home_theory) {
                out.insert(s.home_theory.clone());
            }
        }
    }
    out
}

/// Serialized layout of every live page.
pub fn render_all(w: &Wiki) -> BTreeMap<String, String> {
    w.list_pages()
        .into_iter()
        .map(|p| {
            let xml = w.render_uncached(&p.name).unwrap().layout_xml();
            (p.name, xml)
        })
        .collect()
}

/// Symbols used anywhere in the wiki's formulae.
pub fn used_symbols(w: &Wiki) -> Vec<SymbolRef> {
    let mut out = BTreeSet::new();
    for p in w.list_pages() {
        if let Some(s) = w.content(&p.name).and_then(|c| c.as_statement()) {
            for f in s.formulas() {
                out.extend(f.symbols_used());
            }
        }
    }
    out.into_iter().collect()
}
