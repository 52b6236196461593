//! Mapping from page content to extracted triples.
//!
//! Nodes that the markup does not name get ids scoped under the page:
//! formulae become `page#f1`, `page#f2`, ... in pre-order over the statement
//! and its proof steps, and a proof step `s` becomes `page#s`. A symbol
//! `theory#name` is its own node.

use std::collections::BTreeSet;

use crate::model::{PageContent, Statement, StatementKind, Target, Theory};
use crate::ontology::{class, prop, TYPE};
use crate::store::Triple;

struct Extractor<'a> {
    page: &'a str,
    out: BTreeSet<Triple>,
    formula_count: usize,
}

impl Extractor<'_> {
    fn emit(&mut self, s: &str, p: &str, o: &str) {
        self.out.insert(Triple::extracted(s, p, o, self.page));
    }

    fn statement(&mut self, node: &str, s: &Statement) {
        self.emit(node, TYPE, s.kind.class_name());
        match (s.kind, &s.for_target) {
            (StatementKind::Proof, Some(Target::Page(t))) => self.emit(node, prop::PROVES, t),
            (StatementKind::Definition, Some(Target::Page(t))) => self.emit(node, prop::DEFINES, t),
            (StatementKind::Example, Some(Target::Page(t))) => self.emit(node, prop::EXEMPLIFIES, t),
            _ => {}
        }
        if let Some(n) = &s.notation {
            let symbol = n.for_symbol.node_id();
            self.emit(node, prop::RENDERS, &symbol);
            self.emit(&symbol, TYPE, class::SYMBOL);
        }
        if let Some(f) = &s.formal {
            self.formula_count += 1;
            let fid = format!("{}#f{}", self.page, self.formula_count);
            self.emit(node, prop::CONTAINS, &fid);
            self.emit(&fid, TYPE, class::FORMULA);
            for r in f.symbols_used() {
                self.emit(&fid, prop::USES, &r.node_id());
            }
        }
        for step in &s.steps {
            let step_node = format!("{}#{}", self.page, step.id);
            self.emit(node, prop::CONTAINS, &step_node);
            self.statement(&step_node, step);
        }
    }

    fn theory(&mut self, t: &Theory) {
        self.emit(self.page, TYPE, class::THEORY);
        for imp in &t.imports {
            self.emit(self.page, prop::IMPORTS, imp);
        }
    }
}

/// Triples extracted from one page, all with provenance `Extracted(page)`.
pub fn extract(page: &str, content: &PageContent) -> BTreeSet<Triple> {
    let mut x = Extractor {
        page,
        out: BTreeSet::new(),
        formula_count: 0,
    };
    match content {
        PageContent::Theory(t) => x.theory(t),
        PageContent::Statement(s) => {
            x.emit(&s.home_theory, prop::HOME_THEORY_OF, page);
            x.statement(page, s);
        }
    }
    x.out
}
