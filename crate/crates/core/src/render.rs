//! Applies notation definitions to formula trees.
//!
//! The result is a small presentation tree that can be linearized to plain
//! text or written out as layout XML (`m:row`, `m:o`, `m:i`, `m:n`,
//! `m:fenced`, with `href` on linked tokens).
//!
//! Precedence: higher numbers bind tighter. An operand is fenced iff it is an
//! application whose head notation has strictly lower precedence than the
//! enclosing head. Arguments of prefix notations already sit inside a fenced
//! argument list and are never fenced again.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{parse_template, Fixity, Formula, NotationDefinition, SymbolRef, TemplatePiece};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PresentationNode {
    Row(Vec<PresentationNode>),
    Op(String),
    Ident(String),
    Num(String),
    Link { target: String, child: Box<PresentationNode> },
    Fenced(Box<PresentationNode>),
}

impl PresentationNode {
    pub fn op(s: &str) -> Self {
        PresentationNode::Op(s.to_owned())
    }

    pub fn ident(s: &str) -> Self {
        PresentationNode::Ident(s.to_owned())
    }

    pub fn num(s: &str) -> Self {
        PresentationNode::Num(s.to_owned())
    }

    pub fn link(target: &str, child: PresentationNode) -> Self {
        PresentationNode::Link {
            target: target.to_owned(),
            child: Box::new(child),
        }
    }

    pub fn fenced(child: PresentationNode) -> Self {
        PresentationNode::Fenced(Box::new(child))
    }

    /// Operator text, looking through links.
    fn op_text(&self) -> Option<&str> {
        match self {
            PresentationNode::Op(t) => Some(t),
            PresentationNode::Link { child, .. } => child.op_text(),
            _ => None,
        }
    }

    /// All link targets in the tree, in document order.
    pub fn link_targets(&self) -> Vec<&str> {
        let mut out = Vec::new();
        fn walk<'a>(n: &'a PresentationNode, out: &mut Vec<&'a str>) {
            match n {
                PresentationNode::Row(children) => children.iter().for_each(|c| walk(c, out)),
                PresentationNode::Link { target, child } => {
                    out.push(target);
                    walk(child, out);
                }
                PresentationNode::Fenced(child) => walk(child, out),
                _ => {}
            }
        }
        walk(self, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WarningKind {
    MissingNotation,
    OpaqueHead,
    DanglingSymbol,
    DuplicateNotation,
    ArityMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Warning {
    pub kind: WarningKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbol: Option<SymbolRef>,
    pub message: String,
}

impl Warning {
    pub fn new(kind: WarningKind, symbol: Option<&SymbolRef>, message: impl Into<String>) -> Self {
        Warning {
            kind,
            symbol: symbol.cloned(),
            message: message.into(),
        }
    }
}

/// One notation definition per symbol.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NotationTable {
    entries: BTreeMap<SymbolRef, NotationDefinition>,
}

impl NotationTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `def`, replacing any earlier definition for the same symbol; a
    /// replacement is reported as a duplicate.
    pub fn insert(&mut self, def: NotationDefinition) -> Option<Warning> {
        let symbol = def.for_symbol.clone();
        self.entries.insert(symbol.clone(), def).map(|_| {
            Warning::new(
                WarningKind::DuplicateNotation,
                Some(&symbol),
                format!("several notations for {symbol}; the latest one is used"),
            )
        })
    }

    /// Builds a table from definitions in save order (later ones win).
    pub fn from_definitions(defs: impl IntoIterator<Item = NotationDefinition>) -> (Self, Vec<Warning>) {
        let mut table = NotationTable::new();
        let warnings = defs.into_iter().filter_map(|d| table.insert(d)).collect();
        (table, warnings)
    }

    pub fn get(&self, symbol: &SymbolRef) -> Option<&NotationDefinition> {
        self.entries.get(symbol)
    }

    pub fn remove(&mut self, symbol: &SymbolRef) -> Option<NotationDefinition> {
        self.entries.remove(symbol)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SymbolRef, &NotationDefinition)> {
        self.entries.iter()
    }
}

impl FromIterator<NotationDefinition> for NotationTable {
    fn from_iter<I: IntoIterator<Item = NotationDefinition>>(iter: I) -> Self {
        NotationTable::from_definitions(iter).0
    }
}

/// Where symbols are declared, so rendered tokens can link there.
pub trait DeclarationLookup {
    fn declaration_page(&self, symbol: &SymbolRef) -> Option<String>;
}

/// Explicit symbol → page map.
impl DeclarationLookup for BTreeMap<SymbolRef, String> {
    fn declaration_page(&self, symbol: &SymbolRef) -> Option<String> {
        self.get(symbol).cloned()
    }
}

/// Declared symbols live on their conventional `theory/name` page.
impl DeclarationLookup for BTreeSet<SymbolRef> {
    fn declaration_page(&self, symbol: &SymbolRef) -> Option<String> {
        self.contains(symbol).then(|| symbol.declaration_page())
    }
}

/// Treats every symbol as declared on its conventional page.
#[derive(Debug, Clone, Copy, Default)]
pub struct AssumeDeclared;

impl DeclarationLookup for AssumeDeclared {
    fn declaration_page(&self, symbol: &SymbolRef) -> Option<String> {
        Some(symbol.declaration_page())
    }
}

struct Renderer<'a, D: ?Sized> {
    table: &'a NotationTable,
    decls: &'a D,
    warnings: Vec<Warning>,
}

fn fallback_name(r: &SymbolRef) -> String {
    format!("{}?{}", r.theory, r.name)
}

impl<D: DeclarationLookup + ?Sized> Renderer<'_, D> {
    fn warn(&mut self, w: Warning) {
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    fn linked(&mut self, r: &SymbolRef, node: PresentationNode) -> PresentationNode {
        match self.decls.declaration_page(r) {
            Some(page) => PresentationNode::Link {
                target: page,
                child: Box::new(node),
            },
            None => {
                self.warn(Warning::new(
                    WarningKind::DanglingSymbol,
                    Some(r),
                    format!("no declaration found for {r}"),
                ));
                node
            }
        }
    }

    fn precedence_of(&self, f: &Formula) -> Option<i64> {
        match f {
            Formula::Apply { head, .. } => match head.as_ref() {
                Formula::Sym(r) => self.table.get(r).map(|n| n.precedence),
                _ => None,
            },
            _ => None,
        }
    }

    fn operand(&mut self, f: &Formula, parent: i64) -> PresentationNode {
        let node = self.render(f);
        match self.precedence_of(f) {
            Some(p) if p < parent => PresentationNode::fenced(node),
            _ => node,
        }
    }

    fn arg_list(&mut self, args: &[Formula]) -> PresentationNode {
        let mut row = Vec::with_capacity(args.len() * 2);
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                row.push(PresentationNode::op(","));
            }
            row.push(self.render(a));
        }
        PresentationNode::fenced(PresentationNode::Row(row))
    }

    fn render(&mut self, f: &Formula) -> PresentationNode {
        match f {
            Formula::Var(v) => PresentationNode::Ident(v.clone()),
            Formula::Int(n) => PresentationNode::Num(n.to_string()),
            Formula::Sym(r) => {
                let display = match self.table.get(r) {
                    Some(n) if n.fixity != Fixity::Mixfix && !n.operator.is_empty() => n.operator.clone(),
                    Some(_) => fallback_name(r),
                    None => {
                        self.missing(r);
                        fallback_name(r)
                    }
                };
                self.linked(r, PresentationNode::Ident(display))
            }
            Formula::Apply { head, args } => match head.as_ref() {
                Formula::Sym(r) => match self.table.get(r).cloned() {
                    Some(n) => self.apply_notation(r, &n, args),
                    None => {
                        self.missing(r);
                        let name = self.linked(r, PresentationNode::Ident(fallback_name(r)));
                        let list = self.arg_list(args);
                        PresentationNode::Row(vec![name, list])
                    }
                },
                other => {
                    self.warn(Warning::new(
                        WarningKind::OpaqueHead,
                        None,
                        "application head is not a symbol",
                    ));
                    let head = self.render(other);
                    let list = self.arg_list(args);
                    PresentationNode::Row(vec![head, list])
                }
            },
        }
    }

    fn missing(&mut self, r: &SymbolRef) {
        self.warn(Warning::new(
            WarningKind::MissingNotation,
            Some(r),
            format!("no notation for {r}"),
        ));
    }

    fn apply_notation(&mut self, r: &SymbolRef, n: &NotationDefinition, args: &[Formula]) -> PresentationNode {
        let prec = n.precedence;
        match n.fixity {
            Fixity::Infix => {
                let op = || PresentationNode::op(&n.operator);
                if let [only] = args {
                    let op = self.linked(r, op());
                    return PresentationNode::Row(vec![op, self.operand(only, prec)]);
                }
                let mut row = Vec::with_capacity(args.len() * 2);
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        row.push(self.linked(r, op()));
                    }
                    row.push(self.operand(a, prec));
                }
                PresentationNode::Row(row)
            }
            Fixity::Prefix => {
                let op = self.linked(r, PresentationNode::op(&n.operator));
                let list = self.arg_list(args);
                PresentationNode::Row(vec![op, list])
            }
            Fixity::Postfix => {
                let operand = match args {
                    [only] => self.operand(only, prec),
                    _ => self.arg_list(args),
                };
                let op = self.linked(r, PresentationNode::op(&n.operator));
                PresentationNode::Row(vec![operand, op])
            }
            Fixity::Mixfix => self.mixfix(r, n, args),
        }
    }

    fn mixfix(&mut self, r: &SymbolRef, n: &NotationDefinition, args: &[Formula]) -> PresentationNode {
        let pieces = parse_template(&n.operator).unwrap_or_default();
        let mut row = Vec::new();
        let mut max_slot = 0;
        for piece in pieces {
            match piece {
                TemplatePiece::Literal(text) => {
                    let text = text.trim();
                    if !text.is_empty() {
                        row.push(self.linked(r, PresentationNode::op(text)));
                    }
                }
                TemplatePiece::Slot(k) => {
                    max_slot = max_slot.max(k);
                    match args.get(k - 1) {
                        Some(a) => row.push(self.operand(a, n.precedence)),
                        None => {
                            self.arity(r, n, args.len());
                            row.push(PresentationNode::Ident(format!("#{k}")));
                        }
                    }
                }
            }
        }
        if args.len() > max_slot {
            self.arity(r, n, args.len());
            let extra = self.arg_list(&args[max_slot..]);
            return PresentationNode::Row(vec![PresentationNode::Row(row), extra]);
        }
        PresentationNode::Row(row)
    }

    fn arity(&mut self, r: &SymbolRef, n: &NotationDefinition, got: usize) {
        let slots = n.template_slots().map_or(0, |s| s.len());
        self.warn(Warning::new(
            WarningKind::ArityMismatch,
            Some(r),
            format!("template for {r} has {slots} slots, applied to {got} arguments"),
        ));
    }
}

/// Renders `f` with `table`, linking symbol tokens via `decls`.
pub fn render<D: DeclarationLookup + ?Sized>(
    f: &Formula,
    table: &NotationTable,
    decls: &D,
) -> (PresentationNode, Vec<Warning>) {
    let mut r = Renderer {
        table,
        decls,
        warnings: Vec::new(),
    };
    let node = r.render(f);
    (node, r.warnings)
}

/// Linear text. Operators are spaced except in leading (prefix) and trailing
/// (postfix) position; commas take a space after only; links are transparent.
pub fn render_plain(p: &PresentationNode) -> String {
    let mut out = String::new();
    plain_into(p, &mut out);
    out
}

fn plain_into(p: &PresentationNode, out: &mut String) {
    match p {
        PresentationNode::Op(t) | PresentationNode::Ident(t) | PresentationNode::Num(t) => out.push_str(t),
        PresentationNode::Link { child, .. } => plain_into(child, out),
        PresentationNode::Fenced(child) => {
            out.push('(');
            plain_into(child, out);
            out.push(')');
        }
        PresentationNode::Row(children) => {
            let last = children.len().saturating_sub(1);
            for (i, child) in children.iter().enumerate() {
                if i > 0 {
                    let before = children[i - 1].op_text();
                    let here = child.op_text();
                    let space = if here == Some(",") {
                        false
                    } else if before == Some(",") {
                        true
                    } else {
                        (before.is_some() && i - 1 != 0) || (here.is_some() && i != last)
                    };
                    if space {
                        out.push(' ');
                    }
                }
                plain_into(child, out);
            }
        }
    }
}

fn escape(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}

/// Layout XML; a link becomes an `href` attribute on the element it wraps.
pub fn serialize_layout(p: &PresentationNode) -> String {
    let mut out = String::new();
    layout_into(p, None, &mut out);
    out
}

fn layout_into(p: &PresentationNode, href: Option<&str>, out: &mut String) {
    let open = |name: &str, out: &mut String| {
        let _ = write!(out, "<m:{name}");
        if let Some(h) = href {
            out.push_str(" href=\"");
            escape(h, out);
            out.push('"');
        }
    };
    match p {
        PresentationNode::Link { target, child } => layout_into(child, Some(target), out),
        PresentationNode::Op(t) | PresentationNode::Ident(t) | PresentationNode::Num(t) => {
            let name = match p {
                PresentationNode::Op(_) => "o",
                PresentationNode::Ident(_) => "i",
                _ => "n",
            };
            open(name, out);
            out.push('>');
            escape(t, out);
            let _ = write!(out, "</m:{name}>");
        }
        PresentationNode::Row(children) => {
            open("row", out);
            if children.is_empty() {
                out.push_str("/>");
                return;
            }
            out.push('>');
            for c in children {
                layout_into(c, None, out);
            }
            out.push_str("</m:row>");
        }
        PresentationNode::Fenced(child) => {
            open("fenced", out);
            out.push('>');
            layout_into(child, None, out);
            out.push_str("</m:fenced>");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PresentationNode as P;

    fn sym(name: &str) -> SymbolRef {
        SymbolRef::new("arith", name)
    }

    fn notation(name: &str, fixity: Fixity, op: &str, prec: i64) -> NotationDefinition {
        NotationDefinition {
            for_symbol: sym(name),
            fixity,
            operator: op.into(),
            precedence: prec,
        }
    }

    fn table() -> NotationTable {
        [
            notation("plus", Fixity::Infix, "+", 10),
            notation("times", Fixity::Infix, "·", 20),
            notation("sin", Fixity::Prefix, "sin", 30),
            notation("fact", Fixity::Postfix, "!", 40),
            notation("binom", Fixity::Mixfix, "#1 choose #2", 5),
            notation("abs", Fixity::Mixfix, "|#1|", 50),
        ]
        .into_iter()
        .collect()
    }

    fn app(name: &str, args: Vec<Formula>) -> Formula {
        Formula::apply(Formula::Sym(sym(name)), args)
    }

    fn plain(f: &Formula) -> String {
        render_plain(&render(f, &table(), &AssumeDeclared).0)
    }

    #[test]
    fn infix_plus() {
        let (node, warnings) = render(&app("plus", vec![Formula::int(2), Formula::int(3)]), &table(), &AssumeDeclared);
        assert!(warnings.is_empty());
        assert_eq!(
            node,
            P::Row(vec![P::num("2"), P::link("arith/plus", P::op("+")), P::num("3")])
        );
        assert_eq!(render_plain(&node), "2 + 3");
    }

    #[test]
    fn lower_precedence_child_is_fenced() {
        let f = app("times", vec![app("plus", vec![Formula::int(1), Formula::int(2)]), Formula::int(3)]);
        let (node, _) = render(&f, &table(), &AssumeDeclared);
        let P::Row(children) = &node else { panic!("{node:?}") };
        assert!(matches!(children[0], P::Fenced(_)));
        assert_eq!(render_plain(&node), "(1 + 2) · 3");
    }

    #[test]
    fn equal_or_higher_precedence_is_bare() {
        let f = app("plus", vec![app("plus", vec![Formula::int(1), Formula::int(2)]), app("times", vec![Formula::var("x"), Formula::int(3)])]);
        assert_eq!(plain(&f), "1 + 2 + x · 3");
    }

    #[test]
    fn prefix_postfix_mixfix() {
        assert_eq!(plain(&app("sin", vec![app("plus", vec![Formula::var("x"), Formula::int(1)])])), "sin(x + 1)");
        assert_eq!(plain(&app("fact", vec![Formula::var("n")])), "n!");
        assert_eq!(plain(&app("fact", vec![app("plus", vec![Formula::var("n"), Formula::int(1)])])), "(n + 1)!");
        assert_eq!(plain(&app("binom", vec![Formula::var("n"), Formula::var("k")])), "n choose k");
        assert_eq!(plain(&app("abs", vec![Formula::var("x")])), "|x|");
        assert_eq!(plain(&app("plus", vec![Formula::var("x")])), "+x");
    }

    #[test]
    fn missing_notation_fallback() {
        let f = Formula::apply(Formula::sym("mystery", "f"), vec![Formula::int(1)]);
        let (node, warnings) = render(&f, &table(), &AssumeDeclared);
        assert_eq!(render_plain(&node), "mystery?f(1)");
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].kind, WarningKind::MissingNotation);
        assert_eq!(warnings[0].symbol, Some(SymbolRef::new("mystery", "f")));
    }

    #[test]
    fn dangling_symbol_drops_link() {
        let decls: BTreeSet<SymbolRef> = BTreeSet::from([sym("times")]);
        let f = app("plus", vec![Formula::int(1), Formula::int(2)]);
        let (node, warnings) = render(&f, &table(), &decls);
        assert_eq!(node, P::Row(vec![P::num("1"), P::op("+"), P::num("2")]));
        assert_eq!(warnings[0].kind, WarningKind::DanglingSymbol);
    }

    #[test]
    fn opaque_head() {
        let f = Formula::apply(Formula::var("g"), vec![Formula::int(1), Formula::int(2)]);
        let (node, warnings) = render(&f, &table(), &AssumeDeclared);
        assert_eq!(render_plain(&node), "g(1, 2)");
        assert_eq!(warnings[0].kind, WarningKind::OpaqueHead);
    }

    #[test]
    fn mixfix_arity_mismatch() {
        let (node, warnings) = render(
            &app("abs", vec![Formula::var("x"), Formula::var("y"), Formula::var("z")]),
            &table(),
            &AssumeDeclared,
        );
        assert_eq!(render_plain(&node), "|x|(y, z)");
        assert_eq!(warnings[0].kind, WarningKind::ArityMismatch);
        let (node, _) = render(&app("binom", vec![Formula::var("n")]), &table(), &AssumeDeclared);
        assert_eq!(render_plain(&node), "n choose #2");
    }

    #[test]
    fn standalone_symbol() {
        assert_eq!(
            render(&Formula::Sym(sym("plus")), &table(), &AssumeDeclared).0,
            P::link("arith/plus", P::ident("+"))
        );
        assert_eq!(plain(&Formula::Sym(sym("binom"))), "arith?binom");
    }

    #[test]
    fn duplicate_notation_latest_wins() {
        let (t, warnings) = NotationTable::from_definitions([
            notation("plus", Fixity::Infix, "+", 10),
            notation("plus", Fixity::Infix, "⊕", 10),
        ]);
        assert_eq!(t.get(&sym("plus")).unwrap().operator, "⊕");
        assert_eq!(warnings[0].kind, WarningKind::DuplicateNotation);
    }

    #[test]
    fn plain_basics() {
        assert_eq!(render_plain(&P::Row(vec![P::num("2"), P::op("+"), P::num("3")])), "2 + 3");
        assert_eq!(render_plain(&P::fenced(P::Row(vec![P::num("1")]))), "(1)");
    }

    #[test]
    fn layout_elements() {
        assert_eq!(serialize_layout(&P::num("3")), "<m:n>3</m:n>");
        assert_eq!(serialize_layout(&P::link("p", P::op("+"))), r#"<m:o href="p">+</m:o>"#);
        assert_eq!(
            serialize_layout(&P::Row(vec![P::fenced(P::ident("x")), P::op("<")])),
            "<m:row><m:fenced><m:i>x</m:i></m:fenced><m:o>&lt;</m:o></m:row>"
        );
    }
}
