use std::collections::BTreeSet;

use num_bigint::BigInt;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{LineIndex, ParseError, ParseErrorCode};
use crate::model::{
    is_identifier, is_page_name, validate_statement, DublinCore, Fixity, Formula, NotationDefinition, Statement,
    StatementKind, SymbolRef, Target, TextBlock, Theory, ViolationCode,
};
use crate::model::Document;

/// Namespace accepted (and dropped) on the root element.
pub const OMDOC_NS: &str = "http://omdoc.org/ns";

#[derive(Debug)]
struct Element {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Node>,
    pos: usize,
}

#[derive(Debug)]
enum Node {
    Element(Element),
    Text(String, usize),
}

fn build_tree(xml: &str, idx: &LineIndex<'_>) -> Result<Element, ParseError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(false);
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    let malformed = |pos: usize, msg: String| idx.error(pos, ParseErrorCode::Malformed, msg);

    loop {
        let pos = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|e| malformed(reader.error_position() as usize, e.to_string()))?;
        match event {
            Event::Start(start) => {
                let el = open_element(&start, pos, idx)?;
                if root.is_some() {
                    return Err(malformed(pos, "content after the root element".into()));
                }
                stack.push(el);
            }
            Event::Empty(start) => {
                let el = open_element(&start, pos, idx)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(Node::Element(el)),
                    None if root.is_none() => root = Some(el),
                    None => return Err(malformed(pos, "content after the root element".into())),
                }
            }
            Event::End(_) => {
                // quick-xml has already matched the end name against the open tag
                let el = stack
                    .pop()
                    .ok_or_else(|| malformed(pos, "unexpected closing tag".into()))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(Node::Element(el)),
                    None => root = Some(el),
                }
            }
            Event::Text(text) => {
                let s = text.unescape().map_err(|e| malformed(pos, e.to_string()))?;
                push_text(&mut stack, &s, pos, idx)?;
            }
            Event::CData(data) => {
                let raw = data.into_inner();
                let s = std::str::from_utf8(&raw).map_err(|e| malformed(pos, e.to_string()))?;
                push_text(&mut stack, s, pos, idx)?;
            }
            Event::Comment(_) => {}
            Event::Decl(_) => {
                if pos != 0 {
                    return Err(malformed(pos, "XML declaration must come first".into()));
                }
            }
            Event::PI(_) => return Err(malformed(pos, "processing instructions are not supported".into())),
            Event::DocType(_) => return Err(malformed(pos, "DTDs are not supported".into())),
            Event::Eof => break,
        }
    }
    if let Some(open) = stack.last() {
        return Err(malformed(xml.len(), format!("unclosed element <{}>", open.name)));
    }
    root.ok_or_else(|| malformed(0, "document has no root element".into()))
}

fn push_text(stack: &mut [Element], text: &str, pos: usize, idx: &LineIndex<'_>) -> Result<(), ParseError> {
    match stack.last_mut() {
        Some(parent) => {
            if let Some(Node::Text(prev, _)) = parent.children.last_mut() {
                prev.push_str(text);
            } else {
                parent.children.push(Node::Text(text.to_owned(), pos));
            }
            Ok(())
        }
        None if text.trim().is_empty() => Ok(()),
        None => Err(idx.error(pos, ParseErrorCode::Malformed, "text outside the root element")),
    }
}

fn open_element(start: &BytesStart<'_>, pos: usize, idx: &LineIndex<'_>) -> Result<Element, ParseError> {
    let name = std::str::from_utf8(start.name().as_ref())
        .map_err(|e| idx.error(pos, ParseErrorCode::Malformed, e.to_string()))?
        .to_owned();
    let mut attrs: Vec<(String, String)> = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| idx.error(pos, ParseErrorCode::Malformed, e.to_string()))?;
        let key = std::str::from_utf8(attr.key.as_ref())
            .map_err(|e| idx.error(pos, ParseErrorCode::Malformed, e.to_string()))?
            .to_owned();
        let value = attr
            .unescape_value()
            .map_err(|e| idx.error(pos, ParseErrorCode::Malformed, e.to_string()))?
            .into_owned();
        attrs.push((key, value));
    }
    Ok(Element {
        name,
        attrs,
        children: Vec::new(),
        pos,
    })
}

struct Converter<'a> {
    idx: LineIndex<'a>,
}

impl Element {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(|n| match n {
            Node::Element(e) => Some(e),
            Node::Text(..) => None,
        })
    }
}

impl Converter<'_> {
    fn err(&self, pos: usize, code: ParseErrorCode, msg: impl Into<String>) -> ParseError {
        self.idx.error(pos, code, msg)
    }

    /// Rejects attributes outside `allowed`, then returns values for `required`.
    fn check_attrs(&self, el: &Element, allowed: &[&str]) -> Result<(), ParseError> {
        for (k, _) in &el.attrs {
            if !allowed.contains(&k.as_str()) {
                return Err(self.err(
                    el.pos,
                    ParseErrorCode::UnknownElement,
                    format!("unknown attribute `{k}` on <{}>", el.name),
                ));
            }
        }
        Ok(())
    }

    fn required<'e>(&self, el: &'e Element, key: &str) -> Result<&'e str, ParseError> {
        el.attr(key).ok_or_else(|| {
            self.err(
                el.pos,
                ParseErrorCode::MissingAttr,
                format!("<{}> needs attribute `{key}`", el.name),
            )
        })
    }

    fn ident(&self, el: &Element, key: &str) -> Result<String, ParseError> {
        let v = self.required(el, key)?;
        if is_identifier(v) {
            Ok(v.to_owned())
        } else {
            Err(self.err(el.pos, ParseErrorCode::BadRef, format!("`{v}` is not a valid identifier")))
        }
    }

    fn no_text(&self, el: &Element) -> Result<(), ParseError> {
        for child in &el.children {
            if let Node::Text(t, pos) = child {
                if !t.trim().is_empty() {
                    return Err(self.err(*pos, ParseErrorCode::Malformed, format!("unexpected text in <{}>", el.name)));
                }
            }
        }
        Ok(())
    }

    fn unknown(&self, el: &Element, context: &str) -> ParseError {
        self.err(
            el.pos,
            ParseErrorCode::UnknownElement,
            format!("<{}> is not allowed in <{context}>", el.name),
        )
    }

    fn document(&self, root: &Element) -> Result<Document, ParseError> {
        if root.name != "omdoc" {
            return Err(self.err(root.pos, ParseErrorCode::UnknownElement, format!("expected <omdoc>, found <{}>", root.name)));
        }
        self.check_attrs(root, &["xmlns"])?;
        if let Some(ns) = root.attr("xmlns") {
            if ns != OMDOC_NS {
                return Err(self.err(root.pos, ParseErrorCode::Malformed, format!("unsupported namespace `{ns}`")));
            }
        }
        self.no_text(root)?;
        let mut theories = Vec::new();
        let mut ids = BTreeSet::new();
        for el in root.elements() {
            if el.name != "theory" {
                return Err(self.unknown(el, "omdoc"));
            }
            let t = self.theory(el)?;
            if !ids.insert(t.id.clone()) {
                return Err(self.err(el.pos, ParseErrorCode::BadRef, format!("theory `{}` defined twice", t.id)));
            }
            theories.push(t);
        }
        Ok(Document { theories })
    }

    fn theory(&self, el: &Element) -> Result<Theory, ParseError> {
        self.check_attrs(el, &["xml:id"])?;
        self.no_text(el)?;
        let id = self.ident(el, "xml:id")?;
        let mut theory = Theory::new(&id);
        let mut seen_metadata = false;
        let mut statement_ids = BTreeSet::new();
        for (i, child) in el.elements().enumerate() {
            match child.name.as_str() {
                "metadata" => {
                    if i != 0 || seen_metadata {
                        return Err(self.err(child.pos, ParseErrorCode::Malformed, "<metadata> must be the first child"));
                    }
                    seen_metadata = true;
                    theory.metadata = self.metadata(child)?;
                }
                "imports" => {
                    if !theory.statements.is_empty() {
                        return Err(self.err(child.pos, ParseErrorCode::Malformed, "<imports> must precede statements"));
                    }
                    self.check_attrs(child, &["from"])?;
                    self.expect_empty(child)?;
                    let from = self.ident(child, "from")?;
                    if from == id {
                        return Err(self.err(child.pos, ParseErrorCode::BadRef, format!("theory `{id}` imports itself")));
                    }
                    if theory.imports.contains(&from) {
                        return Err(self.err(child.pos, ParseErrorCode::BadRef, format!("`{from}` imported twice")));
                    }
                    theory.imports.push(from);
                }
                name => {
                    let kind = StatementKind::from_element_name(name).ok_or_else(|| self.unknown(child, "theory"))?;
                    let s = self.statement(child, kind, &id, false)?;
                    if !statement_ids.insert(s.id.clone()) {
                        return Err(self.err(child.pos, ParseErrorCode::BadRef, format!("statement `{}` defined twice", s.id)));
                    }
                    self.check_statement(child, &s)?;
                    theory.statements.push(s);
                }
            }
        }
        Ok(theory)
    }

    fn expect_empty(&self, el: &Element) -> Result<(), ParseError> {
        self.no_text(el)?;
        match el.elements().next() {
            Some(child) => Err(self.unknown(child, &el.name)),
            None => Ok(()),
        }
    }

    fn metadata(&self, el: &Element) -> Result<DublinCore, ParseError> {
        self.check_attrs(el, &[])?;
        self.no_text(el)?;
        let mut dc = DublinCore::default();
        for child in el.elements() {
            let slot = match child.name.as_str() {
                "dc-title" => &mut dc.title,
                "dc-creator" => &mut dc.creator,
                "dc-description" => &mut dc.description,
                "dc-date" => &mut dc.date,
                _ => return Err(self.unknown(child, "metadata")),
            };
            if slot.is_some() {
                return Err(self.err(child.pos, ParseErrorCode::Malformed, format!("<{}> given twice", child.name)));
            }
            self.check_attrs(child, &[])?;
            let text = self.text_only(child)?;
            if text.is_empty() {
                return Err(self.err(child.pos, ParseErrorCode::Malformed, format!("<{}> is empty", child.name)));
            }
            *slot = Some(text);
        }
        Ok(dc)
    }

    fn text_only(&self, el: &Element) -> Result<String, ParseError> {
        let mut out = String::new();
        for child in &el.children {
            match child {
                Node::Text(t, _) => out.push_str(t),
                Node::Element(e) => return Err(self.unknown(e, &el.name)),
            }
        }
        Ok(out)
    }

    fn statement(&self, el: &Element, kind: StatementKind, home: &str, is_step: bool) -> Result<Statement, ParseError> {
        if kind == StatementKind::NotationDecl {
            if is_step {
                return Err(self.unknown(el, "proof"));
            }
            return self.notation(el, home);
        }
        let allowed: &[&str] = if kind.allows_target() { &["id", "for"] } else { &["id"] };
        self.check_attrs(el, allowed)?;
        self.no_text(el)?;
        let id = self.ident(el, "id")?;
        let mut s = Statement::new(&id, kind, home);
        if kind.allows_target() {
            let target = if kind.requires_target() {
                Some(self.required(el, "for")?)
            } else {
                el.attr("for")
            };
            if let Some(t) = target {
                if !is_page_name(t) {
                    return Err(self.err(el.pos, ParseErrorCode::BadRef, format!("`{t}` is not a valid page name")));
                }
                s.for_target = Some(Target::Page(t.to_owned()));
            }
        }

        #[derive(PartialEq, PartialOrd)]
        enum Stage {
            Metadata,
            Cmp,
            Fmp,
            Steps,
        }
        let mut stage = Stage::Metadata;
        let mut first = true;
        for child in el.elements() {
            let name = child.name.as_str();
            match name {
                "metadata" if first => {
                    s.metadata = self.metadata(child)?;
                }
                "CMP" if stage <= Stage::Cmp => {
                    stage = Stage::Cmp;
                    self.cmp(child, &mut s.informal)?;
                }
                "FMP" if stage < Stage::Fmp && kind != StatementKind::SymbolDecl => {
                    stage = Stage::Fmp;
                    s.formal = Some(self.fmp(child)?);
                }
                _ if kind == StatementKind::Proof => {
                    let step_kind = StatementKind::from_element_name(name).ok_or_else(|| self.unknown(child, "proof"))?;
                    stage = Stage::Steps;
                    s.steps.push(self.statement(child, step_kind, home, true)?);
                }
                _ => {
                    return Err(self.err(
                        child.pos,
                        ParseErrorCode::UnknownElement,
                        format!("<{name}> is not allowed here in <{}>", el.name),
                    ))
                }
            }
            first = false;
        }
        Ok(s)
    }

    fn notation(&self, el: &Element, home: &str) -> Result<Statement, ParseError> {
        self.check_attrs(el, &["id", "for", "fixity", "operator", "precedence"])?;
        self.expect_empty(el)?;
        let for_attr = self.required(el, "for")?;
        let symbol: SymbolRef = for_attr
            .parse()
            .map_err(|_| self.err(el.pos, ParseErrorCode::BadRef, format!("`{for_attr}` is not a symbol reference")))?;
        let fixity_attr = self.required(el, "fixity")?;
        let fixity: Fixity = fixity_attr
            .parse()
            .map_err(|_| self.err(el.pos, ParseErrorCode::Malformed, format!("unknown fixity `{fixity_attr}`")))?;
        let operator = self.required(el, "operator")?.to_owned();
        let prec_attr = self.required(el, "precedence")?;
        let precedence: i64 = prec_attr
            .trim()
            .parse()
            .map_err(|_| self.err(el.pos, ParseErrorCode::BadInteger, format!("bad precedence `{prec_attr}`")))?;
        let id = match el.attr("id") {
            Some(_) => self.ident(el, "id")?,
            None => default_notation_id(&symbol),
        };
        Ok(Statement::notation_decl(
            &id,
            home,
            NotationDefinition {
                for_symbol: symbol,
                fixity,
                operator,
                precedence,
            },
        ))
    }

    fn cmp(&self, el: &Element, out: &mut Vec<TextBlock>) -> Result<(), ParseError> {
        self.check_attrs(el, &[])?;
        for child in &el.children {
            match child {
                Node::Text(t, _) => push_text_block(out, t),
                Node::Element(link) if link.name == "link" => {
                    self.check_attrs(link, &["to"])?;
                    let to = self.required(link, "to")?;
                    if to.is_empty() {
                        return Err(self.err(link.pos, ParseErrorCode::BadRef, "empty link target"));
                    }
                    let label = self.text_only(link)?;
                    out.push(TextBlock::PageLink {
                        target: to.to_owned(),
                        label,
                    });
                }
                Node::Element(other) => return Err(self.unknown(other, "CMP")),
            }
        }
        Ok(())
    }

    fn fmp(&self, el: &Element) -> Result<Formula, ParseError> {
        self.check_attrs(el, &[])?;
        self.no_text(el)?;
        let mut children = el.elements();
        let f = match children.next() {
            Some(child) => self.formula(child)?,
            None => return Err(self.err(el.pos, ParseErrorCode::Malformed, "<FMP> needs one formula")),
        };
        if let Some(extra) = children.next() {
            return Err(self.err(extra.pos, ParseErrorCode::Malformed, "<FMP> holds exactly one formula"));
        }
        Ok(f)
    }

    fn formula(&self, el: &Element) -> Result<Formula, ParseError> {
        match el.name.as_str() {
            "OMS" => {
                self.check_attrs(el, &["cd", "name"])?;
                self.expect_empty(el)?;
                Ok(Formula::Sym(SymbolRef::new(self.ident(el, "cd")?, self.ident(el, "name")?)))
            }
            "OMV" => {
                self.check_attrs(el, &["name"])?;
                self.expect_empty(el)?;
                Ok(Formula::Var(self.ident(el, "name")?))
            }
            "OMI" => {
                self.check_attrs(el, &[])?;
                let text = self.text_only(el)?;
                parse_decimal(text.trim())
                    .map(Formula::Int)
                    .ok_or_else(|| self.err(el.pos, ParseErrorCode::BadInteger, format!("`{}` is not a decimal integer", text.trim())))
            }
            "OMA" => {
                self.check_attrs(el, &[])?;
                self.no_text(el)?;
                let mut parts = el.elements().map(|c| self.formula(c)).collect::<Result<Vec<_>, _>>()?;
                if parts.len() < 2 {
                    return Err(self.err(el.pos, ParseErrorCode::Malformed, "<OMA> needs a head and at least one argument"));
                }
                let head = parts.remove(0);
                Ok(Formula::apply(head, parts))
            }
            _ => Err(self.unknown(el, "FMP")),
        }
    }

    /// Surfaces any remaining model invariant as a positioned error.
    fn check_statement(&self, el: &Element, s: &Statement) -> Result<(), ParseError> {
        if let Some(v) = validate_statement(s).into_iter().next() {
            let code = match v.code {
                ViolationCode::BadIdentifier
                | ViolationCode::WrongTargetKind
                | ViolationCode::NotationTargetMismatch
                | ViolationCode::EmptyLinkTarget
                | ViolationCode::DuplicateId
                | ViolationCode::SelfImport
                | ViolationCode::DuplicateImport => ParseErrorCode::BadRef,
                ViolationCode::MissingTarget => ParseErrorCode::MissingAttr,
                _ => ParseErrorCode::Malformed,
            };
            return Err(self.err(el.pos, code, v.to_string()));
        }
        Ok(())
    }
}

fn push_text_block(out: &mut Vec<TextBlock>, text: &str) {
    if text.is_empty() {
        return;
    }
    if let Some(TextBlock::Text(prev)) = out.last_mut() {
        prev.push_str(text);
    } else {
        out.push(TextBlock::Text(text.to_owned()));
    }
}

/// `["-"] digit+`
pub(crate) fn parse_decimal(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Id given to a `<notation>` element that carries none.
pub fn default_notation_id(symbol: &SymbolRef) -> String {
    format!("notation-{}-{}", symbol.theory, symbol.name)
}

/// Parses an OMDoc-subset document. Every returned theory and statement
/// satisfies the model invariants.
pub fn parse_document(xml: &str) -> Result<Document, ParseError> {
    let idx = LineIndex::new(xml);
    let root = build_tree(xml, &idx)?;
    Converter { idx }.document(&root)
}
