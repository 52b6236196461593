use std::fmt::Write as _;

use crate::model::{DublinCore, Document, Formula, Statement, StatementKind, Target, TextBlock, Theory};

fn escape_text(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            _ => out.push(c),
        }
    }
}

fn escape_attr(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            _ => out.push(c),
        }
    }
}

struct Writer {
    out: String,
}

impl Writer {
    fn indent(&mut self, depth: usize) {
        self.out.push('\n');
        for _ in 0..depth {
            self.out.push_str("  ");
        }
    }

    fn open(&mut self, depth: usize, name: &str, attrs: &[(&str, &str)]) {
        self.indent(depth);
        self.out.push('<');
        self.out.push_str(name);
        for (k, v) in attrs {
            let _ = write!(self.out, " {k}=\"");
            escape_attr(v, &mut self.out);
            self.out.push('"');
        }
    }

    fn empty(&mut self, depth: usize, name: &str, attrs: &[(&str, &str)]) {
        self.open(depth, name, attrs);
        self.out.push_str("/>");
    }

    fn close(&mut self, depth: usize, name: &str) {
        self.indent(depth);
        let _ = write!(self.out, "</{name}>");
    }

    fn text_element(&mut self, depth: usize, name: &str, text: &str) {
        self.open(depth, name, &[]);
        self.out.push('>');
        escape_text(text, &mut self.out);
        let _ = write!(self.out, "</{name}>");
    }

    fn metadata(&mut self, depth: usize, dc: &DublinCore) {
        if dc.is_empty() {
            return;
        }
        self.open(depth, "metadata", &[]);
        self.out.push('>');
        for (field, value) in dc.fields() {
            if let Some(v) = value {
                self.text_element(depth + 1, &format!("dc-{field}"), v);
            }
        }
        self.close(depth, "metadata");
    }

    fn theory(&mut self, depth: usize, t: &Theory) {
        if t.metadata.is_empty() && t.imports.is_empty() && t.statements.is_empty() {
            self.empty(depth, "theory", &[("xml:id", &t.id)]);
            return;
        }
        self.open(depth, "theory", &[("xml:id", &t.id)]);
        self.out.push('>');
        self.metadata(depth + 1, &t.metadata);
        for imp in &t.imports {
            self.empty(depth + 1, "imports", &[("from", imp)]);
        }
        for s in &t.statements {
            self.statement(depth + 1, s);
        }
        self.close(depth, "theory");
    }

    fn statement(&mut self, depth: usize, s: &Statement) {
        let name = s.kind.element_name();
        if s.kind == StatementKind::NotationDecl {
            if let Some(n) = &s.notation {
                let symbol = n.for_symbol.to_string();
                let precedence = n.precedence.to_string();
                self.empty(
                    depth,
                    name,
                    &[
                        ("id", &s.id),
                        ("for", &symbol),
                        ("fixity", n.fixity.as_str()),
                        ("operator", &n.operator),
                        ("precedence", &precedence),
                    ],
                );
            }
            return;
        }
        let target = match &s.for_target {
            Some(Target::Page(p)) => Some(p.clone()),
            Some(Target::Symbol(r)) => Some(r.to_string()),
            None => None,
        };
        let mut attrs: Vec<(&str, &str)> = vec![("id", &s.id)];
        if let Some(t) = &target {
            attrs.push(("for", t));
        }
        if s.metadata.is_empty() && s.informal.is_empty() && s.formal.is_none() && s.steps.is_empty() {
            self.empty(depth, name, &attrs);
            return;
        }
        self.open(depth, name, &attrs);
        self.out.push('>');
        self.metadata(depth + 1, &s.metadata);
        if !s.informal.is_empty() {
            self.open(depth + 1, "CMP", &[]);
            self.out.push('>');
            for block in &s.informal {
                match block {
                    TextBlock::Text(t) => escape_text(t, &mut self.out),
                    TextBlock::PageLink { target, label } => {
                        self.out.push_str("<link to=\"");
                        escape_attr(target, &mut self.out);
                        if label.is_empty() {
                            self.out.push_str("\"/>");
                        } else {
                            self.out.push_str("\">");
                            escape_text(label, &mut self.out);
                            self.out.push_str("</link>");
                        }
                    }
                }
            }
            self.out.push_str("</CMP>");
        }
        if let Some(f) = &s.formal {
            self.open(depth + 1, "FMP", &[]);
            self.out.push('>');
            self.formula(depth + 2, f);
            self.close(depth + 1, "FMP");
        }
        for step in &s.steps {
            self.statement(depth + 1, step);
        }
        self.close(depth, name);
    }

    fn formula(&mut self, depth: usize, f: &Formula) {
        match f {
            Formula::Sym(r) => self.empty(depth, "OMS", &[("cd", &r.theory), ("name", &r.name)]),
            Formula::Var(v) => self.empty(depth, "OMV", &[("name", v)]),
            Formula::Int(n) => self.text_element(depth, "OMI", &n.to_string()),
            Formula::Apply { head, args } => {
                self.open(depth, "OMA", &[]);
                self.out.push('>');
                self.formula(depth + 1, head);
                for a in args {
                    self.formula(depth + 1, a);
                }
                self.close(depth, "OMA");
            }
        }
    }
}

/// Canonical serialization: two-space indentation, fixed attribute order,
/// one `<CMP>` per statement, no XML declaration and no trailing newline.
pub fn serialize_document(d: &Document) -> String {
    if d.theories.is_empty() {
        return "<omdoc/>".to_owned();
    }
    let mut w = Writer {
        out: String::from("<omdoc>"),
    };
    for t in &d.theories {
        w.theory(1, t);
    }
    w.close(0, "omdoc");
    w.out
}

/// The OpenMath element tree of a single formula.
pub fn serialize_formula_xml(f: &Formula) -> String {
    let mut w = Writer { out: String::new() };
    w.formula(0, f);
    w.out.trim_start().to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::omdoc::parse_document;

    #[test]
    fn empty_document() {
        assert_eq!(serialize_document(&Document::default()), "<omdoc/>");
    }

    #[test]
    fn canonical_layout() {
        let xml = r#"<omdoc><theory xml:id="t"><imports from="u"/><proof id="p" for="t/a"><CMP>a &lt; b</CMP><FMP><OMA><OMS cd="arith" name="lt"/><OMV name="a"/><OMI>2</OMI></OMA></FMP><assertion id="s"/></proof></theory></omdoc>"#;
        let expected = r#"<omdoc>
  <theory xml:id="t">
    <imports from="u"/>
    <proof id="p" for="t/a">
      <CMP>a &lt; b</CMP>
      <FMP>
        <OMA>
          <OMS cd="arith" name="lt"/>
          <OMV name="a"/>
          <OMI>2</OMI>
        </OMA>
      </FMP>
      <assertion id="s"/>
    </proof>
  </theory>
</omdoc>"#;
        let d = parse_document(xml).unwrap();
        let out = serialize_document(&d);
        assert_eq!(out, expected);
        assert_eq!(parse_document(&out).unwrap(), d);
    }

    #[test]
    fn awkward_text_survives() {
        let xml = "<omdoc><theory xml:id=\"t\"><metadata><dc-title>  \"Q&amp;A\"\r\n</dc-title></metadata><axiom id=\"a\"><CMP>\n  lead <link to=\"t/b\"/>trail\t</CMP></axiom></theory></omdoc>";
        let d = parse_document(xml).unwrap();
        let again = parse_document(&serialize_document(&d)).unwrap();
        assert_eq!(again, d);
    }
}
