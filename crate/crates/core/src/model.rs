//! In-memory model of the supported OMDoc subset: theories, statements,
//! content-markup formulae, notation definitions and metadata.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

/// Returns true if `s` matches `[A-Za-z_][A-Za-z0-9_-]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Page names are either a theory identifier or `<theory>/<statement>`.
pub fn is_page_name(s: &str) -> bool {
    match s.split_once('/') {
        Some((theory, stmt)) => is_identifier(theory) && is_identifier(stmt),
        None => is_identifier(s),
    }
}

/// A reference to a symbol declared in some theory, written `theory#name`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolRef {
    pub theory: String,
    pub name: String,
}

impl SymbolRef {
    pub fn new(theory: impl Into<String>, name: impl Into<String>) -> Self {
        SymbolRef {
            theory: theory.into(),
            name: name.into(),
        }
    }

    pub fn is_valid(&self) -> bool {
        is_identifier(&self.theory) && is_identifier(&self.name)
    }

    /// Graph node standing for this symbol.
    pub fn node_id(&self) -> String {
        format!("{}#{}", self.theory, self.name)
    }

    /// Name of the statement page that would declare this symbol.
    pub fn declaration_page(&self) -> String {
        format!("{}/{}", self.theory, self.name)
    }
}

impl fmt::Display for SymbolRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.theory, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid symbol reference `{0}`")]
pub struct BadSymbolRef(pub String);

impl FromStr for SymbolRef {
    type Err = BadSymbolRef;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (theory, name) = s.split_once('#').ok_or_else(|| BadSymbolRef(s.to_owned()))?;
        let r = SymbolRef::new(theory, name);
        if r.is_valid() {
            Ok(r)
        } else {
            Err(BadSymbolRef(s.to_owned()))
        }
    }
}

impl Serialize for SymbolRef {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SymbolRef {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Content-markup expression tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Sym(SymbolRef),
    Var(String),
    Int(BigInt),
    Apply { head: Box<Formula>, args: Vec<Formula> },
}

impl Formula {
    pub fn sym(theory: &str, name: &str) -> Self {
        Formula::Sym(SymbolRef::new(theory, name))
    }

    pub fn var(name: &str) -> Self {
        Formula::Var(name.to_owned())
    }

    pub fn int(value: impl Into<BigInt>) -> Self {
        Formula::Int(value.into())
    }

    pub fn apply(head: Formula, args: Vec<Formula>) -> Self {
        Formula::Apply {
            head: Box::new(head),
            args,
        }
    }

    /// Every symbol occurring anywhere in the tree.
    pub fn symbols_used(&self) -> BTreeSet<SymbolRef> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<SymbolRef>) {
        match self {
            Formula::Sym(r) => {
                out.insert(r.clone());
            }
            Formula::Var(_) | Formula::Int(_) => {}
            Formula::Apply { head, args } => {
                head.collect_symbols(out);
                for a in args {
                    a.collect_symbols(out);
                }
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Formula::Apply { head, args } => 1 + head.size() + args.iter().map(Formula::size).sum::<usize>(),
            _ => 1,
        }
    }
}

/// Free-standing alias kept for call sites that read better as a function.
pub fn symbols_used(f: &Formula) -> BTreeSet<SymbolRef> {
    f.symbols_used()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StatementKind {
    SymbolDecl,
    Definition,
    Axiom,
    Assertion,
    Proof,
    Example,
    NotationDecl,
}

impl StatementKind {
    pub const ALL: [StatementKind; 7] = [
        StatementKind::SymbolDecl,
        StatementKind::Definition,
        StatementKind::Axiom,
        StatementKind::Assertion,
        StatementKind::Proof,
        StatementKind::Example,
        StatementKind::NotationDecl,
    ];

    /// Ontology class for statements of this kind.
    pub fn class_name(self) -> &'static str {
        match self {
            StatementKind::SymbolDecl => "Symbol",
            StatementKind::Definition => "Definition",
            StatementKind::Axiom => "Axiom",
            StatementKind::Assertion => "Assertion",
            StatementKind::Proof => "Proof",
            StatementKind::Example => "Example",
            StatementKind::NotationDecl => "NotationDefinition",
        }
    }

    /// OMDoc element name.
    pub fn element_name(self) -> &'static str {
        match self {
            StatementKind::SymbolDecl => "symbol",
            StatementKind::Definition => "definition",
            StatementKind::Axiom => "axiom",
            StatementKind::Assertion => "assertion",
            StatementKind::Proof => "proof",
            StatementKind::Example => "example",
            StatementKind::NotationDecl => "notation",
        }
    }

    pub fn from_element_name(name: &str) -> Option<Self> {
        StatementKind::ALL.into_iter().find(|k| k.element_name() == name)
    }

    /// Whether `for_target` must be present.
    pub fn requires_target(self) -> bool {
        matches!(
            self,
            StatementKind::Proof | StatementKind::Definition | StatementKind::NotationDecl
        )
    }

    /// Whether `for_target` may be present at all.
    pub fn allows_target(self) -> bool {
        self.requires_target() || self == StatementKind::Example
    }
}

/// What a statement is "for": a page, or a symbol in the case of notations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Target {
    Page(String),
    Symbol(SymbolRef),
}

impl Target {
    pub fn page(name: &str) -> Self {
        Target::Page(name.to_owned())
    }

    pub fn as_page(&self) -> Option<&str> {
        match self {
            Target::Page(p) => Some(p),
            Target::Symbol(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TextBlock {
    Text(String),
    PageLink { target: String, label: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DublinCore {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub creator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
}

impl DublinCore {
    pub fn is_empty(&self) -> bool {
        self.fields().all(|(_, v)| v.is_none())
    }

    /// `(element-suffix, value)` pairs in canonical order.
    pub fn fields(&self) -> impl Iterator<Item = (&'static str, Option<&str>)> {
        [
            ("title", self.title.as_deref()),
            ("creator", self.creator.as_deref()),
            ("description", self.description.as_deref()),
            ("date", self.date.as_deref()),
        ]
        .into_iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fixity {
    Prefix,
    Infix,
    Postfix,
    Mixfix,
}

impl Fixity {
    pub fn as_str(self) -> &'static str {
        match self {
            Fixity::Prefix => "prefix",
            Fixity::Infix => "infix",
            Fixity::Postfix => "postfix",
            Fixity::Mixfix => "mixfix",
        }
    }
}

impl FromStr for Fixity {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "prefix" => Ok(Fixity::Prefix),
            "infix" => Ok(Fixity::Infix),
            "postfix" => Ok(Fixity::Postfix),
            "mixfix" => Ok(Fixity::Mixfix),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NotationDefinition {
    pub for_symbol: SymbolRef,
    pub fixity: Fixity,
    /// Operator text, or a template with `#1`..`#n` slots for mixfix.
    pub operator: String,
    /// Higher binds tighter.
    pub precedence: i64,
}

/// A piece of a parsed mixfix template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplatePiece {
    Literal(String),
    Slot(usize),
}

/// Splits a mixfix template into literal text and `#k` slots. Returns `None`
/// when a `#` is not followed by a positive decimal index.
pub fn parse_template(template: &str) -> Option<Vec<TemplatePiece>> {
    let mut pieces = Vec::new();
    let mut literal = String::new();
    let mut chars = template.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if c != '#' {
            literal.push(c);
            continue;
        }
        let mut digits = String::new();
        while let Some(&(_, d)) = chars.peek() {
            if d.is_ascii_digit() {
                digits.push(d);
                chars.next();
            } else {
                break;
            }
        }
        let index: usize = digits.parse().ok().filter(|&i| i >= 1)?;
        if !literal.is_empty() {
            pieces.push(TemplatePiece::Literal(std::mem::take(&mut literal)));
        }
        pieces.push(TemplatePiece::Slot(index));
    }
    if !literal.is_empty() {
        pieces.push(TemplatePiece::Literal(literal));
    }
    Some(pieces)
}

impl NotationDefinition {
    /// Slot indices of a mixfix template, in template order.
    pub fn template_slots(&self) -> Option<Vec<usize>> {
        parse_template(&self.operator).map(|pieces| {
            pieces
                .into_iter()
                .filter_map(|p| match p {
                    TemplatePiece::Slot(i) => Some(i),
                    TemplatePiece::Literal(_) => None,
                })
                .collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Statement {
    pub id: String,
    pub kind: StatementKind,
    pub home_theory: String,
    pub for_target: Option<Target>,
    pub informal: Vec<TextBlock>,
    pub formal: Option<Formula>,
    pub steps: Vec<Statement>,
    pub notation: Option<NotationDefinition>,
    pub metadata: DublinCore,
}

impl Statement {
    /// A bare statement with no content; fill in fields as needed.
    pub fn new(id: &str, kind: StatementKind, home_theory: &str) -> Self {
        Statement {
            id: id.to_owned(),
            kind,
            home_theory: home_theory.to_owned(),
            for_target: None,
            informal: Vec::new(),
            formal: None,
            steps: Vec::new(),
            notation: None,
            metadata: DublinCore::default(),
        }
    }

    pub fn notation_decl(id: &str, home_theory: &str, notation: NotationDefinition) -> Self {
        let mut s = Statement::new(id, StatementKind::NotationDecl, home_theory);
        s.for_target = Some(Target::Symbol(notation.for_symbol.clone()));
        s.notation = Some(notation);
        s
    }

    pub fn with_target(mut self, page: &str) -> Self {
        self.for_target = Some(Target::page(page));
        self
    }

    pub fn with_formal(mut self, f: Formula) -> Self {
        self.formal = Some(f);
        self
    }

    pub fn with_steps(mut self, steps: Vec<Statement>) -> Self {
        self.steps = steps;
        self
    }

    /// Proof steps flattened in pre-order: each step is followed by its own steps.
    pub fn substatements(&self) -> Vec<&Statement> {
        let mut out = Vec::new();
        fn walk<'a>(s: &'a Statement, out: &mut Vec<&'a Statement>) {
            for step in &s.steps {
                out.push(step);
                walk(step, out);
            }
        }
        walk(self, &mut out);
        out
    }

    /// Formal content of this statement and all sub-statements, in pre-order.
    pub fn formulas(&self) -> Vec<&Formula> {
        std::iter::once(self)
            .chain(self.substatements())
            .filter_map(|s| s.formal.as_ref())
            .collect()
    }
}

pub fn substatements(s: &Statement) -> Vec<&Statement> {
    s.substatements()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Theory {
    pub id: String,
    pub imports: Vec<String>,
    pub metadata: DublinCore,
    pub statements: Vec<Statement>,
}

impl Theory {
    pub fn new(id: &str) -> Self {
        Theory {
            id: id.to_owned(),
            imports: Vec::new(),
            metadata: DublinCore::default(),
            statements: Vec::new(),
        }
    }
}

/// What a single wiki page holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PageContent {
    /// Theory header only: id, imports and metadata; `statements` is empty.
    Theory(Theory),
    Statement(Statement),
}

impl PageContent {
    pub fn as_statement(&self) -> Option<&Statement> {
        match self {
            PageContent::Statement(s) => Some(s),
            PageContent::Theory(_) => None,
        }
    }

    pub fn as_theory(&self) -> Option<&Theory> {
        match self {
            PageContent::Theory(t) => Some(t),
            PageContent::Statement(_) => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Document {
    pub theories: Vec<Theory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    BadIdentifier,
    MissingTarget,
    UnexpectedTarget,
    WrongTargetKind,
    StepsNotAllowed,
    MissingNotation,
    UnexpectedNotation,
    NotationTargetMismatch,
    BadTemplate,
    EmptyOperator,
    EmptyMetadata,
    EmptyLinkTarget,
    EmptyApplication,
    DuplicateId,
    SelfImport,
    DuplicateImport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Identifier of the offending statement or theory.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.code, self.subject, self.message)
    }
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, code: ViolationCode, subject: &str, message: impl Into<String>) {
        self.out.push(Violation {
            code,
            subject: subject.to_owned(),
            message: message.into(),
        });
    }

    fn metadata(&mut self, subject: &str, dc: &DublinCore) {
        for (field, value) in dc.fields() {
            if value == Some("") {
                self.push(ViolationCode::EmptyMetadata, subject, format!("empty dc-{field}"));
            }
        }
    }

    fn formula(&mut self, subject: &str, f: &Formula) {
        match f {
            Formula::Sym(r) => {
                if !r.is_valid() {
                    self.push(ViolationCode::BadIdentifier, subject, format!("bad symbol reference `{r}`"));
                }
            }
            Formula::Var(v) => {
                if !is_identifier(v) {
                    self.push(ViolationCode::BadIdentifier, subject, format!("bad variable name `{v}`"));
                }
            }
            Formula::Int(_) => {}
            Formula::Apply { head, args } => {
                if args.is_empty() {
                    self.push(ViolationCode::EmptyApplication, subject, "application without arguments");
                }
                self.formula(subject, head);
                for a in args {
                    self.formula(subject, a);
                }
            }
        }
    }

    fn notation(&mut self, subject: &str, n: &NotationDefinition) {
        if !n.for_symbol.is_valid() {
            self.push(
                ViolationCode::BadIdentifier,
                subject,
                format!("bad symbol reference `{}`", n.for_symbol),
            );
        }
        match n.fixity {
            Fixity::Mixfix => match n.template_slots() {
                None => self.push(ViolationCode::BadTemplate, subject, "malformed slot in template"),
                Some(mut slots) => {
                    slots.sort_unstable();
                    let expected: Vec<usize> = (1..=slots.len()).collect();
                    if slots != expected {
                        self.push(
                            ViolationCode::BadTemplate,
                            subject,
                            "template slots must be #1..#n, each exactly once",
                        );
                    }
                }
            },
            Fixity::Infix => {
                if n.operator.is_empty() {
                    self.push(ViolationCode::EmptyOperator, subject, "infix operator is empty");
                }
            }
            Fixity::Prefix | Fixity::Postfix => {}
        }
    }

    fn statement(&mut self, s: &Statement, seen_ids: &mut BTreeSet<String>, is_step: bool) {
        let subject = s.id.as_str();
        if !is_identifier(&s.id) {
            self.push(ViolationCode::BadIdentifier, subject, format!("bad statement id `{}`", s.id));
        }
        if is_step && !seen_ids.insert(s.id.clone()) {
            self.push(ViolationCode::DuplicateId, subject, "step id used twice in one proof");
        }
        if is_step && is_formula_skolem(&s.id) {
            self.push(
                ViolationCode::DuplicateId,
                subject,
                "step ids of the form f<number> are reserved for formulae",
            );
        }
        if !is_identifier(&s.home_theory) {
            self.push(
                ViolationCode::BadIdentifier,
                subject,
                format!("bad home theory `{}`", s.home_theory),
            );
        }
        match (&s.for_target, s.kind) {
            (None, k) if k.requires_target() => {
                self.push(ViolationCode::MissingTarget, subject, format!("{k:?} needs a target"));
            }
            (Some(_), k) if !k.allows_target() => {
                self.push(ViolationCode::UnexpectedTarget, subject, format!("{k:?} takes no target"));
            }
            (Some(Target::Page(p)), StatementKind::NotationDecl) => {
                self.push(
                    ViolationCode::WrongTargetKind,
                    subject,
                    format!("notation target must be a symbol, got page `{p}`"),
                );
            }
            (Some(Target::Symbol(r)), k) if k != StatementKind::NotationDecl => {
                self.push(
                    ViolationCode::WrongTargetKind,
                    subject,
                    format!("{k:?} target must be a page, got symbol `{r}`"),
                );
            }
            (Some(Target::Page(p)), _) if !is_page_name(p) => {
                self.push(ViolationCode::BadIdentifier, subject, format!("bad target page `{p}`"));
            }
            _ => {}
        }
        if !s.steps.is_empty() && s.kind != StatementKind::Proof {
            self.push(ViolationCode::StepsNotAllowed, subject, "only proofs have steps");
        }
        match (&s.notation, s.kind) {
            (None, StatementKind::NotationDecl) => {
                self.push(ViolationCode::MissingNotation, subject, "notation declaration without notation");
            }
            (Some(n), StatementKind::NotationDecl) => {
                self.notation(subject, n);
                if let Some(Target::Symbol(r)) = &s.for_target {
                    if *r != n.for_symbol {
                        self.push(
                            ViolationCode::NotationTargetMismatch,
                            subject,
                            "notation symbol differs from statement target",
                        );
                    }
                }
            }
            (Some(_), k) => {
                self.push(ViolationCode::UnexpectedNotation, subject, format!("{k:?} cannot carry a notation"));
            }
            (None, _) => {}
        }
        for block in &s.informal {
            if let TextBlock::PageLink { target, .. } = block {
                if target.is_empty() {
                    self.push(ViolationCode::EmptyLinkTarget, subject, "link without target");
                }
            }
        }
        if let Some(f) = &s.formal {
            self.formula(subject, f);
        }
        self.metadata(subject, &s.metadata);
        for step in &s.steps {
            self.statement(step, seen_ids, true);
        }
    }
}

/// Ids `f1`, `f2`, ... name formula nodes in the triple graph.
pub fn is_formula_skolem(id: &str) -> bool {
    id.strip_prefix('f')
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// Every invariant violation of `s` and its steps; empty iff valid.
pub fn validate_statement(s: &Statement) -> Vec<Violation> {
    let mut c = Checker { out: Vec::new() };
    c.statement(s, &mut BTreeSet::new(), false);
    c.out
}

/// Theory-level invariants plus those of every contained statement.
pub fn validate_theory(t: &Theory) -> Vec<Violation> {
    let mut c = Checker { out: Vec::new() };
    if !is_identifier(&t.id) {
        c.push(ViolationCode::BadIdentifier, &t.id, format!("bad theory id `{}`", t.id));
    }
    let mut seen = BTreeSet::new();
    for imp in &t.imports {
        if imp == &t.id {
            c.push(ViolationCode::SelfImport, &t.id, "theory imports itself");
        } else if !seen.insert(imp) {
            c.push(ViolationCode::DuplicateImport, &t.id, format!("`{imp}` imported twice"));
        }
        if !is_identifier(imp) {
            c.push(ViolationCode::BadIdentifier, &t.id, format!("bad import `{imp}`"));
        }
    }
    c.metadata(&t.id, &t.metadata);
    let mut ids = BTreeSet::new();
    for s in &t.statements {
        if !ids.insert(&s.id) {
            c.push(ViolationCode::DuplicateId, &s.id, "statement id used twice in theory");
        }
        if s.home_theory != t.id {
            c.push(
                ViolationCode::BadIdentifier,
                &s.id,
                format!("home theory `{}` differs from enclosing theory", s.home_theory),
            );
        }
        c.statement(s, &mut BTreeSet::new(), false);
    }
    c.out
}

pub fn validate_document(d: &Document) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for t in &d.theories {
        if !ids.insert(&t.id) {
            out.push(Violation {
                code: ViolationCode::DuplicateId,
                subject: t.id.clone(),
                message: "theory id used twice in document".into(),
            });
        }
        out.extend(validate_theory(t));
    }
    out
}
