//! Pages, revisions and the save pipeline.
//!
//! Every page holds one theory header or one top-level statement. A save
//! parses and validates the source, checks the base revision, appends a
//! revision, re-extracts the page's triples and recomputes the inferred
//! closure. When the page's notation definitions change, the pages whose
//! formulae use the affected symbols (and their containers) are reported and
//! their cached renderings are dropped.
//!
//! Deletion appends a tombstone revision with an empty source.

pub mod persist;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::extract::extract;
use crate::model::{
    is_page_name, Document, NotationDefinition, PageContent, Statement, StatementKind, SymbolRef, Target, Theory,
};
use crate::omdoc::{parse_document, serialize_document, ParseError};
use crate::ontology::{builtin_schema, class, entail, prop, OntologySchema, TYPE};
use crate::render::{render, serialize_layout, render_plain, DeclarationLookup, NotationTable, PresentationNode, Warning};
use crate::store::{Binding, QueryError, QueryPattern, Term, Triple, TriplePattern, TripleStore};

use persist::{PageMeta, Storage};

pub type RevisionId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PageKind {
    TheoryPage,
    StatementPage,
}

impl PageKind {
    fn of(content: &PageContent) -> Self {
        match content {
            PageContent::Theory(_) => PageKind::TheoryPage,
            PageContent::Statement(_) => PageKind::StatementPage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSummary {
    pub name: String,
    pub kind: PageKind,
    pub head_revision: RevisionId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSource {
    pub source: String,
    pub head_revision: RevisionId,
    pub kind: PageKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionMeta {
    pub id: RevisionId,
    pub parent: Option<RevisionId>,
    pub author: String,
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub deleted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Revision {
    pub meta: RevisionMeta,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaveReceipt {
    pub new_revision: RevisionId,
    pub invalidated: BTreeSet<String>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Links {
    pub extracted: Vec<Triple>,
    pub inferred: Vec<Triple>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WorkQueue {
    pub unproven: Vec<String>,
    pub undefined_symbols: Vec<String>,
    pub missing_notations: Vec<SymbolRef>,
    pub dangling_refs: Vec<(String, String)>,
}

impl WorkQueue {
    pub fn is_empty(&self) -> bool {
        self.unproven.is_empty()
            && self.undefined_symbols.is_empty()
            && self.missing_notations.is_empty()
            && self.dangling_refs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedFormula {
    /// Formula node id, `page#f<k>`.
    pub node: String,
    pub layout: PresentationNode,
}

/// All formulae of a page, rendered with the current notation table. A
/// theory page shows the formulae of the statements it contains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPage {
    pub page: String,
    pub revision: RevisionId,
    pub formulas: Vec<RenderedFormula>,
    pub warnings: Vec<Warning>,
}

fn escape_attr(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('"', "&quot;")
}

impl RenderedPage {
    pub fn layout_xml(&self) -> String {
        if self.formulas.is_empty() {
            return format!("<m:page name=\"{}\"/>", escape_attr(&self.page));
        }
        let mut out = format!("<m:page name=\"{}\">", escape_attr(&self.page));
        for f in &self.formulas {
            out.push_str(&format!("<m:math node=\"{}\">", escape_attr(&f.node)));
            out.push_str(&serialize_layout(&f.layout));
            out.push_str("</m:math>");
        }
        out.push_str("</m:page>");
        out
    }

    /// One line per formula.
    pub fn plain(&self) -> String {
        self.formulas
            .iter()
            .map(|f| render_plain(&f.layout))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WikiError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("page {page}: {message}")]
    BadPage { page: String, message: String },
    #[error("conflict on {page}: head revision is {head:?}")]
    Conflict { page: String, head: Option<RevisionId> },
    #[error("import cycle: {}", cycle.join(" -> "))]
    CyclicImport { cycle: Vec<String> },
    #[error("page {page} already exists")]
    NameCollision { page: String },
    #[error("unknown page {page}")]
    UnknownPage { page: String },
    #[error("query: {0}")]
    Query(#[from] QueryError),
    #[error("storage: {0}")]
    Storage(String),
}

impl From<std::io::Error> for WikiError {
    fn from(e: std::io::Error) -> Self {
        WikiError::Storage(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, WikiError>;

#[derive(Debug, Clone)]
struct PageRecord {
    kind: PageKind,
    revisions: Vec<Revision>,
    /// Parsed head; `None` once deleted.
    content: Option<PageContent>,
    created_seq: u64,
    saved_seq: u64,
}

impl PageRecord {
    fn head(&self) -> RevisionId {
        self.revisions.len() as RevisionId
    }

    fn live(&self) -> Option<&PageContent> {
        self.content.as_ref()
    }
}

#[derive(Debug, Clone)]
struct CacheEntry {
    revision: RevisionId,
    notation_version: u64,
    rendered: Arc<RenderedPage>,
}

/// The page an arbitrary node belongs to: skolem ids `page#x` map to `page`.
pub fn owner_page(node: &str) -> &str {
    node.split_once('#').map_or(node, |(p, _)| p)
}

/// Name a page with this content must have.
pub fn canonical_page_name(content: &PageContent) -> String {
    match content {
        PageContent::Theory(t) => t.id.clone(),
        PageContent::Statement(s) => format!("{}/{}", s.home_theory, s.id),
    }
}

/// Wraps page content in a one-theory document.
pub fn page_document(content: &PageContent) -> Document {
    let theory = match content {
        PageContent::Theory(t) => Theory {
            statements: Vec::new(),
            ..t.clone()
        },
        PageContent::Statement(s) => {
            let mut t = Theory::new(&s.home_theory);
            t.statements.push(s.clone());
            t
        }
    };
    Document { theories: vec![theory] }
}

pub fn canonical_source(content: &PageContent) -> String {
    serialize_document(&page_document(content))
}

/// Parses a page source: a document with one theory that has either no
/// statements (a theory page) or exactly one statement and no header
/// (a statement page). The content must match `name`.
pub fn parse_page(name: &str, source: &str) -> Result<PageContent> {
    let bad = |message: String| WikiError::BadPage {
        page: name.to_owned(),
        message,
    };
    if !is_page_name(name) {
        return Err(bad("not a valid page name".into()));
    }
    let mut doc = parse_document(source)?;
    if doc.theories.len() != 1 {
        return Err(bad(format!("expected one theory, found {}", doc.theories.len())));
    }
    let mut theory = doc.theories.pop().expect("one theory");
    let content = match theory.statements.len() {
        0 => PageContent::Theory(theory),
        1 if theory.imports.is_empty() && theory.metadata.is_empty() => {
            PageContent::Statement(theory.statements.pop().expect("one statement"))
        }
        1 => return Err(bad("a statement page cannot carry theory imports or metadata".into())),
        n => return Err(bad(format!("a page holds one statement, found {n}"))),
    };
    let expected = canonical_page_name(&content);
    if expected != name {
        return Err(bad(format!("content belongs on page {expected}")));
    }
    Ok(content)
}

fn page_notations(content: Option<&PageContent>) -> BTreeMap<SymbolRef, NotationDefinition> {
    let mut out = BTreeMap::new();
    if let Some(PageContent::Statement(s)) = content {
        for sub in std::iter::once(s).chain(s.substatements()) {
            if let Some(n) = &sub.notation {
                out.insert(n.for_symbol.clone(), n.clone());
            }
        }
    }
    out
}

fn declared_symbol(content: Option<&PageContent>) -> Option<SymbolRef> {
    match content {
        Some(PageContent::Statement(s)) if s.kind == StatementKind::SymbolDecl => {
            Some(SymbolRef::new(&s.home_theory, &s.id))
        }
        _ => None,
    }
}

/// Symbols whose notation differs between two versions of a page.
fn notation_changes(old: Option<&PageContent>, new: Option<&PageContent>) -> BTreeSet<SymbolRef> {
    let (a, b) = (page_notations(old), page_notations(new));
    a.keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .cloned()
        .collect()
}

/// Finds a cycle in a directed graph, returned as a closed path.
pub fn find_cycle(graph: &BTreeMap<String, Vec<String>>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(
        node: &'a str,
        graph: &'a BTreeMap<String, Vec<String>>,
        marks: &mut HashMap<&'a str, Mark>,
        path: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        match marks.get(node) {
            Some(Mark::Done) => return None,
            Some(Mark::Active) => {
                let start = path.iter().position(|n| *n == node).expect("active node on path");
                let mut cycle: Vec<String> = path[start..].iter().map(|s| (*s).to_owned()).collect();
                cycle.push(node.to_owned());
                return Some(cycle);
            }
            None => {}
        }
        marks.insert(node, Mark::Active);
        path.push(node);
        for next in graph.get(node).into_iter().flatten() {
            if let Some(c) = visit(next, graph, marks, path) {
                return Some(c);
            }
        }
        path.pop();
        marks.insert(node, Mark::Done);
        None
    }
    let mut marks = HashMap::new();
    let mut path = Vec::new();
    graph.keys().find_map(|k| visit(k, graph, &mut marks, &mut path))
}

struct Declarations<'a>(&'a BTreeMap<String, PageRecord>);

impl DeclarationLookup for Declarations<'_> {
    fn declaration_page(&self, symbol: &SymbolRef) -> Option<String> {
        let page = symbol.declaration_page();
        let rec = self.0.get(&page)?;
        (declared_symbol(rec.live()).as_ref() == Some(symbol)).then_some(page)
    }
}

pub struct Wiki {
    pages: BTreeMap<String, PageRecord>,
    store: TripleStore,
    schema: OntologySchema,
    seq: u64,
    notations: NotationTable,
    notation_warnings: Vec<Warning>,
    notation_version: u64,
    cache: Mutex<HashMap<String, CacheEntry>>,
    storage: Option<Storage>,
}

impl Default for Wiki {
    fn default() -> Self {
        Wiki::new()
    }
}

impl std::fmt::Debug for Wiki {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Wiki")
            .field("pages", &self.pages.len())
            .field("triples", &self.store.len())
            .finish()
    }
}

impl Wiki {
    /// An empty wiki kept in memory only.
    pub fn new() -> Self {
        Wiki {
            pages: BTreeMap::new(),
            store: TripleStore::new(),
            schema: builtin_schema(),
            seq: 0,
            notations: NotationTable::new(),
            notation_warnings: Vec::new(),
            notation_version: 0,
            cache: Mutex::new(HashMap::new()),
            storage: None,
        }
    }

    /// Opens (or creates) a wiki persisted under `dir` and rebuilds the
    /// triple store from the stored head revisions.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let storage = Storage::open(dir.as_ref())?;
        let mut wiki = Wiki::new();
        for stored in storage.load()? {
            let name = stored.meta.name.clone();
            let head = stored.revisions.last().expect("non-empty history");
            let content = if head.meta.deleted {
                None
            } else {
                Some(parse_page(&name, &head.source)?)
            };
            wiki.seq = wiki.seq.max(stored.meta.saved_seq).max(stored.meta.created_seq);
            wiki.pages.insert(
                name,
                PageRecord {
                    kind: stored.meta.kind,
                    revisions: stored.revisions,
                    content,
                    created_seq: stored.meta.created_seq,
                    saved_seq: stored.meta.saved_seq,
                },
            );
        }
        wiki.store = wiki.rebuild_store();
        wiki.refresh_notations();
        wiki.storage = Some(storage);
        Ok(wiki)
    }

    pub fn store(&self) -> &TripleStore {
        &self.store
    }

    pub fn schema(&self) -> &OntologySchema {
        &self.schema
    }

    pub fn notation_table(&self) -> &NotationTable {
        &self.notations
    }

    pub fn notation_version(&self) -> u64 {
        self.notation_version
    }

    pub fn exists(&self, name: &str) -> bool {
        self.pages.get(name).is_some_and(|r| r.content.is_some())
    }

    pub fn content(&self, name: &str) -> Option<&PageContent> {
        self.pages.get(name).and_then(PageRecord::live)
    }

    fn live_record(&self, name: &str) -> Result<&PageRecord> {
        self.pages
            .get(name)
            .filter(|r| r.content.is_some())
            .ok_or_else(|| WikiError::UnknownPage { page: name.to_owned() })
    }

    /// Live pages in name order.
    pub fn list_pages(&self) -> Vec<PageSummary> {
        self.pages
            .iter()
            .filter(|(_, r)| r.content.is_some())
            .map(|(name, r)| PageSummary {
                name: name.clone(),
                kind: r.kind,
                head_revision: r.head(),
            })
            .collect()
    }

    pub fn page(&self, name: &str) -> Result<PageSource> {
        let rec = self.live_record(name)?;
        Ok(PageSource {
            source: rec.revisions.last().expect("non-empty history").source.clone(),
            head_revision: rec.head(),
            kind: rec.kind,
        })
    }

    /// Revision metadata, oldest first. Deleted pages keep their history.
    pub fn history(&self, name: &str) -> Result<Vec<RevisionMeta>> {
        let rec = self
            .pages
            .get(name)
            .ok_or_else(|| WikiError::UnknownPage { page: name.to_owned() })?;
        Ok(rec.revisions.iter().map(|r| r.meta.clone()).collect())
    }

    pub fn revision_source(&self, name: &str, id: RevisionId) -> Result<&str> {
        self.pages
            .get(name)
            .and_then(|r| r.revisions.get((id as usize).checked_sub(1)?))
            .map(|r| r.source.as_str())
            .ok_or_else(|| WikiError::UnknownPage { page: format!("{name}@{id}") })
    }

    /// Head revision of a page, including deleted pages.
    pub fn head_revision(&self, name: &str) -> Option<RevisionId> {
        self.pages.get(name).map(PageRecord::head)
    }

    fn check_base(&self, name: &str, base: Option<RevisionId>) -> Result<()> {
        let head = self.head_revision(name);
        if head == base {
            Ok(())
        } else {
            Err(WikiError::Conflict {
                page: name.to_owned(),
                head,
            })
        }
    }

    fn import_graph(&self) -> BTreeMap<String, Vec<String>> {
        self.pages
            .iter()
            .filter_map(|(name, r)| match r.live() {
                Some(PageContent::Theory(t)) => Some((name.clone(), t.imports.clone())),
                _ => None,
            })
            .collect()
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    /// Appends a revision; `content = None` writes a tombstone.
    fn append_revision(&mut self, name: &str, content: Option<PageContent>, author: &str) -> Result<RevisionId> {
        let seq = self.next_seq();
        let source = content.as_ref().map(canonical_source).unwrap_or_default();
        let rec = self.pages.entry(name.to_owned()).or_insert_with(|| PageRecord {
            kind: content.as_ref().map_or(PageKind::StatementPage, PageKind::of),
            revisions: Vec::new(),
            content: None,
            created_seq: seq,
            saved_seq: seq,
        });
        if rec.content.is_none() {
            // New or resurrected pages sort after everything already present.
            rec.created_seq = seq;
        }
        rec.saved_seq = seq;
        if let Some(c) = &content {
            rec.kind = PageKind::of(c);
        }
        let id = rec.head() + 1;
        let revision = Revision {
            meta: RevisionMeta {
                id,
                parent: (id > 1).then(|| id - 1),
                author: author.to_owned(),
                timestamp: Utc::now(),
                deleted: content.is_none(),
            },
            source,
        };
        rec.content = content;
        if let Some(storage) = &self.storage {
            storage.write_revision(name, &revision)?;
            storage.write_page_meta(&PageMeta {
                name: name.to_owned(),
                kind: rec.kind,
                created_seq: rec.created_seq,
                saved_seq: rec.saved_seq,
            })?;
        }
        rec.revisions.push(revision);
        Ok(id)
    }

    fn reentail(&mut self) {
        self.store.clear_inferred();
        let extracted: Vec<Triple> = self.store.iter().collect();
        for t in entail(&extracted, &self.schema) {
            self.store.insert(t);
        }
    }

    fn refresh_notations(&mut self) {
        let mut live: Vec<(&u64, &PageContent)> = self
            .pages
            .values()
            .filter_map(|r| r.live().map(|c| (&r.saved_seq, c)))
            .collect();
        live.sort_by_key(|(seq, _)| **seq);
        let defs = live
            .into_iter()
            .flat_map(|(_, c)| page_notations(Some(c)).into_values());
        let (table, warnings) = NotationTable::from_definitions(defs);
        self.notations = table;
        self.notation_warnings = warnings;
    }

    /// Extraction and entailment from head contents alone, ignoring the
    /// maintained store.
    pub fn rebuild_store(&self) -> TripleStore {
        let mut store = TripleStore::new();
        for (name, rec) in &self.pages {
            if let Some(c) = rec.live() {
                for t in extract(name, c) {
                    store.insert(t);
                }
            }
        }
        let extracted: Vec<Triple> = store.iter().collect();
        for t in entail(&extracted, &self.schema) {
            store.insert(t);
        }
        store
    }

    /// Saves `source` as the new head of `name`. New pages take no base;
    /// existing (including deleted) pages need `base` equal to their head.
    pub fn save_page(
        &mut self,
        name: &str,
        source: &str,
        base: Option<RevisionId>,
        author: &str,
    ) -> Result<SaveReceipt> {
        let content = parse_page(name, source)?;
        self.check_base(name, base)?;
        if let PageContent::Theory(t) = &content {
            let mut graph = self.import_graph();
            graph.insert(name.to_owned(), t.imports.clone());
            if let Some(cycle) = find_cycle(&graph) {
                return Err(WikiError::CyclicImport { cycle });
            }
        }
        self.commit(name, Some(content), author)
    }

    /// Deletes a page by appending a tombstone revision.
    pub fn delete_page(&mut self, name: &str, base: Option<RevisionId>, author: &str) -> Result<SaveReceipt> {
        self.live_record(name)?;
        self.check_base(name, base)?;
        self.commit(name, None, author)
    }

    fn commit(&mut self, name: &str, content: Option<PageContent>, author: &str) -> Result<SaveReceipt> {
        let old = self.content(name).cloned();
        let changed = notation_changes(old.as_ref(), content.as_ref());
        let mut decl_changed = BTreeSet::new();
        let (old_decl, new_decl) = (declared_symbol(old.as_ref()), declared_symbol(content.as_ref()));
        if old_decl != new_decl {
            decl_changed.extend(old_decl);
            decl_changed.extend(new_decl);
        }
        // Pages that showed the old state of this page's formulae or links.
        let mut stale = self.invalidation_set(&changed);
        stale.extend(self.invalidation_set(&decl_changed));
        stale.extend(old.iter().map(canonical_page_name));

        let new_revision = self.append_revision(name, content.clone(), author)?;
        self.store.retract_page(name);
        if let Some(c) = &content {
            for t in extract(name, c) {
                self.store.insert(t);
            }
        }
        self.reentail();
        if !changed.is_empty() {
            self.refresh_notations();
        }

        let mut invalidated = self.invalidation_set(&changed);
        stale.extend(invalidated.iter().cloned());
        stale.extend(self.invalidation_set(&decl_changed));
        stale.insert(name.to_owned());
        if let Some(PageContent::Statement(s)) = content.as_ref().or(old.as_ref()) {
            stale.insert(s.home_theory.clone());
        }
        self.drop_cached(&stale, !changed.is_empty());
        invalidated.remove(name);

        let mut warnings = Vec::new();
        if content.is_some() {
            warnings.extend(self.render_page(name)?.warnings.iter().cloned());
            let mine = page_notations(content.as_ref());
            for w in &self.notation_warnings {
                if w.symbol.as_ref().is_some_and(|s| mine.contains_key(s)) && !warnings.contains(w) {
                    warnings.push(w.clone());
                }
            }
        }
        Ok(SaveReceipt {
            new_revision,
            invalidated,
            warnings,
        })
    }

    /// Removes cache entries for `pages`. When the notation table changed,
    /// the version moves on and surviving entries are carried over to it.
    fn drop_cached(&mut self, pages: &BTreeSet<String>, notation_changed: bool) {
        if notation_changed {
            self.notation_version += 1;
        }
        let version = self.notation_version;
        let cache = self.cache.get_mut().expect("render cache lock");
        cache.retain(|page, _| !pages.contains(page));
        for entry in cache.values_mut() {
            entry.notation_version = version;
        }
    }

    /// Whether a current rendering of `name` is cached.
    pub fn is_cached(&self, name: &str) -> bool {
        let head = self.head_revision(name);
        let cache = self.cache.lock().expect("render cache lock");
        cache
            .get(name)
            .is_some_and(|e| Some(e.revision) == head && e.notation_version == self.notation_version)
    }

    /// Pages that must be re-rendered after the notations of `changed`
    /// change: owners of formulae using them, plus everything that
    /// (transitively) contains such a page.
    pub fn invalidation_set(&self, changed: &BTreeSet<SymbolRef>) -> BTreeSet<String> {
        let mut direct = BTreeSet::new();
        for s in changed {
            for t in self.store.matching(None, Some(prop::USES), Some(&s.node_id())) {
                let owner = owner_page(&t.subject);
                if self.exists(owner) {
                    direct.insert(owner.to_owned());
                }
            }
        }
        let mut out = direct.clone();
        for d in &direct {
            for t in self.store.matching(None, Some(prop::CONTAINS), Some(d)) {
                if self.exists(&t.subject) {
                    out.insert(t.subject);
                }
            }
        }
        out
    }

    /// Imports a document, one page per theory and per top-level statement.
    /// Nothing is changed unless every page can be created.
    pub fn import_document(&mut self, xml: &str, author: &str) -> Result<Vec<String>> {
        let doc = parse_document(xml)?;
        let mut planned: Vec<(String, PageContent)> = Vec::new();
        for t in &doc.theories {
            let header = Theory {
                statements: Vec::new(),
                ..t.clone()
            };
            planned.push((t.id.clone(), PageContent::Theory(header)));
            for s in &t.statements {
                planned.push((format!("{}/{}", t.id, s.id), PageContent::Statement(s.clone())));
            }
        }
        let mut seen = BTreeSet::new();
        for (name, _) in &planned {
            if self.exists(name) || !seen.insert(name.as_str()) {
                return Err(WikiError::NameCollision { page: name.clone() });
            }
        }
        let mut graph = self.import_graph();
        for t in &doc.theories {
            graph.insert(t.id.clone(), t.imports.clone());
        }
        if let Some(cycle) = find_cycle(&graph) {
            return Err(WikiError::CyclicImport { cycle });
        }

        let mut names = Vec::with_capacity(planned.len());
        for (name, content) in planned {
            let triples = extract(&name, &content);
            self.append_revision(&name, Some(content), author)?;
            self.store.retract_page(&name);
            for t in triples {
                self.store.insert(t);
            }
            names.push(name);
        }
        self.reentail();
        self.refresh_notations();
        self.notation_version += 1;
        self.cache.get_mut().expect("render cache lock").clear();
        Ok(names)
    }

    /// Statement pages whose home is `theory`, in creation order.
    fn statements_of(&self, theory: &str) -> Vec<&Statement> {
        let mut pages: Vec<(&u64, &Statement)> = self
            .store
            .matching(Some(theory), Some(prop::HOME_THEORY_OF), None)
            .into_iter()
            .filter_map(|t| {
                let rec = self.pages.get(&t.object)?;
                Some((&rec.created_seq, rec.live()?.as_statement()?))
            })
            .filter(|(_, s)| s.home_theory == theory)
            .collect();
        pages.sort_by_key(|(seq, _)| **seq);
        pages.dedup_by_key(|(seq, _)| **seq);
        pages.into_iter().map(|(_, s)| s).collect()
    }

    /// Reassembles a theory and its statements into one document. With
    /// `closure`, every theory it depends on is included, imports first.
    pub fn export_theory(&self, theory: &str, closure: bool) -> Result<String> {
        let unknown = || WikiError::UnknownPage { page: theory.to_owned() };
        self.live_record(theory)?.live().and_then(PageContent::as_theory).ok_or_else(unknown)?;
        let mut order = Vec::new();
        if closure {
            let mut visited = BTreeSet::new();
            self.post_order(theory, &mut visited, &mut order);
        } else {
            order.push(theory.to_owned());
        }
        let theories = order
            .iter()
            .filter_map(|name| {
                let t = self.content(name)?.as_theory()?;
                Some(Theory {
                    statements: self.statements_of(name).into_iter().cloned().collect(),
                    ..t.clone()
                })
            })
            .collect();
        Ok(serialize_document(&Document { theories }))
    }

    fn post_order(&self, theory: &str, visited: &mut BTreeSet<String>, out: &mut Vec<String>) {
        if !visited.insert(theory.to_owned()) {
            return;
        }
        let Some(t) = self.content(theory).and_then(PageContent::as_theory) else {
            return;
        };
        for imp in &t.imports {
            self.post_order(imp, visited, out);
        }
        out.push(theory.to_owned());
    }

    /// Triples about a page: those mentioning it, or for statement pages
    /// also its skolem children, as subject or object.
    pub fn links_for(&self, name: &str) -> Result<Links> {
        let rec = self.live_record(name)?;
        let prefix = format!("{name}#");
        let touches = |node: &str| {
            node == name || (rec.kind == PageKind::StatementPage && node.starts_with(&prefix))
        };
        let mut links = Links::default();
        for t in self.store.iter() {
            if touches(&t.subject) || touches(&t.object) {
                if t.provenance.is_inferred() {
                    links.inferred.push(t);
                } else {
                    links.extracted.push(t);
                }
            }
        }
        Ok(links)
    }

    pub fn query(&self, q: &QueryPattern) -> Result<Vec<Binding>> {
        Ok(self.store.query(q)?)
    }

    pub fn reachable(&self, start: &str, predicate: &str) -> BTreeSet<String> {
        self.store.reachable(start, predicate)
    }

    fn unmatched(&self, positive: TriplePattern, negative: TriplePattern, var: &str) -> BTreeSet<String> {
        let q = QueryPattern::new(vec![positive], vec![negative]);
        self.store
            .query(&q)
            .expect("built-in work queue query is safe")
            .into_iter()
            .filter_map(|mut b| b.remove(var))
            .collect()
    }

    /// Where work needs to be done.
    pub fn work_queue(&self) -> WorkQueue {
        let pattern = |s: &str, p: &str, o: &str| TriplePattern {
            subject: s.parse::<Term>().expect("term"),
            predicate: p.to_owned(),
            object: o.parse::<Term>().expect("term"),
        };
        let unproven = self
            .unmatched(pattern("?t", TYPE, class::ASSERTION), pattern("?p", prop::PROVES, "?t"), "t")
            .into_iter()
            .filter(|n| self.exists(n))
            .collect();
        let undefined_symbols = self
            .unmatched(pattern("?s", TYPE, class::SYMBOL), pattern("?d", prop::DEFINES, "?s"), "s")
            .into_iter()
            .filter(|n| self.exists(n))
            .collect();
        let missing_notations = self
            .unmatched(pattern("?f", prop::USES, "?s"), pattern("?n", prop::RENDERS, "?s"), "s")
            .into_iter()
            .filter_map(|s| s.parse::<SymbolRef>().ok())
            .collect();
        let mut dangling_refs = Vec::new();
        for (name, rec) in &self.pages {
            let targets: Vec<&str> = match rec.live() {
                None => continue,
                Some(PageContent::Theory(t)) => t.imports.iter().map(String::as_str).collect(),
                Some(PageContent::Statement(s)) => std::iter::once(s)
                    .chain(s.substatements())
                    .filter_map(|sub| match &sub.for_target {
                        Some(Target::Page(p)) => Some(p.as_str()),
                        _ => None,
                    })
                    .collect(),
            };
            let mut seen = BTreeSet::new();
            for t in targets {
                if !self.exists(t) && seen.insert(t) {
                    dangling_refs.push((name.clone(), t.to_owned()));
                }
            }
        }
        WorkQueue {
            unproven,
            undefined_symbols,
            missing_notations,
            dangling_refs,
        }
    }

    fn render_fresh(&self, name: &str) -> Result<RenderedPage> {
        let rec = self.live_record(name)?;
        let decls = Declarations(&self.pages);
        let mut formulas = Vec::new();
        let mut warnings: Vec<Warning> = Vec::new();
        let mut add = |page: &str, s: &Statement| {
            for (k, f) in s.formulas().into_iter().enumerate() {
                let (layout, ws) = render(f, &self.notations, &decls);
                for w in ws {
                    if !warnings.contains(&w) {
                        warnings.push(w);
                    }
                }
                formulas.push(RenderedFormula {
                    node: format!("{page}#f{}", k + 1),
                    layout,
                });
            }
        };
        match rec.live().expect("live record") {
            PageContent::Statement(s) => add(name, s),
            PageContent::Theory(_) => {
                for s in self.statements_of(name) {
                    add(&format!("{}/{}", s.home_theory, s.id), s);
                }
            }
        }
        Ok(RenderedPage {
            page: name.to_owned(),
            revision: rec.head(),
            formulas,
            warnings,
        })
    }

    /// Renders a page, reusing the cached result while both the page revision
    /// and the notation table version are unchanged.
    pub fn render_page(&self, name: &str) -> Result<Arc<RenderedPage>> {
        let head = self.live_record(name)?.head();
        {
            let cache = self.cache.lock().expect("render cache lock");
            if let Some(e) = cache.get(name) {
                if e.revision == head && e.notation_version == self.notation_version {
                    return Ok(Arc::clone(&e.rendered));
                }
            }
        }
        let rendered = Arc::new(self.render_fresh(name)?);
        self.cache.lock().expect("render cache lock").insert(
            name.to_owned(),
            CacheEntry {
                revision: head,
                notation_version: self.notation_version,
                rendered: Arc::clone(&rendered),
            },
        );
        Ok(rendered)
    }

    /// Renders without consulting or filling the cache.
    pub fn render_uncached(&self, name: &str) -> Result<RenderedPage> {
        self.render_fresh(name)
    }
}
