//! `mathwiki`: batch access to a wiki data directory.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data errors.
//! Results go to stdout; diagnostics go to stderr.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mathwiki_core::model::validate_document;
use mathwiki_core::omdoc::parse_document;
use mathwiki_core::store::{QueryPattern, TriplePattern};
use mathwiki_core::wiki::{find_cycle, Wiki, WikiError, WorkQueue};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "mathwiki", version, about = "Semantic wiki for mathematical documents")]
struct Cli {
    /// Wiki data directory.
    #[arg(long, global = true, env = "WIKI_DATA")]
    data_dir: Option<PathBuf>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a document into pages and add them to the wiki.
    Import { file: PathBuf },
    /// Reassemble a theory into one document.
    Export {
        theory: String,
        /// Also include every theory it depends on, imports first.
        #[arg(long)]
        closure: bool,
    },
    /// Render the formulas of a page.
    Render {
        page: String,
        /// Plain text instead of layout XML.
        #[arg(long)]
        plain: bool,
    },
    /// Check a document without touching any wiki.
    Validate { file: PathBuf },
    /// List open work: unproven assertions, undefined symbols, missing
    /// notations and dangling references.
    Tasks,
    /// Match triple patterns such as `?t type Assertion`.
    Query {
        #[arg(long = "pattern", required = true)]
        patterns: Vec<String>,
        #[arg(long = "not")]
        negations: Vec<String>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "WIKI_PORT", default_value_t = mathwiki_service::DEFAULT_PORT)]
        port: u16,
    },
}

enum Failure {
    Usage(String),
    Data { message: String, detail: Value },
}

impl Failure {
    fn data(message: impl Display) -> Self {
        Failure::Data { message: message.to_string(), detail: Value::Null }
    }
}

impl From<WikiError> for Failure {
    fn from(e: WikiError) -> Self {
        let detail = match &e {
            WikiError::Parse(p) => json!({ "line": p.line, "column": p.column, "code": p.code }),
            WikiError::Conflict { head, .. } => json!({ "head_revision": head }),
            WikiError::CyclicImport { cycle } => json!({ "cycle": cycle }),
            WikiError::BadPage { page, .. } | WikiError::NameCollision { page } | WikiError::UnknownPage { page } => {
                json!({ "page": page })
            }
            WikiError::Query(_) => return Failure::Usage(e.to_string()),
            WikiError::Storage(_) => Value::Null,
        };
        Failure::Data { message: e.to_string(), detail }
    }
}

type Outcome = Result<(), Failure>;

struct Ctx {
    data_dir: Option<PathBuf>,
    json: bool,
}

impl Ctx {
    fn wiki(&self) -> Result<Wiki, Failure> {
        let dir = self
            .data_dir
            .as_ref()
            .ok_or_else(|| Failure::Usage("--data-dir (or WIKI_DATA) is required".into()))?;
        Ok(Wiki::open(dir)?)
    }

    fn emit(&self, value: Value, text: impl FnOnce() -> String) {
        if self.json {
            println!("{}", serde_json::to_string_pretty(&value).expect("json value"));
        } else {
            let text = text();
            if !text.is_empty() {
                println!("{text}");
            }
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn import(ctx: &Ctx, file: &Path) -> Outcome {
    let xml = read_file(file)?;
    let mut wiki = ctx.wiki()?;
    let pages = wiki.import_document(&xml, &whoami()).map_err(|e| match e {
        WikiError::Parse(p) => Failure::Data {
            message: format!("{}:{p}", file.display()),
            detail: json!({ "line": p.line, "column": p.column, "code": p.code }),
        },
        e => e.into(),
    })?;
    ctx.emit(json!({ "pages": pages }), || pages.join("\n"));
    Ok(())
}

fn export(ctx: &Ctx, theory: &str, closure: bool) -> Outcome {
    let xml = ctx.wiki()?.export_theory(theory, closure)?;
    if ctx.json {
        ctx.emit(json!({ "theory": theory, "closure": closure, "document": xml }), String::new);
    } else {
        println!("{xml}");
    }
    Ok(())
}

fn render(ctx: &Ctx, page: &str, plain: bool) -> Outcome {
    let wiki = ctx.wiki()?;
    let r = wiki.render_page(page)?;
    if ctx.json {
        let value = json!({
            "page": r.page,
            "revision": r.revision,
            "layout": r.layout_xml(),
            "plain": r.plain(),
            "warnings": r.warnings,
        });
        ctx.emit(value, String::new);
        return Ok(());
    }
    for w in &r.warnings {
        eprintln!("warning: {}", w.message);
    }
    if plain {
        println!("{}", r.plain());
    } else {
        println!("{}", r.layout_xml());
    }
    Ok(())
}

fn validate(ctx: &Ctx, file: &Path) -> Outcome {
    let xml = read_file(file)?;
    let doc = parse_document(&xml).map_err(|p| Failure::Data {
        message: format!("{}:{p}", file.display()),
        detail: json!({ "line": p.line, "column": p.column, "code": p.code }),
    })?;
    let violations = validate_document(&doc);
    let graph: BTreeMap<String, Vec<String>> =
        doc.theories.iter().map(|t| (t.id.clone(), t.imports.clone())).collect();
    let cycle = find_cycle(&graph);
    let valid = violations.is_empty() && cycle.is_none();
    ctx.emit(json!({ "valid": valid, "violations": violations, "cycle": cycle }), || {
        let mut lines: Vec<String> = violations.iter().map(ToString::to_string).collect();
        if let Some(c) = &cycle {
            lines.push(format!("CyclicImport: {}", c.join(" -> ")));
        }
        lines.join("\n")
    });
    if valid {
        Ok(())
    } else {
        Err(Failure::Data { message: "document is not valid".into(), detail: Value::Null })
    }
}

fn tasks_table(q: &WorkQueue) -> String {
    let mut out = String::new();
    let mut section = |title: &str, rows: Vec<String>| {
        out.push_str(&format!("{title} ({})\n", rows.len()));
        for r in rows {
            out.push_str(&format!("  {r}\n"));
        }
    };
    section("unproven", q.unproven.clone());
    section("undefined symbols", q.undefined_symbols.clone());
    section("missing notations", q.missing_notations.iter().map(ToString::to_string).collect());
    section("dangling references", q.dangling_refs.iter().map(|(p, t)| format!("{p} -> {t}")).collect());
    out.truncate(out.trim_end().len());
    out
}

fn tasks(ctx: &Ctx) -> Outcome {
    let q = ctx.wiki()?.work_queue();
    ctx.emit(serde_json::to_value(&q).expect("work queue json"), || tasks_table(&q));
    Ok(())
}

fn query(ctx: &Ctx, patterns: &[String], negations: &[String]) -> Outcome {
    let parse = |ps: &[String]| -> Result<Vec<TriplePattern>, Failure> {
        ps.iter()
            .map(|p| p.parse().map_err(|e| Failure::Usage(format!("{e}"))))
            .collect()
    };
    let q = QueryPattern::new(parse(patterns)?, parse(negations)?);
    let rows = ctx.wiki()?.query(&q)?;
    ctx.emit(serde_json::to_value(&rows).expect("bindings json"), || {
        rows.iter()
            .map(|b| b.iter().map(|(k, v)| format!("?{k}={v}")).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join("\n")
    });
    Ok(())
}

fn serve(ctx: &Ctx, port: u16) -> Outcome {
    let data_dir = ctx
        .data_dir
        .clone()
        .ok_or_else(|| Failure::Usage("--data-dir (or WIKI_DATA) is required".into()))?;
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(Failure::data)?;
    runtime
        .block_on(mathwiki_service::serve(mathwiki_service::Config { port, data_dir }))
        .map_err(Failure::data)
}

fn whoami() -> String {
    std::env::var("USER").unwrap_or_else(|_| mathwiki_service::DEFAULT_AUTHOR.to_owned())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let ctx = Ctx { data_dir: cli.data_dir, json: cli.json };
    let outcome = match &cli.command {
        Command::Import { file } => import(&ctx, file),
        Command::Export { theory, closure } => export(&ctx, theory, *closure),
        Command::Render { page, plain } => render(&ctx, page, *plain),
        Command::Validate { file } => validate(&ctx, file),
        Command::Tasks => tasks(&ctx),
        Command::Query { patterns, negations } => query(&ctx, patterns, negations),
        Command::Serve { port } => serve(&ctx, *port),
    };
    let (code, kind, message, detail) = match outcome {
        Ok(()) => return ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => (1, "usage", m, Value::Null),
        Err(Failure::Data { message, detail }) => (2, "data", message, detail),
    };
    if ctx.json {
        eprintln!("{}", json!({ "error": kind, "message": message, "detail": detail }));
    } else {
        eprintln!("mathwiki: {message}");
    }
    ExitCode::from(code)
}
