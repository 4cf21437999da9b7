//! The module registry: source text and syntax per module, the compiled
//! rules, and swaps that replace rules while a program runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::engine::{compile_versioned, RuleSet, PRELUDE};
use crate::syntax::{join_editable, parse_module, split_editable, Diagnostic, ModuleAst};

/// Source of the base module every program imports implicitly.
pub const PRELUDE_SOURCE: &str = include_str!("prelude.lhsq");

/// File extension of module files in a program directory.
pub const EXTENSION: &str = "lhsq";

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleSource {
    pub name: String,
    pub full_text: String,
    /// Everything up to and including the marker line, or the whole text
    /// when there is no marker.
    pub protected_text: String,
    pub editable_text: Option<String>,
    pub ast: ModuleAst,
    pub version: u64,
}

impl ModuleSource {
    fn parse(name: &str, text: &str, version: u64) -> Result<ModuleSource, Vec<Diagnostic>> {
        let ast = parse_module(name, text)?;
        let (protected, editable) = split_editable(text);
        Ok(ModuleSource {
            name: name.to_string(),
            full_text: text.to_string(),
            protected_text: protected.to_string(),
            editable_text: editable.map(str::to_string),
            ast,
            version,
        })
    }

    pub fn has_editable_region(&self) -> bool {
        self.editable_text.is_some()
    }

    /// First line of the editable region in the full text.
    pub fn editable_start_line(&self) -> Option<u32> {
        self.ast.editable_from_line
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwapError {
    #[error("{}", join_diagnostics(.0))]
    Diagnostics(Vec<Diagnostic>),
    #[error("module `{0}` has no editable region")]
    NoEditableRegion(String),
    #[error("no module named `{0}`")]
    NotFound(String),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{}", join_diagnostics(.0))]
    Diagnostics(Vec<Diagnostic>),
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(Diagnostic::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

/// All loaded modules and the rules compiled from them.
#[derive(Debug, Clone)]
pub struct ProgramState {
    modules: BTreeMap<String, ModuleSource>,
    compiled: Arc<RuleSet>,
    program_version: u64,
}

impl ProgramState {
    pub fn modules(&self) -> impl Iterator<Item = &ModuleSource> {
        self.modules.values()
    }

    pub fn get_module(&self, name: &str) -> Result<&ModuleSource, SwapError> {
        self.modules
            .get(name)
            .ok_or_else(|| SwapError::NotFound(name.to_string()))
    }

    pub fn rules(&self) -> &Arc<RuleSet> {
        &self.compiled
    }

    pub fn program_version(&self) -> u64 {
        self.program_version
    }

    /// Replaces the whole text of `name`, creating the module if it does
    /// not exist yet. Nothing changes unless every module still compiles.
    pub fn swap_module(&mut self, name: &str, full_text: &str) -> Result<u64, SwapError> {
        let version = self.modules.get(name).map_or(1, |m| m.version + 1);
        let source = ModuleSource::parse(name, full_text, version).map_err(SwapError::Diagnostics)?;
        let program_version = self.program_version + 1;
        let mut modules = self.modules.clone();
        modules.insert(name.to_string(), source);
        let compiled = compile(&modules, program_version).map_err(SwapError::Diagnostics)?;
        self.modules = modules;
        self.compiled = Arc::new(compiled);
        self.program_version = program_version;
        Ok(version)
    }

    /// Replaces the text below the marker of `name`. Diagnostics inside the
    /// editable region are reported with lines counted from its first line.
    pub fn swap_editable(&mut self, name: &str, editable_text: &str) -> Result<u64, SwapError> {
        let module = self.get_module(name)?;
        let Some(start) = module.editable_start_line() else {
            return Err(SwapError::NoEditableRegion(name.to_string()));
        };
        let full = join_editable(&module.protected_text, editable_text);
        self.swap_module(name, &full).map_err(|err| match err {
            SwapError::Diagnostics(diags) => {
                SwapError::Diagnostics(diags.into_iter().map(|d| rebase(d, name, start)).collect())
            }
            other => other,
        })
    }
}

fn rebase(mut diag: Diagnostic, module: &str, start: u32) -> Diagnostic {
    if diag.module == module && diag.line >= start {
        diag.line -= start - 1;
    }
    diag
}

fn compile(modules: &BTreeMap<String, ModuleSource>, program_version: u64) -> Result<RuleSet, Vec<Diagnostic>> {
    let versioned: Vec<(&ModuleAst, u64)> = modules.values().map(|m| (&m.ast, m.version)).collect();
    compile_versioned(&versioned, program_version)
}

/// Loads modules from `(name, text)` pairs. The shipped Prelude is added
/// unless one of the sources is itself named `Prelude`.
pub fn load_program(sources: &[(String, String)]) -> Result<ProgramState, Vec<Diagnostic>> {
    let mut modules = BTreeMap::new();
    let mut diags = Vec::new();
    let overrides_prelude = sources.iter().any(|(name, _)| name == PRELUDE);
    let prelude = (!overrides_prelude).then(|| (PRELUDE.to_string(), PRELUDE_SOURCE.to_string()));
    for (name, text) in sources.iter().chain(prelude.as_ref()) {
        if modules.contains_key(name) {
            diags.push(Diagnostic::new(name.as_str(), 1, 1, format!("module `{name}` is loaded twice")));
            continue;
        }
        match ModuleSource::parse(name, text, 1) {
            Ok(source) => {
                modules.insert(name.clone(), source);
            }
            Err(errors) => diags.extend(errors),
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    let compiled = compile(&modules, 1)?;
    Ok(ProgramState {
        modules,
        compiled: Arc::new(compiled),
        program_version: 1,
    })
}

/// Loads every `.lhsq` file of `dir`; file stems are module names.
pub fn load_dir(dir: &Path) -> Result<ProgramState, LoadError> {
    let io = |path: &Path, err: std::io::Error| LoadError::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    };
    let mut sources = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io(dir, e))? {
        let path = entry.map_err(|e| io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(EXTENSION) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let text = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
        sources.push((stem.to_string(), text));
    }
    sources.sort();
    load_program(&sources).map_err(LoadError::Diagnostics)
}
