//! Compiling parsed modules into an immutable set of rewrite rules.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use crate::syntax::{Declaration, Diagnostic, ModuleAst, Pattern, SourceRange};

use super::builtin::Builtin;
use super::subst::Template;
use super::symbol::{self, Pat, Sym};
use super::term::{Name, Origin};

/// Name of the module every other module imports implicitly.
pub const PRELUDE: &str = "Prelude";

#[derive(Debug, Clone, PartialEq)]
pub struct Equation {
    pub patterns: Vec<Pattern>,
    pub rhs: Template,
    pub range: SourceRange,
    /// Pattern variables in binding order; matches the template's slots.
    pub(crate) variables: Vec<Name>,
    pub(crate) compiled: Vec<Pat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: Name,
    pub module: String,
    pub arity: usize,
    /// Never empty; tried top to bottom.
    pub equations: Vec<Equation>,
}

/// What an identifier resolves to.
#[derive(Debug, Clone, Copy)]
pub enum Callee<'a> {
    Function(&'a Function),
    Builtin(Builtin),
}

const NO_SCOPE: u32 = u32::MAX;

/// An immutable snapshot of all loaded rules. Swapping a module builds a
/// new snapshot; terms keep resolving names against whichever snapshot
/// the machine holds when they are reduced.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    functions: Vec<Function>,
    /// Per scope, function index plus one for each interned name, or zero.
    /// Scope 0 is the global namespace.
    scopes: Vec<Vec<u32>>,
    /// Scope index for each interned module name.
    scope_of: Vec<u32>,
    global_names: Vec<Name>,
    versions: BTreeMap<String, u64>,
    program_version: u64,
}

impl RuleSet {
    /// Resolves `name` as seen from the module `origin` points into, or from
    /// the global namespace of exported names when there is no origin.
    pub fn resolve(&self, name: &str, origin: Option<&Origin>) -> Option<Callee<'_>> {
        let sym = symbol::lookup(name)?;
        let module = match origin {
            Some(origin) => symbol::lookup(origin.module())?,
            None => Sym::NONE,
        };
        self.resolve_sym(sym, module)
    }

    #[inline]
    pub(crate) fn resolve_sym(&self, sym: Sym, module: Sym) -> Option<Callee<'_>> {
        if let Some(builtin) = Builtin::from_sym(sym) {
            return Some(Callee::Builtin(builtin));
        }
        let scope = if module == Sym::NONE {
            0
        } else {
            match self.scope_of.get(module.index()) {
                Some(&scope) if scope != NO_SCOPE => scope,
                _ => return None,
            }
        };
        match self.scopes.get(scope as usize)?.get(sym.index()) {
            Some(&i) if i > 0 => Some(Callee::Function(&self.functions[i as usize - 1])),
            _ => None,
        }
    }

    /// The function `name` defined in `module`.
    pub fn function(&self, module: &str, name: &str) -> Option<&Function> {
        self.functions
            .iter()
            .find(|f| f.module == module && &*f.name == name)
    }

    pub fn functions(&self) -> impl Iterator<Item = &Function> {
        self.functions.iter()
    }

    /// Names visible without an origin, i.e. every exported name.
    pub fn global_names(&self) -> impl Iterator<Item = &str> {
        self.global_names.iter().map(|k| &**k)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn module_versions(&self) -> &BTreeMap<String, u64> {
        &self.versions
    }

    pub fn program_version(&self) -> u64 {
        self.program_version
    }
}

fn dense(table: &HashMap<Name, usize>) -> Vec<u32> {
    let entries: Vec<(Sym, u32)> = table
        .iter()
        .map(|(name, &index)| (symbol::intern(name), index as u32 + 1))
        .collect();
    let width = entries.iter().map(|(sym, _)| sym.index() + 1).max().unwrap_or(0);
    let mut out = vec![0; width];
    for (sym, entry) in entries {
        out[sym.index()] = entry;
    }
    out
}

/// Compiles modules that all have version 1.
pub fn compile_rules(modules: &[ModuleAst]) -> Result<RuleSet, Vec<Diagnostic>> {
    let versioned: Vec<_> = modules.iter().map(|m| (m, 1)).collect();
    compile_versioned(&versioned, 1)
}

fn at_start(module: &str, message: String) -> Diagnostic {
    Diagnostic::new(module, 1, 1, message)
}

/// Compiles modules tagged with their versions into one rule set.
pub fn compile_versioned(
    modules: &[(&ModuleAst, u64)],
    program_version: u64,
) -> Result<RuleSet, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut by_name: BTreeMap<&str, &ModuleAst> = BTreeMap::new();
    for (module, _) in modules {
        if by_name.insert(&module.name, module).is_some() {
            diags.push(at_start(&module.name, format!("module `{}` is loaded twice", module.name)));
        }
    }

    let mut functions = Vec::new();
    let mut own: HashMap<&str, HashMap<Name, usize>> = HashMap::new();
    for (module, version) in modules {
        let table = own.entry(&module.name).or_default();
        for group in group_equations(module, &mut diags) {
            let first = group[0];
            if Builtin::from_name(&first.name).is_some() {
                diags.push(Diagnostic::at(
                    &first.range,
                    format!("`{}` is a builtin and cannot be redefined", first.name),
                ));
                continue;
            }
            let equations = group
                .iter()
                .map(|decl| compile_equation(decl, *version))
                .collect();
            table.insert(first.name.clone(), functions.len());
            functions.push(Function {
                name: first.name.clone(),
                module: module.name.clone(),
                arity: first.arity(),
                equations,
            });
        }
    }

    // exports
    let mut exported: HashMap<&str, Vec<Name>> = HashMap::new();
    for (module, _) in modules {
        let table = &own[module.name.as_str()];
        let names = match &module.exports {
            None => {
                let mut names: Vec<Name> = table.keys().cloned().collect();
                names.sort();
                names
            }
            Some(list) => {
                let mut names = Vec::new();
                for name in list {
                    match table.get_key_value(name.as_str()) {
                        Some((key, _)) => names.push(key.clone()),
                        None => diags.push(at_start(
                            &module.name,
                            format!("exported name `{name}` is not defined in `{}`", module.name),
                        )),
                    }
                }
                names
            }
        };
        exported.insert(&module.name, names);
    }

    // imports, with the prelude implied
    let mut imports: HashMap<&str, Vec<&str>> = HashMap::new();
    for (module, _) in modules {
        let mut list: Vec<&str> = Vec::new();
        if module.name != PRELUDE && by_name.contains_key(PRELUDE) {
            list.push(PRELUDE);
        }
        for import in &module.imports {
            if import == &module.name {
                diags.push(at_start(&module.name, format!("module `{import}` imports itself")));
            } else if !by_name.contains_key(import.as_str()) {
                diags.push(at_start(&module.name, format!("imported module `{import}` is not loaded")));
            } else if !list.contains(&import.as_str()) {
                list.push(import);
            }
        }
        imports.insert(&module.name, list);
    }
    if let Some(cycle) = find_cycle(&imports) {
        diags.push(at_start(cycle[0], format!("import cycle: {}", cycle.join(" -> "))));
    }

    let mut scopes: HashMap<String, HashMap<Name, usize>> = HashMap::new();
    for (module, _) in modules {
        let mut scope: HashMap<Name, usize> = own[module.name.as_str()].clone();
        let mut source: HashMap<Name, &str> =
            scope.keys().map(|k| (k.clone(), module.name.as_str())).collect();
        for import in &imports[module.name.as_str()] {
            for name in &exported[import] {
                let index = own[import][name];
                if let Some(previous) = source.get(name) {
                    if scope[name] != index {
                        diags.push(at_start(
                            &module.name,
                            format!(
                                "duplicate definition of `{name}`: visible from both `{previous}` and `{import}`"
                            ),
                        ));
                    }
                    continue;
                }
                source.insert(name.clone(), import);
                scope.insert(name.clone(), index);
            }
        }
        scopes.insert(module.name.clone(), scope);
    }

    let mut root: HashMap<Name, usize> = HashMap::new();
    for (module, _) in modules {
        for name in &exported[module.name.as_str()] {
            let index = own[module.name.as_str()][name];
            if let Some(&other) = root.get(name) {
                let other_module: &String = &functions[other].module;
                diags.push(at_start(
                    &module.name,
                    format!(
                        "duplicate definition of `{name}`: exported by both `{other_module}` and `{}`",
                        module.name
                    ),
                ));
            } else {
                root.insert(name.clone(), index);
            }
        }
    }

    if !diags.is_empty() {
        return Err(diags);
    }
    let module_syms: Vec<Sym> = modules.iter().map(|(m, _)| symbol::intern(&m.name)).collect();
    let width = module_syms.iter().map(|sym| sym.index() + 1).max().unwrap_or(0);
    let mut scope_of = vec![NO_SCOPE; width];
    let mut dense_scopes = vec![dense(&root)];
    for ((module, _), sym) in modules.iter().zip(&module_syms) {
        scope_of[sym.index()] = dense_scopes.len() as u32;
        dense_scopes.push(dense(&scopes[&module.name]));
    }
    let mut global_names: Vec<Name> = root.into_keys().collect();
    global_names.sort();
    Ok(RuleSet {
        functions,
        scopes: dense_scopes,
        scope_of,
        global_names,
        versions: modules
            .iter()
            .map(|(m, v)| (m.name.clone(), *v))
            .collect(),
        program_version,
    })
}

fn compile_equation(decl: &Declaration, version: u64) -> Equation {
    let mut vars = Vec::new();
    decl.patterns.iter().for_each(|p| p.variables(&mut vars));
    let variables: Vec<Name> = vars.into_iter().cloned().collect();
    Equation {
        patterns: decl.patterns.clone(),
        rhs: Template::from_expression(&decl.rhs, &variables, version),
        range: decl.range.clone(),
        compiled: decl.patterns.iter().map(|p| Pat::compile(p, &variables)).collect(),
        variables,
    }
}

/// Groups adjacent equations of the same name. A name reappearing later,
/// a group straddling the editable marker, or a constant with several
/// equations counts as a duplicate definition.
fn group_equations<'a>(module: &'a ModuleAst, diags: &mut Vec<Diagnostic>) -> Vec<Vec<&'a Declaration>> {
    let mut groups: Vec<Vec<&Declaration>> = Vec::new();
    let mut seen = HashSet::new();
    for decl in &module.declarations {
        if let Some(group) = groups.last_mut() {
            let prev = *group.last().unwrap();
            if prev.name == decl.name {
                let crosses_marker = module.editable_from_line.is_some_and(|line| {
                    prev.range.start_line < line && decl.range.start_line >= line
                });
                if crosses_marker || decl.arity() == 0 {
                    diags.push(Diagnostic::at(
                        &decl.range,
                        format!("duplicate definition of `{}`", decl.name),
                    ));
                } else if prev.arity() != decl.arity() {
                    diags.push(Diagnostic::at(
                        &decl.range,
                        format!(
                            "equations for `{}` have different numbers of arguments ({} and {})",
                            decl.name,
                            prev.arity(),
                            decl.arity()
                        ),
                    ));
                } else {
                    group.push(decl);
                }
                continue;
            }
        }
        if !seen.insert(&decl.name) {
            diags.push(Diagnostic::at(
                &decl.range,
                format!("duplicate definition of `{}`", decl.name),
            ));
            continue;
        }
        groups.push(vec![decl]);
    }
    groups
}

fn find_cycle<'a>(imports: &HashMap<&'a str, Vec<&'a str>>) -> Option<Vec<&'a str>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(
        node: &'a str,
        imports: &HashMap<&'a str, Vec<&'a str>>,
        marks: &mut HashMap<&'a str, Mark>,
        path: &mut Vec<&'a str>,
    ) -> Option<Vec<&'a str>> {
        match marks.get(node) {
            Some(Mark::Done) => return None,
            Some(Mark::Active) => {
                let start = path.iter().position(|n| *n == node).unwrap();
                let mut cycle = path[start..].to_vec();
                cycle.push(node);
                return Some(cycle);
            }
            None => {}
        }
        marks.insert(node, Mark::Active);
        path.push(node);
        for next in imports.get(node).into_iter().flatten() {
            if let Some(cycle) = visit(next, imports, marks, path) {
                return Some(cycle);
            }
        }
        path.pop();
        marks.insert(node, Mark::Done);
        None
    }
    let mut marks = HashMap::new();
    let mut names: Vec<_> = imports.keys().copied().collect();
    names.sort_unstable();
    for name in names {
        if let Some(cycle) = visit(name, imports, &mut marks, &mut Vec::new()) {
            return Some(cycle);
        }
    }
    None
}

/// An origin pointing into `module`, for resolving names the way code in
/// that module sees them.
pub fn origin_in(module: &str, version: u64) -> Arc<Origin> {
    Arc::new(Origin {
        range: SourceRange::new(Arc::from(module), (1, 1), (1, 1)),
        version,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_module;

    fn module(name: &str, text: &str) -> ModuleAst {
        parse_module(name, text).unwrap()
    }

    fn messages(result: Result<RuleSet, Vec<Diagnostic>>) -> Vec<String> {
        result.unwrap_err().into_iter().map(|d| d.message).collect()
    }

    #[test]
    fn groups_equations_by_name() {
        let rules = compile_rules(&[module(
            "M",
            "len [] = 0 ;\nlen (x : xs) = 1 + len xs ;\nmain = len [1] ;\n",
        )])
        .unwrap();
        assert_eq!(rules.len(), 2);
        let len = rules.function("M", "len").unwrap();
        assert_eq!((len.arity, len.equations.len()), (1, 2));
    }

    #[test]
    fn duplicate_exports_collide() {
        let a = module("A", "module A (main) where\nmain = [] ;\n");
        let b = module("B", "module B (main) where\nmain = [] ;\n");
        let errs = messages(compile_rules(&[a, b]));
        assert!(errs.iter().any(|m| m.contains("duplicate definition of `main`")), "{errs:?}");
    }

    #[test]
    fn export_lists_hide_helpers() {
        let a = module("A", "module A (tuneA) where\nhelper = 1 ;\ntuneA = helper ;\n");
        let b = module("B", "module B (tuneB) where\nhelper = 2 ;\ntuneB = helper ;\n");
        let rules = compile_rules(&[a, b]).unwrap();
        assert!(rules.resolve("helper", None).is_none());
        let from_a = origin_in("A", 1);
        match rules.resolve("helper", Some(&from_a)) {
            Some(Callee::Function(f)) => assert_eq!(f.module, "A"),
            _ => panic!(),
        }
    }

    #[test]
    fn arity_mismatch_and_scattered_equations() {
        let errs = messages(compile_rules(&[module("M", "f x = 1 ;\nf x y = 2 ;\n")]));
        assert!(errs[0].contains("different numbers of arguments"));
        let errs = messages(compile_rules(&[module("M", "f 0 = 1 ;\ng = 1 ;\nf x = 2 ;\n")]));
        assert!(errs[0].contains("duplicate definition of `f`"));
        let errs = messages(compile_rules(&[module("M", "c = 60 ;\nc = 61 ;\n")]));
        assert!(errs[0].contains("duplicate definition of `c`"));
    }

    #[test]
    fn marker_splits_groups() {
        let text = "f 0 = 1 ;\n-- %%% EDITABLE %%%\nf x = 2 ;\n";
        let errs = messages(compile_rules(&[module("M", text)]));
        assert!(errs[0].contains("duplicate definition of `f`"));
    }

    #[test]
    fn import_errors() {
        let errs = messages(compile_rules(&[module("M", "import Nope ;\nmain = [] ;\n")]));
        assert!(errs[0].contains("`Nope` is not loaded"));
        let a = module("A", "module A where\nimport B ;\na = 1 ;\n");
        let b = module("B", "module B where\nimport A ;\nb = 1 ;\n");
        let errs = messages(compile_rules(&[a, b]));
        assert!(errs.iter().any(|m| m.contains("import cycle: A -> B -> A")), "{errs:?}");
        let errs = messages(compile_rules(&[module("M", "module M (nope) where\nx = 1 ;\n")]));
        assert!(errs[0].contains("`nope` is not defined"));
    }

    #[test]
    fn builtins_cannot_be_redefined() {
        let errs = messages(compile_rules(&[module("M", "a + b = 0 ;\n")]));
        assert!(errs[0].contains("builtin"));
    }

    #[test]
    fn imported_names_resolve() {
        let lib = module("Lib", "module Lib (twice) where\ntwice x = x + x ;\n");
        let user = module("User", "module User where\nimport Lib ;\nmain = twice 2 ;\n");
        let rules = compile_rules(&[lib, user]).unwrap();
        let from_user = origin_in("User", 1);
        assert!(matches!(
            rules.resolve("twice", Some(&from_user)),
            Some(Callee::Function(f)) if f.module == "Lib"
        ));
        let own_twice = module("User", "module User where\nimport Lib ;\ntwice = 1 ;\n");
        let lib = module("Lib", "module Lib (twice) where\ntwice x = x + x ;\n");
        let errs = messages(compile_rules(&[lib, own_twice]));
        assert!(errs.iter().any(|m| m.contains("visible from both")), "{errs:?}");
    }
}
