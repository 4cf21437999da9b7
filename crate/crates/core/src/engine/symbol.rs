//! Process-wide tables for names, source origins and lambda parameter
//! lists, so that heap nodes can refer to them by small integer ids.
//!
//! Entries are never removed. Identical names, origins and lambdas are
//! stored once, so recompiling an unchanged module adds nothing.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock, RwLockReadGuard};

use crate::syntax::Pattern;

use super::builtin::Builtin;
use super::subst::Template;
use super::term::{Name, Origin};

/// An interned name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(pub(crate) u32);

impl Sym {
    /// Stands for "no module": names resolve in the global namespace.
    pub const NONE: Sym = Sym(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> Name {
        tables().names[self.index()].clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OriginId(pub(crate) u32);

impl OriginId {
    pub const NONE: OriginId = OriginId(u32::MAX);

    pub fn get(self) -> Option<Arc<Origin>> {
        (self != OriginId::NONE).then(|| tables().origins[self.0 as usize].clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LambdaId(pub(crate) u32);

impl LambdaId {
    pub fn get(self) -> Arc<LambdaInfo> {
        tables().lambdas[self.0 as usize].clone()
    }
}

/// A pattern with its variables replaced by slot numbers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pat {
    Slot(u32),
    Wild,
    Int(i64),
    Con(Sym, Box<[Pat]>),
}

impl Pat {
    /// Compiles `pattern`, numbering variables in the order of `vars`.
    pub fn compile(pattern: &Pattern, vars: &[Name]) -> Pat {
        match pattern {
            Pattern::Var(name) => {
                let slot = vars.iter().position(|v| v == name).expect("pattern variable listed");
                Pat::Slot(slot as u32)
            }
            Pattern::Wildcard => Pat::Wild,
            Pattern::Int(n) => Pat::Int(*n),
            Pattern::Constructor(name, subs) => Pat::Con(
                intern(name),
                subs.iter().map(|p| Pat::compile(p, vars)).collect(),
            ),
        }
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub struct LambdaInfo {
    pub patterns: Vec<Pattern>,
    pub params: Vec<Pat>,
    /// Variables bound by the parameters, in slot order.
    pub vars: Vec<Sym>,
    pub origin: OriginId,
    /// The compiled body of a lambda that mentions no variables besides
    /// its own parameters. Such lambdas live in the heap as a single node.
    pub body: Option<Template>,
    pub body_size: usize,
}

struct Tables {
    names: Vec<Name>,
    name_ids: HashMap<Name, u32>,
    origins: Vec<Arc<Origin>>,
    origin_ids: HashMap<Arc<Origin>, u32>,
    lambdas: Vec<Arc<LambdaInfo>>,
    lambda_ids: HashMap<Arc<LambdaInfo>, u32>,
}

fn lock() -> &'static RwLock<Tables> {
    static TABLES: OnceLock<RwLock<Tables>> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut tables = Tables {
            names: Vec::new(),
            name_ids: HashMap::new(),
            origins: Vec::new(),
            origin_ids: HashMap::new(),
            lambdas: Vec::new(),
            lambda_ids: HashMap::new(),
        };
        // builtins take the first ids, in declaration order
        for builtin in Builtin::ALL {
            tables.intern(builtin.name());
        }
        for name in WELL_KNOWN {
            tables.intern(name);
        }
        RwLock::new(tables)
    })
}

fn tables() -> RwLockReadGuard<'static, Tables> {
    lock().read().unwrap_or_else(|e| e.into_inner())
}

impl Tables {
    fn intern(&mut self, name: &str) -> Sym {
        if let Some(&id) = self.name_ids.get(name) {
            return Sym(id);
        }
        let id = self.names.len() as u32;
        let name: Name = Arc::from(name);
        self.names.push(name.clone());
        self.name_ids.insert(name, id);
        Sym(id)
    }
}

const WELL_KNOWN: [&str; 4] = [":", "[]", "True", "False"];

pub(crate) const CONS: Sym = Sym(Builtin::ALL.len() as u32);
pub(crate) const NIL: Sym = Sym(Builtin::ALL.len() as u32 + 1);
pub(crate) const TRUE: Sym = Sym(Builtin::ALL.len() as u32 + 2);
pub(crate) const FALSE: Sym = Sym(Builtin::ALL.len() as u32 + 3);

pub fn intern(name: &str) -> Sym {
    if let Some(&id) = tables().name_ids.get(name) {
        return Sym(id);
    }
    lock().write().unwrap_or_else(|e| e.into_inner()).intern(name)
}

/// The id of `name` if it was ever interned.
pub fn lookup(name: &str) -> Option<Sym> {
    tables().name_ids.get(name).map(|&id| Sym(id))
}


pub fn register_origin(origin: Origin) -> OriginId {
    let origin = Arc::new(origin);
    if let Some(&id) = tables().origin_ids.get(&origin) {
        return OriginId(id);
    }
    let mut t = lock().write().unwrap_or_else(|e| e.into_inner());
    if let Some(&id) = t.origin_ids.get(&origin) {
        return OriginId(id);
    }
    let id = t.origins.len() as u32;
    t.origins.push(origin.clone());
    t.origin_ids.insert(origin, id);
    OriginId(id)
}

pub fn register_lambda(info: LambdaInfo) -> LambdaId {
    let info = Arc::new(info);
    if let Some(&id) = tables().lambda_ids.get(&info) {
        return LambdaId(id);
    }
    let mut t = lock().write().unwrap_or_else(|e| e.into_inner());
    if let Some(&id) = t.lambda_ids.get(&info) {
        return LambdaId(id);
    }
    let id = t.lambdas.len() as u32;
    t.lambdas.push(info.clone());
    t.lambda_ids.insert(info, id);
    LambdaId(id)
}

/// Variables bound by `patterns`, left to right.
pub fn pattern_variables(patterns: &[Pattern]) -> Vec<Name> {
    let mut vars = Vec::new();
    patterns.iter().for_each(|p| p.variables(&mut vars));
    vars.into_iter().cloned().collect()
}

/// Registers a lambda with the given parameters and, for a closed lambda,
/// its compiled body.
pub fn lambda_of(patterns: &[Pattern], origin: OriginId, body: Option<Template>) -> LambdaId {
    let names = pattern_variables(patterns);
    register_lambda(LambdaInfo {
        patterns: patterns.to_vec(),
        params: patterns.iter().map(|p| Pat::compile(p, &names)).collect(),
        vars: names.iter().map(|n| intern(n)).collect(),
        origin,
        body_size: body.as_ref().map_or(0, Template::size),
        body,
    })
}
