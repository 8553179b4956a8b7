use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use super::parser::RawClass;
use super::{ClassDecl, ClassKind, FieldRef, IrError, MethodDecl, MethodRef, Pos, Program, Statement, Type};

const IMPLICIT_CLASSES: &[&str] = &["java.lang.Object", "java.lang.String"];

fn implicit_class(name: &str) -> ClassDecl {
    ClassDecl {
        name: name.to_string(),
        kind: ClassKind::Class,
        superclass: None,
        interfaces: Vec::new(),
        fields: Vec::new(),
        methods: Vec::new(),
        attributes: BTreeSet::from(["external".to_string()]),
    }
}

pub(crate) fn assemble(raw: Vec<RawClass>) -> Result<Program, IrError> {
    let mut classes = Vec::with_capacity(raw.len());
    let mut spans = Vec::with_capacity(raw.len());
    let mut index = BTreeMap::new();
    for rc in raw {
        if index.insert(rc.decl.name.clone(), classes.len()).is_some() {
            return Err(IrError::Duplicate { pos: rc.spans.pos, name: rc.decl.name });
        }
        classes.push(rc.decl);
        spans.push(Some(rc.spans));
    }
    // Only inject the implicit library classes when something else exists.
    if !classes.is_empty() {
        for name in IMPLICIT_CLASSES {
            if !index.contains_key(*name) {
                index.insert(name.to_string(), classes.len());
                classes.push(implicit_class(name));
                spans.push(None);
            }
        }
    }

    let mut program = Program { classes, index, children: BTreeMap::new() };
    check_declarations(&program, &spans)?;
    for c in &program.classes {
        for sup in c.direct_supertypes() {
            program.children.entry(sup.to_string()).or_default().insert(c.name.clone());
        }
    }
    check_acyclic(&program, &spans)?;

    let mut resolved = program.classes.clone();
    for (ci, class) in resolved.iter_mut().enumerate() {
        for (mi, m) in class.methods.iter_mut().enumerate() {
            let Some(body) = m.body.as_mut() else { continue };
            for (si, stmt) in body.iter_mut().enumerate() {
                let pos = spans[ci].as_ref().map_or_else(Pos::default, |s| s.methods[mi].stmts[si]);
                resolve_statement(&program, stmt, pos)?;
            }
        }
    }
    program.classes = resolved;
    Ok(program)
}

fn check_type(program: &Program, ty: &Type, pos: Pos, allow_void: bool) -> Result<(), IrError> {
    let base = Type::new(ty.base());
    let ok = if base.is_primitive() {
        allow_void || base.as_str() != "void" || ty.is_array()
    } else {
        program.class(base.as_str()).is_some()
    };
    if ok {
        Ok(())
    } else {
        Err(IrError::UnresolvedType { pos, name: ty.to_string() })
    }
}

fn check_declarations(program: &Program, spans: &[Option<super::parser::ClassSpans>]) -> Result<(), IrError> {
    for (ci, c) in program.classes.iter().enumerate() {
        let Some(sp) = &spans[ci] else { continue };
        if let Some(s) = &c.superclass {
            match program.class(s) {
                None => return Err(IrError::UnresolvedType { pos: sp.pos, name: s.clone() }),
                Some(d) if d.is_interface() => {
                    return Err(IrError::invalid(sp.pos, format!("`{}` extends interface `{s}`", c.name)))
                }
                _ => {}
            }
        }
        for i in &c.interfaces {
            match program.class(i) {
                None => return Err(IrError::UnresolvedType { pos: sp.pos, name: i.clone() }),
                Some(d) if !d.is_interface() => {
                    return Err(IrError::invalid(sp.pos, format!("`{i}` is not an interface")))
                }
                _ => {}
            }
        }
        let mut field_names = HashSet::new();
        for (fi, f) in c.fields.iter().enumerate() {
            if !field_names.insert(&f.name) {
                return Err(IrError::Duplicate { pos: sp.fields[fi], name: f.name.clone() });
            }
            check_type(program, &f.ty, sp.fields[fi], false)?;
        }
        let mut sigs = HashSet::new();
        let mut arities = HashSet::new();
        for (mi, m) in c.methods.iter().enumerate() {
            let pos = sp.methods[mi].pos;
            let sig = m.sig();
            if !sigs.insert(sig.clone()) {
                return Err(IrError::Duplicate { pos, name: sig.to_string() });
            }
            if !arities.insert((m.name.clone(), m.params.len())) {
                return Err(IrError::invalid(
                    pos,
                    format!("ambiguous overload `{}` with {} parameters", m.name, m.params.len()),
                ));
            }
            let mut pnames = HashSet::new();
            for p in &m.params {
                if !pnames.insert(&p.name) || p.name == "this" {
                    return Err(IrError::Duplicate { pos, name: p.name.clone() });
                }
                check_type(program, &p.ty, pos, false)?;
            }
            check_type(program, &m.ret, pos, true)?;
            let bodiless = c.is_interface() || c.is_external();
            match (bodiless, m.body.is_some()) {
                (true, true) => {
                    return Err(IrError::invalid(
                        pos,
                        format!("interface or external method `{}` cannot have a body", m.name),
                    ))
                }
                (false, false) => return Err(IrError::invalid(pos, format!("method `{}` needs a body", m.name))),
                _ => {}
            }
        }
    }
    Ok(())
}

fn check_acyclic(program: &Program, spans: &[Option<super::parser::ClassSpans>]) -> Result<(), IrError> {
    // Kahn's algorithm over supertype edges; anything left over sits on a cycle.
    let mut pending: HashMap<&str, usize> =
        program.classes.iter().map(|c| (c.name.as_str(), c.direct_supertypes().count())).collect();
    let mut queue: VecDeque<&str> = pending.iter().filter(|(_, &n)| n == 0).map(|(&c, _)| c).collect();
    while let Some(c) = queue.pop_front() {
        for child in program.children.get(c).into_iter().flatten() {
            let n = pending.get_mut(child.as_str()).expect("child is declared");
            *n -= 1;
            if *n == 0 {
                queue.push_back(child);
            }
        }
    }
    let cyclic = program.classes.iter().enumerate().find(|(_, c)| pending[c.name.as_str()] > 0);
    match cyclic {
        Some((ci, c)) => Err(IrError::invalid(
            spans[ci].as_ref().map_or_else(Pos::default, |s| s.pos),
            format!("cyclic inheritance involving `{}`", c.name),
        )),
        None => Ok(()),
    }
}

fn resolve_statement(program: &Program, stmt: &mut Statement, pos: Pos) -> Result<(), IrError> {
    let access = match stmt {
        Statement::Assign { expr: super::Expr::FieldRead(fa), .. } => Some(fa),
        Statement::FieldWrite { field, .. } => Some(field),
        Statement::Invoke(inv) => {
            if let Some(m) = program.lookup_method(&inv.class, &inv.name, inv.args.len()) {
                inv.target = m.sig();
            }
            None
        }
        _ => None,
    };
    if let Some(fa) = access {
        let class = fa.field.class.clone();
        let name = fa.field.name.clone();
        if program.class(&class).is_none() {
            return Err(IrError::UnresolvedType { pos, name: class });
        }
        fa.field = program
            .lookup_field(&class, &name)
            .ok_or_else(|| IrError::invalid(pos, format!("unknown field `{class}.{name}`")))?;
    }
    Ok(())
}

impl Program {
    /// Supertypes of a declared type in breadth-first order, starting with itself.
    pub fn supertypes_of(&self, name: &str) -> Vec<&ClassDecl> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([name]);
        while let Some(n) = queue.pop_front() {
            let Some(c) = self.class(n) else { continue };
            if !seen.insert(n) {
                continue;
            }
            out.push(c);
            queue.extend(c.direct_supertypes());
        }
        out
    }

    /// Reflexive-transitive subtypes of a declared type.
    pub fn subtypes_of(&self, name: &str) -> Result<BTreeSet<String>, IrError> {
        if self.class(name).is_none() {
            return Err(IrError::UnknownType(name.to_string()));
        }
        let mut out = BTreeSet::from([name.to_string()]);
        let mut stack = vec![name.to_string()];
        while let Some(n) = stack.pop() {
            for child in self.children.get(&n).into_iter().flatten() {
                if out.insert(child.clone()) {
                    stack.push(child.clone());
                }
            }
        }
        Ok(out)
    }

    /// True when `sub` equals `sup` or transitively extends or implements it.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        self.supertypes_of(sub).iter().any(|c| c.name == sup)
    }

    /// Declared method visible from `class` with this name and arity, found by
    /// searching the class and then its supertypes breadth-first.
    pub fn lookup_method(&self, class: &str, name: &str, arity: usize) -> Option<&MethodDecl> {
        self.supertypes_of(class)
            .into_iter()
            .find_map(|c| c.methods.iter().find(|m| m.name == name && m.params.len() == arity))
    }

    pub fn lookup_field(&self, class: &str, name: &str) -> Option<FieldRef> {
        self.supertypes_of(class).into_iter().find_map(|c| {
            c.field(name).map(|f| FieldRef { class: c.name.clone(), name: f.name.clone(), ty: f.ty.clone() })
        })
    }

    /// Runtime dispatch: the nearest declaration of the subsignature found by
    /// walking the superclass chain of a concrete class.
    pub fn dispatch(&self, class: &str, sig: &MethodRef) -> Option<MethodRef> {
        let mut cur = self.class(class);
        while let Some(c) = cur {
            if let Some(m) =
                c.methods.iter().find(|m| m.name == sig.name && m.params.iter().map(|p| &p.ty).eq(sig.params.iter()))
            {
                return Some(m.sig());
            }
            cur = c.superclass.as_deref().and_then(|s| self.class(s));
        }
        None
    }

    /// Methods of supertypes (excluding the declaring class) that `m` overrides.
    pub fn overridden_methods(&self, m: &MethodRef) -> Vec<MethodRef> {
        self.supertypes_of(&m.class)
            .into_iter()
            .skip(1)
            .flat_map(|c| c.methods.iter())
            .filter(|d| d.name == m.name && d.params.iter().map(|p| &p.ty).eq(m.params.iter()))
            .map(MethodDecl::sig)
            .collect()
    }
}
