use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Expr, MethodDecl, Statement, Value};

const PRIMITIVES: &[&str] = &["int", "long", "short", "byte", "char", "boolean", "float", "double", "void"];

/// A type name as written in the IR: a primitive, a qualified class name, or
/// either followed by `[]` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Type(String);

impl Type {
    pub fn new(name: impl Into<String>) -> Self {
        Type(name.into())
    }

    pub fn string() -> Self {
        Type::new("java.lang.String")
    }

    pub fn unknown() -> Self {
        Type::new("?")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_unknown(&self) -> bool {
        self.0 == "?"
    }

    pub fn is_array(&self) -> bool {
        self.0.ends_with("[]")
    }

    /// Innermost element type with every `[]` removed.
    pub fn base(&self) -> &str {
        self.0.trim_end_matches("[]")
    }

    pub fn element(&self) -> Option<Type> {
        self.0.strip_suffix("[]").map(Type::new)
    }

    pub fn is_primitive(&self) -> bool {
        PRIMITIVES.contains(&self.0.as_str())
    }

    pub fn is_string(&self) -> bool {
        self.0 == "java.lang.String"
    }

    /// Primitive or string types, and arrays of them.
    pub fn is_value_like(&self) -> bool {
        let base = Type::new(self.base());
        base.is_primitive() || base.is_string()
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Flow-insensitive types of every local in one method, collected from
/// parameter declarations and the right-hand sides of definitions.
#[derive(Debug, Clone, Default)]
pub struct LocalTypes {
    types: BTreeMap<String, BTreeSet<Type>>,
}

impl LocalTypes {
    pub fn infer(method: &MethodDecl) -> Self {
        let mut types: BTreeMap<String, BTreeSet<Type>> = BTreeMap::new();
        types.entry("this".to_string()).or_default().insert(Type::new(method.class.clone()));
        for p in &method.params {
            types.entry(p.name.clone()).or_default().insert(p.ty.clone());
        }
        // Copies and array reads depend on other locals; iterate to a fixpoint.
        loop {
            let mut changed = false;
            for stmt in method.body() {
                let (local, found) = match stmt {
                    Statement::Assign { local, expr } => (local, expr_type(expr, &types)),
                    Statement::Invoke(inv) => match &inv.result {
                        Some(local) => (local, vec![inv.target.ret.clone()]),
                        None => continue,
                    },
                    _ => continue,
                };
                let entry = types.entry(local.clone()).or_default();
                for t in found {
                    changed |= entry.insert(t);
                }
            }
            if !changed {
                break;
            }
        }
        LocalTypes { types }
    }

    pub fn of(&self, local: &str) -> impl Iterator<Item = &Type> {
        self.types.get(local).into_iter().flatten()
    }

    /// True when some known type of the local is neither primitive nor string.
    pub fn is_object(&self, local: &str) -> bool {
        self.of(local).any(|t| !t.is_unknown() && !t.is_value_like())
    }
}

fn value_type(v: &Value, types: &BTreeMap<String, BTreeSet<Type>>) -> Vec<Type> {
    match v {
        Value::Const(c) => c.ty().into_iter().collect(),
        Value::Local(l) => types.get(l).into_iter().flatten().cloned().collect(),
    }
}

fn expr_type(expr: &Expr, types: &BTreeMap<String, BTreeSet<Type>>) -> Vec<Type> {
    match expr {
        Expr::Const(c) => c.ty().into_iter().collect(),
        Expr::Local(l) => value_type(&Value::Local(l.clone()), types),
        Expr::FieldRead(fa) => vec![fa.field.ty.clone()],
        Expr::ArrayRead { base, .. } => types.get(base).into_iter().flatten().filter_map(Type::element).collect(),
        Expr::BinOp(op, a, _) => {
            if op.is_comparison() {
                vec![Type::new("boolean")]
            } else {
                let t = value_type(a, types);
                if t.is_empty() {
                    vec![Type::new("int")]
                } else {
                    t
                }
            }
        }
        Expr::UnOp(super::UnOp::Not, _) => vec![Type::new("boolean")],
        Expr::UnOp(super::UnOp::Neg, a) => value_type(a, types),
        Expr::Cast(t, _) | Expr::New(t) => vec![t.clone()],
        Expr::LengthOf(_) => vec![Type::new("int")],
        Expr::InstanceOf(..) => vec![Type::new("boolean")],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_like_types() {
        assert!(Type::new("int").is_value_like());
        assert!(Type::string().is_value_like());
        assert!(Type::new("int[][]").is_value_like());
        assert!(!Type::new("android.os.Bundle").is_value_like());
        assert_eq!(Type::new("int[][]").element(), Some(Type::new("int[]")));
    }
}
