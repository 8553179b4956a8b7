use std::fmt::Write;

use super::{ClassKind, CondExpr, Constant, Expr, FieldAccess, Invoke, MethodDecl, Program, Statement, Value};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn constant(c: &Constant) -> String {
    match c {
        Constant::Str(s) => quote(s),
        other => other.to_string(),
    }
}

fn value(v: &Value) -> String {
    match v {
        Value::Local(l) => l.clone(),
        Value::Const(c) => constant(c),
    }
}

fn access(fa: &FieldAccess) -> String {
    let mut s = format!("{}.{}", fa.field.class, fa.field.name);
    if let Some(o) = &fa.object {
        write!(s, " on {o}").unwrap();
    }
    s
}

fn invoke(inv: &Invoke) -> String {
    let args: Vec<String> = inv.args.iter().map(value).collect();
    let mut s = format!("invoke {} {}.{}({})", inv.kind.keyword(), inv.class, inv.name, args.join(", "));
    if let Some(r) = &inv.receiver {
        write!(s, " on {r}").unwrap();
    }
    s
}

fn expr(e: &Expr) -> String {
    match e {
        Expr::Const(c) => format!("const {}", constant(c)),
        Expr::Local(l) => l.clone(),
        Expr::FieldRead(fa) => format!("field {}", access(fa)),
        Expr::ArrayRead { base, index } => format!("{base}[{}]", value(index)),
        Expr::BinOp(op, a, b) => format!("{} {} {}", value(a), op.symbol(), value(b)),
        Expr::UnOp(op, a) => format!("{} {}", op.keyword(), value(a)),
        Expr::Cast(t, a) => format!("cast {t} {}", value(a)),
        Expr::New(t) => format!("new {t}"),
        Expr::LengthOf(a) => format!("lengthof {}", value(a)),
        Expr::InstanceOf(t, a) => format!("instanceof {t} {}", value(a)),
    }
}

/// One statement in IR syntax, without indentation.
pub(crate) fn statement(s: &Statement) -> String {
    match s {
        Statement::Assign { local, expr: e } => format!("{local} = {}", expr(e)),
        Statement::FieldWrite { field, value: v } => format!("field {} = {}", access(field), value(v)),
        Statement::ArrayWrite { base, index, value: v } => {
            format!("{base}[{}] = {}", value(index), value(v))
        }
        Statement::Invoke(inv) => match &inv.result {
            Some(r) => format!("{r} = {}", invoke(inv)),
            None => invoke(inv),
        },
        Statement::If { cond: CondExpr::Compare(op, a, b), target } => {
            format!("if {} {} {} goto {target}", value(a), op.symbol(), value(b))
        }
        Statement::If { cond: CondExpr::Not(v), target } => format!("if not {} goto {target}", value(v)),
        Statement::Switch { local, cases, default } => {
            let mut s = format!("switch {local} {{");
            for (c, l) in cases {
                write!(s, " case {}: {l}", constant(c)).unwrap();
            }
            write!(s, " default: {default} }}").unwrap();
            s
        }
        Statement::Goto(l) => format!("goto {l}"),
        Statement::Label(l) => format!("{l}:"),
        Statement::Throw { exception, arg } => {
            format!("throw new {exception}({})", arg.as_deref().unwrap_or(""))
        }
        Statement::Return(None) => "return".to_string(),
        Statement::Return(Some(v)) => format!("return {}", value(v)),
    }
}

fn method(out: &mut String, m: &MethodDecl) {
    let params: Vec<String> = m.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
    write!(out, "  method {}({}) -> {}", m.name, params.join(", "), m.ret).unwrap();
    for a in &m.attributes {
        write!(out, " {a}").unwrap();
    }
    match &m.body {
        None => out.push('\n'),
        Some(body) => {
            out.push_str(" {\n");
            for s in body {
                let indent = if matches!(s, Statement::Label(_)) { "  " } else { "    " };
                writeln!(out, "{indent}{}", statement(s)).unwrap();
            }
            out.push_str("  }\n");
        }
    }
}

pub(crate) fn render(program: &Program) -> String {
    let mut out = String::new();
    for (i, c) in program.classes().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let kw = match c.kind {
            ClassKind::Class => "class",
            ClassKind::Interface => "interface",
        };
        write!(out, "{kw} {}", c.name).unwrap();
        if let Some(s) = &c.superclass {
            write!(out, " extends {s}").unwrap();
        }
        if !c.interfaces.is_empty() {
            let word = if c.is_interface() { "extends" } else { "implements" };
            write!(out, " {word} {}", c.interfaces.join(", ")).unwrap();
        }
        for a in &c.attributes {
            write!(out, " {a}").unwrap();
        }
        out.push_str(" {\n");
        for f in &c.fields {
            writeln!(out, "  field {}: {}", f.name, f.ty).unwrap();
        }
        for m in &c.methods {
            method(&mut out, m);
        }
        out.push_str("}\n");
    }
    out
}
