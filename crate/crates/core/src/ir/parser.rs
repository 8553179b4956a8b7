use std::collections::{BTreeSet, HashSet};

use super::lexer::{tokenize, Pos, Tok, Token};
use super::{
    BinOp, ClassDecl, ClassKind, CmpOp, CondExpr, Constant, Expr, FieldAccess, FieldDecl, FieldRef, Invoke, InvokeKind,
    IrError, MethodDecl, MethodRef, Param, Statement, Type, UnOp, Value,
};

const KEYWORDS: &[&str] = &[
    "const",
    "invoke",
    "field",
    "new",
    "cast",
    "lengthof",
    "instanceof",
    "neg",
    "not",
    "if",
    "goto",
    "switch",
    "return",
    "throw",
    "true",
    "false",
    "null",
    "on",
    "case",
    "default",
    "method",
    "class",
    "interface",
];

/// Source positions kept alongside a parsed class for later validation.
#[derive(Debug, Clone)]
pub(crate) struct ClassSpans {
    pub pos: Pos,
    pub fields: Vec<Pos>,
    pub methods: Vec<MethodSpans>,
}

#[derive(Debug, Clone)]
pub(crate) struct MethodSpans {
    pub pos: Pos,
    pub stmts: Vec<Pos>,
}

pub(crate) struct RawClass {
    pub decl: ClassDecl,
    pub spans: ClassSpans,
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

pub(crate) fn parse_classes(text: &str) -> Result<Vec<RawClass>, IrError> {
    let mut p = Parser { toks: tokenize(text)?, at: 0 };
    let mut out = Vec::new();
    loop {
        p.skip_newlines();
        if p.peek() == &Tok::Eof {
            break;
        }
        out.push(p.class()?);
    }
    Ok(out)
}

fn placeholder_field(path: &str) -> FieldRef {
    let (class, name) = path.rsplit_once('.').unwrap_or(("", path));
    FieldRef { class: class.to_string(), name: name.to_string(), ty: Type::unknown() }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.at + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, IrError> {
        Err(IrError::syntax(self.pos(), msg))
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
        }
    }

    fn skip_newlines(&mut self) {
        while self.peek() == &Tok::Newline {
            self.bump();
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), IrError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", Self::describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), IrError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", Self::describe(self.peek())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, IrError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected {what}, found {}", Self::describe(&other))),
        }
    }

    /// A simple (undotted, non-keyword) name: locals, labels, members.
    fn simple_name(&mut self, what: &str) -> Result<String, IrError> {
        let pos = self.pos();
        let s = self.ident(what)?;
        if s.contains('.') || KEYWORDS.contains(&s.as_str()) {
            return Err(IrError::syntax(pos, format!("`{s}` is not a valid {what}")));
        }
        Ok(s)
    }

    fn end_of_line(&mut self) -> Result<(), IrError> {
        match self.peek() {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::Sym("}") | Tok::Eof => Ok(()),
            other => self.err(format!("expected end of line, found {}", Self::describe(other))),
        }
    }

    fn ty(&mut self) -> Result<Type, IrError> {
        let mut name = self.ident("type")?;
        while self.is_sym("[") && self.peek_at(1) == &Tok::Sym("]") {
            self.bump();
            self.bump();
            name.push_str("[]");
        }
        Ok(Type::new(name))
    }

    fn name_list(&mut self) -> Result<Vec<String>, IrError> {
        let mut v = vec![self.ident("type name")?];
        while self.is_sym(",") {
            self.bump();
            v.push(self.ident("type name")?);
        }
        Ok(v)
    }

    fn class(&mut self) -> Result<RawClass, IrError> {
        let pos = self.pos();
        let kind = if self.is_kw("class") {
            ClassKind::Class
        } else if self.is_kw("interface") {
            ClassKind::Interface
        } else {
            return self.err(format!("expected `class` or `interface`, found {}", Self::describe(self.peek())));
        };
        self.bump();
        let name = self.ident("class name")?;
        let mut superclass = None;
        let mut interfaces = Vec::new();
        let mut attributes = BTreeSet::new();
        loop {
            if self.is_kw("extends") {
                self.bump();
                match kind {
                    ClassKind::Class => superclass = Some(self.ident("superclass")?),
                    ClassKind::Interface => interfaces.extend(self.name_list()?),
                }
            } else if self.is_kw("implements") {
                if kind == ClassKind::Interface {
                    return self.err("interfaces use `extends`, not `implements`");
                }
                self.bump();
                interfaces.extend(self.name_list()?);
            } else if self.is_sym("{") {
                break;
            } else {
                attributes.insert(self.simple_name("class attribute")?);
            }
        }
        self.expect_sym("{")?;
        let mut decl =
            ClassDecl { name, kind, superclass, interfaces, fields: Vec::new(), methods: Vec::new(), attributes };
        let mut spans = ClassSpans { pos, fields: Vec::new(), methods: Vec::new() };
        loop {
            self.skip_newlines();
            if self.is_sym("}") {
                self.bump();
                break;
            }
            let mpos = self.pos();
            if self.is_kw("field") {
                self.bump();
                let fname = self.simple_name("field name")?;
                self.expect_sym(":")?;
                let ty = self.ty()?;
                self.end_of_line()?;
                decl.fields.push(FieldDecl { name: fname, ty });
                spans.fields.push(mpos);
            } else if self.is_kw("method") {
                let (m, ms) = self.method(&decl.name)?;
                decl.methods.push(m);
                spans.methods.push(ms);
            } else {
                return self.err(format!("expected `field`, `method` or `}}`, found {}", Self::describe(self.peek())));
            }
        }
        self.end_of_line()?;
        Ok(RawClass { decl, spans })
    }

    fn method(&mut self, class: &str) -> Result<(MethodDecl, MethodSpans), IrError> {
        let pos = self.pos();
        self.expect_kw("method")?;
        let name = self.simple_name("method name")?;
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.is_sym(")") {
            loop {
                let pname = self.simple_name("parameter name")?;
                self.expect_sym(":")?;
                let ty = self.ty()?;
                params.push(Param { name: pname, ty });
                if self.is_sym(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        self.expect_sym("->")?;
        let ret = self.ty()?;
        let mut attributes = BTreeSet::new();
        while let Tok::Ident(_) = self.peek() {
            attributes.insert(self.simple_name("method attribute")?);
        }
        let mut spans = MethodSpans { pos, stmts: Vec::new() };
        let body = if self.is_sym("{") {
            self.bump();
            let mut stmts = Vec::new();
            loop {
                self.skip_newlines();
                if self.is_sym("}") {
                    self.bump();
                    break;
                }
                spans.stmts.push(self.pos());
                stmts.push(self.statement()?);
                self.end_of_line()?;
            }
            if stmts.last().is_none_or(Statement::falls_through) {
                stmts.push(Statement::Return(None));
                spans.stmts.push(pos);
            }
            Some(stmts)
        } else {
            None
        };
        self.end_of_line()?;
        let m = MethodDecl { class: class.to_string(), name, params, ret, body, attributes };
        if let Some(body) = &m.body {
            check_body(&m, body, &spans)?;
        }
        Ok((m, spans))
    }

    fn constant(&mut self) -> Result<Constant, IrError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Constant::Int(v))
            }
            Tok::Sym("-") => {
                self.bump();
                match self.peek().clone() {
                    Tok::Int(v) => {
                        self.bump();
                        Ok(Constant::Int(-v))
                    }
                    other => self.err(format!("expected integer after `-`, found {}", Self::describe(&other))),
                }
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Constant::Str(s))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Constant::Bool(s == "true"))
            }
            Tok::Ident(s) if s == "null" => {
                self.bump();
                Ok(Constant::Null)
            }
            other => self.err(format!("expected literal, found {}", Self::describe(&other))),
        }
    }

    fn value(&mut self) -> Result<Value, IrError> {
        match self.peek() {
            Tok::Ident(s) if !matches!(s.as_str(), "true" | "false" | "null") => {
                Ok(Value::Local(self.simple_name("local")?))
            }
            _ => Ok(Value::Const(self.constant()?)),
        }
    }

    fn member_path(&mut self, what: &str) -> Result<(String, String), IrError> {
        let pos = self.pos();
        let path = self.ident(what)?;
        match path.rsplit_once('.') {
            Some((c, m)) if !c.is_empty() && !m.is_empty() => Ok((c.to_string(), m.to_string())),
            _ => Err(IrError::syntax(pos, format!("expected `Class.member`, found `{path}`"))),
        }
    }

    fn opt_on(&mut self) -> Result<Option<String>, IrError> {
        if self.is_kw("on") {
            self.bump();
            Ok(Some(self.simple_name("receiver local")?))
        } else {
            Ok(None)
        }
    }

    fn field_access(&mut self) -> Result<FieldAccess, IrError> {
        let (class, name) = self.member_path("field reference")?;
        let object = self.opt_on()?;
        Ok(FieldAccess { field: placeholder_field(&format!("{class}.{name}")), object })
    }

    fn invoke(&mut self, result: Option<String>) -> Result<Invoke, IrError> {
        self.expect_kw("invoke")?;
        let kind = match self.ident("invoke kind")?.as_str() {
            "static" => InvokeKind::Static,
            "virtual" => InvokeKind::Virtual,
            "special" => InvokeKind::Special,
            other => return self.err(format!("unknown invoke kind `{other}`")),
        };
        let (class, name) = self.member_path("method reference")?;
        self.expect_sym("(")?;
        let mut args = Vec::new();
        if !self.is_sym(")") {
            loop {
                args.push(self.value()?);
                if self.is_sym(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        let receiver = self.opt_on()?;
        match (kind, &receiver) {
            (InvokeKind::Static, Some(_)) => return self.err("static invoke cannot have a receiver"),
            (InvokeKind::Virtual | InvokeKind::Special, None) => {
                return self.err(format!("{} invoke needs `on <local>`", kind.keyword()))
            }
            _ => {}
        }
        let target = MethodRef::unresolved(&class, &name, args.len());
        Ok(Invoke { result, kind, class, name, args, receiver, target })
    }

    fn statement(&mut self) -> Result<Statement, IrError> {
        let Tok::Ident(word) = self.peek().clone() else {
            return self.err(format!("expected statement, found {}", Self::describe(self.peek())));
        };
        match word.as_str() {
            "if" => {
                self.bump();
                let cond = if self.is_kw("not") {
                    self.bump();
                    CondExpr::Not(self.value()?)
                } else {
                    let a = self.value()?;
                    let op = match self.peek() {
                        Tok::Sym(s) => CmpOp::from_symbol(s),
                        _ => None,
                    };
                    let Some(op) = op else {
                        return self
                            .err(format!("expected comparison operator, found {}", Self::describe(self.peek())));
                    };
                    self.bump();
                    CondExpr::Compare(op, a, self.value()?)
                };
                self.expect_kw("goto")?;
                let target = self.simple_name("label")?;
                Ok(Statement::If { cond, target })
            }
            "switch" => {
                self.bump();
                let local = self.simple_name("local")?;
                self.expect_sym("{")?;
                let mut cases = Vec::new();
                let default = loop {
                    self.skip_newlines();
                    if self.is_kw("case") {
                        self.bump();
                        let c = self.constant()?;
                        self.expect_sym(":")?;
                        cases.push((c, self.simple_name("label")?));
                    } else if self.is_kw("default") {
                        self.bump();
                        self.expect_sym(":")?;
                        break self.simple_name("label")?;
                    } else {
                        return self
                            .err(format!("expected `case` or `default`, found {}", Self::describe(self.peek())));
                    }
                };
                self.skip_newlines();
                self.expect_sym("}")?;
                Ok(Statement::Switch { local, cases, default })
            }
            "goto" => {
                self.bump();
                Ok(Statement::Goto(self.simple_name("label")?))
            }
            "return" => {
                self.bump();
                if matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Sym("}")) {
                    Ok(Statement::Return(None))
                } else {
                    Ok(Statement::Return(Some(self.value()?)))
                }
            }
            "throw" => {
                self.bump();
                self.expect_kw("new")?;
                let exception = self.ident("exception type")?;
                self.expect_sym("(")?;
                let arg = if self.is_sym(")") { None } else { Some(self.simple_name("local")?) };
                self.expect_sym(")")?;
                Ok(Statement::Throw { exception, arg })
            }
            "invoke" => Ok(Statement::Invoke(self.invoke(None)?)),
            "field" => {
                self.bump();
                let field = self.field_access()?;
                self.expect_sym("=")?;
                Ok(Statement::FieldWrite { field, value: self.value()? })
            }
            _ if self.peek_at(1) == &Tok::Sym(":")
                && matches!(self.peek_at(2), Tok::Newline | Tok::Eof | Tok::Sym("}")) =>
            {
                let label = self.simple_name("label")?;
                self.bump();
                Ok(Statement::Label(label))
            }
            _ if self.peek_at(1) == &Tok::Sym("[") => {
                let base = self.simple_name("local")?;
                self.expect_sym("[")?;
                let index = self.value()?;
                self.expect_sym("]")?;
                self.expect_sym("=")?;
                Ok(Statement::ArrayWrite { base, index, value: self.value()? })
            }
            _ => {
                let local = self.simple_name("local")?;
                self.expect_sym("=")?;
                self.assignment(local)
            }
        }
    }

    fn assignment(&mut self, local: String) -> Result<Statement, IrError> {
        let assign = |expr| Ok(Statement::Assign { local: local.clone(), expr });
        if let Tok::Ident(word) = self.peek().clone() {
            match word.as_str() {
                "const" => {
                    self.bump();
                    return assign(Expr::Const(self.constant()?));
                }
                "invoke" => return Ok(Statement::Invoke(self.invoke(Some(local.clone()))?)),
                "field" => {
                    self.bump();
                    return assign(Expr::FieldRead(self.field_access()?));
                }
                "new" => {
                    self.bump();
                    return assign(Expr::New(self.ty()?));
                }
                "cast" => {
                    self.bump();
                    let t = self.ty()?;
                    return assign(Expr::Cast(t, self.value()?));
                }
                "instanceof" => {
                    self.bump();
                    let t = self.ty()?;
                    return assign(Expr::InstanceOf(t, self.value()?));
                }
                "lengthof" => {
                    self.bump();
                    return assign(Expr::LengthOf(self.value()?));
                }
                "neg" | "not" => {
                    self.bump();
                    let op = if word == "neg" { UnOp::Neg } else { UnOp::Not };
                    return assign(Expr::UnOp(op, self.value()?));
                }
                _ if self.peek_at(1) == &Tok::Sym("[") && !KEYWORDS.contains(&word.as_str()) => {
                    let base = self.simple_name("local")?;
                    self.expect_sym("[")?;
                    let index = self.value()?;
                    self.expect_sym("]")?;
                    return assign(Expr::ArrayRead { base, index });
                }
                _ => {}
            }
        }
        let start = self.pos();
        let a = self.value()?;
        let op = match self.peek() {
            Tok::Sym(s) => BinOp::from_symbol(s),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let b = self.value()?;
            return assign(Expr::BinOp(op, a, b));
        }
        match a {
            Value::Local(l) => assign(Expr::Local(l)),
            Value::Const(_) => Err(IrError::syntax(start, "literal assignment needs `const`")),
        }
    }
}

fn check_body(m: &MethodDecl, body: &[Statement], spans: &MethodSpans) -> Result<(), IrError> {
    let mut labels = HashSet::new();
    for (i, s) in body.iter().enumerate() {
        if let Statement::Label(l) = s {
            if !labels.insert(l.as_str()) {
                return Err(IrError::Duplicate { pos: spans.stmts[i], name: l.clone() });
            }
        }
    }
    let mut defined: HashSet<&str> = m.params.iter().map(|p| p.name.as_str()).collect();
    defined.insert("this");
    defined.extend(body.iter().filter_map(Statement::def));
    for (i, s) in body.iter().enumerate() {
        for l in s.jump_targets() {
            if !labels.contains(l) {
                return Err(IrError::DanglingLabel { pos: spans.stmts[i], label: l.to_string() });
            }
        }
        for u in s.uses() {
            if !defined.contains(u) {
                return Err(IrError::invalid(spans.stmts[i], format!("undefined local `{u}`")));
            }
        }
    }
    Ok(())
}
