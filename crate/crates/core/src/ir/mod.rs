//! Textual three-address IR for service code.
//!
//! A [`Program`] is a set of classes and interfaces. Methods carry flat
//! statement bodies in the style of Jimple: every value is a local or a
//! literal, control flow is expressed with labels, `if`, `switch` and
//! `goto`, and calls name the statically declared class of the receiver.
//! Classes marked `external` stand in for library code whose bodies are not
//! analyzed.

pub mod cfg;
mod hierarchy;
mod lexer;
mod parser;
mod render;
mod types;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use cfg::{build_cfg, ControlFlowGraph};
pub use lexer::Pos;
pub use types::{LocalTypes, Type};

/// Errors produced while reading or validating IR text.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum IrError {
    #[error("{}:{}: syntax error: {msg}", pos.line, pos.col)]
    Syntax { pos: Pos, msg: String },
    #[error("{}:{}: unresolved type `{name}`", pos.line, pos.col)]
    UnresolvedType { pos: Pos, name: String },
    #[error("{}:{}: duplicate declaration `{name}`", pos.line, pos.col)]
    Duplicate { pos: Pos, name: String },
    #[error("{}:{}: dangling label `{label}`", pos.line, pos.col)]
    DanglingLabel { pos: Pos, label: String },
    #[error("{}:{}: {msg}", pos.line, pos.col)]
    Invalid { pos: Pos, msg: String },
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("method {0} has no body")]
    NoBody(MethodRef),
}

impl IrError {
    pub(crate) fn syntax(pos: Pos, msg: impl Into<String>) -> Self {
        IrError::Syntax { pos, msg: msg.into() }
    }

    pub(crate) fn invalid(pos: Pos, msg: impl Into<String>) -> Self {
        IrError::Invalid { pos, msg: msg.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    Class,
    Interface,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: String,
    pub kind: ClassKind,
    pub superclass: Option<String>,
    pub interfaces: Vec<String>,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodDecl>,
    pub attributes: BTreeSet<String>,
}

impl ClassDecl {
    pub fn is_external(&self) -> bool {
        self.attributes.contains("external")
    }

    pub fn is_interface(&self) -> bool {
        self.kind == ClassKind::Interface
    }

    /// Declared supertypes: the superclass first, then interfaces in order.
    pub fn direct_supertypes(&self) -> impl Iterator<Item = &str> {
        self.superclass.iter().chain(self.interfaces.iter()).map(String::as_str)
    }

    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDecl {
    /// Declaring class; filled in when the program is assembled.
    pub class: String,
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Type,
    pub body: Option<Vec<Statement>>,
    pub attributes: BTreeSet<String>,
}

impl MethodDecl {
    pub fn sig(&self) -> MethodRef {
        MethodRef {
            class: self.class.clone(),
            name: self.name.clone(),
            params: self.params.iter().map(|p| p.ty.clone()).collect(),
            ret: self.ret.clone(),
        }
    }

    pub fn has_attribute(&self, flag: &str) -> bool {
        self.attributes.contains(flag)
    }

    pub fn body(&self) -> &[Statement] {
        self.body.as_deref().unwrap_or(&[])
    }

    pub fn param_index(&self, local: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == local)
    }
}

/// Reference to a method by declaring class and signature.
///
/// Renders as `<pkg.Class: ret name(p1,p2)>`; parsing the rendered form gives
/// back the same reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodRef {
    pub class: String,
    pub name: String,
    pub params: Vec<Type>,
    pub ret: Type,
}

/// Reference to a field by declaring class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldRef {
    pub class: String,
    pub name: String,
    pub ty: Type,
}

fn split_class(class: &str) -> (&str, &str) {
    match class.rfind('.') {
        Some(i) => (&class[..i], &class[i + 1..]),
        None => ("", class),
    }
}

/// The parts of a member that matcher expressions look at.
pub trait Member {
    fn qualified_class(&self) -> &str;
    fn member_name(&self) -> &str;

    /// Dotted package prefix of the declaring class (empty in the default package).
    fn package(&self) -> &str {
        split_class(self.qualified_class()).0
    }

    /// Simple class name, with `$` separating nested classes.
    fn simple_class(&self) -> &str {
        split_class(self.qualified_class()).1
    }
}

impl Member for MethodRef {
    fn qualified_class(&self) -> &str {
        &self.class
    }
    fn member_name(&self) -> &str {
        &self.name
    }
}

impl Member for FieldRef {
    fn qualified_class(&self) -> &str {
        &self.class
    }
    fn member_name(&self) -> &str {
        &self.name
    }
}

impl MethodRef {
    /// Placeholder for a call whose target cannot be found in the program.
    pub fn unresolved(class: &str, name: &str, arity: usize) -> Self {
        MethodRef {
            class: class.to_string(),
            name: name.to_string(),
            params: vec![Type::unknown(); arity],
            ret: Type::unknown(),
        }
    }

    pub fn is_unresolved(&self) -> bool {
        self.ret.is_unknown()
    }

    /// Same name and parameter types, ignoring class and return type.
    pub fn same_subsignature(&self, other: &MethodRef) -> bool {
        self.name == other.name && self.params == other.params
    }
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}: {} {}(", self.class, self.ret, self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")>")
    }
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}: {} {}>", self.class, self.ty, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed signature `{0}`")]
pub struct SignatureError(pub String);

fn is_type_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '.' | '[' | ']' | '?'))
}

impl FromStr for MethodRef {
    type Err = SignatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || SignatureError(s.to_string());
        let inner = s.strip_prefix('<').and_then(|r| r.strip_suffix(")>")).ok_or_else(err)?;
        let (class, rest) = inner.split_once(": ").ok_or_else(err)?;
        let (ret, rest) = rest.split_once(' ').ok_or_else(err)?;
        let (name, params) = rest.split_once('(').ok_or_else(err)?;
        let params: Vec<Type> = if params.is_empty() { Vec::new() } else { params.split(',').map(Type::new).collect() };
        if !is_type_name(class)
            || !is_type_name(ret)
            || name.is_empty()
            || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$' || c == '<' || c == '>')
            || params.iter().any(|p| !is_type_name(p.as_str()))
        {
            return Err(err());
        }
        Ok(MethodRef { class: class.to_string(), name: name.to_string(), params, ret: Type::new(ret) })
    }
}

impl Serialize for MethodRef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MethodRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A statement position: method plus index into its body.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StmtRef {
    pub method: MethodRef,
    pub index: usize,
}

impl StmtRef {
    pub fn new(method: MethodRef, index: usize) -> Self {
        StmtRef { method, index }
    }
}

impl fmt::Display for StmtRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.method, self.index)
    }
}

impl Serialize for StmtRef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Int(i64),
    Bool(bool),
    Str(String),
    Null,
}

impl Constant {
    pub fn ty(&self) -> Option<Type> {
        match self {
            Constant::Int(_) => Some(Type::new("int")),
            Constant::Bool(_) => Some(Type::new("boolean")),
            Constant::Str(_) => Some(Type::string()),
            Constant::Null => None,
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(v) => write!(f, "{v}"),
            Constant::Bool(v) => write!(f, "{v}"),
            Constant::Str(s) => write!(f, "{}", serde_json::to_string(s).expect("string encodes")),
            Constant::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Local(String),
    Const(Constant),
}

impl Value {
    pub fn as_local(&self) -> Option<&str> {
        match self {
            Value::Local(l) => Some(l),
            Value::Const(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Local(l) => f.write_str(l),
            Value::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Ushr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl BinOp {
    pub const ALL: [BinOp; 17] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Rem,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
        BinOp::Shl,
        BinOp::Shr,
        BinOp::Ushr,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Xor => "^",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::Ushr => ">>>",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        BinOp::ALL.into_iter().find(|op| op.symbol() == s)
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

impl UnOp {
    pub fn keyword(self) -> &'static str {
        match self {
            UnOp::Neg => "neg",
            UnOp::Not => "not",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::Not => "!",
        }
    }
}

/// A field access as written in a statement, resolved to its declaring class.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldAccess {
    pub field: FieldRef,
    pub object: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Constant),
    Local(String),
    FieldRead(FieldAccess),
    ArrayRead { base: String, index: Value },
    BinOp(BinOp, Value, Value),
    UnOp(UnOp, Value),
    Cast(Type, Value),
    New(Type),
    LengthOf(Value),
    InstanceOf(Type, Value),
}

impl Expr {
    /// Locals read by the expression.
    pub fn uses(&self) -> Vec<&str> {
        match self {
            Expr::Const(_) | Expr::New(_) => Vec::new(),
            Expr::Local(l) => vec![l.as_str()],
            Expr::FieldRead(fa) => fa.object.as_deref().into_iter().collect(),
            Expr::ArrayRead { base, index } => std::iter::once(base.as_str()).chain(index.as_local()).collect(),
            Expr::BinOp(_, a, b) => a.as_local().into_iter().chain(b.as_local()).collect(),
            Expr::UnOp(_, a) | Expr::Cast(_, a) | Expr::LengthOf(a) | Expr::InstanceOf(_, a) => {
                a.as_local().into_iter().collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InvokeKind {
    Static,
    Virtual,
    Special,
}

impl InvokeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            InvokeKind::Static => "static",
            InvokeKind::Virtual => "virtual",
            InvokeKind::Special => "special",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Invoke {
    pub result: Option<String>,
    pub kind: InvokeKind,
    /// Statically declared receiver class, as written.
    pub class: String,
    pub name: String,
    pub args: Vec<Value>,
    pub receiver: Option<String>,
    /// Declared target found by hierarchy lookup, or an unresolved placeholder.
    pub target: MethodRef,
}

impl Invoke {
    /// Value at a call position: -1 is the receiver, 0.. are arguments.
    pub fn value_at(&self, position: i32) -> Option<Value> {
        if position == -1 {
            self.receiver.clone().map(Value::Local)
        } else {
            usize::try_from(position).ok().and_then(|i| self.args.get(i).cloned())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge].into_iter().find(|op| op.symbol() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CondExpr {
    Compare(CmpOp, Value, Value),
    Not(Value),
}

impl CondExpr {
    pub fn operands(&self) -> Vec<&Value> {
        match self {
            CondExpr::Compare(_, a, b) => vec![a, b],
            CondExpr::Not(v) => vec![v],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Statement {
    Assign { local: String, expr: Expr },
    FieldWrite { field: FieldAccess, value: Value },
    ArrayWrite { base: String, index: Value, value: Value },
    Invoke(Invoke),
    If { cond: CondExpr, target: String },
    Switch { local: String, cases: Vec<(Constant, String)>, default: String },
    Goto(String),
    Label(String),
    Throw { exception: String, arg: Option<String> },
    Return(Option<Value>),
}

impl Statement {
    pub fn is_conditional(&self) -> bool {
        matches!(self, Statement::If { .. } | Statement::Switch { .. })
    }

    /// The local this statement assigns, if any.
    pub fn def(&self) -> Option<&str> {
        match self {
            Statement::Assign { local, .. } => Some(local),
            Statement::Invoke(inv) => inv.result.as_deref(),
            _ => None,
        }
    }

    /// Locals read by this statement.
    pub fn uses(&self) -> Vec<&str> {
        match self {
            Statement::Assign { expr, .. } => expr.uses(),
            Statement::FieldWrite { field, value } => {
                value.as_local().into_iter().chain(field.object.as_deref()).collect()
            }
            Statement::ArrayWrite { base, index, value } => {
                let mut v = vec![base.as_str()];
                v.extend(index.as_local());
                v.extend(value.as_local());
                v
            }
            Statement::Invoke(inv) => {
                let mut v: Vec<&str> = inv.receiver.as_deref().into_iter().collect();
                v.extend(inv.args.iter().filter_map(Value::as_local));
                v
            }
            Statement::If { cond, .. } => cond.operands().into_iter().filter_map(Value::as_local).collect(),
            Statement::Switch { local, .. } => vec![local.as_str()],
            Statement::Throw { arg, .. } => arg.as_deref().into_iter().collect(),
            Statement::Return(Some(v)) => v.as_local().into_iter().collect(),
            Statement::Goto(_) | Statement::Label(_) | Statement::Return(None) => Vec::new(),
        }
    }

    /// Labels this statement may jump to.
    pub fn jump_targets(&self) -> Vec<&str> {
        match self {
            Statement::If { target, .. } | Statement::Goto(target) => vec![target.as_str()],
            Statement::Switch { cases, default, .. } => {
                cases.iter().map(|(_, l)| l.as_str()).chain(std::iter::once(default.as_str())).collect()
            }
            _ => Vec::new(),
        }
    }

    /// True when control can continue to the next statement in sequence.
    pub fn falls_through(&self) -> bool {
        !matches!(self, Statement::Goto(_) | Statement::Return(_) | Statement::Throw { .. } | Statement::Switch { .. })
    }
}

/// A parsed and resolved program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    classes: Vec<ClassDecl>,
    index: BTreeMap<String, usize>,
    /// Direct subtypes per type: classes extending or implementing it.
    children: BTreeMap<String, BTreeSet<String>>,
}

impl Program {
    pub fn classes(&self) -> &[ClassDecl] {
        &self.classes
    }

    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.index.get(name).map(|&i| &self.classes[i])
    }

    pub fn method(&self, m: &MethodRef) -> Option<&MethodDecl> {
        self.class(&m.class)?
            .methods
            .iter()
            .find(|d| d.name == m.name && d.params.iter().map(|p| &p.ty).eq(m.params.iter()))
    }

    /// All methods in declaration order.
    pub fn methods(&self) -> impl Iterator<Item = &MethodDecl> {
        self.classes.iter().flat_map(|c| c.methods.iter())
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Parses IR text into a resolved [`Program`].
pub fn parse_program(text: &str) -> Result<Program, IrError> {
    parse_program_sources(&[text])
}

/// Parses several IR sources (e.g. one per class) into a single program.
pub fn parse_program_sources(texts: &[&str]) -> Result<Program, IrError> {
    let mut raw = Vec::new();
    for text in texts {
        raw.extend(parser::parse_classes(text)?);
    }
    hierarchy::assemble(raw)
}

/// Checks one source for syntax and per-class errors without assembling a
/// program, so multi-file callers can say which file is at fault.
pub fn check_source(text: &str) -> Result<(), IrError> {
    parser::parse_classes(text).map(|_| ())
}

/// Renders a program back to IR text.
pub fn render_program(program: &Program) -> String {
    render::render(program)
}
