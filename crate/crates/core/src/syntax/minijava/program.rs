//! Whole-program view of a set of source files: name resolution ("build")
//! and a tree-walking interpreter that runs `*Test` classes ("test").

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::rc::Rc;
use std::time::Instant;

use super::ast::*;
use super::parser::parse_unit;

/// Step budget for one test method.
const MAX_STEPS: u64 = 2_000_000;
const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone)]
struct ClassInfo {
    fields: Vec<FieldDecl>,
    methods: HashMap<(String, usize), MethodDecl>,
}

impl ClassInfo {
    fn has_field(&self, name: &str) -> bool {
        self.fields.iter().any(|f| f.name == name)
    }
}

/// Resolved program built from every source file of a project.
#[derive(Debug, Clone)]
pub struct Program {
    classes: BTreeMap<String, ClassInfo>,
    /// Classes in declaration order (files in the order given).
    order: Vec<String>,
}

fn builtin_arity(name: &str) -> Option<&'static [usize]> {
    match name {
        "assertTrue" | "assertFalse" => Some(&[1]),
        "assertEquals" => Some(&[2]),
        "fail" => Some(&[0, 1]),
        _ => None,
    }
}

fn math_arity(name: &str) -> Option<usize> {
    match name {
        "abs" => Some(1),
        "max" | "min" => Some(2),
        _ => None,
    }
}

fn string_method_arity(name: &str) -> Option<usize> {
    match name {
        "length" => Some(0),
        "charAt" | "equals" => Some(1),
        _ => None,
    }
}

impl Program {
    /// Parses and resolves `files` (path, text). Returns every diagnostic on failure.
    pub fn build<'a>(
        files: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Program, Vec<String>> {
        let mut diags = Vec::new();
        let mut program = Program {
            classes: BTreeMap::new(),
            order: Vec::new(),
        };
        let mut units = Vec::new();
        for (path, text) in files {
            match parse_unit(text) {
                Ok(unit) => units.push((path.to_owned(), unit)),
                Err(e) => diags.push(format!("{path}: {e}")),
            }
        }
        for (path, unit) in &units {
            for class in &unit.classes {
                if program.classes.contains_key(&class.name) || class.name == "Math" {
                    diags.push(format!(
                        "{path}:{}: duplicate class {}",
                        class.line, class.name
                    ));
                    continue;
                }
                let mut info = ClassInfo {
                    fields: Vec::new(),
                    methods: HashMap::new(),
                };
                for member in &class.members {
                    match member {
                        Member::Field(f) => {
                            if info.has_field(&f.name) {
                                diags.push(format!("{path}:{}: duplicate field {}", f.line, f.name));
                            }
                            info.fields.push(f.clone());
                        }
                        Member::Method(m) => {
                            let key = (m.name.clone(), m.params.len());
                            if info.methods.insert(key, m.clone()).is_some() {
                                diags.push(format!(
                                    "{path}:{}: duplicate method {}/{}",
                                    m.line,
                                    m.name,
                                    m.params.len()
                                ));
                            }
                        }
                    }
                }
                program.order.push(class.name.clone());
                program.classes.insert(class.name.clone(), info);
            }
        }
        for (path, unit) in &units {
            for class in &unit.classes {
                let mut checker = Checker {
                    program: &program,
                    class: &class.name,
                    scopes: Vec::new(),
                    loops: 0,
                    path,
                    diags: &mut diags,
                };
                checker.class(class);
            }
        }
        if diags.is_empty() {
            Ok(program)
        } else {
            Err(diags)
        }
    }

    /// Test methods: zero-argument `test*` methods of classes named `*Test`,
    /// as `(class, method)` in declaration order.
    pub fn tests(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for class in &self.order {
            if !class.ends_with("Test") {
                continue;
            }
            let info = &self.classes[class];
            let mut names: Vec<(&String, usize)> = info
                .methods
                .values()
                .filter(|m| m.name.starts_with("test") && m.params.is_empty())
                .map(|m| (&m.name, m.line))
                .collect();
            names.sort_by_key(|&(n, line)| (line, n.clone()));
            out.extend(names.into_iter().map(|(n, _)| (class.clone(), n.clone())));
        }
        out
    }

    /// Runs one static method with fresh static state.
    pub fn run_method(
        &self,
        class: &str,
        method: &str,
        args: Vec<Value>,
        deadline: Option<Instant>,
    ) -> Result<Value, RunError> {
        let mut interp = Interp {
            program: self,
            statics: HashMap::new(),
            steps: 0,
            deadline,
            depth: 0,
        };
        interp.init_statics()?;
        interp.call(class, method, args)
    }

    /// Runs every test; stops early when the deadline passes.
    pub fn run_tests(&self, deadline: Option<Instant>) -> TestReport {
        let mut report = TestReport::default();
        for (class, method) in self.tests() {
            let name = format!("{class}.{method}");
            match self.run_method(&class, &method, Vec::new(), deadline) {
                Ok(_) => report.passed.push(name),
                Err(RunError::Timeout) => {
                    report.timed_out = true;
                    report.failed.push((name, "deadline expired".into()));
                    break;
                }
                Err(e) => report.failed.push((name, e.to_string())),
            }
        }
        report
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct TestReport {
    pub passed: Vec<String>,
    pub failed: Vec<(String, String)>,
    pub timed_out: bool,
}

impl TestReport {
    pub fn success(&self) -> bool {
        self.failed.is_empty() && !self.timed_out
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for p in &self.passed {
            out.push_str(&format!("PASS {p}\n"));
        }
        for (name, why) in &self.failed {
            out.push_str(&format!("FAIL {name}: {why}\n"));
        }
        out.push_str(&format!(
            "{} passed, {} failed\n",
            self.passed.len(),
            self.failed.len()
        ));
        out
    }
}

struct Checker<'a> {
    program: &'a Program,
    class: &'a str,
    scopes: Vec<HashSet<String>>,
    loops: usize,
    path: &'a str,
    diags: &'a mut Vec<String>,
}

impl Checker<'_> {
    fn report(&mut self, line: usize, msg: String) {
        self.diags.push(format!("{}:{line}: {msg}", self.path));
    }

    fn class(&mut self, class: &ClassDecl) {
        for member in &class.members {
            match member {
                Member::Field(f) => {
                    if let Some(init) = &f.init {
                        self.expr(init, f.line);
                    }
                }
                Member::Method(m) => {
                    self.scopes = vec![HashSet::new()];
                    for p in &m.params {
                        if !self.scopes[0].insert(p.name.clone()) {
                            self.report(m.line, format!("duplicate parameter {}", p.name));
                        }
                    }
                    self.block(&m.body);
                }
            }
        }
    }

    fn declare(&mut self, name: &str, line: usize) {
        if self.scopes.iter().any(|s| s.contains(name)) {
            self.report(line, format!("variable {name} is already defined"));
        }
        self.scopes.last_mut().expect("scope").insert(name.to_owned());
    }

    fn is_local(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.contains(name))
    }

    fn block(&mut self, b: &Block) {
        self.scopes.push(HashSet::new());
        for s in &b.stmts {
            self.stmt(s);
        }
        self.scopes.pop();
    }

    fn nested(&mut self, s: &Stmt) {
        self.scopes.push(HashSet::new());
        self.stmt(s);
        self.scopes.pop();
    }

    fn stmt(&mut self, s: &Stmt) {
        let line = s.line;
        match &s.kind {
            StmtKind::Block(b) => self.block(b),
            StmtKind::Empty | StmtKind::Return(None) => {}
            StmtKind::If {
                cond,
                then,
                otherwise,
            } => {
                self.expr(cond, line);
                self.nested(then);
                if let Some(e) = otherwise {
                    self.nested(e);
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(cond, line);
                self.loops += 1;
                self.nested(body);
                self.loops -= 1;
            }
            StmtKind::For {
                init,
                cond,
                update,
                body,
            } => {
                self.scopes.push(HashSet::new());
                match init {
                    Some(ForInit::Local { name, init, .. }) => {
                        if let Some(e) = init {
                            self.expr(e, line);
                        }
                        self.declare(name, line);
                    }
                    Some(ForInit::Exprs(es)) => es.iter().for_each(|e| self.expr(e, line)),
                    None => {}
                }
                if let Some(c) = cond {
                    self.expr(c, line);
                }
                for u in update {
                    self.expr(u, line);
                }
                self.loops += 1;
                self.nested(body);
                self.loops -= 1;
                self.scopes.pop();
            }
            StmtKind::Return(Some(e)) | StmtKind::Expr(e) => self.expr(e, line),
            StmtKind::Break | StmtKind::Continue => {
                if self.loops == 0 {
                    self.report(line, "break/continue outside of a loop".into());
                }
            }
            StmtKind::Local { name, init, .. } => {
                if let Some(e) = init {
                    self.expr(e, line);
                }
                self.declare(name, line);
            }
        }
    }

    fn is_class(&self, name: &str) -> bool {
        !self.is_local(name) && self.program.classes.contains_key(name)
    }

    fn expr(&mut self, e: &Expr, line: usize) {
        match e {
            Expr::Int(_) | Expr::Str(_) | Expr::Bool(_) | Expr::Null => {}
            Expr::Name(n) => {
                let own_field = self.program.classes[self.class].has_field(n);
                if !self.is_local(n) && !own_field {
                    self.report(line, format!("cannot find symbol {n}"));
                }
            }
            Expr::Assign { target, value, .. } => {
                self.expr(target, line);
                self.expr(value, line);
            }
            Expr::Binary { lhs, rhs, .. } => {
                self.expr(lhs, line);
                self.expr(rhs, line);
            }
            Expr::Unary { op, operand } | Expr::Postfix { op, operand } => {
                if (op == "++" || op == "--")
                    && !matches!(
                        **operand,
                        Expr::Name(_) | Expr::Index { .. } | Expr::Field { .. }
                    )
                {
                    self.report(line, format!("{op} needs a variable"));
                }
                self.expr(operand, line);
            }
            Expr::Ternary {
                cond,
                then,
                otherwise,
            } => {
                self.expr(cond, line);
                self.expr(then, line);
                self.expr(otherwise, line);
            }
            Expr::Call {
                qualifier,
                name,
                args,
            } => {
                for a in args {
                    self.expr(a, line);
                }
                let arity = args.len();
                match qualifier.as_deref() {
                    None => {
                        let own = self.program.classes[self.class]
                            .methods
                            .contains_key(&(name.clone(), arity));
                        let builtin = builtin_arity(name).is_some_and(|a| a.contains(&arity));
                        if !own && !builtin {
                            self.report(line, format!("cannot find method {name}/{arity}"));
                        }
                    }
                    Some(Expr::Name(q)) if q == "Math" && !self.is_local(q) => {
                        if math_arity(name) != Some(arity) {
                            self.report(line, format!("cannot find method Math.{name}/{arity}"));
                        }
                    }
                    Some(Expr::Name(q)) if self.is_class(q) => {
                        if !self.program.classes[q.as_str()]
                            .methods
                            .contains_key(&(name.clone(), arity))
                        {
                            self.report(line, format!("cannot find method {q}.{name}/{arity}"));
                        }
                    }
                    Some(q) => {
                        self.expr(q, line);
                        if string_method_arity(name) != Some(arity) {
                            self.report(line, format!("cannot find method .{name}/{arity}"));
                        }
                    }
                }
            }
            Expr::Field { target, name } => match target.as_ref() {
                Expr::Name(q) if self.is_class(q) => {
                    if !self.program.classes[q.as_str()].has_field(name) {
                        self.report(line, format!("cannot find field {q}.{name}"));
                    }
                }
                other => {
                    self.expr(other, line);
                    if name != "length" {
                        self.report(line, format!("cannot find field .{name}"));
                    }
                }
            },
            Expr::Index { target, index } => {
                self.expr(target, line);
                self.expr(index, line);
            }
            Expr::NewArray { size, .. } => self.expr(size, line),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Str(Rc<str>),
    Array(Rc<RefCell<Vec<Value>>>),
    Null,
    Void,
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Array(a), Value::Array(b)) => Rc::ptr_eq(a, b),
            (Value::Null, Value::Null) | (Value::Void, Value::Void) => true,
            _ => false,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "{s}"),
            Value::Array(a) => write!(f, "array[{}]", a.borrow().len()),
            Value::Null => f.write_str("null"),
            Value::Void => f.write_str("void"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunError {
    Exception(String),
    AssertionFailed(String),
    StepLimit,
    Timeout,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Exception(m) => write!(f, "exception: {m}"),
            RunError::AssertionFailed(m) => write!(f, "assertion failed: {m}"),
            RunError::StepLimit => f.write_str("step limit exceeded"),
            RunError::Timeout => f.write_str("deadline expired"),
        }
    }
}

enum Flow {
    Normal,
    Break,
    Continue,
    Return(Value),
}

struct Interp<'a> {
    program: &'a Program,
    statics: HashMap<(String, String), Value>,
    steps: u64,
    deadline: Option<Instant>,
    depth: usize,
}

struct Frame {
    class: String,
    scopes: Vec<HashMap<String, Value>>,
}

impl Frame {
    fn lookup(&mut self, name: &str) -> Option<&mut Value> {
        self.scopes.iter_mut().rev().find_map(|s| s.get_mut(name))
    }
}

fn exception(msg: impl Into<String>) -> RunError {
    RunError::Exception(msg.into())
}

fn default_value(ty: &TypeName) -> Value {
    if ty.dims > 0 {
        return Value::Null;
    }
    match ty.name.as_str() {
        "int" | "long" | "short" | "byte" => Value::Int(0),
        "boolean" => Value::Bool(false),
        _ => Value::Null,
    }
}

fn unescape(raw: &str) -> String {
    let inner = &raw[1..raw.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some(other) => out.push(other),
                None => {}
            }
        } else {
            out.push(c);
        }
    }
    out
}

impl Interp<'_> {
    fn tick(&mut self) -> Result<(), RunError> {
        self.steps += 1;
        if self.steps > MAX_STEPS {
            return Err(RunError::StepLimit);
        }
        if self.steps % 1024 == 0 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    return Err(RunError::Timeout);
                }
            }
        }
        Ok(())
    }

    fn init_statics(&mut self) -> Result<(), RunError> {
        for class in &self.program.order {
            let info = &self.program.classes[class];
            for f in &info.fields {
                let value = match &f.init {
                    Some(e) => {
                        let mut frame = Frame {
                            class: class.clone(),
                            scopes: vec![HashMap::new()],
                        };
                        self.eval(e, &mut frame)?
                    }
                    None => default_value(&f.ty),
                };
                self.statics.insert((class.clone(), f.name.clone()), value);
            }
        }
        Ok(())
    }

    fn call(&mut self, class: &str, name: &str, args: Vec<Value>) -> Result<Value, RunError> {
        let info = self
            .program
            .classes
            .get(class)
            .ok_or_else(|| exception(format!("no class {class}")))?;
        let method = info
            .methods
            .get(&(name.to_owned(), args.len()))
            .ok_or_else(|| exception(format!("no method {class}.{name}/{}", args.len())))?;
        if self.depth >= MAX_DEPTH {
            return Err(exception("stack overflow"));
        }
        self.depth += 1;
        let mut scope = HashMap::new();
        for (p, v) in method.params.iter().zip(args) {
            scope.insert(p.name.clone(), v);
        }
        let mut frame = Frame {
            class: class.to_owned(),
            scopes: vec![scope],
        };
        let flow = self.block(&method.body, &mut frame);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            _ => Ok(Value::Void),
        }
    }

    fn block(&mut self, b: &Block, frame: &mut Frame) -> Result<Flow, RunError> {
        frame.scopes.push(HashMap::new());
        let mut result = Ok(Flow::Normal);
        for s in &b.stmts {
            match self.stmt(s, frame) {
                Ok(Flow::Normal) => {}
                other => {
                    result = other;
                    break;
                }
            }
        }
        frame.scopes.pop();
        result
    }

    fn truthy(&mut self, e: &Expr, frame: &mut Frame) -> Result<bool, RunError> {
        match self.eval(e, frame)? {
            Value::Bool(b) => Ok(b),
            other => Err(exception(format!("condition is not boolean: {other}"))),
        }
    }

    fn stmt(&mut self, s: &Stmt, frame: &mut Frame) -> Result<Flow, RunError> {
        self.tick()?;
        match &s.kind {
            StmtKind::Block(b) => self.block(b, frame),
            StmtKind::Empty => Ok(Flow::Normal),
            StmtKind::If {
                cond,
                then,
                otherwise,
            } => {
                if self.truthy(cond, frame)? {
                    self.scoped(then, frame)
                } else if let Some(e) = otherwise {
                    self.scoped(e, frame)
                } else {
                    Ok(Flow::Normal)
                }
            }
            StmtKind::While { cond, body } => {
                while self.truthy(cond, frame)? {
                    match self.scoped(body, frame)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Normal | Flow::Continue => {}
                    }
                    self.tick()?;
                }
                Ok(Flow::Normal)
            }
            StmtKind::For {
                init,
                cond,
                update,
                body,
            } => {
                frame.scopes.push(HashMap::new());
                let result = self.for_loop(init, cond, update, body, frame);
                frame.scopes.pop();
                result
            }
            StmtKind::Return(value) => {
                let v = match value {
                    Some(e) => self.eval(e, frame)?,
                    None => Value::Void,
                };
                Ok(Flow::Return(v))
            }
            StmtKind::Break => Ok(Flow::Break),
            StmtKind::Continue => Ok(Flow::Continue),
            StmtKind::Local { ty, name, init } => {
                let v = match init {
                    Some(e) => self.eval(e, frame)?,
                    None => default_value(ty),
                };
                frame
                    .scopes
                    .last_mut()
                    .expect("scope")
                    .insert(name.clone(), v);
                Ok(Flow::Normal)
            }
            StmtKind::Expr(e) => {
                self.eval(e, frame)?;
                Ok(Flow::Normal)
            }
        }
    }

    fn scoped(&mut self, s: &Stmt, frame: &mut Frame) -> Result<Flow, RunError> {
        frame.scopes.push(HashMap::new());
        let r = self.stmt(s, frame);
        frame.scopes.pop();
        r
    }

    fn for_loop(
        &mut self,
        init: &Option<ForInit>,
        cond: &Option<Expr>,
        update: &[Expr],
        body: &Stmt,
        frame: &mut Frame,
    ) -> Result<Flow, RunError> {
        match init {
            Some(ForInit::Local { ty, name, init }) => {
                let v = match init {
                    Some(e) => self.eval(e, frame)?,
                    None => default_value(ty),
                };
                frame
                    .scopes
                    .last_mut()
                    .expect("scope")
                    .insert(name.clone(), v);
            }
            Some(ForInit::Exprs(es)) => {
                for e in es {
                    self.eval(e, frame)?;
                }
            }
            None => {}
        }
        loop {
            if let Some(c) = cond {
                if !self.truthy(c, frame)? {
                    break;
                }
            }
            match self.scoped(body, frame)? {
                Flow::Break => break,
                Flow::Return(v) => return Ok(Flow::Return(v)),
                Flow::Normal | Flow::Continue => {}
            }
            for u in update {
                self.eval(u, frame)?;
            }
            self.tick()?;
        }
        Ok(Flow::Normal)
    }

    fn read_name(&mut self, name: &str, frame: &mut Frame) -> Result<Value, RunError> {
        if let Some(v) = frame.lookup(name) {
            return Ok(v.clone());
        }
        self.statics
            .get(&(frame.class.clone(), name.to_owned()))
            .cloned()
            .ok_or_else(|| exception(format!("unbound name {name}")))
    }

    fn is_class_ref(&self, e: &Expr, frame: &mut Frame) -> Option<String> {
        match e {
            Expr::Name(n) if frame.lookup(n).is_none() && self.program.classes.contains_key(n) => {
                Some(n.clone())
            }
            _ => None,
        }
    }

    fn store(&mut self, target: &Expr, value: Value, frame: &mut Frame) -> Result<(), RunError> {
        match target {
            Expr::Name(n) => {
                if let Some(slot) = frame.lookup(n) {
                    *slot = value;
                    return Ok(());
                }
                let key = (frame.class.clone(), n.clone());
                match self.statics.get_mut(&key) {
                    Some(slot) => {
                        *slot = value;
                        Ok(())
                    }
                    None => Err(exception(format!("unbound name {n}"))),
                }
            }
            Expr::Field { target, name } => match self.is_class_ref(target, frame) {
                Some(class) => {
                    let slot = self
                        .statics
                        .get_mut(&(class.clone(), name.clone()))
                        .ok_or_else(|| exception(format!("no field {class}.{name}")))?;
                    *slot = value;
                    Ok(())
                }
                None => Err(exception(format!("cannot assign to .{name}"))),
            },
            Expr::Index { target, index } => {
                let arr = self.eval(target, frame)?;
                let idx = self.int(index, frame)?;
                match arr {
                    Value::Array(a) => {
                        let mut a = a.borrow_mut();
                        let len = a.len();
                        let slot = usize::try_from(idx)
                            .ok()
                            .and_then(|i| a.get_mut(i))
                            .ok_or_else(|| {
                                exception(format!("index {idx} out of bounds for length {len}"))
                            })?;
                        *slot = value;
                        Ok(())
                    }
                    Value::Null => Err(exception("null pointer")),
                    other => Err(exception(format!("{other} is not an array"))),
                }
            }
            _ => Err(exception("invalid assignment target")),
        }
    }

    fn int(&mut self, e: &Expr, frame: &mut Frame) -> Result<i64, RunError> {
        match self.eval(e, frame)? {
            Value::Int(v) => Ok(v),
            other => Err(exception(format!("expected int, got {other}"))),
        }
    }

    fn arith(op: &str, a: Value, b: Value) -> Result<Value, RunError> {
        use Value::*;
        let overflow = || exception("integer overflow");
        Ok(match (op, a, b) {
            ("+", Str(x), y) => Str(format!("{x}{y}").into()),
            ("+", x, Str(y)) => Str(format!("{x}{y}").into()),
            ("+", Int(x), Int(y)) => Int(x.checked_add(y).ok_or_else(overflow)?),
            ("-", Int(x), Int(y)) => Int(x.checked_sub(y).ok_or_else(overflow)?),
            ("*", Int(x), Int(y)) => Int(x.checked_mul(y).ok_or_else(overflow)?),
            ("/", Int(_), Int(0)) | ("%", Int(_), Int(0)) => {
                return Err(exception("division by zero"))
            }
            ("/", Int(x), Int(y)) => Int(x.checked_div(y).ok_or_else(overflow)?),
            ("%", Int(x), Int(y)) => Int(x.checked_rem(y).ok_or_else(overflow)?),
            ("<", Int(x), Int(y)) => Bool(x < y),
            ("<=", Int(x), Int(y)) => Bool(x <= y),
            (">", Int(x), Int(y)) => Bool(x > y),
            (">=", Int(x), Int(y)) => Bool(x >= y),
            ("==", x, y) => Bool(x == y),
            ("!=", x, y) => Bool(x != y),
            (op, x, y) => return Err(exception(format!("bad operands for {op}: {x}, {y}"))),
        })
    }

    fn eval(&mut self, e: &Expr, frame: &mut Frame) -> Result<Value, RunError> {
        self.tick()?;
        match e {
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Str(raw) => Ok(Value::Str(unescape(raw).into())),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Null => Ok(Value::Null),
            Expr::Name(n) => self.read_name(n, frame),
            Expr::Assign { op, target, value } => {
                let rhs = self.eval(value, frame)?;
                let v = if op == "=" {
                    rhs
                } else {
                    let cur = self.eval(target, frame)?;
                    Self::arith(&op[..1], cur, rhs)?
                };
                self.store(target, v.clone(), frame)?;
                Ok(v)
            }
            Expr::Binary { op, lhs, rhs } => match op.as_str() {
                "&&" => Ok(Value::Bool(
                    self.truthy(lhs, frame)? && self.truthy(rhs, frame)?,
                )),
                "||" => Ok(Value::Bool(
                    self.truthy(lhs, frame)? || self.truthy(rhs, frame)?,
                )),
                _ => {
                    let a = self.eval(lhs, frame)?;
                    let b = self.eval(rhs, frame)?;
                    Self::arith(op, a, b)
                }
            },
            Expr::Unary { op, operand } => match op.as_str() {
                "!" => Ok(Value::Bool(!self.truthy(operand, frame)?)),
                "-" => {
                    let v = self.int(operand, frame)?;
                    Ok(Value::Int(v.checked_neg().ok_or_else(|| exception("overflow"))?))
                }
                _ => {
                    let v = self.int(operand, frame)?;
                    let nv = if op == "++" { v + 1 } else { v - 1 };
                    self.store(operand, Value::Int(nv), frame)?;
                    Ok(Value::Int(nv))
                }
            },
            Expr::Postfix { op, operand } => {
                let v = self.int(operand, frame)?;
                let nv = if op == "++" { v + 1 } else { v - 1 };
                self.store(operand, Value::Int(nv), frame)?;
                Ok(Value::Int(v))
            }
            Expr::Ternary {
                cond,
                then,
                otherwise,
            } => {
                if self.truthy(cond, frame)? {
                    self.eval(then, frame)
                } else {
                    self.eval(otherwise, frame)
                }
            }
            Expr::Call {
                qualifier,
                name,
                args,
            } => {
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.eval(a, frame)?);
                }
                match qualifier.as_deref() {
                    None => {
                        let own = self.program.classes[&frame.class]
                            .methods
                            .contains_key(&(name.clone(), values.len()));
                        if own {
                            let class = frame.class.clone();
                            self.call(&class, name, values)
                        } else {
                            self.builtin(name, values)
                        }
                    }
                    Some(q) => {
                        if let Expr::Name(qn) = q {
                            if qn == "Math" && frame.lookup(qn).is_none() {
                                return self.math(name, values);
                            }
                        }
                        if let Some(class) = self.is_class_ref(q, frame) {
                            return self.call(&class, name, values);
                        }
                        let recv = self.eval(q, frame)?;
                        self.string_method(recv, name, values)
                    }
                }
            }
            Expr::Field { target, name } => {
                if let Some(class) = self.is_class_ref(target, frame) {
                    return self
                        .statics
                        .get(&(class.clone(), name.clone()))
                        .cloned()
                        .ok_or_else(|| exception(format!("no field {class}.{name}")));
                }
                match (self.eval(target, frame)?, name.as_str()) {
                    (Value::Array(a), "length") => Ok(Value::Int(a.borrow().len() as i64)),
                    (Value::Null, _) => Err(exception("null pointer")),
                    (other, _) => Err(exception(format!("no field .{name} on {other}"))),
                }
            }
            Expr::Index { target, index } => {
                let arr = self.eval(target, frame)?;
                let idx = self.int(index, frame)?;
                match arr {
                    Value::Array(a) => {
                        let a = a.borrow();
                        usize::try_from(idx)
                            .ok()
                            .and_then(|i| a.get(i))
                            .cloned()
                            .ok_or_else(|| {
                                exception(format!(
                                    "index {idx} out of bounds for length {}",
                                    a.len()
                                ))
                            })
                    }
                    Value::Null => Err(exception("null pointer")),
                    other => Err(exception(format!("{other} is not an array"))),
                }
            }
            Expr::NewArray { elem, size } => {
                let n = self.int(size, frame)?;
                if !(0..=1_000_000).contains(&n) {
                    return Err(exception(format!("bad array size {n}")));
                }
                let v = vec![default_value(elem); n as usize];
                Ok(Value::Array(Rc::new(RefCell::new(v))))
            }
        }
    }

    fn builtin(&mut self, name: &str, args: Vec<Value>) -> Result<Value, RunError> {
        match (name, args.as_slice()) {
            ("assertTrue", [Value::Bool(b)]) => {
                if *b {
                    Ok(Value::Void)
                } else {
                    Err(RunError::AssertionFailed("expected true".into()))
                }
            }
            ("assertFalse", [Value::Bool(b)]) => {
                if !*b {
                    Ok(Value::Void)
                } else {
                    Err(RunError::AssertionFailed("expected false".into()))
                }
            }
            ("assertEquals", [expected, actual]) => {
                if expected == actual {
                    Ok(Value::Void)
                } else {
                    Err(RunError::AssertionFailed(format!(
                        "expected {expected} but was {actual}"
                    )))
                }
            }
            ("fail", rest) => Err(RunError::AssertionFailed(
                rest.first().map_or_else(|| "fail()".into(), |v| v.to_string()),
            )),
            _ => Err(exception(format!("bad call {name}/{}", args.len()))),
        }
    }

    fn math(&mut self, name: &str, args: Vec<Value>) -> Result<Value, RunError> {
        match (name, args.as_slice()) {
            ("abs", [Value::Int(a)]) => Ok(Value::Int(a.abs())),
            ("max", [Value::Int(a), Value::Int(b)]) => Ok(Value::Int(*a.max(b))),
            ("min", [Value::Int(a), Value::Int(b)]) => Ok(Value::Int(*a.min(b))),
            _ => Err(exception(format!("bad call Math.{name}"))),
        }
    }

    fn string_method(
        &mut self,
        recv: Value,
        name: &str,
        args: Vec<Value>,
    ) -> Result<Value, RunError> {
        let Value::Str(s) = recv else {
            return match recv {
                Value::Null => Err(exception("null pointer")),
                other => Err(exception(format!("no method .{name} on {other}"))),
            };
        };
        match (name, args.as_slice()) {
            ("length", []) => Ok(Value::Int(s.chars().count() as i64)),
            ("equals", [other]) => Ok(Value::Bool(matches!(other, Value::Str(o) if *o == s))),
            ("charAt", [Value::Int(i)]) => usize::try_from(*i)
                .ok()
                .and_then(|i| s.chars().nth(i))
                .map(|c| Value::Str(c.to_string().into()))
                .ok_or_else(|| exception(format!("index {i} out of bounds"))),
            _ => Err(exception(format!("bad call .{name}"))),
        }
    }
}
