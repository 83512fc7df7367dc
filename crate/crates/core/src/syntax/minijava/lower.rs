//! AST to generic tree.

use super::ast::*;
use crate::syntax::tree::{GenericTree, NodeId};

pub fn lower_unit(unit: &CompilationUnit) -> GenericTree {
    let mut t = GenericTree::new("CompilationUnit", None);
    let root = t.root();
    for class in &unit.classes {
        let c = t.add_child(root, "ClassDecl", Some(class.name.clone()));
        modifiers(&mut t, c, &class.modifiers);
        for member in &class.members {
            match member {
                Member::Field(f) => {
                    let n = t.add_child(c, "FieldDecl", Some(f.name.clone()));
                    modifiers(&mut t, n, &f.modifiers);
                    t.add_child(n, "Type", Some(f.ty.to_string()));
                    if let Some(init) = &f.init {
                        expr(&mut t, n, init);
                    }
                }
                Member::Method(m) => {
                    let n = t.add_child(c, "MethodDecl", Some(m.name.clone()));
                    modifiers(&mut t, n, &m.modifiers);
                    t.add_child(n, "Type", Some(m.ret.to_string()));
                    let params = t.add_child(n, "Params", None);
                    for p in &m.params {
                        let pn = t.add_child(params, "Param", Some(p.name.clone()));
                        t.add_child(pn, "Type", Some(p.ty.to_string()));
                    }
                    block(&mut t, n, &m.body);
                }
            }
        }
    }
    t
}

pub fn lower_stmt(stmt: &Stmt) -> GenericTree {
    let mut t = GenericTree::new("Statement", None);
    let root = t.root();
    statement(&mut t, root, stmt);
    t
}

fn modifiers(t: &mut GenericTree, parent: NodeId, mods: &[String]) {
    for m in mods {
        t.add_child(parent, "Modifier", Some(m.clone()));
    }
}

fn block(t: &mut GenericTree, parent: NodeId, b: &Block) {
    let n = t.add_child(parent, "Block", None);
    for s in &b.stmts {
        statement(t, n, s);
    }
}

fn local(t: &mut GenericTree, parent: NodeId, ty: &TypeName, name: &str, init: &Option<Expr>) {
    let n = t.add_child(parent, "LocalVar", Some(name.to_owned()));
    t.add_child(n, "Type", Some(ty.to_string()));
    if let Some(e) = init {
        expr(t, n, e);
    }
}

fn statement(t: &mut GenericTree, parent: NodeId, s: &Stmt) {
    match &s.kind {
        StmtKind::Block(b) => block(t, parent, b),
        StmtKind::Empty => {
            t.add_child(parent, "Empty", None);
        }
        StmtKind::If {
            cond,
            then,
            otherwise,
        } => {
            let n = t.add_child(parent, "If", None);
            expr(t, n, cond);
            statement(t, n, then);
            if let Some(e) = otherwise {
                statement(t, n, e);
            }
        }
        StmtKind::While { cond, body } => {
            let n = t.add_child(parent, "While", None);
            expr(t, n, cond);
            statement(t, n, body);
        }
        StmtKind::For {
            init,
            cond,
            update,
            body,
        } => {
            let n = t.add_child(parent, "For", None);
            let i = t.add_child(n, "ForInit", None);
            match init {
                Some(ForInit::Local { ty, name, init }) => local(t, i, ty, name, init),
                Some(ForInit::Exprs(es)) => es.iter().for_each(|e| expr(t, i, e)),
                None => {}
            }
            let c = t.add_child(n, "ForCond", None);
            if let Some(e) = cond {
                expr(t, c, e);
            }
            let u = t.add_child(n, "ForUpdate", None);
            for e in update {
                expr(t, u, e);
            }
            statement(t, n, body);
        }
        StmtKind::Return(value) => {
            let n = t.add_child(parent, "Return", None);
            if let Some(e) = value {
                expr(t, n, e);
            }
        }
        StmtKind::Break => {
            t.add_child(parent, "Break", None);
        }
        StmtKind::Continue => {
            t.add_child(parent, "Continue", None);
        }
        StmtKind::Local { ty, name, init } => local(t, parent, ty, name, init),
        StmtKind::Expr(e) => {
            let n = t.add_child(parent, "ExprStmt", None);
            expr(t, n, e);
        }
    }
}

fn expr(t: &mut GenericTree, parent: NodeId, e: &Expr) {
    match e {
        Expr::Int(v) => {
            t.add_child(parent, "IntLit", Some(v.to_string()));
        }
        Expr::Str(raw) => {
            t.add_child(parent, "StrLit", Some(raw.clone()));
        }
        Expr::Bool(b) => {
            t.add_child(parent, "BoolLit", Some(b.to_string()));
        }
        Expr::Null => {
            t.add_child(parent, "NullLit", None);
        }
        Expr::Name(n) => {
            t.add_child(parent, "Name", Some(n.clone()));
        }
        Expr::Assign { op, target, value } => {
            let n = t.add_child(parent, "Assign", Some(op.clone()));
            expr(t, n, target);
            expr(t, n, value);
        }
        Expr::Binary { op, lhs, rhs } => {
            let n = t.add_child(parent, "Binary", Some(op.clone()));
            expr(t, n, lhs);
            expr(t, n, rhs);
        }
        Expr::Unary { op, operand } => {
            let n = t.add_child(parent, "Unary", Some(op.clone()));
            expr(t, n, operand);
        }
        Expr::Postfix { op, operand } => {
            let n = t.add_child(parent, "Postfix", Some(op.clone()));
            expr(t, n, operand);
        }
        Expr::Ternary {
            cond,
            then,
            otherwise,
        } => {
            let n = t.add_child(parent, "Ternary", None);
            expr(t, n, cond);
            expr(t, n, then);
            expr(t, n, otherwise);
        }
        Expr::Call {
            qualifier,
            name,
            args,
        } => {
            let n = t.add_child(parent, "Call", Some(name.clone()));
            if let Some(q) = qualifier {
                expr(t, n, q);
            }
            let a = t.add_child(n, "Args", None);
            for arg in args {
                expr(t, a, arg);
            }
        }
        Expr::Field { target, name } => {
            let n = t.add_child(parent, "FieldAccess", Some(name.clone()));
            expr(t, n, target);
        }
        Expr::Index { target, index } => {
            let n = t.add_child(parent, "Index", None);
            expr(t, n, target);
            expr(t, n, index);
        }
        Expr::NewArray { elem, size } => {
            let n = t.add_child(parent, "NewArray", None);
            t.add_child(n, "Type", Some(elem.to_string()));
            expr(t, n, size);
        }
    }
}
