//! Recursive-descent parser for the bundled language.

use super::ast::*;
use super::lexer::{lex, TokKind, Token};
use crate::error::{Error, Result};

const KEYWORDS: [&str; 17] = [
    "class", "if", "else", "while", "for", "return", "break", "continue", "new", "true", "false",
    "null", "public", "private", "protected", "static", "final",
];
const MODIFIERS: [&str; 5] = ["public", "private", "protected", "static", "final"];
const ASSIGN_OPS: [&str; 6] = ["=", "+=", "-=", "*=", "/=", "%="];

pub fn parse_unit(text: &str) -> Result<CompilationUnit> {
    let mut p = Parser::new(lex(text)?);
    let mut classes = Vec::new();
    while !p.at_end() {
        classes.push(p.class()?);
    }
    Ok(CompilationUnit { classes })
}

/// Parses exactly one statement.
pub fn parse_statement(text: &str) -> Result<Stmt> {
    let mut p = Parser::new(lex(text)?);
    let stmt = p.statement()?;
    if !p.at_end() {
        return Err(p.error("trailing tokens after statement"));
    }
    Ok(stmt)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        Parser { tokens, pos: 0 }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.tokens.get(self.pos + offset)
    }

    fn peek_text(&self, offset: usize) -> Option<&str> {
        self.peek_at(offset).map(|t| t.text.as_str())
    }

    fn line(&self) -> usize {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map_or(1, |t| t.line)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let found = match self.peek_at(0) {
            Some(t) => format!(" (found `{}`)", t.text),
            None => " (found end of input)".to_owned(),
        };
        Error::Syntax {
            line: self.line(),
            message: format!("{}{found}", message.into()),
        }
    }

    fn check(&self, text: &str) -> bool {
        self.peek_text(0) == Some(text)
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.check(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, text: &str) -> Result<()> {
        if self.eat(text) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{text}`")))
        }
    }

    fn is_ident_at(&self, offset: usize) -> bool {
        self.peek_at(offset)
            .is_some_and(|t| t.kind == TokKind::Ident && !KEYWORDS.contains(&t.text.as_str()))
    }

    fn ident(&mut self) -> Result<String> {
        if self.is_ident_at(0) {
            let text = self.tokens[self.pos].text.clone();
            self.pos += 1;
            Ok(text)
        } else {
            Err(self.error("expected identifier"))
        }
    }

    fn modifiers(&mut self) -> Vec<String> {
        let mut out = Vec::new();
        while let Some(t) = self.peek_text(0) {
            if MODIFIERS.contains(&t) {
                out.push(t.to_owned());
                self.pos += 1;
            } else {
                break;
            }
        }
        out
    }

    fn type_name(&mut self) -> Result<TypeName> {
        let name = self.ident()?;
        let mut dims = 0;
        while self.check("[") && self.peek_text(1) == Some("]") {
            self.pos += 2;
            dims += 1;
        }
        Ok(TypeName { name, dims })
    }

    /// `Type name` starts here (with optional `[]` pairs after the type).
    fn looks_like_decl(&self) -> bool {
        if !self.is_ident_at(0) {
            return false;
        }
        let mut i = 1;
        while self.peek_text(i) == Some("[") && self.peek_text(i + 1) == Some("]") {
            i += 2;
        }
        self.is_ident_at(i)
    }

    fn class(&mut self) -> Result<ClassDecl> {
        let modifiers = self.modifiers();
        let line = self.line();
        self.expect("class")?;
        let name = self.ident()?;
        self.expect("{")?;
        let mut members = Vec::new();
        while !self.eat("}") {
            if self.at_end() {
                return Err(self.error("unterminated class body"));
            }
            members.push(self.member()?);
        }
        Ok(ClassDecl {
            modifiers,
            name,
            members,
            line,
        })
    }

    fn member(&mut self) -> Result<Member> {
        let modifiers = self.modifiers();
        let line = self.line();
        let ty = self.type_name()?;
        let name = self.ident()?;
        if self.eat("(") {
            let mut params = Vec::new();
            if !self.eat(")") {
                loop {
                    let ty = self.type_name()?;
                    let name = self.ident()?;
                    params.push(Param { ty, name });
                    if self.eat(")") {
                        break;
                    }
                    self.expect(",")?;
                }
            }
            let body = self.block()?;
            Ok(Member::Method(MethodDecl {
                modifiers,
                ret: ty,
                name,
                params,
                body,
                line,
            }))
        } else {
            let init = if self.eat("=") {
                Some(self.expr()?)
            } else {
                None
            };
            self.expect(";")?;
            Ok(Member::Field(FieldDecl {
                modifiers,
                ty,
                name,
                init,
                line,
            }))
        }
    }

    fn block(&mut self) -> Result<Block> {
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.eat("}") {
            if self.at_end() {
                return Err(self.error("unterminated block"));
            }
            stmts.push(self.statement()?);
        }
        Ok(Block { stmts })
    }

    fn statement(&mut self) -> Result<Stmt> {
        let line = self.line();
        let kind = match self.peek_text(0) {
            None => return Err(self.error("expected statement")),
            Some("{") => StmtKind::Block(self.block()?),
            Some(";") => {
                self.pos += 1;
                StmtKind::Empty
            }
            Some("if") => {
                self.pos += 1;
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let then = Box::new(self.statement()?);
                let otherwise = if self.eat("else") {
                    Some(Box::new(self.statement()?))
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then,
                    otherwise,
                }
            }
            Some("while") => {
                self.pos += 1;
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                StmtKind::While {
                    cond,
                    body: Box::new(self.statement()?),
                }
            }
            Some("for") => {
                self.pos += 1;
                self.expect("(")?;
                let init = if self.check(";") {
                    None
                } else if self.looks_like_decl() || self.check("final") {
                    self.eat("final");
                    let ty = self.type_name()?;
                    let name = self.ident()?;
                    let init = if self.eat("=") {
                        Some(self.expr()?)
                    } else {
                        None
                    };
                    Some(ForInit::Local { ty, name, init })
                } else {
                    Some(ForInit::Exprs(self.expr_list()?))
                };
                self.expect(";")?;
                let cond = if self.check(";") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(";")?;
                let update = if self.check(")") {
                    Vec::new()
                } else {
                    self.expr_list()?
                };
                self.expect(")")?;
                StmtKind::For {
                    init,
                    cond,
                    update,
                    body: Box::new(self.statement()?),
                }
            }
            Some("return") => {
                self.pos += 1;
                let value = if self.check(";") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(";")?;
                StmtKind::Return(value)
            }
            Some("break") => {
                self.pos += 1;
                self.expect(";")?;
                StmtKind::Break
            }
            Some("continue") => {
                self.pos += 1;
                self.expect(";")?;
                StmtKind::Continue
            }
            Some(_) if self.looks_like_decl() || self.check("final") => {
                self.eat("final");
                let ty = self.type_name()?;
                let name = self.ident()?;
                let init = if self.eat("=") {
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect(";")?;
                StmtKind::Local { ty, name, init }
            }
            Some(_) => {
                let e = self.expr()?;
                self.expect(";")?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt { kind, line })
    }

    fn expr_list(&mut self) -> Result<Vec<Expr>> {
        let mut out = vec![self.expr()?];
        while self.eat(",") {
            out.push(self.expr()?);
        }
        Ok(out)
    }

    pub fn expr(&mut self) -> Result<Expr> {
        let target = self.ternary()?;
        if let Some(op) = self.peek_text(0).filter(|t| ASSIGN_OPS.contains(t)) {
            let op = op.to_owned();
            if !matches!(
                target,
                Expr::Name(_) | Expr::Index { .. } | Expr::Field { .. }
            ) {
                return Err(self.error("invalid assignment target"));
            }
            self.pos += 1;
            let value = self.expr()?;
            return Ok(Expr::Assign {
                op,
                target: Box::new(target),
                value: Box::new(value),
            });
        }
        Ok(target)
    }

    fn ternary(&mut self) -> Result<Expr> {
        let cond = self.binary(0)?;
        if self.eat("?") {
            let then = self.expr()?;
            self.expect(":")?;
            let otherwise = self.ternary()?;
            return Ok(Expr::Ternary {
                cond: Box::new(cond),
                then: Box::new(then),
                otherwise: Box::new(otherwise),
            });
        }
        Ok(cond)
    }

    fn binary(&mut self, level: usize) -> Result<Expr> {
        const LEVELS: [&[&str]; 6] = [
            &["||"],
            &["&&"],
            &["==", "!="],
            &["<", "<=", ">", ">="],
            &["+", "-"],
            &["*", "/", "%"],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self.peek_text(0).filter(|t| LEVELS[level].contains(t)) {
            let op = op.to_owned();
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        for op in ["!", "-", "++", "--"] {
            if self.eat(op) {
                let operand = self.unary()?;
                return Ok(Expr::Unary {
                    op: op.to_owned(),
                    operand: Box::new(operand),
                });
            }
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.eat(".") {
                let name = self.ident()?;
                if self.eat("(") {
                    let args = self.args()?;
                    e = Expr::Call {
                        qualifier: Some(Box::new(e)),
                        name,
                        args,
                    };
                } else {
                    e = Expr::Field {
                        target: Box::new(e),
                        name,
                    };
                }
            } else if self.eat("[") {
                let index = self.expr()?;
                self.expect("]")?;
                e = Expr::Index {
                    target: Box::new(e),
                    index: Box::new(index),
                };
            } else if self.check("++") || self.check("--") {
                let op = self.tokens[self.pos].text.clone();
                self.pos += 1;
                e = Expr::Postfix {
                    op,
                    operand: Box::new(e),
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        let mut args = Vec::new();
        if self.eat(")") {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(")") {
                return Ok(args);
            }
            self.expect(",")?;
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek_at(0).cloned() else {
            return Err(self.error("expected expression"));
        };
        match tok.kind {
            TokKind::Int => {
                self.pos += 1;
                tok.text
                    .parse::<i64>()
                    .map(Expr::Int)
                    .map_err(|_| self.error("integer literal out of range"))
            }
            TokKind::Str => {
                self.pos += 1;
                Ok(Expr::Str(tok.text))
            }
            TokKind::Ident => match tok.text.as_str() {
                "true" | "false" => {
                    self.pos += 1;
                    Ok(Expr::Bool(tok.text == "true"))
                }
                "null" => {
                    self.pos += 1;
                    Ok(Expr::Null)
                }
                "new" => {
                    self.pos += 1;
                    let name = self.ident()?;
                    self.expect("[")?;
                    let size = self.expr()?;
                    self.expect("]")?;
                    Ok(Expr::NewArray {
                        elem: TypeName { name, dims: 0 },
                        size: Box::new(size),
                    })
                }
                _ => {
                    let name = self.ident()?;
                    if self.eat("(") {
                        let args = self.args()?;
                        Ok(Expr::Call {
                            qualifier: None,
                            name,
                            args,
                        })
                    } else {
                        Ok(Expr::Name(name))
                    }
                }
            },
            TokKind::Punct if tok.text == "(" => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            TokKind::Punct => Err(self.error("expected expression")),
        }
    }
}
