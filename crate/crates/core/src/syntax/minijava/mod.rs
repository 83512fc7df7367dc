//! MiniJava: a small Java subset used as the bundled subject language.
//!
//! Programs are classes holding static fields and methods. The module also
//! provides an in-process toolchain: [`Program::build`] resolves names and
//! [`Program::run_tests`] runs every `test*` method of each `*Test` class.

pub mod ast;
pub mod lexer;
pub mod lower;
pub mod parser;
pub mod program;

pub use parser::{parse_statement, parse_unit};
pub use program::{Program, RunError, TestReport, Value};

use super::tree::GenericTree;
use super::SubjectLanguage;
use crate::error::Result;
use ast::StmtKind;

#[derive(Debug, Clone, Copy, Default)]
pub struct MiniJava;

impl SubjectLanguage for MiniJava {
    fn name(&self) -> &str {
        "minijava"
    }

    fn tokenize(&self, text: &str) -> Result<Vec<String>> {
        Ok(lexer::lex(text)?.into_iter().map(|t| t.text).collect())
    }

    fn parse(&self, text: &str) -> Result<GenericTree> {
        Ok(lower::lower_unit(&parse_unit(text)?))
    }

    /// Tokens of each source line joined by single spaces; lines without
    /// tokens are dropped. Text that does not lex only gets whitespace
    /// collapsed.
    fn normalize(&self, text: &str) -> String {
        match lexer::lex(text) {
            Ok(tokens) => {
                let mut lines: Vec<String> = Vec::new();
                let mut current = None;
                for t in tokens {
                    if current == Some(t.line) {
                        let last = lines.last_mut().expect("line started");
                        last.push(' ');
                        last.push_str(&t.text);
                    } else {
                        current = Some(t.line);
                        lines.push(t.text);
                    }
                }
                lines.join("\n")
            }
            Err(_) => text
                .lines()
                .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join("\n"),
        }
    }

    fn is_comment_line(&self, line: &str) -> bool {
        let t = line.trim_start();
        t.starts_with("//") || t.starts_with("/*") || t.starts_with('*')
    }

    fn is_null_location(&self, line: &str) -> bool {
        let t = line.trim();
        if t.is_empty() {
            return false;
        }
        if t.chars().all(|c| c == '{' || c == '}' || c.is_whitespace()) {
            return true;
        }
        let Ok(stmt) = parse_statement(t) else {
            return false;
        };
        let is_empty = |s: &ast::Stmt| matches!(s.kind, StmtKind::Empty);
        match &stmt.kind {
            StmtKind::Empty => true,
            StmtKind::Block(b) => b.stmts.is_empty(),
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => is_empty(body),
            StmtKind::If {
                then,
                otherwise: None,
                ..
            } => is_empty(then),
            _ => false,
        }
    }

    fn extension(&self) -> &str {
        "mj"
    }
}
