//! Subject-language services and tree differencing.
//!
//! A [`SubjectLanguage`] supplies tokenization, parsing to a [`GenericTree`],
//! format normalization and line classification. The engine only talks to
//! languages through this trait; [`MiniJava`] is the bundled implementation.

pub mod diff;
pub mod minijava;
pub mod tree;

pub use diff::{action_similarity, apply, edit_script, EditAction, EditOp, EditScript};
pub use minijava::MiniJava;
pub use tree::{GenericTree, Node, NodeId, TreeNode};

use crate::error::Result;

/// Plug-in contract for a repairable language.
///
/// Implementations must keep `normalize` idempotent and parse-preserving:
/// `normalize(normalize(x)) == normalize(x)`, and `parse(normalize(x))`
/// succeeds exactly when `parse(x)` does.
pub trait SubjectLanguage: Send + Sync {
    fn name(&self) -> &str;

    /// Lexical tokens of `text`, comments excluded.
    fn tokenize(&self, text: &str) -> Result<Vec<String>>;

    /// Parses a whole compilation unit.
    fn parse(&self, text: &str) -> Result<GenericTree>;

    /// Canonical formatting of `text`.
    fn normalize(&self, text: &str) -> String;

    fn is_comment_line(&self, line: &str) -> bool;

    /// True for a line holding a statement that does nothing, such as `;` or
    /// a loop whose body is the empty statement.
    fn is_null_location(&self, line: &str) -> bool;

    /// File extension of source files, without the dot.
    fn extension(&self) -> &str;

    /// Token count with a whitespace fallback for text that does not lex.
    fn count_tokens(&self, text: &str) -> usize {
        match self.tokenize(text) {
            Ok(tokens) => tokens.len(),
            Err(_) => text.split_whitespace().count(),
        }
    }
}

/// True iff both texts parse after normalization into identical trees.
pub fn trees_equal_normalized(a: &str, b: &str, lang: &dyn SubjectLanguage) -> bool {
    match (lang.parse(&lang.normalize(a)), lang.parse(&lang.normalize(b))) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}
