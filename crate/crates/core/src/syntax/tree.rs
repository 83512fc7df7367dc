use std::fmt;

use serde::{Deserialize, Serialize};

pub type NodeId = usize;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeNode {
    pub kind: String,
    pub value: Option<String>,
    pub children: Vec<NodeId>,
}

/// Arena-backed ordered tree with labelled nodes.
///
/// Equality is structural: two trees are equal when their shapes, kinds and
/// values match, regardless of how the arenas are laid out.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenericTree {
    nodes: Vec<TreeNode>,
    root: NodeId,
}

/// Owned nested form, convenient for building trees by hand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: String,
    pub value: Option<String>,
    pub children: Vec<Node>,
}

impl Node {
    pub fn new(kind: impl Into<String>, children: Vec<Node>) -> Self {
        Node {
            kind: kind.into(),
            value: None,
            children,
        }
    }

    pub fn leaf(kind: impl Into<String>, value: impl Into<String>) -> Self {
        Node {
            kind: kind.into(),
            value: Some(value.into()),
            children: Vec::new(),
        }
    }

    pub fn with_value(mut self, value: impl Into<String>) -> Self {
        self.value = Some(value.into());
        self
    }
}

impl GenericTree {
    pub fn new(kind: impl Into<String>, value: Option<String>) -> Self {
        GenericTree {
            nodes: vec![TreeNode {
                kind: kind.into(),
                value,
                children: Vec::new(),
            }],
            root: 0,
        }
    }

    pub fn from_node(node: &Node) -> Self {
        let mut tree = GenericTree::new(node.kind.clone(), node.value.clone());
        fn fill(tree: &mut GenericTree, parent: NodeId, node: &Node) {
            for child in &node.children {
                let id = tree.add_child(parent, child.kind.clone(), child.value.clone());
                fill(tree, id, child);
            }
        }
        fill(&mut tree, 0, node);
        tree
    }

    pub fn to_node(&self) -> Node {
        fn build(tree: &GenericTree, id: NodeId) -> Node {
            let n = &tree.nodes[id];
            Node {
                kind: n.kind.clone(),
                value: n.value.clone(),
                children: n.children.iter().map(|&c| build(tree, c)).collect(),
            }
        }
        build(self, self.root)
    }

    /// Builds a tree from raw parts, checking that every node is reachable
    /// from `root` exactly once.
    pub fn from_parts(nodes: Vec<TreeNode>, root: NodeId) -> Option<Self> {
        let tree = GenericTree { nodes, root };
        tree.is_well_formed().then_some(tree)
    }

    pub fn add_child(
        &mut self,
        parent: NodeId,
        kind: impl Into<String>,
        value: Option<String>,
    ) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            kind: kind.into(),
            value,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn kind(&self, id: NodeId) -> &str {
        &self.nodes[id].kind
    }

    pub fn value(&self, id: NodeId) -> Option<&str> {
        self.nodes[id].value.as_deref()
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn is_well_formed(&self) -> bool {
        if self.root >= self.nodes.len() {
            return false;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        let mut count = 0;
        while let Some(id) = stack.pop() {
            if id >= self.nodes.len() || seen[id] {
                return false;
            }
            seen[id] = true;
            count += 1;
            stack.extend(self.nodes[id].children.iter().copied());
        }
        count == self.nodes.len()
    }

    /// Node ids in pre-order.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.nodes[id].children.iter().rev().copied());
        }
        out
    }

    /// Node ids in post-order.
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                out.push(id);
            } else {
                stack.push((id, true));
                stack.extend(self.nodes[id].children.iter().rev().map(|&c| (c, false)));
            }
        }
        out
    }

    /// Parent of every node; the root maps to `None`.
    pub fn parents(&self) -> Vec<Option<NodeId>> {
        let mut parents = vec![None; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            for &c in &node.children {
                parents[c] = Some(id);
            }
        }
        parents
    }

    fn subtree_eq(&self, a: NodeId, other: &GenericTree, b: NodeId) -> bool {
        let (x, y) = (&self.nodes[a], &other.nodes[b]);
        x.kind == y.kind
            && x.value == y.value
            && x.children.len() == y.children.len()
            && x
                .children
                .iter()
                .zip(&y.children)
                .all(|(&ca, &cb)| self.subtree_eq(ca, other, cb))
    }

    /// Structural equality of the subtree at `a` with the subtree at `b` of `other`.
    pub fn isomorphic(&self, a: NodeId, other: &GenericTree, b: NodeId) -> bool {
        self.subtree_eq(a, other, b)
    }
}

impl PartialEq for GenericTree {
    fn eq(&self, other: &Self) -> bool {
        self.subtree_eq(self.root, other, other.root)
    }
}

impl Eq for GenericTree {}

impl fmt::Display for GenericTree {
    /// S-expression rendering: `(Kind:value child ...)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(t: &GenericTree, id: NodeId, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let n = &t.nodes[id];
            write!(f, "({}", n.kind)?;
            if let Some(v) = &n.value {
                write!(f, ":{v}")?;
            }
            for &c in &n.children {
                f.write_str(" ")?;
                go(t, c, f)?;
            }
            f.write_str(")")
        }
        go(self, self.root, f)
    }
}
