//! Tree differencing in the GumTree family.
//!
//! Matching runs a greedy top-down phase over isomorphic subtrees (tallest
//! first), then a bottom-up phase that pairs containers by the Dice overlap of
//! their matched descendants and recovers child matches with LCS. The edit
//! script is derived from the matching with Chawathe's procedure
//! (insert/update/move in breadth-first order, aligned children, deletes in
//! post-order).
//!
//! Actions address nodes in a working id space: source node `i` keeps id `i`,
//! a virtual root above the source root has id `src.len()`, and inserted nodes
//! receive consecutive ids after it. [`apply`] replays a script in that same
//! space.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::tree::{GenericTree, NodeId, TreeNode};
use crate::error::{Error, Result};
use crate::util::{lcs_pairs, Fnv64};

/// Subtrees shorter than this are left to the bottom-up phase.
const MIN_HEIGHT: usize = 2;
/// Minimum descendant overlap for a bottom-up container match.
const MIN_DICE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOp {
    Insert,
    Delete,
    Update,
    Move,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditAction {
    pub op: EditOp,
    pub node: NodeId,
    /// Kind label of the subject node.
    pub label: String,
    /// Inserted value, or the new value of an update.
    pub value: Option<String>,
    /// Previous value of an update.
    pub old_value: Option<String>,
    /// Target parent of an insert or move.
    pub parent: Option<NodeId>,
    /// Target child index of an insert or move.
    pub position: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditScript {
    pub actions: Vec<EditAction>,
}

impl EditScript {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Per-tree facts used by the matcher.
struct Index<'a> {
    tree: &'a GenericTree,
    parent: Vec<Option<NodeId>>,
    height: Vec<usize>,
    hash: Vec<u64>,
    /// Number of descendants (excluding the node).
    desc: Vec<usize>,
    pre: Vec<usize>,
    postorder: Vec<NodeId>,
}

impl<'a> Index<'a> {
    fn new(tree: &'a GenericTree) -> Self {
        let n = tree.len();
        let postorder = tree.postorder();
        let mut height = vec![1; n];
        let mut hash = vec![0; n];
        let mut desc = vec![0; n];
        for &id in &postorder {
            let node = tree.node(id);
            let mut h = Fnv64::default();
            h.write(node.kind.as_bytes()).write(&[0xff]);
            match &node.value {
                Some(v) => h.write(&[1]).write(v.as_bytes()),
                None => h.write(&[0]),
            };
            for &c in &node.children {
                height[id] = height[id].max(height[c] + 1);
                desc[id] += desc[c] + 1;
                h.write_u64(hash[c]);
            }
            h.write(&[0xfe]);
            hash[id] = h.finish();
        }
        let mut pre = vec![0; n];
        for (i, id) in tree.preorder().into_iter().enumerate() {
            pre[id] = i;
        }
        Index {
            tree,
            parent: tree.parents(),
            height,
            hash,
            desc,
            pre,
            postorder,
        }
    }

    fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self.tree.children(id).to_vec();
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.tree.children(n).iter().copied());
        }
        out
    }

    fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = vec![id];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.tree.children(out[i]).iter().copied());
            i += 1;
        }
        out
    }
}

/// One-to-one, kind-preserving node matching between two trees.
struct Matching {
    src_to_dst: Vec<Option<NodeId>>,
    dst_to_src: Vec<Option<NodeId>>,
}

impl Matching {
    fn link(&mut self, s: NodeId, d: NodeId) {
        debug_assert!(self.src_to_dst[s].is_none() && self.dst_to_src[d].is_none());
        self.src_to_dst[s] = Some(d);
        self.dst_to_src[d] = Some(s);
    }

    /// Links two isomorphic subtrees node by node (both traversed breadth-first).
    fn link_subtrees(&mut self, src: &Index, s: NodeId, dst: &Index, d: NodeId) {
        for (a, b) in src.subtree(s).into_iter().zip(dst.subtree(d)) {
            if self.src_to_dst[a].is_none() && self.dst_to_src[b].is_none() {
                self.link(a, b);
            }
        }
    }
}

fn match_trees(src: &Index, dst: &Index) -> Matching {
    let mut m = Matching {
        src_to_dst: vec![None; src.tree.len()],
        dst_to_src: vec![None; dst.tree.len()],
    };
    top_down(src, dst, &mut m);
    bottom_up(src, dst, &mut m);
    m
}

fn top_down(src: &Index, dst: &Index, m: &mut Matching) {
    let mut open_src = vec![src.tree.root()];
    let mut open_dst = vec![dst.tree.root()];
    let max_height = |open: &[NodeId], idx: &Index| open.iter().map(|&n| idx.height[n]).max();
    let take = |open: &mut Vec<NodeId>, idx: &Index, h: usize| {
        let (mut taken, rest): (Vec<_>, Vec<_>) =
            open.drain(..).partition(|&n| idx.height[n] == h);
        *open = rest;
        taken.sort_by_key(|&n| idx.pre[n]);
        taken
    };
    loop {
        let (h1, h2) = match (max_height(&open_src, src), max_height(&open_dst, dst)) {
            (Some(a), Some(b)) => (a, b),
            _ => break,
        };
        if h1.min(h2) < MIN_HEIGHT {
            break;
        }
        if h1 != h2 {
            if h1 > h2 {
                for n in take(&mut open_src, src, h1) {
                    open_src.extend(src.tree.children(n).iter().copied());
                }
            } else {
                for n in take(&mut open_dst, dst, h2) {
                    open_dst.extend(dst.tree.children(n).iter().copied());
                }
            }
            continue;
        }
        let level_src = take(&mut open_src, src, h1);
        let level_dst = take(&mut open_dst, dst, h1);
        let mut by_hash: BTreeMap<u64, (Vec<NodeId>, Vec<NodeId>)> = BTreeMap::new();
        for &s in &level_src {
            by_hash.entry(src.hash[s]).or_default().0.push(s);
        }
        for &d in &level_dst {
            by_hash.entry(dst.hash[d]).or_default().1.push(d);
        }
        let mut matched_src = vec![false; level_src.len()];
        let mut matched_dst = vec![false; level_dst.len()];
        for (ss, ds) in by_hash.values() {
            // ambiguous groups pair up in document order
            for (&s, &d) in ss.iter().zip(ds) {
                if src.tree.isomorphic(s, dst.tree, d) {
                    m.link_subtrees(src, s, dst, d);
                    matched_src[level_src.iter().position(|&x| x == s).unwrap()] = true;
                    matched_dst[level_dst.iter().position(|&x| x == d).unwrap()] = true;
                }
            }
        }
        for (i, &s) in level_src.iter().enumerate() {
            if !matched_src[i] {
                open_src.extend(src.tree.children(s).iter().copied());
            }
        }
        for (i, &d) in level_dst.iter().enumerate() {
            if !matched_dst[i] {
                open_dst.extend(dst.tree.children(d).iter().copied());
            }
        }
    }
}

fn bottom_up(src: &Index, dst: &Index, m: &mut Matching) {
    for &t in &src.postorder {
        if m.src_to_dst[t].is_some() || src.tree.children(t).is_empty() {
            continue;
        }
        let mut overlap: HashMap<NodeId, usize> = HashMap::new();
        for d in src.descendants(t) {
            if let Some(p) = m.src_to_dst[d] {
                let mut cur = dst.parent[p];
                while let Some(a) = cur {
                    *overlap.entry(a).or_default() += 1;
                    cur = dst.parent[a];
                }
            }
        }
        let best = overlap
            .into_iter()
            .filter(|&(c, _)| {
                m.dst_to_src[c].is_none() && dst.tree.kind(c) == src.tree.kind(t)
            })
            .map(|(c, common)| {
                let dice = 2.0 * common as f64 / (src.desc[t] + dst.desc[c]) as f64;
                (c, dice)
            })
            .filter(|&(_, dice)| dice >= MIN_DICE)
            .max_by(|a, b| {
                a.1.partial_cmp(&b.1)
                    .unwrap()
                    .then_with(|| dst.pre[b.0].cmp(&dst.pre[a.0]))
            });
        if let Some((c, _)) = best {
            m.link(t, c);
            recover(src, t, dst, c, m);
        }
    }
    let (rs, rd) = (src.tree.root(), dst.tree.root());
    if m.src_to_dst[rs].is_none()
        && m.dst_to_src[rd].is_none()
        && src.tree.kind(rs) == dst.tree.kind(rd)
    {
        m.link(rs, rd);
        recover(src, rs, dst, rd, m);
    }
}

/// Matches still-unmatched children of a freshly matched pair: isomorphic
/// subtrees first, then same-kind nodes, recursing into each new pair.
fn recover(src: &Index, s: NodeId, dst: &Index, d: NodeId, m: &mut Matching) {
    let free_src = |m: &Matching| -> Vec<NodeId> {
        src.tree
            .children(s)
            .iter()
            .copied()
            .filter(|&c| m.src_to_dst[c].is_none())
            .collect()
    };
    let free_dst = |m: &Matching| -> Vec<NodeId> {
        dst.tree
            .children(d)
            .iter()
            .copied()
            .filter(|&c| m.dst_to_src[c].is_none())
            .collect()
    };

    let (a, b) = (free_src(m), free_dst(m));
    for (i, j) in lcs_pairs(&a, &b, |&x, &y| {
        src.hash[x] == dst.hash[y] && src.tree.isomorphic(x, dst.tree, y)
    }) {
        m.link_subtrees(src, a[i], dst, b[j]);
    }

    let (a, b) = (free_src(m), free_dst(m));
    let pairs = lcs_pairs(&a, &b, |&x, &y| src.tree.kind(x) == dst.tree.kind(y));
    for &(i, j) in &pairs {
        m.link(a[i], b[j]);
    }
    for (i, j) in pairs {
        recover(src, a[i], dst, b[j], m);
    }
}

/// Mutable working copy used both to generate and to replay scripts.
struct Work {
    nodes: Vec<TreeNode>,
    parent: Vec<Option<NodeId>>,
    vroot: NodeId,
}

impl Work {
    fn from_source(src: &GenericTree) -> Self {
        let mut nodes: Vec<TreeNode> = (0..src.len()).map(|i| src.node(i).clone()).collect();
        let vroot = nodes.len();
        nodes.push(TreeNode {
            kind: String::new(),
            value: None,
            children: vec![src.root()],
        });
        let mut parent = src.parents();
        parent.push(None);
        parent[src.root()] = Some(vroot);
        Work {
            nodes,
            parent,
            vroot,
        }
    }

    fn detach(&mut self, id: NodeId) -> Result<()> {
        let p = self.parent[id].ok_or_else(|| Error::Other(format!("node {id} is detached")))?;
        self.nodes[p].children.retain(|&c| c != id);
        self.parent[id] = None;
        Ok(())
    }

    fn attach(&mut self, id: NodeId, parent: NodeId, pos: usize) -> Result<()> {
        let siblings = &mut self.nodes[parent].children;
        if pos > siblings.len() {
            return Err(Error::Other(format!(
                "position {pos} beyond {} children of node {parent}",
                siblings.len()
            )));
        }
        siblings.insert(pos, id);
        self.parent[id] = Some(parent);
        Ok(())
    }

    fn is_ancestor_or_self(&self, a: NodeId, mut b: NodeId) -> bool {
        loop {
            if a == b {
                return true;
            }
            match self.parent[b] {
                Some(p) => b = p,
                None => return false,
            }
        }
    }

    fn into_tree(self) -> Result<GenericTree> {
        let top = &self.nodes[self.vroot].children;
        if top.len() != 1 {
            return Err(Error::Other(format!(
                "script leaves {} roots",
                top.len()
            )));
        }
        let root = top[0];
        // compact reachable nodes into a fresh arena
        let mut map = HashMap::new();
        let mut order = vec![root];
        let mut i = 0;
        while i < order.len() {
            let id = order[i];
            map.insert(id, i);
            order.extend(self.nodes[id].children.iter().copied());
            i += 1;
        }
        let nodes = order
            .iter()
            .map(|&id| {
                let n = &self.nodes[id];
                TreeNode {
                    kind: n.kind.clone(),
                    value: n.value.clone(),
                    children: n.children.iter().map(|c| map[c]).collect(),
                }
            })
            .collect();
        GenericTree::from_parts(nodes, 0)
            .ok_or_else(|| Error::Other("script produced a malformed tree".into()))
    }
}

/// Computes an edit script transforming `a` into `b`.
pub fn edit_script(a: &GenericTree, b: &GenericTree) -> EditScript {
    let src = Index::new(a);
    let dst = Index::new(b);
    let matching = match_trees(&src, &dst);
    ScriptBuilder::new(a, b, &dst, matching).run()
}

struct ScriptBuilder<'a> {
    work: Work,
    dst: &'a GenericTree,
    dst_parent: Vec<Option<NodeId>>,
    dst_vroot: NodeId,
    /// work id -> dst id (dst virtual root is `dst_vroot`)
    w2d: Vec<Option<NodeId>>,
    /// dst id -> work id
    d2w: Vec<Option<NodeId>>,
    dst_in_order: Vec<bool>,
    actions: Vec<EditAction>,
}

impl<'a> ScriptBuilder<'a> {
    fn new(a: &GenericTree, b: &'a GenericTree, dst: &Index, m: Matching) -> Self {
        let work = Work::from_source(a);
        let dst_vroot = b.len();
        let mut w2d: Vec<Option<NodeId>> = m.src_to_dst.clone();
        w2d.push(Some(dst_vroot));
        let mut d2w = m.dst_to_src.clone();
        d2w.push(Some(work.vroot));
        let mut dst_parent = dst.parent.clone();
        dst_parent.push(None);
        dst_parent[b.root()] = Some(dst_vroot);
        ScriptBuilder {
            work,
            dst: b,
            dst_parent,
            dst_vroot,
            w2d,
            d2w,
            dst_in_order: vec![false; b.len() + 1],
            actions: Vec::new(),
        }
    }

    fn dst_children(&self, d: NodeId) -> Vec<NodeId> {
        if d == self.dst_vroot {
            vec![self.dst.root()]
        } else {
            self.dst.children(d).to_vec()
        }
    }

    fn run(mut self) -> EditScript {
        let mut queue = VecDeque::from([self.dst_vroot]);
        while let Some(x) = queue.pop_front() {
            queue.extend(self.dst_children(x));
            if x == self.dst_vroot {
                self.align_children(self.work.vroot, x);
                continue;
            }
            let y = self.dst_parent[x].expect("non-root dst node has a parent");
            let z = self.d2w[y].expect("dst parents are processed first");
            let w = match self.d2w[x] {
                None => {
                    let k = self.find_pos(x);
                    let w = self.work.nodes.len();
                    let node = self.dst.node(x);
                    self.work.nodes.push(TreeNode {
                        kind: node.kind.clone(),
                        value: node.value.clone(),
                        children: Vec::new(),
                    });
                    self.work.parent.push(None);
                    self.work.attach(w, z, k).expect("valid insert position");
                    self.w2d.push(Some(x));
                    self.d2w[x] = Some(w);
                    self.actions.push(EditAction {
                        op: EditOp::Insert,
                        node: w,
                        label: node.kind.clone(),
                        value: node.value.clone(),
                        old_value: None,
                        parent: Some(z),
                        position: Some(k),
                    });
                    self.dst_in_order[x] = true;
                    w
                }
                Some(w) => {
                    let new_value = self.dst.value(x);
                    if self.work.nodes[w].value.as_deref() != new_value {
                        let old = self.work.nodes[w].value.take();
                        self.work.nodes[w].value = new_value.map(str::to_owned);
                        self.actions.push(EditAction {
                            op: EditOp::Update,
                            node: w,
                            label: self.work.nodes[w].kind.clone(),
                            value: new_value.map(str::to_owned),
                            old_value: old,
                            parent: None,
                            position: None,
                        });
                    }
                    let v = self.work.parent[w].expect("matched node is attached");
                    if self.w2d[v] != Some(y) {
                        self.work.detach(w).expect("attached");
                        let k = self.find_pos(x);
                        self.work.attach(w, z, k).expect("valid move position");
                        self.actions.push(EditAction {
                            op: EditOp::Move,
                            node: w,
                            label: self.work.nodes[w].kind.clone(),
                            value: None,
                            old_value: None,
                            parent: Some(z),
                            position: Some(k),
                        });
                        self.dst_in_order[x] = true;
                    }
                    w
                }
            };
            self.align_children(w, x);
        }

        // deletes, children before parents
        let mut post = Vec::new();
        let mut stack = vec![(self.work.vroot, false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                post.push(id);
            } else {
                stack.push((id, true));
                stack.extend(self.work.nodes[id].children.iter().map(|&c| (c, false)));
            }
        }
        for id in post {
            if self.w2d[id].is_none() {
                self.work.detach(id).expect("attached");
                self.actions.push(EditAction {
                    op: EditOp::Delete,
                    node: id,
                    label: self.work.nodes[id].kind.clone(),
                    value: None,
                    old_value: None,
                    parent: None,
                    position: None,
                });
            }
        }
        EditScript {
            actions: self.actions,
        }
    }

    fn align_children(&mut self, w: NodeId, x: NodeId) {
        let wc = self.work.nodes[w].children.clone();
        let xc = self.dst_children(x);
        for &c in &xc {
            self.dst_in_order[c] = false;
        }
        let s1: Vec<NodeId> = wc
            .iter()
            .copied()
            .filter(|&c| self.w2d[c].is_some_and(|d| self.dst_parent[d] == Some(x)))
            .collect();
        let s2: Vec<NodeId> = xc
            .iter()
            .copied()
            .filter(|&c| self.d2w[c].is_some_and(|k| self.work.parent[k] == Some(w)))
            .collect();
        let lcs = lcs_pairs(&s1, &s2, |&a, &b| self.w2d[a] == Some(b));
        let mut in_lcs = vec![false; s2.len()];
        for &(_, j) in &lcs {
            self.dst_in_order[s2[j]] = true;
            in_lcs[j] = true;
        }
        for (j, &b) in s2.iter().enumerate() {
            if in_lcs[j] {
                continue;
            }
            let a = self.d2w[b].expect("s2 members are matched");
            self.work.detach(a).expect("attached");
            let k = self.find_pos(b);
            self.work.attach(a, w, k).expect("valid align position");
            self.actions.push(EditAction {
                op: EditOp::Move,
                node: a,
                label: self.work.nodes[a].kind.clone(),
                value: None,
                old_value: None,
                parent: Some(w),
                position: Some(k),
            });
            self.dst_in_order[b] = true;
        }
    }

    /// Position in the working parent right after the partner of the nearest
    /// in-order left sibling of `x`.
    fn find_pos(&self, x: NodeId) -> usize {
        let y = self.dst_parent[x].expect("non-root");
        let siblings = self.dst_children(y);
        let me = siblings.iter().position(|&s| s == x).expect("child of parent");
        let left = siblings[..me]
            .iter()
            .rev()
            .find(|&&v| self.dst_in_order[v]);
        match left {
            None => 0,
            Some(&v) => {
                let u = self.d2w[v].expect("in-order nodes are matched");
                let p = self.work.parent[u].expect("attached");
                self.work.nodes[p]
                    .children
                    .iter()
                    .position(|&c| c == u)
                    .expect("child of parent")
                    + 1
            }
        }
    }
}

/// Replays `script` on a copy of `src`.
pub fn apply(script: &EditScript, src: &GenericTree) -> Result<GenericTree> {
    let mut work = Work::from_source(src);
    for (i, action) in script.actions.iter().enumerate() {
        let bad = |msg: &str| Error::Other(format!("action {i} ({:?}): {msg}", action.op));
        let node = action.node;
        match action.op {
            EditOp::Insert => {
                if node != work.nodes.len() {
                    return Err(bad("inserted ids must be consecutive"));
                }
                let parent = action.parent.ok_or_else(|| bad("missing parent"))?;
                let pos = action.position.ok_or_else(|| bad("missing position"))?;
                if parent >= work.nodes.len() {
                    return Err(bad("unknown parent"));
                }
                work.nodes.push(TreeNode {
                    kind: action.label.clone(),
                    value: action.value.clone(),
                    children: Vec::new(),
                });
                work.parent.push(None);
                work.attach(node, parent, pos)?;
            }
            EditOp::Delete => {
                if node >= work.nodes.len() || !work.nodes[node].children.is_empty() {
                    return Err(bad("only attached leaves can be deleted"));
                }
                work.detach(node)?;
            }
            EditOp::Update => {
                if node >= work.nodes.len() || work.nodes[node].value != action.old_value {
                    return Err(bad("old value does not match"));
                }
                work.nodes[node].value = action.value.clone();
            }
            EditOp::Move => {
                let parent = action.parent.ok_or_else(|| bad("missing parent"))?;
                let pos = action.position.ok_or_else(|| bad("missing position"))?;
                if node >= work.nodes.len() || parent >= work.nodes.len() {
                    return Err(bad("unknown node"));
                }
                if work.is_ancestor_or_self(node, parent) {
                    return Err(bad("cannot move a node below itself"));
                }
                work.detach(node)?;
                work.attach(node, parent, pos)?;
            }
        }
    }
    work.into_tree()
}

/// Dice coefficient of two multisets given as sorted count maps.
pub(crate) fn multiset_dice<K: Ord>(a: &BTreeMap<K, usize>, b: &BTreeMap<K, usize>) -> f64 {
    let total: usize = a.values().sum::<usize>() + b.values().sum::<usize>();
    if total == 0 {
        return 1.0;
    }
    let common: usize = a
        .iter()
        .filter_map(|(k, &n)| b.get(k).map(|&m| n.min(m)))
        .sum();
    2.0 * common as f64 / total as f64
}

fn counts<K: Ord>(items: impl Iterator<Item = K>) -> BTreeMap<K, usize> {
    let mut map = BTreeMap::new();
    for k in items {
        *map.entry(k).or_insert(0) += 1;
    }
    map
}

/// Weighted blend of two Dice coefficients: over the multisets of action
/// kinds, and over the multisets of `(kind, node label)` pairs.
pub fn action_similarity(s1: &EditScript, s2: &EditScript, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha >= 0.0 && beta >= 0.0 && alpha + beta > 0.0) {
        return Err(Error::InvalidConfig {
            field: "alpha",
            reason: format!("alpha ({alpha}) and beta ({beta}) must be non-negative with a positive sum"),
        });
    }
    let kinds = multiset_dice(
        &counts(s1.actions.iter().map(|a| a.op)),
        &counts(s2.actions.iter().map(|a| a.op)),
    );
    let labelled = multiset_dice(
        &counts(s1.actions.iter().map(|a| (a.op, a.label.as_str()))),
        &counts(s2.actions.iter().map(|a| (a.op, a.label.as_str()))),
    );
    Ok((alpha * kinds + beta * labelled) / (alpha + beta))
}
