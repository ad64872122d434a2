//! Persistent matching stacks.
//!
//! Every stack is a path from a root frame up to its top, and stacks that
//! share a prefix share the frames. Pushing allocates one frame; popping and
//! copying only move handles, so rollback and branching never touch the
//! frames themselves. Frames are reference counted and freed as soon as no
//! stack or history entry points at them.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::pda::NodeId;

/// Allocation counters shared by every frame of one tree.
#[derive(Debug, Default)]
pub struct ArenaStats {
    allocated: AtomicU64,
    freed: AtomicU64,
}

impl ArenaStats {
    /// Frames ever allocated.
    pub fn allocated(&self) -> u64 {
        self.allocated.load(Ordering::Relaxed)
    }

    /// Frames currently alive.
    pub fn live(&self) -> u64 {
        self.allocated() - self.freed.load(Ordering::Relaxed)
    }
}

struct Frame {
    node: NodeId,
    parent: Option<StackRef>,
    hash: u64,
    depth: u32,
    stats: Arc<ArenaStats>,
}

impl Drop for Frame {
    fn drop(&mut self) {
        self.stats.freed.fetch_add(1, Ordering::Relaxed);
        // Unlink uniquely owned ancestors one at a time so a long chain
        // never recurses.
        let mut next = self.parent.take();
        while let Some(p) = next {
            match Arc::try_unwrap(p.0) {
                Ok(mut f) => next = f.parent.take(),
                Err(_) => break,
            }
        }
    }
}

/// Handle to the top frame of one stack.
#[derive(Clone)]
pub struct StackRef(Arc<Frame>);

impl StackRef {
    #[inline]
    pub fn node(&self) -> NodeId {
        self.0.node
    }

    #[inline]
    pub fn parent(&self) -> Option<&StackRef> {
        self.0.parent.as_ref()
    }

    /// Number of frames, the top included.
    #[inline]
    pub fn depth(&self) -> u32 {
        self.0.depth
    }

    pub fn ptr_eq(&self, other: &StackRef) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Nodes from the bottom frame to the top.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.depth() as usize);
        let mut cur = Some(self);
        while let Some(s) = cur {
            out.push(s.node());
            cur = s.parent();
        }
        out.reverse();
        out
    }

    pub fn stats(&self) -> &Arc<ArenaStats> {
        &self.0.stats
    }
}

impl PartialEq for StackRef {
    fn eq(&self, other: &Self) -> bool {
        let (mut a, mut b) = (self, other);
        loop {
            if Arc::ptr_eq(&a.0, &b.0) {
                return true;
            }
            if a.0.hash != b.0.hash || a.0.depth != b.0.depth || a.0.node != b.0.node {
                return false;
            }
            match (a.parent(), b.parent()) {
                (Some(x), Some(y)) => (a, b) = (x, y),
                (None, None) => return true,
                _ => return false,
            }
        }
    }
}

impl Eq for StackRef {}

impl Hash for StackRef {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Debug for StackRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.nodes().iter().map(|n| n.0)).finish()
    }
}

#[inline]
fn mix(parent: u64, node: NodeId) -> u64 {
    let x = (parent ^ u64::from(node.0).wrapping_add(0x9E37_79B9_7F4A_7C15)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^ (x >> 31)
}

/// Allocator for frames of one family of stacks.
#[derive(Clone, Default)]
pub struct StackTree {
    stats: Arc<ArenaStats>,
}

impl StackTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> &Arc<ArenaStats> {
        &self.stats
    }

    /// A new frame for `node` on top of `parent`.
    pub fn push(&self, parent: Option<&StackRef>, node: NodeId) -> StackRef {
        self.stats.allocated.fetch_add(1, Ordering::Relaxed);
        let (hash, depth) = match parent {
            Some(p) => (mix(p.0.hash, node), p.0.depth + 1),
            None => (mix(0, node), 1),
        };
        StackRef(Arc::new(Frame { node, parent: parent.cloned(), hash, depth, stats: self.stats.clone() }))
    }

    /// Builds a stack from bottom-to-top nodes.
    pub fn from_nodes(&self, nodes: &[NodeId]) -> Option<StackRef> {
        let mut cur: Option<StackRef> = None;
        for &n in nodes {
            cur = Some(self.push(cur.as_ref(), n));
        }
        cur
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    #[test]
    fn shared_prefixes_are_shared() {
        let t = StackTree::new();
        let base = t.from_nodes(&[n(1), n(2), n(3)]).unwrap();
        let a = t.push(Some(&base), n(4));
        let b = t.push(Some(&base), n(5));
        assert_eq!(t.stats().allocated(), 5);
        assert_eq!(a.nodes(), vec![n(1), n(2), n(3), n(4)]);
        assert!(b.parent().unwrap().ptr_eq(&base));
        assert_eq!(a.depth(), 4);
    }

    #[test]
    #[allow(clippy::mutable_key_type)]
    fn structural_equality_across_allocations() {
        let t = StackTree::new();
        let a = t.from_nodes(&[n(1), n(2)]).unwrap();
        let b = t.from_nodes(&[n(1), n(2)]).unwrap();
        let c = t.from_nodes(&[n(2), n(2)]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let set: HashSet<StackRef> = [a, b, c].into_iter().collect();
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn frames_are_freed() {
        let t = StackTree::new();
        let a = t.from_nodes(&[n(1), n(2), n(3)]).unwrap();
        let keep = a.parent().unwrap().clone();
        drop(a);
        assert_eq!(t.stats().live(), 2);
        drop(keep);
        assert_eq!(t.stats().live(), 0);
    }

    #[test]
    fn deep_chain_drops_without_recursion() {
        let t = StackTree::new();
        let mut cur: Option<StackRef> = None;
        for i in 0..200_000 {
            cur = Some(t.push(cur.as_ref(), n(i % 7)));
        }
        drop(cur);
        assert_eq!(t.stats().live(), 0);
    }
}
