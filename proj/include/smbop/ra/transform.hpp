#pragma once

#include <algorithm>
#include <unordered_set>
#include <vector>

#include "smbop/ra/tree.hpp"

namespace smbop::ra {

/// Wraps `t` in a chain of `n` Keep nodes.
inline RaTree keep_chain(RaTree t, int n) {
    for (int i = 0; i < n; ++i) t = keep(std::move(t));
    return t;
}

/// Balances a tree so every leaf sits at depth == height, inserting only Keep
/// nodes. For a binary node both children are balanced first, then the
/// shallower child is padded with a Keep chain directly above its root.
/// Height is preserved and strip_keep(balance(t)) == t.
inline RaTree balance(const RaTree& t) {
    switch (t->kind()) {
        case RaNode::Kind::Leaf: return t;
        case RaNode::Kind::Unary: return unary(t->op(), balance(t->left()));
        case RaNode::Kind::Binary: {
            RaTree l = balance(t->left());
            RaTree r = balance(t->right());
            int hl = l->height(), hr = r->height();
            if (hl < hr) l = keep_chain(std::move(l), hr - hl);
            if (hr < hl) r = keep_chain(std::move(r), hl - hr);
            return binary(t->op(), std::move(l), std::move(r));
        }
    }
    return t;
}

/// Removes every Keep node. Total; the identity on Keep-free trees.
inline RaTree strip_keep(const RaTree& t) {
    switch (t->kind()) {
        case RaNode::Kind::Leaf: return t;
        case RaNode::Kind::Unary: {
            RaTree child = strip_keep(t->left());
            if (t->op() == RaOpId::Keep) return child;
            if (child.get() == t->left().get()) return t;
            return unary(t->op(), std::move(child));
        }
        case RaNode::Kind::Binary: {
            RaTree l = strip_keep(t->left());
            RaTree r = strip_keep(t->right());
            if (l.get() == t->left().get() && r.get() == t->right().get()) return t;
            return binary(t->op(), std::move(l), std::move(r));
        }
    }
    return t;
}

namespace detail {
// Returns the canonical tree and its serialization in one pass.
inline std::pair<RaTree, std::string> canonicalize_impl(const RaTree& t) {
    if (t->is_leaf()) return {t, t->leaf().name};
    if (t->op() == RaOpId::Keep) return canonicalize_impl(t->left());
    auto [l, ls] = canonicalize_impl(t->left());
    std::string opname(op_info(t->op()).name);
    if (t->kind() == RaNode::Kind::Unary)
        return {unary(t->op(), std::move(l)), "(" + opname + " " + ls + ")"};
    auto [r, rs] = canonicalize_impl(t->right());
    if (is_commutative(t->op()) && rs < ls) {
        std::swap(l, r);
        std::swap(ls, rs);
    }
    return {binary(t->op(), std::move(l), std::move(r)), "(" + opname + " " + ls + " " + rs + ")"};
}
}  // namespace detail

/// Canonical form: Keep stripped, children of commutative ops sorted by their
/// recursive canonical serialization. Idempotent; canonical equality is the
/// tree-equivalence relation used by exact match and the re-ranker loss.
inline RaTree canonicalize(const RaTree& t) { return detail::canonicalize_impl(t).first; }

inline std::string canonical_serialization(const RaTree& t) {
    return detail::canonicalize_impl(t).second;
}

/// 128-bit digest of the canonical serialization. Equal digests identify
/// canonically equal trees; collisions are negligible at this scale.
inline Digest canonical_digest(const RaTree& t) { return fnv128(canonical_serialization(t)); }

inline bool equivalent(const RaTree& a, const RaTree& b) {
    return canonical_serialization(a) == canonical_serialization(b);
}

namespace detail {
inline bool is_balanced_rec(const RaTree& t) {
    switch (t->kind()) {
        case RaNode::Kind::Leaf: return true;
        case RaNode::Kind::Unary: return is_balanced_rec(t->left());
        case RaNode::Kind::Binary:
            return t->left()->height() == t->right()->height() && is_balanced_rec(t->left()) &&
                   is_balanced_rec(t->right());
    }
    return true;
}
}  // namespace detail

/// All leaves at depth exactly `height()`.
inline bool is_balanced(const RaTree& t) { return detail::is_balanced_rec(t); }

/// The set of distinct subtrees of height exactly `t`, for every t up to the
/// root height, deduplicated by canonical digest (one representative kept, in
/// preorder encounter order). slice 0 is the leaf set; the top slice is the
/// root alone. Throws UnbalancedInput when some leaf is not at full depth.
inline std::vector<std::vector<RaTree>> level_slices(const RaTree& balanced) {
    if (!is_balanced(balanced)) throw UnbalancedInput("level_slices requires a balanced tree");
    std::vector<std::vector<RaTree>> slices(static_cast<std::size_t>(balanced->height()) + 1);
    std::vector<std::unordered_set<Digest, DigestHash>> seen(slices.size());
    // preorder walk; each node is the root of exactly one subtree of its height
    std::vector<RaTree> stack{balanced};
    while (!stack.empty()) {
        RaTree node = stack.back();
        stack.pop_back();
        auto h = static_cast<std::size_t>(node->height());
        if (seen[h].insert(canonical_digest(node)).second) slices[h].push_back(node);
        if (node->kind() == RaNode::Kind::Binary) stack.push_back(node->right());
        if (!node->is_leaf()) stack.push_back(node->left());
    }
    return slices;
}

/// Digest view of level_slices, the form the decoder and losses consume.
inline std::vector<std::vector<Digest>> level_slice_digests(const RaTree& balanced) {
    auto slices = level_slices(balanced);
    std::vector<std::vector<Digest>> out(slices.size());
    for (std::size_t t = 0; t < slices.size(); ++t) {
        out[t].reserve(slices[t].size());
        for (const auto& tree : slices[t]) out[t].push_back(canonical_digest(tree));
    }
    return out;
}

}  // namespace smbop::ra
