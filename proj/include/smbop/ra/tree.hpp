#pragma once

#include <memory>
#include <string>
#include <vector>

#include "smbop/ra/types.hpp"

namespace smbop::ra {

enum class LeafKind : std::uint8_t { Table, Column, Value, Star };

/// A tree leaf: a DB constant (table or column), the anonymized value token,
/// or star. `name` is the serialized form ("actor", "actor.age", "value",
/// "*"); `index` points into the schema when the tree was built against one
/// (-1 for detached trees, value and star).
struct Leaf {
    LeafKind kind = LeafKind::Value;
    std::string name = "value";
    int index = -1;

    static Leaf table(std::string name, int index = -1) {
        return Leaf{LeafKind::Table, std::move(name), index};
    }
    static Leaf column(std::string qualified, int index = -1) {
        return Leaf{LeafKind::Column, std::move(qualified), index};
    }
    static Leaf value() { return Leaf{LeafKind::Value, "value", -1}; }
    static Leaf star() { return Leaf{LeafKind::Star, "*", -1}; }

    SemanticType type() const {
        return kind == LeafKind::Table ? SemanticType::Relation : SemanticType::Constant;
    }

    friend bool operator==(const Leaf& a, const Leaf& b) {
        return a.kind == b.kind && a.name == b.name;
    }
};

class RaNode;
using RaTree = std::shared_ptr<const RaNode>;

/// One immutable tree node. Height, size and output type are computed once at
/// construction; construction through the checked factories below is the only
/// way to build a node, so every tree in the system is type-valid.
class RaNode {
  public:
    enum class Kind : std::uint8_t { Leaf, Unary, Binary };

    Kind kind() const { return kind_; }
    bool is_leaf() const { return kind_ == Kind::Leaf; }
    const Leaf& leaf() const { return leaf_; }
    RaOpId op() const { return op_; }
    const RaTree& left() const { return left_; }
    const RaTree& right() const { return right_; }
    int height() const { return height_; }
    int size() const { return size_; }
    SemanticType out_type() const { return out_type_; }

    static RaTree make_leaf(Leaf leaf) {
        auto n = std::make_shared<RaNode>(Private{});
        n->kind_ = Kind::Leaf;
        n->leaf_ = std::move(leaf);
        n->height_ = 0;
        n->size_ = 1;
        n->out_type_ = n->leaf_.type();
        return n;
    }

    static RaTree make_unary(RaOpId op, RaTree child, const std::string& path = "") {
        const RaOp& info = op_info(op);
        if (info.arity != 1) throw TypeError(path, std::string(info.name) + " is not unary");
        if (!accepts(info.in1, child->out_type()))
            throw TypeError(path, std::string(info.name) + " cannot take " +
                                      std::string(type_name(child->out_type())));
        auto n = std::make_shared<RaNode>(Private{});
        n->kind_ = Kind::Unary;
        n->op_ = op;
        n->height_ = child->height() + 1;
        n->size_ = child->size() + 1;
        // Keep is the identity on types; everything else uses its signature.
        n->out_type_ = op == RaOpId::Keep ? child->out_type() : info.out;
        n->left_ = std::move(child);
        return n;
    }

    static RaTree make_binary(RaOpId op, RaTree left, RaTree right, const std::string& path = "") {
        const RaOp& info = op_info(op);
        if (info.arity != 2) throw TypeError(path, std::string(info.name) + " is not binary");
        if (!accepts(info.in1, left->out_type()))
            throw TypeError(path, std::string(info.name) + " first child cannot be " +
                                      std::string(type_name(left->out_type())));
        if (!accepts(info.in2, right->out_type()))
            throw TypeError(path, std::string(info.name) + " second child cannot be " +
                                      std::string(type_name(right->out_type())));
        auto n = std::make_shared<RaNode>(Private{});
        n->kind_ = Kind::Binary;
        n->op_ = op;
        n->height_ = 1 + std::max(left->height(), right->height());
        n->size_ = 1 + left->size() + right->size();
        n->out_type_ = info.out;
        n->left_ = std::move(left);
        n->right_ = std::move(right);
        return n;
    }

    struct Private {};
    explicit RaNode(Private) {}

  private:
    Kind kind_ = Kind::Leaf;
    RaOpId op_ = RaOpId::Keep;
    Leaf leaf_;
    RaTree left_;
    RaTree right_;
    int height_ = 0;
    int size_ = 1;
    SemanticType out_type_ = SemanticType::Constant;
};

inline RaTree leaf(Leaf l) { return RaNode::make_leaf(std::move(l)); }
inline RaTree unary(RaOpId op, RaTree child) { return RaNode::make_unary(op, std::move(child)); }
inline RaTree binary(RaOpId op, RaTree l, RaTree r) {
    return RaNode::make_binary(op, std::move(l), std::move(r));
}
inline RaTree keep(RaTree child) { return unary(RaOpId::Keep, std::move(child)); }

inline bool structural_equal(const RaTree& a, const RaTree& b) {
    if (a.get() == b.get()) return true;
    if (a->kind() != b->kind()) return false;
    switch (a->kind()) {
        case RaNode::Kind::Leaf: return a->leaf() == b->leaf();
        case RaNode::Kind::Unary:
            return a->op() == b->op() && structural_equal(a->left(), b->left());
        case RaNode::Kind::Binary:
            return a->op() == b->op() && structural_equal(a->left(), b->left()) &&
                   structural_equal(a->right(), b->right());
    }
    return false;
}

// --- text serialization -----------------------------------------------------
// Prefix notation with parentheses: "(op child...)"; leaves print their name.
// This form is bit-exact: it feeds the canonical digest and the trace files.

inline void serialize_into(const RaTree& t, std::string& out) {
    if (t->is_leaf()) {
        out += t->leaf().name;
        return;
    }
    out += '(';
    out += op_info(t->op()).name;
    out += ' ';
    serialize_into(t->left(), out);
    if (t->kind() == RaNode::Kind::Binary) {
        out += ' ';
        serialize_into(t->right(), out);
    }
    out += ')';
}

inline std::string serialize(const RaTree& t) {
    std::string out;
    out.reserve(static_cast<std::size_t>(t->size()) * 12);
    serialize_into(t, out);
    return out;
}

namespace detail {

struct TreeParser {
    std::string_view text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    }

    [[noreturn]] void fail(const std::string& msg) { throw SyntaxError(pos, msg); }

    std::string_view token() {
        std::size_t start = pos;
        while (pos < text.size() && text[pos] != ' ' && text[pos] != '\t' && text[pos] != '(' &&
               text[pos] != ')')
            ++pos;
        if (pos == start) fail("expected token");
        return text.substr(start, pos - start);
    }

    RaTree parse_node() {
        skip_ws();
        if (pos >= text.size()) fail("unexpected end of input");
        if (text[pos] != '(') {
            std::string_view tok = token();
            if (tok == "value") return leaf(Leaf::value());
            if (tok == "*") return leaf(Leaf::star());
            if (tok.find('.') != std::string_view::npos) return leaf(Leaf::column(std::string(tok)));
            return leaf(Leaf::table(std::string(tok)));
        }
        ++pos;  // '('
        skip_ws();
        std::string_view opname = token();
        const RaOp* op = op_by_name(opname);
        if (!op) fail("unknown op: " + std::string(opname));
        RaTree first = parse_node();
        RaTree node;
        if (op->arity == 1) {
            node = RaNode::make_unary(op->id, std::move(first));
        } else {
            RaTree second = parse_node();
            node = RaNode::make_binary(op->id, std::move(first), std::move(second));
        }
        skip_ws();
        if (pos >= text.size() || text[pos] != ')') fail("expected ')'");
        ++pos;
        return node;
    }
};

}  // namespace detail

/// Parses the prefix serialization back into a tree. Leaves resolve by shape
/// alone: a dotted name is a column, "value"/"*" are the special leaves, any
/// other bare identifier is a table.
inline RaTree parse_tree(std::string_view text) {
    detail::TreeParser p{text};
    RaTree t = p.parse_node();
    p.skip_ws();
    if (p.pos != text.size()) throw SyntaxError(p.pos, "trailing input");
    return t;
}

// --- type inference ----------------------------------------------------------

namespace detail {
inline SemanticType infer_type_at(const RaTree& t, const std::string& path) {
    if (t->is_leaf()) return t->leaf().type();
    const RaOp& info = op_info(t->op());
    SemanticType lt = infer_type_at(t->left(), path.empty() ? "0" : path + ".0");
    if (!accepts(info.in1, lt))
        throw TypeError(path, std::string(info.name) + " got " + std::string(type_name(lt)) +
                                  " as first input");
    if (info.arity == 2) {
        SemanticType rt = infer_type_at(t->right(), path.empty() ? "1" : path + ".1");
        if (!accepts(info.in2, rt))
            throw TypeError(path, std::string(info.name) + " got " + std::string(type_name(rt)) +
                                      " as second input");
    }
    return t->op() == RaOpId::Keep ? lt : info.out;
}
}  // namespace detail

/// Re-checks every node against its op signature and returns the root type.
/// Trees built through the factories always pass; this is the audit path for
/// parsed or hand-assembled trees.
inline SemanticType infer_type(const RaTree& t) { return detail::infer_type_at(t, ""); }

inline bool is_returnable(const RaTree& t) { return t->out_type() == SemanticType::Relation; }

}  // namespace smbop::ra
