#pragma once

#include <set>
#include <string>
#include <vector>

#include "smbop/ra/transform.hpp"

namespace smbop::sql {

namespace detail {

using ra::RaNode;
using ra::RaOpId;
using ra::RaTree;

inline bool is_col(const RaTree& t) {
    return t->is_leaf() && t->leaf().kind == ra::LeafKind::Column;
}
inline bool is_value(const RaTree& t) {
    return t->is_leaf() && t->leaf().kind == ra::LeafKind::Value;
}
inline bool is_star(const RaTree& t) {
    return t->is_leaf() && t->leaf().kind == ra::LeafKind::Star;
}
inline bool is_table(const RaTree& t) {
    return t->is_leaf() && t->leaf().kind == ra::LeafKind::Table;
}

inline std::string leaf_table(const RaTree& col) {
    const std::string& n = col->leaf().name;
    return n.substr(0, n.find('.'));
}

inline std::string agg_keyword(RaOpId op) {
    switch (op) {
        case RaOpId::AggSum: return "SUM";
        case RaOpId::AggMax: return "MAX";
        case RaOpId::AggMin: return "MIN";
        case RaOpId::AggCount: return "COUNT";
        case RaOpId::AggAvg: return "AVG";
        default: throw Error("not an aggregation");
    }
}

struct Renderer {
    std::string render_query(const RaTree& t) {
        switch (t->kind() == RaNode::Kind::Binary ? t->op() : RaOpId::Keep) {
            case RaOpId::Union:
            case RaOpId::Intersect:
            case RaOpId::Except: {
                if (t->right()->kind() == RaNode::Kind::Binary &&
                    (t->right()->op() == RaOpId::Union || t->right()->op() == RaOpId::Intersect ||
                     t->right()->op() == RaOpId::Except))
                    throw UnrenderableShape("right-nested set operation");
                std::string kw = t->op() == RaOpId::Union       ? "UNION"
                                 : t->op() == RaOpId::Intersect ? "INTERSECT"
                                                                : "EXCEPT";
                return render_query(t->left()) + " " + kw + " " + render_body(t->right());
            }
            default: return render_body(t);
        }
    }

    std::string render_body(const RaTree& t) {
        RaTree core = t;
        std::string suffix;
        if (core->kind() == RaNode::Kind::Binary && core->op() == RaOpId::Limit) {
            if (!is_value(core->left())) throw UnrenderableShape("LIMIT needs the value token");
            suffix = " LIMIT 'value'";
            core = core->right();
        }
        if (core->kind() == RaNode::Kind::Binary &&
            (core->op() == RaOpId::OrderAsc || core->op() == RaOpId::OrderDsc)) {
            std::string dir = core->op() == RaOpId::OrderAsc ? "ASC" : "DESC";
            std::string ord = render_order_item(core->left());
            suffix = " ORDER BY " + ord + " " + dir + suffix;
            core = core->right();
        }
        return render_core(core) + suffix;
    }

    std::string render_order_item(const RaTree& t) {
        if (is_col(t)) return t->leaf().name;
        if (t->kind() == RaNode::Kind::Unary && ra::is_aggregation(t->op()) &&
            (is_col(t->left()) || is_star(t->left())))
            return agg_keyword(t->op()) + "(" + t->left()->leaf().name + ")";
        throw UnrenderableShape("ORDER BY item");
    }

    std::string render_core(const RaTree& t) {
        if (is_table(t)) return "SELECT * FROM " + t->leaf().name;
        if (t->kind() != RaNode::Kind::Binary || t->op() != RaOpId::Project)
            throw UnrenderableShape("expected projection");

        RaTree rel = t->right();
        RaTree having, group_col;
        if (rel->kind() == RaNode::Kind::Binary && rel->op() == RaOpId::Select &&
            rel->right()->kind() == RaNode::Kind::Binary &&
            rel->right()->op() == RaOpId::GroupBy) {
            having = rel->left();
            rel = rel->right();
        }
        if (rel->kind() == RaNode::Kind::Binary && rel->op() == RaOpId::GroupBy) {
            group_col = rel->left();
            if (!is_col(group_col)) throw UnrenderableShape("GROUP BY item");
            rel = rel->right();
        }
        RaTree pred;
        if (rel->kind() == RaNode::Kind::Binary && rel->op() == RaOpId::Select) {
            pred = rel->left();
            rel = rel->right();
        }

        // FROM: left-leaning product chain of distinct tables
        std::vector<RaTree> tables;
        flatten_left(rel, RaOpId::Product, tables);
        std::set<std::string> names;
        for (const auto& tb : tables) {
            if (!is_table(tb)) throw UnrenderableShape("FROM item is not a table");
            if (!names.insert(tb->leaf().name).second)
                throw UnrenderableShape("repeated table in FROM");
        }

        // split the predicate into join conditions and WHERE conjuncts
        std::vector<RaTree> conjuncts;
        if (pred) flatten_all(pred, RaOpId::And, conjuncts);
        std::size_t m = tables.size() - 1;
        std::vector<std::vector<std::string>> on(m);
        std::vector<RaTree> wheres;
        auto table_pos = [&](const std::string& name) -> int {
            for (std::size_t i = 0; i < tables.size(); ++i)
                if (tables[i]->leaf().name == name) return static_cast<int>(i);
            return -1;
        };
        for (const auto& c : conjuncts) {
            bool join_like = c->kind() == RaNode::Kind::Binary && c->op() == RaOpId::Eq &&
                             is_col(c->left()) && is_col(c->right());
            int slot = -1;
            if (join_like) {
                int pa = table_pos(leaf_table(c->left()));
                int pb = table_pos(leaf_table(c->right()));
                if (pa < 0 || pb < 0 || pa == pb) join_like = false;
                else slot = std::max(pa, pb);
            }
            if (join_like && m > 0)
                on[static_cast<std::size_t>(slot - 1)].push_back(
                    c->left()->leaf().name + " = " + c->right()->leaf().name);
            else
                wheres.push_back(c);
        }

        std::string from = tables[0]->leaf().name;
        for (std::size_t k = 0; k < m; ++k) {
            if (on[k].empty()) throw UnrenderableShape("join without condition");
            from += " JOIN " + tables[k + 1]->leaf().name + " ON " + join_str(on[k], " AND ");
        }

        std::string out = "SELECT " + render_items(t->left()) + " FROM " + from;
        if (!wheres.empty()) {
            std::vector<std::string> parts;
            for (const auto& w : wheres) {
                std::string s = render_bool(w, false);
                if (wheres.size() > 1 && has_op(w, RaOpId::Or)) s = "(" + s + ")";
                parts.push_back(std::move(s));
            }
            out += " WHERE " + join_str(parts, " AND ");
        }
        if (group_col) out += " GROUP BY " + group_col->leaf().name;
        if (having) out += " HAVING " + render_bool(having, true);
        return out;
    }

    std::string render_items(const RaTree& sel) {
        std::vector<RaTree> items;
        flatten_left(sel, RaOpId::CUnion, items);
        // an outer Distinct on every item means SELECT DISTINCT
        bool all_distinct = true;
        for (const auto& i : items)
            all_distinct &= i->kind() == RaNode::Kind::Unary && i->op() == RaOpId::Distinct;
        std::vector<std::string> parts;
        for (auto item : items) {
            if (all_distinct) item = item->left();
            parts.push_back(render_item(item));
        }
        return (all_distinct ? std::string("DISTINCT ") : std::string()) + join_str(parts, ", ");
    }

    std::string render_item(const RaTree& item) {
        if (is_col(item) || is_star(item)) return item->leaf().name;
        if (item->kind() == RaNode::Kind::Unary && ra::is_aggregation(item->op())) {
            RaTree inner = item->left();
            bool distinct = inner->kind() == RaNode::Kind::Unary && inner->op() == RaOpId::Distinct;
            if (distinct) inner = inner->left();
            if (!is_col(inner) && !(is_star(inner) && !distinct))
                throw UnrenderableShape("aggregation argument");
            return agg_keyword(item->op()) + "(" + (distinct ? "DISTINCT " : "") +
                   inner->leaf().name + ")";
        }
        throw UnrenderableShape("select item");
    }

    static bool has_op(const RaTree& t, RaOpId op) {
        return t->kind() == RaNode::Kind::Binary && t->op() == op;
    }

    // allow_agg: aggregates are legal operands only in HAVING.
    // Parentheses are the minimal set that makes reparsing rebuild the same
    // shape: OR binds loosest and chains fold left, so an OR child of AND and
    // any right-nested chain need wrapping.
    std::string render_bool(const RaTree& t, bool allow_agg) {
        if (t->kind() != RaNode::Kind::Binary) throw UnrenderableShape("predicate");
        switch (t->op()) {
            case RaOpId::And: {
                std::string l = render_bool(t->left(), allow_agg);
                if (has_op(t->left(), RaOpId::Or)) l = "(" + l + ")";
                std::string r = render_bool(t->right(), allow_agg);
                if (has_op(t->right(), RaOpId::Or) || has_op(t->right(), RaOpId::And))
                    r = "(" + r + ")";
                return l + " AND " + r;
            }
            case RaOpId::Or: {
                std::string l = render_bool(t->left(), allow_agg);
                std::string r = render_bool(t->right(), allow_agg);
                if (has_op(t->right(), RaOpId::Or)) r = "(" + r + ")";
                return l + " OR " + r;
            }
            case RaOpId::Le: return cmp(t, "<=", allow_agg);
            case RaOpId::Ge: return cmp(t, ">=", allow_agg);
            case RaOpId::Lt: return cmp(t, "<", allow_agg);
            case RaOpId::Gt: return cmp(t, ">", allow_agg);
            case RaOpId::Eq: return cmp(t, "=", allow_agg);
            case RaOpId::Neq: return cmp(t, "!=", allow_agg);
            case RaOpId::Like: return cmp(t, "LIKE", allow_agg);
            case RaOpId::NotLike: return cmp(t, "NOT LIKE", allow_agg);
            case RaOpId::In:
            case RaOpId::NotIn: {
                std::string kw = t->op() == RaOpId::In ? " IN (" : " NOT IN (";
                return render_operand(t->left(), allow_agg) + kw + render_query(t->right()) + ")";
            }
            default: throw UnrenderableShape("predicate op");
        }
    }

    std::string cmp(const RaTree& t, const std::string& op, bool allow_agg) {
        return render_operand(t->left(), allow_agg) + " " + op + " " +
               render_operand(t->right(), allow_agg);
    }

    std::string render_operand(const RaTree& t, bool allow_agg) {
        if (is_col(t)) return t->leaf().name;
        if (is_value(t)) return "'value'";
        if (allow_agg && t->kind() == RaNode::Kind::Unary && ra::is_aggregation(t->op()))
            return render_item(t);
        throw UnrenderableShape("operand");
    }

    // flattens only the left spine: a right child with the same op is a shape
    // the dialect cannot reproduce
    static void flatten_left(const RaTree& t, RaOpId op, std::vector<RaTree>& out) {
        if (t->kind() == RaNode::Kind::Binary && t->op() == op) {
            flatten_left(t->left(), op, out);
            out.push_back(t->right());
            return;
        }
        out.push_back(t);
    }

    static void flatten_all(const RaTree& t, RaOpId op, std::vector<RaTree>& out) {
        if (t->kind() == RaNode::Kind::Binary && t->op() == op) {
            flatten_all(t->left(), op, out);
            flatten_all(t->right(), op, out);
            return;
        }
        out.push_back(t);
    }

    static std::string join_str(const std::vector<std::string>& parts, const std::string& sep) {
        std::string out;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (i) out += sep;
            out += parts[i];
        }
        return out;
    }
};

}  // namespace detail

/// Renders a Relation-rooted tree back to dialect SQL. Keep nodes are ignored.
/// Throws NotReturnable for non-Relation roots and UnrenderableShape for
/// operator combinations outside the dialect's image.
inline std::string ra_to_sql(const ra::RaTree& tree) {
    if (tree->out_type() != ra::SemanticType::Relation)
        throw NotReturnable(std::string(ra::type_name(tree->out_type())) + "-rooted tree");
    detail::Renderer r;
    return r.render_query(ra::strip_keep(tree));
}

}  // namespace smbop::sql
