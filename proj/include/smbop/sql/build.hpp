#pragma once

#include "smbop/ra/transform.hpp"
#include "smbop/sql/ast.hpp"

namespace smbop::sql {

namespace detail {

inline ra::RaTree column_leaf(const Schema& s, int col) {
    return ra::leaf(ra::Leaf::column(s.qualified_column(col), col));
}

inline ra::RaTree table_leaf(const Schema& s, int table) {
    return ra::leaf(ra::Leaf::table(s.tables[static_cast<std::size_t>(table)], table));
}

inline ra::RaTree operand_tree(const Schema& s, const Operand& op) {
    switch (op.kind) {
        case Operand::Kind::Column: return column_leaf(s, op.column);
        case Operand::Kind::Value: return ra::leaf(ra::Leaf::value());
        case Operand::Kind::Agg: {
            ra::RaTree base = op.star ? ra::leaf(ra::Leaf::star()) : column_leaf(s, op.column);
            if (op.agg_distinct) base = ra::unary(ra::RaOpId::Distinct, std::move(base));
            return ra::unary(op.agg, std::move(base));
        }
    }
    throw Error("bad operand");
}

inline ra::RaTree build_query(const SqlAst& ast);

inline ra::RaTree bool_tree(const Schema& s, const BoolExpr& e) {
    switch (e.kind) {
        case BoolExpr::Kind::And:
            return ra::binary(ra::RaOpId::And, bool_tree(s, *e.lhs), bool_tree(s, *e.rhs));
        case BoolExpr::Kind::Or:
            return ra::binary(ra::RaOpId::Or, bool_tree(s, *e.lhs), bool_tree(s, *e.rhs));
        case BoolExpr::Kind::Cmp:
            return ra::binary(e.cmp, operand_tree(s, e.a), operand_tree(s, e.b));
        case BoolExpr::Kind::Like:
            return ra::binary(ra::RaOpId::Like, operand_tree(s, e.a), operand_tree(s, e.b));
        case BoolExpr::Kind::NotLike:
            return ra::binary(ra::RaOpId::NotLike, operand_tree(s, e.a), operand_tree(s, e.b));
        case BoolExpr::Kind::In:
            return ra::binary(ra::RaOpId::In, operand_tree(s, e.a), build_query(*e.subquery));
        case BoolExpr::Kind::NotIn:
            return ra::binary(ra::RaOpId::NotIn, operand_tree(s, e.a), build_query(*e.subquery));
    }
    throw Error("bad boolean expression");
}

inline ra::RaTree select_item_tree(const Schema& s, const SelectItem& item, bool global_distinct) {
    ra::RaTree t = item.star ? ra::leaf(ra::Leaf::star()) : column_leaf(s, item.column);
    if (item.agg) {
        if (item.distinct) t = ra::unary(ra::RaOpId::Distinct, std::move(t));
        t = ra::unary(*item.agg, std::move(t));
    }
    if (global_distinct) t = ra::unary(ra::RaOpId::Distinct, std::move(t));
    return t;
}

inline ra::RaTree build_core(const SqlAst& ast) {
    const Schema& s = *ast.schema;

    // FROM: left-leaning product chain
    ra::RaTree rel = table_leaf(s, ast.from_tables.at(0));
    for (std::size_t i = 1; i < ast.from_tables.size(); ++i)
        rel = ra::binary(ra::RaOpId::Product, std::move(rel), table_leaf(s, ast.from_tables[i]));

    // join conditions and WHERE fold into one selection
    ra::RaTree joins;
    for (const auto& j : ast.joins) {
        ra::RaTree cond =
            ra::binary(ra::RaOpId::Eq, column_leaf(s, j.lhs_col), column_leaf(s, j.rhs_col));
        joins = joins ? ra::binary(ra::RaOpId::And, std::move(joins), std::move(cond))
                      : std::move(cond);
    }
    ra::RaTree where = ast.where ? bool_tree(s, *ast.where) : nullptr;
    ra::RaTree pred = joins && where
                          ? ra::binary(ra::RaOpId::And, std::move(joins), std::move(where))
                          : (joins ? std::move(joins) : std::move(where));
    if (pred) rel = ra::binary(ra::RaOpId::Select, std::move(pred), std::move(rel));

    if (ast.group_by)
        rel = ra::binary(ra::RaOpId::GroupBy, column_leaf(s, *ast.group_by), std::move(rel));
    if (ast.having)
        rel = ra::binary(ra::RaOpId::Select, bool_tree(s, *ast.having), std::move(rel));

    // SELECT items: left-leaning constant-union chain under a projection
    ra::RaTree sel = select_item_tree(s, ast.select.at(0), ast.distinct_global);
    for (std::size_t i = 1; i < ast.select.size(); ++i)
        sel = ra::binary(ra::RaOpId::CUnion, std::move(sel),
                         select_item_tree(s, ast.select[i], ast.distinct_global));
    rel = ra::binary(ra::RaOpId::Project, std::move(sel), std::move(rel));

    if (ast.order_by) {
        Operand ord;
        if (ast.order_by->agg) {
            ord.kind = Operand::Kind::Agg;
            ord.agg = *ast.order_by->agg;
            ord.star = ast.order_by->star;
            ord.column = ast.order_by->column;
        } else {
            ord = Operand::col(ast.order_by->column);
        }
        rel = ra::binary(ast.order_by->asc ? ra::RaOpId::OrderAsc : ra::RaOpId::OrderDsc,
                         operand_tree(s, ord), std::move(rel));
    }
    if (ast.limit)
        rel = ra::binary(ra::RaOpId::Limit, ra::leaf(ra::Leaf::value()), std::move(rel));
    return rel;
}

inline ra::RaTree build_query(const SqlAst& ast) {
    if (!ast.set_op) return build_core(ast);
    ra::RaOpId op = *ast.set_op == SetOpKind::Union     ? ra::RaOpId::Union
                    : *ast.set_op == SetOpKind::Intersect ? ra::RaOpId::Intersect
                                                          : ra::RaOpId::Except;
    return ra::binary(op, build_query(*ast.left), build_query(*ast.right));
}

}  // namespace detail

/// Lowers a resolved AST to an unbalanced, type-valid relational-algebra
/// tree: JOIN conditions fold into one conjunction under a single selection,
/// select items chain with constant union, ORDER BY / LIMIT / set operations
/// stack above the projection.
inline ra::RaTree sql_to_ra(const SqlAst& ast) { return detail::build_query(ast); }

}  // namespace smbop::sql
