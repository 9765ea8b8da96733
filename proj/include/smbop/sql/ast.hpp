#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "smbop/ra/types.hpp"
#include "smbop/schema/schema.hpp"

namespace smbop::sql {

enum class SetOpKind : std::uint8_t { Union, Intersect, Except };

/// A scalar operand: a resolved column, the anonymized value token, or an
/// aggregate (HAVING / ORDER BY positions only).
struct Operand {
    enum class Kind : std::uint8_t { Column, Value, Agg };
    Kind kind = Kind::Value;
    int column = -1;  // Column, or Agg over a column
    bool star = false;
    ra::RaOpId agg = ra::RaOpId::AggCount;
    bool agg_distinct = false;

    static Operand col(int c) { return Operand{Kind::Column, c, false, ra::RaOpId::AggCount, false}; }
    static Operand value() { return Operand{Kind::Value, -1, false, ra::RaOpId::AggCount, false}; }
};

struct SqlAst;

/// WHERE / HAVING expression tree. And/Or use lhs/rhs; comparisons and LIKE
/// use operands a/b; IN carries the subquery.
struct BoolExpr {
    enum class Kind : std::uint8_t { And, Or, Cmp, Like, NotLike, In, NotIn };
    Kind kind = Kind::Cmp;
    std::unique_ptr<BoolExpr> lhs, rhs;
    ra::RaOpId cmp = ra::RaOpId::Eq;  // for Kind::Cmp
    Operand a, b;
    std::unique_ptr<SqlAst> subquery;
};

struct SelectItem {
    std::optional<ra::RaOpId> agg;
    bool distinct = false;  // AGG(DISTINCT col)
    bool star = false;
    int column = -1;
};

struct OrderBy {
    std::optional<ra::RaOpId> agg;
    bool star = false;
    int column = -1;
    bool asc = true;
};

/// One equality join condition, operands in written order.
struct JoinCond {
    int lhs_col = -1;
    int rhs_col = -1;
};

/// Resolved, anonymized restricted-SQL AST. All column references are schema
/// indices; all literals have been replaced by the value token. Cross-table
/// column equalities found among the top-level WHERE conjuncts are normalized
/// into `joins` (ordered by the later of the two referenced FROM positions),
/// so `where` never holds a join-shaped conjunct at the top level.
struct SqlAst {
    const Schema* schema = nullptr;

    std::optional<SetOpKind> set_op;
    std::unique_ptr<SqlAst> left, right;  // set-op children

    std::vector<SelectItem> select;
    bool distinct_global = false;
    std::vector<int> from_tables;
    std::vector<JoinCond> joins;
    std::unique_ptr<BoolExpr> where;
    std::optional<int> group_by;
    std::unique_ptr<BoolExpr> having;
    std::optional<OrderBy> order_by;
    bool limit = false;
};

}  // namespace smbop::sql
