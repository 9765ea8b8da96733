#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "smbop/common.hpp"

namespace smbop::ra {

/// Semantic types of the relational-algebra grammar. Relation is a tuple
/// stream, Predicate a boolean condition, Constant a single DB constant or
/// value, ConstantSet a set of constants. Any unifies with everything.
enum class SemanticType : std::uint8_t { Relation, Predicate, Constant, ConstantSet, Any };

inline std::string_view type_name(SemanticType t) {
    switch (t) {
        case SemanticType::Relation: return "R";
        case SemanticType::Predicate: return "P";
        case SemanticType::Constant: return "C";
        case SemanticType::ConstantSet: return "C'";
        case SemanticType::Any: return "Any";
    }
    return "?";
}

/// Whether a child of type `actual` may fill a slot expecting `expected`.
/// Any matches everything; a single Constant is accepted as a singleton
/// ConstantSet (projection and constant-union take bare columns).
inline bool accepts(SemanticType expected, SemanticType actual) {
    if (expected == SemanticType::Any || actual == SemanticType::Any) return true;
    if (expected == actual) return true;
    return expected == SemanticType::ConstantSet && actual == SemanticType::Constant;
}

/// Grammar operations: 7 unary, 23 binary. Order is stable and used for
/// parameter naming, op embeddings, and deterministic enumeration.
enum class RaOpId : std::uint8_t {
    // unary
    Keep,
    Distinct,
    AggSum,
    AggMax,
    AggMin,
    AggCount,
    AggAvg,
    // binary
    Union,
    Intersect,
    Except,
    Select,
    Product,
    Project,
    And,
    Or,
    Le,
    Ge,
    Lt,
    Gt,
    Eq,
    Neq,
    CUnion,
    OrderAsc,
    OrderDsc,
    GroupBy,
    Limit,
    In,
    NotIn,
    Like,
    NotLike,
};

inline constexpr int kNumOps = 30;
inline constexpr int kNumUnaryOps = 7;
inline constexpr int kNumBinaryOps = 23;
inline constexpr int kFirstBinaryOp = 7;

struct RaOp {
    RaOpId id;
    std::string_view name;  // ASCII alias used by the text serialization
    int arity;              // 1 or 2
    SemanticType in1;
    SemanticType in2;  // ignored for unary
    SemanticType out;
    bool commutative;
};

namespace detail {
using ST = SemanticType;
inline constexpr std::array<RaOp, kNumOps> kOps = {{
    {RaOpId::Keep, "keep", 1, ST::Any, ST::Any, ST::Any, false},
    {RaOpId::Distinct, "distinct", 1, ST::Constant, ST::Any, ST::Constant, false},
    {RaOpId::AggSum, "agg_sum", 1, ST::Constant, ST::Any, ST::Constant, false},
    {RaOpId::AggMax, "agg_max", 1, ST::Constant, ST::Any, ST::Constant, false},
    {RaOpId::AggMin, "agg_min", 1, ST::Constant, ST::Any, ST::Constant, false},
    {RaOpId::AggCount, "agg_count", 1, ST::Constant, ST::Any, ST::Constant, false},
    {RaOpId::AggAvg, "agg_avg", 1, ST::Constant, ST::Any, ST::Constant, false},
    {RaOpId::Union, "union", 2, ST::Relation, ST::Relation, ST::Relation, true},
    {RaOpId::Intersect, "intersect", 2, ST::Relation, ST::Relation, ST::Relation, true},
    {RaOpId::Except, "except", 2, ST::Relation, ST::Relation, ST::Relation, false},
    {RaOpId::Select, "select", 2, ST::Predicate, ST::Relation, ST::Relation, false},
    {RaOpId::Product, "product", 2, ST::Relation, ST::Relation, ST::Relation, true},
    {RaOpId::Project, "project", 2, ST::ConstantSet, ST::Relation, ST::Relation, false},
    {RaOpId::And, "and", 2, ST::Predicate, ST::Predicate, ST::Predicate, true},
    {RaOpId::Or, "or", 2, ST::Predicate, ST::Predicate, ST::Predicate, true},
    {RaOpId::Le, "le", 2, ST::Constant, ST::Constant, ST::Predicate, false},
    {RaOpId::Ge, "ge", 2, ST::Constant, ST::Constant, ST::Predicate, false},
    {RaOpId::Lt, "lt", 2, ST::Constant, ST::Constant, ST::Predicate, false},
    {RaOpId::Gt, "gt", 2, ST::Constant, ST::Constant, ST::Predicate, false},
    {RaOpId::Eq, "eq", 2, ST::Constant, ST::Constant, ST::Predicate, true},
    {RaOpId::Neq, "neq", 2, ST::Constant, ST::Constant, ST::Predicate, true},
    {RaOpId::CUnion, "cunion", 2, ST::ConstantSet, ST::ConstantSet, ST::ConstantSet, true},
    {RaOpId::OrderAsc, "orderby_asc", 2, ST::Constant, ST::Relation, ST::Relation, false},
    {RaOpId::OrderDsc, "orderby_dsc", 2, ST::Constant, ST::Relation, ST::Relation, false},
    {RaOpId::GroupBy, "groupby", 2, ST::Constant, ST::Relation, ST::Relation, false},
    {RaOpId::Limit, "limit", 2, ST::Constant, ST::Relation, ST::Relation, false},
    {RaOpId::In, "in", 2, ST::Constant, ST::Relation, ST::Predicate, false},
    {RaOpId::NotIn, "not_in", 2, ST::Constant, ST::Relation, ST::Predicate, false},
    {RaOpId::Like, "like", 2, ST::Constant, ST::Constant, ST::Predicate, false},
    {RaOpId::NotLike, "not_like", 2, ST::Constant, ST::Constant, ST::Predicate, false},
}};
}  // namespace detail

inline const RaOp& op_info(RaOpId id) { return detail::kOps[static_cast<std::size_t>(id)]; }

inline const RaOp* op_by_name(std::string_view name) {
    for (const auto& op : detail::kOps)
        if (op.name == name) return &op;
    return nullptr;
}

inline bool is_unary(RaOpId id) { return op_info(id).arity == 1; }
inline bool is_binary(RaOpId id) { return op_info(id).arity == 2; }
inline bool is_commutative(RaOpId id) { return op_info(id).commutative; }

inline bool is_aggregation(RaOpId id) {
    switch (id) {
        case RaOpId::AggSum:
        case RaOpId::AggMax:
        case RaOpId::AggMin:
        case RaOpId::AggCount:
        case RaOpId::AggAvg: return true;
        default: return false;
    }
}

}  // namespace smbop::ra
