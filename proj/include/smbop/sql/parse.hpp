#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <string>

#include "smbop/sql/ast.hpp"

namespace smbop::sql {

namespace detail {

enum class TokKind : std::uint8_t { Ident, Number, String, Symbol, End };

struct Token {
    TokKind kind = TokKind::End;
    std::string text;  // lowercased for idents, verbatim symbol otherwise
    std::size_t pos = 0;
};

inline std::vector<Token> lex(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto symbol = [&](std::string s) {
        out.push_back({TokKind::Symbol, std::move(s), i});
    };
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = i;
            while (i < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_'))
                ++i;
            std::string word(text.substr(start, i - start));
            std::transform(word.begin(), word.end(), word.begin(),
                           [](unsigned char ch) { return std::tolower(ch); });
            out.push_back({TokKind::Ident, std::move(word), start});
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t start = i;
            while (i < text.size() &&
                   (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.'))
                ++i;
            out.push_back({TokKind::Number, std::string(text.substr(start, i - start)), start});
            continue;
        }
        if (c == '\'' || c == '"') {
            char quote = c;
            std::size_t start = i++;
            while (i < text.size() && text[i] != quote) ++i;
            if (i >= text.size()) throw SyntaxError(start, "unterminated string literal");
            out.push_back({TokKind::String, std::string(text.substr(start + 1, i - start - 1)), start});
            ++i;
            continue;
        }
        // multi-char comparison symbols
        if (c == '<' || c == '>' || c == '!') {
            if (i + 1 < text.size() && text[i + 1] == '=') {
                symbol(std::string{c, '='});
                i += 2;
                continue;
            }
            if (c == '<' && i + 1 < text.size() && text[i + 1] == '>') {
                symbol("<>");
                i += 2;
                continue;
            }
            if (c == '!') throw SyntaxError(i, "expected '=' after '!'");
            symbol(std::string(1, c));
            ++i;
            continue;
        }
        if (c == '=' || c == '(' || c == ')' || c == ',' || c == '.' || c == '*' || c == ';') {
            symbol(std::string(1, c));
            ++i;
            continue;
        }
        throw SyntaxError(i, std::string("unexpected character '") + c + "'");
    }
    out.push_back({TokKind::End, "", text.size()});
    return out;
}

inline bool is_agg_name(const std::string& s) {
    return s == "count" || s == "sum" || s == "avg" || s == "min" || s == "max";
}

inline ra::RaOpId agg_op(const std::string& s) {
    if (s == "count") return ra::RaOpId::AggCount;
    if (s == "sum") return ra::RaOpId::AggSum;
    if (s == "avg") return ra::RaOpId::AggAvg;
    if (s == "min") return ra::RaOpId::AggMin;
    return ra::RaOpId::AggMax;
}

struct SqlParser {
    const std::vector<Token>& toks;
    const Schema& schema;
    std::size_t at = 0;

    const Token& peek(std::size_t ahead = 0) const {
        return toks[std::min(at + ahead, toks.size() - 1)];
    }
    const Token& next() { return toks[std::min(at++, toks.size() - 1)]; }

    bool is_kw(const std::string& kw, std::size_t ahead = 0) const {
        const Token& t = peek(ahead);
        return t.kind == TokKind::Ident && t.text == kw;
    }
    bool is_sym(const std::string& s, std::size_t ahead = 0) const {
        const Token& t = peek(ahead);
        return t.kind == TokKind::Symbol && t.text == s;
    }
    bool eat_kw(const std::string& kw) {
        if (!is_kw(kw)) return false;
        ++at;
        return true;
    }
    void expect_kw(const std::string& kw) {
        if (!eat_kw(kw)) throw SyntaxError(peek().pos, "expected " + kw);
    }
    void expect_sym(const std::string& s) {
        if (!is_sym(s)) throw SyntaxError(peek().pos, "expected '" + s + "'");
        ++at;
    }

    // --- identifier resolution within the current FROM scope ---------------

    struct Scope {
        std::map<std::string, int> aliases;  // alias or table name -> table index
        std::vector<int> tables;             // FROM order
    };

    int resolve_column(Scope& scope, const std::string& qualifier, const std::string& name,
                       std::size_t pos) const {
        if (!qualifier.empty()) {
            auto it = scope.aliases.find(qualifier);
            if (it == scope.aliases.end()) throw UnknownIdentifier(qualifier);
            auto col = schema.find_column(it->second, name);
            if (!col) throw UnknownIdentifier(qualifier + "." + name);
            return *col;
        }
        int found = -1;
        for (int t : scope.tables) {
            if (auto col = schema.find_column(t, name)) {
                if (found >= 0) throw AmbiguousColumn(name);
                found = *col;
            }
        }
        if (found < 0) throw UnknownIdentifier(name);
        (void)pos;
        return found;
    }

    // column reference: ident | ident '.' ident
    int parse_column(Scope& scope) {
        const Token& t = next();
        if (t.kind != TokKind::Ident) throw SyntaxError(t.pos, "expected column name");
        if (is_sym(".")) {
            ++at;
            const Token& c = next();
            if (c.kind != TokKind::Ident) throw SyntaxError(c.pos, "expected column name");
            return resolve_column(scope, t.text, c.text, t.pos);
        }
        return resolve_column(scope, "", t.text, t.pos);
    }

    // --- clauses -------------------------------------------------------------

    void reject_unsupported_keyword() const {
        static const char* banned[] = {"over",   "between", "exists", "case",  "left",
                                       "right",  "outer",   "full",   "cross", "natural",
                                       "window", "partition"};
        if (peek().kind != TokKind::Ident) return;
        for (const char* b : banned)
            if (peek().text == b) throw UnsupportedConstruct(peek().text);
    }

    Operand parse_operand(Scope& scope, bool allow_agg) {
        reject_unsupported_keyword();
        const Token& t = peek();
        if (t.kind == TokKind::Number || t.kind == TokKind::String) {
            ++at;
            return Operand::value();  // literal anonymization
        }
        if (t.kind == TokKind::Ident && is_agg_name(t.text) && is_sym("(", 1)) {
            if (!allow_agg) throw UnsupportedConstruct("aggregate outside HAVING/ORDER BY");
            return parse_agg_operand(scope);
        }
        if (t.kind == TokKind::Ident) {
            if (is_sym("(", 1)) throw UnsupportedConstruct(t.text + "()");
            return Operand::col(parse_column(scope));
        }
        throw SyntaxError(t.pos, "expected operand");
    }

    Operand parse_agg_operand(Scope& scope) {
        Operand op;
        op.kind = Operand::Kind::Agg;
        op.agg = agg_op(next().text);
        expect_sym("(");
        if (eat_kw("distinct")) op.agg_distinct = true;
        if (is_sym("*")) {
            ++at;
            op.star = true;
            if (op.agg_distinct) throw UnsupportedConstruct("DISTINCT *");
        } else {
            op.column = parse_column(scope);
        }
        expect_sym(")");
        return op;
    }

    std::unique_ptr<BoolExpr> parse_bool(Scope& scope, bool allow_agg) {
        auto node = parse_bool_term(scope, allow_agg);
        while (eat_kw("or")) {
            auto rhs = parse_bool_term(scope, allow_agg);
            auto parent = std::make_unique<BoolExpr>();
            parent->kind = BoolExpr::Kind::Or;
            parent->lhs = std::move(node);
            parent->rhs = std::move(rhs);
            node = std::move(parent);
        }
        return node;
    }

    std::unique_ptr<BoolExpr> parse_bool_term(Scope& scope, bool allow_agg) {
        auto node = parse_bool_factor(scope, allow_agg);
        while (is_kw("and")) {
            ++at;
            auto rhs = parse_bool_factor(scope, allow_agg);
            auto parent = std::make_unique<BoolExpr>();
            parent->kind = BoolExpr::Kind::And;
            parent->lhs = std::move(node);
            parent->rhs = std::move(rhs);
            node = std::move(parent);
        }
        return node;
    }

    std::unique_ptr<BoolExpr> parse_bool_factor(Scope& scope, bool allow_agg) {
        reject_unsupported_keyword();
        if (is_kw("not")) throw UnsupportedConstruct("NOT (only NOT LIKE / NOT IN)");
        if (is_sym("(")) {
            ++at;
            auto inner = parse_bool(scope, allow_agg);
            expect_sym(")");
            return inner;
        }
        auto node = std::make_unique<BoolExpr>();
        node->a = parse_operand(scope, allow_agg);
        reject_unsupported_keyword();
        const Token& t = next();
        if (t.kind == TokKind::Symbol) {
            node->kind = BoolExpr::Kind::Cmp;
            if (t.text == "=") node->cmp = ra::RaOpId::Eq;
            else if (t.text == "!=" || t.text == "<>") node->cmp = ra::RaOpId::Neq;
            else if (t.text == "<=") node->cmp = ra::RaOpId::Le;
            else if (t.text == ">=") node->cmp = ra::RaOpId::Ge;
            else if (t.text == "<") node->cmp = ra::RaOpId::Lt;
            else if (t.text == ">") node->cmp = ra::RaOpId::Gt;
            else throw SyntaxError(t.pos, "expected comparison operator");
            node->b = parse_operand(scope, allow_agg);
            return node;
        }
        if (t.kind == TokKind::Ident && (t.text == "like" || t.text == "not" || t.text == "in")) {
            bool negated = t.text == "not";
            std::string word = t.text;
            if (negated) {
                const Token& w = next();
                if (w.kind != TokKind::Ident || (w.text != "like" && w.text != "in"))
                    throw SyntaxError(w.pos, "expected LIKE or IN after NOT");
                word = w.text;
            }
            if (word == "like") {
                node->kind = negated ? BoolExpr::Kind::NotLike : BoolExpr::Kind::Like;
                node->b = parse_operand(scope, allow_agg);
                return node;
            }
            node->kind = negated ? BoolExpr::Kind::NotIn : BoolExpr::Kind::In;
            expect_sym("(");
            if (!is_kw("select")) throw UnsupportedConstruct("IN over a value list");
            node->subquery = std::make_unique<SqlAst>(parse_query());
            expect_sym(")");
            return node;
        }
        throw SyntaxError(t.pos, "expected predicate");
    }

    SelectItem parse_select_item(Scope& scope) {
        reject_unsupported_keyword();
        SelectItem item;
        const Token& t = peek();
        if (t.kind == TokKind::Ident && is_agg_name(t.text) && is_sym("(", 1)) {
            Operand agg = parse_agg_operand(scope);
            item.agg = agg.agg;
            item.distinct = agg.agg_distinct;
            item.star = agg.star;
            item.column = agg.column;
            return item;
        }
        if (is_sym("*")) {
            ++at;
            item.star = true;
            return item;
        }
        if (t.kind == TokKind::Ident && is_sym("(", 1)) throw UnsupportedConstruct(t.text + "()");
        item.column = parse_column(scope);
        return item;
    }

    void parse_from(SqlAst& ast, Scope& scope) {
        expect_kw("from");
        parse_table_ref(ast, scope);
        if (is_sym(",")) throw UnsupportedConstruct("comma join");
        while (is_kw("join") || is_kw("inner")) {
            eat_kw("inner");
            expect_kw("join");
            parse_table_ref(ast, scope);
            expect_kw("on");
            parse_join_conditions(ast, scope);
        }
        if (is_sym(",")) throw UnsupportedConstruct("comma join");
    }

    void parse_table_ref(SqlAst& ast, Scope& scope) {
        reject_unsupported_keyword();
        const Token& t = next();
        if (t.kind != TokKind::Ident) throw SyntaxError(t.pos, "expected table name");
        auto table = schema.find_table(t.text);
        if (!table) throw UnknownIdentifier(t.text);
        for (int prev : scope.tables)
            if (prev == *table) throw UnsupportedConstruct("repeated table in FROM");
        std::string alias = t.text;
        if (eat_kw("as")) {
            const Token& a = next();
            if (a.kind != TokKind::Ident) throw SyntaxError(a.pos, "expected alias");
            alias = a.text;
        } else if (peek().kind == TokKind::Ident && !reserved_after_table(peek().text)) {
            alias = next().text;
        }
        scope.tables.push_back(*table);
        ast.from_tables.push_back(*table);
        scope.aliases[t.text] = *table;  // aliases are resolved and erased
        scope.aliases[alias] = *table;
    }

    static bool reserved_after_table(const std::string& w) {
        static const char* kws[] = {"join",  "inner", "on",    "where",     "group", "having",
                                    "order", "limit", "union", "intersect", "except"};
        for (const char* k : kws)
            if (w == k) return true;
        return false;
    }

    void parse_join_conditions(SqlAst& ast, Scope& scope) {
        int joined = scope.tables.back();
        do {
            std::size_t pos = peek().pos;
            int a = parse_column(scope);
            if (!is_sym("=")) {
                if (peek().kind == TokKind::Symbol)
                    throw UnsupportedConstruct("non-equality join condition");
                throw SyntaxError(peek().pos, "expected '=' in join condition");
            }
            ++at;
            int b = parse_column(scope);
            int ta = schema.columns[static_cast<std::size_t>(a)].table;
            int tb = schema.columns[static_cast<std::size_t>(b)].table;
            if (ta == tb) throw UnsupportedConstruct("join condition within one table");
            if (ta != joined && tb != joined)
                throw UnsupportedConstruct("join condition must reference the joined table");
            (void)pos;
            ast.joins.push_back({a, b});
        } while (eat_kw("and"));
    }

    // position of a table in FROM order
    static int from_pos(const SqlAst& ast, int table) {
        for (std::size_t i = 0; i < ast.from_tables.size(); ++i)
            if (ast.from_tables[i] == table) return static_cast<int>(i);
        return -1;
    }

    /// Moves cross-table column equalities out of the top-level WHERE
    /// conjunction into the join list, then orders all join conditions by the
    /// later of their two FROM positions (stable). Inner joins make the two
    /// forms equivalent, and a single normal form keeps SQL -> tree -> SQL
    /// round trips exact.
    void normalize_joins(SqlAst& ast) {
        if (ast.where) {
            std::vector<std::unique_ptr<BoolExpr>> conjuncts;
            flatten_and(std::move(ast.where), conjuncts);
            std::vector<std::unique_ptr<BoolExpr>> rest;
            for (auto& c : conjuncts) {
                bool join_like = c->kind == BoolExpr::Kind::Cmp && c->cmp == ra::RaOpId::Eq &&
                                 c->a.kind == Operand::Kind::Column &&
                                 c->b.kind == Operand::Kind::Column;
                if (join_like) {
                    int ta = schema.columns[static_cast<std::size_t>(c->a.column)].table;
                    int tb = schema.columns[static_cast<std::size_t>(c->b.column)].table;
                    join_like = ta != tb;
                }
                if (join_like && ast.from_tables.size() > 1)
                    ast.joins.push_back({c->a.column, c->b.column});
                else
                    rest.push_back(std::move(c));
            }
            ast.where = fold_and(std::move(rest));
        }
        std::stable_sort(ast.joins.begin(), ast.joins.end(), [&](const JoinCond& x, const JoinCond& y) {
            return join_slot(ast, x) < join_slot(ast, y);
        });
    }

    int join_slot(const SqlAst& ast, const JoinCond& j) const {
        int ta = schema.columns[static_cast<std::size_t>(j.lhs_col)].table;
        int tb = schema.columns[static_cast<std::size_t>(j.rhs_col)].table;
        return std::max(from_pos(ast, ta), from_pos(ast, tb));
    }

    static void flatten_and(std::unique_ptr<BoolExpr> e,
                            std::vector<std::unique_ptr<BoolExpr>>& out) {
        if (e->kind == BoolExpr::Kind::And) {
            flatten_and(std::move(e->lhs), out);
            flatten_and(std::move(e->rhs), out);
            return;
        }
        out.push_back(std::move(e));
    }

    static std::unique_ptr<BoolExpr> fold_and(std::vector<std::unique_ptr<BoolExpr>> parts) {
        if (parts.empty()) return nullptr;
        auto node = std::move(parts[0]);
        for (std::size_t i = 1; i < parts.size(); ++i) {
            auto parent = std::make_unique<BoolExpr>();
            parent->kind = BoolExpr::Kind::And;
            parent->lhs = std::move(node);
            parent->rhs = std::move(parts[i]);
            node = std::move(parent);
        }
        return node;
    }

    SqlAst parse_core() {
        SqlAst ast;
        ast.schema = &schema;
        expect_kw("select");
        ast.distinct_global = eat_kw("distinct");

        // FROM must be resolved before select items; scan ahead for it.
        std::size_t select_start = at;
        int depth = 0;
        while (!(peek().kind == TokKind::End) && !(depth == 0 && is_kw("from"))) {
            if (is_sym("(")) ++depth;
            if (is_sym(")")) --depth;
            ++at;
        }
        Scope scope;
        parse_from(ast, scope);
        std::size_t after_from = at;

        at = select_start;
        if (is_kw("from")) throw SyntaxError(peek().pos, "expected select item");
        ast.select.push_back(parse_select_item(scope));
        while (is_sym(",")) {
            ++at;
            ast.select.push_back(parse_select_item(scope));
        }
        if (!is_kw("from")) throw SyntaxError(peek().pos, "expected FROM");
        at = after_from;

        if (eat_kw("where")) ast.where = parse_bool(scope, false);
        if (is_kw("group")) {
            ++at;
            expect_kw("by");
            ast.group_by = parse_column(scope);
            if (is_sym(",")) throw UnsupportedConstruct("multi-column GROUP BY");
        }
        if (eat_kw("having")) ast.having = parse_bool(scope, true);
        if (is_kw("order")) {
            ++at;
            expect_kw("by");
            OrderBy ob;
            Operand op = parse_operand(scope, true);
            if (op.kind == Operand::Kind::Value) throw SyntaxError(peek().pos, "ORDER BY literal");
            if (op.kind == Operand::Kind::Agg) {
                if (op.agg_distinct) throw UnsupportedConstruct("ORDER BY aggregate with DISTINCT");
                ob.agg = op.agg;
                ob.star = op.star;
            }
            ob.column = op.column;
            if (eat_kw("desc")) ob.asc = false;
            else eat_kw("asc");
            ast.order_by = ob;
            if (is_sym(",")) throw UnsupportedConstruct("multi-column ORDER BY");
        }
        if (eat_kw("limit")) {
            const Token& t = next();
            if (t.kind != TokKind::Number && t.kind != TokKind::String)
                throw SyntaxError(t.pos, "expected LIMIT count");
            ast.limit = true;
        }
        normalize_joins(ast);
        return ast;
    }

    SqlAst parse_query() {
        SqlAst node = parse_core();
        while (is_kw("union") || is_kw("intersect") || is_kw("except")) {
            SetOpKind kind = is_kw("union")     ? SetOpKind::Union
                             : is_kw("intersect") ? SetOpKind::Intersect
                                                  : SetOpKind::Except;
            ++at;
            if (is_kw("all")) throw UnsupportedConstruct("UNION ALL");
            SqlAst rhs = parse_core();
            SqlAst parent;
            parent.schema = &schema;
            parent.set_op = kind;
            parent.left = std::make_unique<SqlAst>(std::move(node));
            parent.right = std::make_unique<SqlAst>(std::move(rhs));
            node = std::move(parent);
        }
        return node;
    }
};

}  // namespace detail

/// Parses one query in the supported dialect against `schema`, resolving all
/// column references and anonymizing every literal to the value token.
inline SqlAst parse_sql(std::string_view text, const Schema& schema) {
    auto toks = detail::lex(text);
    detail::SqlParser p{toks, schema};
    SqlAst ast = p.parse_query();
    if (p.is_sym(";")) ++p.at;
    if (p.peek().kind != detail::TokKind::End)
        throw SyntaxError(p.peek().pos, "trailing input after query");
    return ast;
}

}  // namespace smbop::sql
