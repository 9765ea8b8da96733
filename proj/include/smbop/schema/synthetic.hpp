#pragma once

#include "smbop/schema/dataset.hpp"
#include "smbop/sql/render.hpp"

namespace smbop {

struct SizeParams {
    int max_height = 5;
    // widest allowed gold level slice; keeps every tree reachable by beams of
    // at least this size
    int max_level_width = 8;
};

namespace detail {

inline const std::vector<std::string>& table_words() {
    static const std::vector<std::string> w = {
        "actor",   "airport",  "album",   "artist",  "book",    "branch",  "car",
        "channel", "citizen",  "club",    "company", "course",  "device",  "dorm",
        "driver",  "employee", "exam",    "farm",    "flight",  "game",    "hotel",
        "invoice", "judge",    "machine", "manager", "movie",   "museum",  "musician",
        "patient", "pilot",    "player",  "project", "race",    "review",  "runner",
        "school",  "ship",     "singer",  "station", "store",   "student", "teacher",
        "ticket",  "tourist",  "visitor", "worker"};
    return w;
}

inline const std::vector<std::string>& column_words() {
    static const std::vector<std::string> w = {
        "name",     "age",   "year",   "price", "weight", "rating", "salary",
        "duration", "seats", "budget", "city",  "score",  "grade",  "code",
        "title",    "phone", "email",  "state", "speed",  "floors", "length",
        "width",    "status", "gender", "country"};
    return w;
}

/// Random schema: 2-5 tables of 2-6 columns, first column of each table is an
/// "id" primary key, and at least one foreign key between distinct tables.
inline Schema random_schema(Rng& rng) {
    Schema s;
    int nt = static_cast<int>(rng.range(2, 5));
    std::vector<std::string> tnames = table_words();
    rng.shuffle(tnames);
    tnames.resize(static_cast<std::size_t>(nt));
    s.tables = tnames;
    for (int t = 0; t < nt; ++t) {
        int ncols = static_cast<int>(rng.range(2, 6));
        std::vector<std::string> cnames = column_words();
        rng.shuffle(cnames);
        s.primary_keys.insert(static_cast<int>(s.columns.size()));
        s.columns.push_back({t, "id", "number"});
        for (int c = 1; c < ncols; ++c)
            s.columns.push_back(
                {t, cnames[static_cast<std::size_t>(c - 1)], rng.coin(0.5) ? "number" : "text"});
    }
    int nfk = static_cast<int>(rng.range(1, std::min(3, nt - 1)));
    for (int k = 0; k < nfk; ++k) {
        int ta = static_cast<int>(rng.range(0, nt - 1));
        int tb = static_cast<int>(rng.range(0, nt - 1));
        if (ta == tb) tb = (tb + 1) % nt;
        std::vector<int> candidates;
        for (int c = 0; c < s.n_columns(); ++c)
            if (s.columns[static_cast<std::size_t>(c)].table == ta && !s.primary_keys.count(c))
                candidates.push_back(c);
        int fk_col = candidates[static_cast<std::size_t>(rng.next_below(candidates.size()))];
        std::string ref_name = s.tables[static_cast<std::size_t>(tb)] + "_id";
        bool clash = false;
        for (int c = 0; c < s.n_columns(); ++c)
            if (c != fk_col && s.columns[static_cast<std::size_t>(c)].table == ta &&
                s.columns[static_cast<std::size_t>(c)].name == ref_name)
                clash = true;
        if (!clash) s.columns[static_cast<std::size_t>(fk_col)].name = ref_name;
        int pk_col = -1;
        for (int c = 0; c < s.n_columns(); ++c)
            if (s.columns[static_cast<std::size_t>(c)].table == tb && s.primary_keys.count(c))
                pk_col = c;
        s.foreign_keys.insert({fk_col, pk_col});
    }
    s.validate();
    return s;
}

/// Builds one random query tree of exactly the requested height, staying
/// inside the SQL dialect's image so the rendered text reparses to the very
/// same tree. Top-level AND chains and product/cunion chains lean left, the
/// shapes the parser itself produces.
class QueryGen {
  public:
    QueryGen(Rng& rng, const Schema& schema) : rng_(rng), schema_(schema) {}

    ra::RaTree query(int h) {
        if (h >= 3 && rng_.coin(0.1)) {
            double r = rng_.next_double();
            ra::RaOpId op = r < 0.5   ? ra::RaOpId::Union
                            : r < 0.75 ? ra::RaOpId::Intersect
                                       : ra::RaOpId::Except;
            ra::RaTree left = body(h - 1);
            ra::RaTree right = body(static_cast<int>(rng_.range(1, h - 1)));
            return ra::binary(op, std::move(left), std::move(right));
        }
        return body(h);
    }

  private:
    Rng& rng_;
    const Schema& schema_;
    std::vector<int> scope_;  // FROM tables of the core being generated

    // --- leaves and helpers ---------------------------------------------------

    int table_col(int table) {
        std::vector<int> cols;
        for (int c = 0; c < schema_.n_columns(); ++c)
            if (schema_.columns[static_cast<std::size_t>(c)].table == table) cols.push_back(c);
        return cols[static_cast<std::size_t>(rng_.next_below(cols.size()))];
    }
    int any_scope_col() {
        return table_col(scope_[static_cast<std::size_t>(rng_.next_below(scope_.size()))]);
    }
    ra::RaTree col_leaf(int col) {
        return ra::leaf(ra::Leaf::column(schema_.qualified_column(col), col));
    }
    ra::RaTree table_leaf(int t) {
        return ra::leaf(ra::Leaf::table(schema_.tables[static_cast<std::size_t>(t)], t));
    }
    ra::RaTree value_leaf() { return ra::leaf(ra::Leaf::value()); }

    ra::RaOpId random_agg() {
        static const ra::RaOpId aggs[] = {ra::RaOpId::AggCount, ra::RaOpId::AggSum,
                                          ra::RaOpId::AggAvg, ra::RaOpId::AggMin,
                                          ra::RaOpId::AggMax};
        return aggs[rng_.next_below(5)];
    }
    ra::RaOpId random_cmp() {
        static const ra::RaOpId cmps[] = {ra::RaOpId::Eq, ra::RaOpId::Neq, ra::RaOpId::Le,
                                          ra::RaOpId::Ge, ra::RaOpId::Lt,  ra::RaOpId::Gt};
        return cmps[rng_.next_below(6)];
    }

    // --- query skeleton: [limit] [order] projection ---------------------------

    ra::RaTree body(int h) {
        if (h >= 2 && rng_.coin(0.15))
            return ra::binary(ra::RaOpId::Limit, value_leaf(), ordered(h - 1));
        return ordered(h);
    }

    ra::RaTree ordered(int h) {
        if (h >= 2 && rng_.coin(0.18)) {
            ra::RaTree core_tree = core(h - 1);
            ra::RaTree ord;
            if (rng_.coin(0.3)) {
                ra::RaTree base =
                    rng_.coin(0.4) ? ra::leaf(ra::Leaf::star()) : col_leaf(any_scope_col());
                ord = ra::unary(random_agg(), std::move(base));
            } else {
                ord = col_leaf(any_scope_col());
            }
            return ra::binary(rng_.coin(0.5) ? ra::RaOpId::OrderAsc : ra::RaOpId::OrderDsc,
                              std::move(ord), std::move(core_tree));
        }
        return core(h);
    }

    ra::RaTree core(int h) {
        ra::RaTree rel = relation(h - 1);
        int sel_h = static_cast<int>(rng_.range(0, std::min(h - 1, 3)));
        ra::RaTree sel = select_chain(sel_h);
        return ra::binary(ra::RaOpId::Project, std::move(sel), std::move(rel));
    }

    // --- relation part: FROM / WHERE / GROUP BY / HAVING ----------------------

    // base relation forms without grouping: table, filtered table, joins
    ra::RaTree base_relation(int h) {
        if (h == 0) {
            int t = static_cast<int>(rng_.range(0, schema_.n_tables() - 1));
            scope_ = {t};
            return table_leaf(t);
        }
        if (h >= 2 && schema_.n_tables() >= 2 && rng_.coin(0.45)) return join_relation(h);
        int t = static_cast<int>(rng_.range(0, schema_.n_tables() - 1));
        scope_ = {t};
        ra::RaTree pred = pred_chain(h - 1);
        return ra::binary(ra::RaOpId::Select, std::move(pred), table_leaf(t));
    }

    ra::RaTree relation(int h) {
        if (h == 0) return base_relation(0);
        if (h == 1) {
            int t = static_cast<int>(rng_.range(0, schema_.n_tables() - 1));
            scope_ = {t};
            return ra::binary(ra::RaOpId::GroupBy, col_leaf(table_col(t)), table_leaf(t));
        }
        double roll = rng_.next_double();
        if (h >= 3 && roll < 0.15) {  // GROUP BY over a deeper relation
            ra::RaTree inner = base_relation(h - 1);
            return ra::binary(ra::RaOpId::GroupBy, col_leaf(any_scope_col()), std::move(inner));
        }
        if (h >= 3 && roll < 0.3) {  // HAVING above GROUP BY
            int hb = (h >= 4 && rng_.coin(0.5)) ? h - 2 : 0;
            ra::RaTree grouped;
            if (hb == 0) {
                grouped = relation(1);
            } else {
                ra::RaTree inner = base_relation(hb);
                grouped =
                    ra::binary(ra::RaOpId::GroupBy, col_leaf(any_scope_col()), std::move(inner));
            }
            int hp = hb == 0 ? h - 1 : static_cast<int>(rng_.range(1, h - 1));
            ra::RaTree hv = having_chain(hp);
            return ra::binary(ra::RaOpId::Select, std::move(hv), std::move(grouped));
        }
        return base_relation(h);
    }

    ra::RaTree join_relation(int h) {
        // join-only height is k (the table count); with a WHERE it is
        // 2 + max(k - 1, where height)
        int max_k = std::min(schema_.n_tables(), 3);
        int k;
        bool with_where;
        if (h <= max_k && (h == 2 || rng_.coin(0.5))) {
            k = h;
            with_where = false;
        } else if (h >= 3) {
            k = static_cast<int>(rng_.range(2, std::min(max_k, h - 1)));
            with_where = true;
        } else {  // h == 2 but not enough tables for k = 2
            k = 2;
            with_where = false;
        }
        std::vector<int> tables(static_cast<std::size_t>(schema_.n_tables()));
        for (int i = 0; i < schema_.n_tables(); ++i) tables[static_cast<std::size_t>(i)] = i;
        rng_.shuffle(tables);
        tables.resize(static_cast<std::size_t>(k));
        scope_ = tables;

        ra::RaTree chain = table_leaf(tables[0]);
        ra::RaTree joins;
        for (int i = 1; i < k; ++i) {
            chain = ra::binary(ra::RaOpId::Product, std::move(chain),
                               table_leaf(tables[static_cast<std::size_t>(i)]));
            ra::RaTree cond =
                join_condition(std::vector<int>(tables.begin(), tables.begin() + i),
                               tables[static_cast<std::size_t>(i)]);
            joins = joins ? ra::binary(ra::RaOpId::And, std::move(joins), std::move(cond))
                          : std::move(cond);
        }
        if (!with_where) return ra::binary(ra::RaOpId::Select, std::move(joins), std::move(chain));
        ra::RaTree where = pred_chain(h - 2);
        ra::RaTree pred = ra::binary(ra::RaOpId::And, std::move(joins), std::move(where));
        return ra::binary(ra::RaOpId::Select, std::move(pred), std::move(chain));
    }

    ra::RaTree join_condition(const std::vector<int>& earlier, int joined) {
        for (auto [a, b] : schema_.foreign_keys) {
            int ta = schema_.columns[static_cast<std::size_t>(a)].table;
            int tb = schema_.columns[static_cast<std::size_t>(b)].table;
            for (int e : earlier) {
                if (ta == e && tb == joined)
                    return ra::binary(ra::RaOpId::Eq, col_leaf(a), col_leaf(b));
                if (tb == e && ta == joined)
                    return ra::binary(ra::RaOpId::Eq, col_leaf(b), col_leaf(a));
            }
        }
        int e = earlier[static_cast<std::size_t>(rng_.next_below(earlier.size()))];
        return ra::binary(ra::RaOpId::Eq, col_leaf(table_col(e)), col_leaf(table_col(joined)));
    }

    // --- predicates ------------------------------------------------------------
    // Top-level AND spines lean left (the parser's own fold), so rendered SQL
    // reparses to the identical tree. OR subtrees are shape-free.

    ra::RaTree leaf_cond() {
        int c = any_scope_col();
        if (rng_.coin(0.12))
            return ra::binary(rng_.coin(0.5) ? ra::RaOpId::Like : ra::RaOpId::NotLike, col_leaf(c),
                              value_leaf());
        return ra::binary(random_cmp(), col_leaf(c), value_leaf());
    }

    // a condition that is not AND at the root: comparison, OR, or IN
    ra::RaTree pred_cond(int h) {
        if (h == 1) return leaf_cond();
        if (rng_.coin(0.35)) {  // IN / NOT IN subquery
            int c = any_scope_col();
            std::vector<int> saved = scope_;
            ra::RaTree sub = subquery(h - 1);
            scope_ = std::move(saved);
            return ra::binary(rng_.coin(0.5) ? ra::RaOpId::In : ra::RaOpId::NotIn, col_leaf(c),
                              std::move(sub));
        }
        ra::RaTree left = pred_chain(h - 1);
        ra::RaTree right = pred_chain(static_cast<int>(rng_.range(1, h - 1)));
        return ra::binary(ra::RaOpId::Or, std::move(left), std::move(right));
    }

    ra::RaTree pred_chain(int h) {
        if (h == 1) return leaf_cond();
        if (rng_.coin(0.4)) return pred_cond(h);
        ra::RaTree left = pred_chain(h - 1);
        ra::RaTree right = pred_cond(static_cast<int>(rng_.range(1, h - 1)));
        return ra::binary(ra::RaOpId::And, std::move(left), std::move(right));
    }

    ra::RaTree having_cond(int h) {
        if (h == 1) return leaf_cond();
        // h == 2: aggregate comparison
        ra::RaTree base = rng_.coin(0.4) ? ra::leaf(ra::Leaf::star()) : col_leaf(any_scope_col());
        return ra::binary(random_cmp(), ra::unary(random_agg(), std::move(base)), value_leaf());
    }

    ra::RaTree having_chain(int h) {
        if (h <= 2) return having_cond(h);
        ra::RaTree left = having_chain(h - 1);
        ra::RaTree right = having_cond(static_cast<int>(rng_.range(1, std::min(h - 1, 2))));
        return ra::binary(ra::RaOpId::And, std::move(left), std::move(right));
    }

    // single-column projection, used as the right side of IN
    ra::RaTree subquery(int h) {
        ra::RaTree rel = relation(h - 1);
        ra::RaTree sel = col_leaf(any_scope_col());
        return ra::binary(ra::RaOpId::Project, std::move(sel), std::move(rel));
    }

    // --- select items -----------------------------------------------------------

    ra::RaTree plain_item() {
        if (rng_.coin(0.1)) return ra::leaf(ra::Leaf::star());
        return col_leaf(any_scope_col());
    }

    // one item of exactly height ih in {0, 1, 2}, never a cunion
    ra::RaTree item(int ih) {
        if (ih == 0) return plain_item();
        if (ih == 1) {
            ra::RaTree base = rng_.coin(0.3) ? ra::leaf(ra::Leaf::star()) : col_leaf(any_scope_col());
            return ra::unary(random_agg(), std::move(base));
        }
        ra::RaOpId agg = rng_.coin(0.5) ? ra::RaOpId::AggCount : random_agg();
        return ra::unary(agg, ra::unary(ra::RaOpId::Distinct, col_leaf(any_scope_col())));
    }

    ra::RaTree select_chain(int h) {
        if (h >= 1 && rng_.coin(0.12)) {
            // SELECT DISTINCT: an outer Distinct on every item; a left fold of
            // h one-high items has height h
            ra::RaTree sel = ra::unary(ra::RaOpId::Distinct, plain_item());
            for (int i = 1; i < h; ++i)
                sel = ra::binary(ra::RaOpId::CUnion, std::move(sel),
                                 ra::unary(ra::RaOpId::Distinct, plain_item()));
            return sel;
        }
        return select_fold(h);
    }

    ra::RaTree select_fold(int h) {
        if (h == 0) return plain_item();
        if (h <= 2 && rng_.coin(0.45)) return item(h);
        ra::RaTree left = select_fold(h - 1);
        ra::RaTree right = item(static_cast<int>(rng_.range(0, std::min(h - 1, 2))));
        return ra::binary(ra::RaOpId::CUnion, std::move(left), std::move(right));
    }
};

/// Deterministic template rendering of a tree into utterance words. Leaf
/// names are included verbatim (underscores split) so the relation matcher
/// has something to align.
inline void verbalize(const ra::RaTree& t, std::vector<std::string>& words);

inline void binary_words(const ra::RaTree& t, const char* w1, const char* w2,
                         std::vector<std::string>& words) {
    verbalize(t->left(), words);
    words.push_back(w1);
    if (w2) words.push_back(w2);
    verbalize(t->right(), words);
}

inline void verbalize(const ra::RaTree& t, std::vector<std::string>& words) {
    using ra::RaOpId;
    auto emit = [&](const char* w) { words.emplace_back(w); };
    if (t->is_leaf()) {
        switch (t->leaf().kind) {
            case ra::LeafKind::Value: emit("value"); return;
            case ra::LeafKind::Star: emit("everything"); return;
            case ra::LeafKind::Table: {
                for (auto& w : tokenize(t->leaf().name)) words.push_back(w);
                return;
            }
            case ra::LeafKind::Column: {
                std::string short_name = t->leaf().name.substr(t->leaf().name.find('.') + 1);
                for (auto& w : tokenize(short_name)) words.push_back(w);
                return;
            }
        }
    }
    switch (t->op()) {
        case RaOpId::Keep: verbalize(t->left(), words); return;
        case RaOpId::Distinct: emit("distinct"); verbalize(t->left(), words); return;
        case RaOpId::AggSum: emit("total"); verbalize(t->left(), words); return;
        case RaOpId::AggMax: emit("largest"); verbalize(t->left(), words); return;
        case RaOpId::AggMin: emit("smallest"); verbalize(t->left(), words); return;
        case RaOpId::AggCount: emit("count"); emit("of"); verbalize(t->left(), words); return;
        case RaOpId::AggAvg: emit("average"); verbalize(t->left(), words); return;
        case RaOpId::Project:
            emit("show");
            verbalize(t->left(), words);
            emit("of");
            verbalize(t->right(), words);
            return;
        case RaOpId::Select:
            verbalize(t->right(), words);
            emit("where");
            verbalize(t->left(), words);
            return;
        case RaOpId::Product: binary_words(t, "with", nullptr, words); return;
        case RaOpId::CUnion:
        case RaOpId::And: binary_words(t, "and", nullptr, words); return;
        case RaOpId::Or: binary_words(t, "or", nullptr, words); return;
        case RaOpId::Union: binary_words(t, "combined", "with", words); return;
        case RaOpId::Intersect: binary_words(t, "shared", "with", words); return;
        case RaOpId::Except: binary_words(t, "excluding", nullptr, words); return;
        case RaOpId::Le: binary_words(t, "at", "most", words); return;
        case RaOpId::Ge: binary_words(t, "at", "least", words); return;
        case RaOpId::Lt: binary_words(t, "below", nullptr, words); return;
        case RaOpId::Gt: binary_words(t, "above", nullptr, words); return;
        case RaOpId::Eq: binary_words(t, "equals", nullptr, words); return;
        case RaOpId::Neq: binary_words(t, "differs", "from", words); return;
        case RaOpId::Like: binary_words(t, "like", nullptr, words); return;
        case RaOpId::NotLike: binary_words(t, "not", "like", words); return;
        case RaOpId::In: binary_words(t, "among", nullptr, words); return;
        case RaOpId::NotIn: binary_words(t, "not", "among", words); return;
        case RaOpId::OrderAsc:
            verbalize(t->right(), words);
            emit("sorted");
            emit("by");
            verbalize(t->left(), words);
            return;
        case RaOpId::OrderDsc:
            verbalize(t->right(), words);
            emit("ranked");
            emit("by");
            verbalize(t->left(), words);
            return;
        case RaOpId::GroupBy:
            verbalize(t->right(), words);
            emit("per");
            verbalize(t->left(), words);
            return;
        case RaOpId::Limit:
            emit("top");
            verbalize(t->right(), words);
            return;
    }
}

}  // namespace detail

/// Generates `n` synthetic examples, deterministically in `seed`. Target tree
/// heights cycle through [1, max_height] so every height is exercised. Each
/// example gets its own random schema; gold SQL is the rendered tree and the
/// stored gold tree is re-derived by parsing it, which keeps the Example
/// invariants true by construction.
inline std::vector<Example> gen_synthetic(std::uint64_t seed, int n, SizeParams params) {
    if (n < 1) throw Error("gen_synthetic: n must be >= 1");
    Rng rng(seed);
    std::vector<Example> out;
    out.reserve(static_cast<std::size_t>(n));
    auto widest_level = [](const ra::RaTree& tree) {
        std::size_t widest = 0;
        for (const auto& slice : ra::level_slices(ra::balance(tree)))
            widest = std::max(widest, slice.size());
        return static_cast<int>(widest);
    };
    for (int i = 0; i < n; ++i) {
        int target = 1 + i % params.max_height;
        auto schema = std::make_shared<Schema>(detail::random_schema(rng));
        detail::QueryGen gen(rng, *schema);
        ra::RaTree tree = gen.query(target);
        for (int attempt = 0; attempt < 100 && widest_level(tree) > params.max_level_width;
             ++attempt)
            tree = gen.query(target);
        std::string sql = sql::ra_to_sql(tree);
        std::vector<std::string> words;
        detail::verbalize(tree, words);
        out.push_back(make_example(std::move(words), schema, sql));
    }
    return out;
}

}  // namespace smbop
