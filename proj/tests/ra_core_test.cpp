#include <gtest/gtest.h>

#include "smbop/ra/transform.hpp"
#include "smbop/ra/tree.hpp"
#include "smbop/schema/synthetic.hpp"

using namespace smbop;
using namespace smbop::ra;

namespace {

RaTree col(const std::string& name) { return leaf(Leaf::column(name)); }
RaTree tab(const std::string& name) { return leaf(Leaf::table(name)); }
RaTree val() { return leaf(Leaf::value()); }

// Figure-style running example: project name from actor where age >= value
RaTree fig_unbalanced() {
    return binary(RaOpId::Project, col("actor.name"),
                  binary(RaOpId::Select, binary(RaOpId::Ge, col("actor.age"), val()),
                         tab("actor")));
}

}  // namespace

TEST(RaTypes, OpInventory) {
    int unary = 0, bin = 0;
    for (int i = 0; i < kNumOps; ++i) {
        const RaOp& op = op_info(static_cast<RaOpId>(i));
        (op.arity == 1 ? unary : bin)++;
    }
    EXPECT_EQ(unary, 7);
    EXPECT_EQ(bin, 23);
    EXPECT_EQ(op_info(RaOpId::Select).in1, SemanticType::Predicate);
    EXPECT_EQ(op_info(RaOpId::Project).in1, SemanticType::ConstantSet);
    EXPECT_EQ(op_info(RaOpId::In).out, SemanticType::Predicate);
    EXPECT_TRUE(op_info(RaOpId::Eq).commutative);
    EXPECT_FALSE(op_info(RaOpId::Ge).commutative);
    EXPECT_FALSE(op_info(RaOpId::Except).commutative);
}

TEST(RaTypes, Unification) {
    EXPECT_TRUE(accepts(SemanticType::Any, SemanticType::Relation));
    EXPECT_TRUE(accepts(SemanticType::ConstantSet, SemanticType::Constant));
    EXPECT_FALSE(accepts(SemanticType::Constant, SemanticType::ConstantSet));
    EXPECT_FALSE(accepts(SemanticType::Relation, SemanticType::Predicate));
}

TEST(InferType, ComparisonGivesPredicate) {
    RaTree t = binary(RaOpId::Ge, col("actor.age"), val());
    EXPECT_EQ(infer_type(t), SemanticType::Predicate);
}

TEST(InferType, KeepIsIdentityOnType) {
    RaTree t = keep(tab("actor"));
    EXPECT_EQ(infer_type(t), SemanticType::Relation);
}

TEST(InferType, ProjectRejectsPredicateRelation) {
    RaTree pred = binary(RaOpId::Ge, col("actor.age"), val());
    EXPECT_THROW(binary(RaOpId::Project, col("actor.name"), pred), TypeError);
}

TEST(InferType, AggregationOutputFeedsProjection) {
    RaTree t = binary(RaOpId::Project, unary(RaOpId::AggCount, leaf(Leaf::star())), tab("matches"));
    EXPECT_EQ(infer_type(t), SemanticType::Relation);
}

TEST(Balance, FigureTree) {
    RaTree balanced = balance(fig_unbalanced());
    EXPECT_EQ(serialize(balanced),
              "(project (keep (keep actor.name)) (select (ge actor.age value) (keep actor)))");
    EXPECT_EQ(balanced->height(), fig_unbalanced()->height());
    EXPECT_TRUE(is_balanced(balanced));
    EXPECT_TRUE(structural_equal(strip_keep(balanced), fig_unbalanced()));
}

TEST(Balance, LeafIsFixpoint) {
    RaTree l = col("actor.name");
    EXPECT_TRUE(structural_equal(balance(l), l));
}

TEST(StripKeep, Chain) {
    RaTree t = keep(keep(col("actor.name")));
    EXPECT_EQ(serialize(strip_keep(t)), "actor.name");
    RaTree plain = fig_unbalanced();
    EXPECT_TRUE(structural_equal(strip_keep(plain), plain));
}

TEST(Canonical, CommutativeSwap) {
    RaTree a = binary(RaOpId::And, binary(RaOpId::Eq, col("t.a"), col("t.b")),
                      binary(RaOpId::Eq, col("t.c"), col("t.d")));
    RaTree b = binary(RaOpId::And, binary(RaOpId::Eq, col("t.c"), col("t.d")),
                      binary(RaOpId::Eq, col("t.a"), col("t.b")));
    EXPECT_TRUE(structural_equal(canonicalize(a), canonicalize(b)));
    EXPECT_EQ(canonical_digest(a), canonical_digest(b));
}

TEST(Canonical, NonCommutativeOrderSensitive) {
    RaTree a = binary(RaOpId::Ge, col("t.age"), val());
    RaTree b = binary(RaOpId::Ge, val(), col("t.age"));
    EXPECT_NE(canonical_digest(a), canonical_digest(b));
}

TEST(Canonical, Idempotent) {
    RaTree t = balance(fig_unbalanced());
    RaTree c1 = canonicalize(t);
    RaTree c2 = canonicalize(c1);
    EXPECT_TRUE(structural_equal(c1, c2));
}

TEST(Serialize, RoundTrip) {
    RaTree t = fig_unbalanced();
    EXPECT_EQ(serialize(t), "(project actor.name (select (ge actor.age value) actor))");
    EXPECT_TRUE(structural_equal(parse_tree(serialize(t)), t));
}

TEST(Serialize, RejectsBadInput) {
    EXPECT_THROW(parse_tree("(bogus x)"), SyntaxError);
    EXPECT_THROW(parse_tree("(keep"), SyntaxError);
    EXPECT_THROW(parse_tree("(keep actor) extra"), SyntaxError);
    EXPECT_THROW(parse_tree("(project actor actor)"), TypeError);
}

TEST(LevelSlices, FigureTree) {
    RaTree balanced = balance(fig_unbalanced());
    auto slices = level_slices(balanced);
    ASSERT_EQ(slices.size(), 4u);
    auto names = [](const std::vector<RaTree>& s) {
        std::vector<std::string> out;
        for (const auto& t : s) out.push_back(serialize(t));
        std::sort(out.begin(), out.end());
        return out;
    };
    EXPECT_EQ(names(slices[0]),
              (std::vector<std::string>{"actor", "actor.age", "actor.name", "value"}));
    EXPECT_EQ(names(slices[1]),
              (std::vector<std::string>{"(ge actor.age value)", "(keep actor)",
                                        "(keep actor.name)"}));
    EXPECT_EQ(names(slices[2]),
              (std::vector<std::string>{"(keep (keep actor.name))",
                                        "(select (ge actor.age value) (keep actor))"}));
    ASSERT_EQ(slices[3].size(), 1u);
    EXPECT_TRUE(structural_equal(slices[3][0], balanced));
}

TEST(LevelSlices, SingleLeaf) {
    auto slices = level_slices(col("t.c"));
    ASSERT_EQ(slices.size(), 1u);
    EXPECT_EQ(slices[0].size(), 1u);
}

TEST(LevelSlices, RejectsUnbalanced) {
    EXPECT_THROW(level_slices(fig_unbalanced()), UnbalancedInput);
}

TEST(LevelSlices, SharedSubtreeAppearsOnce) {
    // two identical predicate subtrees under a commutative op
    RaTree p = binary(RaOpId::Eq, col("t.a"), val());
    RaTree t = binary(RaOpId::And, p, p);
    auto slices = level_slices(t);
    ASSERT_EQ(slices.size(), 3u);
    EXPECT_EQ(slices[1].size(), 1u);  // shared (eq t.a value) deduplicated
    // pre-dedup count equals node count
    int nodes = t->size();
    EXPECT_EQ(nodes, 7);
}

// property tests over the synthetic generator

TEST(Properties, BalanceStripRoundTripAndDigests) {
    auto examples = gen_synthetic(11, 300, {5});
    for (const auto& ex : examples) {
        RaTree t = ex.gold_tree;
        RaTree b = balance(t);
        EXPECT_TRUE(is_balanced(b));
        EXPECT_EQ(b->height(), t->height());
        EXPECT_TRUE(structural_equal(strip_keep(b), t));
        EXPECT_EQ(canonical_digest(b), canonical_digest(t));
        EXPECT_EQ(infer_type(t), SemanticType::Relation);
    }
}

TEST(Properties, CanonicalInvariantUnderKeepInsertionAndSwaps) {
    auto examples = gen_synthetic(12, 200, {5});
    Rng rng(99);
    for (const auto& ex : examples) {
        // random keep insertion: rebuild with keeps sprinkled above random nodes
        std::function<RaTree(const RaTree&)> sprinkle = [&](const RaTree& t) -> RaTree {
            RaTree out;
            if (t->is_leaf()) out = t;
            else if (t->kind() == RaNode::Kind::Unary) out = unary(t->op(), sprinkle(t->left()));
            else out = binary(t->op(), sprinkle(t->left()), sprinkle(t->right()));
            while (rng.coin(0.2)) out = keep(out);
            return out;
        };
        // random commutative swaps
        std::function<RaTree(const RaTree&)> swap_some = [&](const RaTree& t) -> RaTree {
            if (t->is_leaf()) return t;
            if (t->kind() == RaNode::Kind::Unary) return unary(t->op(), swap_some(t->left()));
            RaTree l = swap_some(t->left());
            RaTree r = swap_some(t->right());
            if (is_commutative(t->op()) && rng.coin(0.5)) std::swap(l, r);
            return binary(t->op(), std::move(l), std::move(r));
        };
        Digest d = canonical_digest(ex.gold_tree);
        EXPECT_EQ(canonical_digest(sprinkle(ex.gold_tree)), d);
        EXPECT_EQ(canonical_digest(swap_some(ex.gold_tree)), d);
    }
}

TEST(Properties, SlicesReconstructTree) {
    // composing slices bottom-up by matching children digests yields the root
    auto examples = gen_synthetic(13, 50, {4});
    for (const auto& ex : examples) {
        auto slices = level_slices(ex.gold_balanced);
        std::unordered_set<Digest, DigestHash> built;
        for (const auto& l : slices[0]) built.insert(canonical_digest(l));
        for (std::size_t t = 1; t < slices.size(); ++t) {
            for (const auto& node : slices[t]) {
                EXPECT_TRUE(built.count(canonical_digest(node->left())));
                if (node->kind() == RaNode::Kind::Binary)
                    EXPECT_TRUE(built.count(canonical_digest(node->right())));
                built.insert(canonical_digest(node));
            }
        }
        EXPECT_TRUE(built.count(canonical_digest(ex.gold_balanced)));
    }
}
