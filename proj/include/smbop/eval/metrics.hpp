#pragma once

#include "smbop/io/trace.hpp"

namespace smbop::eval {

/// Exact match: canonical equality (Keep-insensitive, commutative children
/// sorted). Both trees must be Relation-rooted queries.
inline bool exact_match(const ra::RaTree& predicted, const ra::RaTree& gold) {
    return ra::canonical_serialization(predicted) == ra::canonical_serialization(gold);
}

inline bool exact_match(const TraceView& trace, const Digest& gold_digest) {
    return trace.chosen && *trace.chosen == gold_digest;
}

/// Beam exact match: a tree equivalent to gold appeared anywhere in the
/// returnable pool during the T decoding steps.
inline bool beam_em(const TraceView& trace, const Digest& gold_digest) {
    for (const auto& dg : trace.pool_digests)
        if (dg == gold_digest) return true;
    return false;
}

/// Z_t recall: every gold t-high subtree digest is present in beam Z_t.
/// Defined for t up to the gold height; computed per step independently.
inline bool z_recall(const TraceView& trace, const std::vector<std::vector<Digest>>& gold_slices,
                     int t) {
    if (t < 0 || t >= static_cast<int>(gold_slices.size())) throw Error("z_recall: t out of range");
    if (t >= static_cast<int>(trace.beam_digests.size())) return false;
    std::unordered_set<Digest, DigestHash> beam(
        trace.beam_digests[static_cast<std::size_t>(t)].begin(),
        trace.beam_digests[static_cast<std::size_t>(t)].end());
    for (const auto& dg : gold_slices[static_cast<std::size_t>(t)])
        if (!beam.count(dg)) return false;
    return true;
}

/// First failure step: the smallest t whose gold slice is missing from beam
/// Z_t, for examples the search never recovered (BEM false). Returns -1 when
/// the search found the gold tree somewhere.
inline int failure_step(const TraceView& trace, const std::vector<std::vector<Digest>>& gold_slices,
                        const Digest& gold_digest) {
    if (beam_em(trace, gold_digest)) return -1;
    for (int t = 0; t < static_cast<int>(gold_slices.size()); ++t)
        if (!z_recall(trace, gold_slices, t)) return t;
    return static_cast<int>(gold_slices.size()) - 1;
}

}  // namespace smbop::eval
