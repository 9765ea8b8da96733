#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace smbop {

// ---------------------------------------------------------------------------
// Errors. Every failure mode named by the library maps to one of these; the
// CLI translates them into exit codes (2 for input validation, 1 otherwise).
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct TypeError : Error {
    std::string node_path;
    TypeError(std::string path, const std::string& msg)
        : Error("type error at [" + path + "]: " + msg), node_path(std::move(path)) {}
};

struct SyntaxError : Error {
    std::size_t position;
    SyntaxError(std::size_t pos, const std::string& msg)
        : Error("syntax error at " + std::to_string(pos) + ": " + msg), position(pos) {}
};

struct UnsupportedConstruct : Error {
    std::string construct;
    explicit UnsupportedConstruct(const std::string& name)
        : Error("unsupported construct: " + name), construct(name) {}
};

struct AmbiguousColumn : Error {
    explicit AmbiguousColumn(const std::string& name) : Error("ambiguous column: " + name) {}
};

struct UnknownIdentifier : Error {
    explicit UnknownIdentifier(const std::string& name) : Error("unknown identifier: " + name) {}
};

struct NotReturnable : Error {
    explicit NotReturnable(const std::string& msg) : Error("not returnable: " + msg) {}
};

struct UnrenderableShape : Error {
    explicit UnrenderableShape(const std::string& msg) : Error("unrenderable shape: " + msg) {}
};

struct UnbalancedInput : Error {
    explicit UnbalancedInput(const std::string& msg) : Error("unbalanced input: " + msg) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error("shape mismatch: " + msg) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

struct ValidationError : Error {
    std::size_t record;
    ValidationError(std::size_t rec, const std::string& reason)
        : Error("record " + std::to_string(rec) + ": " + reason), record(rec) {}
};

struct EmptyFrontier : Error {
    explicit EmptyFrontier(const std::string& msg) : Error("empty frontier: " + msg) {}
};

struct EmptyPool : Error {
    explicit EmptyPool(const std::string& msg) : Error("empty pool: " + msg) {}
};

struct GoldNotInFrontier : Error {
    explicit GoldNotInFrontier(const std::string& msg) : Error("gold missing from frontier: " + msg) {}
};

struct GoldOverflow : Error {
    explicit GoldOverflow(const std::string& msg) : Error("gold overflow: " + msg) {}
};

struct UnknownOp : Error {
    explicit UnknownOp(const std::string& name) : Error("unknown op: " + name) {}
};

// ---------------------------------------------------------------------------
// 128-bit digest. FNV-1a over the canonical serialization; two 64-bit lanes
// with distinct offset bases. Total order is (hi, lo) lexicographic.
// ---------------------------------------------------------------------------

struct Digest {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    friend bool operator==(const Digest& a, const Digest& b) = default;
    friend auto operator<=>(const Digest& a, const Digest& b) = default;
};

inline Digest fnv128(std::string_view bytes) {
    constexpr std::uint64_t prime = 0x100000001b3ull;
    std::uint64_t a = 0xcbf29ce484222325ull;
    std::uint64_t b = 0x84222325cbf29ce4ull;
    for (unsigned char c : bytes) {
        a = (a ^ c) * prime;
        b = (b ^ (c + 0x9eu)) * prime;
    }
    return Digest{a, b};
}

struct DigestHash {
    std::size_t operator()(const Digest& d) const noexcept {
        return static_cast<std::size_t>(d.hi ^ (d.lo * 0x9e3779b97f4a7c15ull));
    }
};

inline std::string to_hex(const Digest& d) {
    static const char* x = "0123456789abcdef";
    std::string s(32, '0');
    for (int i = 0; i < 16; ++i) s[15 - i] = x[(d.hi >> (4 * i)) & 0xf];
    for (int i = 0; i < 16; ++i) s[31 - i] = x[(d.lo >> (4 * i)) & 0xf];
    return s;
}

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// distributions below avoid std:: distribution objects, whose output is
// implementation-defined, so streams are identical on every platform.
// ---------------------------------------------------------------------------

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) { return n ? engine_() % n : 0; }

    // uniform integer in [lo, hi] inclusive
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    bool coin(double p) { return next_double() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(next_below(v.size()))];
    }

    // independent child stream, for per-example determinism
    Rng fork(std::uint64_t salt) { return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ull)); }

  private:
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// parallel_for: runs fn(i) for i in [0, n) on `threads` workers. Each index
// writes only its own output slot, so results are identical for any thread
// count; callers do all cross-index reduction sequentially afterwards.
// ---------------------------------------------------------------------------

inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> workers;
    workers.reserve(nw);
    std::vector<std::exception_ptr> errors(nw);
    for (std::size_t w = 0; w < nw; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += nw) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace smbop
