#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rulekit {

/// A single cell value. monostate encodes SQL NULL.
using Value = std::variant<std::monostate, std::int64_t, std::string, bool>;

inline const Value kNull{std::monostate{}};

inline bool is_null(const Value &v) { return std::holds_alternative<std::monostate>(v); }

using Row = std::vector<Value>;

/// Three-valued logic: nullopt is Unknown.
using Tri = std::optional<bool>;

inline Tri tri_not(Tri a) {
    if (!a) return std::nullopt;
    return !*a;
}

inline Tri tri_and(Tri a, Tri b) {
    if (a && !*a) return false;
    if (b && !*b) return false;
    if (!a || !b) return std::nullopt;
    return true;
}

inline Tri tri_or(Tri a, Tri b) {
    if (a && *a) return true;
    if (b && *b) return true;
    if (!a || !b) return std::nullopt;
    return false;
}

/// Value comparison with SQL semantics: any NULL operand yields Unknown.
inline Tri tri_eq(const Value &a, const Value &b) {
    if (is_null(a) || is_null(b)) return std::nullopt;
    return a == b;
}

/// Multiset of rows. Equality respects multiplicity, ignores order; NULLs
/// are identical for identity purposes.
class Bag {
  public:
    Bag() = default;

    void add(Row row, long count = 1) {
        if (count == 0) return;
        counts_[std::move(row)] += count;
    }

    long count(const Row &row) const {
        auto it = counts_.find(row);
        return it == counts_.end() ? 0 : it->second;
    }

    long size() const {
        long n = 0;
        for (auto &[_, c] : counts_) n += c;
        return n;
    }

    bool empty() const { return counts_.empty(); }

    const std::map<Row, long> &entries() const { return counts_; }

    bool operator==(const Bag &other) const { return counts_ == other.counts_; }

  private:
    std::map<Row, long> counts_;
};

inline bool bag_equal(const Bag &a, const Bag &b) { return a == b; }

} // namespace rulekit
