/// @brief multi-index arithmetic and enumeration
///
/// A multi-index is a vector of d non-negative integers. The canonical storage
/// order for index sets is graded-lexicographic: increasing total order, and
/// within one order decreasing first entry (so (1,0) precedes (0,1)).
#pragma once

#include <qtdg/errors.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>
#include <map>
#include <vector>

namespace qtdg {

inline constexpr int kMaxDim = 6;

class MultiIndex {
  public:
    MultiIndex() = default;

    explicit MultiIndex(int dim) : dim_(dim) {
        if (dim < 0 || dim > kMaxDim) throw ContractError("multi-index dimension out of range");
    }

    MultiIndex(std::initializer_list<int> entries) : MultiIndex(static_cast<int>(entries.size())) {
        int j = 0;
        for (int e : entries) set(j++, e);
    }

    /// unit multi-index e_k (0-based k)
    static MultiIndex unit(int dim, int k) {
        MultiIndex m(dim);
        m.set(k, 1);
        return m;
    }

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] int operator[](int j) const noexcept { return e_[j]; }

    void set(int j, int value) {
        if (value < 0) throw ContractError("multi-index entries must be non-negative");
        e_[j] = value;
    }

    /// |i| = sum of entries
    [[nodiscard]] int order() const noexcept {
        int s = 0;
        for (int j = 0; j < dim_; ++j) s += e_[j];
        return s;
    }

    /// entry-wise partial order
    [[nodiscard]] bool leq(const MultiIndex& o) const noexcept {
        for (int j = 0; j < dim_; ++j)
            if (e_[j] > o.e_[j]) return false;
        return true;
    }

    friend MultiIndex operator+(MultiIndex a, const MultiIndex& b) {
        for (int j = 0; j < a.dim_; ++j) a.e_[j] += b.e_[j];
        return a;
    }

    /// requires b <= a
    friend MultiIndex operator-(MultiIndex a, const MultiIndex& b) {
        if (!b.leq(a)) throw ContractError("multi-index subtraction requires b <= a");
        for (int j = 0; j < a.dim_; ++j) a.e_[j] -= b.e_[j];
        return a;
    }

    friend bool operator==(const MultiIndex& a, const MultiIndex& b) noexcept {
        if (a.dim_ != b.dim_) return false;
        for (int j = 0; j < a.dim_; ++j)
            if (a.e_[j] != b.e_[j]) return false;
        return true;
    }

    /// drops the first entry (k1), used to address Cauchy-data slices
    [[nodiscard]] MultiIndex tail() const {
        MultiIndex t(dim_ - 1);
        for (int j = 1; j < dim_; ++j) t.e_[j - 1] = e_[j];
        return t;
    }

    /// prepends a first entry
    [[nodiscard]] static MultiIndex with_head(int head, const MultiIndex& tail) {
        MultiIndex m(tail.dim_ + 1);
        m.set(0, head);
        for (int j = 0; j < tail.dim_; ++j) m.e_[j + 1] = tail.e_[j];
        return m;
    }

    friend std::ostream& operator<<(std::ostream& os, const MultiIndex& m) {
        os << '(';
        for (int j = 0; j < m.dim_; ++j) os << (j ? "," : "") << m.e_[j];
        return os << ')';
    }

  private:
    int dim_ = 0;
    std::array<int, kMaxDim> e_{};
};

// integer combinatorics; exact for the magnitudes used here (p <= 10, d <= 3
// keeps every factorial below 20!)

[[nodiscard]] inline std::uint64_t factorial(int n) {
    if (n < 0 || n > 20) throw ContractError("factorial argument out of exact range");
    std::uint64_t f = 1;
    for (int k = 2; k <= n; ++k) f *= static_cast<std::uint64_t>(k);
    return f;
}

[[nodiscard]] inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int j = 1; j <= k; ++j) r = r * static_cast<std::uint64_t>(n - k + j) / static_cast<std::uint64_t>(j);
    return r;
}

/// i! = product of entry factorials
[[nodiscard]] inline std::uint64_t factorial(const MultiIndex& i) {
    std::uint64_t f = 1;
    for (int j = 0; j < i.dim(); ++j) f *= factorial(i[j]);
    return f;
}

/// binom(i, j) = product of scalar binomials; j <= i is a contract
[[nodiscard]] inline std::uint64_t binomial(const MultiIndex& i, const MultiIndex& j) {
    if (!j.leq(i)) throw ContractError("binomial(i, j) requires j <= i");
    std::uint64_t r = 1;
    for (int k = 0; k < i.dim(); ++k) r *= binomial(i[k], j[k]);
    return r;
}

/// S_{d,p} = dim P^p(R^d); zero for p < 0
[[nodiscard]] inline std::size_t poly_dimension(int d, int p) {
    if (p < 0) return 0;
    if (d == 0) return 1;
    return static_cast<std::size_t>(binomial(p + d, d));
}

enum class EnumerationOrder { graded_lex, algorithm_diagonal };

namespace detail {

// all tails of the given dimension with the given total order, first entry descending
inline void compositions(int dim, int total, MultiIndex& cur, int pos, std::vector<MultiIndex>& out) {
    if (pos == dim - 1) {
        cur.set(pos, total);
        out.push_back(cur);
        return;
    }
    for (int v = total; v >= 0; --v) {
        cur.set(pos, v);
        compositions(dim, total - v, cur, pos + 1, out);
    }
}

}  // namespace detail

/// all multi-indices with |i| == r, first entry descending
[[nodiscard]] inline std::vector<MultiIndex> enumerate_order(int d, int r) {
    std::vector<MultiIndex> out;
    MultiIndex cur(d);
    detail::compositions(d, r, cur, 0, out);
    return out;
}

/// All k with |k| <= p, each exactly once.
[[nodiscard]] inline std::vector<MultiIndex> enumerate_up_to(int d, int p,
                                                            EnumerationOrder order = EnumerationOrder::graded_lex) {
    if (d < 1) throw ContractError("enumerate_up_to requires d >= 1");
    std::vector<MultiIndex> out;
    if (p < 0) return out;
    out.reserve(poly_dimension(d, p));
    for (int r = 0; r <= p; ++r) {
        auto level = enumerate_order(d, r);
        if (order == EnumerationOrder::algorithm_diagonal) {
            // increasing k1 along the diagonal; stable keeps graded-lex among equal k1
            std::stable_sort(level.begin(), level.end(),
                             [](const MultiIndex& a, const MultiIndex& b) { return a[0] < b[0]; });
        }
        out.insert(out.end(), level.begin(), level.end());
    }
    return out;
}

/// The set {k : |k| <= p} in graded-lex order with O(1) position lookup.
class MultiIndexSet {
  public:
    MultiIndexSet(int d, int p) : d_(d), p_(p), items_(enumerate_up_to(d, p)) {
        std::size_t table = 1;
        for (int j = 0; j < d; ++j) table *= static_cast<std::size_t>(p + 1);
        lookup_.assign(table, -1);
        for (std::size_t n = 0; n < items_.size(); ++n) lookup_[key(items_[n])] = static_cast<int>(n);
    }

    [[nodiscard]] int dim() const noexcept { return d_; }
    [[nodiscard]] int degree() const noexcept { return p_; }
    [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }
    [[nodiscard]] const MultiIndex& operator[](std::size_t n) const { return items_[n]; }
    [[nodiscard]] const std::vector<MultiIndex>& items() const noexcept { return items_; }
    [[nodiscard]] auto begin() const noexcept { return items_.begin(); }
    [[nodiscard]] auto end() const noexcept { return items_.end(); }

    /// position of k in the set, or -1 when |k| > p
    [[nodiscard]] int position(const MultiIndex& k) const {
        if (k.dim() != d_ || k.order() > p_) return -1;
        return lookup_[key(k)];
    }

    /// process-wide shared instance per (d, p)
    static std::shared_ptr<const MultiIndexSet> shared(int d, int p) {
        static std::mutex mtx;
        static std::map<std::pair<int, int>, std::shared_ptr<const MultiIndexSet>> cache;
        std::lock_guard lock(mtx);
        auto& slot = cache[{d, p}];
        if (!slot) slot = std::make_shared<const MultiIndexSet>(d, p);
        return slot;
    }

  private:
    [[nodiscard]] std::size_t key(const MultiIndex& k) const {
        std::size_t idx = 0;
        for (int j = d_ - 1; j >= 0; --j) idx = idx * static_cast<std::size_t>(p_ + 1) + static_cast<std::size_t>(k[j]);
        return idx;
    }

    int d_;
    int p_;
    std::vector<MultiIndex> items_;
    std::vector<int> lookup_;
};

}  // namespace qtdg
