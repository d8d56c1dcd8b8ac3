#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace sburgers {

/// Enumeration of spatial multi-indices alpha with |alpha| <= max order,
/// graded (by total order) then lexicographic. Index 0 is always the value
/// channel (alpha = 0).
class MultiIndexSet {
public:
    MultiIndexSet() = default;
    MultiIndexSet(std::size_t dim, int max_order) : dim_(dim), order_(max_order) {
        std::vector<int> alpha(dim, 0);
        for (int r = 0; r <= max_order; ++r) emit(alpha, 0, r);
        for (std::size_t idx = 0; idx < list_.size(); ++idx)
            lookup_.push_back(idx);
        std::sort(lookup_.begin(), lookup_.end(), [this](std::size_t a, std::size_t b) {
            return list_[a] < list_[b];
        });
    }

    std::size_t size() const { return list_.size(); }
    std::size_t dim() const { return dim_; }
    int max_order() const { return order_; }

    std::span<const int> alpha(std::size_t idx) const {
        return {list_[idx].data(), dim_};
    }

    int order_of(std::size_t idx) const {
        int s = 0;
        for (int v : list_[idx]) s += v;
        return s;
    }

    /// Channel index of a given exponent vector; throws if out of range.
    std::size_t index_of(std::span<const int> alpha) const {
        std::vector<int> key(alpha.begin(), alpha.end());
        auto it = std::lower_bound(lookup_.begin(), lookup_.end(), key,
                                   [this](std::size_t i, const std::vector<int>& k) {
                                       return list_[i] < k;
                                   });
        if (it == lookup_.end() || list_[*it] != key)
            throw std::invalid_argument("MultiIndexSet: derivative order not available");
        return *it;
    }

    std::size_t first(std::size_t k) const { return first_cached(k); }
    std::size_t second(std::size_t k, std::size_t l) const {
        std::vector<int> a(dim_, 0);
        a[k] += 1;
        a[l] += 1;
        return index_of(a);
    }
    std::size_t third(std::size_t k, std::size_t l, std::size_t m) const {
        std::vector<int> a(dim_, 0);
        a[k] += 1;
        a[l] += 1;
        a[m] += 1;
        return index_of(a);
    }

private:
    std::size_t first_cached(std::size_t k) const {
        std::vector<int> a(dim_, 0);
        a[k] = 1;
        return index_of(a);
    }

    void emit(std::vector<int>& alpha, std::size_t axis, int remaining) {
        if (axis + 1 == dim_) {
            alpha[axis] = remaining;
            list_.push_back(alpha);
            alpha[axis] = 0;
            return;
        }
        for (int v = remaining; v >= 0; --v) {
            alpha[axis] = v;
            emit(alpha, axis + 1, remaining - v);
            alpha[axis] = 0;
        }
    }

    std::size_t dim_ = 0;
    int order_ = 0;
    std::vector<std::vector<int>> list_;
    std::vector<std::size_t> lookup_;
};

}  // namespace sburgers
