#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "escp/error.hpp"
#include "escp/rng.hpp"

namespace escp {

// Permutation of {0, ..., n-1}.  Storage is 0-based; serialized forms and
// printed demand indices are 1-based.
class Permutation {
  public:
    Permutation() = default;
    explicit Permutation(std::vector<int> map) : map_(std::move(map)) {
        if (!is_valid_map(map_)) throw ParseError("Permutation: image is not a bijection");
    }

    static Permutation identity(std::size_t n) {
        std::vector<int> m(n);
        std::iota(m.begin(), m.end(), 0);
        return Permutation(std::move(m));
    }

    std::size_t size() const { return map_.size(); }
    int operator()(int i) const { return map_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& map() const { return map_; }

    Permutation inverse() const {
        std::vector<int> inv(map_.size());
        for (std::size_t i = 0; i < map_.size(); ++i) inv[static_cast<std::size_t>(map_[i])] = static_cast<int>(i);
        return Permutation(std::move(inv));
    }

    // (a.compose(b))(i) = a(b(i))
    Permutation compose(const Permutation& b) const {
        if (size() != b.size()) throw ParseError("Permutation: size mismatch in compose");
        std::vector<int> m(size());
        for (std::size_t i = 0; i < size(); ++i) m[i] = map_[static_cast<std::size_t>(b.map_[i])];
        return Permutation(std::move(m));
    }

    bool operator==(const Permutation& o) const { return map_ == o.map_; }

    static bool is_valid_map(const std::vector<int>& m) {
        std::vector<char> seen(m.size(), 0);
        for (int v : m) {
            if (v < 0 || static_cast<std::size_t>(v) >= m.size() || seen[static_cast<std::size_t>(v)]) return false;
            seen[static_cast<std::size_t>(v)] = 1;
        }
        return true;
    }

  private:
    std::vector<int> map_;
};

// Cycles of a permutation in canonical form: each cycle starts at its
// smallest element, cycles sorted by that element.
struct CycleDecomposition {
    std::vector<std::vector<int>> cycles;
    std::size_t count() const { return cycles.size(); }
};

inline CycleDecomposition decompose(const Permutation& p) {
    CycleDecomposition dec;
    const std::size_t n = p.size();
    std::vector<char> seen(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
        if (seen[s]) continue;
        std::vector<int> cyc;
        int cur = static_cast<int>(s);
        do {
            seen[static_cast<std::size_t>(cur)] = 1;
            cyc.push_back(cur);
            cur = p(cur);
        } while (cur != static_cast<int>(s));
        dec.cycles.push_back(std::move(cyc));
    }
    return dec;
}

// Rebuild the permutation from its cycles (inverse of decompose).
inline Permutation recompose(const CycleDecomposition& dec, std::size_t n) {
    std::vector<int> m(n, -1);
    for (const auto& cyc : dec.cycles)
        for (std::size_t k = 0; k < cyc.size(); ++k)
            m[static_cast<std::size_t>(cyc[k])] = cyc[(k + 1) % cyc.size()];
    return Permutation(std::move(m));
}

// Uniformly random permutation (Fisher-Yates, draws from hi index down).
inline Permutation random_permutation(std::size_t n, RngStream& rng) {
    std::vector<int> m(n);
    std::iota(m.begin(), m.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(m[i - 1], m[j]);
    }
    return Permutation(std::move(m));
}

// Expected number of cycles of a uniform permutation: the harmonic sum H_n.
inline double expected_cycle_count(std::size_t n) {
    double h = 0.0;
    for (std::size_t k = 1; k <= n; ++k) h += 1.0 / static_cast<double>(k);
    return h;
}

}  // namespace escp
