#ifndef ADPREDICT_TEST_SUPPORT_HPP
#define ADPREDICT_TEST_SUPPORT_HPP

// Small hand-rolled generators shared by the unit suites. Everything draws from an
// explicit mt19937_64 so a failing trial can be replayed from its seed.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "adpredict/date.hpp"
#include "adpredict/matrix.hpp"

namespace testgen {

using Rng = std::mt19937_64;

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

inline adpredict::Date random_date(Rng& rng, adpredict::Date lo, adpredict::Date hi) {
    return adpredict::Date::from_days(uniform_int(rng, lo.days(), hi.days()));
}

/// Binary labels with both classes present.
inline std::vector<int> random_labels(Rng& rng, std::size_t n, double p_pos = 0.5) {
    std::vector<int> y(n);
    for (;;) {
        int pos = 0;
        for (auto& v : y) pos += v = coin(rng, p_pos) ? 1 : 0;
        if (pos > 0 && pos < static_cast<int>(n)) return y;
    }
}

/// Scores on a coarse grid so ties are common.
inline std::vector<double> tied_scores(Rng& rng, std::size_t n, int levels) {
    std::vector<double> s(n);
    for (auto& v : s) v = uniform_int(rng, 0, levels - 1) / static_cast<double>(levels);
    return s;
}

inline adpredict::Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -2, double hi = 2) {
    adpredict::Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = uniform_real(rng, lo, hi);
    }
    return m;
}

/// Sparse nonnegative count-like matrix, as keyword features look.
inline adpredict::Matrix random_counts(Rng& rng, std::size_t rows, std::size_t cols, double density = 0.3) {
    adpredict::Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (coin(rng, density)) m(r, c) = uniform_int(rng, 1, 5) * uniform_real(rng, 0.5, 2.0);
        }
    }
    return m;
}

}  // namespace testgen

#endif  // ADPREDICT_TEST_SUPPORT_HPP
