#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "latentfuse/rng.hpp"
#include "latentfuse/types.hpp"

namespace testhelpers {

/// Deterministic Gaussian matrix, entry (i,j) = normal draw i*d+j.
inline Eigen::MatrixXd random_matrix(int n, int d, std::uint64_t seed) {
    latentfuse::CounterRng rng(seed);
    Eigen::MatrixXd m(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            m(i, j) = rng.normal(static_cast<std::uint64_t>(i) * d + j);
    return m;
}

inline latentfuse::SampleSet random_samples(int n, int d, std::uint64_t seed) {
    return {random_matrix(n, d, seed), 0, std::nullopt};
}

}  // namespace testhelpers
