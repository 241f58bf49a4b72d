#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "latentfuse/errors.hpp"
#include "latentfuse/types.hpp"

namespace latentfuse {

/// Dense matrix of squared Euclidean distances between all sample pairs.
///
/// Only the upper triangle is computed; the result is exactly symmetric
/// with an exactly zero diagonal.  Requires at least two samples.
inline Eigen::MatrixXd pairwise_sq_dists(const SampleSet& s) {
    require_valid(s, "pairwise_sq_dists");
    const Eigen::Index n = s.data.rows();
    if (n < 2)
        throw InvalidInputError("pairwise_sq_dists: need at least 2 samples, got " +
                                std::to_string(n));

    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = (s.data.row(i) - s.data.row(j)).squaredNorm();
            d2(i, j) = v;
            d2(j, i) = v;
        }
    return d2;
}

/// Per-sample bandwidth: mean squared distance to the k nearest other
/// samples.  A zero bandwidth (>= k exact duplicates of a sample) has no
/// usable kernel and raises DegenerateScaleError.
inline ScaleVector adaptive_scales(const Eigen::MatrixXd& d2, int k) {
    const Eigen::Index n = d2.rows();
    if (n < 2 || d2.cols() != n)
        throw InvalidInputError("adaptive_scales: distance matrix must be square, N >= 2");
    if (k < 1 || k > n - 1)
        throw ParameterError("adaptive_scales: k must be in [1, N-1], got " +
                             std::to_string(k));

    ScaleVector out;
    out.eps.resize(n);
    std::vector<double> row(static_cast<std::size_t>(n) - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t t = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) row[t++] = d2(i, j);
        std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
        std::sort(row.begin(), row.begin() + k);
        double acc = 0.0;
        for (int m = 0; m < k; ++m) acc += row[static_cast<std::size_t>(m)];
        out.eps(i) = acc / k;
        if (out.eps(i) <= 0.0)
            throw DegenerateScaleError("adaptive_scales: zero bandwidth at sample " +
                                           std::to_string(i) + " (duplicate samples)",
                                       static_cast<int>(i));
    }
    return out;
}

/// Gaussian affinity with geometric-mean bandwidths:
/// w(i, j) = exp(-d2(i, j) / sqrt(eps_i * eps_j)).
///
/// Symmetry is exact because d2 is and the bandwidth product commutes.
inline AffinityMatrix gaussian_affinity(const Eigen::MatrixXd& d2, const ScaleVector& scales) {
    const Eigen::Index n = d2.rows();
    if (n < 2 || d2.cols() != n)
        throw InvalidInputError("gaussian_affinity: distance matrix must be square, N >= 2");
    if (scales.eps.size() != n)
        throw ParameterError("gaussian_affinity: scale vector size mismatch");
    if (!(scales.eps.array() > 0.0).all())
        throw ParameterError("gaussian_affinity: bandwidths must be positive");

    AffinityMatrix out;
    out.w.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.w(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = std::exp(-d2(i, j) / std::sqrt(scales.eps(i) * scales.eps(j)));
            out.w(i, j) = v;
            out.w(j, i) = v;
        }
    }
    return out;
}

/// Divide each column by its sum, producing a column-stochastic kernel.
/// The column sums are kept as `degrees`; they certify that this matrix
/// is conjugate to a symmetric one.
inline StochasticMatrix column_normalize(const AffinityMatrix& w) {
    const Eigen::Index n = w.w.rows();
    if (n < 1 || w.w.cols() != n)
        throw InvalidInputError("column_normalize: affinity must be square");
    if (!w.w.allFinite() || w.w.minCoeff() < 0.0)
        throw InvalidInputError("column_normalize: affinity must be finite and nonnegative");
    if ((w.w - w.w.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw InvalidInputError("column_normalize: affinity must be symmetric");

    StochasticMatrix out;
    out.degrees = w.w.colwise().sum().transpose();
    for (Eigen::Index j = 0; j < n; ++j)
        if (out.degrees(j) <= 0.0)
            throw DegenerateGraphError("column_normalize: column " + std::to_string(j) +
                                       " sums to zero");
    out.k = w.w.array().rowwise() / out.degrees.transpose().array();
    return out;
}

}  // namespace latentfuse
