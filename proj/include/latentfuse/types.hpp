#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "latentfuse/errors.hpp"

namespace latentfuse {

/// A batch of observations from one sensor, one sample per row.
struct SampleSet {
    Eigen::MatrixXd data;                         ///< N x D, rows are samples
    int sensor_id = 0;                            ///< provenance tag, not used numerically
    std::optional<Eigen::MatrixXd> hidden_truth;  ///< N x H driving variables, if known

    Eigen::Index size() const { return data.rows(); }
    Eigen::Index dim() const { return data.cols(); }
};

/// Throws InvalidInputError unless `s` is non-empty with only finite entries.
inline void require_valid(const SampleSet& s, const char* who) {
    if (s.data.rows() < 1 || s.data.cols() < 1)
        throw InvalidInputError(std::string(who) + ": sample set is empty");
    if (!s.data.allFinite())
        throw InvalidInputError(std::string(who) + ": sample set has non-finite entries");
}

/// Per-sample kernel bandwidths, strictly positive.
struct ScaleVector {
    Eigen::VectorXd eps;
};

/// Symmetric nonnegative affinity with unit diagonal.
struct AffinityMatrix {
    Eigen::MatrixXd w;

    Eigen::Index size() const { return w.rows(); }
};

/// Column-stochastic kernel: every column of `k` sums to one.
///
/// `degrees` holds the column sums of the affinity that produced `k`
/// when that affinity was symmetric; it is empty for matrices built any
/// other way (e.g. products of kernels).  A non-empty `degrees` licenses
/// the symmetric eigensolver path in spectral_decompose.
struct StochasticMatrix {
    Eigen::MatrixXd k;
    Eigen::VectorXd degrees;

    Eigen::Index size() const { return k.rows(); }
    bool has_symmetric_form() const { return degrees.size() == k.rows() && k.rows() > 0; }
};

/// Top nontrivial eigenpairs of a column-stochastic matrix.
///
/// Columns of `left_vectors` are unit-norm left eigenvectors sorted by
/// descending |eigenvalue|, each with its largest-magnitude entry made
/// positive.  The trivial pair (eigenvalue 1, constant left vector) is
/// excluded.
struct SpectralPairs {
    Eigen::VectorXd eigenvalues;   ///< length d
    Eigen::MatrixXd left_vectors;  ///< N x d
};

/// Diffusion coordinates: coords(i, j) = eigvals[j]^power * phi_j[i].
struct Embedding {
    Eigen::MatrixXd coords;   ///< N x d
    Eigen::VectorXd eigvals;  ///< length d, descending magnitude
    int power = 1;            ///< diffusion time used

    Eigen::Index size() const { return coords.rows(); }
    Eigen::Index dim() const { return coords.cols(); }
};

/// Fixed-size neighbor lists over an embedding.
///
/// neighbors[i] has exactly q entries, starts with i itself, and the
/// rest are ordered by (distance to i, then index).
struct NeighborhoodIndex {
    std::vector<std::vector<int>> neighbors;
    int q = 0;
};

/// First two moments of one neighborhood, plus the regularized inverse
/// used by the modified Mahalanobis distance.
struct LocalGaussian {
    Eigen::VectorXd mean;      ///< D
    Eigen::MatrixXd cov;       ///< D x D, symmetric PSD
    Eigen::MatrixXd pinv;      ///< D x D, truncated pseudo-inverse of cov
    Eigen::MatrixXd whitener;  ///< rank x D, whitener' * whitener == pinv
    int rank = 0;
};

/// Rank selection for the truncated pseudo-inverse.
///
/// With `fixed_rank` set, exactly that many leading eigenvalues are
/// kept; otherwise eigenvalues below tau * max(eigenvalue) are dropped.
struct RankPolicy {
    double tau = 1e-2;
    std::optional<int> fixed_rank;
};

/// Knobs shared by every diffusion pipeline in the library.
struct PipelineParams {
    int scale_k = 16;    ///< neighbor count for adaptive bandwidths
    int ad_power = 1;    ///< power of the alternating kernel before column distances
    int map_power = 1;   ///< diffusion time of the final embedding
    int dim = 2;         ///< embedding dimension
    std::optional<double> global_eps;  ///< fixed bandwidth overriding the adaptive rule
};

/// Knobs of the sensor-specific extraction.
struct SpecificParams {
    int q = 11;               ///< neighborhood size in the common embedding
    RankPolicy rank_policy{};
    bool center_offsets = true;  ///< subtract neighborhood means before whitening
};

}  // namespace latentfuse
