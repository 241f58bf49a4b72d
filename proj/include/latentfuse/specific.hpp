#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "latentfuse/diffusion.hpp"
#include "latentfuse/errors.hpp"
#include "latentfuse/kernels.hpp"
#include "latentfuse/types.hpp"

namespace latentfuse {

/// For every sample, its q nearest samples in embedding space.  The
/// sample itself is always listed first; the remaining q-1 entries are
/// ordered by squared distance, with exact ties resolved toward the
/// lower index.
inline NeighborhoodIndex neighborhoods(const Embedding& e, int q) {
    const Eigen::Index n = e.coords.rows();
    if (n < 1 || !e.coords.allFinite())
        throw InvalidInputError("neighborhoods: embedding must be non-empty and finite");
    if (q < 1 || q > n)
        throw ParameterError("neighborhoods: q must be in [1, N], got " + std::to_string(q));

    NeighborhoodIndex out;
    out.q = q;
    out.neighbors.assign(static_cast<std::size_t>(n), {});
    std::vector<std::pair<double, int>> cand;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& list = out.neighbors[static_cast<std::size_t>(i)];
        list.reserve(static_cast<std::size_t>(q));
        list.push_back(static_cast<int>(i));
        if (q == 1) continue;

        cand.clear();
        cand.reserve(static_cast<std::size_t>(n) - 1);
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i)
                cand.emplace_back((e.coords.row(j) - e.coords.row(i)).squaredNorm(),
                                  static_cast<int>(j));
        std::nth_element(cand.begin(), cand.begin() + (q - 2), cand.end());
        std::sort(cand.begin(), cand.begin() + (q - 1));
        for (int t = 0; t < q - 1; ++t)
            list.push_back(cand[static_cast<std::size_t>(t)].second);
    }
    return out;
}

/// Truncated pseudo-inverse of a symmetric PSD matrix.
struct TruncatedPinv {
    Eigen::MatrixXd pinv;      ///< D x D
    Eigen::MatrixXd whitener;  ///< rank x D, whitener' * whitener == pinv
    int rank = 0;
};

/// Eigenvalue-truncated Moore-Penrose inverse.  With a fixed rank the
/// leading eigenvalues are kept exactly; otherwise eigenvalues below
/// tau * max(eigenvalue) are treated as zero.  Whitener rows follow
/// descending eigenvalue order.
inline TruncatedPinv truncated_pinv(const Eigen::MatrixXd& cov, const RankPolicy& policy) {
    const Eigen::Index d = cov.rows();
    if (d < 1 || cov.cols() != d || !cov.allFinite())
        throw InvalidInputError("truncated_pinv: matrix must be square and finite");
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw InvalidInputError("truncated_pinv: matrix must be symmetric");
    if (policy.tau < 0.0)
        throw ParameterError("truncated_pinv: tau must be nonnegative");
    if (policy.fixed_rank && (*policy.fixed_rank < 0 || *policy.fixed_rank > d))
        throw ParameterError("truncated_pinv: fixed rank must be in [0, D]");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((0.5 * (cov + cov.transpose())).eval());
    if (es.info() != Eigen::Success)
        throw NumericalError("truncated_pinv: eigensolver did not converge");
    const Eigen::VectorXd& lam = es.eigenvalues();  // ascending
    const Eigen::MatrixXd& v = es.eigenvectors();

    std::vector<Eigen::Index> keep;  // descending eigenvalue order
    if (policy.fixed_rank) {
        for (int t = 0; t < *policy.fixed_rank; ++t) {
            const Eigen::Index j = d - 1 - t;
            if (!(lam(j) > 0.0))
                throw NumericalError("truncated_pinv: requested rank exceeds the "
                                     "positive spectrum");
            keep.push_back(j);
        }
    } else {
        const double cut = policy.tau * lam(d - 1);
        for (Eigen::Index j = d - 1; j >= 0; --j)
            if (lam(j) > 0.0 && lam(j) >= cut) keep.push_back(j);
    }

    TruncatedPinv out;
    out.rank = static_cast<int>(keep.size());
    out.pinv = Eigen::MatrixXd::Zero(d, d);
    out.whitener.resize(out.rank, d);
    for (int t = 0; t < out.rank; ++t) {
        const Eigen::Index j = keep[static_cast<std::size_t>(t)];
        out.pinv.noalias() += (1.0 / lam(j)) * v.col(j) * v.col(j).transpose();
        out.whitener.row(t) = v.col(j).transpose() / std::sqrt(lam(j));
    }
    return out;
}

/// First two moments of each neighborhood (both with a 1/q factor) plus
/// the truncated inverse of the covariance under `policy`.
inline std::vector<LocalGaussian> local_stats(const SampleSet& s, const NeighborhoodIndex& nb,
                                              const RankPolicy& policy = RankPolicy{}) {
    require_valid(s, "local_stats");
    const Eigen::Index n = s.data.rows();
    const Eigen::Index d = s.data.cols();
    if (static_cast<Eigen::Index>(nb.neighbors.size()) != n)
        throw InvalidInputError("local_stats: neighborhood index covers " +
                                std::to_string(nb.neighbors.size()) + " samples, data has " +
                                std::to_string(n));
    if (nb.q < 1)
        throw InvalidInputError("local_stats: neighborhood size must be >= 1");

    std::vector<LocalGaussian> out(static_cast<std::size_t>(n));
    Eigen::MatrixXd block(nb.q, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& list = nb.neighbors[static_cast<std::size_t>(i)];
        if (static_cast<int>(list.size()) != nb.q)
            throw InvalidInputError("local_stats: neighborhood of sample " + std::to_string(i) +
                                    " has wrong size");
        for (int t = 0; t < nb.q; ++t) {
            const int j = list[static_cast<std::size_t>(t)];
            if (j < 0 || j >= n)
                throw InvalidInputError("local_stats: neighbor index out of range");
            block.row(t) = s.data.row(j);
        }

        LocalGaussian& g = out[static_cast<std::size_t>(i)];
        g.mean = block.colwise().sum().transpose() / nb.q;
        block.rowwise() -= g.mean.transpose();
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
        cov.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose(), 1.0 / nb.q);
        g.cov = cov.selfadjointView<Eigen::Lower>();

        TruncatedPinv tp = truncated_pinv(g.cov, policy);
        g.pinv = std::move(tp.pinv);
        g.whitener = std::move(tp.whitener);
        g.rank = tp.rank;
    }
    return out;
}

/// Affinity from the modified Mahalanobis form
///   Q(i, j) = delta' (pinv_i + pinv_j) delta,
/// where delta is the difference of mean-centered offsets
///   (s_i - mean_i) - (s_j - mean_j)   when center_offsets is true,
/// or the plain sample difference
///   s_i - s_j                          when center_offsets is false.
/// Centering cancels the shared first-order neighborhood drift, but on
/// data whose neighborhoods wrap a closed fiber it can also cancel the
/// separation between far-apart samples whose fibers face each other,
/// aliasing them together; the raw difference keeps that separation.
/// Bandwidths are chosen adaptively on the Q values themselves (or a
/// global override).  Q is assembled as S + S' where
/// S(i, j) = |whitener_i (o_i - o_j)|^2, which makes it exactly
/// symmetric and costs one slim product per sample.
inline AffinityMatrix mahalanobis_affinity(const SampleSet& s,
                                           const std::vector<LocalGaussian>& gaussians,
                                           const PipelineParams& p = {},
                                           bool center_offsets = true) {
    require_valid(s, "mahalanobis_affinity");
    const Eigen::Index n = s.data.rows();
    const Eigen::Index d = s.data.cols();
    if (n < 2)
        throw InvalidInputError("mahalanobis_affinity: need at least 2 samples");
    if (static_cast<Eigen::Index>(gaussians.size()) != n)
        throw InvalidInputError("mahalanobis_affinity: one local model per sample required");
    if (p.global_eps && !(*p.global_eps > 0.0))
        throw ParameterError("mahalanobis_affinity: global_eps must be positive");
    if (!p.global_eps && (p.scale_k < 1 || p.scale_k > n - 1))
        throw ParameterError("mahalanobis_affinity: scale_k must be in [1, N-1]");

    Eigen::MatrixXd offsets(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const LocalGaussian& g = gaussians[static_cast<std::size_t>(i)];
        if (g.mean.size() != d || g.whitener.cols() != (g.rank > 0 ? d : g.whitener.cols()))
            throw InvalidInputError("mahalanobis_affinity: local model dimension mismatch");
        if (center_offsets)
            offsets.row(i) = s.data.row(i) - g.mean.transpose();
        else
            offsets.row(i) = s.data.row(i);
    }

    Eigen::MatrixXd half = Eigen::MatrixXd::Zero(n, n);  // half(i, j) = |F_i (o_i - o_j)|^2
    for (Eigen::Index i = 0; i < n; ++i) {
        const LocalGaussian& g = gaussians[static_cast<std::size_t>(i)];
        if (g.rank == 0) continue;
        const Eigen::MatrixXd proj = offsets * g.whitener.transpose();  // N x rank
        half.row(i) = (proj.rowwise() - proj.row(i)).rowwise().squaredNorm().transpose();
    }
    const Eigen::MatrixXd q = half + half.transpose();

    Eigen::VectorXd eps;
    bool flat = false;
    if (!p.global_eps) {
        eps.resize(n);
        std::vector<double> row(static_cast<std::size_t>(n) - 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            std::size_t t = 0;
            for (Eigen::Index j = 0; j < n; ++j)
                if (j != i) row[t++] = q(i, j);
            std::nth_element(row.begin(), row.begin() + (p.scale_k - 1), row.end());
            std::sort(row.begin(), row.begin() + p.scale_k);
            double acc = 0.0;
            for (int m = 0; m < p.scale_k; ++m) acc += row[static_cast<std::size_t>(m)];
            eps(i) = acc / p.scale_k;
            if (eps(i) == 0.0) flat = true;
        }
    }
    if (flat)
        std::cerr << "mahalanobis_affinity: warning: zero local bandwidths, "
                     "affinity degenerates to an indicator for those samples\n";

    AffinityMatrix out;
    out.w.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.w(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double denom =
                p.global_eps ? *p.global_eps : std::sqrt(eps(i) * eps(j));
            double w;
            if (denom > 0.0)
                w = std::exp(-q(i, j) / denom);
            else
                w = (q(i, j) == 0.0) ? 1.0 : 0.0;
            out.w(i, j) = w;
            out.w(j, i) = w;
        }
    }
    return out;
}

/// Embedding of the sensor-specific variable: neighborhoods are taken
/// in the common embedding, local Gaussians summarize the raw sensor
/// inside each, and the modified Mahalanobis kernel is embedded.
inline Embedding specific_embedding(const SampleSet& s, const Embedding& common,
                                    const SpecificParams& sp = {},
                                    const PipelineParams& p = {}) {
    require_valid(s, "specific_embedding");
    if (common.coords.rows() != s.data.rows())
        throw InvalidInputError("specific_embedding: embedding covers " +
                                std::to_string(common.coords.rows()) + " samples, data has " +
                                std::to_string(s.data.rows()));
    const NeighborhoodIndex nb = neighborhoods(common, sp.q);
    const std::vector<LocalGaussian> g = local_stats(s, nb, sp.rank_policy);
    const AffinityMatrix w = mahalanobis_affinity(s, g, p, sp.center_offsets);
    return diffusion_map(column_normalize(w), p.dim, p.map_power);
}

}  // namespace latentfuse
