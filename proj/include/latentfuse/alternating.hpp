#pragma once

#include <Eigen/Dense>

#include <string>

#include "latentfuse/diffusion.hpp"
#include "latentfuse/errors.hpp"
#include "latentfuse/kernels.hpp"
#include "latentfuse/types.hpp"

namespace latentfuse {

/// Alternating-diffusion kernel: one step through sensor 1 followed by
/// one step through sensor 2, K = K2 * K1.  The product is still
/// column-stochastic but has no symmetric conjugate, so `degrees` is
/// left empty.
inline StochasticMatrix ad_kernel(const StochasticMatrix& k1, const StochasticMatrix& k2) {
    detail::require_stochastic(k1, "ad_kernel");
    detail::require_stochastic(k2, "ad_kernel");
    if (k1.k.rows() != k2.k.rows())
        throw InvalidInputError("ad_kernel: kernels describe different sample counts (" +
                                std::to_string(k1.k.rows()) + " vs " +
                                std::to_string(k2.k.rows()) + ")");
    StochasticMatrix out;
    out.k.noalias() = k2.k * k1.k;
    return out;
}

namespace detail {

inline void require_pipeline_params(const PipelineParams& p, const char* who) {
    if (p.scale_k < 1)
        throw ParameterError(std::string(who) + ": scale_k must be >= 1");
    if (p.ad_power < 1 || p.map_power < 1)
        throw ParameterError(std::string(who) + ": powers must be >= 1");
    if (p.dim < 1)
        throw ParameterError(std::string(who) + ": dim must be >= 1");
    if (p.global_eps && !(*p.global_eps > 0.0))
        throw ParameterError(std::string(who) + ": global_eps must be positive");
}

inline ScaleVector scales_for(const Eigen::MatrixXd& d2, const PipelineParams& p) {
    if (p.global_eps) {
        ScaleVector sv;
        sv.eps = Eigen::VectorXd::Constant(d2.rows(), *p.global_eps);
        return sv;
    }
    return adaptive_scales(d2, p.scale_k);
}

inline StochasticMatrix sensor_kernel(const SampleSet& s, const PipelineParams& p) {
    const Eigen::MatrixXd d2 = pairwise_sq_dists(s);
    return column_normalize(gaussian_affinity(d2, scales_for(d2, p)));
}

}  // namespace detail

/// Embedding of the variable common to two synchronized sensors.
///
/// Pipeline: per-sensor Gaussian kernels, alternating product, column
/// distances of its ad_power-th power, then one more diffusion-map pass
/// on those distances.  The second pass keeps the spectrum real, so the
/// embedding never depends on complex eigenpairs of the product.
inline Embedding common_embedding(const SampleSet& s1, const SampleSet& s2,
                                  const PipelineParams& p = {}) {
    detail::require_pipeline_params(p, "common_embedding");
    require_valid(s1, "common_embedding");
    require_valid(s2, "common_embedding");
    if (s1.size() != s2.size())
        throw InvalidInputError("common_embedding: sensors must be sampled in sync (" +
                                std::to_string(s1.size()) + " vs " +
                                std::to_string(s2.size()) + " samples)");

    const StochasticMatrix k1 = detail::sensor_kernel(s1, p);
    const StochasticMatrix k2 = detail::sensor_kernel(s2, p);
    const StochasticMatrix kad = ad_kernel(k1, k2);

    const Eigen::MatrixXd dist = column_distances(kad, p.ad_power);
    const Eigen::MatrixXd d2 = dist.array().square();
    const StochasticMatrix k = column_normalize(gaussian_affinity(d2, detail::scales_for(d2, p)));
    return diffusion_map(k, p.dim, p.map_power);
}

}  // namespace latentfuse
