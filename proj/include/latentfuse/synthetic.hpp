#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "latentfuse/errors.hpp"
#include "latentfuse/rng.hpp"
#include "latentfuse/types.hpp"

namespace latentfuse {

/// Independent uniform latent draws: x drives both sensors, y only the
/// first, z only the second.
struct HiddenTriplets {
    Eigen::VectorXd x, y, z;
    std::uint64_t seed = 0;
};

/// Torus geometry: one shared major radius, one minor radius per sensor.
struct TorusParams {
    double R = 10.0;
    double r1 = 4.0;
    double r2 = 2.0;
};

inline HiddenTriplets sample_hidden(Eigen::Index n, std::uint64_t seed) {
    if (n < 1)
        throw ParameterError("sample_hidden: n must be >= 1, got " + std::to_string(n));
    CounterRng rng(seed);
    HiddenTriplets t;
    t.seed = seed;
    t.x.resize(n);
    t.y.resize(n);
    t.z.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::uint64_t base = 3 * static_cast<std::uint64_t>(i);
        t.x(i) = rng.uniform(base);
        t.y(i) = rng.uniform(base + 1);
        t.z(i) = rng.uniform(base + 2);
    }
    return t;
}

/// Observation map of one sensor:
///   ((R + r cos(2 pi v)) cos(2 pi x),
///    (R + r cos(2 pi v)) sin(2 pi x),
///          r sin(2 pi v)).
/// For R > r the map is injective on the unit square, so both angles
/// stay recoverable; points satisfy (sqrt(s0^2+s1^2) - R)^2 + s2^2 = r^2.
inline Eigen::Vector3d torus_observe(double x, double v, double R, double r) {
    const double cx = std::cos(2.0 * std::numbers::pi * x);
    const double sx = std::sin(2.0 * std::numbers::pi * x);
    const double cv = std::cos(2.0 * std::numbers::pi * v);
    const double sv = std::sin(2.0 * std::numbers::pi * v);
    const double ring = R + r * cv;
    return {ring * cx, ring * sx, r * sv};
}

/// Paired dataset of the two-sensor experiment: both sensors observe
/// the same major angle x; sensor 1 carries y, sensor 2 carries z.
/// hidden_truth columns are (x, y) for s1 and (x, z) for s2.
inline std::pair<SampleSet, SampleSet> generate_tori_dataset(Eigen::Index n,
                                                             std::uint64_t seed,
                                                             const TorusParams& params = {}) {
    if (!(params.R > 0.0) || !(params.r1 > 0.0) || !(params.r2 > 0.0))
        throw ParameterError("generate_tori_dataset: radii must be positive");
    if (!(params.R > params.r1) || !(params.R > params.r2))
        throw ParameterError("generate_tori_dataset: R must exceed both minor radii");

    const HiddenTriplets t = sample_hidden(n, seed);
    SampleSet s1, s2;
    s1.sensor_id = 1;
    s2.sensor_id = 2;
    s1.data.resize(n, 3);
    s2.data.resize(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        s1.data.row(i) = torus_observe(t.x(i), t.y(i), params.R, params.r1).transpose();
        s2.data.row(i) = torus_observe(t.x(i), t.z(i), params.R, params.r2).transpose();
    }
    Eigen::MatrixXd h1(n, 2), h2(n, 2);
    h1.col(0) = t.x;
    h1.col(1) = t.y;
    h2.col(0) = t.x;
    h2.col(1) = t.z;
    s1.hidden_truth = std::move(h1);
    s2.hidden_truth = std::move(h2);
    return {std::move(s1), std::move(s2)};
}

/// Linear two-source observation s = A x + B y with known Jacobian.
struct LinearMultimodal {
    SampleSet samples;    ///< hidden_truth columns: x (d_x) then y (d_y)
    Eigen::MatrixXd jac;  ///< B, the exact d_obs x d_y Jacobian w.r.t. y
};

/// Random well-conditioned linear observation: both mixing matrices have
/// full column rank (regenerated from a shifted seed if a draw happens
/// to be near-singular).
inline LinearMultimodal linear_multimodal(Eigen::Index n, int d_obs, int d_x, int d_y,
                                          std::uint64_t seed) {
    if (n < 1)
        throw ParameterError("linear_multimodal: n must be >= 1");
    if (d_x < 1 || d_y < 1 || d_obs <= d_x + d_y)
        throw ParameterError("linear_multimodal: need d_obs > d_x + d_y >= 2");

    CounterRng rng(seed);
    Eigen::MatrixXd a, b;
    for (std::uint64_t attempt = 0;; ++attempt) {
        const CounterRng draw = rng.substream(1 + attempt);
        a.resize(d_obs, d_x);
        b.resize(d_obs, d_y);
        std::uint64_t c = 0;
        for (int i = 0; i < d_obs; ++i)
            for (int j = 0; j < d_x; ++j) a(i, j) = draw.normal(c++);
        for (int i = 0; i < d_obs; ++i)
            for (int j = 0; j < d_y; ++j) b(i, j) = draw.normal(c++);
        const double smin_a = Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues().minCoeff();
        const double smin_b = Eigen::JacobiSVD<Eigen::MatrixXd>(b).singularValues().minCoeff();
        if (smin_a > 1e-6 && smin_b > 1e-6) break;
    }

    const CounterRng draws = rng.substream(0);
    Eigen::MatrixXd x(n, d_x), y(n, d_y);
    std::uint64_t c = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j < d_x; ++j) x(i, j) = draws.uniform(c++);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j < d_y; ++j) y(i, j) = draws.uniform(c++);

    LinearMultimodal out;
    out.samples.data = x * a.transpose() + y * b.transpose();
    out.samples.sensor_id = 0;
    Eigen::MatrixXd hidden(n, d_x + d_y);
    hidden.leftCols(d_x) = x;
    hidden.rightCols(d_y) = y;
    out.samples.hidden_truth = std::move(hidden);
    out.jac = std::move(b);
    return out;
}

}  // namespace latentfuse
