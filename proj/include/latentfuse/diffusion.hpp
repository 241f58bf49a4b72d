#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "latentfuse/errors.hpp"
#include "latentfuse/types.hpp"

namespace latentfuse {

namespace detail {

inline void require_stochastic(const StochasticMatrix& k, const char* who) {
    const Eigen::Index n = k.k.rows();
    if (n < 2 || k.k.cols() != n)
        throw InvalidInputError(std::string(who) + ": kernel must be square with N >= 2");
    if (!k.k.allFinite())
        throw InvalidInputError(std::string(who) + ": kernel has non-finite entries");
    if (((k.k.colwise().sum().array() - 1.0).abs() > 1e-10).any())
        throw InvalidInputError(std::string(who) + ": kernel columns must sum to one");
}

inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0.0) v = -v;
}

/// Route for kernels carrying degrees: K is conjugate to the symmetric
/// M = D^{-1/2} W D^{-1/2} via K = D^{1/2} M D^{-1/2}, so eigenvalues
/// are real and a self-adjoint solver applies.  Left eigenvectors map
/// back as phi = D^{-1/2} v.  The trivial pair is removed exactly:
/// u0 = D^{1/2} 1 (normalized) is an eigenvector of M at 1, and the
/// rank-one deflation M - u0 u0' shifts only that eigenvalue to 0.
inline SpectralPairs decompose_symmetric(const StochasticMatrix& k, int d) {
    const Eigen::Index n = k.k.rows();
    if (!(k.degrees.array() > 0.0).all())
        throw InvalidInputError("spectral_decompose: degrees must be positive");

    const Eigen::VectorXd dsqrt = k.degrees.cwiseSqrt();
    const Eigen::VectorXd dinvsqrt = dsqrt.cwiseInverse();
    Eigen::MatrixXd m = dinvsqrt.asDiagonal() * k.k * dsqrt.asDiagonal();
    m = (0.5 * (m + m.transpose())).eval();

    const Eigen::VectorXd u0 = dsqrt / dsqrt.norm();
    m.noalias() -= u0 * u0.transpose();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success)
        throw NumericalError("spectral_decompose: symmetric eigensolver did not converge");
    const Eigen::VectorXd& mu = es.eigenvalues();
    const Eigen::MatrixXd& v = es.eigenvectors();

    // After deflation the only remaining unit eigenvalues are genuine
    // (extra connected components).  All N-1 of them at one means the
    // original spectrum was flat: nothing to embed.
    Eigen::Index flat = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        if (std::abs(mu(j) - 1.0) <= 1e-8) ++flat;
    if (flat == n - 1)
        throw SpectralError("spectral_decompose: all nontrivial eigenvalues equal one "
                            "(kernel has no decay)");

    Eigen::Index trivial = 0;
    double best = -1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double align = std::abs(u0.dot(v.col(j)));
        if (align > best) { best = align; trivial = j; }
    }

    std::vector<Eigen::Index> order;
    order.reserve(static_cast<std::size_t>(n) - 1);
    for (Eigen::Index j = 0; j < n; ++j)
        if (j != trivial) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (std::abs(mu(a)) != std::abs(mu(b))) return std::abs(mu(a)) > std::abs(mu(b));
        if (mu(a) != mu(b)) return mu(a) > mu(b);
        return a < b;
    });

    SpectralPairs out;
    out.eigenvalues.resize(d);
    out.left_vectors.resize(n, d);
    for (int t = 0; t < d; ++t) {
        const Eigen::Index j = order[static_cast<std::size_t>(t)];
        Eigen::VectorXd w = v.col(j);
        w -= u0 * u0.dot(w);  // polish orthogonality to the trivial direction
        Eigen::VectorXd phi = dinvsqrt.asDiagonal() * w;
        const double norm = phi.norm();
        if (!(norm > 0.0))
            throw NumericalError("spectral_decompose: eigenvector collapsed");
        phi /= norm;
        fix_sign(phi);
        out.eigenvalues(t) = mu(j);
        out.left_vectors.col(t) = phi;
    }
    return out;
}

/// Route for kernels without degrees (products of kernels): a dense
/// general eigensolver on K'.  The spectrum may be complex; a complex
/// pair inside the requested range is an error because its coordinates
/// have no real embedding.
inline SpectralPairs decompose_general(const StochasticMatrix& k, int d) {
    const Eigen::Index n = k.k.rows();
    Eigen::EigenSolver<Eigen::MatrixXd> es(k.k.transpose());
    if (es.info() != Eigen::Success)
        throw NumericalError("spectral_decompose: general eigensolver did not converge");
    const Eigen::VectorXcd vals = es.eigenvalues();
    const Eigen::MatrixXcd vecs = es.eigenvectors();

    Eigen::Index flat = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        if (std::abs(vals(j) - std::complex<double>(1.0, 0.0)) <= 1e-8) ++flat;
    if (flat == n)
        throw SpectralError("spectral_decompose: all eigenvalues equal one "
                            "(kernel has no decay)");

    // Columns sum to one, so eigenvalue 1 with constant left eigenvector
    // exists; identify it by alignment among near-unit eigenvalues.
    const Eigen::VectorXcd ones =
        Eigen::VectorXcd::Constant(n, std::complex<double>(1.0 / std::sqrt(double(n)), 0.0));
    Eigen::Index trivial = -1;
    double best = -1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (std::abs(vals(j) - std::complex<double>(1.0, 0.0)) > 1e-6) continue;
        const double align = std::abs((vecs.col(j).adjoint() * ones)(0));
        if (align > best) { best = align; trivial = j; }
    }
    if (trivial < 0)
        throw NumericalError("spectral_decompose: unit eigenvalue not found");

    std::vector<Eigen::Index> order;
    order.reserve(static_cast<std::size_t>(n) - 1);
    for (Eigen::Index j = 0; j < n; ++j)
        if (j != trivial) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (std::abs(vals(a)) != std::abs(vals(b))) return std::abs(vals(a)) > std::abs(vals(b));
        if (vals(a).real() != vals(b).real()) return vals(a).real() > vals(b).real();
        return a < b;
    });

    SpectralPairs out;
    out.eigenvalues.resize(d);
    out.left_vectors.resize(n, d);
    for (int t = 0; t < d; ++t) {
        const Eigen::Index j = order[static_cast<std::size_t>(t)];
        if (std::abs(vals(j).imag()) > 1e-8 ||
            vecs.col(j).imag().cwiseAbs().maxCoeff() > 1e-8)
            throw SpectralError("spectral_decompose: eigenpair " + std::to_string(t) +
                                " is complex; embed column distances of the product "
                                "kernel instead");
        Eigen::VectorXd phi = vecs.col(j).real();
        const double norm = phi.norm();
        if (!(norm > 0.0))
            throw NumericalError("spectral_decompose: eigenvector collapsed");
        phi /= norm;
        fix_sign(phi);
        out.eigenvalues(t) = vals(j).real();
        out.left_vectors.col(t) = phi;
    }
    return out;
}

}  // namespace detail

/// Top d nontrivial left eigenpairs of a column-stochastic kernel,
/// sorted by descending |eigenvalue|.  Eigenvectors have unit norm and
/// a deterministic sign (largest-magnitude entry positive); the trivial
/// pair (eigenvalue 1, constant vector) is excluded.
inline SpectralPairs spectral_decompose(const StochasticMatrix& k, int d) {
    detail::require_stochastic(k, "spectral_decompose");
    const Eigen::Index n = k.k.rows();
    if (d < 1 || d > n - 1)
        throw ParameterError("spectral_decompose: d must be in [1, N-1], got " +
                             std::to_string(d));
    return k.has_symmetric_form() ? detail::decompose_symmetric(k, d)
                                  : detail::decompose_general(k, d);
}

/// Diffusion coordinates at time m: column j is eigvals[j]^m * phi_j.
inline Embedding diffusion_map(const StochasticMatrix& k, int d, int m = 1) {
    if (m < 1)
        throw ParameterError("diffusion_map: power must be >= 1, got " + std::to_string(m));
    const SpectralPairs sp = spectral_decompose(k, d);
    Embedding e;
    e.power = m;
    e.eigvals = sp.eigenvalues;
    e.coords = sp.left_vectors;
    for (int j = 0; j < d; ++j)
        e.coords.col(j) *= std::pow(sp.eigenvalues(j), m);
    return e;
}

/// Euclidean distances between the columns of K^m, via the Gram matrix
/// of the powered kernel.  Exactly symmetric with a zero diagonal.
inline Eigen::MatrixXd column_distances(const StochasticMatrix& k, int m = 1) {
    detail::require_stochastic(k, "column_distances");
    if (m < 1)
        throw ParameterError("column_distances: power must be >= 1, got " +
                             std::to_string(m));
    const Eigen::Index n = k.k.rows();

    Eigen::MatrixXd a = k.k;
    for (int t = 1; t < m; ++t) a = (k.k * a).eval();
    const Eigen::MatrixXd g = a.transpose() * a;

    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double q = g(i, i) + g(j, j) - 2.0 * g(i, j);
            const double dist = std::sqrt(std::max(q, 0.0));
            out(i, j) = dist;
            out(j, i) = dist;
        }
    }
    return out;
}

}  // namespace latentfuse
