#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "latentfuse/errors.hpp"
#include "latentfuse/rng.hpp"
#include "latentfuse/synthetic.hpp"
#include "latentfuse/types.hpp"

namespace latentfuse {

/// Observation-map family used by the theorem oracles.
enum class GKind { linear, torus };

/// An observation map with its exact analytic Jacobian w.r.t. the
/// sensor-specific variable.
struct JacobianOracle {
    int d_obs = 0, d_x = 0, d_y = 0;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> g;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> jac_y;
};

/// Per-trial, per-radius oracle errors.
///
/// `errors` holds the criterion metric (theorem 1: relative Frobenius
/// error of the covariance identity; theorem 2: worst one-sided relative
/// Mahalanobis error).  `sym_errors` (theorem 2 only) holds the worst
/// absolute error of the symmetrized form.  `slopes` are per-trial
/// log-log fits of the slope-bearing series (theorem 1: `errors`,
/// theorem 2: `sym_errors`) against radius.
struct TheoremReport {
    std::string label;
    std::vector<double> radii;
    Eigen::MatrixXd errors;      ///< trials x radii
    Eigen::MatrixXd sym_errors;  ///< trials x radii, theorem 2 only (else 0 x 0)
    Eigen::VectorXd slopes;      ///< per trial; empty when fewer than 2 radii
    double max_error = 0.0;      ///< max of `errors`
    double mean_slope = 0.0;     ///< mean of `slopes`, 0 when empty
};

namespace detail {

/// Fresh oracle map.  The linear family redraws its mixing matrices per
/// seed with a conditioning floor so that floating-point error cannot
/// masquerade as theorem error; the torus family is the same torus-of-
/// revolution map the synthetic experiment observes through, whose
/// Jacobian has constant norm 2*pi*r.
inline JacobianOracle make_oracle(GKind kind, std::uint64_t seed) {
    JacobianOracle o;
    if (kind == GKind::linear) {
        o.d_obs = 5;
        o.d_x = 1;
        o.d_y = 2;
        CounterRng rng(seed);
        Eigen::MatrixXd a(o.d_obs, o.d_x), b(o.d_obs, o.d_y);
        for (std::uint64_t attempt = 0;; ++attempt) {
            const CounterRng draw = rng.substream(attempt);
            std::uint64_t c = 0;
            for (int i = 0; i < o.d_obs; ++i)
                for (int j = 0; j < o.d_x; ++j) a(i, j) = draw.normal(c++);
            for (int i = 0; i < o.d_obs; ++i)
                for (int j = 0; j < o.d_y; ++j) b(i, j) = draw.normal(c++);
            const double smin =
                Eigen::JacobiSVD<Eigen::MatrixXd>(b).singularValues().minCoeff();
            if (smin > 0.3) break;
        }
        o.g = [a, b](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
            return Eigen::VectorXd(a * x + b * y);
        };
        o.jac_y = [b](const Eigen::VectorXd&, const Eigen::VectorXd&) { return b; };
        return o;
    }
    o.d_obs = 3;
    o.d_x = 1;
    o.d_y = 1;
    const double R = 10.0, r = 4.0;
    o.g = [R, r](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        return Eigen::VectorXd(torus_observe(x(0), y(0), R, r));
    };
    o.jac_y = [r](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
        const double cx = std::cos(2.0 * std::numbers::pi * x(0));
        const double sx = std::sin(2.0 * std::numbers::pi * x(0));
        const double cv = std::cos(2.0 * std::numbers::pi * y(0));
        const double sv = std::sin(2.0 * std::numbers::pi * y(0));
        Eigen::MatrixXd j(3, 1);
        j << -2.0 * std::numbers::pi * r * sv * cx,
             -2.0 * std::numbers::pi * r * sv * sx,
              2.0 * std::numbers::pi * r * cv;
        return j;
    };
    return o;
}

/// q unit-scale directions with sum of outer products exactly the
/// identity, so that offsets h*u_k satisfy the isotropy assumption at
/// scale h^2.  The same directions are reused across radii.
inline Eigen::MatrixXd whitened_directions(int q, int d_y, const CounterRng& rng) {
    Eigen::MatrixXd u(q, d_y);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < d_y; ++j)
            u(i, j) = rng.normal(static_cast<std::uint64_t>(i) * d_y + j);
    const Eigen::MatrixXd gram = u.transpose() * u;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw NumericalError("whitened_directions: degenerate direction draw");
    const Eigen::MatrixXd inv_sqrt = es.operatorInverseSqrt();
    return u * inv_sqrt;
}

/// Rank-r pseudo-inverse by eigendecomposition; the oracles' own route,
/// independent of the library's truncated_pinv.
inline Eigen::MatrixXd rank_pinv(const Eigen::MatrixXd& g, int r) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    const Eigen::VectorXd& lam = es.eigenvalues();
    const Eigen::MatrixXd& v = es.eigenvectors();
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(g.rows(), g.cols());
    for (int t = 0; t < r; ++t) {
        const Eigen::Index j = g.rows() - 1 - t;
        if (!(lam(j) > 0.0))
            throw NumericalError("rank_pinv: requested rank exceeds positive spectrum");
        p.noalias() += (1.0 / lam(j)) * v.col(j) * v.col(j).transpose();
    }
    return p;
}

/// Common-variable offset obeying the second-order coupling
/// |dx| = |dy|^2: the common variable may drift only at the order the
/// theorems' remainder terms absorb.
inline Eigen::VectorXd coupled_dx(int d_x, const Eigen::VectorXd& dy, GKind kind) {
    if (kind == GKind::linear) return Eigen::VectorXd::Zero(d_x);
    return Eigen::VectorXd::Constant(d_x, dy.squaredNorm() / std::sqrt(double(d_x)));
}

inline void require_oracle_args(const std::vector<double>& radii, int trials,
                                const char* who) {
    if (trials < 1)
        throw ParameterError(std::string(who) + ": trials must be >= 1");
    if (radii.empty())
        throw ParameterError(std::string(who) + ": at least one radius required");
    for (double h : radii)
        if (!(h > 0.0))
            throw ParameterError(std::string(who) + ": radii must be positive");
}

inline double loglog_slope(const std::vector<double>& h, const Eigen::VectorXd& e) {
    const int n = static_cast<int>(h.size());
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += std::log(h[static_cast<std::size_t>(i)]);
        my += std::log(std::max(e(i), 1e-300));
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = std::log(h[static_cast<std::size_t>(i)]) - mx;
        sxy += dx * (std::log(std::max(e(i), 1e-300)) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

}  // namespace detail

/// Numerical check of the covariance identity: with whitened offsets
/// h*u_k around a random base point, the sum of observation outer
/// products must match h^2 * J J' up to the cubic remainder.  Reports
/// |sum - h^2 J J'|_F / |J J'|_F per trial and radius.
inline TheoremReport check_theorem1(GKind kind, const std::vector<double>& radii, int trials,
                                    std::uint64_t seed = 7) {
    detail::require_oracle_args(radii, trials, "check_theorem1");
    const int q = 40;
    const int nr = static_cast<int>(radii.size());

    TheoremReport rep;
    rep.label = std::string("theorem1/") + (kind == GKind::linear ? "linear" : "torus");
    rep.radii = radii;
    rep.errors.resize(trials, nr);

    CounterRng root(seed);
    for (int t = 0; t < trials; ++t) {
        const CounterRng trial = root.substream(static_cast<std::uint64_t>(t));
        const JacobianOracle o = detail::make_oracle(kind, trial.bits(0));
        Eigen::VectorXd x0(o.d_x), y0(o.d_y);
        for (int j = 0; j < o.d_x; ++j) x0(j) = trial.uniform(100 + static_cast<std::uint64_t>(j));
        for (int j = 0; j < o.d_y; ++j) y0(j) = trial.uniform(200 + static_cast<std::uint64_t>(j));
        const Eigen::MatrixXd u =
            detail::whitened_directions(q, o.d_y, trial.substream(1));

        const Eigen::MatrixXd jac = o.jac_y(x0, y0);
        const Eigen::MatrixXd gram = jac * jac.transpose();
        const Eigen::VectorXd s0 = o.g(x0, y0);

        for (int ri = 0; ri < nr; ++ri) {
            const double h = radii[static_cast<std::size_t>(ri)];
            Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(o.d_obs, o.d_obs);
            for (int k = 0; k < q; ++k) {
                const Eigen::VectorXd dy = h * u.row(k).transpose();
                const Eigen::VectorXd dx = detail::coupled_dx(o.d_x, dy, kind);
                const Eigen::VectorXd ds = o.g(x0 + dx, y0 + dy) - s0;
                acc.noalias() += ds * ds.transpose();
            }
            rep.errors(t, ri) = (acc - h * h * gram).norm() / gram.norm();
        }
    }

    rep.max_error = rep.errors.maxCoeff();
    if (nr >= 2) {
        rep.slopes.resize(trials);
        for (int t = 0; t < trials; ++t)
            rep.slopes(t) = detail::loglog_slope(radii, rep.errors.row(t).transpose());
        rep.mean_slope = rep.slopes.mean();
    }
    return rep;
}

/// Numerical check of the modified Mahalanobis identity: with the exact
/// rank-d_y pseudo-inverse Q = (J J')^+, the form ds' Q ds must return
/// |dy|^2.  Reports the worst one-sided relative error per trial and
/// radius in `errors`, and the worst absolute error of the symmetrized
/// (two-point averaged) form in `sym_errors`, whose decay order carries
/// the slope criterion.
inline TheoremReport check_theorem2(GKind kind, const std::vector<double>& radii, int trials,
                                    std::uint64_t seed = 7) {
    detail::require_oracle_args(radii, trials, "check_theorem2");
    const int q = 40;
    const int nr = static_cast<int>(radii.size());

    TheoremReport rep;
    rep.label = std::string("theorem2/") + (kind == GKind::linear ? "linear" : "torus");
    rep.radii = radii;
    rep.errors.resize(trials, nr);
    rep.sym_errors.resize(trials, nr);

    CounterRng root(seed ^ 0x5DEECE66DULL);
    for (int t = 0; t < trials; ++t) {
        const CounterRng trial = root.substream(static_cast<std::uint64_t>(t));
        const JacobianOracle o = detail::make_oracle(kind, trial.bits(0));
        Eigen::VectorXd x0(o.d_x), y0(o.d_y);
        for (int j = 0; j < o.d_x; ++j) x0(j) = trial.uniform(100 + static_cast<std::uint64_t>(j));
        for (int j = 0; j < o.d_y; ++j) y0(j) = trial.uniform(200 + static_cast<std::uint64_t>(j));
        const Eigen::MatrixXd u =
            detail::whitened_directions(q, o.d_y, trial.substream(1));

        const Eigen::MatrixXd jac0 = o.jac_y(x0, y0);
        const Eigen::MatrixXd q0 = detail::rank_pinv(jac0 * jac0.transpose(), o.d_y);
        const Eigen::VectorXd s0 = o.g(x0, y0);

        for (int ri = 0; ri < nr; ++ri) {
            const double h = radii[static_cast<std::size_t>(ri)];
            double worst_rel = 0.0, worst_sym = 0.0;
            for (int k = 0; k < q; ++k) {
                const Eigen::VectorXd dy = h * u.row(k).transpose();
                const Eigen::VectorXd dx = detail::coupled_dx(o.d_x, dy, kind);
                const Eigen::VectorXd ds = o.g(x0 + dx, y0 + dy) - s0;
                const double truth = dy.squaredNorm();

                const double one_sided = ds.dot(q0 * ds);
                worst_rel = std::max(worst_rel, std::abs(one_sided - truth) / truth);

                const Eigen::MatrixXd jac1 = o.jac_y(x0 + dx, y0 + dy);
                const Eigen::MatrixXd q1 = detail::rank_pinv(jac1 * jac1.transpose(), o.d_y);
                const double symmetrized = 0.5 * (one_sided + ds.dot(q1 * ds));
                worst_sym = std::max(worst_sym, std::abs(symmetrized - truth));
            }
            rep.errors(t, ri) = worst_rel;
            rep.sym_errors(t, ri) = worst_sym;
        }
    }

    rep.max_error = rep.errors.maxCoeff();
    if (nr >= 2) {
        rep.slopes.resize(trials);
        for (int t = 0; t < trials; ++t)
            rep.slopes(t) = detail::loglog_slope(radii, rep.sym_errors.row(t).transpose());
        rep.mean_slope = rep.slopes.mean();
    }
    return rep;
}

/// Canonical plain-text rendering of a report (stable across runs).
inline std::string format_report(const TheoremReport& rep) {
    char buf[64];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::string out = rep.label + "\nradii";
    for (double h : rep.radii) out += " " + num(h);
    out += "\n";
    for (Eigen::Index t = 0; t < rep.errors.rows(); ++t) {
        out += "trial " + std::to_string(t) + " errors";
        for (Eigen::Index r = 0; r < rep.errors.cols(); ++r)
            out += " " + num(rep.errors(t, r));
        if (rep.sym_errors.size() > 0) {
            out += " sym";
            for (Eigen::Index r = 0; r < rep.sym_errors.cols(); ++r)
                out += " " + num(rep.sym_errors(t, r));
        }
        if (rep.slopes.size() > 0) out += " slope " + num(rep.slopes(t));
        out += "\n";
    }
    out += "max_error " + num(rep.max_error) + "\n";
    if (rep.slopes.size() > 0) out += "mean_slope " + num(rep.mean_slope) + "\n";
    return out;
}

/// Absolute circular correlation between two angle vectors (Fisher-Lee
/// T-linear association), invariant to constant rotation of either
/// input and to reflection.  Built on pairwise angle differences, so it
/// stays well defined for uniformly distributed angles, where any
/// mean-direction-referenced statistic degenerates.  Evaluated via the
/// exact O(n) expansion of
///   sum_{i,j} sin(a_i - a_j) sin(b_i - b_j)
///     / sqrt(sum_{i,j} sin^2(a_i - a_j) * sum_{i,j} sin^2(b_i - b_j)).
/// Returns 0 when either input has no angular spread.
inline double circular_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size())
        throw InvalidInputError("circular_correlation: length mismatch");
    if (a.size() < 1)
        throw InvalidInputError("circular_correlation: empty input");

    const Eigen::ArrayXd ca = a.array().cos(), sa = a.array().sin();
    const Eigen::ArrayXd cb = b.array().cos(), sb = b.array().sin();
    const double num = 2.0 * ((ca * cb).sum() * (sa * sb).sum() -
                              (sa * cb).sum() * (ca * sb).sum());
    // sum_{i,j} sin^2(v_i - v_j) = (n^2 - |sum_i e^{2 i v}|^2) / 2.
    const double n = static_cast<double>(a.size());
    const auto spread = [n](const Eigen::ArrayXd& c, const Eigen::ArrayXd& s) {
        const double c2 = (c * c - s * s).sum();
        const double s2 = (2.0 * c * s).sum();
        return (n * n - (c2 * c2 + s2 * s2)) / 2.0;
    };
    // A spread of exact zero (constant angles) cancels to rounding noise
    // of order n^2 * eps, so the degeneracy cutoff is relative to n^2.
    const double tiny = n * n * 1e-12;
    const double sa2 = spread(ca, sa), sb2 = spread(cb, sb);
    if (sa2 <= tiny || sb2 <= tiny) return 0.0;  // no angular spread
    return std::clamp(std::abs(num / std::sqrt(sa2 * sb2)), 0.0, 1.0);
}

/// Dominant nonzero frequency of a real signal.
struct DftPeak {
    int bin = 0;          ///< index into the one-sided spectrum, 1-based
    double frequency = 0; ///< bin / (L * sample_period)
    double magnitude = 0; ///< unnormalized |X_bin|
};

/// Naive one-sided DFT scan over bins 1..L/2.  Magnitudes within one
/// part in 1e9 count as tied and resolve to the lower bin, making the
/// tie-break stable under floating-point jitter.
inline DftPeak dft_peak(const Eigen::VectorXd& x, double sample_period) {
    const Eigen::Index n = x.size();
    if (n < 4)
        throw ParameterError("dft_peak: need at least 4 samples");
    if (!(sample_period > 0.0))
        throw ParameterError("dft_peak: sample period must be positive");
    if (!x.allFinite())
        throw InvalidInputError("dft_peak: signal has non-finite entries");
    if (x.maxCoeff() == x.minCoeff())
        throw InvalidInputError("dft_peak: constant signal has no spectral peak");

    DftPeak best;
    for (int k = 1; k <= static_cast<int>(n / 2); ++k) {
        double re = 0.0, im = 0.0;
        const double w = 2.0 * std::numbers::pi * k / static_cast<double>(n);
        for (Eigen::Index t = 0; t < n; ++t) {
            re += x(t) * std::cos(w * static_cast<double>(t));
            im -= x(t) * std::sin(w * static_cast<double>(t));
        }
        const double mag = std::hypot(re, im);
        if (mag > best.magnitude * (1.0 + 1e-9)) {
            best.bin = k;
            best.magnitude = mag;
        }
    }
    best.frequency = best.bin / (static_cast<double>(n) * sample_period);
    return best;
}

}  // namespace latentfuse
