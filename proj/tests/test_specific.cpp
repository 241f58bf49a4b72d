#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "helpers.hpp"
#include "latentfuse/rng.hpp"
#include "latentfuse/specific.hpp"

using namespace latentfuse;
using testhelpers::random_matrix;
using testhelpers::random_samples;

namespace {

Embedding as_embedding(const Eigen::MatrixXd& coords) {
    Embedding e;
    e.coords = coords;
    e.eigvals = Eigen::VectorXd::Ones(coords.cols());
    e.power = 1;
    return e;
}

// Reference: full sort of (distance, index) pairs, self has distance 0.
std::vector<int> sorted_neighbors(const Eigen::MatrixXd& coords, int i, int q) {
    const int n = static_cast<int>(coords.rows());
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        const double da = (coords.row(a) - coords.row(i)).squaredNorm();
        const double db = (coords.row(b) - coords.row(i)).squaredNorm();
        if (da != db) return da < db;
        return a < b;
    });
    return {idx.begin(), idx.begin() + q};
}

// Reference pseudo-inverse with its own truncation logic.
Eigen::MatrixXd reference_pinv(const Eigen::MatrixXd& cov, double tau) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd lam = es.eigenvalues();
    const Eigen::MatrixXd v = es.eigenvectors();
    const double cut = tau * lam.maxCoeff();
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(cov.rows(), cov.cols());
    for (Eigen::Index j = 0; j < lam.size(); ++j)
        if (lam(j) >= cut && lam(j) > 0.0)
            p += (1.0 / lam(j)) * v.col(j) * v.col(j).transpose();
    return p;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::VectorXd ca = a.array() - a.mean();
    const Eigen::VectorXd cb = b.array() - b.mean();
    return ca.dot(cb) / (ca.norm() * cb.norm());
}

}  // namespace

TEST_CASE("neighborhoods of size one are just the sample itself") {
    const Embedding e = as_embedding(random_matrix(12, 2, 55));
    const NeighborhoodIndex nb = neighborhoods(e, 1);
    REQUIRE(nb.q == 1);
    for (int i = 0; i < 12; ++i) {
        REQUIRE(nb.neighbors[static_cast<std::size_t>(i)].size() == 1);
        REQUIRE(nb.neighbors[static_cast<std::size_t>(i)][0] == i);
    }
}

TEST_CASE("neighborhoods match a full-sort reference") {
    const Embedding e = as_embedding(random_matrix(40, 3, 66));
    for (int q : {1, 5, 17, 40}) {
        const NeighborhoodIndex nb = neighborhoods(e, q);
        for (int i = 0; i < 40; ++i) {
            const auto ref = sorted_neighbors(e.coords, i, q);
            REQUIRE(nb.neighbors[static_cast<std::size_t>(i)] == ref);
            REQUIRE(nb.neighbors[static_cast<std::size_t>(i)][0] == i);
        }
    }
}

TEST_CASE("neighborhood distance ties break toward the lower index") {
    Eigen::MatrixXd coords(4, 1);
    coords << 0.0, 1.0, 1.0, 3.0;  // rows 1 and 2 coincide
    const NeighborhoodIndex nb = neighborhoods(as_embedding(coords), 2);
    REQUIRE(nb.neighbors[0] == std::vector<int>{0, 1});  // 1 and 2 tie at distance 1
    REQUIRE(nb.neighbors[1] == std::vector<int>{1, 2});
    REQUIRE(nb.neighbors[2] == std::vector<int>{2, 1});  // self first even when duplicated
    REQUIRE(nb.neighbors[3] == std::vector<int>{3, 1});
}

TEST_CASE("neighborhoods validate q") {
    const Embedding e = as_embedding(random_matrix(10, 2, 3));
    REQUIRE_THROWS_AS(neighborhoods(e, 0), ParameterError);
    REQUIRE_THROWS_AS(neighborhoods(e, 11), ParameterError);
}

TEST_CASE("local statistics: hand-checked mean and covariance") {
    SampleSet s;
    s.data.resize(2, 2);
    s.data << 0.0, 0.0,
              2.0, 0.0;
    NeighborhoodIndex nb;
    nb.q = 2;
    nb.neighbors = {{0, 1}, {1, 0}};
    const auto g = local_stats(s, nb);

    for (int i = 0; i < 2; ++i) {
        REQUIRE(g[static_cast<std::size_t>(i)].mean(0) == 1.0);
        REQUIRE(g[static_cast<std::size_t>(i)].mean(1) == 0.0);
        REQUIRE(g[static_cast<std::size_t>(i)].cov(0, 0) == 1.0);
        REQUIRE(g[static_cast<std::size_t>(i)].cov(0, 1) == 0.0);
        REQUIRE(g[static_cast<std::size_t>(i)].cov(1, 1) == 0.0);
        REQUIRE(g[static_cast<std::size_t>(i)].rank == 1);  // flat direction dropped
    }
}

TEST_CASE("local statistics match a direct loop with the 1/q factor") {
    const SampleSet s = random_samples(30, 4, 77);
    const Embedding e = as_embedding(random_matrix(30, 2, 78));
    const int q = 7;
    const NeighborhoodIndex nb = neighborhoods(e, q);
    const auto g = local_stats(s, nb);

    for (int i = 0; i < 30; ++i) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
        for (int j : nb.neighbors[static_cast<std::size_t>(i)]) mean += s.data.row(j).transpose();
        mean /= q;
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(4, 4);
        for (int j : nb.neighbors[static_cast<std::size_t>(i)]) {
            const Eigen::VectorXd c = s.data.row(j).transpose() - mean;
            cov += c * c.transpose();
        }
        cov /= q;
        REQUIRE((g[static_cast<std::size_t>(i)].mean - mean).cwiseAbs().maxCoeff() <= 1e-13);
        REQUIRE((g[static_cast<std::size_t>(i)].cov - cov).cwiseAbs().maxCoeff() <= 1e-13);
        REQUIRE((g[static_cast<std::size_t>(i)].cov - g[static_cast<std::size_t>(i)].cov.transpose())
                    .cwiseAbs()
                    .maxCoeff() == 0.0);
    }
}

TEST_CASE("local statistics validate the neighborhood index") {
    const SampleSet s = random_samples(5, 2, 8);
    NeighborhoodIndex bad;
    bad.q = 1;
    bad.neighbors = {{0}, {1}, {2}, {3}};  // one list short
    REQUIRE_THROWS_AS(local_stats(s, bad), InvalidInputError);
    bad.neighbors = {{0}, {1}, {2}, {3}, {7}};  // out of range
    REQUIRE_THROWS_AS(local_stats(s, bad), InvalidInputError);
}

TEST_CASE("truncated pseudo-inverse inverts a full-rank covariance") {
    Eigen::MatrixXd a = random_matrix(6, 4, 91);
    // Shift keeps the condition number well below 1/tau.
    Eigen::MatrixXd cov = (a.transpose() * a) / 6.0 + Eigen::MatrixXd::Identity(4, 4);
    cov = (0.5 * (cov + cov.transpose())).eval();

    const TruncatedPinv tp = truncated_pinv(cov, RankPolicy{});
    REQUIRE(tp.rank == 4);
    REQUIRE((tp.pinv - cov.inverse()).cwiseAbs().maxCoeff() <= 1e-9);
    REQUIRE((tp.whitener.transpose() * tp.whitener - tp.pinv).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("truncated pseudo-inverse drops the weak spectrum") {
    // Orthogonal basis with a controlled spectrum.
    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(3, 3, 92)).householderQ();
    Eigen::VectorXd lam(3);
    lam << 10.0, 0.5, 1e-8;
    Eigen::MatrixXd cov = q * lam.asDiagonal() * q.transpose();
    cov = (0.5 * (cov + cov.transpose())).eval();

    RankPolicy rel;  // tau = 1e-2 keeps 10 and 0.5 only
    const TruncatedPinv tp = truncated_pinv(cov, rel);
    REQUIRE(tp.rank == 2);
    REQUIRE(tp.whitener.rows() == 2);
    REQUIRE((tp.pinv - reference_pinv(cov, rel.tau)).cwiseAbs().maxCoeff() <= 1e-9);
    // Penrose identity P C P = P survives truncation.
    REQUIRE((tp.pinv * cov * tp.pinv - tp.pinv).cwiseAbs().maxCoeff() <= 1e-6);

    RankPolicy one;
    one.fixed_rank = 1;
    REQUIRE(truncated_pinv(cov, one).rank == 1);

    RankPolicy all;
    all.fixed_rank = 3;
    REQUIRE(truncated_pinv(cov, all).rank == 3);

    RankPolicy over;
    over.fixed_rank = 4;
    REQUIRE_THROWS_AS(truncated_pinv(cov, over), ParameterError);
}

TEST_CASE("truncated pseudo-inverse of a zero covariance is zero") {
    const Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(3, 3);
    const TruncatedPinv tp = truncated_pinv(cov, RankPolicy{});
    REQUIRE(tp.rank == 0);
    REQUIRE(tp.pinv.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(tp.whitener.rows() == 0);

    RankPolicy forced;
    forced.fixed_rank = 1;
    REQUIRE_THROWS_AS(truncated_pinv(cov, forced), NumericalError);
}

TEST_CASE("truncated pseudo-inverse rejects malformed input") {
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.2,
            0.0, 1.0;
    REQUIRE_THROWS_AS(truncated_pinv(asym, RankPolicy{}), InvalidInputError);
    RankPolicy bad;
    bad.tau = -0.5;
    REQUIRE_THROWS_AS(truncated_pinv(Eigen::MatrixXd::Identity(2, 2), bad), ParameterError);
}

TEST_CASE("modified Mahalanobis affinity: two-sample hand case") {
    SampleSet s;
    s.data.resize(2, 1);
    s.data << 0.0, 1.0;
    NeighborhoodIndex nb;
    nb.q = 2;
    nb.neighbors = {{0, 1}, {1, 0}};
    const auto g = local_stats(s, nb);
    // Both covariances are [[1/4]], pinv [[4]], delta = -1, so the
    // quadratic form is 8; the adaptive scale over one neighbor is also
    // 8, leaving exp(-1).
    PipelineParams p;
    p.scale_k = 1;
    const AffinityMatrix w = mahalanobis_affinity(s, g, p);
    REQUIRE(w.w(0, 1) == Catch::Approx(std::exp(-1.0)).epsilon(1e-14));
    REQUIRE(w.w(0, 0) == 1.0);
    REQUIRE(w.w(1, 1) == 1.0);
}

TEST_CASE("modified Mahalanobis affinity matches an explicit quadratic form") {
    const SampleSet s = random_samples(25, 3, 313);
    const Embedding e = as_embedding(random_matrix(25, 2, 314));
    const NeighborhoodIndex nb = neighborhoods(e, 8);
    const auto g = local_stats(s, nb);
    PipelineParams p;
    p.scale_k = 6;
    const AffinityMatrix w = mahalanobis_affinity(s, g, p);

    REQUIRE((w.w - w.w.transpose()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((w.w.diagonal().array() == 1.0).all());

    // Reference route: explicit pseudo-inverses and quadratic forms,
    // then the same adaptive bandwidth rule applied by hand.
    Eigen::MatrixXd qf = Eigen::MatrixXd::Zero(25, 25);
    for (int i = 0; i < 25; ++i)
        for (int j = 0; j < 25; ++j) {
            const Eigen::VectorXd di =
                (s.data.row(i).transpose() - g[static_cast<std::size_t>(i)].mean) -
                (s.data.row(j).transpose() - g[static_cast<std::size_t>(j)].mean);
            const Eigen::MatrixXd pij = reference_pinv(g[static_cast<std::size_t>(i)].cov, 1e-2) +
                                        reference_pinv(g[static_cast<std::size_t>(j)].cov, 1e-2);
            qf(i, j) = di.dot(pij * di);
        }
    Eigen::VectorXd eps(25);
    for (int i = 0; i < 25; ++i) {
        std::vector<double> row;
        for (int j = 0; j < 25; ++j)
            if (j != i) row.push_back(qf(i, j));
        std::sort(row.begin(), row.end());
        eps(i) = std::accumulate(row.begin(), row.begin() + p.scale_k, 0.0) / p.scale_k;
    }
    for (int i = 0; i < 25; ++i)
        for (int j = 0; j < 25; ++j) {
            const double expect = std::exp(-qf(i, j) / std::sqrt(eps(i) * eps(j)));
            REQUIRE(w.w(i, j) == Catch::Approx(expect).margin(1e-10));
        }
}

TEST_CASE("raw-offset Mahalanobis affinity: three-sample hand case") {
    SampleSet s;
    s.data.resize(3, 1);
    s.data << 0.0, 1.0, 3.0;
    NeighborhoodIndex nb;
    nb.q = 2;
    nb.neighbors = {{0, 1}, {1, 0}, {2, 1}};
    const auto g = local_stats(s, nb);
    // Means 0.5, 0.5, 2 and covariances 1/4, 1/4, 1, so pinv sums are
    // 8, 5, 5 for the pairs (0,1), (0,2), (1,2).  Raw deltas -1, -3, -2
    // give Q = 8, 45, 20; the one-neighbor scales are 8, 8, 20.
    PipelineParams p;
    p.scale_k = 1;
    const AffinityMatrix raw = mahalanobis_affinity(s, g, p, false);
    REQUIRE(raw.w(0, 1) == Catch::Approx(std::exp(-1.0)).epsilon(1e-14));
    REQUIRE(raw.w(0, 2) ==
            Catch::Approx(std::exp(-45.0 / std::sqrt(160.0))).epsilon(1e-14));
    REQUIRE(raw.w(1, 2) ==
            Catch::Approx(std::exp(-20.0 / std::sqrt(160.0))).epsilon(1e-14));

    // Centering shifts sample 2 by its different neighborhood mean:
    // the centered pair (1,2) has Q = 1.25 and scales 1.25, 1.25,
    // leaving exp(-1) where the raw kernel has exp(-20/sqrt(160)).
    const AffinityMatrix ctr = mahalanobis_affinity(s, g, p, true);
    REQUIRE(ctr.w(1, 2) == Catch::Approx(std::exp(-1.0)).epsilon(1e-14));
    REQUIRE(raw.w(1, 2) != ctr.w(1, 2));
}

TEST_CASE("raw-offset Mahalanobis affinity matches an explicit quadratic form") {
    const SampleSet s = random_samples(25, 3, 414);
    const Embedding e = as_embedding(random_matrix(25, 2, 415));
    const NeighborhoodIndex nb = neighborhoods(e, 8);
    const auto g = local_stats(s, nb);
    PipelineParams p;
    p.scale_k = 6;
    const AffinityMatrix w = mahalanobis_affinity(s, g, p, false);

    REQUIRE((w.w - w.w.transpose()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((w.w.diagonal().array() == 1.0).all());

    Eigen::MatrixXd qf = Eigen::MatrixXd::Zero(25, 25);
    for (int i = 0; i < 25; ++i)
        for (int j = 0; j < 25; ++j) {
            const Eigen::VectorXd di = s.data.row(i).transpose() - s.data.row(j).transpose();
            const Eigen::MatrixXd pij = reference_pinv(g[static_cast<std::size_t>(i)].cov, 1e-2) +
                                        reference_pinv(g[static_cast<std::size_t>(j)].cov, 1e-2);
            qf(i, j) = di.dot(pij * di);
        }
    Eigen::VectorXd eps(25);
    for (int i = 0; i < 25; ++i) {
        std::vector<double> row;
        for (int j = 0; j < 25; ++j)
            if (j != i) row.push_back(qf(i, j));
        std::sort(row.begin(), row.end());
        eps(i) = std::accumulate(row.begin(), row.begin() + p.scale_k, 0.0) / p.scale_k;
    }
    for (int i = 0; i < 25; ++i)
        for (int j = 0; j < 25; ++j) {
            const double expect = std::exp(-qf(i, j) / std::sqrt(eps(i) * eps(j)));
            REQUIRE(w.w(i, j) == Catch::Approx(expect).margin(1e-10));
        }
}

TEST_CASE("modified Mahalanobis affinity requires matching metadata") {
    const SampleSet s = random_samples(10, 2, 11);
    const Embedding e = as_embedding(random_matrix(10, 1, 12));
    const auto g = local_stats(s, neighborhoods(e, 3));

    auto fewer = g;
    fewer.pop_back();
    REQUIRE_THROWS_AS(mahalanobis_affinity(s, fewer, PipelineParams{}), InvalidInputError);
}

TEST_CASE("specific embedding recovers the sensor-private variable") {
    // Sensor observes (x, y); the common embedding is x alone.  The
    // extraction must isolate y and stay uncorrelated with x.
    const int n = 200;
    CounterRng rng(2024);
    Eigen::VectorXd x(n), y(n);
    for (int i = 0; i < n; ++i) {
        x(i) = rng.uniform(2 * static_cast<std::uint64_t>(i));
        y(i) = rng.uniform(2 * static_cast<std::uint64_t>(i) + 1);
    }
    SampleSet s;
    s.data.resize(n, 2);
    s.data.col(0) = x;
    s.data.col(1) = y;
    const Embedding xhat = as_embedding(x);

    SpecificParams sp;
    sp.q = 15;
    PipelineParams p;
    p.dim = 2;
    const Embedding yhat = specific_embedding(s, xhat, sp, p);

    REQUIRE(yhat.coords.rows() == n);
    REQUIRE(yhat.coords.allFinite());
    REQUIRE(std::abs(pearson(yhat.coords.col(0), y)) >= 0.9);
    REQUIRE(std::abs(pearson(yhat.coords.col(0), x)) <= 0.3);

    // Raw offsets must isolate the private variable on flat geometry
    // just as well: centering only removes local drift here.  The rank
    // is pinned so the check isolates the offset convention from
    // borderline truncation decisions on this small sample.
    sp.center_offsets = false;
    sp.rank_policy.fixed_rank = 1;
    const Embedding yraw = specific_embedding(s, xhat, sp, p);
    REQUIRE(std::abs(pearson(yraw.coords.col(0), y)) >= 0.9);
    REQUIRE(std::abs(pearson(yraw.coords.col(0), x)) <= 0.3);
}

TEST_CASE("specific embedding validates alignment") {
    const SampleSet s = random_samples(20, 2, 21);
    const Embedding xhat = as_embedding(random_matrix(19, 1, 22));
    REQUIRE_THROWS_AS(specific_embedding(s, xhat, SpecificParams{}, PipelineParams{}),
                      InvalidInputError);
}
