#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support/synthetic_scenes.hpp"
#include "tgr/rpca.hpp"
#include "tgr/thermal_io.hpp"

using namespace tgr::rpca;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c,
                              std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

double nuclear_norm(const Eigen::MatrixXd& m) { return svd(m).sigma.sum(); }

}  // namespace

TEST_CASE("svd of simple diagonal matrices") {
    CHECK(svd(Eigen::MatrixXd::Identity(3, 3)).sigma.isApprox(
        Eigen::Vector3d(1, 1, 1)));
    Eigen::MatrixXd d = Eigen::Vector3d(3, 2, 1).asDiagonal();
    const SvdResult f = svd(d);
    CHECK(f.sigma.isApprox(Eigen::Vector3d(3, 2, 1)));
    CHECK((f.u * f.sigma.asDiagonal() * f.v.transpose()).isApprox(d, 1e-12));
}

TEST_CASE("svd reconstructs window-shaped matrices to 1e-9 relative") {
    std::mt19937_64 rng(17);
    for (auto [r, c] : {std::pair<int, int>{5, 768}, {768, 5}, {20, 40}, {7, 7}}) {
        const Eigen::MatrixXd m = random_matrix(r, c, rng);
        const SvdResult f = svd(m);
        CHECK((m - f.u * f.sigma.asDiagonal() * f.v.transpose()).norm() <=
              1e-9 * m.norm());
        for (Eigen::Index i = 0; i + 1 < f.sigma.size(); ++i)
            CHECK(f.sigma[i] >= f.sigma[i + 1]);
        CHECK(f.sigma.minCoeff() >= 0.0);
    }
}

TEST_CASE("svd sign convention makes the factorization deterministic") {
    std::mt19937_64 rng(18);
    const Eigen::MatrixXd m = random_matrix(6, 9, rng);
    const SvdResult a = svd(m);
    const SvdResult b = svd(m);
    CHECK(a.u == b.u);
    CHECK(a.v == b.v);
    for (Eigen::Index j = 0; j < a.u.cols(); ++j) {
        Eigen::Index imax = 0;
        a.u.col(j).cwiseAbs().maxCoeff(&imax);
        CHECK(a.u(imax, j) > 0.0);
    }
}

TEST_CASE("svd singular values match a known-spectrum symmetric oracle") {
    std::mt19937_64 rng(19);
    // Build A = Q D Q^T with a known spectrum via QR of a random matrix.
    const int n = 8;
    Eigen::VectorXd eig(n);
    eig << 9.0, 5.5, 3.25, 1.0, 0.5, -0.125, -2.0, -7.5;
    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(n, n, rng))
            .householderQ();
    const Eigen::MatrixXd a = q * eig.asDiagonal() * q.transpose();

    Eigen::VectorXd expected = eig.cwiseAbs();
    std::sort(expected.data(), expected.data() + n, std::greater<>());
    const SvdResult f = svd(a);
    for (int i = 0; i < n; ++i)
        CHECK(f.sigma[i] == Catch::Approx(expected[i]).margin(1e-8));
}

TEST_CASE("shrink soft-thresholds elementwise") {
    CHECK(shrink(0.7, 0.5) == Catch::Approx(0.2));
    CHECK(shrink(-0.3, 0.5) == 0.0);
    CHECK(shrink(1.25, 0.0) == 1.25);
    CHECK(shrink(-0.9, 0.5) == Catch::Approx(-0.4));

    std::mt19937_64 rng(20);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int rep = 0; rep < 500; ++rep) {
        const double x = u(rng), y = u(rng), tau = std::abs(u(rng));
        CHECK(shrink(-x, tau) == Catch::Approx(-shrink(x, tau)).margin(1e-15));
        CHECK(std::abs(shrink(x, tau) - shrink(y, tau)) <=
              std::abs(x - y) + 1e-15);  // non-expansive
    }
}

TEST_CASE("svt soft-thresholds the spectrum") {
    Eigen::MatrixXd d = Eigen::Vector3d(3, 2, 1).asDiagonal();
    const Eigen::MatrixXd t = svt(d, 1.5);
    CHECK(t.isApprox(Eigen::MatrixXd(Eigen::Vector3d(1.5, 0.5, 0).asDiagonal()),
                     1e-12));

    std::mt19937_64 rng(21);
    const Eigen::MatrixXd m = random_matrix(6, 10, rng);
    CHECK((svt(m, 0.0) - m).norm() <= 1e-9 * m.norm());
    CHECK(nuclear_norm(svt(m, 0.7)) <= nuclear_norm(m) + 1e-9);

    // Rank-1 matrix with tau >= sigma_1 collapses to zero.
    const Eigen::MatrixXd r1 =
        Eigen::VectorXd::Ones(4) * Eigen::RowVectorXd::Ones(6);
    CHECK(svt(r1, svd(r1).sigma[0] + 0.1).norm() <= 1e-12);
}

TEST_CASE("pcp trivial and degenerate inputs") {
    const RpcaResult z = pcp(Eigen::MatrixXd::Zero(4, 6));
    CHECK(z.converged);
    CHECK(z.iterations == 1);
    CHECK(z.low_rank.isZero());
    CHECK(z.sparse.isZero());
    CHECK_THROWS_AS(pcp(Eigen::MatrixXd()), std::invalid_argument);
}

TEST_CASE("pcp recovers a rank-1 plus sparse decomposition") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> u11(-1.0, 1.0);

    // Uniform factor entries keep the low-rank part O(1) everywhere, well
    // separated from the magnitude-10 outliers.
    Eigen::VectorXd uu(20), vv(40);
    for (auto* vec : {&uu, &vv})
        for (Eigen::Index i = 0; i < vec->size(); ++i) (*vec)[i] = u11(rng);
    const Eigen::MatrixXd l0 = uu * vv.transpose();
    Eigen::MatrixXd s0 = Eigen::MatrixXd::Zero(20, 40);
    for (Eigen::Index i = 0; i < s0.size(); ++i)
        if (u01(rng) < 0.05) s0.data()[i] = u01(rng) < 0.5 ? 10.0 : -10.0;

    RpcaConfig cfg;
    cfg.lambda = 1.0 / std::sqrt(40.0);
    const RpcaResult res = pcp(l0 + s0, cfg);
    CHECK(res.converged);
    CHECK(res.iterations <= 100);
    CHECK((res.low_rank - l0).norm() <= 1e-4 * l0.norm());
    CHECK((res.sparse - s0).norm() <= 1e-4 * s0.norm());
    CHECK(res.residual <= cfg.tol * (l0 + s0).norm());
}

TEST_CASE("pcp objective beats both trivial feasible decompositions") {
    std::mt19937_64 rng(23);
    const Eigen::MatrixXd m =
        random_matrix(10, 1, rng) * random_matrix(1, 14, rng) +
        0.5 * random_matrix(10, 14, rng).unaryExpr([](double x) {
            return std::abs(x) > 1.8 ? x : 0.0;
        });
    const double lambda = 1.0 / std::sqrt(14.0);
    const RpcaResult full = pcp(m);
    const double obj =
        nuclear_norm(full.low_rank) + lambda * full.sparse.cwiseAbs().sum();
    // (L, S) = (M, 0) and (0, M) are feasible; the solver must do no worse
    // than either (small slack for the not-exactly-feasible final iterate).
    const double slack = 1e-4 * m.norm();
    CHECK(obj <= nuclear_norm(m) + slack);
    CHECK(obj <= lambda * m.cwiseAbs().sum() + slack);
}

TEST_CASE("pcp is scale equivariant") {
    std::mt19937_64 rng(24);
    const Eigen::MatrixXd m =
        random_matrix(8, 1, rng) * random_matrix(1, 12, rng) +
        random_matrix(8, 12, rng).unaryExpr([](double x) {
            return std::abs(x) > 1.9 ? 5 * x : 0.0;
        });
    RpcaConfig cfg;
    cfg.lambda = 1.0 / std::sqrt(12.0);
    const RpcaResult a = pcp(m, cfg);
    const RpcaResult b = pcp(3.0 * m, cfg);
    CHECK((b.low_rank - 3.0 * a.low_rank).norm() <= 1e-4 * (1 + a.low_rank.norm()));
    CHECK((b.sparse - 3.0 * a.sparse).norm() <= 1e-4 * (1 + a.sparse.norm()));
}

TEST_CASE("pcp isolates a moving blob from a static thermal background") {
    std::mt19937_64 rng(25);
    tgsynth::SceneParams p;
    tgr::io::Acquisition acq;
    std::vector<std::optional<tgsynth::BlobPos>> truth;
    for (int t = 0; t < 5; ++t) {
        const tgsynth::BlobPos pos{8.0 + 3.5 * t, 6.0 + 2.5 * t};
        acq.frames.push_back(tgsynth::make_frame(pos, p, rng, t));
        truth.emplace_back(pos);
    }
    const tgr::io::ThermalWindow w =
        tgr::io::normalize(tgr::io::window_at(acq, 4, 5));

    RpcaConfig cfg;
    cfg.lambda = 0.05;
    const RpcaResult res = pcp(w.rows, cfg);

    // Energy of S away from the blob stays below 10% of the total.
    double off_blob = 0, total = 0;
    for (int t = 0; t < 5; ++t)
        for (int i = 0; i < tgr::io::kFramePixels; ++i) {
            const int r = i / tgr::io::kFrameCols, c = i % tgr::io::kFrameCols;
            const double dr = r - truth[size_t(t)]->y;
            const double dc = c - truth[size_t(t)]->x;
            const double e = res.sparse(t, i) * res.sparse(t, i);
            total += e;
            if (dr * dr + dc * dc > 9 * p.blob_sigma * p.blob_sigma) off_blob += e;
        }
    REQUIRE(total > 0);
    CHECK(std::sqrt(off_blob) <= 0.1 * std::sqrt(total));
}
