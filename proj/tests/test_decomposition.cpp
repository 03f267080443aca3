#include <random>

#include "doctest.h"
#include "hja/decomposition.hpp"
#include "hja/errors.hpp"
#include "support.hpp"

using namespace hja;

namespace {

double constraint_residual(const ConstraintReport& report, const std::string& name) {
    for (const auto& entry : report.entries)
        if (entry.name == name) return entry.residual;
    FAIL("missing constraint entry ", name);
    return 0.0;
}

}  // namespace

TEST_SUITE_BEGIN("decomposition");

TEST_CASE("max rank is min(K-1, N-2)") {
    CHECK(max_rank(4, 8) == 3);
    CHECK(max_rank(8, 4) == 2);
    CHECK(max_rank(1, 2) == 0);
    CHECK(max_rank(20, 6) == 4);
}

TEST_CASE("compose is the sensitivity outer product plus the residual") {
    HjaParams params;
    params.gamma = Eigen::Vector2d(1.5, 0.5);
    params.mu = Eigen::Vector3d(1.0, 0.0, -1.0);
    params.u.resize(2, 0);
    params.v.resize(3, 0);
    const auto s = compose(params);
    CHECK(s.s(0, 0) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(s.s(0, 1) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(s.s(0, 2) == doctest::Approx(-1.5).epsilon(1e-14));
    CHECK(s.s(1, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(s.s(1, 2) == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("unit sensitivities replicate the consensus in every row") {
    std::mt19937_64 rng(5);
    HjaParams params;
    params.gamma = Eigen::VectorXd::Ones(4);
    params.mu = testsupport::centered_normal(6, rng);
    params.u = Eigen::MatrixXd::Zero(4, 0);
    params.v = Eigen::MatrixXd::Zero(6, 0);
    const auto s = compose(params);
    for (int k = 0; k < 4; ++k) CHECK((s.s.row(k).transpose() - params.mu).norm() < 1e-14);
}

TEST_CASE("composed canonical parameters have zero row sums") {
    std::mt19937_64 rng(9);
    for (int rank : {0, 1, 2}) {
        const auto params = testsupport::random_canonical(4, 7, rank, rng);
        const auto s = compose(params);
        CHECK((s.s * Eigen::VectorXd::Ones(7)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("compose ignores paired column sign flips") {
    std::mt19937_64 rng(13);
    auto params = testsupport::random_canonical(5, 6, 2, rng);
    const auto before = compose(params);
    params.u.col(1) *= -1.0;
    params.v.col(1) *= -1.0;
    const auto after = compose(params);
    CHECK((before.s - after.s).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("pure consensus matrices decompose to unit sensitivities") {
    std::mt19937_64 rng(21);
    const Eigen::VectorXd mu = testsupport::centered_normal(6, rng);
    ScoreMatrix s;
    s.s = Eigen::VectorXd::Ones(3) * mu.transpose();
    DecomposeDiagnostics diagnostics;
    const auto params = decompose(s, std::nullopt, 1e-8, &diagnostics);
    CHECK((params.gamma - Eigen::VectorXd::Ones(3)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((params.mu - mu).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(params.rank() == 0);
    if (diagnostics.residual_singular_values.size() > 0)
        CHECK(diagnostics.residual_singular_values.maxCoeff() < 1e-10);
}

TEST_CASE("decompose inverts compose on canonical parameters") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        const int n_judges = 3 + static_cast<int>(rng() % 4);
        const int n_items = 5 + static_cast<int>(rng() % 6);
        const int rank = static_cast<int>(rng() % 3);
        if (rank > max_rank(n_judges, n_items)) continue;
        const auto params = testsupport::random_canonical(n_judges, n_items, rank, rng);
        const auto recovered = decompose(compose(params), rank);
        CHECK((recovered.gamma - params.gamma).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((recovered.mu - params.mu).cwiseAbs().maxCoeff() < 1e-8);
        if (rank > 0) {
            CHECK((recovered.u - params.u).cwiseAbs().maxCoeff() < 1e-8);
            CHECK((recovered.v - params.v).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("decompose at matched rank is idempotent") {
    std::mt19937_64 rng(41);
    ScoreMatrix s;
    s.s = Eigen::MatrixXd::Random(4, 6);
    s.s.colwise() -= s.s.rowwise().mean();
    const auto first = decompose(s, 2);
    const auto second = decompose(compose(first), 2);
    CHECK((first.gamma - second.gamma).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((first.mu - second.mu).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((first.u - second.u).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((first.v - second.v).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("decompose output is canonical") {
    std::mt19937_64 rng(43);
    ScoreMatrix s;
    s.s = Eigen::MatrixXd::Random(5, 7);
    s.s.colwise() -= s.s.rowwise().mean();
    const auto params = decompose(s, 2);
    CHECK(check_constraints(params, 1e-8).pass);
}

TEST_CASE("zero column sums mean no consensus direction") {
    ScoreMatrix s;
    s.s.resize(2, 3);
    s.s << 1.0, -2.0, 1.0, -1.0, 2.0, -1.0;
    CHECK_THROWS_AS(decompose(s), DegenerateConsensus);
}

TEST_CASE("decompose rejects ranks beyond the dimension bound") {
    ScoreMatrix s;
    s.s = Eigen::MatrixXd::Random(3, 5);
    s.s.colwise() -= s.s.rowwise().mean();
    CHECK_THROWS_AS(decompose(s, 3), RankTooLarge);
}

TEST_CASE("automatic rank keeps only non-negligible singular values") {
    std::mt19937_64 rng(47);
    const auto params = testsupport::random_canonical(4, 6, 1, rng);
    const auto recovered = decompose(compose(params));
    CHECK(recovered.rank() == 1);
}

TEST_CASE("a truncation cut through equal strengths is reported as ambiguous") {
    std::mt19937_64 rng(53);
    auto params = testsupport::random_canonical(5, 7, 2, rng);
    /* Force both factor columns to the same strength, then cut between them. */
    const double norm0 = params.u.col(0).norm(), norm1 = params.u.col(1).norm();
    params.u.col(1) *= norm0 / norm1;
    DecomposeDiagnostics diagnostics;
    const auto recovered = decompose(compose(params), 1, 1e-8, &diagnostics);
    CHECK(diagnostics.chosen_rank == 1);
    CHECK(diagnostics.ambiguous_rank);
    CHECK(recovered.rank() == 1);

    DecomposeDiagnostics clean;
    decompose(compose(params), 2, 1e-8, &clean);
    CHECK_FALSE(clean.ambiguous_rank);
}

TEST_CASE("constraint audit passes on canonical points and localizes violations") {
    std::mt19937_64 rng(61);
    auto params = testsupport::random_canonical(4, 6, 2, rng);
    const auto clean = check_constraints(params, 1e-8);
    CHECK(clean.pass);
    CHECK(clean.max_residual() < 1e-10);

    auto shifted = params;
    shifted.mu.array() += 0.25;
    const auto shift_report = check_constraints(shifted, 1e-8);
    CHECK_FALSE(shift_report.pass);
    CHECK(constraint_residual(shift_report, "mu_centering") == doctest::Approx(6 * 0.25).epsilon(1e-10));

    auto swapped = params;
    swapped.u.col(0).swap(swapped.u.col(1));
    swapped.v.col(0).swap(swapped.v.col(1));
    const auto swap_report = check_constraints(swapped, 1e-8);
    CHECK_FALSE(swap_report.pass);
    CHECK(constraint_residual(swap_report, "d_ordering") > 0.0);

    auto flipped = params;
    flipped.u.col(0) *= -1.0;
    flipped.v.col(0) *= -1.0;
    const auto flip_report = check_constraints(flipped, 1e-8);
    CHECK_FALSE(flip_report.pass);
    CHECK(constraint_residual(flip_report, "u_sign_anchor") > 0.0);
}

TEST_CASE("reanchoring a canonical point changes nothing") {
    std::mt19937_64 rng(67);
    const auto params = testsupport::random_canonical(4, 6, 2, rng);
    const auto result = reanchor(params.gamma, params.mu, params.u, params.v);
    REQUIRE(result.ok);
    CHECK((result.params.gamma - params.gamma).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((result.params.mu - params.mu).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((result.params.u - params.u).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((result.params.v - params.v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("reanchor restores the canonical set and preserves the scores") {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 25; ++trial) {
        const int n_judges = 3 + static_cast<int>(rng() % 3);
        const int n_items = 5 + static_cast<int>(rng() % 4);
        const int rank = 1 + static_cast<int>(rng() % 2);
        /* Affine-feasible blocks: centered factors and consensus, anchored
         * sensitivity sum, but none of the orthogonality or scaling rules. */
        Eigen::VectorXd gamma = testsupport::centered_normal(n_judges, rng);
        gamma.array() += 1.0;
        const Eigen::VectorXd mu = testsupport::centered_normal(n_items, rng);
        Eigen::MatrixXd u(n_judges, rank), v(n_items, rank);
        for (int c = 0; c < rank; ++c) {
            u.col(c) = testsupport::centered_normal(n_judges, rng);
            v.col(c) = testsupport::centered_normal(n_items, rng);
        }
        const Eigen::MatrixXd before = gamma * mu.transpose() + u * v.transpose();
        const auto result = reanchor(gamma, mu, u, v);
        REQUIRE(result.ok);
        CHECK(check_constraints(result.params, 1e-8).pass);
        CHECK((compose(result.params).s - before).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("reanchor guards fire on degenerate inputs") {
    std::mt19937_64 rng(73);
    const int n_judges = 4, n_items = 6;
    Eigen::VectorXd gamma = Eigen::VectorXd::Ones(n_judges);
    Eigen::VectorXd tiny_mu = testsupport::centered_normal(n_items, rng);
    tiny_mu *= 0.5e-6 / tiny_mu.norm();
    Eigen::MatrixXd u(n_judges, 1), v(n_items, 1);
    u.col(0) = testsupport::centered_normal(n_judges, rng);
    v.col(0) = testsupport::centered_normal(n_items, rng);
    const auto norm_fail = reanchor(gamma, tiny_mu, u, v, 1e-6, 1e-8);
    CHECK_FALSE(norm_fail.ok);
    CHECK(norm_fail.guard == ReanchorGuard::mu_norm);

    const Eigen::VectorXd mu = testsupport::centered_normal(n_items, rng);
    Eigen::MatrixXd u2(n_judges, 2), v2(n_items, 2);
    u2.col(0) = testsupport::centered_normal(n_judges, rng);
    u2.col(1) = 2.0 * u2.col(0);
    v2.col(0) = testsupport::centered_normal(n_items, rng);
    v2.col(1) = -0.5 * v2.col(0);
    const auto rank_fail = reanchor(gamma, mu, u2, v2, 1e-6, 1e-8);
    CHECK_FALSE(rank_fail.ok);
    CHECK(rank_fail.guard == ReanchorGuard::spectral_gap);
}

TEST_CASE("sign anchor makes the first sizeable entry of each column positive") {
    Eigen::MatrixXd u(3, 2), v(4, 2);
    u << -2.0, 1e-14, 0.5, -1.0, 1.5, 1.0;
    v.setOnes();
    sign_anchor(u, v);
    CHECK(u(0, 0) == 2.0);
    CHECK(v.col(0)(0) == -1.0);
    /* Second column's first entry is below the threshold, so the next row decides. */
    CHECK(u(1, 1) == 1.0);
    CHECK(v.col(1)(0) == -1.0);
}

TEST_SUITE_END();
