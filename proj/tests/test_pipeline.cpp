#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "limekit/model_io.hpp"
#include "limekit/pipeline.hpp"

#include "fixtures.hpp"
#include "test_support.hpp"

using namespace limekit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using test_support::random_vector;

namespace {

// Affine score clamped into [0, 1]; linear on the probed region as long as
// the arguments stay small.
BlackBox affine_blackbox(const Eigen::VectorXd& slope, double offset) {
    auto f = [slope, offset](const Eigen::VectorXd& v) {
        return std::clamp(offset + slope.dot(v), 0.0, 1.0);
    };
    return BlackBox(f, static_cast<int>(slope.size()), Smoothness::Smooth);
}

Explanation make_row_explanation(double sigma, double r2) {
    Explanation e;
    e.surrogate.coefficients = Eigen::VectorXd::Ones(2);
    e.surrogate.selected = {0, 1};
    e.report.r2 = r2;
    e.config.sigma = sigma;
    e.ess = 1.0;
    return e;
}

}  // namespace

TEST_CASE("lime recovers an exactly linear score", "[pipeline]") {
    // f(eta(z)) = 0.5 + 0.1 z0 - 0.05 z1 on the binary cube: support {0, 1}.
    const int d = 5;
    Eigen::VectorXd x = Eigen::VectorXd::Ones(d);
    Eigen::VectorXd slope = Eigen::VectorXd::Zero(d);
    slope << 0.1, -0.05, 0.0, 0.0, 0.0;
    const BlackBox model = affine_blackbox(slope, 0.5);
    const auto conv =
        ConversionSpec::segmented(x, Eigen::VectorXd::Zero(d), identity_segmentation(d));
    const auto config = ExplainConfig::lime(100.0, 100, 2, conv, 17);
    const Explanation e = explain_lime(model, x, config);

    CHECK(e.surrogate.selected == std::vector<int>{0, 1});
    CHECK_THAT(e.surrogate.coefficients[0], WithinAbs(0.1, 1e-8));
    CHECK_THAT(e.surrogate.coefficients[1], WithinAbs(-0.05, 1e-8));
    REQUIRE(e.report.r2.has_value());
    CHECK_THAT(*e.report.r2, WithinAbs(1.0, 1e-6));
    CHECK_FALSE(e.degenerate);
}

TEST_CASE("lime degenerates when the bandwidth collapses", "[pipeline]") {
    const Dataset wine = fixtures::wine_like_dataset();
    const BlackBox forest = fixtures::wine_forest(wine);
    const Eigen::VectorXd x = wine.features.row(fixtures::interior_row(forest, wine));
    const auto conv =
        ConversionSpec::segmented(x, Eigen::VectorXd::Zero(13), identity_segmentation(13));
    const auto config = ExplainConfig::lime(0.1, 2000, 4, conv, 23);
    const Explanation e = explain_lime(forest, x, config);

    CHECK(e.ess < 1.01);
    CHECK(e.degenerate);
    CHECK_FALSE(e.warnings.empty());
}

TEST_CASE("explanations are bitwise deterministic", "[pipeline]") {
    const Dataset wine = fixtures::wine_like_dataset();
    const BlackBox forest = fixtures::wine_forest(wine);
    const Eigen::VectorXd x = wine.features.row(3);
    const auto conv =
        ConversionSpec::segmented(x, Eigen::VectorXd::Zero(13), identity_segmentation(13));
    const auto config = ExplainConfig::lime(2.0, 800, 4, conv, 5);
    const Explanation a = explain_lime(forest, x, config);
    const Explanation b = explain_lime(forest, x, config);
    CHECK(a.surrogate.intercept == b.surrogate.intercept);
    CHECK(a.surrogate.coefficients == b.surrogate.coefficients);
    CHECK(a.ess == b.ess);
    CHECK(explanation_to_json(a) == explanation_to_json(b));
}

TEST_CASE("slime estimates the gradient of a linear score", "[pipeline]") {
    // f(x) = 0.5 + 0.1 (3 x0 - 2 x1), clipped far from the target.
    Eigen::VectorXd slope(2);
    slope << 0.3, -0.2;
    const BlackBox model = affine_blackbox(slope, 0.5);
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    const auto config = ExplainConfig::slime(0.01, 10000, 2, ConversionSpec::tabular(x), 29);
    const Explanation e = explain_slime(model, x, config);
    CHECK_THAT(e.surrogate.coefficients[0], WithinRel(0.3, 0.02));
    CHECK_THAT(e.surrogate.coefficients[1], WithinRel(-0.2, 0.02));
    CHECK(e.ess == 10000.0);
}

TEST_CASE("slime outputs the zero gradient inside a forest cell", "[pipeline]") {
    const Dataset wine = fixtures::wine_like_dataset();
    const BlackBox forest = fixtures::wine_forest(wine);
    const Eigen::VectorXd x = wine.features.row(fixtures::interior_row(forest, wine));
    const auto config = ExplainConfig::slime(1e-4, 2000, 13, ConversionSpec::tabular(x), 31);
    const Explanation e = explain_slime(forest, x, config);
    CHECK(e.surrogate.coefficients.isZero(0.0));
    CHECK(e.degenerate);
    REQUIRE(e.report.r2.has_value());
    CHECK(*e.report.r2 == 1.0);  // flat labels, interpolated by the constant
}

TEST_CASE("slime matches the finite-difference oracle on a segmented smooth model",
          "[pipeline]") {
    SplitMix64 rng(37);
    const int d = 8;
    const Eigen::VectorXd w = random_vector(rng, d, -1.5, 1.5);
    const BlackBox model = make_logistic_blackbox({w, 0.2});
    const Eigen::VectorXd x = random_vector(rng, d, -1.0, 1.0);
    const auto conv =
        ConversionSpec::segmented(x, Eigen::VectorXd::Zero(d), {0, 0, 1, 1, 2, 2, 3, 3});
    const int dhat = conv.surrogate_dim();

    const auto config = ExplainConfig::slime(1e-3, 10000, dhat, conv, 41);
    const Explanation e = explain_slime(model, x, config);
    const Eigen::VectorXd oracle =
        surrogate_gradient_fd(model, conv, Eigen::VectorXd::Ones(dhat));
    CHECK((e.surrogate.coefficients - oracle).norm() / oracle.norm() < 0.05);
}

TEST_CASE("sigma sweep", "[pipeline]") {
    const Dataset wine = fixtures::wine_like_dataset();
    const BlackBox forest = fixtures::wine_forest(wine);
    const Eigen::VectorXd x = wine.features.row(fixtures::interior_row(forest, wine));
    const auto conv =
        ConversionSpec::segmented(x, Eigen::VectorXd::Zero(13), identity_segmentation(13));
    const auto base = ExplainConfig::lime(1.0, 1000, 4, conv, 47);

    SECTION("row count and sigma echo the grid") {
        const auto grid = log_grid(1e-3, 1e2, 20);
        REQUIRE(grid.size() == 20);
        CHECK(grid.front() == 1e-3);
        CHECK(grid.back() == 1e2);
        const auto rows = sweep_sigma(forest, x, base, grid);
        REQUIRE(rows.size() == 20);
        for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].sigma == grid[i]);
    }

    SECTION("small-bandwidth rows are degenerate on the piecewise model") {
        const auto rows = sweep_sigma(forest, x, base, log_grid(1e-2, 1e2, 10));
        for (const SweepRow& row : rows) {
            REQUIRE(row.explanation.has_value());
            if (row.sigma <= 0.1) CHECK(row.explanation->degenerate);
            if (row.sigma >= 10.0) CHECK_FALSE(row.explanation->degenerate);
        }
    }

    SECTION("slime on a linear black box adheres everywhere") {
        // Slopes small enough that the [0, 1] clamp never fires on the grid.
        Eigen::VectorXd slope(3);
        slope << 0.05, -0.03, 0.02;
        const BlackBox linear = affine_blackbox(slope, 0.5);
        const Eigen::VectorXd target = Eigen::VectorXd::Zero(3);
        const auto cfg = ExplainConfig::slime(0.1, 600, 3, ConversionSpec::tabular(target), 3);
        const auto rows = sweep_sigma(linear, target, cfg, log_grid(1e-3, 1.0, 8));
        for (const SweepRow& row : rows) {
            REQUIRE(row.explanation.has_value());
            REQUIRE(row.explanation->report.r2.has_value());
            CHECK(*row.explanation->report.r2 >= 0.99);
        }
    }

    SECTION("per-row failures are recorded, not thrown") {
        // UniformCube sigma > 1 is invalid for segmented s-LIME rows.
        const auto cfg = ExplainConfig::slime(0.5, 300, 4, conv, 3);
        const auto rows = sweep_sigma(forest, x, cfg, {0.5, 2.0});
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].explanation.has_value());
        CHECK(rows[1].error.has_value());
    }
}

TEST_CASE("best-sigma selection", "[pipeline]") {
    SECTION("single row wins by default") {
        std::vector<SweepRow> rows(1);
        rows[0].sigma = 0.3;
        rows[0].explanation = make_row_explanation(0.3, 0.42);
        const auto [sigma, e] = select_best_sigma(rows);
        CHECK(sigma == 0.3);
        CHECK(*e.report.r2 == 0.42);
    }

    SECTION("ties break toward the smaller sigma") {
        std::vector<SweepRow> rows(3);
        rows[0].sigma = 0.01;
        rows[0].explanation = make_row_explanation(0.01, 0.2);
        rows[1].sigma = 0.1;
        rows[1].explanation = make_row_explanation(0.1, 0.9);
        rows[2].sigma = 1.0;
        rows[2].explanation = make_row_explanation(1.0, 0.9);
        CHECK(select_best_sigma(rows).first == 0.1);
    }

    SECTION("an interior maximum is honored") {
        std::vector<SweepRow> rows(3);
        rows[0].sigma = 0.1;
        rows[0].explanation = make_row_explanation(0.1, 0.2);
        rows[1].sigma = 1.0;
        rows[1].explanation = make_row_explanation(1.0, 0.9);
        rows[2].sigma = 10.0;
        rows[2].explanation = make_row_explanation(10.0, 0.3);
        CHECK(select_best_sigma(rows).first == 1.0);
    }

    SECTION("selection agrees with an independent argmax on a real sweep") {
        const Dataset wine = fixtures::wine_like_dataset();
        const BlackBox forest = fixtures::wine_forest(wine);
        const Eigen::VectorXd x = wine.features.row(1);
        const auto conv =
            ConversionSpec::segmented(x, Eigen::VectorXd::Zero(13), identity_segmentation(13));
        const auto rows =
            sweep_sigma(forest, x, ExplainConfig::lime(1.0, 800, 4, conv, 11), log_grid(0.5, 50.0, 8));
        double best_r2 = -std::numeric_limits<double>::infinity();
        double best_sigma = 0.0;
        for (const SweepRow& row : rows) {
            if (!row.explanation || !row.explanation->report.r2) continue;
            if (*row.explanation->report.r2 > best_r2) {
                best_r2 = *row.explanation->report.r2;
                best_sigma = row.sigma;
            }
        }
        CHECK(select_best_sigma(rows).first == best_sigma);
    }

    SECTION("all rows failed") {
        std::vector<SweepRow> rows(2);
        rows[0].error = "boom";
        rows[1].error = "boom";
        CHECK_THROWS_AS(select_best_sigma(rows), AllRowsFailed);
    }
}

TEST_CASE("pipeline invariants", "[pipeline][properties]") {
    SplitMix64 rng(61);

    SECTION("affine scores are explained exactly by both methods at any sigma") {
        for (int rep = 0; rep < 25; ++rep) {
            const int d = 2 + static_cast<int>(rng.next_below(4));
            Eigen::VectorXd slope = 0.1 * random_vector(rng, d);
            const BlackBox model = affine_blackbox(slope, 0.5);
            const Eigen::VectorXd x = random_vector(rng, d, 0.5, 1.0);
            const auto seg =
                ConversionSpec::segmented(x, Eigen::VectorXd::Zero(d), identity_segmentation(d));
            // effective slope on the binary cube: toggling feature i moves f by slope_i * x_i
            Eigen::VectorXd cube_slope(d);
            for (int i = 0; i < d; ++i) cube_slope[i] = slope[i] * x[i];

            for (double sigma : {1.0, 10.0, 100.0}) {
                const auto e = explain_lime(model, x, ExplainConfig::lime(sigma, 40 * d, d, seg, rep));
                REQUIRE(e.report.r2.has_value());
                CHECK_THAT(*e.report.r2, WithinAbs(1.0, 1e-6));
                for (int i = 0; i < d; ++i) {
                    CHECK_THAT(e.surrogate.coefficients[i], WithinAbs(cube_slope[i], 1e-6));
                }
            }
            for (double sigma : {0.05, 0.5, 1.0}) {
                const auto e = explain_slime(model, x,
                                             ExplainConfig::slime(sigma, 40 * d, d, seg, rep));
                REQUIRE(e.report.r2.has_value());
                CHECK_THAT(*e.report.r2, WithinAbs(1.0, 1e-6));
                for (int i = 0; i < d; ++i) {
                    CHECK_THAT(e.surrogate.coefficients[i], WithinAbs(cube_slope[i], 1e-6));
                }
            }
            const auto tab = ConversionSpec::tabular(x);
            const auto e = explain_slime(model, x, ExplainConfig::slime(0.3, 40 * d, d, tab, rep));
            for (int i = 0; i < d; ++i) {
                CHECK_THAT(e.surrogate.coefficients[i], WithinAbs(slope[i], 1e-6));
            }
        }
    }

    SECTION("slime converges to the finite-difference gradient as sigma shrinks") {
        const int d = 6;
        const Eigen::VectorXd w = random_vector(rng, d, -1.5, 1.5);
        const BlackBox model = make_logistic_blackbox({w, -0.1});
        const Eigen::VectorXd x = random_vector(rng, d, -0.5, 0.5);
        const auto conv = ConversionSpec::tabular(x);
        const Eigen::VectorXd oracle = surrogate_gradient_fd(model, conv, Eigen::VectorXd::Zero(d));

        const auto coarse = explain_slime(
            model, x, ExplainConfig::slime(1e-3, 10000, d, conv, 71));
        const double err_coarse = (coarse.surrogate.coefficients - oracle).norm() / oracle.norm();
        CHECK(err_coarse < 0.05);

        const auto fine = explain_slime(
            model, x, ExplainConfig::slime(5e-4, 40000, d, conv, 71));
        const double err_fine = (fine.surrogate.coefficients - oracle).norm() / oracle.norm();
        CHECK(err_fine < err_coarse);
    }

    SECTION("huge-bandwidth lime equals the unit-weight fit") {
        for (int rep = 0; rep < 10; ++rep) {
            const Dataset wine = fixtures::wine_like_dataset();
            const BlackBox forest = fixtures::wine_forest(wine);
            const Eigen::VectorXd x = wine.features.row(rep);
            const auto conv =
                ConversionSpec::segmented(x, Eigen::VectorXd::Zero(13), identity_segmentation(13));
            const auto config = ExplainConfig::lime(1e6, 500, 4, conv, 100 + rep);
            const Explanation e = explain_lime(forest, x, config);

            // Reference: identical sample, unit weights.
            NeighborhoodSample sample;
            sample.points = sample_binary_neighborhood(13, config.sampler);
            Eigen::MatrixXd originals(500, 13);
            for (int i = 0; i < 500; ++i) {
                originals.row(i) = convert(conv, sample.points.row(i));
            }
            sample.labels = predict_batch(forest, originals);
            sample.weights = Eigen::VectorXd::Ones(500);
            const LinearSurrogate unit = fit_k_sparse(sample, 4, 0.0);

            CHECK_THAT(e.surrogate.intercept, WithinAbs(unit.intercept, 1e-9));
            for (int i = 0; i < 13; ++i) {
                CHECK_THAT(e.surrogate.coefficients[i], WithinAbs(unit.coefficients[i], 1e-9));
            }
        }
    }

    SECTION("degeneracy is monotone in sigma on piecewise models") {
        const Dataset wine = fixtures::wine_like_dataset();
        const BlackBox forest = fixtures::wine_forest(wine);
        const Eigen::VectorXd x = wine.features.row(2);
        const auto conv =
            ConversionSpec::segmented(x, Eigen::VectorXd::Zero(13), identity_segmentation(13));
        const auto grid = log_grid(1e-2, 1e2, 12);
        std::vector<bool> degenerate;
        for (double sigma : grid) {
            const auto e =
                explain_lime(forest, x, ExplainConfig::lime(sigma, 600, 4, conv, 555));
            degenerate.push_back(e.degenerate);
        }
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!degenerate[i]) continue;
            for (std::size_t j = 0; j < i; ++j) {
                if (grid[j] < grid[i] / 2.0) CHECK(degenerate[j]);
            }
        }
    }
}

TEST_CASE("explanation serialization", "[pipeline]") {
    Eigen::VectorXd slope(2);
    slope << 0.2, -0.1;
    const BlackBox model = affine_blackbox(slope, 0.5);
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    const auto config = ExplainConfig::slime(0.1, 200, 2, ConversionSpec::tabular(x), 77);
    const Explanation e = explain_slime(model, x, config);
    const std::string json = explanation_to_json(e);
    CHECK(json.find("\"method\": \"slime\"") != std::string::npos);
    CHECK(json.find("\"sigma\": 0.1") != std::string::npos);
    CHECK(json.find("\"seed\": 77") != std::string::npos);
    CHECK(json.find("\"degenerate\": false") != std::string::npos);

    std::vector<SweepRow> rows(2);
    rows[0].sigma = 0.5;
    rows[0].explanation = e;
    rows[1].sigma = 2.0;
    rows[1].error = "InvalidSigma";
    const std::string csv = sweep_to_csv(rows);
    CHECK(csv.rfind("sigma,r2,degenerate,ess,recall,precision,coverage\n", 0) == 0);
    CHECK(csv.find("\n2,,,,,,\n") != std::string::npos);
}
