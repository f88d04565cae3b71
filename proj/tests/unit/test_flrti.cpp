#include "doctest.h"

#include "vws/bvls.hpp"
#include "vws/error.hpp"
#include "vws/flrti.hpp"
#include "vws/lp.hpp"
#include "vws/synth.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>

using namespace vws;
using namespace vws::flrti;

namespace {

double zero_beta(double) { return 0.0; }

} // namespace

TEST_SUITE("flrti") {

TEST_CASE("grids, weights and resampling") {
    const auto g = make_grid(100.0, 200.0, 11);
    REQUIRE(g.size() == 11);
    CHECK(g.front() == 100.0);
    CHECK(g.back() == 200.0);
    CHECK(g[5] == doctest::Approx(150.0));
    const auto w = trapezoid_weights(g);
    CHECK(w.front() == doctest::Approx(5.0));
    CHECK(w[3] == doctest::Approx(10.0));
    double total = 0.0;
    for (double x : w) total += x;
    CHECK(total == doctest::Approx(100.0));

    const std::vector<double> t{90.0, 150.0, 210.0}, v{0.0, 6.0, 0.0};
    const auto r = resample(t, v, g);
    CHECK(r[5] == doctest::Approx(6.0));
    CHECK(r[0] == doctest::Approx(1.0));
    const auto outside = make_grid(80.0, 200.0, 5);
    CHECK_THROWS_AS(resample(t, v, outside), ValidationError);
}

TEST_CASE("the paper's operating point lies in the default grid") {
    CHECK(std::find(kDefaultSigmaGrid.begin(), kDefaultSigmaGrid.end(), 0.05) != kDefaultSigmaGrid.end());
    CHECK(std::find(kDefaultOmegaGrid.begin(), kDefaultOmegaGrid.end(), 0.95) != kDefaultOmegaGrid.end());
}

TEST_CASE("the simplex solves a small bounded problem") {
    // minimize −x − y  s.t. x + 2y ≤ 4, 3x + y ≤ 6.
    Eigen::VectorXd c(2);
    c << -1, -1;
    Eigen::MatrixXd A(2, 2);
    A << 1, 2, 3, 1;
    Eigen::VectorXd b(2);
    b << 4, 6;
    const auto r = lp::minimize(c, A, b);
    REQUIRE(r.status == lp::Status::optimal);
    CHECK(r.x(0) == doctest::Approx(1.6));
    CHECK(r.x(1) == doctest::Approx(1.2));
    CHECK(r.objective == doctest::Approx(-2.8));

    // x ≥ 1 written as −x ≤ −1 needs phase one.
    Eigen::VectorXd c2(1);
    c2 << 1;
    Eigen::MatrixXd A2(1, 1);
    A2 << -1;
    Eigen::VectorXd b2(1);
    b2 << -1;
    const auto r2 = lp::minimize(c2, A2, b2);
    REQUIRE(r2.status == lp::Status::optimal);
    CHECK(r2.x(0) == doctest::Approx(1.0));

    Eigen::VectorXd c3(1);
    c3 << -1;
    Eigen::MatrixXd A3(1, 1);
    A3 << -1;
    Eigen::VectorXd b3(1);
    b3 << 0;
    CHECK(lp::minimize(c3, A3, b3).status == lp::Status::unbounded);
}

TEST_CASE("bounded least squares hits its bounds") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd b(3);
    b << 2.0, -3.0, 0.5;
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(3, -1.0), hi = Eigen::VectorXd::Constant(3, 1.0);
    const auto r = bvls::solve(A, b, lo, hi, Eigen::VectorXd::Zero(3), {true, true, true});
    REQUIRE(r.converged);
    CHECK(r.x(0) == doctest::Approx(1.0));
    CHECK(r.x(1) == doctest::Approx(-1.0));
    CHECK(r.x(2) == doctest::Approx(0.5));
}

TEST_CASE("a zero coefficient function is estimated as exactly zero") {
    const auto data = synth::functional(60, 3, 0.5, zero_beta, 50);
    const auto m = fit(data.grid, data.samples, 0.5, 0.95);
    CHECK(m.certified);
    std::size_t zeros = 0;
    for (double b : m.beta) zeros += b == 0.0;
    CHECK(zeros >= 45);
}

TEST_CASE("the three-region shape is recovered at a fixed operating point") {
    const auto data = synth::functional(120, 42, 0.05, synth::three_peak_beta, 60);
    for (Selector sel : {Selector::lasso, Selector::dantzig}) {
        FitOptions o;
        o.selector = sel;
        const auto m = fit(data.grid, data.samples, 0.05, 0.95, o);
        CHECK(m.certified);
        auto mean_over = [&](double a, double b) {
            double s = 0;
            int n = 0;
            for (std::size_t i = 0; i < data.grid.size(); ++i)
                if (data.grid[i] >= a && data.grid[i] <= b) {
                    s += m.beta[i];
                    ++n;
                }
            return s / n;
        };
        CHECK(mean_over(0.12, 0.23) > 0.0);
        CHECK(mean_over(0.42, 0.53) < 0.0);
        CHECK(mean_over(0.72, 0.83) > 0.0);
    }
}

TEST_CASE("predictions follow the fitted coefficient function") {
    const auto data = synth::functional(80, 5, 0.05, synth::three_peak_beta, 40);
    const auto m = fit(data.grid, data.samples, 0.05, 0.95);
    double sse = 0.0, sst = 0.0, mean = 0.0;
    for (const auto& s : data.samples) mean += s.y;
    mean /= static_cast<double>(data.samples.size());
    for (const auto& s : data.samples) {
        sse += std::pow(predict(m, s.x) - s.y, 2);
        sst += std::pow(s.y - mean, 2);
    }
    CHECK(sse < 0.2 * sst);
    const std::vector<double> wrong(3, 0.0);
    CHECK_THROWS_AS(predict(m, wrong), ValidationError);
}

TEST_CASE("cross-validation is seeded and equals the serial reference") {
    const auto data = synth::functional(40, 9, 0.1, synth::three_peak_beta, 30);
    const std::vector<double> sg{0.01, 0.05}, og{0.5, 0.95};
    const auto a = cross_validate(data.grid, data.samples, sg, og, 5, 17);
    const auto b = cross_validate_serial(data.grid, data.samples, sg, og, 5, 17);
    REQUIRE(a.table.size() == 4);
    CHECK(a.best_sigma == b.best_sigma);
    CHECK(a.best_omega == b.best_omega);
    CHECK(a.folds == b.folds);
    for (std::size_t i = 0; i < a.table.size(); ++i) CHECK(a.table[i].error == b.table[i].error);
}

TEST_CASE("invalid fits are rejected") {
    const auto data = synth::functional(20, 1, 0.1, synth::three_peak_beta, 20);
    CHECK_THROWS_AS(fit(data.grid, data.samples, -1.0, 0.5), ValidationError);
    CHECK_THROWS_AS(fit(data.grid, data.samples, 0.05, 1.5), ValidationError);
    std::vector<FunctionalSample> one(data.samples.begin(), data.samples.begin() + 1);
    CHECK_THROWS_AS(fit(data.grid, one, 0.05, 0.5), ValidationError);
}

TEST_CASE("model export carries the operating point") {
    const auto data = synth::functional(30, 2, 0.1, synth::three_peak_beta, 20);
    const auto m = fit(data.grid, data.samples, 0.05, 0.95);
    const auto j = nlohmann::json::parse(to_json(m));
    CHECK(j["sigma"].get<double>() == 0.05);
    CHECK(j["omega"].get<double>() == 0.95);
    const auto csv = beta_csv(m);
    CHECK(csv.rfind("gdd,beta\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);
}

}
