#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "kbrn/kernel_activation.hpp"
#include "kbrn/rng.hpp"

using namespace kbrn;

namespace {

std::shared_ptr<const KernelDictionary> make_dict(Vector centers, double gamma) {
    return std::make_shared<const KernelDictionary>(std::move(centers), gamma);
}

// Exhaustive 1-D k-means oracle: optimal clusters are contiguous in sorted
// order, so enumerate every contiguous partition into k groups.
double brute_force_kmeans_objective(Vector samples, std::size_t k) {
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    std::vector<std::size_t> cuts;  // group boundaries (exclusive prefix ends)
    double best = std::numeric_limits<double>::infinity();

    auto group_cost = [&](std::size_t lo, std::size_t hi) {  // [lo, hi)
        double mean = 0.0;
        for (std::size_t i = lo; i < hi; ++i) mean += samples[i];
        mean /= static_cast<double>(hi - lo);
        double cost = 0.0;
        for (std::size_t i = lo; i < hi; ++i) cost += (samples[i] - mean) * (samples[i] - mean);
        return cost;
    };

    // recurse over cut positions
    std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t start,
                                                                    std::size_t groups_left,
                                                                    double acc) {
        if (groups_left == 1) {
            best = std::min(best, acc + group_cost(start, n));
            return;
        }
        for (std::size_t end = start + 1; end + (groups_left - 1) <= n; ++end) {
            rec(end, groups_left - 1, acc + group_cost(start, end));
        }
    };
    rec(0, k, 0.0);
    return best;
}

double lloyd_objective(const Vector& samples, const Vector& centers) {
    double obj = 0.0;
    for (double x : samples) {
        double bestd = std::numeric_limits<double>::infinity();
        for (double c : centers) bestd = std::min(bestd, (x - c) * (x - c));
        obj += bestd;
    }
    return obj;
}

}  // namespace

TEST_CASE("gaussian_kernel pinned values and symmetry") {
    CHECK(gaussian_kernel(0.7, 0.7, 0.3) == doctest::Approx(1.0));
    // exp(-0.5) evaluated independently = 0.6065306597126334
    CHECK(gaussian_kernel(1.0, 0.0, 1.0) == doctest::Approx(0.606531).epsilon(1e-5));
    const double d = 0.37;
    const double c = -1.2;
    CHECK(gaussian_kernel(c + d, c, 0.8) == doctest::Approx(gaussian_kernel(c - d, c, 0.8)));
}

TEST_CASE("activate zero coefficients and single-kernel cases") {
    auto dict = make_dict({-1.0, 0.0, 1.0}, 0.7);
    const KernelActivation zero(dict, Vector{0.0, 0.0, 0.0});
    for (double a : {-3.0, -0.2, 0.0, 1.4, 9.0}) CHECK(zero(a) == 0.0);

    auto single = make_dict({0.4}, 1.3);
    const KernelActivation one(single, Vector{1.0});
    CHECK(one(0.4) == doctest::Approx(1.0));
}

TEST_CASE("activate two-kernel sum at the midpoint") {
    auto dict = make_dict({-1.0, 1.0}, 1.0);
    const KernelActivation act(dict, Vector{1.0, 1.0});
    // 2 * exp(-0.5) = 1.2130613194252668
    CHECK(act(0.0) == doctest::Approx(1.213061).epsilon(1e-5));
}

TEST_CASE("activate_grad_input trivial zeros") {
    auto single = make_dict({0.5}, 0.9);
    const KernelActivation one(single, Vector{1.0});
    CHECK(one.grad_input(0.5) == doctest::Approx(0.0));

    auto dict = make_dict({-1.0, 0.0, 2.0}, 0.8);
    const KernelActivation zero(dict, Vector{0.0, 0.0, 0.0});
    CHECK(zero.grad_input(0.3) == 0.0);
}

TEST_CASE("activate_grad_input matches central finite differences") {
    Rng rng(404);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_int(0, 4));
        Vector centers(k);
        double c = rng.uniform(-3.0, -1.0);
        for (auto& x : centers) {
            x = c;
            c += rng.uniform(0.3, 1.2);
        }
        auto dict = make_dict(centers, rng.uniform(0.4, 1.5));
        Vector alpha(k);
        for (auto& x : alpha) x = rng.uniform(-3.0, 3.0);
        const KernelActivation act(dict, alpha);
        const double a = rng.uniform(-3.0, 3.0);
        const double eps = 1e-5;
        const double fd = (act(a + eps) - act(a - eps)) / (2.0 * eps);
        const double an = act.grad_input(a);
        CHECK(an == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("activate_grad_coeffs values and consistency identity") {
    auto dict = make_dict({-2.0, -0.5, 1.0, 2.5}, 0.9);
    Vector alpha{0.3, -1.1, 0.7, 2.0};
    const KernelActivation act(dict, alpha);

    // entry is 1 exactly at its center
    const Vector at_center = act.grad_coeffs(-0.5);
    CHECK(at_center[1] == doctest::Approx(1.0));

    // kernel decay with distance, fixed gamma
    const Vector g = act.grad_coeffs(-2.0);
    CHECK(g[0] > g[1]);
    CHECK(g[1] > g[2]);
    CHECK(g[2] > g[3]);

    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = rng.uniform(-4.0, 4.0);
        const Vector kappa = act.grad_coeffs(a);
        CHECK(dot(kappa, alpha) == doctest::Approx(act(a)).epsilon(1e-12));
        for (double v : kappa) {
            CHECK(v > 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("build_dictionary_uniform spacing and endpoints") {
    const KernelDictionary d1 = build_dictionary_uniform(-1.0, 1.0, 3, 0.5);
    CHECK(d1.centers() == Vector{-1.0, 0.0, 1.0});

    const KernelDictionary d2 = build_dictionary_uniform(0.0, 1.0, 2, 0.5);
    CHECK(d2.centers() == Vector{0.0, 1.0});

    const KernelDictionary d3 = build_dictionary_uniform(-2.0, 2.0, 5, 0.5);
    for (std::size_t i = 1; i < 5; ++i) {
        CHECK(d3.centers()[i] - d3.centers()[i - 1] == doctest::Approx(1.0));
    }

    CHECK_THROWS_AS(build_dictionary_uniform(1.0, 1.0, 3, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(build_dictionary_uniform(0.0, 1.0, 1, 0.5), std::invalid_argument);
}

TEST_CASE("dictionary invariants enforced") {
    CHECK_THROWS_AS(KernelDictionary(Vector{1.0, 1.0}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(KernelDictionary(Vector{0.0, 1.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(KernelDictionary(Vector{}, 0.5), std::invalid_argument);
}

TEST_CASE("kmeans trivial cases") {
    Rng rng(1);
    const Vector c1 = fit_centers_kmeans_1d(Vector{5.0, 5.0, 5.0, 5.0}, 1, 50, 1e-12, rng);
    REQUIRE(c1.size() == 1);
    CHECK(c1[0] == doctest::Approx(5.0));

    const Vector c2 = fit_centers_kmeans_1d(Vector{0.0, 0.0, 10.0, 10.0}, 2, 50, 1e-12, rng);
    REQUIRE(c2.size() == 2);
    CHECK(c2[0] == doctest::Approx(0.0));
    CHECK(c2[1] == doctest::Approx(10.0));
}

TEST_CASE("kmeans rejects K above distinct-value count") {
    Rng rng(1);
    CHECK_THROWS_AS(fit_centers_kmeans_1d(Vector{1.0, 1.0, 2.0}, 3, 50, 1e-12, rng),
                    std::invalid_argument);
}

TEST_CASE("kmeans matches the contiguous-partition brute force optimum") {
    Rng rng(90210);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform_int(0, 6));
        Vector samples(n);
        for (auto& x : samples) x = rng.uniform(-5.0, 5.0);
        const std::size_t kmax = std::min<std::size_t>(3, n);
        const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(kmax) - 1));
        const Vector centers = fit_centers_kmeans_1d(samples, k, 100, 1e-12, rng);
        REQUIRE(centers.size() == k);
        CHECK(std::is_sorted(centers.begin(), centers.end()));
        const double got = lloyd_objective(samples, centers);
        const double want = brute_force_kmeans_objective(samples, k);
        CHECK(got == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("bandwidth rule is mean adjacent spacing times factor") {
    CHECK(bandwidth_from_centers(Vector{0.0, 1.0, 3.0}, 1.0) == doctest::Approx(1.5));
    CHECK(bandwidth_from_centers(Vector{0.0, 1.0, 3.0}, 0.5) == doctest::Approx(0.75));
    CHECK(bandwidth_from_centers(Vector{2.0}, 0.8) == doctest::Approx(0.8));
}

TEST_CASE("build_dictionary_from_samples falls back on degenerate input") {
    Rng rng(3);
    const KernelDictionary flat = build_dictionary_from_samples(Vector{2.0, 2.0, 2.0}, 3, 1.0, rng);
    CHECK(flat.centers().front() == doctest::Approx(-1.0));
    CHECK(flat.centers().back() == doctest::Approx(1.0));

    const KernelDictionary two =
        build_dictionary_from_samples(Vector{0.0, 0.0, 4.0, 4.0, 4.0}, 4, 1.0, rng);
    CHECK(two.centers().front() == doctest::Approx(0.0));
    CHECK(two.centers().back() == doctest::Approx(4.0));
    CHECK(two.size() == 4);
}

TEST_CASE("init_coeffs_mimic zero target gives exactly zero coefficients") {
    const KernelDictionary dict = build_dictionary_uniform(-2.0, 2.0, 7, 0.6);
    const Vector alpha = init_coeffs_mimic(dict, [](double) { return 0.0; }, 50, 1e-6);
    for (double a : alpha) CHECK(a == 0.0);
}

TEST_CASE("init_coeffs_mimic reproduces tanh closely") {
    const double spacing = 6.0 / 14.0;
    const KernelDictionary dict = build_dictionary_uniform(-3.0, 3.0, 15, spacing);
    auto dict_ptr = std::make_shared<const KernelDictionary>(dict);
    const Vector alpha =
        init_coeffs_mimic(dict, [](double a) { return std::tanh(a); }, 200, 1e-6);
    const KernelActivation act(dict_ptr, alpha);
    double worst = 0.0;
    for (int i = 0; i <= 200; ++i) {
        const double a = -3.0 + 6.0 * i / 200.0;
        worst = std::max(worst, std::fabs(act(a) - std::tanh(a)));
    }
    CHECK(worst < 0.01);
}

TEST_CASE("init_coeffs_mimic fits the non-monotone sine") {
    const double pi = std::numbers::pi;
    const double spacing = 2.0 * pi / 14.0;
    const KernelDictionary dict = build_dictionary_uniform(-pi, pi, 15, spacing);
    auto dict_ptr = std::make_shared<const KernelDictionary>(dict);
    const Vector alpha = init_coeffs_mimic(dict, [](double a) { return std::sin(a); }, 200, 1e-6);
    const KernelActivation act(dict_ptr, alpha);
    double mse = 0.0;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
        const double a = -pi + 2.0 * pi * i / (n - 1);
        const double r = act(a) - std::sin(a);
        mse += r * r;
    }
    mse /= n;
    CHECK(mse < 1e-3);
}

TEST_CASE("init_coeffs_mimic validates arguments") {
    const KernelDictionary dict = build_dictionary_uniform(-1.0, 1.0, 5, 0.5);
    CHECK_THROWS_AS(init_coeffs_mimic(dict, [](double) { return 0.0; }, 3, 1e-6),
                    std::invalid_argument);
    CHECK_THROWS_AS(init_coeffs_mimic(dict, [](double) { return 0.0; }, 50, -1.0),
                    std::invalid_argument);
}

TEST_CASE("smoothness penalty against the double-sum oracle") {
    auto dict = make_dict({-1.5, -0.3, 0.8, 2.0}, 0.7);
    const GramMatrix gram = gram_matrix(*dict);
    Rng rng(55);
    for (int trial = 0; trial < 25; ++trial) {
        Vector alpha(4);
        for (auto& x : alpha) x = rng.uniform(-2.0, 2.0);
        const KernelActivation act(dict, alpha);
        double want = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            for (std::size_t k = 0; k < 4; ++k) {
                want += alpha[j] * alpha[k] *
                        gaussian_kernel(dict->centers()[j], dict->centers()[k], 0.7);
            }
        }
        CHECK(smoothness_penalty(act, gram) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("smoothness penalty trivial cases") {
    auto single = make_dict({0.2}, 1.0);
    const GramMatrix gram = gram_matrix(*single);
    const KernelActivation two(single, Vector{2.0});
    CHECK(smoothness_penalty(two, gram) == doctest::Approx(4.0));
    const KernelActivation zero(single, Vector{0.0});
    CHECK(smoothness_penalty(zero, gram) == 0.0);
}

TEST_CASE("smoothness penalty gradient matches finite differences") {
    auto dict = make_dict({-2.0, -1.0, 0.0, 1.0, 2.0}, 0.8);
    const GramMatrix gram = gram_matrix(*dict);

    auto single = make_dict({0.0}, 1.0);
    const GramMatrix g1 = gram_matrix(*single);
    const KernelActivation scalar(single, Vector{3.0});
    CHECK(smoothness_penalty_grad(scalar, g1)[0] == doctest::Approx(6.0));

    Rng rng(66);
    Vector alpha(5);
    for (auto& x : alpha) x = rng.uniform(-2.0, 2.0);
    KernelActivation act(dict, alpha);
    const Vector grad = smoothness_penalty_grad(act, gram);
    const double eps = 1e-6;
    for (std::size_t k = 0; k < 5; ++k) {
        Vector up = alpha;
        Vector dn = alpha;
        up[k] += eps;
        dn[k] -= eps;
        const double fp = smoothness_penalty(KernelActivation(dict, up), gram);
        const double fm = smoothness_penalty(KernelActivation(dict, dn), gram);
        const double fd = (fp - fm) / (2.0 * eps);
        CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("smoothness penalty shape errors") {
    auto dict = make_dict({-1.0, 1.0}, 0.5);
    auto other = make_dict({-1.0, 0.0, 1.0}, 0.5);
    const GramMatrix gram3 = gram_matrix(*other);
    const KernelActivation act(dict, Vector{1.0, -1.0});
    CHECK_THROWS_AS(smoothness_penalty(act, gram3), ShapeError);
    CHECK_THROWS_AS(smoothness_penalty_grad(act, gram3), ShapeError);
}

TEST_CASE("gram matrix is symmetric, unit diagonal, PSD in quadratic form") {
    Rng rng(77);
    Vector centers{-2.2, -0.9, 0.1, 1.3, 2.8};
    auto dict = make_dict(centers, 0.9);
    const GramMatrix gram = gram_matrix(*dict);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(gram.entries(i, i) == 1.0);
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(gram.entries(i, j) == gram.entries(j, i));
        }
    }
    for (int trial = 0; trial < 1000; ++trial) {
        Vector alpha(5);
        for (auto& x : alpha) x = rng.uniform(-3.0, 3.0);
        const KernelActivation act(dict, alpha);
        CHECK(smoothness_penalty(act, gram) >= -1e-10);
    }
}

TEST_CASE("activation is bounded by the coefficient l1 norm and decays to zero") {
    Rng rng(88);
    auto dict = make_dict({-1.5, 0.0, 0.7, 2.2}, 0.8);
    for (int trial = 0; trial < 50; ++trial) {
        Vector alpha(4);
        double l1 = 0.0;
        for (auto& x : alpha) {
            x = rng.uniform(-2.0, 2.0);
            l1 += std::fabs(x);
        }
        const KernelActivation act(dict, alpha);
        for (int probe = 0; probe < 10; ++probe) {
            const double a = rng.uniform(-10.0, 10.0);
            CHECK(std::fabs(act(a)) <= l1 + 1e-12);
        }
        // Gaussian tail: essentially zero 20 bandwidths past the last center
        const double far = 2.2 + 20.0 * 0.8;
        CHECK(std::fabs(act(far)) <= 1e-10 * l1 + 1e-300);
    }
}

TEST_CASE("alternating coefficients give a non-monotone activation") {
    const KernelDictionary dict = build_dictionary_uniform(-2.0, 2.0, 5, 1.0);
    auto dict_ptr = std::make_shared<const KernelDictionary>(dict);
    const KernelActivation act(dict_ptr, Vector{1.0, -1.0, 1.0, -1.0, 1.0});
    bool saw_pos = false;
    bool saw_neg = false;
    for (int i = 0; i <= 400; ++i) {
        const double a = -2.0 + 4.0 * i / 400.0;
        const double s = act.grad_input(a);
        saw_pos = saw_pos || s > 1e-6;
        saw_neg = saw_neg || s < -1e-6;
    }
    CHECK(saw_pos);
    CHECK(saw_neg);
}
