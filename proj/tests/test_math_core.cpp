#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kbrn/linalg.hpp"
#include "kbrn/rng.hpp"

using namespace kbrn;

TEST_CASE("mat_vec identity and zero") {
    const Matrix id = Matrix::identity(3);
    const Vector v{1.0, 2.0, 3.0};
    CHECK(mat_vec(id, v) == v);

    const Matrix zero(2, 2);
    const Vector z = mat_vec(zero, Vector{5.0, 7.0});
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);
}

TEST_CASE("mat_vec hand-expanded 2x2") {
    Matrix m(2, 2);
    m(0, 0) = 1.0;
    m(0, 1) = 2.0;
    m(1, 0) = 3.0;
    m(1, 1) = 4.0;
    const Vector r = mat_vec(m, Vector{1.0, 1.0});
    // dot products expanded by hand: 1+2 and 3+4
    CHECK(r[0] == doctest::Approx(3.0));
    CHECK(r[1] == doctest::Approx(7.0));
}

TEST_CASE("mat_vec rejects shape mismatch naming both shapes") {
    const Matrix m(3, 4);
    try {
        mat_vec(m, Vector{1.0, 2.0});
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("3x4") != std::string::npos);
        CHECK(msg.find('2') != std::string::npos);
    }
}

TEST_CASE("mat_vec is linear") {
    Rng rng(11);
    Matrix m(4, 5);
    for (auto& x : m.data) x = rng.uniform(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Vector u(5), v(5);
        for (auto& x : u) x = rng.uniform(-1.0, 1.0);
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        const double a = rng.uniform(-1.0, 1.0);
        const double b = rng.uniform(-1.0, 1.0);
        Vector combo(5);
        for (std::size_t i = 0; i < 5; ++i) combo[i] = a * u[i] + b * v[i];
        const Vector lhs = mat_vec(m, combo);
        const Vector mu = mat_vec(m, u);
        const Vector mv = mat_vec(m, v);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(lhs[i] == doctest::Approx(a * mu[i] + b * mv[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("mat_tvec matches transpose of mat_vec") {
    Rng rng(12);
    Matrix m(3, 4);
    for (auto& x : m.data) x = rng.uniform(-1.0, 1.0);
    Vector u(3);
    for (auto& x : u) x = rng.uniform(-1.0, 1.0);
    const Vector got = mat_tvec(m, u);
    for (std::size_t j = 0; j < 4; ++j) {
        double want = 0.0;
        for (std::size_t i = 0; i < 3; ++i) want += m(i, j) * u[i];
        CHECK(got[j] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("solve_linear recovers known solution") {
    Rng rng(13);
    Matrix a(4, 4);
    for (auto& x : a.data) x = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < 4; ++i) a(i, i) += 3.0;  // well conditioned
    Vector want(4);
    for (auto& x : want) x = rng.uniform(-1.0, 1.0);
    const Vector b = mat_vec(a, want);
    const Vector got = solve_linear(a, b);
    for (std::size_t i = 0; i < 4; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
}

TEST_CASE("solve_linear reports singular matrix") {
    Matrix a(2, 2);
    a(0, 0) = 1.0;
    a(0, 1) = 2.0;
    a(1, 0) = 2.0;
    a(1, 1) = 4.0;
    CHECK_THROWS_AS(solve_linear(a, Vector{1.0, 1.0}), NumericalError);
}

TEST_CASE("sample_gaussian zero std gives the mean exactly") {
    Rng rng(42);
    const Vector v = sample_gaussian(rng, 0.0, 0.0, 4);
    for (double x : v) CHECK(x == 0.0);
    Rng rng2(42);
    const Vector v2 = sample_gaussian(rng2, 2.5, 0.0, 3);
    for (double x : v2) CHECK(x == 2.5);
}

TEST_CASE("sample_gaussian is reproducible from the seed alone") {
    Rng a(777);
    Rng b(777);
    const Vector va = sample_gaussian(a, 0.0, 1.0, 100);
    const Vector vb = sample_gaussian(b, 0.0, 1.0, 100);
    CHECK(va == vb);
}

TEST_CASE("sample_gaussian desk-scale law of large numbers") {
    Rng rng(2024);
    const Vector v = sample_gaussian(rng, 0.0, 1.0, 10000);
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= 10000.0;
    CHECK(std::fabs(mean) < 0.05);
}

TEST_CASE("sample_gaussian rejects negative std") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_gaussian(rng, 0.0, -1.0, 4), std::invalid_argument);
}

TEST_CASE("sample_uniform_int singleton and determinism") {
    Rng rng(5);
    CHECK(sample_uniform_int(rng, 3, 3) == 3);
    Rng a(99);
    Rng b(99);
    for (int i = 0; i < 50; ++i) {
        CHECK(sample_uniform_int(a, -7, 12) == sample_uniform_int(b, -7, 12));
    }
}

TEST_CASE("sample_uniform_int bucket frequencies") {
    Rng rng(31337);
    int counts[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i < 10000; ++i) counts[sample_uniform_int(rng, 0, 4)] += 1;
    for (int c : counts) {
        const double freq = c / 10000.0;
        CHECK(freq >= 0.17);
        CHECK(freq <= 0.23);
    }
}

TEST_CASE("sample_uniform_int rejects inverted range") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_uniform_int(rng, 4, 3), std::invalid_argument);
}
