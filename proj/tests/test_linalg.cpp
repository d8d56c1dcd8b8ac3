#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sburgers/linalg.hpp"

using namespace sburgers;

TEST_CASE("thomas solve matches a hand-checked 4x4 system") {
    // A = tridiag(lower=-1, diag=2, upper=-1), x = [1,2,3,4]
    std::vector<double> lower{-1, -1, -1}, diag{2, 2, 2, 2}, upper{-1, -1, -1};
    std::vector<double> x{1, 2, 3, 4}, b(4, 0.0);
    b[0] = 2 * x[0] - x[1];
    for (int i = 1; i < 3; ++i) b[i] = -x[i - 1] + 2 * x[i] - x[i + 1];
    b[3] = -x[2] + 2 * x[3];
    std::vector<double> scratch;
    thomas_solve(lower, diag, upper, b, scratch);
    for (int i = 0; i < 4; ++i) REQUIRE(b[i] == Catch::Approx(x[i]).margin(1e-13));
}

TEST_CASE("cyclic thomas solve inverts a circulant system") {
    const std::size_t n = 9;
    std::vector<double> lower(n, -0.7), diag(n, 3.0), upper(n, -1.1);
    std::vector<double> x(n), b(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(0.4 * static_cast<double>(i) + 0.3);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t im = (i + n - 1) % n;
        const std::size_t ip = (i + 1) % n;
        b[i] = lower[i] * x[im] + diag[i] * x[i] + upper[i] * x[ip];
    }
    std::vector<double> work;
    cyclic_thomas_solve(lower, diag, upper, b, work);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(b[i] == Catch::Approx(x[i]).margin(1e-12));
}

TEST_CASE("cholesky solves an SPD system") {
    // A = M^T M + I with a fixed 3x3 M
    std::vector<double> m{1, 2, 0, 0, 1, 1, 2, 0, 1};
    std::vector<double> a(9, 0.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            for (int k = 0; k < 3; ++k) a[i * 3 + j] += m[k * 3 + i] * m[k * 3 + j];
            if (i == j) a[i * 3 + j] += 1.0;
        }
    std::vector<double> x{0.5, -1.25, 2.0}, b(3, 0.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b[i] += a[i * 3 + j] * x[j];
    REQUIRE(cholesky_factor(a, 3));
    cholesky_solve(a, 3, b);
    for (int i = 0; i < 3; ++i) REQUIRE(b[i] == Catch::Approx(x[i]).margin(1e-12));
}

TEST_CASE("tridiagonal eigensolver reproduces known eigenvalues") {
    // tridiag(-1, 2, -1) of size n has eigenvalues 2 - 2 cos(k pi / (n+1)).
    const std::size_t n = 12;
    std::vector<double> diag(n, 2.0), off(n - 1, -1.0), lambda, row;
    symmetric_tridiagonal_eigen_first_row(diag, off, lambda, row);
    std::sort(lambda.begin(), lambda.end());
    for (std::size_t k = 1; k <= n; ++k) {
        const double exact = 2.0 - 2.0 * std::cos(M_PI * static_cast<double>(k) /
                                                  static_cast<double>(n + 1));
        REQUIRE(lambda[k - 1] == Catch::Approx(exact).margin(1e-10));
    }
    // first-row components of normalized eigenvectors: squares sum to 1
    double s = 0.0;
    for (double v : row) s += v * v;
    REQUIRE(s == Catch::Approx(1.0).margin(1e-10));
}
