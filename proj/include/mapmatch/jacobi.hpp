#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mapmatch {

/// Dense symmetric matrix in row-major order.
struct SymmetricEigen {
    std::vector<double> values;           // ascending
    std::vector<std::vector<double>> vectors;  // vectors[k] pairs with values[k], unit norm
};

/// Cyclic Jacobi eigendecomposition. Deterministic: fixed sweep order
/// (p < q, row-major), convergence when the off-diagonal Frobenius norm
/// drops below tol_factor times the Frobenius norm of the input.
inline SymmetricEigen jacobi_eigen(std::vector<std::vector<double>> a,
                                   double tol_factor = 1e-10, int max_sweeps = 100) {
    const std::size_t n = a.size();
    if (n == 0) throw std::invalid_argument("jacobi: empty matrix");
    for (const auto& row : a)
        if (row.size() != n) throw std::invalid_argument("jacobi: matrix not square");

    double frob = 0;
    for (const auto& row : a)
        for (double v : row) frob += v * v;
    frob = std::sqrt(frob);
    const double target = tol_factor * frob;

    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1;

    const auto off_norm = [&]() {
        double s = 0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) s += a[p][q] * a[p][q];
        return std::sqrt(2 * s);
    };

    int sweep = 0;
    while (off_norm() > target) {
        if (++sweep > max_sweeps)
            throw std::runtime_error("jacobi: no convergence within sweep limit");
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p][q];
                if (apq == 0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1);
                const double s = t * c;

                const double app = a[p][p], aqq = a[q][q];
                a[p][p] = app - t * apq;
                a[q][q] = aqq + t * apq;
                a[p][q] = 0;
                a[q][p] = 0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[p][k] = a[k][p];
                    a[k][q] = s * akp + c * akq;
                    a[q][k] = a[k][q];
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (a[x][x] != a[y][y]) return a[x][x] < a[y][y];
        return x < y;
    });

    SymmetricEigen out;
    out.values.reserve(n);
    out.vectors.reserve(n);
    for (std::size_t k : order) {
        out.values.push_back(a[k][k]);
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = v[i][k];
        out.vectors.push_back(std::move(col));
    }
    return out;
}

}  // namespace mapmatch
