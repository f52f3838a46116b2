#pragma once

#include <vector>

namespace villain {

enum class AxisBc { Dirichlet, Neumann };

// Graph Laplacian of a product of paths. A Dirichlet axis of size N has zero
// ghost vertices beyond both ends (eigenvectors sin); a Neumann axis simply
// lacks the outer neighbours (eigenvectors cos(pi k (x + 1/2) / N)).
// All functions work with the positive operator -L and flat row-major arrays.
class SeparableBox {
public:
    SeparableBox(std::vector<int> sizes, std::vector<AxisBc> bcs);

    int rank() const { return static_cast<int>(size_.size()); }
    const std::vector<int>& sizes() const { return size_; }
    const std::vector<AxisBc>& bcs() const { return bc_; }
    std::size_t volume() const;

    double eigenvalue(int axis, int k) const { return eig_[axis][k]; }
    // Orthonormal eigenvector entry phi_k(x) on one axis.
    double mode(int axis, int k, int x) const { return phi_[axis][static_cast<std::size_t>(k) * size_[axis] + x]; }
    bool singular() const;

    // Separable right-hand side: weight * prod_a factors[a][x_a].
    struct Term {
        double weight = 1.0;
        std::vector<std::vector<double>> factors;
    };

    // u = (-L)^{-1} rhs.
    std::vector<double> solve(const std::vector<double>& rhs) const;
    // <r, (-L)^{-1} r> for r a sum of separable terms.
    double quadratic_form(const std::vector<Term>& terms) const;
    // (-L)^{-1} r evaluated on the product grid prod_a points[a].
    std::vector<double> evaluate(const std::vector<Term>& terms, const std::vector<std::vector<int>>& points) const;
    // Green function entry G(x, y).
    double green(const std::vector<int>& x, const std::vector<int>& y) const;

    // Explicit -L as triplets, for cross-checks.
    struct Entry {
        std::size_t row, col;
        double value;
    };
    std::vector<Entry> matrix_entries() const;

private:
    std::vector<int> size_;
    std::vector<AxisBc> bc_;
    std::vector<std::vector<double>> eig_;
    std::vector<std::vector<double>> phi_;  // phi_[a][k * N + x]
};

// Apply M (rows x shape[axis]) along one axis of a row-major tensor.
std::vector<double> mode_product(const std::vector<double>& t, std::vector<int>& shape, int axis,
                                 const std::vector<double>& m, int rows);

}  // namespace villain
