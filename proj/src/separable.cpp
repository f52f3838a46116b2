#include "villain/separable.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace villain {

SeparableBox::SeparableBox(std::vector<int> sizes, std::vector<AxisBc> bcs) : size_(std::move(sizes)), bc_(std::move(bcs))
{
    if (size_.size() != bc_.size() || size_.empty()) throw std::invalid_argument("separable box: bad axes");
    const double pi = std::acos(-1.0);
    eig_.resize(size_.size());
    phi_.resize(size_.size());
    for (std::size_t a = 0; a < size_.size(); ++a) {
        const int N = size_[a];
        if (N < 1) throw std::invalid_argument("separable box: empty axis");
        eig_[a].resize(N);
        phi_[a].resize(static_cast<std::size_t>(N) * N);
        for (int k = 0; k < N; ++k) {
            if (bc_[a] == AxisBc::Dirichlet) {
                const double th = pi * (k + 1) / (N + 1);
                eig_[a][k] = 2.0 - 2.0 * std::cos(th);
                const double c = std::sqrt(2.0 / (N + 1));
                for (int x = 0; x < N; ++x) phi_[a][static_cast<std::size_t>(k) * N + x] = c * std::sin(th * (x + 1));
            } else {
                const double th = pi * k / N;
                eig_[a][k] = 2.0 - 2.0 * std::cos(th);
                const double c = k == 0 ? std::sqrt(1.0 / N) : std::sqrt(2.0 / N);
                for (int x = 0; x < N; ++x) phi_[a][static_cast<std::size_t>(k) * N + x] = c * std::cos(th * (x + 0.5));
            }
        }
    }
}

std::size_t SeparableBox::volume() const
{
    std::size_t v = 1;
    for (int s : size_) v *= static_cast<std::size_t>(s);
    return v;
}

bool SeparableBox::singular() const
{
    for (AxisBc b : bc_)
        if (b == AxisBc::Dirichlet) return false;
    return true;
}

std::vector<double> mode_product(const std::vector<double>& t, std::vector<int>& shape, int axis,
                                 const std::vector<double>& m, int rows)
{
    std::size_t pre = 1, post = 1;
    for (int b = 0; b < axis; ++b) pre *= static_cast<std::size_t>(shape[b]);
    for (std::size_t b = axis + 1; b < shape.size(); ++b) post *= static_cast<std::size_t>(shape[b]);
    const std::size_t N = static_cast<std::size_t>(shape[axis]);
    std::vector<double> out(pre * rows * post, 0.0);
    for (std::size_t p = 0; p < pre; ++p) {
        const double* src = t.data() + p * N * post;
        double* dst = out.data() + p * rows * post;
        for (int r = 0; r < rows; ++r) {
            double* o = dst + static_cast<std::size_t>(r) * post;
            const double* mr = m.data() + static_cast<std::size_t>(r) * N;
            for (std::size_t i = 0; i < N; ++i) {
                const double c = mr[i];
                if (c == 0.0) continue;
                const double* s = src + i * post;
                for (std::size_t q = 0; q < post; ++q) o[q] += c * s[q];
            }
        }
    }
    shape[axis] = rows;
    return out;
}

std::vector<double> SeparableBox::solve(const std::vector<double>& rhs) const
{
    if (rhs.size() != volume()) throw std::invalid_argument("separable solve: size mismatch");
    std::vector<int> shape = size_;
    std::vector<double> t = rhs;
    for (int a = 0; a < rank(); ++a) t = mode_product(t, shape, a, phi_[a], size_[a]);
    // Divide by the eigenvalue sum.
    std::vector<int> k(rank(), 0);
    for (std::size_t i = 0; i < t.size(); ++i) {
        double lam = 0;
        for (int a = 0; a < rank(); ++a) lam += eig_[a][k[a]];
        t[i] = lam > 0 ? t[i] / lam : 0.0;
        for (int a = rank() - 1; a >= 0; --a) {
            if (++k[a] < size_[a]) break;
            k[a] = 0;
        }
    }
    for (int a = 0; a < rank(); ++a) {
        const int N = size_[a];
        std::vector<double> tr(static_cast<std::size_t>(N) * N);
        for (int x = 0; x < N; ++x)
            for (int kk = 0; kk < N; ++kk) tr[static_cast<std::size_t>(x) * N + kk] = phi_[a][static_cast<std::size_t>(kk) * N + x];
        t = mode_product(t, shape, a, tr, N);
    }
    return t;
}

namespace {

// Per-term, per-axis spectral coefficients of the factors.
std::vector<std::vector<std::vector<double>>> transform_terms(const SeparableBox& box,
                                                              const std::vector<SeparableBox::Term>& terms)
{
    std::vector<std::vector<std::vector<double>>> out(terms.size());
    for (std::size_t t = 0; t < terms.size(); ++t) {
        if (static_cast<int>(terms[t].factors.size()) != box.rank())
            throw std::invalid_argument("separable term has the wrong number of factors");
        out[t].resize(box.rank());
        for (int a = 0; a < box.rank(); ++a) {
            const int N = box.sizes()[a];
            const auto& f = terms[t].factors[a];
            if (static_cast<int>(f.size()) != N) throw std::invalid_argument("separable factor has the wrong length");
            out[t][a].assign(N, 0.0);
            for (int k = 0; k < N; ++k) {
                double s = 0;
                for (int x = 0; x < N; ++x)
                    if (f[x] != 0.0) s += box.mode(a, k, x) * f[x];
                out[t][a][k] = s;
            }
        }
    }
    return out;
}

}  // namespace

double SeparableBox::quadratic_form(const std::vector<Term>& terms) const
{
    const auto fh = transform_terms(*this, terms);
    const int n = rank();
    const std::size_t T = terms.size();
    std::vector<double> w(T);
    for (std::size_t t = 0; t < T; ++t) w[t] = terms[t].weight;
    double total = 0.0;
    std::vector<std::vector<double>> prod(n + 1, std::vector<double>(T));
    for (std::size_t t = 0; t < T; ++t) prod[0][t] = w[t];
    std::vector<double> lam(n + 1, 0.0);
    auto rec = [&](auto&& self, int a) -> void {
        if (a == n - 1) {
            const int N = size_[a];
            const auto& ev = eig_[a];
            double s = 0;
            for (int k = 0; k < N; ++k) {
                double c = 0;
                for (std::size_t t = 0; t < T; ++t) c += prod[a][t] * fh[t][a][k];
                const double l = lam[a] + ev[k];
                if (l > 0) s += c * c / l;
            }
            total += s;
            return;
        }
        for (int k = 0; k < size_[a]; ++k) {
            bool any = false;
            for (std::size_t t = 0; t < T; ++t) {
                prod[a + 1][t] = prod[a][t] * fh[t][a][k];
                any = any || prod[a + 1][t] != 0.0;
            }
            if (!any) continue;
            lam[a + 1] = lam[a] + eig_[a][k];
            self(self, a + 1);
        }
    };
    rec(rec, 0);
    return total;
}

std::vector<double> SeparableBox::evaluate(const std::vector<Term>& terms, const std::vector<std::vector<int>>& points) const
{
    const int n = rank();
    if (static_cast<int>(points.size()) != n) throw std::invalid_argument("evaluate: one point list per axis");
    const auto fh = transform_terms(*this, terms);
    const std::size_t T = terms.size();
    // Dense axes are transformed at the end; sparse axes are contracted per block.
    std::vector<int> A, B;
    for (int a = 0; a < n; ++a) {
        for (int x : points[a])
            if (x < 0 || x >= size_[a]) throw std::out_of_range("evaluate: point outside the box");
        (2 * static_cast<int>(points[a].size()) >= size_[a] && size_[a] > 4 ? A : B).push_back(a);
    }
    // Keep the per-block buffer bounded: move the densest sparse axes to the dense side.
    auto block_size = [&] {
        std::size_t v = 1;
        for (int b : B) v *= static_cast<std::size_t>(size_[b]);
        return v;
    };
    while (B.size() > 1 && block_size() > (std::size_t(1) << 22)) {
        auto it = std::max_element(B.begin(), B.end(), [&](int x, int y) {
            return points[x].size() * static_cast<std::size_t>(size_[y]) < points[y].size() * static_cast<std::size_t>(size_[x]);
        });
        A.push_back(*it);
        B.erase(it);
    }
    std::sort(A.begin(), A.end());
    // Restricted mode matrices: rows = requested points, cols = k.
    std::vector<std::vector<double>> R(n);
    for (int a = 0; a < n; ++a) {
        const int N = size_[a];
        const int P = static_cast<int>(points[a].size());
        R[a].resize(static_cast<std::size_t>(P) * N);
        for (int p = 0; p < P; ++p)
            for (int k = 0; k < N; ++k) R[a][static_cast<std::size_t>(p) * N + k] = mode(a, k, points[a][p]);
    }
    std::size_t nA = 1, nB = 1, pB = 1;
    for (int a : A) nA *= static_cast<std::size_t>(size_[a]);
    for (int b : B) {
        nB *= static_cast<std::size_t>(size_[b]);
        pB *= points[b].size();
    }
    std::vector<double> W(nA * pB, 0.0);
    std::vector<int> kA(A.size(), 0);
    std::vector<double> block(nB);
    std::vector<int> kB(B.size(), 0);
    for (std::size_t ia = 0; ia < nA; ++ia) {
        std::vector<double> pa(T);
        double lamA = 0;
        for (std::size_t t = 0; t < T; ++t) pa[t] = terms[t].weight;
        for (std::size_t q = 0; q < A.size(); ++q) {
            lamA += eig_[A[q]][kA[q]];
            for (std::size_t t = 0; t < T; ++t) pa[t] *= fh[t][A[q]][kA[q]];
        }
        bool any = false;
        for (double v : pa) any = any || v != 0.0;
        if (any) {
            std::fill(kB.begin(), kB.end(), 0);
            for (std::size_t ib = 0; ib < nB; ++ib) {
                double lam = lamA, c = 0;
                for (std::size_t q = 0; q < B.size(); ++q) lam += eig_[B[q]][kB[q]];
                for (std::size_t t = 0; t < T; ++t) {
                    double v = pa[t];
                    for (std::size_t q = 0; q < B.size(); ++q) v *= fh[t][B[q]][kB[q]];
                    c += v;
                }
                block[ib] = lam > 0 ? c / lam : 0.0;
                for (int q = static_cast<int>(B.size()) - 1; q >= 0; --q) {
                    if (++kB[q] < size_[B[q]]) break;
                    kB[q] = 0;
                }
            }
            std::vector<int> shape;
            for (int b : B) shape.push_back(size_[b]);
            std::vector<double> cur = block;
            if (B.empty()) {
                shape.push_back(1);
            } else {
                for (std::size_t q = 0; q < B.size(); ++q)
                    cur = mode_product(cur, shape, static_cast<int>(q), R[B[q]], static_cast<int>(points[B[q]].size()));
            }
            std::copy(cur.begin(), cur.end(), W.begin() + static_cast<std::ptrdiff_t>(ia * pB));
        }
        for (int q = static_cast<int>(A.size()) - 1; q >= 0; --q) {
            if (++kA[q] < size_[A[q]]) break;
            kA[q] = 0;
        }
    }
    // Transform the dense axes.
    std::vector<int> shape;
    for (int a : A) shape.push_back(size_[a]);
    shape.push_back(static_cast<int>(pB));
    for (std::size_t q = 0; q < A.size(); ++q)
        W = mode_product(W, shape, static_cast<int>(q), R[A[q]], static_cast<int>(points[A[q]].size()));
    // Reorder from (A..., B...) to the natural axis order.
    std::vector<int> order = A;
    order.insert(order.end(), B.begin(), B.end());
    std::vector<std::size_t> outStride(n);
    std::size_t st = 1;
    for (int a = n - 1; a >= 0; --a) {
        outStride[a] = st;
        st *= points[a].size();
    }
    std::vector<double> out(st, 0.0);
    std::vector<int> idx(n, 0);  // index in permuted order
    for (std::size_t i = 0; i < W.size(); ++i) {
        std::size_t o = 0;
        for (int q = 0; q < n; ++q) o += static_cast<std::size_t>(idx[q]) * outStride[order[q]];
        out[o] = W[i];
        for (int q = n - 1; q >= 0; --q) {
            if (++idx[q] < static_cast<int>(points[order[q]].size())) break;
            idx[q] = 0;
        }
    }
    return out;
}

double SeparableBox::green(const std::vector<int>& x, const std::vector<int>& y) const
{
    Term t;
    t.factors.resize(rank());
    std::vector<std::vector<int>> pts(rank());
    for (int a = 0; a < rank(); ++a) {
        t.factors[a].assign(size_[a], 0.0);
        t.factors[a][y[a]] = 1.0;
        pts[a] = {x[a]};
    }
    return evaluate({t}, pts)[0];
}

std::vector<SeparableBox::Entry> SeparableBox::matrix_entries() const
{
    const int n = rank();
    std::vector<std::size_t> stride(n);
    std::size_t st = 1;
    for (int a = n - 1; a >= 0; --a) {
        stride[a] = st;
        st *= static_cast<std::size_t>(size_[a]);
    }
    std::vector<Entry> out;
    std::vector<int> x(n, 0);
    for (std::size_t i = 0; i < st; ++i) {
        double diag = 0;
        for (int a = 0; a < n; ++a) {
            for (int s : {-1, 1}) {
                const int y = x[a] + s;
                if (y >= 0 && y < size_[a]) {
                    diag += 1;
                    out.push_back({i, s > 0 ? i + stride[a] : i - stride[a], -1.0});
                } else if (bc_[a] == AxisBc::Dirichlet) {
                    diag += 1;
                }
            }
        }
        out.push_back({i, i, diag});
        for (int a = n - 1; a >= 0; --a) {
            if (++x[a] < size_[a]) break;
            x[a] = 0;
        }
    }
    return out;
}

}  // namespace villain
