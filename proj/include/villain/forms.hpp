#pragma once

#include <Eigen/SparseCore>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "villain/lattice.hpp"

namespace villain {

using LatticePtr = std::shared_ptr<const Lattice>;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline LatticePtr make_lattice(const LatticeSpec& spec) { return std::make_shared<const Lattice>(spec); }

// One value per positively oriented k-cell, in canonical order. Under a Zero
// box the values on boundary cells are kept at exactly 0.
template <class T>
class Form {
public:
    Form() = default;
    Form(LatticePtr lat, int k) : lat_(std::move(lat)), k_(k)
    {
        if (k_ < 0 || k_ > lat_->dim()) throw DegreeError("form degree out of range");
        v_.assign(lat_->count(k_), T(0));
    }

    const LatticePtr& lattice() const { return lat_; }
    int degree() const { return k_; }
    std::size_t size() const { return v_.size(); }
    bool zero_mode() const { return lat_->boundary() == Boundary::Zero; }

    T operator[](std::size_t i) const { return v_[i]; }
    T& operator[](std::size_t i) { return v_[i]; }
    std::vector<T>& values() { return v_; }
    const std::vector<T>& values() const { return v_; }

    T at(const CellKey& c) const { return c.sign * v_[lat_->index(c)]; }
    void set(const CellKey& c, T value)
    {
        const std::size_t i = lat_->index(c);
        const T v = c.sign > 0 ? value : -value;
        if (zero_mode() && lat_->is_boundary(k_, i) && v != T(0))
            throw std::invalid_argument("nonzero value on a boundary cell of a zero-boundary form");
        v_[i] = v;
    }
    void enforce_boundary()
    {
        if (!zero_mode()) return;
        for (std::size_t i = 0; i < v_.size(); ++i)
            if (lat_->is_boundary(k_, i)) v_[i] = T(0);
    }
    bool is_zero() const
    {
        for (const T& x : v_)
            if (x != T(0)) return false;
        return true;
    }

private:
    LatticePtr lat_;
    int k_ = 0;
    std::vector<T> v_;
};

using RealForm = Form<double>;
using IntForm = Form<std::int64_t>;

RealForm to_real(const IntForm& f);

double inner(const RealForm& a, const RealForm& b);
std::int64_t inner(const IntForm& a, const IntForm& b);
double norm2(const RealForm& a);

RealForm d(const RealForm& f);
IntForm d(const IntForm& f);

// d* = -d^T. The Zero variant forces the output to 0 on boundary cells.
// The mode must match the lattice's boundary condition.
RealForm d_star(const RealForm& f, Mode mode);
IntForm d_star(const IntForm& f, Mode mode);
RealForm d_star(const RealForm& f);
IntForm d_star(const IntForm& f);

RealForm laplacian(const RealForm& f, Mode mode);
RealForm laplacian(const RealForm& f);

// Integer k-form n_q with d n_q = q for a closed integer (k+1)-form q.
// Deterministic and linear; zero-boundary specs yield a zero-boundary preimage.
IntForm integer_preimage(const IntForm& q);

// Sparse matrix of d from degree k to k+1 (rows: (k+1)-cells).
SpMat d_matrix(const Lattice& lat, int k);

// Degrees of freedom of k-forms: all cells (Free) or non-boundary cells (Zero).
std::vector<std::int32_t> form_dofs(const Lattice& lat, int k, Mode mode);

// -Laplacian on k-forms restricted to the dofs, symmetric positive semidefinite.
SpMat neg_laplacian_matrix(const Lattice& lat, int k, Mode mode);

void check_mode(const Lattice& lat, Mode mode);

// Form snapshot: little-endian header (magic, version, n, j, k, boundary,
// payload type, box bounds, count, config hash, code version) followed by the
// flat value array. Version 1 files (no tag) are still read.
struct SnapshotTag {
    std::uint64_t config_hash = 0;
    std::string code_version;
};
void save_snapshot(const std::string& path, const RealForm& f, const SnapshotTag& tag = {});
void save_snapshot(const std::string& path, const IntForm& f, const SnapshotTag& tag = {});
SnapshotTag read_snapshot_tag(const std::string& path);
RealForm load_real_snapshot(const std::string& path);
IntForm load_int_snapshot(const std::string& path);

}  // namespace villain
