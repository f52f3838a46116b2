#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

#include "villain/forms.hpp"
#include "villain/separable.hpp"

namespace villain {

struct SolveSettings {
    enum class Method { Auto, CG, Spectral };
    double tol = 1e-12;
    long max_iter = 0;  // 0 means 10 * number of unknowns
    bool diagonal_preconditioner = false;
    Method method = Method::Auto;
};

struct SolverError : std::runtime_error {
    double residual;
    SolverError(const std::string& msg, double r) : std::runtime_error(msg), residual(r) {}
};

// The 1-form Laplacian restricted to edges of direction i, seen as a vertex
// Laplacian on a box graph. Free: Dirichlet along i (edges sticking out of
// the box are zero boundary vertices), no outer neighbours transversally.
// Zero: no outer neighbours along i, Dirichlet transversally.
// Box graph of direction i for a spec, without building the lattice tables.
// `origin` maps graph vertex v to the edge with base v + origin.
SeparableBox direction_box(const LatticeSpec& s, int dir, Mode mode, std::vector<int>& origin, bool& empty);

class DirectionGraph {
public:
    DirectionGraph(const Lattice& lat, int direction, Mode mode);

    int direction() const { return dir_; }
    const SeparableBox& box() const { return box_; }
    // Graph vertex of an edge of direction i, or false if it is not an unknown.
    bool vertex_of(const CellKey& edge, std::vector<int>& v) const;
    CellKey edge_of(const std::vector<int>& v) const;
    // Explicit -Laplacian of the graph built from the adjacency rules.
    std::vector<SeparableBox::Entry> explicit_entries() const;
    double green(const CellKey& e, const CellKey& f) const;

private:
    const Lattice* lat_;
    int dir_;
    Mode mode_;
    std::vector<int> origin_;
    SeparableBox box_;
};

// Cached solver for Delta f = rhs on k-forms.
class PoissonSolver {
public:
    PoissonSolver(LatticePtr lat, int k, Mode mode, SolveSettings s = {});
    ~PoissonSolver();
    PoissonSolver(const PoissonSolver&) = delete;
    PoissonSolver& operator=(const PoissonSolver&) = delete;

    RealForm solve(const RealForm& rhs) const;
    int degree() const { return k_; }
    Mode mode() const { return mode_; }
    const LatticePtr& lattice() const { return lat_; }
    bool spectral() const { return !graphs_.empty(); }
    const std::vector<std::int32_t>& dofs() const { return dofs_; }

private:
    struct CgState;
    LatticePtr lat_;
    int k_;
    Mode mode_;
    SolveSettings settings_;
    std::vector<std::int32_t> dofs_;
    std::vector<DirectionGraph> graphs_;
    std::vector<std::vector<std::int32_t>> graph_cells_;  // edge index per graph vertex
    std::unique_ptr<CgState> cg_;
    bool singular_ = false;
};

RealForm solve_poisson(int k, const RealForm& rhs, Mode mode, const SolveSettings& s = {});

enum class Projection { Lower, Upper };

// Lower = d d* Delta^{-1}, Upper = d* d Delta^{-1} on k-forms, 0 <= k <= n.
class Projector {
public:
    Projector(LatticePtr lat, int k, Mode mode, SolveSettings s = {});
    RealForm apply(Projection which, const RealForm& f) const;
    int degree() const { return k_; }

private:
    LatticePtr lat_;
    int k_;
    Mode mode_;
    std::unique_ptr<PoissonSolver> lower_;  // degree k-1 (Lower = d Delta^{-1} d*)
    std::unique_ptr<PoissonSolver> upper_;  // degree k+1 (Upper = d* Delta^{-1} d)
};

RealForm project(int k, Projection which, const RealForm& f, Mode mode, const SolveSettings& s = {});

struct RankRow {
    int k;
    std::size_t cells;  // unknowns of degree k
    std::size_t lower;  // dim of the image of d from degree k-1
    std::size_t upper;  // dim of the image of d* from degree k+1
};

struct RankTable {
    LatticeSpec spec;
    std::vector<RankRow> rows;
    bool exact;
    double min_gap;  // smallest ratio between the smallest kept and largest dropped value
};

// Ranks of d between consecutive degrees (restricted to non-boundary cells
// under Zero). Numerical eigenvalue rank with a gap check, or exact rank
// modulo a large prime.
RankTable rank_table(const LatticeSpec& spec, bool exact = false);
std::size_t rank_of_d(const Lattice& lat, int k, Mode mode, bool exact, double* gap = nullptr);

// Number of k-cells (non-boundary ones under Zero), from the LatticeSpec alone.
std::size_t cell_count(const LatticeSpec& spec, int k, Mode mode);
// Rank of d from degree k without linear algebra: the Free complex of a box
// only has the constants as cohomology and the Zero one only the top class,
// so ranks follow from the cell counts by alternating sums.
std::size_t rank_by_counting(const LatticeSpec& spec, int k, Mode mode);

// Green entry of the 1-form Laplacian; zero between different directions.
double green_one_form(const CellKey& e, const CellKey& f, const Lattice& lat, Mode mode);

// Z^n Green function G(0, x) normalized as (-Delta)^{-1} with Delta of degree
// 2n, via the heat-kernel form int_0^inf prod_i e^{-2t} I_{x_i}(2t) dt.
double green_infinite_vertex(const std::vector<int>& x, int n);

struct CgffResult {
    double value;
    double partial;      // sum over |k| <= K
    double tail;         // estimated remainder
    double tail_spread;  // tail change between prefactors measured at K and K/2
    int K;
};

CgffResult c_gff_detail(int K);
double c_gff();

}  // namespace villain
