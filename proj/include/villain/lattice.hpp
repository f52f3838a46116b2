#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace villain {

inline constexpr int kMaxDim = 8;

enum class Boundary { Free, Zero };
using Mode = Boundary;

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

struct DegreeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Box prod_a [lo_a, hi_a] in Z^n. Cubes [-j, j]^n are the usual case.
struct LatticeSpec {
    int n = 4;
    std::vector<int> lo;
    std::vector<int> hi;
    Boundary boundary = Boundary::Free;

    static LatticeSpec cube(int n, int j, Boundary b);
    static LatticeSpec box(std::vector<int> lo, std::vector<int> hi, Boundary b);

    bool is_cube() const;
    int half_side() const;  // -1 for non-cubic boxes
    int extent(int a) const { return hi[a] - lo[a]; }
    void validate() const;
    std::string describe() const;
};

bool operator==(const LatticeSpec& a, const LatticeSpec& b);

// Oriented k-cell: corner `base`, spanned directions as a bit mask, orientation sign.
struct CellKey {
    std::array<int, kMaxDim> base{};
    std::uint32_t dirs = 0;
    int sign = 1;

    int degree() const;
    bool has(int a) const { return (dirs >> a) & 1u; }
    std::vector<int> dir_list() const;
    CellKey positive() const {
        CellKey c = *this;
        c.sign = 1;
        return c;
    }
    CellKey operator-() const {
        CellKey c = *this;
        c.sign = -sign;
        return c;
    }
};

bool operator==(const CellKey& a, const CellKey& b);

struct Incidence {
    CellKey cell;
    int coeff;
};

// Signed boundary of a cell, independent of any box: 2k entries.
std::vector<Incidence> boundary_of(const CellKey& cell, int n);

// Cell tables for one box. Cells of degree k are ordered by direction set
// (lexicographic on the sorted index list), then by base point (row-major,
// axis 0 slowest). Immutable after construction.
class Lattice {
public:
    explicit Lattice(LatticeSpec spec);

    const LatticeSpec& spec() const { return spec_; }
    int dim() const { return spec_.n; }
    Boundary boundary() const { return spec_.boundary; }

    std::size_t count(int k) const;
    bool contains(const CellKey& c) const;
    std::size_t index(const CellKey& c) const;
    CellKey cell(int k, std::size_t idx) const;
    std::vector<CellKey> enumerate_cells(int k) const;

    std::vector<Incidence> boundary_of(const CellKey& c) const;
    std::vector<Incidence> coboundary_of(const CellKey& c) const;

    // True iff the cell lies inside the topological boundary of the box.
    bool is_boundary_cell(const CellKey& c) const;
    bool is_boundary(int k, std::size_t idx) const { return tab_[k].on_boundary[idx] != 0; }
    const std::vector<std::int32_t>& interior(int k) const { return tab_[k].interior; }

    // Flat incidence tables. Boundary entries of cell i of degree k occupy
    // [2k i, 2k i + 2k) in bnd_index / bnd_sign (indices into degree k-1).
    const std::vector<std::int32_t>& bnd_index(int k) const { return tab_[k].bnd_idx; }
    const std::vector<std::int8_t>& bnd_sign(int k) const { return tab_[k].bnd_sgn; }
    // Coboundary CSR of degree k cells into degree k+1.
    const std::vector<std::int32_t>& cob_ptr(int k) const { return tab_[k].cob_ptr; }
    const std::vector<std::int32_t>& cob_index(int k) const { return tab_[k].cob_idx; }
    const std::vector<std::int8_t>& cob_sign(int k) const { return tab_[k].cob_sgn; }

    const std::vector<std::uint32_t>& dir_masks(int k) const { return tab_[k].masks; }

private:
    struct Block {
        std::uint32_t mask;
        std::size_t offset;
        std::size_t size;
        std::array<int, kMaxDim> ext;
        std::array<std::size_t, kMaxDim> stride;
    };
    struct Table {
        std::vector<std::uint32_t> masks;
        std::vector<Block> blocks;
        std::vector<int> block_of_mask;  // indexed by mask, -1 if absent
        std::size_t total = 0;
        std::vector<std::uint8_t> on_boundary;
        std::vector<std::int32_t> interior;
        std::vector<std::int32_t> bnd_idx;
        std::vector<std::int8_t> bnd_sgn;
        std::vector<std::int32_t> cob_ptr, cob_idx;
        std::vector<std::int8_t> cob_sgn;
    };

    void check_degree(int k) const;
    void build_tables();

    LatticeSpec spec_;
    std::vector<Table> tab_;
};

std::uint64_t binomial(int n, int k);

}  // namespace villain
