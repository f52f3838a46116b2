#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "villain/lattice.hpp"

using namespace villain;

namespace {

CellKey make_cell(std::vector<int> base, std::vector<int> dirs, int sign = 1)
{
    CellKey c;
    for (std::size_t a = 0; a < base.size(); ++a) c.base[a] = base[a];
    for (int d : dirs) c.dirs |= 1u << d;
    c.sign = sign;
    return c;
}

std::uint64_t ipow(std::uint64_t b, int e)
{
    std::uint64_t r = 1;
    while (e-- > 0) r *= b;
    return r;
}

}  // namespace

TEST_CASE("cell counts follow the product formula")
{
    for (int n = 2; n <= 4; ++n)
        for (int j = 1; j <= 3; ++j) {
            Lattice lat(LatticeSpec::cube(n, j, Boundary::Free));
            for (int k = 0; k <= n; ++k) {
                const auto expect = binomial(n, k) * ipow(2 * j + 1, n - k) * ipow(2 * j, k);
                CHECK(lat.count(k) == expect);
                CHECK(lat.enumerate_cells(k).size() == expect);
            }
        }
    Lattice l2(LatticeSpec::cube(2, 1, Boundary::Free));
    CHECK(l2.count(1) == 12);
    CHECK(l2.count(2) == 4);
    Lattice l4(LatticeSpec::cube(4, 1, Boundary::Free));
    CHECK(l4.count(1) == 216);
}

TEST_CASE("enumeration order is by direction set then base, and index inverts it")
{
    Lattice lat(LatticeSpec::cube(3, 2, Boundary::Free));
    for (int k = 0; k <= 3; ++k) {
        const auto cells = lat.enumerate_cells(k);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            CHECK(lat.index(cells[i]) == i);
            CHECK(lat.cell(k, i) == cells[i]);
            CHECK(cells[i].sign == 1);
        }
        for (std::size_t i = 1; i < cells.size(); ++i) {
            const auto a = cells[i - 1].dir_list(), b = cells[i].dir_list();
            CHECK(a <= b);
            if (a == b) {
                CHECK(std::lexicographical_compare(cells[i - 1].base.begin(), cells[i - 1].base.end(),
                                                   cells[i].base.begin(), cells[i].base.end()));
            }
        }
    }
}

TEST_CASE("degree errors")
{
    Lattice lat(LatticeSpec::cube(2, 1, Boundary::Free));
    CHECK_THROWS_AS(lat.enumerate_cells(3), DegreeError);
    CHECK_THROWS_AS(lat.enumerate_cells(-1), DegreeError);
    CHECK_THROWS_AS(lat.boundary_of(make_cell({0, 0}, {})), DegreeError);
    CHECK_THROWS_AS(lat.coboundary_of(make_cell({0, 0}, {0, 1})), DegreeError);
    CHECK_THROWS(LatticeSpec::cube(1, 1, Boundary::Free));
    CHECK_THROWS(LatticeSpec::cube(2, 0, Boundary::Free));
}

TEST_CASE("boundary of a unit edge")
{
    const auto b = boundary_of(make_cell({0, 0}, {0}), 2);
    REQUIRE(b.size() == 2);
    std::map<int, int> coeff;  // x coordinate of vertex -> coefficient
    for (const auto& inc : b) coeff[inc.cell.base[0]] += inc.coeff * inc.cell.sign;
    CHECK(coeff[1] == 1);
    CHECK(coeff[0] == -1);
}

TEST_CASE("boundary of the unit 3-cell has six faces with alternating signs")
{
    const auto b = boundary_of(make_cell({0, 0, 0}, {0, 1, 2}), 3);
    REQUIRE(b.size() == 6);
    // The face opposite direction i at height eps carries (-1)^(eps + position).
    for (const auto& inc : b) {
        int missing = -1;
        for (int a = 0; a < 3; ++a)
            if (!inc.cell.has(a)) missing = a;
        const int eps = inc.cell.base[missing];
        const int pos = missing + 1;
        CHECK(inc.coeff * inc.cell.sign == (((eps + pos) % 2 == 0) ? 1 : -1));
    }
}

TEST_CASE("double boundary cancels on every cell")
{
    for (int n = 2; n <= 4; ++n) {
        Lattice lat(LatticeSpec::cube(n, 1, Boundary::Free));
        for (int k = 2; k <= n; ++k)
            for (const auto& c : lat.enumerate_cells(k)) {
                std::map<std::size_t, int> acc;
                for (const auto& f : lat.boundary_of(c))
                    for (const auto& g : lat.boundary_of(f.cell)) acc[lat.index(g.cell)] += f.coeff * g.coeff * g.cell.sign * f.cell.sign;
                for (const auto& [idx, v] : acc) CHECK(v == 0);
            }
    }
}

TEST_CASE("incidence duality between boundary and coboundary")
{
    for (int n = 2; n <= 4; ++n) {
        Lattice lat(LatticeSpec::cube(n, 2, Boundary::Free));
        for (int k = 0; k < n; ++k) {
            std::map<std::pair<std::size_t, std::size_t>, int> up, down;
            for (const auto& v : lat.enumerate_cells(k))
                for (const auto& w : lat.coboundary_of(v)) up[{lat.index(v), lat.index(w.cell)}] = w.coeff * w.cell.sign;
            for (const auto& w : lat.enumerate_cells(k + 1))
                for (const auto& v : lat.boundary_of(w)) down[{lat.index(v.cell), lat.index(w)}] = v.coeff * v.cell.sign;
            CHECK(up == down);
        }
    }
}

TEST_CASE("coboundary counts")
{
    Lattice l4(LatticeSpec::cube(4, 2, Boundary::Free));
    CHECK(l4.coboundary_of(make_cell({0, 0, 0, 0}, {0})).size() == 6);
    // Edge inside the face x_2 = j, spanned by direction 0: fewer faces.
    CHECK(l4.coboundary_of(make_cell({0, 2, 0, 0}, {0})).size() < 6);
    Lattice l2(LatticeSpec::cube(2, 2, Boundary::Free));
    CHECK(l2.coboundary_of(make_cell({0, 0}, {})).size() == 4);
    CHECK(l2.coboundary_of(make_cell({2, 2}, {})).size() == 2);
}

TEST_CASE("boundary cell classification")
{
    const int j = 2;
    Lattice lat(LatticeSpec::cube(4, j, Boundary::Free));
    CHECK(lat.is_boundary_cell(make_cell({j, j, j, j}, {})));
    CHECK_FALSE(lat.is_boundary_cell(make_cell({j - 1, 0, 0, 0}, {0})));
    CHECK(lat.is_boundary_cell(make_cell({-j, -j, -j, -j}, {0, 1})));
    CHECK_FALSE(lat.is_boundary_cell(make_cell({-j, -j, 0, 0}, {0, 1})));
    // Corner-based definition agrees with the table on every cell.
    Lattice small(LatticeSpec::cube(3, 1, Boundary::Free));
    for (int k = 0; k <= 3; ++k)
        for (const auto& c : small.enumerate_cells(k)) {
            bool all = true;
            for (unsigned corner = 0; corner < (1u << 3); ++corner) {
                if (corner & ~c.dirs) continue;
                bool on = false;
                for (int a = 0; a < 3; ++a) {
                    const int x = c.base[a] + ((corner >> a) & 1);
                    on = on || x == -1 || x == 1;
                }
                all = all && on;
            }
            // All corners on the boundary of the box does not imply the cell is
            // in the boundary for k = n, but does for lower-dimensional faces of it.
            if (k < 3) {
                bool in_face = false;
                for (int a = 0; a < 3; ++a)
                    if (!c.has(a) && (c.base[a] == -1 || c.base[a] == 1)) in_face = true;
                CHECK(small.is_boundary_cell(c) == in_face);
            }
            CHECK(small.is_boundary(k, small.index(c)) == small.is_boundary_cell(c));
        }
}

TEST_CASE("per-axis boxes")
{
    Lattice lat(LatticeSpec::box({0, -1}, {3, 1}, Boundary::Free));
    CHECK(lat.count(0) == 4 * 3);
    CHECK(lat.count(1) == 3 * 3 + 4 * 2);
    CHECK(lat.count(2) == 3 * 2);
}
