#include "villain/lattice.hpp"

#include <algorithm>
#include <bit>
#include <sstream>

namespace villain {

std::string to_string(Boundary b) { return b == Boundary::Free ? "free" : "zero"; }

Boundary boundary_from_string(const std::string& s)
{
    if (s == "free" || s == "Free") return Boundary::Free;
    if (s == "zero" || s == "Zero") return Boundary::Zero;
    throw std::invalid_argument("unknown boundary condition '" + s + "' (expected free|zero)");
}

LatticeSpec LatticeSpec::cube(int n, int j, Boundary b)
{
    if (n < 2) throw std::invalid_argument("dimension must be at least 2");
    if (j < 1) throw std::invalid_argument("half-side must be at least 1");
    return box(std::vector<int>(n, -j), std::vector<int>(n, j), b);
}

LatticeSpec LatticeSpec::box(std::vector<int> lo, std::vector<int> hi, Boundary b)
{
    LatticeSpec s;
    s.n = static_cast<int>(lo.size());
    s.lo = std::move(lo);
    s.hi = std::move(hi);
    s.boundary = b;
    s.validate();
    return s;
}

bool LatticeSpec::is_cube() const
{
    for (int a = 0; a < n; ++a)
        if (lo[a] != -hi[a] || hi[a] != hi[0]) return false;
    return true;
}

int LatticeSpec::half_side() const { return is_cube() ? hi[0] : -1; }

void LatticeSpec::validate() const
{
    if (n < 1 || n > kMaxDim) throw std::invalid_argument("dimension out of range");
    if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n)
        throw std::invalid_argument("box bounds do not match the dimension");
    for (int a = 0; a < n; ++a)
        if (hi[a] <= lo[a]) throw std::invalid_argument("empty box extent");
}

std::string LatticeSpec::describe() const
{
    std::ostringstream os;
    if (is_cube()) {
        os << "cube n=" << n << " j=" << hi[0];
    } else {
        os << "box n=" << n;
        for (int a = 0; a < n; ++a) os << " [" << lo[a] << "," << hi[a] << "]";
    }
    os << " " << to_string(boundary);
    return os.str();
}

bool operator==(const LatticeSpec& a, const LatticeSpec& b)
{
    return a.n == b.n && a.lo == b.lo && a.hi == b.hi && a.boundary == b.boundary;
}

int CellKey::degree() const { return std::popcount(dirs); }

std::vector<int> CellKey::dir_list() const
{
    std::vector<int> d;
    for (int a = 0; a < kMaxDim; ++a)
        if (has(a)) d.push_back(a);
    return d;
}

bool operator==(const CellKey& a, const CellKey& b)
{
    return a.base == b.base && a.dirs == b.dirs && a.sign == b.sign;
}

std::uint64_t binomial(int n, int k)
{
    if (k < 0 || k > n) return 0;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return r;
}

std::vector<Incidence> boundary_of(const CellKey& cell, int n)
{
    const int k = cell.degree();
    if (k == 0) throw DegreeError("boundary of a vertex is undefined");
    std::vector<Incidence> out;
    out.reserve(2 * k);
    int pos = 0;
    for (int a = 0; a < n; ++a) {
        if (!cell.has(a)) continue;
        ++pos;
        for (int eps = 0; eps < 2; ++eps) {
            CellKey f;
            f.base = cell.base;
            f.base[a] += eps;
            f.dirs = cell.dirs & ~(1u << a);
            f.sign = 1;
            const int s = ((eps + pos) % 2 == 0) ? 1 : -1;
            out.push_back({f, s * cell.sign});
        }
    }
    return out;
}

namespace {

// Direction masks of popcount k in lexicographic order of their index lists.
std::vector<std::uint32_t> masks_of_degree(int n, int k)
{
    std::vector<std::vector<int>> lists;
    std::vector<int> cur;
    auto rec = [&](auto&& self, int start) -> void {
        if (static_cast<int>(cur.size()) == k) {
            lists.push_back(cur);
            return;
        }
        for (int a = start; a < n; ++a) {
            cur.push_back(a);
            self(self, a + 1);
            cur.pop_back();
        }
    };
    rec(rec, 0);
    std::sort(lists.begin(), lists.end());
    std::vector<std::uint32_t> out;
    for (auto& l : lists) {
        std::uint32_t m = 0;
        for (int a : l) m |= 1u << a;
        out.push_back(m);
    }
    return out;
}

}  // namespace

Lattice::Lattice(LatticeSpec spec) : spec_(std::move(spec))
{
    spec_.validate();
    const int n = spec_.n;
    tab_.resize(n + 1);
    for (int k = 0; k <= n; ++k) {
        Table& t = tab_[k];
        t.masks = masks_of_degree(n, k);
        t.block_of_mask.assign(std::size_t(1) << n, -1);
        std::size_t off = 0;
        for (std::size_t b = 0; b < t.masks.size(); ++b) {
            Block blk{};
            blk.mask = t.masks[b];
            blk.offset = off;
            std::size_t size = 1;
            for (int a = 0; a < n; ++a) {
                blk.ext[a] = spec_.extent(a) + (((blk.mask >> a) & 1u) ? 0 : 1);
                size *= static_cast<std::size_t>(blk.ext[a]);
            }
            std::size_t st = 1;
            for (int a = n - 1; a >= 0; --a) {
                blk.stride[a] = st;
                st *= static_cast<std::size_t>(blk.ext[a]);
            }
            blk.size = size;
            off += size;
            t.block_of_mask[blk.mask] = static_cast<int>(b);
            t.blocks.push_back(blk);
        }
        t.total = off;
    }
    build_tables();
}

void Lattice::check_degree(int k) const
{
    if (k < 0 || k > spec_.n) throw DegreeError("degree " + std::to_string(k) + " out of range");
}

std::size_t Lattice::count(int k) const
{
    check_degree(k);
    return tab_[k].total;
}

bool Lattice::contains(const CellKey& c) const
{
    const int n = spec_.n;
    if (c.dirs >> n) return false;
    for (int a = 0; a < n; ++a) {
        const int top = c.base[a] + (c.has(a) ? 1 : 0);
        if (c.base[a] < spec_.lo[a] || top > spec_.hi[a]) return false;
    }
    return true;
}

std::size_t Lattice::index(const CellKey& c) const
{
    const int k = c.degree();
    check_degree(k);
    if (!contains(c)) throw std::out_of_range("cell outside the box");
    const Table& t = tab_[k];
    const Block& blk = t.blocks[t.block_of_mask[c.dirs]];
    std::size_t idx = blk.offset;
    for (int a = 0; a < spec_.n; ++a)
        idx += static_cast<std::size_t>(c.base[a] - spec_.lo[a]) * blk.stride[a];
    return idx;
}

CellKey Lattice::cell(int k, std::size_t idx) const
{
    check_degree(k);
    const Table& t = tab_[k];
    if (idx >= t.total) throw std::out_of_range("cell index out of range");
    auto it = std::upper_bound(t.blocks.begin(), t.blocks.end(), idx,
                               [](std::size_t v, const Block& b) { return v < b.offset; });
    const Block& blk = *(it - 1);
    std::size_t r = idx - blk.offset;
    CellKey c;
    c.dirs = blk.mask;
    for (int a = 0; a < spec_.n; ++a) {
        c.base[a] = spec_.lo[a] + static_cast<int>(r / blk.stride[a]);
        r %= blk.stride[a];
    }
    return c;
}

std::vector<CellKey> Lattice::enumerate_cells(int k) const
{
    std::vector<CellKey> out;
    out.reserve(count(k));
    for (std::size_t i = 0; i < tab_[k].total; ++i) out.push_back(cell(k, i));
    return out;
}

std::vector<Incidence> Lattice::boundary_of(const CellKey& c) const
{
    if (!contains(c)) throw std::out_of_range("cell outside the box");
    return villain::boundary_of(c, spec_.n);
}

std::vector<Incidence> Lattice::coboundary_of(const CellKey& c) const
{
    const int k = c.degree();
    check_degree(k);
    if (k == spec_.n) throw DegreeError("top-degree cells have no coboundary");
    const std::size_t i = index(c);
    const Table& t = tab_[k];
    std::vector<Incidence> out;
    for (std::int32_t p = t.cob_ptr[i]; p < t.cob_ptr[i + 1]; ++p) {
        CellKey w = cell(k + 1, static_cast<std::size_t>(t.cob_idx[p]));
        out.push_back({w, t.cob_sgn[p] * c.sign});
    }
    return out;
}

bool Lattice::is_boundary_cell(const CellKey& c) const
{
    if (!contains(c)) throw std::out_of_range("cell outside the box");
    for (int a = 0; a < spec_.n; ++a) {
        if (c.has(a)) continue;
        if (c.base[a] == spec_.lo[a] || c.base[a] == spec_.hi[a]) return true;
    }
    return false;
}

void Lattice::build_tables()
{
    const int n = spec_.n;
    for (int k = 0; k <= n; ++k) {
        Table& t = tab_[k];
        t.on_boundary.assign(t.total, 0);
        t.interior.clear();
        for (const Block& blk : t.blocks) {
            std::array<int, kMaxDim> x{};
            for (std::size_t r = 0; r < blk.size; ++r) {
                std::size_t rr = r;
                for (int a = 0; a < n; ++a) {
                    x[a] = static_cast<int>(rr / blk.stride[a]);
                    rr %= blk.stride[a];
                }
                bool bd = false;
                for (int a = 0; a < n && !bd; ++a) {
                    if ((blk.mask >> a) & 1u) continue;
                    if (x[a] == 0 || x[a] == spec_.extent(a)) bd = true;
                }
                const std::size_t idx = blk.offset + r;
                t.on_boundary[idx] = bd ? 1 : 0;
                if (!bd) t.interior.push_back(static_cast<std::int32_t>(idx));
            }
        }
        if (k == 0) continue;
        // Boundary table from the wedge formula, in closed-form index arithmetic.
        const Table& tl = tab_[k - 1];
        t.bnd_idx.assign(t.total * 2 * k, 0);
        t.bnd_sgn.assign(t.total * 2 * k, 0);
        for (const Block& blk : t.blocks) {
            std::array<int, kMaxDim> x{};
            for (std::size_t r = 0; r < blk.size; ++r) {
                std::size_t rr = r;
                for (int a = 0; a < n; ++a) {
                    x[a] = static_cast<int>(rr / blk.stride[a]);
                    rr %= blk.stride[a];
                }
                const std::size_t idx = blk.offset + r;
                std::size_t slot = idx * 2 * k;
                int pos = 0;
                for (int a = 0; a < n; ++a) {
                    if (!((blk.mask >> a) & 1u)) continue;
                    ++pos;
                    const Block& fb = tl.blocks[tl.block_of_mask[blk.mask & ~(1u << a)]];
                    std::size_t fi = fb.offset;
                    for (int b = 0; b < n; ++b) fi += static_cast<std::size_t>(x[b]) * fb.stride[b];
                    for (int eps = 0; eps < 2; ++eps) {
                        t.bnd_idx[slot] = static_cast<std::int32_t>(fi + (eps ? fb.stride[a] : 0));
                        t.bnd_sgn[slot] = static_cast<std::int8_t>(((eps + pos) % 2 == 0) ? 1 : -1);
                        ++slot;
                    }
                }
            }
        }
    }
    // Coboundary = transpose of the boundary tables.
    for (int k = 0; k < n; ++k) {
        Table& t = tab_[k];
        const Table& th = tab_[k + 1];
        const int w = 2 * (k + 1);
        t.cob_ptr.assign(t.total + 1, 0);
        for (std::size_t i = 0; i < th.total * w; ++i) t.cob_ptr[th.bnd_idx[i] + 1]++;
        for (std::size_t i = 0; i < t.total; ++i) t.cob_ptr[i + 1] += t.cob_ptr[i];
        t.cob_idx.assign(static_cast<std::size_t>(t.cob_ptr[t.total]), 0);
        t.cob_sgn.assign(t.cob_idx.size(), 0);
        std::vector<std::int32_t> fill(t.cob_ptr.begin(), t.cob_ptr.end() - 1);
        for (std::size_t c = 0; c < th.total; ++c) {
            for (int s = 0; s < w; ++s) {
                const std::int32_t v = th.bnd_idx[c * w + s];
                const std::int32_t p = fill[v]++;
                t.cob_idx[p] = static_cast<std::int32_t>(c);
                t.cob_sgn[p] = th.bnd_sgn[c * w + s];
            }
        }
    }
}

}  // namespace villain
