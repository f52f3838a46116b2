#include "villain/forms.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace villain {

namespace {

template <class T>
void require_same(const Form<T>& a, const Form<T>& b)
{
    if (a.degree() != b.degree()) throw DegreeError("degree mismatch");
    if (a.lattice() != b.lattice() && !(a.lattice()->spec() == b.lattice()->spec()))
        throw std::invalid_argument("lattice mismatch");
}

template <class T>
Form<T> d_impl(const Form<T>& f)
{
    const Lattice& L = *f.lattice();
    const int k = f.degree();
    if (k == L.dim()) return Form<T>(f.lattice(), k);
    Form<T> out(f.lattice(), k + 1);
    const auto& idx = L.bnd_index(k + 1);
    const auto& sgn = L.bnd_sign(k + 1);
    const int w = 2 * (k + 1);
    const auto& src = f.values();
    auto& dst = out.values();
    for (std::size_t c = 0; c < dst.size(); ++c) {
        T s = 0;
        const std::size_t o = c * w;
        for (int j = 0; j < w; ++j) s += sgn[o + j] * src[idx[o + j]];
        dst[c] = s;
    }
    return out;
}

template <class T>
Form<T> d_star_impl(const Form<T>& f, Mode mode)
{
    const Lattice& L = *f.lattice();
    check_mode(L, mode);
    const int k = f.degree();
    if (k == 0) throw DegreeError("d* of a 0-form is undefined");
    Form<T> out(f.lattice(), k - 1);
    const auto& ptr = L.cob_ptr(k - 1);
    const auto& idx = L.cob_index(k - 1);
    const auto& sgn = L.cob_sign(k - 1);
    const auto& src = f.values();
    auto& dst = out.values();
    for (std::size_t v = 0; v < dst.size(); ++v) {
        if (mode == Mode::Zero && L.is_boundary(k - 1, v)) continue;
        T s = 0;
        for (std::int32_t p = ptr[v]; p < ptr[v + 1]; ++p) s += sgn[p] * src[idx[p]];
        dst[v] = -s;
    }
    return out;
}

}  // namespace

void check_mode(const Lattice& lat, Mode mode)
{
    if (mode != lat.boundary())
        throw std::invalid_argument("boundary mode '" + to_string(mode) + "' does not match a " +
                                    to_string(lat.boundary()) + "-boundary lattice");
}

RealForm to_real(const IntForm& f)
{
    RealForm r(f.lattice(), f.degree());
    for (std::size_t i = 0; i < f.size(); ++i) r[i] = static_cast<double>(f[i]);
    return r;
}

double inner(const RealForm& a, const RealForm& b)
{
    require_same(a, b);
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::int64_t inner(const IntForm& a, const IntForm& b)
{
    require_same(a, b);
    std::int64_t s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const RealForm& a) { return inner(a, a); }

RealForm d(const RealForm& f) { return d_impl(f); }
IntForm d(const IntForm& f) { return d_impl(f); }
RealForm d_star(const RealForm& f, Mode mode) { return d_star_impl(f, mode); }
IntForm d_star(const IntForm& f, Mode mode) { return d_star_impl(f, mode); }
RealForm d_star(const RealForm& f) { return d_star_impl(f, f.lattice()->boundary()); }
IntForm d_star(const IntForm& f) { return d_star_impl(f, f.lattice()->boundary()); }

RealForm laplacian(const RealForm& f, Mode mode)
{
    const int k = f.degree();
    const int n = f.lattice()->dim();
    check_mode(*f.lattice(), mode);
    RealForm out(f.lattice(), k);
    if (k > 0) {
        RealForm a = d(d_star(f, mode));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += a[i];
    }
    if (k < n) {
        RealForm b = d_star(d(f), mode);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    }
    return out;
}

RealForm laplacian(const RealForm& f) { return laplacian(f, f.lattice()->boundary()); }

SpMat d_matrix(const Lattice& lat, int k)
{
    if (k < 0 || k >= lat.dim()) throw DegreeError("d matrix degree out of range");
    const std::size_t rows = lat.count(k + 1), cols = lat.count(k);
    SpMat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const int w = 2 * (k + 1);
    m.reserve(Eigen::VectorXi::Constant(static_cast<Eigen::Index>(rows), w));
    const auto& idx = lat.bnd_index(k + 1);
    const auto& sgn = lat.bnd_sign(k + 1);
    for (std::size_t c = 0; c < rows; ++c)
        for (int j = 0; j < w; ++j)
            m.insert(static_cast<Eigen::Index>(c), idx[c * w + j]) = sgn[c * w + j];
    m.makeCompressed();
    return m;
}

std::vector<std::int32_t> form_dofs(const Lattice& lat, int k, Mode mode)
{
    check_mode(lat, mode);
    if (mode == Mode::Zero) return lat.interior(k);
    std::vector<std::int32_t> all(lat.count(k));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::int32_t>(i);
    return all;
}

SpMat neg_laplacian_matrix(const Lattice& lat, int k, Mode mode)
{
    const int n = lat.dim();
    const auto dofs = form_dofs(lat, k, mode);
    const Eigen::Index m = static_cast<Eigen::Index>(dofs.size());
    // Selection S: dofs x cells.
    auto selector = [&](int deg) {
        const auto ds = form_dofs(lat, deg, mode);
        SpMat s(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(lat.count(deg)));
        s.reserve(Eigen::VectorXi::Constant(static_cast<Eigen::Index>(ds.size()), 1));
        for (std::size_t i = 0; i < ds.size(); ++i) s.insert(static_cast<Eigen::Index>(i), ds[i]) = 1.0;
        s.makeCompressed();
        return s;
    };
    SpMat out(m, m);
    const SpMat S = selector(k);
    if (k > 0) {
        // d d*: d* from k to k-1 is -D^T masked to the (k-1)-dofs.
        const SpMat D = d_matrix(lat, k - 1);
        const SpMat Sl = selector(k - 1);
        const SpMat DS = Sl * SpMat(D.transpose()) * SpMat(S.transpose());
        const SpMat t = SpMat(DS.transpose()) * DS;
        out += t;
    }
    if (k < n) {
        const SpMat D = d_matrix(lat, k);
        const SpMat DS = D * SpMat(S.transpose());
        const SpMat t = SpMat(DS.transpose()) * DS;
        out += t;
    }
    out.prune(0.0);
    out.makeCompressed();
    return out;
}

namespace {

// Boxes of a sub-lattice obtained by dropping the last axis.
LatticeSpec drop_last_axis(const LatticeSpec& s)
{
    std::vector<int> lo(s.lo.begin(), s.lo.end() - 1), hi(s.hi.begin(), s.hi.end() - 1);
    return LatticeSpec::box(lo, hi, s.boundary);
}

using IVec = std::vector<std::int64_t>;

// Cone construction along the last axis a: values of degree k from a closed
// degree k+1 vector. Free: n = Hq + pi^* n' with n' a preimage of the bottom
// slice. Zero: subtract the fibre integral placed on the bottom layer, cone the
// remainder, and add the lifted preimage of the fibre integral.
IVec preimage_rec(const Lattice& L, int k, const IVec& q)
{
    const int n = L.dim();
    const int a = n - 1;
    const LatticeSpec& s = L.spec();
    const bool zero = s.boundary == Boundary::Zero;
    IVec out(L.count(k), 0);
    const std::int64_t sgn = (k % 2 == 0) ? 1 : -1;
    const std::uint32_t abit = 1u << a;

    std::unique_ptr<Lattice> Y;
    if (n > 1) Y = std::make_unique<Lattice>(drop_last_axis(s));

    IVec qq = q;  // remainder to cone
    IVec lift;    // correction on cells containing a (Zero) or bottom-slice values (Free)

    if (zero) {
        // Fibre integral E on degree-k cells of Y.
        if (n == 1) {
            // Y is a point: E is the total of q on the edges (k = 0 only).
            std::int64_t tot = 0;
            for (std::size_t i = 0; i < L.count(k + 1); ++i) tot += q[i];
            if (tot != 0) throw std::domain_error("no zero-boundary integer preimage exists");
            // Remainder has zero fibre integral; the cone alone suffices.
        } else if (k <= Y->dim()) {
            IVec E(Y->count(k), 0);
            bool nonzero = false;
            for (std::size_t i = 0; i < Y->count(k); ++i) {
                CellKey c = Y->cell(k, i);
                CellKey w = c;
                w.dirs |= abit;
                std::int64_t acc = 0;
                for (int t = s.lo[a]; t < s.hi[a]; ++t) {
                    w.base[a] = t;
                    acc += q[L.index(w)];
                }
                E[i] = acc;
                nonzero = nonzero || acc != 0;
            }
            if (nonzero) {
                if (k == 0) throw std::domain_error("no zero-boundary integer preimage exists");
                IVec NE = preimage_rec(*Y, k - 1, E);
                const int t0 = s.lo[a];
                for (std::size_t i = 0; i < Y->count(k); ++i) {
                    if (E[i] == 0) continue;
                    CellKey w = Y->cell(k, i);
                    w.dirs |= abit;
                    w.base[a] = t0;
                    qq[L.index(w)] -= E[i];
                }
                for (std::size_t i = 0; i < Y->count(k - 1); ++i) {
                    if (NE[i] == 0) continue;
                    CellKey w = Y->cell(k - 1, i);
                    w.dirs |= abit;
                    w.base[a] = t0;
                    out[L.index(w)] += NE[i];
                }
            }
        }
    } else if (n > 1 && k + 1 <= Y->dim()) {
        IVec slice(Y->count(k + 1), 0);
        for (std::size_t i = 0; i < Y->count(k + 1); ++i) {
            CellKey c = Y->cell(k + 1, i);
            c.base[a] = s.lo[a];
            slice[i] = q[L.index(c)];
        }
        lift = preimage_rec(*Y, k, slice);
    }

    // Cone along a for cells not containing a.
    for (std::size_t i = 0; i < L.count(k); ++i) {
        CellKey c = L.cell(k, i);
        if (c.has(a)) continue;
        std::int64_t acc = 0;
        CellKey w = c;
        w.dirs |= abit;
        for (int t = s.lo[a]; t < c.base[a]; ++t) {
            w.base[a] = t;
            acc += qq[L.index(w)];
        }
        out[i] += sgn * acc;
        if (!lift.empty()) {
            CellKey y = c;
            y.base[a] = 0;
            out[i] += lift[Y->index(y)];
        }
    }
    return out;
}

}  // namespace

IntForm integer_preimage(const IntForm& q)
{
    const Lattice& L = *q.lattice();
    const int kq = q.degree();
    if (kq == 0) throw DegreeError("a 0-form has no preimage under d");
    IntForm dq = d(q);
    if (!dq.is_zero()) throw std::domain_error("integer_preimage requires d(q) = 0");
    if (L.boundary() == Boundary::Zero)
        for (std::size_t i = 0; i < q.size(); ++i)
            if (L.is_boundary(kq, i) && q[i] != 0) throw std::domain_error("q must vanish on boundary cells");
    IntForm out(q.lattice(), kq - 1);
    if (q.is_zero()) return out;
    out.values() = preimage_rec(L, kq - 1, q.values());
    IntForm check = d(out);
    if (check.values() != q.values()) throw std::domain_error("no integer preimage found for q");
    return out;
}

// ---------------------------------------------------------------- snapshots

namespace {

constexpr char kMagic[8] = {'V', 'L', 'F', 'O', 'R', 'M', '0', '1'};

void put_u32(std::ostream& os, std::uint32_t v)
{
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}
void put_u64(std::ostream& os, std::uint64_t v)
{
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}
std::uint32_t get_u32(std::istream& is)
{
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated snapshot");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}
std::uint64_t get_u64(std::istream& is)
{
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated snapshot");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

void write_header(std::ostream& os, const Lattice& L, int k, std::uint32_t payload, const SnapshotTag& tag)
{
    const LatticeSpec& s = L.spec();
    os.write(kMagic, 8);
    put_u32(os, 2);
    put_u32(os, static_cast<std::uint32_t>(s.n));
    put_u32(os, static_cast<std::uint32_t>(static_cast<std::int32_t>(s.half_side())));
    put_u32(os, static_cast<std::uint32_t>(k));
    put_u32(os, s.boundary == Boundary::Zero ? 1u : 0u);
    put_u32(os, payload);
    for (int a = 0; a < s.n; ++a) {
        put_u32(os, static_cast<std::uint32_t>(s.lo[a]));
        put_u32(os, static_cast<std::uint32_t>(s.hi[a]));
    }
    put_u64(os, L.count(k));
    put_u64(os, tag.config_hash);
    put_u32(os, static_cast<std::uint32_t>(tag.code_version.size()));
    os.write(tag.code_version.data(), static_cast<std::streamsize>(tag.code_version.size()));
}

struct Header {
    LatticeSpec spec;
    int k;
    std::uint32_t payload;
    std::uint64_t count;
    SnapshotTag tag;
};

Header read_header(std::istream& is)
{
    char m[8];
    if (!is.read(m, 8) || std::memcmp(m, kMagic, 8) != 0) throw std::runtime_error("not a form snapshot");
    const std::uint32_t version = get_u32(is);
    if (version != 1 && version != 2) throw std::runtime_error("unsupported snapshot version");
    Header h;
    const int n = static_cast<int>(get_u32(is));
    if (n < 1 || n > kMaxDim) throw std::runtime_error("bad snapshot dimension");
    get_u32(is);  // half-side, informational
    h.k = static_cast<int>(get_u32(is));
    const Boundary b = get_u32(is) ? Boundary::Zero : Boundary::Free;
    h.payload = get_u32(is);
    std::vector<int> lo(n), hi(n);
    for (int a = 0; a < n; ++a) {
        lo[a] = static_cast<std::int32_t>(get_u32(is));
        hi[a] = static_cast<std::int32_t>(get_u32(is));
    }
    h.spec = LatticeSpec::box(lo, hi, b);
    h.count = get_u64(is);
    if (version == 2) {
        h.tag.config_hash = get_u64(is);
        const std::uint32_t len = get_u32(is);
        if (len > 4096) throw std::runtime_error("bad snapshot tag");
        h.tag.code_version.resize(len);
        if (len && !is.read(h.tag.code_version.data(), len)) throw std::runtime_error("truncated snapshot");
    }
    return h;
}

}  // namespace

void save_snapshot(const std::string& path, const RealForm& f, const SnapshotTag& tag)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_header(os, *f.lattice(), f.degree(), 0, tag);
    for (double v : f.values()) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(os, bits);
    }
}

void save_snapshot(const std::string& path, const IntForm& f, const SnapshotTag& tag)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_header(os, *f.lattice(), f.degree(), 1, tag);
    for (std::int64_t v : f.values()) put_u64(os, static_cast<std::uint64_t>(v));
}

RealForm load_real_snapshot(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    Header h = read_header(is);
    if (h.payload != 0) throw std::runtime_error("snapshot payload is not real");
    RealForm f(make_lattice(h.spec), h.k);
    if (f.size() != h.count) throw std::runtime_error("snapshot count mismatch");
    for (auto& v : f.values()) {
        std::uint64_t bits = get_u64(is);
        std::memcpy(&v, &bits, 8);
    }
    return f;
}

IntForm load_int_snapshot(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    Header h = read_header(is);
    if (h.payload != 1) throw std::runtime_error("snapshot payload is not integer");
    IntForm f(make_lattice(h.spec), h.k);
    if (f.size() != h.count) throw std::runtime_error("snapshot count mismatch");
    for (auto& v : f.values()) v = static_cast<std::int64_t>(get_u64(is));
    return f;
}

SnapshotTag read_snapshot_tag(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    return read_header(is).tag;
}

}  // namespace villain
