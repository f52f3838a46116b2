#include "villain/decouple.hpp"

#include <cmath>
#include <stdexcept>

namespace villain {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;

// Non-boundary cell of degree k closest to the centre of the box, skipping `avoid`.
std::int32_t central_cell(const Lattice& lat, int k, std::uint32_t mask, std::int32_t avoid = -1)
{
    const auto& s = lat.spec();
    std::int32_t best = -1;
    double bd = INFINITY;
    for (std::size_t i = 0; i < lat.count(k); ++i) {
        if (lat.is_boundary(k, i) || static_cast<std::int32_t>(i) == avoid) continue;
        const CellKey c = lat.cell(k, i);
        if (mask && c.dirs != mask) continue;
        double dist = 0;
        for (int a = 0; a < s.n; ++a) {
            const double mid = 0.5 * (s.lo[a] + s.hi[a]);
            const double x = c.base[a] + (c.has(a) ? 0.5 : 0.0) - mid;
            dist += x * x;
        }
        if (dist < bd) {
            bd = dist;
            best = static_cast<std::int32_t>(i);
        }
    }
    if (best < 0) throw std::invalid_argument("no interior cell available for the panel");
    return best;
}

}  // namespace

Decomposer::Decomposer(LatticePtr lat, int p, SolveSettings s) : lat_(std::move(lat)), p_(p), mode_(lat_->boundary())
{
    if (p < 0 || p >= lat_->dim()) throw DegreeError("theta degree out of range");
    if (p + 2 <= lat_->dim()) charge_solver_ = std::make_unique<PoissonSolver>(lat_, p + 2, mode_, s);
}

RealForm Decomposer::upper_part(const IntForm& m, double* coulomb_energy) const
{
    RealForm up(lat_, p_ + 1);
    if (coulomb_energy) *coulomb_energy = 0.0;
    if (!charge_solver_) return up;
    const IntForm q = d(m);
    if (q.is_zero()) return up;
    const RealForm qr = to_real(q);
    const RealForm u = charge_solver_->solve(qr);
    if (coulomb_energy) *coulomb_energy = -inner(qr, u);
    return d_star(u, mode_);
}

DecoupledPair Decomposer::decompose(const VillainState& st) const
{
    if (st.p != p_ || !(st.lat->spec() == lat_->spec())) throw std::invalid_argument("state does not match the decomposer");
    DecoupledPair out;
    out.q = d(st.m);
    const RealForm up = upper_part(st.m, &out.coulomb_energy);
    out.rho = d(st.theta);
    for (std::size_t i = 0; i < out.rho.size(); ++i) out.rho[i] += kTwoPi * (static_cast<double>(st.m[i]) - up[i]);
    return out;
}

DecoupledPair decompose(const VillainState& st, const SolveSettings& s)
{
    Decomposer dec(st.lat, st.p, s);
    return dec.decompose(st);
}

GswSampler::GswSampler(LatticePtr lat, int p, double beta, SolveSettings s)
    : lat_(lat), k_(p + 1), beta_(beta), mode_(lat->boundary()), proj_(lat, p + 1, lat->boundary(), s),
      dofs_(form_dofs(*lat, p + 1, lat->boundary()))
{
    if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
}

RealForm GswSampler::draw(PhiloxStream& rng) const
{
    RealForm w(lat_, k_);
    const double sd = 1.0 / std::sqrt(beta_);
    for (auto i : dofs_) w[i] = sd * rng.normal();
    return proj_.apply(Projection::Lower, w);
}

RealForm gsw_sample(LatticePtr lat, double beta, PhiloxStream& rng, const SolveSettings& s)
{
    GswSampler g(std::move(lat), 1, beta, s);
    return g.draw(rng);
}

void coulomb_sample(LatticePtr lat, int p, const ChainConfig& cfg, long samples,
                    const std::function<void(const IntForm&, long)>& emit)
{
    if (lat->dim() < 2) throw std::invalid_argument("the Coulomb sampler needs n >= 2");
    if (p + 2 > lat->dim()) throw DegreeError("charges need p + 2 <= n");
    VillainChain chain(lat, p, cfg);
    chain.run(samples, [&](const VillainState& st, long i) {
        const IntForm q = d(st.m);
        emit(q, i);
    });
}

// ------------------------------------------------------------ independence

bool IndependenceReport::all_within_3se() const
{
    for (const auto& r : rows)
        if (!r.within_3se) return false;
    return true;
}

IndependenceAccumulator::IndependenceAccumulator(const Lattice& lat, int p)
{
    if (p + 2 > lat.dim()) throw DegreeError("independence panel needs charges");
    face_a_ = central_cell(lat, p + 1, 0);
    face_b_ = central_cell(lat, p + 1, 0, face_a_);
    cell_a_ = central_cell(lat, p + 2, 0);
    // Linear functional: the 2 x ... x 2 patch of (p+1)-cells parallel to face_a
    // ending at it. A patch spanning the box would sum d theta to its zero
    // boundary values and vanish identically.
    const CellKey a = lat.cell(p + 1, face_a_);
    for (std::size_t i = 0; i < lat.count(p + 1); ++i) {
        const CellKey c = lat.cell(p + 1, i);
        if (lat.is_boundary(p + 1, i) || c.dirs != a.dirs) continue;
        bool in = true;
        for (int k = 0; k < lat.dim() && in; ++k) {
            const int off = a.base[k] - c.base[k];
            in = a.has(k) ? (off == 0 || off == 1) : off == 0;
        }
        if (in) region_.push_back(static_cast<std::int32_t>(i));
    }
    rho_names_ = {"rho(f1)", "rho(f1)^2", "rho(f1)*rho(f2)", "<rho,1_S>", "|rho|^2"};
    q_names_ = {"q(c1)", "q(c1)^2", "|q|^2", "coulomb energy"};
    rho_series_.resize(rho_names_.size());
    q_series_.resize(q_names_.size());
}

void IndependenceAccumulator::add(const DecoupledPair& pr)
{
    const double a = pr.rho[face_a_], b = pr.rho[face_b_];
    double lin = 0;
    for (auto i : region_) lin += pr.rho[i];
    rho_series_[0].push_back(a);
    rho_series_[1].push_back(a * a);
    rho_series_[2].push_back(a * b);
    rho_series_[3].push_back(lin);
    rho_series_[4].push_back(norm2(pr.rho));
    const double qc = static_cast<double>(pr.q[cell_a_]);
    double q2 = 0;
    for (auto v : pr.q.values()) q2 += static_cast<double>(v) * static_cast<double>(v);
    q_series_[0].push_back(qc);
    q_series_[1].push_back(qc * qc);
    q_series_[2].push_back(q2);
    q_series_[3].push_back(pr.coulomb_energy);
}

IndependenceReport IndependenceAccumulator::report() const
{
    IndependenceReport rep;
    rep.samples = rho_series_[0].size();
    rep.underpowered = rep.samples < 1000;
    for (std::size_t i = 0; i < rho_series_.size(); ++i)
        for (std::size_t j = 0; j < q_series_.size(); ++j) {
            IndependenceRow r{rho_names_[i], q_names_[j], correlation(rho_series_[i], q_series_[j]), false};
            if (!std::isfinite(r.corr.se)) {
                // A constant q functional (no charges seen) is trivially independent.
                r.within_3se = true;
                rep.underpowered = true;
            } else {
                r.within_3se = std::abs(r.corr.mean) <= 3 * r.corr.se;
            }
            rep.rows.push_back(r);
        }
    for (std::size_t i : {std::size_t(0), std::size_t(3)}) {
        const Estimate e = batch_means(rho_series_[i]);
        const Estimate v = covariance(rho_series_[i], rho_series_[i]);
        // Effective sample size from the batch-means inflation of the variance.
        const double neff = e.se > 0 ? v.mean / (e.se * e.se) : static_cast<double>(rep.samples);
        const auto n = static_cast<std::size_t>(std::min<double>(neff, static_cast<double>(rep.samples)));
        rep.normality.push_back({rho_names_[i], normality(rho_series_[i], n)});
    }
    return rep;
}

}  // namespace villain
