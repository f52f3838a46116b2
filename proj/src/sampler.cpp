#include "villain/sampler.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "villain/config.hpp"

namespace villain {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;
constexpr double kPi = 3.141592653589793238463;
constexpr std::uint32_t kPhaseM = 1, kPhaseTheta = 2;

std::uint32_t stream_word(std::uint32_t chain_id, std::uint32_t phase) { return (chain_id << 8) | phase; }

double wrap(double x)
{
    double y = x - kTwoPi * std::floor((x + kPi) / kTwoPi);
    if (y >= kPi) y -= kTwoPi;
    if (y < -kPi) y = -kPi;
    return y;
}

}  // namespace

// ------------------------------------------------------------ state

VillainState::VillainState(LatticePtr l, int degree) : lat(std::move(l)), p(degree)
{
    if (p < 0 || p >= lat->dim()) throw DegreeError("theta degree must satisfy 0 <= p < n");
    theta = RealForm(lat, p);
    m = IntForm(lat, p + 1);
}

RealForm VillainState::field_strength() const
{
    RealForm f = d(theta);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += kTwoPi * static_cast<double>(m[i]);
    return f;
}

double VillainState::energy() const { return norm2(field_strength()); }

bool VillainState::valid() const
{
    for (double v : theta.values())
        if (!(v >= -kPi && v < kPi)) return false;
    if (lat->boundary() == Boundary::Zero) {
        for (std::size_t i = 0; i < theta.size(); ++i)
            if (lat->is_boundary(p, i) && theta[i] != 0.0) return false;
        for (std::size_t i = 0; i < m.size(); ++i)
            if (lat->is_boundary(p + 1, i) && m[i] != 0) return false;
    }
    return true;
}

std::string to_string(ThetaMove t) { return t == ThetaMove::Lifted ? "lifted" : "truncated"; }

ThetaMove theta_move_from_string(const std::string& s)
{
    if (s == "lifted") return ThetaMove::Lifted;
    if (s == "truncated") return ThetaMove::Truncated;
    throw std::invalid_argument("unknown theta move '" + s + "' (expected lifted or truncated)");
}

long ChainConfig::resolved_burn_in() const
{
    return burn_in >= 0 ? burn_in : static_cast<long>(std::ceil(50.0 * beta));
}

void ChainConfig::validate() const
{
    if (!(beta > 0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be positive");
    if (thinning < 1) throw std::invalid_argument("thinning must be at least 1");
    if (threads < 1) throw std::invalid_argument("threads must be at least 1");
    if (chain_id >= (1u << 24)) throw std::invalid_argument("chain id must fit in 24 bits");
}

// ------------------------------------------------------------ truncated normal

double truncated_normal(double mu, double sigma, double lo, double hi, PhiloxStream& rng)
{
    double a = (lo - mu) / sigma, b = (hi - mu) / sigma;
    // Work in the upper tail for numerical stability.
    bool flip = false;
    if (a + b < 0) {
        flip = true;
        const double t = a;
        a = -b;
        b = -t;
    }
    // Now a + b >= 0, so the heavier end is near a.
    double z;
    const double qa = 0.5 * std::erfc(a / std::sqrt(2.0)), qb = 0.5 * std::erfc(b / std::sqrt(2.0));
    if (qa - qb > 1e-300 && (qa - qb) > 1e-12 * qa) {
        const double u = rng.uniform();
        const double q = qa - u * (qa - qb);
        z = std::sqrt(2.0) * boost::math::erfc_inv(2.0 * q);
        z = std::clamp(z, a, b);
    } else {
        // Robert's exponential rejection on [a, b] with a > 0.
        const double lam = 0.5 * (a + std::sqrt(a * a + 4.0));
        for (;;) {
            z = a - std::log(rng.uniform()) / lam;
            if (z >= b) continue;
            if (rng.uniform() <= std::exp(-0.5 * (z - lam) * (z - lam))) break;
        }
    }
    if (flip) z = -z;
    double x = mu + sigma * z;
    if (x >= hi) x = std::nextafter(hi, lo);
    if (x < lo) x = lo;
    return x;
}

// ------------------------------------------------------------ chain

VillainChain::VillainChain(LatticePtr lat, int p, ChainConfig cfg)
    : lat_(std::move(lat)), cfg_(cfg), st_(lat_, p), ivg_(kTwoPi * kTwoPi * cfg.beta)
{
    cfg_.validate();
    const bool zero = lat_->boundary() == Boundary::Zero;
    // Colour by direction set and parity of the base point.
    const auto masks = lat_->dir_masks(p);
    std::vector<std::vector<std::int32_t>> cls(2 * masks.size());
    for (std::size_t i = 0; i < lat_->count(p); ++i) {
        if (zero && lat_->is_boundary(p, i)) continue;
        const CellKey c = lat_->cell(p, i);
        int s = 0;
        for (int a = 0; a < lat_->dim(); ++a) s += c.base[a];
        const std::size_t mi = std::find(masks.begin(), masks.end(), c.dirs) - masks.begin();
        cls[2 * mi + (s & 1)].push_back(static_cast<std::int32_t>(i));
    }
    for (auto& c : cls)
        if (!c.empty()) classes_.push_back(std::move(c));
    for (std::size_t i = 0; i < lat_->count(p + 1); ++i)
        if (!(zero && lat_->is_boundary(p + 1, i))) m_cells_.push_back(static_cast<std::int32_t>(i));
}

void VillainChain::resample_m()
{
    const int p = st_.p;
    const auto& bi = lat_->bnd_index(p + 1);
    const auto& bs = lat_->bnd_sign(p + 1);
    const int nb = 2 * (p + 1);
    const std::uint32_t word = stream_word(cfg_.chain_id, kPhaseM);
    const auto sweep = static_cast<std::uint32_t>(sweeps_);
    const auto& theta = st_.theta.values();
    auto& m = st_.m.values();
    const long n = static_cast<long>(m_cells_.size());
#pragma omp parallel for schedule(static) num_threads(cfg_.threads) if (cfg_.threads > 1)
    for (long t = 0; t < n; ++t) {
        const std::int32_t f = m_cells_[t];
        double dt = 0;
        for (int b = 0; b < nb; ++b) dt += bs[nb * f + b] * theta[bi[nb * f + b]];
        PhiloxStream rng(cfg_.seed, static_cast<std::uint32_t>(f), word, sweep);
        m[f] = ivg_.sample(-dt / kTwoPi, rng.uniform());
    }
}

void VillainChain::update_theta_cell(std::int32_t c, std::uint32_t word)
{
    const int p = st_.p;
    const auto& cp = lat_->cob_ptr(p);
    const auto& ci = lat_->cob_index(p);
    const auto& cs = lat_->cob_sign(p);
    const auto& bi = lat_->bnd_index(p + 1);
    const auto& bs = lat_->bnd_sign(p + 1);
    const int nb = 2 * (p + 1);
    auto& theta = st_.theta.values();
    auto& m = st_.m.values();
    PhiloxStream rng(cfg_.seed, static_cast<std::uint32_t>(c), word, static_cast<std::uint32_t>(sweeps_));
    const int kappa = cp[c + 1] - cp[c];
    if (kappa == 0) {
        theta[c] = -kPi + kTwoPi * rng.uniform();
        return;
    }
    double s = 0;
    for (int q = cp[c]; q < cp[c + 1]; ++q) {
        const std::int32_t f = ci[q];
        const int sig = cs[q];
        double r = kTwoPi * static_cast<double>(m[f]);
        for (int b = 0; b < nb; ++b) {
            const std::int32_t e = bi[nb * f + b];
            if (e != c) r += bs[nb * f + b] * theta[e];
        }
        s += sig * r;
    }
    const double mu = -s / kappa;
    const double sd = 1.0 / std::sqrt(cfg_.beta * kappa);
    if (cfg_.theta_move == ThetaMove::Truncated) {
        theta[c] = truncated_normal(mu, sd, -kPi, kPi, rng);
        return;
    }
    const double u = mu + sd * rng.normal();
    const double t = wrap(u);
    const auto k = static_cast<std::int64_t>(std::llround((u - t) / kTwoPi));
    theta[c] = t;
    if (k != 0)
        for (int q = cp[c]; q < cp[c + 1]; ++q) m[ci[q]] += cs[q] * k;
}

void VillainChain::resample_theta()
{
    const std::uint32_t word = stream_word(cfg_.chain_id, kPhaseTheta);
    for (const auto& cls : classes_) {
        const long n = static_cast<long>(cls.size());
#pragma omp parallel for schedule(static) num_threads(cfg_.threads) if (cfg_.threads > 1)
        for (long t = 0; t < n; ++t) update_theta_cell(cls[t], word);
    }
}

void VillainChain::sweep()
{
    resample_m();
    resample_theta();
    ++sweeps_;
}

void VillainChain::run_burn_in()
{
    while (sweeps_ < cfg_.resolved_burn_in()) sweep();
}

const VillainState& VillainChain::next_sample()
{
    for (long t = 0; t < cfg_.thinning; ++t) sweep();
    return st_;
}

void VillainChain::run(long samples, const std::function<void(const VillainState&, long)>& observe)
{
    run_burn_in();
    for (long s = 0; s < samples; ++s) observe(next_sample(), s);
}

void VillainChain::save_checkpoint(const std::string& path, std::uint64_t config_hash) const
{
    nlohmann::json h;
    h["format"] = "villain-chain";
    h["version"] = 1;
    h["config_hash"] = config_hash;
    h["sweeps"] = sweeps_;
    h["rng_counter"] = sweeps_;
    h["beta"] = cfg_.beta;
    h["burn_in"] = cfg_.burn_in;
    h["thinning"] = cfg_.thinning;
    h["seed"] = cfg_.seed;
    h["chain_id"] = cfg_.chain_id;
    h["theta_move"] = to_string(cfg_.theta_move);
    h["threads"] = cfg_.threads;
    h["p"] = st_.p;
    h["code_version"] = code_version();
    const SnapshotTag tag{config_hash, code_version()};
    save_snapshot(path + ".theta", st_.theta, tag);
    save_snapshot(path + ".m", st_.m, tag);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write checkpoint " + path);
    os << h.dump(2) << "\n";
}

VillainChain VillainChain::load_checkpoint(const std::string& path, std::uint64_t* config_hash)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read checkpoint " + path);
    const nlohmann::json h = nlohmann::json::parse(is);
    if (h.value("format", "") != "villain-chain" || h.value("version", 0) != 1)
        throw std::runtime_error("not a chain checkpoint: " + path);
    RealForm theta = load_real_snapshot(path + ".theta");
    IntForm m = load_int_snapshot(path + ".m");
    ChainConfig cfg;
    cfg.beta = h.at("beta").get<double>();
    cfg.burn_in = h.at("burn_in").get<long>();
    cfg.thinning = h.at("thinning").get<long>();
    cfg.seed = h.at("seed").get<std::uint64_t>();
    cfg.chain_id = h.at("chain_id").get<std::uint32_t>();
    cfg.theta_move = theta_move_from_string(h.at("theta_move").get<std::string>());
    cfg.threads = h.value("threads", 1);
    const int p = h.at("p").get<int>();
    if (theta.degree() != p || m.degree() != p + 1) throw std::runtime_error("checkpoint degrees are inconsistent");
    if (!(theta.lattice()->spec() == m.lattice()->spec())) throw std::runtime_error("checkpoint lattices differ");
    VillainChain chain(theta.lattice(), p, cfg);
    chain.st_.theta.values() = theta.values();
    chain.st_.m.values() = m.values();
    chain.sweeps_ = h.at("sweeps").get<long>();
    if (!chain.st_.valid()) throw std::runtime_error("checkpoint state violates the coupling invariants");
    if (config_hash) *config_hash = h.at("config_hash").get<std::uint64_t>();
    return chain;
}

}  // namespace villain
