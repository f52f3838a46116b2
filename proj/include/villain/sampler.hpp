#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "villain/forms.hpp"
#include "villain/ivgauss.hpp"
#include "villain/rng.hpp"

namespace villain {

// Joint Villain coupling: theta is a p-form with values in [-pi, pi), m an
// integer (p+1)-form. Under Zero both vanish on boundary cells.
struct VillainState {
    LatticePtr lat;
    int p = 1;
    RealForm theta;
    IntForm m;

    VillainState() = default;
    VillainState(LatticePtr l, int degree);
    // dtheta + 2 pi m.
    RealForm field_strength() const;
    double energy() const;  // <dtheta + 2 pi m, dtheta + 2 pi m>
    bool valid() const;     // range and boundary invariants
};

// How theta(c) is redrawn given everything else.
//  Lifted: draw u from the untruncated Gaussian conditional, set theta = wrap(u)
//    and move the integer part into m on the cofaces of c. This is an exact
//    heat bath on the joint (theta, m) fibre and keeps dtheta + 2 pi m equal to
//    the unwrapped draw.
//  Truncated: draw theta from the Gaussian truncated to [-pi, pi), m fixed.
enum class ThetaMove { Lifted, Truncated };
std::string to_string(ThetaMove t);
ThetaMove theta_move_from_string(const std::string& s);

struct ChainConfig {
    double beta = 1.0;
    long burn_in = -1;  // negative means ceil(50 beta)
    long thinning = 1;
    std::uint64_t seed = 1;
    std::uint32_t chain_id = 0;
    ThetaMove theta_move = ThetaMove::Lifted;
    int threads = 1;

    long resolved_burn_in() const;
    void validate() const;
};

// Gaussian N(mu, sigma^2) conditioned on [lo, hi): inverse CDF through erfc,
// with exponential rejection when the interval mass underflows.
double truncated_normal(double mu, double sigma, double lo, double hi, PhiloxStream& rng);

class VillainChain {
public:
    VillainChain(LatticePtr lat, int p, ChainConfig cfg);

    const ChainConfig& config() const { return cfg_; }
    const VillainState& state() const { return st_; }
    VillainState& mutable_state() { return st_; }
    long sweeps() const { return sweeps_; }

    // One Gibbs half-step each; a sweep is resample_m followed by resample_theta.
    void resample_m();
    void resample_theta();
    void sweep();

    void run_burn_in();
    // Runs `thinning` sweeps and returns the state.
    const VillainState& next_sample();
    // Burn-in, then `samples` thinned samples, each passed to `observe`.
    void run(long samples, const std::function<void(const VillainState&, long)>& observe);

    // Checkpoint: JSON header at `path` plus Form snapshots next to it.
    // Randomness is counter-based, so (header, snapshots) resume bit-exactly.
    void save_checkpoint(const std::string& path, std::uint64_t config_hash = 0) const;
    static VillainChain load_checkpoint(const std::string& path, std::uint64_t* config_hash = nullptr);

    // Colour classes of p-cells: cells in one class share no (p+1)-cell.
    const std::vector<std::vector<std::int32_t>>& colour_classes() const { return classes_; }

private:
    void update_theta_cell(std::int32_t c, std::uint32_t phase);

    LatticePtr lat_;
    ChainConfig cfg_;
    VillainState st_;
    IvgSampler ivg_;
    long sweeps_ = 0;
    std::vector<std::vector<std::int32_t>> classes_;
    std::vector<std::int32_t> m_cells_;  // (p+1)-cells that are resampled
};

}  // namespace villain
