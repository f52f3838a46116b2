#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "villain/harmonic.hpp"
#include "villain/sampler.hpp"
#include "villain/stats.hpp"

namespace villain {

// rho = dtheta + 2 pi P_lower m (gradient spin wave), q = dm (Coulomb charge).
struct DecoupledPair {
    RealForm rho;
    IntForm q;
    double coulomb_energy = 0.0;  // <q, (-Delta)^{-1} q>
};

// Reusable decomposition for one lattice and theta degree. The Lower
// projection of m is m minus its Upper part d* Delta^{-1} d m, which only
// needs a solve when the charge q = dm is nonzero.
class Decomposer {
public:
    Decomposer(LatticePtr lat, int p, SolveSettings s = {});
    DecoupledPair decompose(const VillainState& st) const;
    // P_upper m = d* Delta^{-1} dm together with <q, (-Delta)^{-1} q>.
    RealForm upper_part(const IntForm& m, double* coulomb_energy = nullptr) const;

private:
    LatticePtr lat_;
    int p_;
    Mode mode_;
    std::unique_ptr<PoissonSolver> charge_solver_;  // degree p + 2, absent when p + 2 > n
};

DecoupledPair decompose(const VillainState& st, const SolveSettings& s = {});

// Gradient spin wave on (p+1)-forms: project white noise of variance 1/beta
// onto the image of d.
class GswSampler {
public:
    GswSampler(LatticePtr lat, int p, double beta, SolveSettings s = {});
    RealForm draw(PhiloxStream& rng) const;
    const Projector& projector() const { return proj_; }

private:
    LatticePtr lat_;
    int k_;
    double beta_;
    Mode mode_;
    Projector proj_;
    std::vector<std::int32_t> dofs_;
};

RealForm gsw_sample(LatticePtr lat, double beta, PhiloxStream& rng, const SolveSettings& s = {});

// Local-update Coulomb gas: a Villain chain with theta of degree p, emitting
// q = dm after each thinned sample. p = n - 2 gives the n-form gas, p = 1 the
// gauge-theory charges on 3-forms.
void coulomb_sample(LatticePtr lat, int p, const ChainConfig& cfg, long samples,
                    const std::function<void(const IntForm& q, long index)>& emit);

// Correlations between functionals of rho and functionals of q.
struct IndependenceRow {
    std::string rho_name, q_name;
    Estimate corr;
    bool within_3se;
};

struct NormalityRow {
    std::string name;
    ShapeTest shape;
};

struct IndependenceReport {
    std::vector<IndependenceRow> rows;
    std::vector<NormalityRow> normality;
    std::size_t samples = 0;
    bool underpowered = false;  // fewer than 1000 samples or a degenerate panel
    bool all_within_3se() const;
};

class IndependenceAccumulator {
public:
    explicit IndependenceAccumulator(const Lattice& lat, int p);
    void add(const DecoupledPair& pair);
    IndependenceReport report() const;
    // (p+1)-cells of the linear test functional <rho, 1_S>.
    const std::vector<std::int32_t>& region() const { return region_; }

private:
    std::vector<std::string> rho_names_, q_names_;
    std::vector<std::vector<double>> rho_series_, q_series_;
    std::int32_t face_a_, face_b_, cell_a_;
    std::vector<std::int32_t> region_;  // faces of the linear test functional
};

}  // namespace villain
