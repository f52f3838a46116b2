#pragma once

#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "villain/decouple.hpp"
#include "villain/harmonic.hpp"
#include "villain/sampler.hpp"
#include "villain/stats.hpp"

namespace villain {

// Rectangle R in the (i1, i2) plane with corner `corner`, L cells along i1 and
// H along i2; gamma is its oriented boundary.
struct RectLoop {
    int i1 = 0, i2 = 1;
    std::vector<int> corner;
    int L = 1, H = 1;

    // Rectangle centred in the box (rounded towards lo), transverse coordinates at the box centre.
    static RectLoop centered(const LatticeSpec& s, int L, int H, int i1 = 0, int i2 = 1);
    int perimeter() const { return 2 * (L + H); }
    // Distance from R to the box boundary.
    int margin(const LatticeSpec& s) const;
    // Throws unless the loop lies in the box with at least `min_margin` to spare.
    void validate(const LatticeSpec& s, int min_margin) const;
    std::vector<CellKey> faces() const;
    // Edges of gamma with their coefficients in the boundary of 1_R (all +-1).
    std::vector<Incidence> edges() const;
    std::string describe() const;
};

RealForm region_form(const RectLoop& loop, const LatticePtr& lat);  // 1_R
RealForm loop_form(const RectLoop& loop, const LatticePtr& lat);    // 1_gamma

// Product of e^{i theta(e)} along gamma.
std::complex<double> wilson(const RealForm& theta, const RectLoop& loop);

// ||P 1_R||^2 with P the projection onto the image of d on 1-forms, from the
// direction-graph Green functions. Only the LatticeSpec is used, so large boxes are fine.
double loop_energy(const RectLoop& loop, const LatticeSpec& spec, Mode mode);
// The same quantity from an explicit projection with conjugate gradients.
double loop_energy_full(const RectLoop& loop, const LatticePtr& lat, Mode mode, SolveSettings s = {});

struct SpreadProfile {
    double energy = 0;       // ||P 1_R||^2
    double heavy = 0;        // sum of v^2 over evaluated faces with |v| >= b
    double truncated = 0;    // ||v 1_{|v| < b}||^2, faces outside the window counted as light
    double ratio = 0;        // truncated / energy
    double border_max = 0;   // max |v| on the outer shell of the window
    int radius = 0;          // window half-width around R
    std::vector<double> inside;  // |v| on faces of R along the midline, distance k = 0.. from the i1 side
};

// v = P 1_R on every face within `radius` of R.
SpreadProfile spread_profile(const RectLoop& loop, const LatticeSpec& spec, Mode mode, double b, int radius = 6);

// ------------------------------------------------------------ MC measurements

struct MeasureReport {
    std::string name;
    std::vector<Check> checks;
    std::vector<std::pair<std::string, double>> info;
    bool underpowered = false;
    long samples = 0;
    Verdict verdict() const;
};

// Checks that become inconclusive when the target is within 5 s.e. of zero.
Check noise_gate(Check c, double target, double se);

// |E e^{i<m,h>}| against exp(-((1 - b K)/2) inf_a Var(a, (2 pi)^2 beta) <h_b, h_b>).
struct FourierBound {
    double value;
    double inf_var;
    double K;
    double hb_norm2;
};
FourierBound fourier_m_bound(double beta, const RealForm& h, double b);
MeasureReport fourier_m(VillainChain& chain, long samples, const RealForm& h, double b = 0.5);

// Average of Var(-dtheta(f)/(2 pi), (2 pi)^2 beta) over samples.
MeasureReport tilde_M_estimate(VillainChain& chain, long samples, std::int32_t face);

// E[<q,h>^2] against sum_f tilde_M(f) (d*h)(f)^2.
MeasureReport coulomb_variance_check(VillainChain& chain, long samples, const RealForm& h);

// E|dtheta + 2 pi m|^2 = dim/beta + (2 pi)^2 E<q, (-Delta)^{-1} q>.
MeasureReport energy_identity(VillainChain& chain, long samples);

// -(1/(8 (2j)^4)) E|dtheta + 2 pi m|^2 against the rank-corrected spin-wave floor.
// The upper bound -(C(n-1,p)/4)(1/(2 beta) + e^{-pi^2 (beta + delta)}/2) is reported, not checked.
MeasureReport free_energy_derivative(VillainChain& chain, long samples, double delta = 0.5);

// E[e^{i<dtheta,f>}] = exp(-|Pf|^2/(2 beta)) E[e^{2 pi i <m, Upper f>}] for integer f.
MeasureReport fourier_factorization(VillainChain& chain, long samples, const IntForm& f);

// Wilson loops of one shape averaged over a panel of placements (all
// translates and planes with the required margin, at most `max_placements`).
std::vector<RectLoop> loop_panel(const LatticeSpec& s, int L, int H, int margin, std::size_t max_placements = 0);

struct WilsonOptions {
    int L = 3, H = 3;
    int margin = -1;           // default max(L, H)
    bool one_sided = false;    // McBryan-Spencer upper bound only
    double rel_tol = 0.10;     // relative tolerance of the two-sided check
    std::size_t max_placements = 0;
};
MeasureReport wilson_experiment(VillainChain& chain, long samples, const WilsonOptions& opt);

}  // namespace villain
