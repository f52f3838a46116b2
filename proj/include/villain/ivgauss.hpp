#pragma once

#include <cstdint>
#include <vector>

#include "villain/rng.hpp"

namespace villain {

// Integer-valued Gaussian: P[X = k] proportional to exp(-beta/2 (k - a)^2).
struct IvgParams {
    double a = 0.0;
    double beta = 1.0;
};

// Integers k with |k - a| <= W, W = ceil(sqrt(2 ln(1e15) / beta)) + 1.
int ivg_window(double beta);

double ivg_pmf(const IvgParams& p, std::int64_t k);
double ivg_mean(const IvgParams& p);
double ivg_var(const IvgParams& p);
double ivg_t3(const IvgParams& p);  // E|X - mean|^3

// Inverse-CDF draw from a uniform u in (0, 1).
std::int64_t ivg_sample(const IvgParams& p, double u);
inline std::int64_t ivg_sample(const IvgParams& p, PhiloxStream& rng) { return ivg_sample(p, rng.uniform()); }

// Precomputed sampler for one inverse temperature: tables of the window
// weights for the reduced centre, reused across calls.
class IvgSampler {
public:
    explicit IvgSampler(double beta);
    std::int64_t sample(double a, double u) const;
    double beta() const { return beta_; }

private:
    double beta_;
    int w_;
};

struct ErrorM {
    double value;   // (2 pi)^2 beta inf_a Var(a, (2 pi)^2 beta)
    double argmin;  // minimising centre in [0, 1/2]
};

ErrorM error_M(double beta);

struct RatioK {
    double value;  // grid sup of T / Var, a lower bound on the true sup
    double beta_at;
    double a_at;
    double beta_max;
};

// sup over beta_hat in [beta, beta + 50] and a in [0, 1] of T(a, beta_hat) / Var(a, beta_hat).
// `na` and `nb` set the grid resolution in a and beta_hat (log-spaced).
RatioK ratio_K(double beta, int na = 101, int nb = 201);

}  // namespace villain
