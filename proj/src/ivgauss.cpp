#include "villain/ivgauss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace villain {

namespace {

struct Window {
    std::int64_t shift;  // nearest integer to a
    double a0;           // a - shift, in [-1/2, 1/2]
    int w;
};

Window window(const IvgParams& p)
{
    if (!(p.beta > 0) || !std::isfinite(p.a)) throw std::invalid_argument("IV-Gaussian needs beta > 0 and finite a");
    const double r = std::nearbyint(p.a);
    return {static_cast<std::int64_t>(r), p.a - r, ivg_window(p.beta)};
}

// Unnormalised weights for offsets -w..w around the nearest integer.
template <class F>
void for_each_weight(const Window& win, double beta, F&& f)
{
    for (int k = -win.w; k <= win.w; ++k) {
        const double x = k - win.a0;
        f(k, std::exp(-0.5 * beta * x * x));
    }
}

struct Moments {
    double mean, var, t3;
};

Moments moments(const IvgParams& p)
{
    const Window win = window(p);
    double z = 0, s1 = 0;
    for_each_weight(win, p.beta, [&](int k, double w) {
        z += w;
        s1 += w * k;
    });
    const double m0 = s1 / z;
    double s2 = 0, s3 = 0;
    for_each_weight(win, p.beta, [&](int k, double w) {
        const double c = k - m0;
        s2 += w * c * c;
        s3 += w * std::abs(c) * c * c;
    });
    return {m0 + static_cast<double>(win.shift), s2 / z, s3 / z};
}

}  // namespace

int ivg_window(double beta)
{
    return static_cast<int>(std::ceil(std::sqrt(2.0 * std::log(1e15) / beta))) + 1;
}

double ivg_pmf(const IvgParams& p, std::int64_t k)
{
    const Window win = window(p);
    const std::int64_t off = k - win.shift;
    if (off < -win.w || off > win.w) return 0.0;
    double z = 0, target = 0;
    for_each_weight(win, p.beta, [&](int j, double w) {
        z += w;
        if (j == off) target = w;
    });
    return target / z;
}

double ivg_mean(const IvgParams& p) { return moments(p).mean; }
double ivg_var(const IvgParams& p) { return moments(p).var; }
double ivg_t3(const IvgParams& p) { return moments(p).t3; }

std::int64_t ivg_sample(const IvgParams& p, double u)
{
    const Window win = window(p);
    double w[256];
    double z = 0;
    const int n = 2 * win.w + 1;
    if (n > 256) {
        // Very small beta: fall back to the unbuffered two-pass scan.
        for_each_weight(win, p.beta, [&](int, double x) { z += x; });
        double acc = 0, target = u * z;
        std::int64_t last = win.shift;
        bool done = false;
        for_each_weight(win, p.beta, [&](int k, double x) {
            if (done) return;
            acc += x;
            last = win.shift + k;
            if (acc >= target) done = true;
        });
        return last;
    }
    for (int k = -win.w; k <= win.w; ++k) {
        const double x = k - win.a0;
        w[k + win.w] = std::exp(-0.5 * p.beta * x * x);
        z += w[k + win.w];
    }
    const double target = u * z;
    double acc = 0;
    for (int i = 0; i < n; ++i) {
        acc += w[i];
        if (acc >= target) return win.shift + (i - win.w);
    }
    return win.shift + win.w;
}

IvgSampler::IvgSampler(double beta) : beta_(beta), w_(ivg_window(beta))
{
    if (!(beta > 0)) throw std::invalid_argument("IV-Gaussian needs beta > 0");
}

std::int64_t IvgSampler::sample(double a, double u) const
{
    const double r = std::nearbyint(a);
    const double a0 = a - r;
    // Most of the mass sits on the two integers next to a0; scan outward from
    // the mode so typical draws stop after one or two terms.
    double z = 0;
    double w[64];
    const int n = 2 * w_ + 1;
    if (n > 64) return ivg_sample({a, beta_}, u);
    for (int k = -w_; k <= w_; ++k) {
        const double x = k - a0;
        w[k + w_] = std::exp(-0.5 * beta_ * x * x);
        z += w[k + w_];
    }
    const double target = u * z;
    double acc = 0;
    for (int i = 0; i < n; ++i) {
        acc += w[i];
        if (acc >= target) return static_cast<std::int64_t>(r) + (i - w_);
    }
    return static_cast<std::int64_t>(r) + w_;
}

ErrorM error_M(double beta)
{
    if (!(beta > 0)) throw std::invalid_argument("error_M needs beta > 0");
    const double b = 4.0 * M_PI * M_PI * beta;
    auto f = [&](double a) { return ivg_var({a, b}); };
    const int n = 100;
    int best = 0;
    double fbest = f(0.0);
    for (int i = 1; i <= n; ++i) {
        const double v = f(0.5 * i / n);
        if (v < fbest) {
            fbest = v;
            best = i;
        }
    }
    double lo = 0.5 * std::max(0, best - 1) / n, hi = 0.5 * std::min(n, best + 1) / n;
    const double g = (std::sqrt(5.0) - 1) / 2;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    while (hi - lo > 1e-10) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    double amin = 0.5 * (lo + hi), vmin = f(amin);
    if (fbest < vmin) {
        amin = 0.5 * best / n;
        vmin = fbest;
    }
    return {b * vmin, amin};
}

RatioK ratio_K(double beta, int na, int nb)
{
    if (!(beta > 0)) throw std::invalid_argument("ratio_K needs beta > 0");
    if (na < 2 || nb < 2) throw std::invalid_argument("ratio_K grid too small");
    RatioK r{0.0, beta, 0.0, beta + 50.0};
    const double lb0 = std::log(beta), lb1 = std::log(beta + 50.0);
    for (int ib = 0; ib < nb; ++ib) {
        const double bh = std::exp(lb0 + (lb1 - lb0) * ib / (nb - 1));
        for (int ia = 0; ia < na; ++ia) {
            const double a = static_cast<double>(ia) / (na - 1);
            const Moments m = moments({a, bh});
            if (!(m.var > 0)) continue;
            const double q = m.t3 / m.var;
            if (q > r.value) r = {q, bh, a, beta + 50.0};
        }
    }
    return r;
}

}  // namespace villain
