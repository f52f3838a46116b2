#include "villain/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace villain {

std::size_t batch_count(std::size_t n)
{
    const auto b = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
    return std::clamp<std::size_t>(b, 20, 1000);
}

Estimate batch_means(const std::vector<double>& x)
{
    Estimate e;
    e.n = x.size();
    if (x.empty()) return e;
    double s = 0;
    for (double v : x) s += v;
    e.mean = s / static_cast<double>(x.size());
    const std::size_t B = batch_count(x.size());
    if (x.size() < B) {
        e.se = INFINITY;
        e.batches = 0;
        return e;
    }
    const std::size_t len = x.size() / B;
    double ss = 0;
    for (std::size_t b = 0; b < B; ++b) {
        double bm = 0;
        for (std::size_t i = b * len; i < (b + 1) * len; ++i) bm += x[i];
        bm /= static_cast<double>(len);
        ss += (bm - e.mean) * (bm - e.mean);
    }
    e.batches = B;
    e.se = std::sqrt(ss / static_cast<double>(B - 1) / static_cast<double>(B));
    return e;
}

Estimate covariance(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size()) throw std::invalid_argument("paired series differ in length");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    std::vector<double> p(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = (x[i] - mx) * (y[i] - my);
    return batch_means(p);
}

Estimate correlation(const std::vector<double>& x, const std::vector<double>& y)
{
    Estimate c = covariance(x, y);
    const Estimate vx = covariance(x, x), vy = covariance(y, y);
    const double s = std::sqrt(vx.mean * vy.mean);
    if (!(s > 0)) {
        c.mean = 0;
        c.se = INFINITY;
        return c;
    }
    c.mean /= s;
    c.se /= s;
    return c;
}

ShapeTest normality(const std::vector<double>& x, std::size_t effective_n)
{
    const double n = static_cast<double>(x.size());
    double m = 0;
    for (double v : x) m += v;
    m /= n;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
        const double c = v - m;
        m2 += c * c;
        m3 += c * c * c;
        m4 += c * c * c * c;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    const double ne = static_cast<double>(std::max<std::size_t>(effective_n, 8));
    ShapeTest t;
    t.skew = m3 / std::pow(m2, 1.5);
    t.kurt = m4 / (m2 * m2) - 3.0;
    t.skew_se = std::sqrt(6.0 / ne);
    t.kurt_se = std::sqrt(24.0 / ne);
    t.normal_at_1pct = std::abs(t.skew / t.skew_se) < 2.576 && std::abs(t.kurt / t.kurt_se) < 2.576;
    return t;
}

std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

namespace {

std::string fmt(double x)
{
    std::ostringstream os;
    os.precision(3);
    os << x;
    return os.str();
}

}  // namespace

Check two_sided(const std::string& name, const Estimate& e, double target, double k_se, double rel, double abs)
{
    Check c{name, e.mean, e.se, target, e.mean - target, "", Verdict::Pass, ""};
    const double tol = k_se * e.se + rel * std::abs(target) + abs;
    c.tolerance = "|est-target| <= " + fmt(k_se) + " se" + (rel > 0 ? " + " + fmt(rel) + " |target|" : "") +
                  (abs > 0 ? " + " + fmt(abs) : "");
    c.verdict = std::abs(c.margin) <= tol ? Verdict::Pass : Verdict::Fail;
    if (!std::isfinite(e.se)) c.verdict = Verdict::Inconclusive;
    return c;
}

Check at_most(const std::string& name, const Estimate& e, double target, double k_se)
{
    Check c{name, e.mean, e.se, target, target - e.mean, "est <= target + " + fmt(k_se) + " se", Verdict::Pass, ""};
    c.verdict = e.mean <= target + k_se * e.se ? Verdict::Pass : Verdict::Fail;
    if (!std::isfinite(e.se)) c.verdict = Verdict::Inconclusive;
    return c;
}

Check at_least(const std::string& name, const Estimate& e, double target, double k_se)
{
    Check c{name, e.mean, e.se, target, e.mean - target, "est >= target - " + fmt(k_se) + " se", Verdict::Pass, ""};
    c.verdict = e.mean >= target - k_se * e.se ? Verdict::Pass : Verdict::Fail;
    if (!std::isfinite(e.se)) c.verdict = Verdict::Inconclusive;
    return c;
}

Check exact(const std::string& name, double value, double target, double tol)
{
    Check c{name, value, 0.0, target, value - target, "|value-target| <= " + fmt(tol), Verdict::Pass, ""};
    c.verdict = std::abs(value - target) <= tol ? Verdict::Pass : Verdict::Fail;
    return c;
}

Verdict combine(const std::vector<Check>& checks)
{
    bool inconclusive = false;
    for (const auto& c : checks) {
        if (c.verdict == Verdict::Fail) return Verdict::Fail;
        inconclusive = inconclusive || c.verdict == Verdict::Inconclusive;
    }
    return inconclusive ? Verdict::Inconclusive : Verdict::Pass;
}

}  // namespace villain
