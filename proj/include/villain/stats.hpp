#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace villain {

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
    std::size_t batches = 0;
};

// Batch count used for a series of length n: clamp(floor(sqrt(n)), 20, 1000).
std::size_t batch_count(std::size_t n);

// Mean with a batch-means standard error (at least 20 batches).
Estimate batch_means(const std::vector<double>& x);

// Covariance of two paired series; the s.e. comes from batch means of the
// centred products.
Estimate covariance(const std::vector<double>& x, const std::vector<double>& y);

// Correlation coefficient with a batch-means s.e. obtained by scaling the
// covariance estimate by the sample standard deviations.
Estimate correlation(const std::vector<double>& x, const std::vector<double>& y);

// Sample skewness and excess kurtosis with their normal-theory s.e.
struct ShapeTest {
    double skew, skew_se, kurt, kurt_se;
    bool normal_at_1pct;  // both |z| below 2.576
};
ShapeTest normality(const std::vector<double>& x, std::size_t effective_n);

enum class Verdict { Pass, Fail, Inconclusive };
std::string to_string(Verdict v);

// One comparison row: estimate with s.e. against a target and its tolerance.
struct Check {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double target = 0.0;
    double margin = 0.0;  // estimate - target, sign per the comparison
    std::string tolerance;
    Verdict verdict = Verdict::Pass;
    std::string note;
};

// |est - target| <= k se + rel |target| (+ abs).
Check two_sided(const std::string& name, const Estimate& e, double target, double k_se, double rel = 0.0, double abs = 0.0);
// est <= target + k se.
Check at_most(const std::string& name, const Estimate& e, double target, double k_se);
// est >= target - k se.
Check at_least(const std::string& name, const Estimate& e, double target, double k_se);
// Deterministic comparison |value - target| <= tol.
Check exact(const std::string& name, double value, double target, double tol);

// Overall verdict: any fail -> Fail; otherwise any inconclusive -> Inconclusive.
Verdict combine(const std::vector<Check>& checks);

}  // namespace villain
