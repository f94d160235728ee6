#include "microseg/stats.hpp"

#include <cmath>
#include <cstdlib>

#include "microseg/errors.hpp"

namespace microseg {

double mean(std::span<const double> v) {
    if (v.empty()) throw ConfigError("mean of empty range");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

static double sum_sq_dev(std::span<const double> v) {
    double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s;
}

double population_sd(std::span<const double> v) {
    return std::sqrt(sum_sq_dev(v) / static_cast<double>(v.size()));
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) throw ConfigError("sample sd needs at least 2 values");
    return std::sqrt(sum_sq_dev(v) / static_cast<double>(v.size() - 1));
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("pearson: mismatched or short inputs");
    double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

// Regularized incomplete beta via the standard continued fraction.
static double betacf(double a, double b, double x) {
    const int kMaxIter = 300;
    const double kEps = 3e-16, kFpMin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

static double inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                a * std::log(x) + b * std::log(1.0 - x);
    double front = std::exp(ln);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

static double t_cdf(double t, double df) {
    double x = df / (df + t * t);
    double p = 0.5 * inc_beta(df / 2.0, 0.5, x);
    return t > 0.0 ? 1.0 - p : p;
}

double student_t_975(std::size_t df) {
    if (df == 0) throw ConfigError("t quantile needs df >= 1");
    double lo = 0.0, hi = 1000.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (t_cdf(mid, static_cast<double>(df)) < 0.975)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double paired_t(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("paired_t: mismatched or short inputs");
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
    double sd = sample_sd(d);
    if (sd == 0.0) return mean(d) == 0.0 ? 0.0 : HUGE_VAL;
    return mean(d) / (sd / std::sqrt(static_cast<double>(d.size())));
}

}  // namespace microseg
