#include "microseg/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "microseg/errors.hpp"
#include "microseg/util.hpp"

namespace microseg {

void GenConfig::validate() const {
    if (n_customers < 1) throw ConfigError("gen config: n_customers must be >= 1");
    if (n_years < 2) throw ConfigError("gen config: n_years must be >= 2");
    if (n_categories < 2) throw ConfigError("gen config: n_categories must be >= 2");
    if (alpha < 0.0) throw ConfigError("gen config: alpha must be >= 0");
    if (sigma < 0.0) throw ConfigError("gen config: sigma must be >= 0");
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("gen config: rho must be in [0, 1]");
    if (delta < 0.0) throw ConfigError("gen config: delta must be >= 0");
}

std::vector<double> base_logits(std::size_t m) {
    std::vector<double> b(m);
    for (std::size_t j = 0; j < m; ++j) b[j] = 0.5 * std::cos(0.6 * static_cast<double>(j));
    return b;
}

static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::pair<double, double> synth_targets(const std::array<double, 5>& personality, Rng& rng) {
    for (double v : personality)
        if (!std::isfinite(v)) throw NumericError("synth_targets: non-finite personality");
    double wl = 0.0, wd = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
        wl += kLiquidityWeights[k] * personality[k];
        wd += kDefaultRateWeights[k] * personality[k];
    }
    double liquidity = wl + rng.normal(0.0, 0.1);
    double default_rate = 10.0 * sigmoid(wd + rng.normal(0.0, 0.1));
    return {liquidity, default_rate};
}

static void softmax_inplace(std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : logits) v /= sum;
}

SpendingCube generate_population(const GenConfig& config, const CoefficientTable& table,
                                 unsigned threads) {
    config.validate();
    if (table.n_categories() != config.n_categories)
        throw ConfigError("gen config: n_categories=" + std::to_string(config.n_categories) +
                          " does not match coefficient table with " +
                          std::to_string(table.n_categories()) + " categories");

    const std::size_t n = config.n_customers, T = config.n_years, m = config.n_categories;
    SpendingCube cube;
    cube.n = n;
    cube.T = T;
    cube.m = m;
    cube.customer_ids.resize(n);
    cube.spend.assign(n * T * m, 0.0);
    cube.income.assign(n * T, 1.0);  // income fixed at 1.0: shares are already normalized
    cube.targets.emplace(n);
    cube.truth_personality.emplace(n);

    const std::vector<double> base = base_logits(m);

    parallel_for(n, threads, [&](std::size_t i) {
        Rng rng(config.master_seed ^ static_cast<std::uint64_t>(i));
        std::array<double, 5> p{};
        for (double& v : p) v = rng.truncated_normal(-3.0, 3.0);

        std::vector<double> person_logits(m, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 5; ++k) s += table.coeff[k][j] * p[k];
            person_logits[j] = base[j] + config.alpha * s;
        }

        std::vector<double> logits(m);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t j = 0; j < m; ++j)
                logits[j] = person_logits[j] + config.sigma * rng.normal();
            if (rng.uniform() < config.rho) {
                auto j = static_cast<std::size_t>(rng.uniform_int(m));
                logits[j] += config.delta;
            }
            softmax_inplace(logits);
            for (std::size_t j = 0; j < m; ++j) cube.at(i, t, j) = logits[j];
        }

        auto [liq, dfr] = synth_targets(p, rng);
        (*cube.targets)[i] = {liq, dfr};
        (*cube.truth_personality)[i] = p;

        char buf[16];
        std::snprintf(buf, sizeof(buf), "c%06zu", i);
        cube.customer_ids[i] = buf;
    });
    return cube;
}

}  // namespace microseg
