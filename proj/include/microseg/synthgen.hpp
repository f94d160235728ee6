#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "microseg/dataset.hpp"
#include "microseg/personality.hpp"
#include "microseg/rng.hpp"

namespace microseg {

/// Configuration for the synthetic population generator. All randomness is a
/// pure function of master_seed; customer i draws from an independent stream
/// seeded with master_seed ^ i.
struct GenConfig {
    std::size_t n_customers = 2000;
    std::size_t n_years = 6;
    std::size_t n_categories = 12;
    double alpha = 8.0;   // personality strength on the share logits
    double sigma = 0.05;  // per-year, per-category logit noise sd
    double rho = 0.1;     // probability of an event spike in a given year
    double delta = 2.0;   // logit bump of an event spike
    std::uint64_t master_seed = 42;

    void validate() const;
};

struct GroundTruth {
    std::array<double, 5> personality;  // latent traits, truncated N(0,1) in [-3,3]
    double liquidity = 0.0;
    double default_rate = 0.0;
};

/// Fixed target weights (documented constants): liquidity rewards
/// conscientiousness and agreeableness and is reduced by neuroticism;
/// default rate is the mirror image through a logistic curve.
inline constexpr std::array<double, 5> kLiquidityWeights = {0.03, 0.50, 0.03, 0.40, -0.50};
inline constexpr std::array<double, 5> kDefaultRateWeights = {-0.03, -0.30, 0.03, -0.20, 0.30};

/// liquidity = w_l . p + N(0, 0.1); default_rate = 10 * sigmoid(w_d . p + N(0, 0.1)).
std::pair<double, double> synth_targets(const std::array<double, 5>& personality, Rng& rng);

/// Base category logits: 0.5 * cos(0.6 * j) for category j.
std::vector<double> base_logits(std::size_t m);

/// Generates the population cube (shares sum to 1 per year, income fixed at
/// 1.0) with targets and true personalities attached.
SpendingCube generate_population(const GenConfig& config,
                                 const CoefficientTable& table = CoefficientTable::defaults(),
                                 unsigned threads = 1);

}  // namespace microseg
