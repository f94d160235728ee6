#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace microseg {

inline constexpr std::array<const char*, 5> kTraitNames = {
    "openness", "conscientiousness", "extraversion", "agreeableness", "neuroticism"};

/// Trait-by-category spending coefficients, all in [-3, 3].
struct CoefficientTable {
    std::vector<std::string> categories;
    std::array<std::vector<double>, 5> coeff;  // [trait][category]

    std::size_t n_categories() const { return categories.size(); }

    /// The synthetic 12-category table shipped with this library. It is not
    /// the published table (which is not public); it is constructed so that
    /// trait rows are near-orthogonal and zero-mean.
    static const CoefficientTable& defaults();
};

CoefficientTable parse_coefficients_csv(const std::string& text);
CoefficientTable load_coefficients(const std::string& path);
std::string coefficients_to_csv(const CoefficientTable& table);

/// Raw trait scores: coeff . spend_row per trait.
std::array<double, 5> score(std::span<const double> spend_row, const CoefficientTable& table);

/// Z-scores each trait column across the population (population-sd
/// convention). Throws if a column has zero variance, naming the trait.
std::vector<std::array<double, 5>> standardize(const std::vector<std::array<double, 5>>& raw);

/// Trait indices sorted by descending |score|; ties break in canonical
/// trait order (O, C, E, A, N).
std::array<int, 5> dominance_ranking(const std::array<double, 5>& traits);

/// Fraction of customers whose dominant trait is the same in every year.
/// Input: per customer, T rows of 5 (already standardized per year).
double window_stability(const std::vector<std::vector<std::array<double, 5>>>& annual);

}  // namespace microseg
