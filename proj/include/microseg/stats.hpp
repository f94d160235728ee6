#pragma once

#include <span>
#include <utility>

namespace microseg {

double mean(std::span<const double> v);
double population_sd(std::span<const double> v);
double sample_sd(std::span<const double> v);
double pearson(std::span<const double> x, std::span<const double> y);

// Two-sided 95% critical value of Student's t with df degrees of freedom,
// i.e. the 0.975 quantile.
double student_t_975(std::size_t df);

// Paired t statistic for mean(x - y) > 0 against zero.
double paired_t(std::span<const double> x, std::span<const double> y);

}  // namespace microseg
