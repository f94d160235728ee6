#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace microseg {

struct TargetPair {
    double liquidity = 0.0;
    double default_rate = 0.0;
};

/// Per-customer annual spending shares: n customers x T years x m categories,
/// income-normalized. Immutable after construction by convention.
struct SpendingCube {
    std::vector<std::string> customer_ids;
    std::vector<double> spend;   // row-major [customer][year][category]
    std::vector<double> income;  // [customer][year]
    std::size_t n = 0, T = 0, m = 0;
    std::optional<std::vector<TargetPair>> targets;
    std::optional<std::vector<std::array<double, 5>>> truth_personality;

    double at(std::size_t c, std::size_t t, std::size_t k) const { return spend[(c * T + t) * m + k]; }
    double& at(std::size_t c, std::size_t t, std::size_t k) { return spend[(c * T + t) * m + k]; }
    std::span<const double> row(std::size_t c, std::size_t t) const {
        return {spend.data() + (c * T + t) * m, m};
    }
    /// Mean annual share row for one customer (the "overall" window).
    std::vector<double> mean_row(std::size_t c) const;
};

struct Transaction {
    std::string customer;
    int year = 0;
    std::string category;
    double amount = 0.0;
};

/// (n*T) x m view of a cube; row k is customer k/T, year k%T.
struct FlatTable {
    std::vector<double> rows;
    std::size_t n_customers = 0, T = 0, m = 0;

    std::size_t n_rows() const { return n_customers * T; }
    std::pair<std::size_t, std::size_t> row_index(std::size_t k) const { return {k / T, k % T}; }
    std::span<const double> row(std::size_t k) const { return {rows.data() + k * m, m}; }
};

using IncomeMap = std::map<std::pair<std::string, int>, double>;

/// Sums transaction amounts per (customer, year, category) and divides by
/// annual income. The customer and year axes come from the income map; a
/// (customer, year) cell with no transactions is a zero row.
SpendingCube aggregate_annual(std::span<const Transaction> transactions,
                              const IncomeMap& incomes,
                              const std::vector<std::string>& categories);

FlatTable flatten(const SpendingCube& cube);
SpendingCube unflatten(const FlatTable& table, const std::vector<std::string>& customer_ids);

/// Customer-level split: floor(n * train_fraction) train customers, rest
/// validation. Deterministic per seed.
std::pair<SpendingCube, SpendingCube> split(const SpendingCube& cube, double train_fraction,
                                            std::uint64_t seed);

/// Subset of a cube by customer index, preserving order.
SpendingCube subset(const SpendingCube& cube, std::span<const std::size_t> indices);

std::string cube_to_jsonl(const SpendingCube& cube);
SpendingCube cube_from_jsonl(const std::string& text);
void save_jsonl(const SpendingCube& cube, const std::string& path);
SpendingCube load_jsonl(const std::string& path);

}  // namespace microseg
