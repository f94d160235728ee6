#include "microseg/dataset.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "microseg/errors.hpp"
#include "microseg/rng.hpp"
#include "microseg/util.hpp"

using nlohmann::json;

namespace microseg {

std::vector<double> SpendingCube::mean_row(std::size_t c) const {
    std::vector<double> out(m, 0.0);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < m; ++k) out[k] += at(c, t, k);
    for (double& v : out) v /= static_cast<double>(T);
    return out;
}

SpendingCube aggregate_annual(std::span<const Transaction> transactions,
                              const IncomeMap& incomes,
                              const std::vector<std::string>& categories) {
    if (categories.empty()) throw ConfigError("aggregate_annual: empty category vocabulary");
    std::unordered_map<std::string, std::size_t> cat_idx;
    for (std::size_t k = 0; k < categories.size(); ++k) cat_idx[categories[k]] = k;

    // axes from the income map (ordered by key, so deterministic)
    std::set<std::string> customer_set;
    std::set<int> year_set;
    for (const auto& [key, amount] : incomes) {
        if (amount <= 0.0)
            throw SchemaError("non-positive income for (" + key.first + ", " +
                              std::to_string(key.second) + ")");
        customer_set.insert(key.first);
        year_set.insert(key.second);
    }
    if (customer_set.empty()) throw ConfigError("aggregate_annual: no incomes given");

    std::vector<std::string> customers(customer_set.begin(), customer_set.end());
    std::vector<int> years(year_set.begin(), year_set.end());
    std::unordered_map<std::string, std::size_t> cust_idx;
    for (std::size_t i = 0; i < customers.size(); ++i) cust_idx[customers[i]] = i;
    std::unordered_map<int, std::size_t> year_idx;
    for (std::size_t t = 0; t < years.size(); ++t) year_idx[years[t]] = t;

    SpendingCube cube;
    cube.n = customers.size();
    cube.T = years.size();
    cube.m = categories.size();
    cube.customer_ids = customers;
    cube.spend.assign(cube.n * cube.T * cube.m, 0.0);
    cube.income.assign(cube.n * cube.T, 1.0);

    for (const auto& [key, amount] : incomes)
        cube.income[cust_idx[key.first] * cube.T + year_idx[key.second]] = amount;

    for (const auto& tx : transactions) {
        auto ci = cat_idx.find(tx.category);
        if (ci == cat_idx.end()) throw SchemaError("unknown category: " + tx.category);
        auto cu = cust_idx.find(tx.customer);
        if (cu == cust_idx.end() || !year_idx.count(tx.year))
            throw SchemaError("transaction without income record: (" + tx.customer + ", " +
                              std::to_string(tx.year) + ")");
        cube.at(cu->second, year_idx[tx.year], ci->second) += tx.amount;
    }
    for (std::size_t c = 0; c < cube.n; ++c)
        for (std::size_t t = 0; t < cube.T; ++t) {
            double inc = cube.income[c * cube.T + t];
            for (std::size_t k = 0; k < cube.m; ++k) cube.at(c, t, k) /= inc;
        }
    return cube;
}

FlatTable flatten(const SpendingCube& cube) {
    FlatTable table;
    table.n_customers = cube.n;
    table.T = cube.T;
    table.m = cube.m;
    table.rows = cube.spend;  // same row-major layout
    return table;
}

SpendingCube unflatten(const FlatTable& table, const std::vector<std::string>& customer_ids) {
    if (customer_ids.size() != table.n_customers)
        throw ConfigError("unflatten: customer id count does not match table");
    SpendingCube cube;
    cube.n = table.n_customers;
    cube.T = table.T;
    cube.m = table.m;
    cube.customer_ids = customer_ids;
    cube.spend = table.rows;
    cube.income.assign(cube.n * cube.T, 1.0);
    return cube;
}

SpendingCube subset(const SpendingCube& cube, std::span<const std::size_t> indices) {
    SpendingCube out;
    out.n = indices.size();
    out.T = cube.T;
    out.m = cube.m;
    out.spend.reserve(out.n * out.T * out.m);
    out.income.reserve(out.n * out.T);
    if (cube.targets) out.targets.emplace();
    if (cube.truth_personality) out.truth_personality.emplace();
    for (std::size_t i : indices) {
        if (i >= cube.n) throw ConfigError("subset: customer index out of range");
        out.customer_ids.push_back(cube.customer_ids[i]);
        out.spend.insert(out.spend.end(), cube.spend.begin() + static_cast<long>(i * cube.T * cube.m),
                         cube.spend.begin() + static_cast<long>((i + 1) * cube.T * cube.m));
        out.income.insert(out.income.end(), cube.income.begin() + static_cast<long>(i * cube.T),
                          cube.income.begin() + static_cast<long>((i + 1) * cube.T));
        if (cube.targets) out.targets->push_back((*cube.targets)[i]);
        if (cube.truth_personality) out.truth_personality->push_back((*cube.truth_personality)[i]);
    }
    return out;
}

std::pair<SpendingCube, SpendingCube> split(const SpendingCube& cube, double train_fraction,
                                            std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("split: train_fraction must be in (0, 1)");
    if (cube.n < 2) throw ConfigError("split: need at least 2 customers");
    auto n_train = static_cast<std::size_t>(static_cast<double>(cube.n) * train_fraction);
    if (n_train == 0 || n_train == cube.n)
        throw ConfigError("split: fraction leaves an empty partition at n=" + std::to_string(cube.n));

    std::vector<std::size_t> order(cube.n);
    for (std::size_t i = 0; i < cube.n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<long>(n_train));
    std::vector<std::size_t> val_idx(order.begin() + static_cast<long>(n_train), order.end());
    return {subset(cube, train_idx), subset(cube, val_idx)};
}

static json customer_to_json(const SpendingCube& cube, std::size_t c) {
    json obj;
    obj["customer_id"] = cube.customer_ids[c];
    json spend = json::array();
    for (std::size_t t = 0; t < cube.T; ++t) {
        json row = json::array();
        for (std::size_t k = 0; k < cube.m; ++k) row.push_back(cube.at(c, t, k));
        spend.push_back(std::move(row));
    }
    obj["spend"] = std::move(spend);
    json inc = json::array();
    for (std::size_t t = 0; t < cube.T; ++t) inc.push_back(cube.income[c * cube.T + t]);
    obj["income"] = std::move(inc);
    if (cube.targets) {
        obj["targets"] = {{"liquidity", (*cube.targets)[c].liquidity},
                          {"default_rate", (*cube.targets)[c].default_rate}};
    }
    if (cube.truth_personality) {
        json p = json::array();
        for (double v : (*cube.truth_personality)[c]) p.push_back(v);
        obj["truth_personality"] = std::move(p);
    }
    return obj;
}

std::string cube_to_jsonl(const SpendingCube& cube) {
    std::string out;
    for (std::size_t c = 0; c < cube.n; ++c) {
        out += customer_to_json(cube, c).dump();
        out += '\n';
    }
    return out;
}

SpendingCube cube_from_jsonl(const std::string& text) {
    SpendingCube cube;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool have_targets = false, have_truth = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw SchemaError("parse error at line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.contains("customer_id") || !obj.contains("spend") || !obj.contains("income"))
            throw SchemaError("missing key (customer_id/spend/income) at line " + std::to_string(line_no));
        const auto& spend = obj["spend"];
        if (!spend.is_array() || spend.empty() || !spend[0].is_array())
            throw SchemaError("spend must be a TxM array at line " + std::to_string(line_no));
        std::size_t T = spend.size(), m = spend[0].size();
        if (cube.n == 0) {
            cube.T = T;
            cube.m = m;
        } else if (T != cube.T || m != cube.m) {
            throw SchemaError("inconsistent shape at line " + std::to_string(line_no) + ": got " +
                              std::to_string(T) + "x" + std::to_string(m) + ", expected " +
                              std::to_string(cube.T) + "x" + std::to_string(cube.m));
        }
        cube.customer_ids.push_back(obj["customer_id"].get<std::string>());
        for (std::size_t t = 0; t < T; ++t) {
            if (spend[t].size() != m)
                throw SchemaError("ragged spend row at line " + std::to_string(line_no));
            for (std::size_t k = 0; k < m; ++k) cube.spend.push_back(spend[t][k].get<double>());
        }
        const auto& inc = obj["income"];
        if (!inc.is_array() || inc.size() != T)
            throw SchemaError("income must have T entries at line " + std::to_string(line_no));
        for (std::size_t t = 0; t < T; ++t) cube.income.push_back(inc[t].get<double>());

        bool row_targets = obj.contains("targets");
        bool row_truth = obj.contains("truth_personality");
        if (cube.n == 0) {
            have_targets = row_targets;
            have_truth = row_truth;
            if (have_targets) cube.targets.emplace();
            if (have_truth) cube.truth_personality.emplace();
        } else if (row_targets != have_targets || row_truth != have_truth) {
            throw SchemaError("inconsistent optional keys at line " + std::to_string(line_no));
        }
        if (row_targets) {
            cube.targets->push_back({obj["targets"]["liquidity"].get<double>(),
                                     obj["targets"]["default_rate"].get<double>()});
        }
        if (row_truth) {
            const auto& p = obj["truth_personality"];
            if (!p.is_array() || p.size() != 5)
                throw SchemaError("truth_personality must have 5 entries at line " + std::to_string(line_no));
            std::array<double, 5> arr{};
            for (std::size_t k = 0; k < 5; ++k) arr[k] = p[k].get<double>();
            cube.truth_personality->push_back(arr);
        }
        ++cube.n;
    }
    return cube;
}

void save_jsonl(const SpendingCube& cube, const std::string& path) {
    atomic_write_file(path, cube_to_jsonl(cube));
}

SpendingCube load_jsonl(const std::string& path) { return cube_from_jsonl(read_file(path)); }

}  // namespace microseg
