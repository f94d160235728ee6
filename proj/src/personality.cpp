#include "microseg/personality.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "microseg/errors.hpp"
#include "microseg/stats.hpp"
#include "microseg/util.hpp"

namespace microseg {

const CoefficientTable& CoefficientTable::defaults() {
    static const CoefficientTable table = [] {
        CoefficientTable t;
        t.categories = {"groceries",  "restaurants",   "transport", "books",
                        "electronics", "clothing",     "savings",   "insurance",
                        "entertainment", "sports",     "home_garden", "charity"};
        t.coeff = {{
            {0.38, -0.31, -0.33, 0.40, -0.43, -0.30, -0.29, 0.31, 0.34, 0.30, -0.36, 0.37},
            {0.29, 0.36, -0.27, -0.35, 0.42, -0.39, -0.36, -0.33, 0.30, 0.34, 0.31, -0.41},
            {0.28, -0.29, 0.37, -0.82, -0.29, 0.27, -0.32, -0.29, -0.38, 0.29, 0.36, 0.32},
            {0.34, 0.40, -0.40, 0.27, -0.30, -0.28, 0.40, -0.35, -0.32, -0.39, 0.31, 0.36},
            {0.32, 0.29, 0.40, -0.35, 0.35, -0.34, -0.32, 0.38, -0.35, -0.36, -0.32, 0.37},
        }};
        return t;
    }();
    return table;
}

static std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        while (!s.empty() && s.front() == ' ') s.erase(s.begin());
        while (!s.empty() && s.back() == ' ') s.pop_back();
    }
    return out;
}

CoefficientTable parse_coefficients_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("coefficient csv: empty file");
    auto header = split_csv_line(line);
    std::vector<std::string> expected = {"category"};
    for (auto* name : kTraitNames) expected.emplace_back(name);
    if (std::vector<std::string>(header.begin(), header.end()) != expected)
        throw SchemaError("coefficient csv: bad header, expected "
                          "category,openness,conscientiousness,extraversion,agreeableness,neuroticism");

    CoefficientTable table;
    std::set<std::string> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 6)
            throw SchemaError("coefficient csv: line " + std::to_string(line_no) + " has " +
                              std::to_string(cells.size()) + " cells, want 6");
        if (!seen.insert(cells[0]).second)
            throw SchemaError("coefficient csv: duplicate category '" + cells[0] + "'");
        table.categories.push_back(cells[0]);
        for (std::size_t k = 0; k < 5; ++k) {
            double v;
            try {
                v = std::stod(cells[k + 1]);
            } catch (const std::exception&) {
                throw SchemaError("coefficient csv: bad number at line " + std::to_string(line_no) +
                                  ", column " + kTraitNames[k]);
            }
            if (!(v >= -3.0 && v <= 3.0))
                throw SchemaError("coefficient out of [-3, 3]: category '" + cells[0] + "', trait " +
                                  kTraitNames[k] + ", value " + std::to_string(v));
            table.coeff[k].push_back(v);
        }
    }
    if (table.n_categories() < 2) throw SchemaError("coefficient csv: need at least 2 categories");
    return table;
}

CoefficientTable load_coefficients(const std::string& path) {
    return parse_coefficients_csv(read_file(path));
}

std::string coefficients_to_csv(const CoefficientTable& table) {
    std::string out = "category";
    for (auto* name : kTraitNames) {
        out += ',';
        out += name;
    }
    out += '\n';
    char buf[32];
    for (std::size_t c = 0; c < table.n_categories(); ++c) {
        out += table.categories[c];
        for (std::size_t k = 0; k < 5; ++k) {
            std::snprintf(buf, sizeof(buf), ",%.2f", table.coeff[k][c]);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

std::array<double, 5> score(std::span<const double> spend_row, const CoefficientTable& table) {
    if (spend_row.size() != table.n_categories())
        throw ConfigError("score: spend row has " + std::to_string(spend_row.size()) +
                          " entries, table has " + std::to_string(table.n_categories()));
    std::array<double, 5> out{};
    for (std::size_t k = 0; k < 5; ++k) {
        double s = 0.0;
        for (std::size_t c = 0; c < spend_row.size(); ++c) s += table.coeff[k][c] * spend_row[c];
        out[k] = s;
    }
    return out;
}

std::vector<std::array<double, 5>> standardize(const std::vector<std::array<double, 5>>& raw) {
    if (raw.size() < 2) throw ConfigError("standardize: population must have at least 2 members");
    std::vector<std::array<double, 5>> out(raw.size());
    std::vector<double> col(raw.size());
    for (std::size_t k = 0; k < 5; ++k) {
        for (std::size_t i = 0; i < raw.size(); ++i) col[i] = raw[i][k];
        double mu = mean(col);
        double sd = population_sd(col);
        if (sd <= 0.0)
            throw NumericError(std::string("standardize: zero variance in trait ") + kTraitNames[k]);
        for (std::size_t i = 0; i < raw.size(); ++i) out[i][k] = (raw[i][k] - mu) / sd;
    }
    return out;
}

std::array<int, 5> dominance_ranking(const std::array<double, 5>& traits) {
    for (double v : traits)
        if (!std::isfinite(v)) throw NumericError("dominance_ranking: non-finite trait score");
    std::array<int, 5> order = {0, 1, 2, 3, 4};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return std::fabs(traits[a]) > std::fabs(traits[b]);
    });
    return order;
}

double window_stability(const std::vector<std::vector<std::array<double, 5>>>& annual) {
    if (annual.empty()) throw ConfigError("window_stability: empty population");
    std::size_t stable = 0;
    for (const auto& years : annual) {
        if (years.size() < 2) throw ConfigError("window_stability: need T >= 2 years");
        int dom0 = dominance_ranking(years[0])[0];
        bool same = true;
        for (std::size_t t = 1; t < years.size() && same; ++t)
            same = dominance_ranking(years[t])[0] == dom0;
        stable += same ? 1u : 0u;
    }
    return static_cast<double>(stable) / static_cast<double>(annual.size());
}

}  // namespace microseg
