#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ifkit/errors.hpp"
#include "ifkit/util/fs.hpp"
#include "ifkit/util/strings.hpp"

namespace ifkit {

// ---------------------------------------------------------------------------
// Elo input

struct EloRow {
  double with_style_control = 0.0;
  double without_style_control = 0.0;
};

struct EloTable {
  std::map<std::string, EloRow> rows;
};

enum class EloColumn { kWithStyleControl, kWithoutStyleControl };

inline EloTable parse_elo_csv(const std::string& text) {
  EloTable table;
  auto lines = split_lines(text);
  if (lines.empty()) throw DomainError("empty Elo table");
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    if (i == 0 && starts_with(line, "model_id")) continue;  // header
    size_t c1 = line.find(',');
    size_t c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos)
      throw DomainError("Elo row needs model_id,elo_with_sc,elo_without_sc: " +
                        std::string(line));
    std::string model(trim(line.substr(0, c1)));
    EloRow row;
    try {
      row.with_style_control = std::stod(std::string(line.substr(c1 + 1, c2 - c1 - 1)));
      row.without_style_control = std::stod(std::string(line.substr(c2 + 1)));
    } catch (const std::exception&) {
      throw DomainError("unparseable Elo values for model " + model);
    }
    if (row.with_style_control <= 0 || row.without_style_control <= 0)
      throw DomainError("Elo values must be positive for model " + model);
    if (!table.rows.emplace(model, row).second)
      throw DomainError("duplicate Elo row for model " + model);
  }
  if (table.rows.empty()) throw DomainError("Elo table has no rows");
  return table;
}

inline EloTable load_elo_csv(const fs::path& path) {
  return parse_elo_csv(read_file(path));
}

// ---------------------------------------------------------------------------
// Coefficients

inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DomainError("pearson inputs differ in length");
  size_t n = xs.size();
  if (n < 3) throw DomainError("pearson needs at least 3 points");
  double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
  double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DomainError("correlation undefined for constant input");
  return sxy / std::sqrt(sxx * syy);
}

// Ranks with ties averaged over their span, 1-based.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
  size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DomainError("spearman inputs differ in length");
  return pearson(average_ranks(xs), average_ranks(ys));
}

// ---------------------------------------------------------------------------
// Composite sweep

enum class CorrKind { kPearson, kSpearman };

inline std::string to_string(CorrKind k) {
  return k == CorrKind::kPearson ? "pearson" : "spearman";
}

struct SweepResult {
  std::vector<double> alphas;
  std::vector<std::optional<double>> coefficients;  // nullopt = undefined point
  double best_alpha = 0.0;
  double best_coefficient = 0.0;
  CorrKind corr_kind = CorrKind::kPearson;
  std::vector<std::string> models;  // common set, sorted
};

namespace detail {

inline std::vector<double> zscore(const std::vector<double>& xs) {
  double m = std::accumulate(xs.begin(), xs.end(), 0.0) /
             static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  double sd = std::sqrt(ss / static_cast<double>(xs.size()));
  if (sd == 0.0) throw DomainError("z-scoring a constant input");
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back((x - m) / sd);
  return out;
}

}  // namespace detail

// Correlates alpha*IF + (1-alpha)*Func against Elo over the grid
// {0, step, ..., 1}. Scores enter on their raw 0-100 scales unless
// standardize is set. Ties in the argmax resolve to the smallest alpha.
inline SweepResult composite_sweep(const std::map<std::string, double>& if_scores,
                                   const std::map<std::string, double>& func_scores,
                                   const EloTable& elo, EloColumn column,
                                   double step, CorrKind corr_kind,
                                   bool standardize = false) {
  if (!(step > 0.0) || step > 0.5)
    throw DomainError("sweep step must be in (0, 0.5]");

  SweepResult result;
  result.corr_kind = corr_kind;
  std::vector<double> ifs, funcs, elos;
  for (const auto& [model, if_score] : if_scores) {
    auto f = func_scores.find(model);
    auto e = elo.rows.find(model);
    if (f == func_scores.end() || e == elo.rows.end()) continue;
    result.models.push_back(model);
    ifs.push_back(if_score);
    funcs.push_back(f->second);
    elos.push_back(column == EloColumn::kWithStyleControl
                       ? e->second.with_style_control
                       : e->second.without_style_control);
  }
  if (result.models.size() < 3)
    throw DomainError("composite sweep needs at least 3 models common to "
                      "scores and Elo; have " +
                      std::to_string(result.models.size()));
  if (standardize) {
    ifs = detail::zscore(ifs);
    funcs = detail::zscore(funcs);
  }

  size_t grid_points = static_cast<size_t>(std::floor(1.0 / step + 0.5));
  bool found = false;
  for (size_t i = 0; i <= grid_points; ++i) {
    double alpha = i == grid_points ? 1.0 : static_cast<double>(i) * step;
    std::vector<double> composite;
    composite.reserve(ifs.size());
    for (size_t m = 0; m < ifs.size(); ++m)
      composite.push_back(alpha * ifs[m] + (1.0 - alpha) * funcs[m]);
    result.alphas.push_back(alpha);
    try {
      double coeff = corr_kind == CorrKind::kPearson ? pearson(composite, elos)
                                                     : spearman(composite, elos);
      result.coefficients.emplace_back(coeff);
      if (!found || coeff > result.best_coefficient) {
        found = true;
        result.best_coefficient = coeff;
        result.best_alpha = alpha;
      }
    } catch (const DomainError&) {
      result.coefficients.emplace_back(std::nullopt);  // degenerate grid point
    }
  }
  if (!found)
    throw DomainError("every grid point of the sweep was degenerate");
  return result;
}

inline std::string sweep_to_csv(const SweepResult& result) {
  std::string out = "alpha,coefficient\n";
  char buf[64];
  for (size_t i = 0; i < result.alphas.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.4f", result.alphas[i]);
    out += buf;
    out += ',';
    if (result.coefficients[i]) {
      std::snprintf(buf, sizeof buf, "%.6f", *result.coefficients[i]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace ifkit
