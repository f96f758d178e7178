#include "gdoe/generator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gdoe/error.hpp"
#include "gdoe/json_io.hpp"
#include "gdoe/vae.hpp"

namespace gdoe {

double DesignDiagnostics::violation_fraction() const {
  if (n_trials == 0) return 0.0;
  // Per decoded point: a trial violating two constraints counts once, and a
  // collapsed duplicate counts like the trial it repeated.
  std::vector<std::int64_t> ids;
  ids.reserve(violations.size());
  for (const auto& v : violations) ids.push_back(v.trial_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::size_t count = ids.size();
  for (const auto& c : duplicates) {
    if (std::binary_search(ids.begin(), ids.end(), c.kept_id)) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(n_trials);
}

nlohmann::json to_json(const DesignDiagnostics& d) {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : d.violations) {
    violations.push_back({{"trial_id", v.trial_id}, {"constraint", v.constraint}});
  }
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [a, b] : d.confounded_pairs) pairs.push_back({a, b});
  nlohmann::json duplicates = nlohmann::json::array();
  for (const auto& c : d.duplicates) {
    duplicates.push_back({{"dropped_id", c.dropped_id}, {"kept_id", c.kept_id}});
  }
  nlohmann::json out = {{"n_trials", d.n_trials},
                        {"n_unique", d.n_unique},
                        {"violations", violations},
                        {"violation_fraction", d.violation_fraction()},
                        {"confounded_pairs", pairs},
                        {"degenerate", d.degenerate},
                        {"level_coverage", d.level_coverage},
                        {"balance", d.balance},
                        {"orthogonality", d.orthogonality},
                        {"density_uniformity", nullptr},
                        {"nn_distance", d.nn_distance},
                        {"duplicates", duplicates},
                        {"flagged", d.flagged()}};
  if (d.density_uniformity) out["density_uniformity"] = *d.density_uniformity;
  return out;
}

namespace {

std::size_t level_slot(const FactorSpec& f, const Level& level) {
  if (f.kind == FactorKind::kNumericContinuous) {
    return f.nearest_level(std::get<double>(level));
  }
  const auto idx = f.level_index(level);
  if (!idx) throw Error(ErrorCode::kValidation, "level not declared for factor " + f.name);
  return *idx;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  return denom > 0.0 ? da.dot(db) / denom : 0.0;
}

}  // namespace

DesignDiagnostics diagnose(const Design& design, std::span<const ConstraintExpr> constraints,
                           std::span<const Point2> uniformed) {
  DesignDiagnostics d;
  const std::size_t n = design.size();
  const std::size_t nf = design.factors.size();
  d.n_trials = n;

  // Uniqueness on raw levels.
  {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return design.trials[a] < design.trials[b]; });
    std::size_t unique = n > 0 ? 1 : 0;
    for (std::size_t k = 1; k < n; ++k) {
      if (design.trials[order[k]] != design.trials[order[k - 1]]) ++unique;
    }
    d.n_unique = unique;
  }

  for (std::size_t t = 0; t < n; ++t) {
    for (const auto& c : constraints) {
      if (!evaluate(c, design.trials[t])) {
        d.violations.push_back({design.trial_ids.empty() ? static_cast<std::int64_t>(t)
                                                         : design.trial_ids[t],
                                c.source});
      }
    }
  }

  // Coverage and balance over declared levels.
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& spec = design.factors[f];
    std::vector<std::size_t> counts(spec.level_count(), 0);
    for (const auto& trial : design.trials) ++counts[level_slot(spec, trial[f])];
    const auto present = std::count_if(counts.begin(), counts.end(),
                                       [](std::size_t c) { return c > 0; });
    d.level_coverage.push_back(static_cast<double>(present) /
                               static_cast<double>(spec.level_count()));
    double chi = 0.0;
    if (n > 0) {
      const double expected = static_cast<double>(n) / static_cast<double>(spec.level_count());
      for (const auto c : counts) {
        const double diff = static_cast<double>(c) - expected;
        chi += diff * diff / expected;
      }
    }
    d.balance.push_back(chi);
  }

  // One normalized column per factor.
  const ColumnMap map = ColumnMap::from_factors(design.factors);
  Eigen::MatrixXd encoded(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(map.width()));
  Eigen::MatrixXd columns(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nf));
  std::vector<double> row(map.width());
  for (std::size_t t = 0; t < n; ++t) {
    map.encode_trial(design.trials[t], row);
    for (std::size_t c = 0; c < row.size(); ++c) {
      encoded(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = row[c];
    }
    for (std::size_t f = 0; f < nf; ++f) {
      columns(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f)) =
          map.normalized_level(f, row);
    }
  }
  std::vector<bool> degenerate(nf, false);
  for (std::size_t f = 0; f < nf; ++f) {
    const auto col = columns.col(static_cast<Eigen::Index>(f));
    if (n == 0 || col.maxCoeff() == col.minCoeff()) {
      degenerate[f] = true;
      d.degenerate.push_back(design.factors[f].name);
    }
  }
  constexpr double kConfoundTol = 1e-9;
  for (std::size_t a = 0; a < nf; ++a) {
    for (std::size_t b = a + 1; b < nf; ++b) {
      if (degenerate[a] || degenerate[b]) {
        if (degenerate[a] && degenerate[b]) {
          d.confounded_pairs.emplace_back(design.factors[a].name, design.factors[b].name);
        }
        continue;
      }
      const double r = std::abs(pearson(columns.col(static_cast<Eigen::Index>(a)),
                                        columns.col(static_cast<Eigen::Index>(b))));
      d.orthogonality = std::max(d.orthogonality, r);
      if (r >= 1.0 - kConfoundTol) {
        d.confounded_pairs.emplace_back(design.factors[a].name, design.factors[b].name);
      }
    }
  }

  // Nearest neighbour among the other trials in the encoded space.
  d.nn_distance.assign(n, std::numeric_limits<double>::infinity());
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double dist = (encoded.row(static_cast<Eigen::Index>(a)) -
                           encoded.row(static_cast<Eigen::Index>(b)))
                              .norm();
      d.nn_distance[a] = std::min(d.nn_distance[a], dist);
      d.nn_distance[b] = std::min(d.nn_distance[b], dist);
    }
  }
  if (n == 1) d.nn_distance[0] = 0.0;

  if (!uniformed.empty()) {
    if (uniformed.size() != n) {
      throw Error(ErrorCode::kShape, "uniformed coordinates must match the trial count");
    }
    std::array<std::size_t, 16> cells{};
    for (const auto& p : uniformed) {
      const int i = std::clamp(static_cast<int>(p.x * 4.0), 0, 3);
      const int j = std::clamp(static_cast<int>(p.y * 4.0), 0, 3);
      ++cells[static_cast<std::size_t>(j * 4 + i)];
    }
    const double expected = static_cast<double>(n) / 16.0;
    double chi = 0.0;
    for (const auto c : cells) {
      const double diff = static_cast<double>(c) - expected;
      chi += diff * diff / expected;
    }
    d.density_uniformity = chi;
  }
  return d;
}

GeneratedDesign generate_from_points(const vae::VaeModel& model,
                                     std::span<const Point2> uniformed,
                                     std::span<const ConstraintExpr> constraints, bool snap,
                                     Provenance provenance) {
  if (uniformed.empty()) throw Error(ErrorCode::kValidation, "no points to decode");
  const Design decoded = vae::decode_latent(model, uniformed, LatentSpace::kUniformed, snap);

  GeneratedDesign out;
  out.design.factors = decoded.factors;
  out.design.provenance = provenance;
  std::vector<DuplicateCollapse> duplicates;
  std::vector<std::size_t> order(decoded.size());
  std::iota(order.begin(), order.end(), 0);
  // Stable sort groups repeats with the first occurrence leading.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return decoded.trials[a] < decoded.trials[b];
  });
  std::vector<std::int64_t> first_of(decoded.size(), -1);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const bool repeat = k > 0 && decoded.trials[order[k]] == decoded.trials[order[k - 1]];
    first_of[order[k]] =
        repeat ? first_of[order[k - 1]] : static_cast<std::int64_t>(order[k]);
  }
  for (std::size_t i = 0; i < decoded.size(); ++i) {
    const auto id = static_cast<std::int64_t>(i);
    if (first_of[i] != id) {
      duplicates.push_back({id, first_of[i]});
      continue;
    }
    out.design.trials.push_back(decoded.trials[i]);
    out.design.trial_ids.push_back(id);
    out.uniformed.push_back(uniformed[i]);
  }
  out.diagnostics = diagnose(out.design, constraints, out.uniformed);
  out.diagnostics.duplicates = std::move(duplicates);
  out.diagnostics.n_trials = decoded.size();
  return out;
}

GeneratedDesign generate(const vae::VaeModel& model, const GridSpec& spec,
                         std::span<const ConstraintExpr> constraints, bool snap) {
  const auto points = make_grid_uniformed(spec);
  return generate_from_points(model, points, constraints, snap, Provenance::kGeneratedGrid);
}

Design random_subset(const Design& design, std::size_t n, std::uint64_t seed) {
  if (n < 1 || n > design.size()) {
    throw Error(ErrorCode::kValidation, "subset size " + std::to_string(n) +
                                            " must be in [1, " + std::to_string(design.size()) +
                                            "]");
  }
  std::vector<std::size_t> idx(design.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < n; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
    std::swap(idx[k], idx[pick(rng)]);
  }
  Design out;
  out.factors = design.factors;
  out.provenance = Provenance::kRandomSubset;
  for (std::size_t k = 0; k < n; ++k) {
    out.trials.push_back(design.trials[idx[k]]);
    out.trial_ids.push_back(design.trial_ids.empty() ? static_cast<std::int64_t>(idx[k])
                                                     : design.trial_ids[idx[k]]);
  }
  return out;
}

}  // namespace gdoe
