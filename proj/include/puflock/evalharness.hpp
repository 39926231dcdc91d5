#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "puflock/binding.hpp"
#include "puflock/dataset.hpp"
#include "puflock/errors.hpp"
#include "puflock/model.hpp"
#include "puflock/puf.hpp"
#include "puflock/rng.hpp"

namespace puflock {

/// How the sweep draws weight subsets across percentages within one trial.
///
/// kNested: one seeded permutation per trial; each percentage takes a prefix,
/// so smaller subsets are contained in larger ones. kIndependent: a fresh
/// selection per (percentage, trial) pair.
enum class SelectionMode { kNested, kIndependent };

NLOHMANN_JSON_SERIALIZE_ENUM(SelectionMode,
                             {{SelectionMode::kNested, "nested"},
                              {SelectionMode::kIndependent, "independent"}})

inline const char* to_string(SelectionMode mode) {
  return mode == SelectionMode::kNested ? "nested" : "independent";
}

struct SweepConfig {
  std::vector<double> percentages = {0, 5, 10, 15, 20, 25, 30, 35, 40};
  int trials = 10;
  int layer_id = 0;
  std::uint64_t master_seed = 1;
  std::uint64_t machine_seed = 42;
  SelectionMode mode = SelectionMode::kNested;

  void validate() const {
    for (double pct : percentages) {
      if (!(pct >= 0.0 && pct <= 100.0)) {
        throw ConfigError("SweepConfig: percentage " + std::to_string(pct) +
                          " outside [0, 100]");
      }
    }
    if (trials < 1) {
      throw ConfigError("SweepConfig: trials must be >= 1, got " +
                        std::to_string(trials));
    }
    if (layer_id < 0) {
      throw ConfigError("SweepConfig: layer_id must be >= 0");
    }
  }
};

struct SweepRow {
  double pct = 0;
  int trial = 0;
  double accuracy = 0;

  bool operator==(const SweepRow&) const = default;
};

struct PctSummary {
  double pct = 0;
  double mean = 0;
  double stddev = 0;  // population (divide by N)

  bool operator==(const PctSummary&) const = default;
};

struct SweepReport {
  SelectionMode mode = SelectionMode::kNested;
  int trials = 0;
  int layer_id = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t machine_seed = 0;
  double random_baseline = 0;
  bool baseline_is_majority = false;  // set when the test set is unbalanced
  std::vector<SweepRow> rows;         // pct-major, trial-minor
  std::vector<PctSummary> summaries;  // one per pct, same order

  bool operator==(const SweepReport&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SweepRow, pct, trial, accuracy)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PctSummary, pct, mean, stddev)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SweepReport, mode, trials, layer_id,
                                   master_seed, machine_seed, random_baseline,
                                   baseline_is_majority, rows, summaries)

struct CloneRow {
  double pct = 0;
  double no_decrypt = 0;       // encrypted model run as-is
  double target_decrypt = 0;   // decrypted on the binding machine
  std::vector<double> clones;  // decrypted on each clone machine

  bool operator==(const CloneRow&) const = default;
};

struct CloneReport {
  int layer_id = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t target_seed = 0;
  std::vector<std::uint64_t> clone_seeds;
  double original_accuracy = 0;
  double random_baseline = 0;
  bool baseline_is_majority = false;
  std::vector<CloneRow> rows;  // one per pct, input order

  bool operator==(const CloneReport&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CloneRow, pct, no_decrypt, target_decrypt,
                                   clones)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CloneReport, layer_id, master_seed,
                                   target_seed, clone_seeds,
                                   original_accuracy, random_baseline,
                                   baseline_is_majority, rows)

/// Expected accuracy of a random guesser on a balanced test set.
inline double random_baseline(int num_classes) {
  if (num_classes < 2) {
    throw ConfigError("random_baseline: num_classes must be >= 2");
  }
  return 1.0 / num_classes;
}

namespace detail {

/// Baseline for a report: 1/C on balanced data, otherwise the majority-class
/// frequency, flagged so readers know the floor is not 1/C.
inline void fill_baseline(const Dataset& data, double& baseline,
                          bool& is_majority) {
  if (data.balanced()) {
    baseline = random_baseline(data.num_classes);
    is_majority = false;
    return;
  }
  const auto counts = data.class_counts();
  std::size_t majority = 0;
  for (std::size_t c : counts) majority = std::max(majority, c);
  baseline = static_cast<double>(majority) /
             static_cast<double>(data.num_samples());
  is_majority = true;
}

inline PctSummary summarize(double pct, const std::vector<double>& values) {
  PctSummary s;
  s.pct = pct;
  bool constant = true;
  for (double v : values) constant = constant && v == values.front();
  if (constant) {  // exact mean and zero spread for constant columns
    s.mean = values.front();
    s.stddev = 0.0;
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

}  // namespace detail

/// Measure accuracy of the encrypted-but-not-decrypted model across
/// percentages and trials. Trial t selects weights with seed
/// mix64(master_seed + t); nested mode reuses that seed at every percentage
/// (prefix subsets), independent mode re-derives one per (pct, trial).
inline SweepReport degradation_sweep(const Model& model, const Dataset& data,
                                     const SweepConfig& cfg,
                                     const XorArbiterPuf& puf) {
  cfg.validate();
  model.validate();
  detail::check_layer_id(model, cfg.layer_id, "degradation_sweep");

  SweepReport report;
  report.mode = cfg.mode;
  report.trials = cfg.trials;
  report.layer_id = cfg.layer_id;
  report.master_seed = cfg.master_seed;
  report.machine_seed = cfg.machine_seed;
  detail::fill_baseline(data, report.random_baseline,
                        report.baseline_is_majority);
  report.rows.reserve(cfg.percentages.size() * cfg.trials);

  for (std::size_t p = 0; p < cfg.percentages.size(); ++p) {
    const double pct = cfg.percentages[p];
    std::vector<double> column;
    column.reserve(cfg.trials);
    for (int t = 0; t < cfg.trials; ++t) {
      const std::uint64_t trial_seed =
          mix64(cfg.master_seed + static_cast<std::uint64_t>(t));
      const std::uint64_t enc_seed =
          cfg.mode == SelectionMode::kNested
              ? trial_seed
              : mix64(trial_seed + kGolden64 * (p + 1));
      const auto [encrypted, helper] =
          encrypt_model(model, cfg.layer_id, pct, puf, enc_seed);
      const double acc = evaluate(encrypted, data);
      report.rows.push_back({pct, t, acc});
      column.push_back(acc);
    }
    report.summaries.push_back(detail::summarize(pct, column));
  }
  return report;
}

/// Convenience overload: machine PUF built from cfg.machine_seed.
inline SweepReport degradation_sweep(const Model& model, const Dataset& data,
                                     const SweepConfig& cfg) {
  return degradation_sweep(model, data, cfg, XorArbiterPuf(cfg.machine_seed));
}

/// For each percentage: encrypt under the target machine, then report
/// accuracy (i) without decrypting, (ii) after decrypting on the target
/// (bit-exact restoration), (iii) after decrypting on each clone machine.
inline CloneReport clone_eval(const Model& model, const Dataset& data,
                              int layer_id, const std::vector<double>& pcts,
                              std::uint64_t target_seed,
                              const std::vector<std::uint64_t>& clone_seeds,
                              std::uint64_t master_seed) {
  if (clone_seeds.empty()) {
    throw ConfigError("clone_eval: need at least one clone seed");
  }
  for (std::uint64_t seed : clone_seeds) {
    if (seed == target_seed) {
      throw ConfigError("clone_eval: clone seed " + std::to_string(seed) +
                        " equals the target seed");
    }
  }
  model.validate();
  detail::check_layer_id(model, layer_id, "clone_eval");

  CloneReport report;
  report.layer_id = layer_id;
  report.master_seed = master_seed;
  report.target_seed = target_seed;
  report.clone_seeds = clone_seeds;
  report.original_accuracy = evaluate(model, data);
  detail::fill_baseline(data, report.random_baseline,
                        report.baseline_is_majority);

  const XorArbiterPuf target(target_seed);
  std::vector<XorArbiterPuf> clones;
  clones.reserve(clone_seeds.size());
  for (std::uint64_t seed : clone_seeds) clones.emplace_back(seed);

  report.rows.reserve(pcts.size());
  for (std::size_t p = 0; p < pcts.size(); ++p) {
    const std::uint64_t enc_seed =
        mix64(master_seed + static_cast<std::uint64_t>(p));
    const auto [encrypted, helper] =
        encrypt_model(model, layer_id, pcts[p], target, enc_seed);
    CloneRow row;
    row.pct = pcts[p];
    row.no_decrypt = evaluate(encrypted, data);
    row.target_decrypt = evaluate(decrypt_model(encrypted, helper, target), data);
    row.clones.reserve(clones.size());
    for (const XorArbiterPuf& clone : clones) {
      row.clones.push_back(evaluate(decrypt_model(encrypted, helper, clone), data));
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace detail {

inline std::string format_pct(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", pct);
  return buf;
}

inline std::string format_acc(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

inline void write_text(const std::string& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace detail

/// CSV table of the sweep: one data row per (pct, trial) with an empty
/// stddev field, then one `<pct>,mean,<mean>,<stddev>` summary row per pct.
/// stddev is the population standard deviation.
inline std::string report_csv(const SweepReport& report) {
  std::string out = "pct,trial,accuracy,stddev\n";
  for (const SweepRow& row : report.rows) {
    out += detail::format_pct(row.pct) + ',' + std::to_string(row.trial) +
           ',' + detail::format_acc(row.accuracy) + ",\n";
  }
  for (const PctSummary& s : report.summaries) {
    out += detail::format_pct(s.pct) + ",mean," + detail::format_acc(s.mean) +
           ',' + detail::format_acc(s.stddev) + '\n';
  }
  return out;
}

/// CSV table of the clone experiment: one row per (pct, condition) where the
/// condition is no-decrypt, target-decrypt, or clone-<i> (1-based).
inline std::string report_csv(const CloneReport& report) {
  std::string out = "pct,condition,accuracy\n";
  for (const CloneRow& row : report.rows) {
    const std::string pct = detail::format_pct(row.pct);
    out += pct + ",no-decrypt," + detail::format_acc(row.no_decrypt) + '\n';
    out += pct + ",target-decrypt," + detail::format_acc(row.target_decrypt) +
           '\n';
    for (std::size_t i = 0; i < row.clones.size(); ++i) {
      out += pct + ",clone-" + std::to_string(i + 1) + ',' +
             detail::format_acc(row.clones[i]) + '\n';
    }
  }
  return out;
}

template <typename Report>
void report_csv(const Report& report, const std::string& path) {
  detail::write_text(path, report_csv(report));
}

template <typename Report>
std::string report_json(const Report& report) {
  return nlohmann::json(report).dump(2) + "\n";
}

template <typename Report>
void report_json(const Report& report, const std::string& path) {
  detail::write_text(path, report_json(report));
}

template <typename Report>
Report report_from_json(const std::string& text) {
  try {
    return nlohmann::json::parse(text).get<Report>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report_from_json: ") + e.what());
  }
}

inline SweepReport sweep_report_from_json(const std::string& text) {
  return report_from_json<SweepReport>(text);
}

inline CloneReport clone_report_from_json(const std::string& text) {
  return report_from_json<CloneReport>(text);
}

/// Summary row for one percentage; throws if the report has none for it.
inline const PctSummary& summary_for(const SweepReport& report, double pct) {
  for (const PctSummary& s : report.summaries) {
    if (s.pct == pct) return s;
  }
  throw ConfigError("summary_for: no summary for pct " + std::to_string(pct));
}

}  // namespace puflock
