#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mblab/bandit.hpp"

namespace mblab {

enum class Mode { kFamily, kConcentration, kLowerBound, kRun };

std::string_view to_string(Mode mode);
/// "family", "concentration", "lower-bound" or "run"; ValidationError otherwise.
Mode parse_mode(std::string_view name);

/// Evenly spaced grid, endpoints included.
struct Grid {
  double min = -3.0;
  double max = 3.0;
  int points = 25;

  std::vector<double> values() const;
};

struct FamilySettings {
  Grid theta;
};

struct ConcentrationSettings {
  std::optional<double> theta;  // sampling member; defaults to arm 0
  int n_min = 1;
  int n_max = 14;
  std::vector<double> levels;   // empty: every lattice level in [mu(theta), M]
  int mc_replications = 0;
};

struct RunSettings {
  long long max_samples = 10'000'000;
  int workers = 1;
};

/// Everything one invocation needs; produced only by parse_config/load_config,
/// which validate every field.
struct ExperimentConfig {
  Mode mode = Mode::kRun;
  Matrix generator;
  Vector rewards;
  std::optional<std::vector<double>> thetas;
  std::optional<std::vector<double>> means;
  std::optional<Vector> initial_distribution;
  double delta = 0.1;
  double alpha = 1.2;
  int replications = 100;
  std::uint64_t seed = 1;
  FamilySettings family;
  ConcentrationSettings concentration;
  RunSettings run;
};

/// Parses a JSON document. Throws Error(kParse) on malformed JSON and
/// ValidationError(field, reason) on a failed check, e.g.
/// ValidationError("generator.row[0]", ...) for a bad row sum.
ExperimentConfig parse_config(std::string_view text);

/// Reads and parses a file; Error(kIo) if it cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON form with every field spelled out; parse_config inverts it.
std::string dump_config(const ExperimentConfig& config);

/// The family and arms described by a validated config.
struct ExperimentSetup {
  std::shared_ptr<const ExpFamily> family;
  BanditInstance instance;
  StrategyParams params;
};
ExperimentSetup make_setup(const ExperimentConfig& config);

/// seed_i = derive_seed(master, "replication", i).
std::uint64_t replication_seed(std::uint64_t master, int index);

struct ReplicationRecord {
  int rep = 0;
  std::uint64_t seed = 0;
  bool timed_out = false;
  long long tau = 0;  // 0 when timed out
  int decision = -1;  // -1 when timed out
  bool correct = false;
  std::vector<TraceRow> trace;
};

struct AggregateReport {
  double characteristic_time = 0.0;
  std::vector<double> weights;
  double lower_bound = 0.0;
  double delta = 0.0;

  int replications = 0;
  int timeouts = 0;
  int errors = 0;         // completed runs that picked a wrong arm
  double error_rate = 0;  // errors / replications
  double mean_tau = std::numeric_limits<double>::quiet_NaN();
  double median_tau = std::numeric_limits<double>::quiet_NaN();
  double p95_tau = std::numeric_limits<double>::quiet_NaN();
  double mean_tau_over_log = std::numeric_limits<double>::quiet_NaN();    // mean tau / ln(1/delta)
  double stderr_tau_over_log = std::numeric_limits<double>::quiet_NaN();  // its standard error
};

/// Instance-level part of the report: T*, w* and the nonasymptotic bound.
AggregateReport instance_report(const ExperimentSetup& setup);

/// Fills the batch statistics of `report` from the records alone. Timed-out
/// runs count towards replications and timeouts but not towards errors or
/// any tau statistic. Medians average the two middle values; p95 is the
/// nearest-rank quantile.
void aggregate(AggregateReport& report, const std::vector<ReplicationRecord>& records);

struct BatchResult {
  AggregateReport report;
  std::vector<ReplicationRecord> records;  // sorted by rep
};

/// `config.replications` independent runs of the strategy. Replications are
/// spread over config.run.workers threads; the outcome does not depend on
/// the worker count.
BatchResult run_batch(const ExperimentConfig& config, bool trace = false);

struct ConcentrationRow {
  int n = 0;
  double mu = 0.0;
  double exact = 0.0;
  double bound = 0.0;
  double mc_estimate = std::numeric_limits<double>::quiet_NaN();
  double mc_stderr = std::numeric_limits<double>::quiet_NaN();
  double kl_rate = 0.0;
};

std::vector<ConcentrationRow> concentration_curve(const ExperimentConfig& config);

struct FamilyRow {
  double theta = 0.0;
  double log_pf = 0.0;
  double mean = 0.0;
  double conjugate = 0.0;  // A*(mu(theta)) = KL(mu(theta) || mu(0))
};

struct KlRow {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double kl_rate = 0.0;
};

std::vector<FamilyRow> family_table(const ExperimentConfig& config);
std::vector<KlRow> kl_table(const ExperimentConfig& config);

/// printf("%.17g"); round-trips every double.
std::string format_double(double value);

/// Writers; each throws Error(kIo) when the file cannot be written.
void write_runs_csv(const std::filesystem::path& path, const std::vector<ReplicationRecord>& records);
void write_trace_csv(const std::filesystem::path& path, const std::vector<ReplicationRecord>& records);
void write_concentration_csv(const std::filesystem::path& path,
                             const std::vector<ConcentrationRow>& rows);
void write_lower_bound_csv(const std::filesystem::path& path, const AggregateReport& report);
void write_family_csv(const std::filesystem::path& path, const std::vector<FamilyRow>& rows);
void write_kl_csv(const std::filesystem::path& path, const std::vector<KlRow>& rows);

/// Runs the config's mode and writes its files plus summary.txt and a
/// config.json echo into out_dir (created if missing).
void execute(const ExperimentConfig& config, const std::filesystem::path& out_dir,
             bool trace = false);

}  // namespace mblab
