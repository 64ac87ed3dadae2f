#include "mblab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include <json.hpp>

#include "mblab/concentration.hpp"
#include "mblab/error.hpp"
#include "mblab/rng.hpp"

namespace mblab {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string index_field(const std::string& field, std::size_t i) {
  return field + "[" + std::to_string(i) + "]";
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ValidationError(field, "must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(field, "must be finite");
  return v;
}

long long integer(const json& j, const std::string& field, long long min_value) {
  if (!j.is_number_integer()) throw ValidationError(field, "must be an integer");
  const long long v = j.get<long long>();
  if (v < min_value) {
    throw ValidationError(field, "must be >= " + std::to_string(min_value));
  }
  return v;
}

std::vector<double> numbers(const json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError(field, "must be an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], index_field(field, i)));
  return out;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void reject_unknown(const json& j, const std::string& prefix, const std::set<std::string>& known) {
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw ValidationError(prefix + item.key(), "unknown field");
  }
}

const json& require_object(const json& j, const std::string& field) {
  if (!j.is_object()) throw ValidationError(field, "must be an object");
  return j;
}

Matrix parse_generator(const json& j) {
  if (!j.is_array() || j.empty()) throw ValidationError("generator", "must be a non-empty array of rows");
  const std::size_t n = j.size();
  Matrix p(n, n);
  for (std::size_t x = 0; x < n; ++x) {
    const std::string row_field = "generator.row[" + std::to_string(x) + "]";
    if (!j[x].is_array() || j[x].size() != n) {
      throw ValidationError(row_field, "must have " + std::to_string(n) + " entries");
    }
    double sum = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      const std::string field = "generator[" + std::to_string(x) + "][" + std::to_string(y) + "]";
      const double v = number(j[x][y], field);
      if (v < 0.0) throw ValidationError(field, "must be non-negative");
      p(x, y) = v;
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "sums to %.17g, expected 1", sum);
      throw ValidationError(row_field, buf);
    }
  }
  return p;
}

Grid parse_grid(const json& j, const std::string& field) {
  require_object(j, field);
  reject_unknown(j, field + ".", {"min", "max", "points"});
  Grid g;
  if (j.contains("min")) g.min = number(j["min"], field + ".min");
  if (j.contains("max")) g.max = number(j["max"], field + ".max");
  if (j.contains("points")) g.points = static_cast<int>(integer(j["points"], field + ".points", 1));
  if (g.points > 100000) throw ValidationError(field + ".points", "must be <= 100000");
  if (g.max < g.min) throw ValidationError(field, "max must be >= min");
  if (g.points == 1 && g.max != g.min) throw ValidationError(field + ".points", "must be >= 2 when max > min");
  return g;
}

// Family-dependent checks: generator conditions, arm ranges and uniqueness.
void validate_semantics(const ExperimentConfig& c) {
  std::shared_ptr<const ExpFamily> family;
  try {
    StochasticMatrix p(c.generator);
    RewardFunction f(c.rewards);
    family = c.initial_distribution
                 ? std::make_shared<const ExpFamily>(p, f, *c.initial_distribution)
                 : std::make_shared<const ExpFamily>(p, f);
  } catch (const Error& e) {
    throw ValidationError("generator", e.what());
  }
  const double lo = family->min_reward(), hi = family->max_reward();
  std::vector<double> arm_means;
  const std::string field = c.means ? "means" : "thetas";
  const std::vector<double>& arms = c.means ? *c.means : *c.thetas;
  for (std::size_t a = 0; a < arms.size(); ++a) {
    if (c.means) {
      if (!(arms[a] > lo && arms[a] < hi)) {
        throw ValidationError(index_field(field, a), "must lie strictly between min and max reward");
      }
      arm_means.push_back(arms[a]);
    } else {
      arm_means.push_back(family->mean(arms[a]));
    }
  }
  const double top = *std::max_element(arm_means.begin(), arm_means.end());
  if (std::count(arm_means.begin(), arm_means.end(), top) > 1) {
    throw ValidationError(field, "best arm is not unique");
  }
  const auto& cs = c.concentration;
  if (cs.theta && !std::isfinite(*cs.theta)) throw ValidationError("concentration.theta", "must be finite");
  for (std::size_t i = 0; i < cs.levels.size(); ++i) {
    if (cs.levels[i] < lo || cs.levels[i] > hi) {
      throw ValidationError(index_field("concentration.levels", i), "must lie in [min reward, max reward]");
    }
  }
}

std::uint64_t parse_seed(const json& j) {
  if (!j.is_number_integer()) throw ValidationError("seed", "must be a non-negative integer");
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  const long long v = j.get<long long>();
  if (v < 0) throw ValidationError("seed", "must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

using Summary = std::vector<std::pair<std::string, std::string>>;

void write_summary(const std::filesystem::path& path, const Summary& lines) {
  std::string text;
  for (const auto& [key, value] : lines) text += key + "=" + value + "\n";
  write_text(path, text);
}

Summary base_summary(const ExperimentConfig& config, const ExpFamily& family) {
  return {{"mode", std::string(to_string(config.mode))},
          {"seed", std::to_string(config.seed)},
          {"states", std::to_string(family.size())},
          {"ratio_constant", format_double(family.ratio_constant())},
          {"ratio_constant_exact", family.ratio_constant_is_exact() ? "true" : "false"}};
}

void add_instance(Summary& s, const AggregateReport& r) {
  s.emplace_back("T_star", format_double(r.characteristic_time));
  for (std::size_t a = 0; a < r.weights.size(); ++a) {
    s.emplace_back("w_star_" + std::to_string(a), format_double(r.weights[a]));
  }
  s.emplace_back("lower_bound", format_double(r.lower_bound));
}

void add_batch(Summary& s, const AggregateReport& r) {
  s.emplace_back("delta", format_double(r.delta));
  s.emplace_back("replications", std::to_string(r.replications));
  s.emplace_back("timeouts", std::to_string(r.timeouts));
  s.emplace_back("errors", std::to_string(r.errors));
  s.emplace_back("error_rate", format_double(r.error_rate));
  s.emplace_back("mean_tau", format_double(r.mean_tau));
  s.emplace_back("median_tau", format_double(r.median_tau));
  s.emplace_back("p95_tau", format_double(r.p95_tau));
  s.emplace_back("mean_tau_over_log_inv_delta", format_double(r.mean_tau_over_log));
  s.emplace_back("stderr_tau_over_log_inv_delta", format_double(r.stderr_tau_over_log));
}

std::shared_ptr<const ExpFamily> make_family(const ExperimentConfig& config) {
  StochasticMatrix p(config.generator);
  RewardFunction f(config.rewards);
  if (config.initial_distribution) {
    return std::make_shared<const ExpFamily>(std::move(p), std::move(f), *config.initial_distribution);
  }
  return std::make_shared<const ExpFamily>(std::move(p), std::move(f));
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kFamily: return "family";
    case Mode::kConcentration: return "concentration";
    case Mode::kLowerBound: return "lower-bound";
    case Mode::kRun: return "run";
  }
  return "unknown";
}

Mode parse_mode(std::string_view name) {
  if (name == "family") return Mode::kFamily;
  if (name == "concentration") return Mode::kConcentration;
  if (name == "lower-bound") return Mode::kLowerBound;
  if (name == "run") return Mode::kRun;
  throw ValidationError("mode", "must be one of family, concentration, lower-bound, run");
}

std::vector<double> Grid::values() const {
  std::vector<double> out(points);
  for (int i = 0; i < points; ++i) {
    out[i] = points == 1 ? min : min + (max - min) * i / (points - 1);
  }
  if (points > 1) out.back() = max;
  return out;
}

ExperimentConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("<root>", "config must be a JSON object");
  reject_unknown(j, "", {"mode", "generator", "rewards", "thetas", "means", "initial_distribution",
                         "delta", "alpha", "replications", "seed", "family", "concentration", "run"});

  ExperimentConfig c;
  for (const char* key : {"mode", "generator", "rewards"}) {
    if (!j.contains(key)) throw ValidationError(key, "is required");
  }
  if (!j["mode"].is_string()) throw ValidationError("mode", "must be a string");
  c.mode = parse_mode(j["mode"].get<std::string>());

  c.generator = parse_generator(j["generator"]);
  const auto n = c.generator.rows();
  const std::vector<double> rewards = numbers(j["rewards"], "rewards");
  if (static_cast<Eigen::Index>(rewards.size()) != n) {
    throw ValidationError("rewards", "must have one entry per state (" + std::to_string(n) + ")");
  }
  if (std::adjacent_find(rewards.begin(), rewards.end(), std::not_equal_to<>()) == rewards.end()) {
    throw ValidationError("rewards", "must not be constant");
  }
  c.rewards = to_vector(rewards);

  const bool has_thetas = j.contains("thetas"), has_means = j.contains("means");
  if (has_thetas == has_means) {
    throw ValidationError("thetas/means", "exactly one of thetas and means must be given");
  }
  const std::string arm_field = has_thetas ? "thetas" : "means";
  std::vector<double> arms = numbers(j[arm_field], arm_field);
  if (arms.size() < 2) throw ValidationError(arm_field, "needs at least 2 arms");
  (has_thetas ? c.thetas : c.means) = std::move(arms);

  if (j.contains("initial_distribution")) {
    const std::vector<double> q = numbers(j["initial_distribution"], "initial_distribution");
    if (static_cast<Eigen::Index>(q.size()) != n) {
      throw ValidationError("initial_distribution", "must have one entry per state");
    }
    double sum = 0.0;
    for (std::size_t x = 0; x < q.size(); ++x) {
      if (!(q[x] > 0.0)) {
        throw ValidationError(index_field("initial_distribution", x), "must be positive");
      }
      sum += q[x];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("initial_distribution", "must sum to 1");
    c.initial_distribution = to_vector(q);
  }

  if (j.contains("delta")) c.delta = number(j["delta"], "delta");
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ValidationError("delta", "must lie in (0, 1)");
  if (j.contains("alpha")) c.alpha = number(j["alpha"], "alpha");
  if (!(c.alpha > 1.0)) throw ValidationError("alpha", "must exceed 1");
  if (j.contains("replications")) {
    c.replications = static_cast<int>(integer(j["replications"], "replications", 0));
  }
  if (j.contains("seed")) c.seed = parse_seed(j["seed"]);

  if (j.contains("family")) {
    const json& s = require_object(j["family"], "family");
    reject_unknown(s, "family.", {"theta"});
    if (s.contains("theta")) c.family.theta = parse_grid(s["theta"], "family.theta");
  }
  if (j.contains("concentration")) {
    const json& s = require_object(j["concentration"], "concentration");
    reject_unknown(s, "concentration.", {"theta", "n_min", "n_max", "levels", "mc_replications"});
    auto& cs = c.concentration;
    if (s.contains("theta")) cs.theta = number(s["theta"], "concentration.theta");
    if (s.contains("n_min")) cs.n_min = static_cast<int>(integer(s["n_min"], "concentration.n_min", 1));
    if (s.contains("n_max")) cs.n_max = static_cast<int>(integer(s["n_max"], "concentration.n_max", 1));
    if (cs.n_max < cs.n_min) throw ValidationError("concentration.n_max", "must be >= n_min");
    if (s.contains("levels")) cs.levels = numbers(s["levels"], "concentration.levels");
    if (s.contains("mc_replications")) {
      cs.mc_replications =
          static_cast<int>(integer(s["mc_replications"], "concentration.mc_replications", 0));
    }
  }
  if (j.contains("run")) {
    const json& s = require_object(j["run"], "run");
    reject_unknown(s, "run.", {"max_samples", "workers"});
    if (s.contains("max_samples")) c.run.max_samples = integer(s["max_samples"], "run.max_samples", 1);
    if (s.contains("workers")) c.run.workers = static_cast<int>(integer(s["workers"], "run.workers", 1));
  }

  validate_semantics(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string dump_config(const ExperimentConfig& c) {
  ordered_json j;
  j["mode"] = to_string(c.mode);
  ordered_json rows = ordered_json::array();
  for (Eigen::Index x = 0; x < c.generator.rows(); ++x) {
    rows.push_back(to_std(c.generator.row(x).transpose()));
  }
  j["generator"] = rows;
  j["rewards"] = to_std(c.rewards);
  if (c.thetas) j["thetas"] = *c.thetas;
  if (c.means) j["means"] = *c.means;
  if (c.initial_distribution) j["initial_distribution"] = to_std(*c.initial_distribution);
  j["delta"] = c.delta;
  j["alpha"] = c.alpha;
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  j["family"]["theta"] = {{"min", c.family.theta.min}, {"max", c.family.theta.max},
                          {"points", c.family.theta.points}};
  ordered_json conc;
  if (c.concentration.theta) conc["theta"] = *c.concentration.theta;
  conc["n_min"] = c.concentration.n_min;
  conc["n_max"] = c.concentration.n_max;
  conc["levels"] = c.concentration.levels;
  conc["mc_replications"] = c.concentration.mc_replications;
  j["concentration"] = conc;
  j["run"] = {{"max_samples", c.run.max_samples}, {"workers", c.run.workers}};
  return j.dump(2) + "\n";
}

ExperimentSetup make_setup(const ExperimentConfig& config) {
  auto family = make_family(config);
  BanditInstance instance = config.means ? BanditInstance::from_means(family, *config.means)
                                         : BanditInstance(family, *config.thetas);
  StrategyParams params(config.alpha, config.delta, instance.arms(), family->ratio_constant());
  return ExperimentSetup{family, std::move(instance), params};
}

std::uint64_t replication_seed(std::uint64_t master, int index) {
  return derive_seed(master, "replication", static_cast<std::uint64_t>(index));
}

AggregateReport instance_report(const ExperimentSetup& setup) {
  AggregateReport r;
  const OptimalAllocation opt = optimal_weights(*setup.family, setup.instance.means());
  r.characteristic_time = opt.characteristic_time;
  r.weights = opt.weights;
  const std::vector<Vector> q(setup.instance.arms(), setup.family->initial_distribution());
  r.lower_bound = nonasymptotic_lower_bound(setup.instance, setup.params, q);
  r.delta = setup.params.delta;
  return r;
}

void aggregate(AggregateReport& r, const std::vector<ReplicationRecord>& records) {
  r.replications = static_cast<int>(records.size());
  r.timeouts = 0;
  r.errors = 0;
  std::vector<double> taus;
  for (const auto& rec : records) {
    if (rec.timed_out) {
      ++r.timeouts;
      continue;
    }
    if (!rec.correct) ++r.errors;
    taus.push_back(static_cast<double>(rec.tau));
  }
  r.error_rate = r.replications > 0 ? static_cast<double>(r.errors) / r.replications : 0.0;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  r.mean_tau = r.median_tau = r.p95_tau = r.mean_tau_over_log = r.stderr_tau_over_log = nan;
  if (taus.empty()) return;
  std::sort(taus.begin(), taus.end());
  const std::size_t k = taus.size();
  double sum = 0.0;
  for (double t : taus) sum += t;
  r.mean_tau = sum / k;
  r.median_tau = k % 2 ? taus[k / 2] : 0.5 * (taus[k / 2 - 1] + taus[k / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * k));
  r.p95_tau = taus[std::max<std::size_t>(rank, 1) - 1];
  const double log_inv = std::log(1.0 / r.delta);
  r.mean_tau_over_log = r.mean_tau / log_inv;
  if (k > 1) {
    double ss = 0.0;
    for (double t : taus) ss += (t - r.mean_tau) * (t - r.mean_tau);
    r.stderr_tau_over_log = std::sqrt(ss / (k - 1) / k) / log_inv;
  }
}

BatchResult run_batch(const ExperimentConfig& config, bool trace) {
  const ExperimentSetup setup = make_setup(config);
  BatchResult out;
  out.report = instance_report(setup);
  out.records.resize(config.replications);

  RunOptions options;
  options.trace = trace;
  options.max_samples = config.run.max_samples;

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= config.replications) return;
      ReplicationRecord& rec = out.records[i];
      rec.rep = i;
      rec.seed = replication_seed(config.seed, i);
      try {
        RunResult r = run(setup.instance, setup.params, rec.seed, options);
        rec.tau = r.tau;
        rec.decision = r.decision;
        rec.correct = r.correct;
        rec.trace = std::move(r.trace);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kTimeout) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(config.replications);
          return;
        }
        rec.timed_out = true;
      }
    }
  };
  const int workers = std::max(1, std::min(config.run.workers, config.replications));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  aggregate(out.report, out.records);
  return out;
}

std::vector<ConcentrationRow> concentration_curve(const ExperimentConfig& config) {
  const auto family = make_family(config);
  const auto& cs = config.concentration;
  double theta = 0.0;
  if (cs.theta) {
    theta = *cs.theta;
  } else if (config.thetas) {
    theta = config.thetas->front();
  } else {
    theta = family->theta_from_mean(config.means->front());
  }
  const ThetaPoint center = family->evaluate(theta);
  const Vector& q = family->initial_distribution();
  const double top = family->max_reward();

  int d = 0;
  if (cs.levels.empty()) {
    d = lattice_denominator(family->rewards().values());
    if (d == 0) {
      throw Error(ErrorCode::kRewardsNotLatticed,
                  "rewards are not on a lattice; list concentration.levels explicitly");
    }
  }
  std::vector<ConcentrationRow> rows;
  for (int n = cs.n_min; n <= cs.n_max; ++n) {
    std::vector<double> levels;
    if (cs.levels.empty()) {
      const double scale = static_cast<double>(n) * d;
      const long long first = static_cast<long long>(std::ceil(center.mean * scale - 1e-9));
      const long long last = static_cast<long long>(std::llround(top * scale));
      for (long long k = first; k <= last; ++k) levels.push_back(static_cast<double>(k) / scale);
    } else {
      for (double mu : cs.levels) {
        if (mu >= center.mean) levels.push_back(mu);
      }
    }
    for (double mu : levels) {
      ConcentrationRow row;
      row.n = n;
      row.mu = std::min(std::max(mu, center.mean), top);
      row.exact = exact_tail(*family, theta, n, row.mu, q);
      row.bound = tail_bound(*family, theta, n, row.mu);
      row.kl_rate = ExpFamily::divergence(family->point_from_mean(row.mu), center);
      if (cs.mc_replications > 0) {
        const auto seed = derive_seed(config.seed, "concentration", rows.size());
        const TailEstimate mc = mc_tail(*family, theta, n, row.mu, cs.mc_replications, seed, q);
        row.mc_estimate = mc.estimate;
        row.mc_stderr = mc.std_error;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<FamilyRow> family_table(const ExperimentConfig& config) {
  const auto family = make_family(config);
  std::vector<FamilyRow> rows;
  for (double theta : config.family.theta.values()) {
    const ThetaPoint p = family->evaluate(theta);
    rows.push_back({theta, p.log_pf(), p.mean, family->conjugate(p.mean)});
  }
  return rows;
}

std::vector<KlRow> kl_table(const ExperimentConfig& config) {
  const auto family = make_family(config);
  const std::vector<double> grid = config.family.theta.values();
  std::vector<ThetaPoint> pts;
  for (double theta : grid) pts.push_back(family->evaluate(theta));
  std::vector<KlRow> rows;
  for (const auto& a : pts) {
    for (const auto& b : pts) rows.push_back({a.theta, b.theta, ExpFamily::divergence(a, b)});
  }
  return rows;
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_runs_csv(const std::filesystem::path& path, const std::vector<ReplicationRecord>& records) {
  std::string text = "rep,seed,tau,decision,correct\n";
  for (const auto& r : records) {
    text += std::to_string(r.rep) + "," + std::to_string(r.seed) + ",";
    if (r.timed_out) {
      text += "timeout,,\n";
    } else {
      text += std::to_string(r.tau) + "," + std::to_string(r.decision) + "," +
              (r.correct ? "1" : "0") + "\n";
    }
  }
  write_text(path, text);
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<ReplicationRecord>& records) {
  std::string text = "rep,t,arm,leader,min_z,beta\n";
  for (const auto& r : records) {
    for (const auto& row : r.trace) {
      text += std::to_string(r.rep) + "," + std::to_string(row.t) + "," + std::to_string(row.arm) +
              "," + std::to_string(row.leader) + "," + format_double(row.min_z) + "," +
              format_double(row.beta) + "\n";
    }
  }
  write_text(path, text);
}

void write_concentration_csv(const std::filesystem::path& path,
                             const std::vector<ConcentrationRow>& rows) {
  std::string text = "n,mu,exact,bound,mc_estimate,mc_stderr,kl_rate\n";
  for (const auto& r : rows) {
    text += std::to_string(r.n) + "," + format_double(r.mu) + "," + format_double(r.exact) + "," +
            format_double(r.bound) + "," + format_double(r.mc_estimate) + "," +
            format_double(r.mc_stderr) + "," + format_double(r.kl_rate) + "\n";
  }
  write_text(path, text);
}

void write_lower_bound_csv(const std::filesystem::path& path, const AggregateReport& report) {
  std::string text = "arm,w_star\n";
  for (std::size_t a = 0; a < report.weights.size(); ++a) {
    text += std::to_string(a) + "," + format_double(report.weights[a]) + "\n";
  }
  text += "T_star," + format_double(report.characteristic_time) + "\n";
  text += "bound," + format_double(report.lower_bound) + "\n";
  write_text(path, text);
}

void write_family_csv(const std::filesystem::path& path, const std::vector<FamilyRow>& rows) {
  std::string text = "theta,log_pf,mean,conjugate\n";
  for (const auto& r : rows) {
    text += format_double(r.theta) + "," + format_double(r.log_pf) + "," + format_double(r.mean) +
            "," + format_double(r.conjugate) + "\n";
  }
  write_text(path, text);
}

void write_kl_csv(const std::filesystem::path& path, const std::vector<KlRow>& rows) {
  std::string text = "theta1,theta2,kl_rate\n";
  for (const auto& r : rows) {
    text += format_double(r.theta1) + "," + format_double(r.theta2) + "," + format_double(r.kl_rate) +
            "\n";
  }
  write_text(path, text);
}

void execute(const ExperimentConfig& config, const std::filesystem::path& out_dir, bool trace) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir.string() + ": " + ec.message());

  const ExperimentSetup setup = make_setup(config);
  Summary summary = base_summary(config, *setup.family);
  switch (config.mode) {
    case Mode::kFamily: {
      const auto rows = family_table(config);
      write_family_csv(out_dir / "family.csv", rows);
      write_kl_csv(out_dir / "kl.csv", kl_table(config));
      summary.emplace_back("mean_at_zero", format_double(setup.family->mean(0.0)));
      summary.emplace_back("rows", std::to_string(rows.size()));
      break;
    }
    case Mode::kConcentration: {
      const auto rows = concentration_curve(config);
      write_concentration_csv(out_dir / "concentration.csv", rows);
      long long violations = 0;
      for (const auto& r : rows) violations += r.exact > r.bound;
      summary.emplace_back("rows", std::to_string(rows.size()));
      summary.emplace_back("bound_violations", std::to_string(violations));
      break;
    }
    case Mode::kLowerBound: {
      const AggregateReport report = instance_report(setup);
      write_lower_bound_csv(out_dir / "lower_bound.csv", report);
      summary.emplace_back("delta", format_double(config.delta));
      add_instance(summary, report);
      break;
    }
    case Mode::kRun: {
      const BatchResult batch = run_batch(config, trace);
      write_runs_csv(out_dir / "runs.csv", batch.records);
      if (trace) write_trace_csv(out_dir / "trace.csv", batch.records);
      add_instance(summary, batch.report);
      add_batch(summary, batch.report);
      break;
    }
  }
  write_summary(out_dir / "summary.txt", summary);
  write_text(out_dir / "config.json", dump_config(config));
}

}  // namespace mblab
