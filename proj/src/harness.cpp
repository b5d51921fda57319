#include "lrb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "lrb/errors.hpp"

namespace lrb {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kDiagnosticsStream = 0x5253435052ULL;
constexpr std::size_t kRscSamples = 200;

struct RepetitionOutput {
  std::vector<RoundRecord> records;
  std::vector<StreamChecksum> checksums;
  std::optional<NoiseEvent> event;
  std::optional<double> rsc;
  std::optional<std::string> failure;
};

LambdaRule lambda_rule(const ExperimentConfig& c, double sigma_op_max) {
  LambdaRule rule;
  rule.variant = c.lambda_variant;
  rule.scale = c.lambda_scale;
  rule.delta = c.lambda_delta;
  rule.sigma = std::sqrt(c.sigma2);
  rule.sigma_op_max = sigma_op_max;
  return rule;
}

PolicyKind diagnostics_policy(const ExperimentConfig& c) {
  const bool has_tracenorm =
      std::find(c.policies.begin(), c.policies.end(), PolicyKind::tracenorm) != c.policies.end();
  return has_tracenorm ? PolicyKind::tracenorm : c.policies.front();
}

void play(Policy& policy, const EnvironmentReplay& replay, std::size_t repetition,
          RepetitionOutput& out) {
  const std::size_t tasks = replay.tasks();
  const double t_div = static_cast<double>(tasks);
  const Matrix& w = replay.task_matrix;
  Matrix contexts(w.rows(), w.cols());
  std::vector<double> rewards(tasks);
  double reward_sum = 0.0;
  double regret_sum = 0.0;
  double realized_sum = 0.0;
  std::uint64_t stream = kFnvOffset;

  for (std::size_t n = 0; n < replay.rounds(); ++n) {
    const auto& sets = replay.sets[n];
    stream = checksum(sets, stream);
    const auto choice = policy.select_arms(sets, replay.first_round_choices);
    for (std::size_t t = 0; t < tasks; ++t) {
      const auto col = static_cast<Eigen::Index>(t);
      contexts.col(col) = sets[t].arm(choice[t]);
      const double expected = replay.expected_reward(n, t, choice[t]);
      rewards[t] = replay.observed_reward(n, t, choice[t]);
      reward_sum += expected;
      realized_sum += rewards[t];
      regret_sum += instantaneous_regret(sets[t], choice[t], w.col(col));
    }
    policy.observe(contexts, rewards);

    RoundRecord rec;
    rec.policy = policy.kind();
    rec.repetition = repetition;
    rec.round = n + 1;
    rec.avg_cum_reward = reward_sum / t_div;
    rec.avg_cum_regret = regret_sum / t_div;
    rec.avg_cum_realized_reward = realized_sum / t_div;
    rec.frob_error = estimation_error(policy.estimate(), w);
    rec.lambda_n = policy.last_lambda();
    rec.solver_converged = policy.last_update_converged();
    rec.rank_estimate = linalg::numerical_rank(policy.estimate());
    out.records.push_back(rec);
  }
  out.checksums.push_back({policy.kind(), repetition, stream});
}

RepetitionOutput run_repetition(const ExperimentConfig& c, const EnvironmentSetting& setting,
                                std::size_t repetition) {
  RepetitionOutput out;
  try {
    const EnvironmentReplay replay = make_replay(setting, c.master_seed, repetition);
    const double sigma_op_max = setting.arms.sigma_op_max();
    const PolicyKind diag_kind = diagnostics_policy(c);
    for (const PolicyKind kind : c.policies) {
      auto policy = make_policy(kind, c, replay.task_matrix, sigma_op_max);
      play(*policy, replay, repetition, out);
      if (!c.emit_diagnostics || kind != diag_kind) continue;

      const auto& hist = policy->histories();
      out.event = dn_event_check(hist, replay.noise, lambda_rule(c, sigma_op_max), c.horizon,
                                 c.horizon);
      if (repetition == 0) {
        std::vector<Matrix> covs;
        covs.reserve(hist.tasks());
        for (const auto& task : hist.all()) {
          covs.push_back(task.design().transpose() * task.design() /
                         static_cast<double>(task.rounds()));
        }
        RngStream rng(c.master_seed, kDiagnosticsStream);
        out.rsc = rsc_probe(covs, linalg::svd(replay.task_matrix), static_cast<int>(c.rank),
                            kRscSamples, rng);
      }
    }
  } catch (const std::exception& e) {
    out = RepetitionOutput{};
    out.failure = e.what();
  }
  return out;
}

DiagnosticsReport summarize(const ExperimentConfig& c, const EnvironmentSetting& setting,
                            const std::vector<RepetitionOutput>& outs,
                            std::span<const RoundRecord> records) {
  DiagnosticsReport report;
  std::size_t checked = 0;
  std::size_t held = 0;
  for (const auto& o : outs) {
    if (!o.event) continue;
    ++checked;
    if (o.event->holds) ++held;
    if (o.rsc) report.rsc_probe_value = *o.rsc;
  }
  if (checked > 0) report.dn_event_frequency = static_cast<double>(held) / static_cast<double>(checked);

  const PolicyKind kind = diagnostics_policy(c);
  const std::size_t first = (c.horizon + 1) / 2;
  std::map<std::size_t, std::pair<double, std::size_t>> by_round;
  for (const auto& r : records) {
    if (r.policy != kind || r.round < std::max<std::size_t>(first, 1) || !r.frob_error) continue;
    auto& slot = by_round[r.round];
    slot.first += *r.frob_error;
    slot.second += 1;
  }
  std::vector<double> ns;
  std::vector<double> errs;
  for (const auto& [round, acc] : by_round) {
    const double mean = acc.first / static_cast<double>(acc.second);
    if (!(mean > 0.0)) continue;
    ns.push_back(static_cast<double>(round));
    errs.push_back(mean);
  }
  if (ns.size() >= 2) report.error_scaling_slope = log_log_slope(ns, errs);

  try {
    report.n0_report = n0_report(c.d, c.tasks, c.rank, c.lambda_delta, setting.arms.sigma_op_max(), 1.0);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error&) {
    report.n0_report.reset();
  }
  return report;
}

std::string policy_name(PolicyKind kind) { return std::string(to_string(kind)); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::string hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::size_t resolve_jobs(std::size_t requested) {
  if (const char* env = std::getenv("LOWRANK_BANDIT_THREADS")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(requested, 1);
}

EnvironmentSetting make_setting(const ExperimentConfig& c) {
  return EnvironmentSetting{
      TaskMatrixSpec{c.d, c.tasks, c.rank, c.column_norm_cap},
      ArmDistribution(c.arm_kind, c.d, c.arms),
      NoiseSpec{std::sqrt(c.sigma2)},
      c.horizon,
      c.fix_task_matrix,
  };
}

std::unique_ptr<Policy> make_policy(PolicyKind kind, const ExperimentConfig& c, const Matrix& w,
                                    double sigma_op_max) {
  switch (kind) {
    case PolicyKind::tracenorm: {
      TraceNormPolicy::Settings s;
      s.lambda = lambda_rule(c, sigma_op_max);
      s.horizon = c.horizon;
      return std::make_unique<TraceNormPolicy>(c.d, c.tasks, s);
    }
    case PolicyKind::itl:
      return std::make_unique<ItlPolicy>(c.d, c.tasks);
    case PolicyKind::oracle:
      return std::make_unique<OraclePolicy>(c.tasks, OracleBasis::from_task_matrix(w, c.rank));
    case PolicyKind::mlingreedy:
      return std::make_unique<MLinGreedyPolicy>(
          c.d, c.tasks, factor_rank(c.mlingreedy_rank_mode, c.rank, c.d, c.tasks));
  }
  throw ConfigError("unknown policy");
}

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  if (auto errs = validate(config); !errs.empty()) throw ValidationError(std::move(errs));
  const EnvironmentSetting setting = make_setting(config);

  std::vector<RepetitionOutput> outs(config.repetitions);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t rep = next++; rep < outs.size(); rep = next++) {
      outs[rep] = run_repetition(config, setting, rep);
    }
  };
  const std::size_t jobs = std::min(resolve_jobs(options.jobs), outs.size());
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  RunResult result;
  result.config_echo = config;
  for (std::size_t rep = 0; rep < outs.size(); ++rep) {
    auto& o = outs[rep];
    if (o.failure) {
      result.failures.push_back({rep, *o.failure});
      continue;
    }
    result.records.insert(result.records.end(), o.records.begin(), o.records.end());
    result.checksums.insert(result.checksums.end(), o.checksums.begin(), o.checksums.end());
  }
  const auto key = [](const RoundRecord& r) {
    return std::make_tuple(static_cast<int>(r.policy), r.repetition, r.round);
  };
  std::stable_sort(result.records.begin(), result.records.end(),
                   [&](const RoundRecord& a, const RoundRecord& b) { return key(a) < key(b); });
  std::stable_sort(result.checksums.begin(), result.checksums.end(),
                   [](const StreamChecksum& a, const StreamChecksum& b) {
                     return std::make_pair(static_cast<int>(a.policy), a.repetition) <
                            std::make_pair(static_cast<int>(b.policy), b.repetition);
                   });
  if (config.emit_diagnostics && result.failures.size() < outs.size()) {
    result.diagnostics = summarize(config, setting, outs, result.records);
  }
  return result;
}

DiagnosticsReport run_diagnostics(const ExperimentConfig& config, const RunOptions& options) {
  ExperimentConfig c = config;
  c.emit_diagnostics = true;
  const RunResult result = run_experiment(c, options);
  if (!result.diagnostics) {
    throw DiagnosticUnavailable("every repetition failed: " + result.failures.front().message);
  }
  return *result.diagnostics;
}

Aggregate aggregate(std::span<const RoundRecord> records) {
  struct Sample {
    std::size_t repetition;
    double reward;
    double regret;
  };
  std::map<std::pair<int, std::size_t>, std::vector<Sample>> groups;
  std::map<int, std::vector<std::size_t>> reps_per_policy;
  for (const auto& r : records) {
    groups[{static_cast<int>(r.policy), r.round}].push_back(
        {r.repetition, r.avg_cum_reward, r.avg_cum_regret});
    reps_per_policy[static_cast<int>(r.policy)].push_back(r.repetition);
  }
  std::size_t all_reps = 0;
  for (auto& [p, reps] : reps_per_policy) {
    std::sort(reps.begin(), reps.end());
    reps.erase(std::unique(reps.begin(), reps.end()), reps.end());
    all_reps = std::max(all_reps, reps.size());
  }

  Aggregate agg;
  for (auto& [k, samples] : groups) {
    std::sort(samples.begin(), samples.end(),
              [](const Sample& a, const Sample& b) { return a.repetition < b.repetition; });
    const double m = static_cast<double>(samples.size());
    AggregateRow row;
    row.policy = static_cast<PolicyKind>(k.first);
    row.round = k.second;
    row.repetitions = samples.size();
    for (const auto& s : samples) {
      row.mean_reward += s.reward;
      row.mean_regret += s.regret;
    }
    row.mean_reward /= m;
    row.mean_regret /= m;
    if (samples.size() > 1) {
      double vr = 0.0;
      double vg = 0.0;
      for (const auto& s : samples) {
        vr += (s.reward - row.mean_reward) * (s.reward - row.mean_reward);
        vg += (s.regret - row.mean_regret) * (s.regret - row.mean_regret);
      }
      row.stderr_reward = std::sqrt(vr / (m - 1.0)) / std::sqrt(m);
      row.stderr_regret = std::sqrt(vg / (m - 1.0)) / std::sqrt(m);
    }
    if (samples.size() < all_reps) agg.partial = true;
    agg.rows.push_back(row);
  }
  return agg;
}

std::string format_real(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string results_csv(std::span<const RoundRecord> records) {
  std::string out{kResultsHeader};
  out += '\n';
  for (const auto& r : records) {
    out += policy_name(r.policy);
    out += ',' + std::to_string(r.repetition);
    out += ',' + std::to_string(r.round);
    out += ',' + format_real(r.avg_cum_reward);
    out += ',' + format_real(r.avg_cum_regret);
    out += ',' + (r.frob_error ? format_real(*r.frob_error) : std::string());
    out += ',' + (r.lambda_n ? format_real(*r.lambda_n) : std::string());
    out += r.solver_converged ? ",1" : ",0";
    out += ',' + (r.rank_estimate ? std::to_string(*r.rank_estimate) : std::string());
    out += '\n';
  }
  return out;
}

std::string aggregate_csv(const Aggregate& agg) {
  std::string out =
      "policy,round,repetitions,mean_avg_cum_reward,stderr_avg_cum_reward,mean_avg_cum_regret,"
      "stderr_avg_cum_regret\n";
  for (const auto& r : agg.rows) {
    out += policy_name(r.policy);
    out += ',' + std::to_string(r.round);
    out += ',' + std::to_string(r.repetitions);
    out += ',' + format_real(r.mean_reward);
    out += ',' + format_real(r.stderr_reward);
    out += ',' + format_real(r.mean_regret);
    out += ',' + format_real(r.stderr_regret);
    out += '\n';
  }
  return out;
}

std::string realized_csv(std::span<const RoundRecord> records) {
  std::string out = "policy,repetition,round,avg_cum_realized_reward\n";
  for (const auto& r : records) {
    out += policy_name(r.policy);
    out += ',' + std::to_string(r.repetition);
    out += ',' + std::to_string(r.round);
    out += ',' + format_real(r.avg_cum_realized_reward);
    out += '\n';
  }
  return out;
}

std::string diagnostics_json(const RunResult& result) {
  using nlohmann::json;
  json doc;
  doc["artifact_version"] = result.artifact_version;
  if (result.diagnostics) {
    const auto& d = *result.diagnostics;
    doc["diagnostics"] = {
        {"dn_event_frequency", d.dn_event_frequency},
        {"error_scaling_slope",
         d.error_scaling_slope ? json(*d.error_scaling_slope) : json(nullptr)},
        {"rsc_probe_value", d.rsc_probe_value},
        {"rsc_probe_kind", "sampling upper bound"},
        {"n0_report", d.n0_report ? json(*d.n0_report) : json(nullptr)},
    };
  } else {
    doc["diagnostics"] = nullptr;
  }
  json failures = json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"repetition", f.repetition}, {"message", f.message}});
  }
  doc["failures"] = failures;
  doc["partial_aggregate"] = aggregate(result.records).partial || !result.failures.empty();

  json sums = json::array();
  std::map<std::size_t, std::uint64_t> first_by_rep;
  bool common = true;
  for (const auto& c : result.checksums) {
    sums.push_back({{"policy", policy_name(c.policy)},
                    {"repetition", c.repetition},
                    {"decision_sets", hex(c.value)}});
    const auto [it, fresh] = first_by_rep.emplace(c.repetition, c.value);
    if (!fresh && it->second != c.value) common = false;
  }
  doc["stream_checksums"] = sums;
  doc["common_random_numbers"] = common;
  return doc.dump(2) + "\n";
}

std::vector<std::filesystem::path> write_results(const RunResult& result,
                                                 const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory '" + out_dir.string() + "': " + ec.message());

  const std::vector<std::pair<std::string, std::string>> files{
      {"results.csv", results_csv(result.records)},
      {"aggregate.csv", aggregate_csv(aggregate(result.records))},
      {"realized.csv", realized_csv(result.records)},
      {"diagnostics.json", diagnostics_json(result)},
      {"config_echo.json", to_json(result.config_echo) + "\n"},
  };
  std::vector<std::filesystem::path> paths;
  for (const auto& [name, text] : files) {
    paths.push_back(out_dir / name);
    write_file(paths.back(), text);
  }
  return paths;
}

}  // namespace lrb
