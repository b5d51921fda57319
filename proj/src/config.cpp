#include "lrb/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

namespace lrb {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += "; ";
    out += p;
  }
  return out;
}

LambdaVariant parse_lambda_variant(std::string_view text) {
  if (text == "experimental") return LambdaVariant::experimental;
  if (text == "theoretical") return LambdaVariant::theoretical;
  throw ConfigError("unknown lambda variant '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(LambdaVariant variant) {
  return variant == LambdaVariant::experimental ? "experimental" : "theoretical";
}

ValidationError::ValidationError(std::vector<std::string> violations)
    : ConfigError("invalid configuration: " + join(violations)),
      violations_(std::move(violations)) {}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> errs;
  const auto positive = [&](std::size_t v, const char* key) {
    if (v == 0) errs.push_back(std::string(key) + ": must be a positive integer");
  };
  positive(c.d, "d");
  positive(c.tasks, "T");
  positive(c.horizon, "N");
  positive(c.arms, "K");
  positive(c.rank, "r");
  positive(c.repetitions, "repetitions");
  if (c.rank > std::min(c.d, c.tasks)) {
    errs.push_back("r: rank " + std::to_string(c.rank) + " exceeds min(d, T) = " +
                   std::to_string(std::min(c.d, c.tasks)));
  }
  if (!(c.sigma2 >= 0.0) || !std::isfinite(c.sigma2)) errs.push_back("sigma2: must be >= 0");
  if (!(c.column_norm_cap > 0.0) || !std::isfinite(c.column_norm_cap)) {
    errs.push_back("L: must be > 0");
  }
  if (!(c.lambda_scale > 0.0) || !std::isfinite(c.lambda_scale)) {
    errs.push_back("lambda_l: must be > 0");
  }
  if (!(c.lambda_delta > 0.0 && c.lambda_delta < 1.0)) {
    errs.push_back("lambda_delta: must lie in (0, 1)");
  }
  if (c.policies.empty()) errs.push_back("policies: must name at least one policy");
  for (std::size_t i = 0; i < c.policies.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (c.policies[i] == c.policies[j]) {
        errs.push_back("policies[" + std::to_string(i) + "]: duplicate policy '" +
                       std::string(to_string(c.policies[i])) + "'");
      }
    }
  }
  return errs;
}

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError({std::string("<root>: malformed JSON: ") + e.what()});
  }
  if (!doc.is_object()) throw ValidationError({"<root>: configuration must be a JSON object"});

  ExperimentConfig c;
  std::vector<std::string> errs;

  const auto count = [&](std::size_t& field) {
    return [&field](const json& v, const std::string& key, std::vector<std::string>& out) {
      if (!v.is_number_integer() || v.get<long long>() <= 0) {
        out.push_back(key + ": must be a positive integer");
        return;
      }
      field = v.get<std::size_t>();
    };
  };
  const auto real = [&](double& field) {
    return [&field](const json& v, const std::string& key, std::vector<std::string>& out) {
      if (!v.is_number()) {
        out.push_back(key + ": must be a number");
        return;
      }
      field = v.get<double>();
    };
  };
  const auto flag = [&](bool& field) {
    return [&field](const json& v, const std::string& key, std::vector<std::string>& out) {
      if (!v.is_boolean()) {
        out.push_back(key + ": must be true or false");
        return;
      }
      field = v.get<bool>();
    };
  };
  const auto choice = [](auto parse, auto& field) {
    return [parse, &field](const json& v, const std::string& key, std::vector<std::string>& out) {
      if (!v.is_string()) {
        out.push_back(key + ": must be a string");
        return;
      }
      try {
        field = parse(v.get<std::string>());
      } catch (const ConfigError& e) {
        out.push_back(key + ": " + e.what());
      }
    };
  };

  using Handler = std::function<void(const json&, const std::string&, std::vector<std::string>&)>;
  const std::map<std::string, Handler> handlers{
      {"name",
       [&](const json& v, const std::string& key, std::vector<std::string>& out) {
         if (!v.is_string()) {
           out.push_back(key + ": must be a string");
           return;
         }
         c.name = v.get<std::string>();
       }},
      {"d", count(c.d)},
      {"T", count(c.tasks)},
      {"N", count(c.horizon)},
      {"K", count(c.arms)},
      {"r", count(c.rank)},
      {"repetitions", count(c.repetitions)},
      {"sigma2", real(c.sigma2)},
      {"L", real(c.column_norm_cap)},
      {"lambda_l", real(c.lambda_scale)},
      {"lambda_delta", real(c.lambda_delta)},
      {"fix_task_matrix", flag(c.fix_task_matrix)},
      {"emit_diagnostics", flag(c.emit_diagnostics)},
      {"arm_kind", choice(parse_arm_kind, c.arm_kind)},
      {"lambda_variant", choice(parse_lambda_variant, c.lambda_variant)},
      {"mlingreedy_rank_mode", choice(parse_rank_mode, c.mlingreedy_rank_mode)},
      {"master_seed",
       [&](const json& v, const std::string& key, std::vector<std::string>& out) {
         if (!v.is_number_unsigned()) {
           out.push_back(key + ": must be a non-negative 64-bit integer");
           return;
         }
         c.master_seed = v.get<std::uint64_t>();
       }},
      {"policies",
       [&](const json& v, const std::string& key, std::vector<std::string>& out) {
         if (!v.is_array()) {
           out.push_back(key + ": must be a list of policy names");
           return;
         }
         c.policies.clear();
         for (std::size_t i = 0; i < v.size(); ++i) {
           const std::string path = key + "[" + std::to_string(i) + "]";
           if (!v[i].is_string()) {
             out.push_back(path + ": must be a string");
             continue;
           }
           try {
             c.policies.push_back(parse_policy_kind(v[i].get<std::string>()));
           } catch (const ConfigError& e) {
             out.push_back(path + ": " + e.what());
           }
         }
       }},
  };

  for (const auto& [key, value] : doc.items()) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) {
      errs.push_back(key + ": unknown key");
      continue;
    }
    it->second(value, key, errs);
  }
  for (auto& e : validate(c)) {
    // Type errors already name the field; skip duplicate complaints about it.
    const std::string field = e.substr(0, e.find(':'));
    const bool seen = std::any_of(errs.begin(), errs.end(), [&](const std::string& prior) {
      return prior.rfind(field + ":", 0) == 0;
    });
    if (!seen) errs.push_back(std::move(e));
  }
  if (!errs.empty()) throw ValidationError(std::move(errs));
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string to_json(const ExperimentConfig& c) {
  json policies = json::array();
  for (const auto p : c.policies) policies.push_back(std::string(to_string(p)));
  const json doc = {
      {"name", c.name},
      {"d", c.d},
      {"T", c.tasks},
      {"N", c.horizon},
      {"K", c.arms},
      {"r", c.rank},
      {"sigma2", c.sigma2},
      {"L", c.column_norm_cap},
      {"arm_kind", std::string(to_string(c.arm_kind))},
      {"policies", policies},
      {"lambda_variant", std::string(to_string(c.lambda_variant))},
      {"lambda_l", c.lambda_scale},
      {"lambda_delta", c.lambda_delta},
      {"mlingreedy_rank_mode", std::string(to_string(c.mlingreedy_rank_mode))},
      {"repetitions", c.repetitions},
      {"master_seed", c.master_seed},
      {"fix_task_matrix", c.fix_task_matrix},
      {"emit_diagnostics", c.emit_diagnostics},
  };
  return doc.dump(2);
}

}  // namespace lrb
