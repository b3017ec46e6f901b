#include "icl/config.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "icl/errors.hpp"
#include "icl/rng.hpp"

namespace icl {

const char* suite_name(Suite s) {
  switch (s) {
    case Suite::kRiskEquivalence: return "risk-equivalence";
    case Suite::kMinima: return "minima";
    case Suite::kGap: return "gap";
    case Suite::kFlow: return "flow";
    case Suite::kBayes: return "bayes";
    case Suite::kMoments: return "moments";
    case Suite::kAll: return "all";
  }
  return "?";
}

std::optional<Suite> parse_suite(const std::string& name) {
  for (Suite s : {Suite::kRiskEquivalence, Suite::kMinima, Suite::kGap, Suite::kFlow,
                  Suite::kBayes, Suite::kMoments, Suite::kAll}) {
    if (name == suite_name(s)) return s;
  }
  return std::nullopt;
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& value, const char* key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("config key '") + key + "': malformed numeric value '" + value +
                      "'");
  }
}

long long parse_int(const std::string& value, const char* key) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("config key '") + key + "': malformed integer value '" + value +
                      "'");
  }
}

std::vector<double> parse_double_list(const std::string& csv, const char* key) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), key));
  if (out.empty()) {
    throw ConfigError(std::string("config key '") + key + "': empty list");
  }
  return out;
}

}  // namespace

PsdMatrix build_covariance(const std::string& rule, int d, const char* key) {
  if (rule == "identity") return PsdMatrix::identity(d);
  if (rule.rfind("diag:", 0) == 0) {
    const std::vector<double> diag = parse_double_list(rule.substr(5), key);
    if (static_cast<int>(diag.size()) != d) {
      throw ConfigError(std::string("config key '") + key + "': diag rule needs exactly d=" +
                        std::to_string(d) + " entries");
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) {
      if (diag[i] < 0.0) {
        throw ConfigError(std::string("config key '") + key + "': diagonal entries must be >= 0");
      }
      m(i, i) = diag[i];
    }
    return PsdMatrix(m);
  }
  if (rule.rfind("random-psd:", 0) == 0) {
    const std::vector<double> args = parse_double_list(rule.substr(11), key);
    if (args.size() != 2) {
      throw ConfigError(std::string("config key '") + key + "': random-psd rule takes rank,seed");
    }
    const int rank = static_cast<int>(args[0]);
    if (rank < 1 || rank > d) {
      throw ConfigError(std::string("config key '") + key + "': random-psd rank must be in [1,d]");
    }
    RngStream rng(static_cast<std::uint64_t>(args[1]), 0x9d5f);
    const Eigen::MatrixXd factor = rng.gaussian_matrix(d, rank);
    return PsdMatrix(factor * factor.transpose() / static_cast<double>(rank));
  }
  throw ConfigError(std::string("config key '") + key + "': unknown covariance rule '" + rule +
                    "'");
}

Eigen::VectorXd build_beta_star(const std::string& rule, int d, const char* key) {
  if (rule == "zeros") return Eigen::VectorXd::Zero(d);
  if (rule.rfind("const:", 0) == 0) {
    return Eigen::VectorXd::Constant(d, parse_double(trim(rule.substr(6)), key));
  }
  if (rule.rfind("list:", 0) == 0) {
    const std::vector<double> values = parse_double_list(rule.substr(5), key);
    if (static_cast<int>(values.size()) != d) {
      throw ConfigError(std::string("config key '") + key + "': list rule needs exactly d=" +
                        std::to_string(d) + " entries");
    }
    return Eigen::Map<const Eigen::VectorXd>(values.data(), d);
  }
  throw ConfigError(std::string("config key '") + key + "': unknown beta_star rule '" + rule +
                    "'");
}

TaskSpec ExperimentConfig::make_task_spec() const {
  return TaskSpec(d, m, build_covariance(h_rule, d, "H"), build_covariance(psi_rule, d, "Psi"),
                  build_beta_star(beta_star_rule, d, "beta_star"), sigma2);
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::map<std::string, std::string> kv;

  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    const auto sep = line.find_first_of("=:");
    if (sep == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, sep));
    const std::string value = trim(line.substr(sep + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
    }
    if (kv.count(key)) {
      throw ConfigError("config key '" + key + "': duplicated");
    }
    kv[key] = value;
  }

  for (const auto& [key, value] : kv) {
    if (key == "suite") {
      const auto s = parse_suite(value);
      if (!s) throw ConfigError("config key 'suite': unknown suite '" + value + "'");
      cfg.suite = *s;
      cfg.suite_set = true;
    } else if (key == "d") {
      cfg.d = static_cast<int>(parse_int(value, "d"));
    } else if (key == "M") {
      cfg.m = static_cast<int>(parse_int(value, "M"));
    } else if (key == "H") {
      cfg.h_rule = value;
    } else if (key == "Psi") {
      cfg.psi_rule = value;
    } else if (key == "beta_star") {
      cfg.beta_star_rule = value;
    } else if (key == "sigma2") {
      cfg.sigma2 = parse_double(value, "sigma2");
    } else if (key == "n_samples") {
      cfg.n_samples = parse_int(value, "n_samples");
    } else if (key == "shards") {
      cfg.shards = static_cast<int>(parse_int(value, "shards"));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_int(value, "seed"));
      cfg.seed_set = true;
    } else if (key == "reps") {
      cfg.reps = static_cast<int>(parse_int(value, "reps"));
    } else if (key == "restarts") {
      cfg.restarts = static_cast<int>(parse_int(value, "restarts"));
    } else if (key == "dt") {
      cfg.dt = parse_double(value, "dt");
    } else if (key == "T") {
      cfg.t_end = parse_double(value, "T");
    } else if (key == "flow_init") {
      cfg.flow_init = value;
    } else if (key == "record_every") {
      cfg.record_every = static_cast<int>(parse_int(value, "record_every"));
    } else {
      throw ConfigError("config key '" + key + "': unknown key");
    }
  }

  if (!cfg.seed_set) throw ConfigError("config key 'seed': required (no wall-clock seeding)");
  if (cfg.d < 1) throw ConfigError("config key 'd': must be >= 1");
  if (cfg.m < 1) throw ConfigError("config key 'M': must be >= 1");
  if (cfg.sigma2 < 0.0) throw ConfigError("config key 'sigma2': must be >= 0");
  if (cfg.n_samples < 2) throw ConfigError("config key 'n_samples': must be >= 2");
  if (cfg.shards < 1) throw ConfigError("config key 'shards': must be >= 1");
  if (cfg.reps < 1) throw ConfigError("config key 'reps': must be >= 1");
  if (cfg.restarts < 1) throw ConfigError("config key 'restarts': must be >= 1");
  if (cfg.dt < 0.0) throw ConfigError("config key 'dt': must be >= 0 (0 = auto)");
  if (cfg.t_end < 0.0) throw ConfigError("config key 'T': must be >= 0 (0 = auto)");
  if (cfg.record_every < 1) throw ConfigError("config key 'record_every': must be >= 1");
  if (cfg.flow_init != "zero" && cfg.flow_init != "optimum" &&
      cfg.flow_init.rfind("random:", 0) != 0) {
    throw ConfigError("config key 'flow_init': expected zero | optimum | random:<seed>");
  }
  if (cfg.flow_init.rfind("random:", 0) == 0) {
    parse_int(trim(cfg.flow_init.substr(7)), "flow_init");
  }

  // Validate the spec-construction rules eagerly so errors surface at load.
  cfg.make_task_spec();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file '" + path + "': cannot open");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

}  // namespace icl
