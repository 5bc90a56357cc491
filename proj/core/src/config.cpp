#include "uda/config.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "json.hpp"
#include "uda/error.hpp"
#include "visit.hpp"

namespace uda {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void check_name(const std::string& name, const std::string& where) {
  if (name.empty()) throw ConfigError(where + ": empty name");
  for (char c : name) {
    if (c == ',' || c == '/' || c == '\\' || c == '|' || std::isspace(static_cast<unsigned char>(c))) {
      throw ConfigError(where + ": name '" + name + "' may not contain separators or spaces");
    }
  }
}

json parse_text(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(where + ": " + e.what());
  }
}

// ---- shift specs ----

ShiftSpec shift_from(const json& j, const std::string& where) {
  check_keys(j, {"base", "n_per_domain", "rotation_deg", "translation", "noise_sigma", "class_count",
                 "dim", "seed"},
             where);
  ShiftSpec s;
  s.base = parse_shift_base(get_or<std::string>(j, "base", to_string(s.base), where));
  s.n_per_domain = get_or<std::size_t>(j, "n_per_domain", s.n_per_domain, where);
  s.rotation_deg = get_or<double>(j, "rotation_deg", s.rotation_deg, where);
  s.translation = get_or<std::vector<double>>(j, "translation", s.translation, where);
  s.noise_sigma = get_or<double>(j, "noise_sigma", s.noise_sigma, where);
  s.class_count = get_or<std::size_t>(j, "class_count", s.class_count, where);
  s.dim = get_or<std::size_t>(j, "dim", s.dim, where);
  s.seed = get_or<std::uint64_t>(j, "seed", s.seed, where);
  try {
    s.validate();
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return s;
}

ojson shift_to(const ShiftSpec& s) {
  ojson j;
  j["base"] = to_string(s.base);
  j["n_per_domain"] = s.n_per_domain;
  j["rotation_deg"] = s.rotation_deg;
  j["translation"] = s.translation;
  j["noise_sigma"] = s.noise_sigma;
  j["class_count"] = s.class_count;
  j["dim"] = s.dim;
  j["seed"] = s.seed;
  return j;
}

// ---- algorithms ----

KernelSpec kernel_from(const json& j, const std::string& where) {
  check_keys(j, {"bandwidths", "median_multipliers"}, where);
  if (j.contains("bandwidths") && j.contains("median_multipliers")) {
    throw ConfigError(where + ": give either bandwidths or median_multipliers");
  }
  KernelSpec k = j.contains("bandwidths")
                     ? KernelSpec::fixed(get_or<std::vector<double>>(j, "bandwidths", {}, where))
                     : KernelSpec::median(get_or<std::vector<double>>(
                           j, "median_multipliers", KernelSpec::median().multipliers, where));
  return k;
}

ojson kernel_to(const KernelSpec& k) {
  ojson j;
  if (k.median_heuristic) {
    j["median_multipliers"] = k.multipliers;
  } else {
    j["bandwidths"] = k.bandwidths;
  }
  return j;
}

GrlCoefficient grl_from(const json& j, const std::string& where) {
  check_keys(j, {"value", "schedule", "gamma"}, where);
  GrlCoefficient g;
  g.value = get_or<double>(j, "value", g.value, where);
  const auto sched = get_or<std::string>(j, "schedule", "constant", where);
  if (sched == "constant") {
    g.schedule = GrlCoefficient::Schedule::kConstant;
  } else if (sched == "ramp") {
    g.schedule = GrlCoefficient::Schedule::kRamp;
  } else {
    throw ConfigError(where + ".schedule: expected constant or ramp, got " + sched);
  }
  g.gamma = get_or<double>(j, "gamma", g.gamma, where);
  return g;
}

ojson grl_to(const GrlCoefficient& g) {
  ojson j;
  j["value"] = g.value;
  j["schedule"] = g.schedule == GrlCoefficient::Schedule::kRamp ? "ramp" : "constant";
  j["gamma"] = g.gamma;
  return j;
}

AlgorithmConfig algorithm_from(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("method")) throw ConfigError(where + ": missing method");
  const auto method = get_or<std::string>(j, "method", "", where);
  AlgorithmConfig cfg;
  cfg.label = get_or<std::string>(j, "label", "", where);
  auto grl = [&](GrlCoefficient fallback) {
    return j.contains("grl") ? grl_from(j["grl"], where + ".grl") : fallback;
  };
  auto kernel = [&](KernelSpec fallback) {
    return j.contains("kernel") ? kernel_from(j["kernel"], where + ".kernel") : fallback;
  };
  if (method == "source_only") {
    check_keys(j, {"method", "label", "optimizer"}, where);
    cfg.method = SourceOnlyConfig{};
  } else if (method == "coral" || method == "bnm") {
    check_keys(j, {"method", "label", "optimizer", "lam", "ramp"}, where);
    const double lam = get_or<double>(j, "lam", 1.0, where);
    const bool ramp = get_or<bool>(j, "ramp", false, where);
    if (method == "coral") {
      cfg.method = CoralConfig{lam, ramp};
    } else {
      cfg.method = BnmConfig{lam, ramp};
    }
  } else if (method == "dan" || method == "dsan") {
    check_keys(j, {"method", "label", "optimizer", "lam", "ramp", "kernel"}, where);
    const double lam = get_or<double>(j, "lam", 1.0, where);
    const bool ramp = get_or<bool>(j, "ramp", false, where);
    if (method == "dan") {
      cfg.method = DanConfig{lam, ramp, kernel(KernelSpec::median())};
    } else {
      cfg.method = DsanConfig{lam, ramp, kernel(KernelSpec::median())};
    }
  } else if (method == "dann") {
    check_keys(j, {"method", "label", "optimizer", "lam", "grl"}, where);
    DannConfig c;
    c.lam = get_or<double>(j, "lam", c.lam, where);
    c.grl = grl(c.grl);
    cfg.method = c;
  } else if (method == "ssrt") {
    check_keys(j, {"method", "label", "optimizer", "alpha", "beta", "omega", "eps", "lambda_max",
                   "interval", "perturb_layer", "collapse_ratio", "safe_training", "grl"},
               where);
    SsrtConfig c;
    c.alpha = get_or<double>(j, "alpha", c.alpha, where);
    c.beta = get_or<double>(j, "beta", c.beta, where);
    c.omega = get_or<double>(j, "omega", c.omega, where);
    c.eps = get_or<double>(j, "eps", c.eps, where);
    c.lambda_max = get_or<double>(j, "lambda_max", c.lambda_max, where);
    c.interval = get_or<std::uint64_t>(j, "interval", c.interval, where);
    c.perturb_layer = get_or<std::size_t>(j, "perturb_layer", c.perturb_layer, where);
    c.collapse_ratio = get_or<double>(j, "collapse_ratio", c.collapse_ratio, where);
    c.safe_training = get_or<bool>(j, "safe_training", c.safe_training, where);
    c.grl = grl(c.grl);
    cfg.method = c;
  } else {
    throw ConfigError(where + ": unknown method '" + method + "'");
  }
  if (!cfg.label.empty()) check_name(cfg.label, where + ".label");
  cfg.validate();
  return cfg;
}

ojson algorithm_to(const AlgorithmConfig& cfg) {
  ojson j;
  j["method"] = cfg.method_name();
  j["label"] = cfg.name();
  std::visit(overloaded{
                 [](const SourceOnlyConfig&) {},
                 [&](const CoralConfig& c) {
                   j["lam"] = c.lam;
                   j["ramp"] = c.ramp;
                 },
                 [&](const DanConfig& c) {
                   j["lam"] = c.lam;
                   j["ramp"] = c.ramp;
                   j["kernel"] = kernel_to(c.kernel);
                 },
                 [&](const DannConfig& c) {
                   j["lam"] = c.lam;
                   j["grl"] = grl_to(c.grl);
                 },
                 [&](const DsanConfig& c) {
                   j["lam"] = c.lam;
                   j["ramp"] = c.ramp;
                   j["kernel"] = kernel_to(c.kernel);
                 },
                 [&](const BnmConfig& c) {
                   j["lam"] = c.lam;
                   j["ramp"] = c.ramp;
                 },
                 [&](const SsrtConfig& c) {
                   j["alpha"] = c.alpha;
                   j["beta"] = c.beta;
                   j["omega"] = c.omega;
                   j["eps"] = c.eps;
                   j["lambda_max"] = c.lambda_max;
                   j["interval"] = c.interval;
                   j["perturb_layer"] = c.perturb_layer;
                   j["collapse_ratio"] = c.collapse_ratio;
                   j["safe_training"] = c.safe_training;
                   j["grl"] = grl_to(c.grl);
                 },
             },
             cfg.method);
  return j;
}

// ---- optimizer overrides ----

void apply_optimizer(OptimizerConfig& o, const json& j, const std::string& where) {
  check_keys(j, {"lr0", "momentum", "weight_decay", "gamma", "decay"}, where);
  o.lr0 = get_or<double>(j, "lr0", o.lr0, where);
  o.momentum = get_or<double>(j, "momentum", o.momentum, where);
  o.weight_decay = get_or<double>(j, "weight_decay", o.weight_decay, where);
  o.gamma = get_or<double>(j, "gamma", o.gamma, where);
  o.decay = get_or<double>(j, "decay", o.decay, where);
  if (!(o.lr0 > 0.0)) throw ConfigError(where + ".lr0 must be positive");
  if (!(o.momentum >= 0.0 && o.momentum < 1.0)) throw ConfigError(where + ".momentum must lie in [0, 1)");
  if (!(o.weight_decay >= 0.0)) throw ConfigError(where + ".weight_decay must be >= 0");
  if (!(o.gamma >= 0.0) || !(o.decay >= 0.0)) throw ConfigError(where + ": gamma and decay must be >= 0");
}

ojson optimizer_to(const OptimizerConfig& o) {
  ojson j;
  j["lr0"] = o.lr0;
  j["momentum"] = o.momentum;
  j["weight_decay"] = o.weight_decay;
  j["gamma"] = o.gamma;
  j["decay"] = o.decay;
  return j;
}

// ---- domains ----

Domain domain_from(const json& j, const std::string& base_dir, const std::string& where,
                   ojson& resolved) {
  check_keys(j, {"name", "generator", "side", "csv"}, where);
  Domain d;
  d.name = get_or<std::string>(j, "name", "", where);
  check_name(d.name, where + ".name");
  resolved["name"] = d.name;
  if (j.contains("generator") == j.contains("csv")) {
    throw ConfigError(where + ": give exactly one of generator or csv");
  }
  if (j.contains("generator")) {
    const ShiftSpec spec = shift_from(j["generator"], where + ".generator");
    const auto side = get_or<std::string>(j, "side", "target", where);
    if (side != "source" && side != "target") {
      throw ConfigError(where + ".side: expected source or target, got " + side);
    }
    auto pair = make_shift_pair(spec);
    d.data = side == "source" ? std::move(pair.first) : std::move(pair.second);
    resolved["generator"] = shift_to(spec);
    resolved["side"] = side;
  } else {
    if (j.contains("side")) throw ConfigError(where + ": side applies to generator domains only");
    const json& c = j["csv"];
    check_keys(c, {"path", "label_column", "class_count"}, where + ".csv");
    const auto rel = get_or<std::string>(c, "path", "", where + ".csv");
    if (rel.empty()) throw ConfigError(where + ".csv.path is required");
    const auto path = std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel)
                                                               : std::filesystem::path(base_dir) / rel;
    const auto label = get_or<std::string>(c, "label_column", "label", where + ".csv");
    const auto classes = get_or<std::size_t>(c, "class_count", 0, where + ".csv");
    d.data = load_csv(path.string(), label, classes);
    ojson rc;
    rc["path"] = rel;
    rc["label_column"] = label;
    rc["class_count"] = d.data.class_count;
    resolved["csv"] = rc;
  }
  d.data.domain_tag = d.name;
  return d;
}

}  // namespace

BenchConfig parse_bench_config(const std::string& json_text, const std::string& base_dir) {
  const json j = parse_text(json_text, "config");
  check_keys(j, {"name", "domains", "pairs", "algorithms", "trainer", "model", "dump_embeddings",
                 "save_checkpoints"},
             "config");
  BenchConfig cfg;
  ojson out;
  cfg.name = get_or<std::string>(j, "name", cfg.name, "config");
  out["name"] = cfg.name;

  // Domains.
  if (!j.contains("domains") || !j["domains"].is_array()) throw ConfigError("config.domains: expected a list");
  out["domains"] = ojson::array();
  std::set<std::string> names;
  for (std::size_t i = 0; i < j["domains"].size(); ++i) {
    ojson rd;
    Domain d = domain_from(j["domains"][i], base_dir, "config.domains[" + std::to_string(i) + "]", rd);
    if (!names.insert(d.name).second) throw ConfigError("config.domains: duplicate domain name " + d.name);
    cfg.matrix.domains.push_back(std::make_shared<const Domain>(std::move(d)));
    out["domains"].push_back(rd);
  }
  if (cfg.matrix.domains.size() < 2) throw ConfigError("config.domains: at least two domains are required");

  // Pairs.
  out["pairs"] = ojson::array();
  if (j.contains("pairs")) {
    for (const json& p : j["pairs"]) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string()) {
        throw ConfigError("config.pairs: each entry must be [source, target]");
      }
      const auto s = p[0].get<std::string>(), t = p[1].get<std::string>();
      if (!names.count(s) || !names.count(t)) throw ConfigError("config.pairs: unknown domain in " + p.dump());
      if (s == t) throw ConfigError("config.pairs: source and target are both " + s);
      cfg.matrix.pairs.emplace_back(s, t);
      out["pairs"].push_back({s, t});
    }
  }

  // Trainer.
  const json trainer = j.value("trainer", json::object());
  check_keys(trainer, {"epochs", "iterations_per_epoch", "batch", "seeds", "target_labeled_fraction",
                       "optimizer"},
             "config.trainer");
  TaskSpec& base = cfg.matrix.base;
  base.epochs = get_or<std::size_t>(trainer, "epochs", base.epochs, "config.trainer");
  base.iterations_per_epoch =
      get_or<std::size_t>(trainer, "iterations_per_epoch", base.iterations_per_epoch, "config.trainer");
  base.batch = get_or<std::size_t>(trainer, "batch", base.batch, "config.trainer");
  base.seeds = get_or<std::vector<std::uint64_t>>(trainer, "seeds", base.seeds, "config.trainer");
  base.target_labeled_fraction = get_or<double>(trainer, "target_labeled_fraction",
                                                base.target_labeled_fraction, "config.trainer");
  if (base.seeds.empty()) throw ConfigError("config.trainer.seeds: at least one seed is required");
  if (base.batch == 0) throw ConfigError("config.trainer.batch must be positive");
  if (!(base.target_labeled_fraction >= 0.0 && base.target_labeled_fraction <= 1.0)) {
    throw ConfigError("config.trainer.target_labeled_fraction must lie in [0, 1]");
  }
  const json trainer_opt = trainer.value("optimizer", json::object());

  // Model.
  const json model = j.value("model", json::object());
  check_keys(model, {"ef_hidden", "feature_dim", "d_hidden"}, "config.model");
  base.model.ef_hidden = get_or<std::vector<std::size_t>>(model, "ef_hidden", base.model.ef_hidden, "config.model");
  base.model.feature_dim = get_or<std::size_t>(model, "feature_dim", base.model.feature_dim, "config.model");
  base.model.d_hidden = get_or<std::vector<std::size_t>>(model, "d_hidden", base.model.d_hidden, "config.model");
  if (base.model.feature_dim == 0) throw ConfigError("config.model.feature_dim must be positive");

  base.dump_embeddings = get_or<bool>(j, "dump_embeddings", false, "config");
  base.save_checkpoints = get_or<bool>(j, "save_checkpoints", false, "config");

  // Algorithms, each with its resolved optimizer. SourceOnly is added when absent.
  json algos = j.value("algorithms", json::array());
  if (!algos.is_array()) throw ConfigError("config.algorithms: expected a list");
  bool has_baseline = false;
  for (const json& a : algos) has_baseline = has_baseline || a.value("method", "") == "source_only";
  if (!has_baseline) algos.insert(algos.begin(), json{{"method", "source_only"}});
  out["algorithms"] = ojson::array();
  std::set<std::string> labels;
  for (std::size_t i = 0; i < algos.size(); ++i) {
    const std::string where = "config.algorithms[" + std::to_string(i) + "]";
    AlgorithmConfig a = algorithm_from(algos[i], where);
    if (!labels.insert(a.name()).second) throw ConfigError(where + ": duplicate algorithm name " + a.name());
    OptimizerConfig o = default_optimizer(a);
    apply_optimizer(o, trainer_opt, "config.trainer.optimizer");
    apply_optimizer(o, algos[i].value("optimizer", json::object()), where + ".optimizer");
    ojson ra = algorithm_to(a);
    ra["optimizer"] = optimizer_to(o);
    out["algorithms"].push_back(ra);
    cfg.matrix.algorithms.push_back(std::move(a));
    cfg.matrix.optimizers.push_back(o);
  }

  ojson rt;
  rt["epochs"] = base.epochs;
  rt["iterations_per_epoch"] = base.iterations_per_epoch;
  rt["batch"] = base.batch;
  rt["seeds"] = base.seeds;
  rt["target_labeled_fraction"] = base.target_labeled_fraction;
  out["trainer"] = rt;
  ojson rm;
  rm["ef_hidden"] = base.model.ef_hidden;
  rm["feature_dim"] = base.model.feature_dim;
  rm["d_hidden"] = base.model.d_hidden;
  out["model"] = rm;
  out["dump_embeddings"] = base.dump_embeddings;
  out["save_checkpoints"] = base.save_checkpoints;
  cfg.resolved_json = out.dump(2) + "\n";

  // Surface task-level errors (class counts, widths) before anything runs.
  expand_matrix(cfg.matrix);
  return cfg;
}

BenchConfig load_bench_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_bench_config(ss.str(), dir.empty() ? "." : dir.string());
}

ShiftSpec parse_shift_spec(const std::string& json_text) {
  return shift_from(parse_text(json_text, "shift spec"), "shift spec");
}

std::string shift_spec_json(const ShiftSpec& s) { return shift_to(s).dump(2) + "\n"; }

AlgorithmConfig parse_algorithm(const std::string& json_text) {
  return algorithm_from(parse_text(json_text, "algorithm"), "algorithm");
}

}  // namespace uda
