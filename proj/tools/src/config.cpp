#include "pbcnet/cli/config.hpp"

#include "pbcnet/converters.hpp"
#include "pbcnet/errors.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pbcnet::cli {

ConfigError::ConfigError(const std::string& message, std::optional<int> line, std::string key)
    : std::runtime_error([&] {
        std::string prefix;
        if (line) prefix += "line " + std::to_string(*line) + ": ";
        if (!key.empty()) prefix += "'" + key + "': ";
        return prefix + message;
      }()),
      message_(message),
      line_(line),
      key_(std::move(key)) {}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Ideal:
      return "ideal";
    case ScenarioKind::Perturb:
      return "perturb";
    case ScenarioKind::LoadDip:
      return "load-dip";
  }
  return "ideal";
}

std::optional<ScenarioKind> scenario_kind_from_string(std::string_view name) {
  if (name == "ideal") return ScenarioKind::Ideal;
  if (name == "perturb") return ScenarioKind::Perturb;
  if (name == "load-dip") return ScenarioKind::LoadDip;
  return std::nullopt;
}

namespace {

int line_of(const YAML::Node& node) { return node.Mark().line + 1; }

[[noreturn]] void fail(const YAML::Node& node, const std::string& key, const std::string& message) {
  throw ConfigError(message, line_of(node), key);
}

void check_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) {
  if (!map.IsMap()) fail(map, where, "expected a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(kv.first, key, "unknown key in " + where);
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) fail(node, key, "expected a scalar value");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(node, key, "cannot convert '" + node.Scalar() + "'");
  }
}

double number(const YAML::Node& node, const std::string& key) {
  const double v = scalar<double>(node, key);
  if (!std::isfinite(v)) fail(node, key, "value must be finite");
  return v;
}

YAML::Node required(const YAML::Node& map, const std::string& key) {
  YAML::Node node = map[key];
  if (!node) fail(map, key, "missing required key");
  return node;
}

double positive(const YAML::Node& map, const std::string& key) {
  const YAML::Node node = required(map, key);
  const double v = number(node, key);
  if (!(v > 0.0)) fail(node, key, "must be positive");
  return v;
}

template <typename T>
void optional_value(const YAML::Node& map, const std::string& key, T& out) {
  if (const YAML::Node node = map[key]) out = scalar<T>(node, key);
}

void optional_number(const YAML::Node& map, const std::string& key, std::optional<double>& out) {
  if (const YAML::Node node = map[key]) out = number(node, key);
}

bool valid_id(const std::string& id) {
  if (id.empty() || id == "series" || id == "parallel") return false;
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

ConverterConfig parse_converter(const YAML::Node& node) {
  check_keys(node, {"id", "topology", "L", "C", "E", "k", "i0", "v0", "v_target"}, "converter");
  ConverterConfig c;
  c.id = scalar<std::string>(required(node, "id"), "id");
  if (!valid_id(c.id)) fail(node["id"], "id", "invalid converter id '" + c.id + "'");
  const YAML::Node topo = required(node, "topology");
  const auto name = scalar<std::string>(topo, "topology");
  const auto topology = topology_from_string(name);
  if (!topology) fail(topo, "topology", "unknown topology '" + name + "'");
  c.topology = *topology;
  c.inductance = positive(node, "L");
  c.capacitance = positive(node, "C");
  c.source_voltage = positive(node, "E");
  c.gain = positive(node, "k");
  c.initial_current = number(required(node, "i0"), "i0");
  c.initial_voltage = number(required(node, "v0"), "v0");
  c.target_voltage = positive(node, "v_target");
  return c;
}

void count_parallel(const NetworkNode& node, std::vector<const NetworkNode*>& out) {
  if (node.kind == NetworkNode::Kind::Parallel) out.push_back(&node);
  for (const auto& child : node.children) count_parallel(child, out);
}

void attach_splits(NetworkNode& node, const std::vector<std::vector<double>>& splits, std::size_t& next) {
  if (node.kind == NetworkNode::Kind::Parallel) node.split = splits.at(next++);
  for (auto& child : node.children) attach_splits(child, splits, next);
}

std::vector<std::string> ids_of(const RunConfig& config) {
  std::vector<std::string> ids;
  for (const auto& c : config.converters) ids.push_back(c.id);
  return ids;
}

class TreeParser {
 public:
  TreeParser(std::string_view text, const std::vector<std::string>& ids) : text_(text), ids_(ids) {}

  NetworkNode parse() {
    NetworkNode node = expr();
    skip_space();
    if (pos_ != text_.size()) error("unexpected trailing input");
    return node;
  }

 private:
  NetworkNode expr() {
    skip_space();
    const std::size_t start = pos_;
    const std::string word = identifier();
    if (word.empty()) error("expected a converter id, series(...) or parallel(...)");
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      NetworkNode::Kind kind;
      if (word == "series") {
        kind = NetworkNode::Kind::Series;
      } else if (word == "parallel") {
        kind = NetworkNode::Kind::Parallel;
      } else {
        pos_ = start;
        error("unknown combinator '" + word + "'");
      }
      ++pos_;
      std::vector<NetworkNode> children;
      for (;;) {
        children.push_back(expr());
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (pos_ < text_.size() && text_[pos_] == ')') {
          ++pos_;
          break;
        }
        error("expected ',' or ')'");
      }
      return kind == NetworkNode::Kind::Series ? NetworkNode::series(std::move(children))
                                               : NetworkNode::parallel(std::move(children), {});
    }
    for (std::size_t k = 0; k < ids_.size(); ++k) {
      if (ids_[k] == word) return NetworkNode::make_leaf(k);
    }
    pos_ = start;
    error("network references undefined converter id '" + word + "'");
  }

  std::string identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const auto c = static_cast<unsigned char>(text_[pos_]);
      if (!(std::isalnum(c) || c == '_' || c == '-')) break;
      ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void error(const std::string& message) const {
    throw ConfigError(message + " at column " + std::to_string(pos_ + 1), std::nullopt, "network");
  }

  std::string_view text_;
  const std::vector<std::string>& ids_;
  std::size_t pos_ = 0;
};

std::string format_number(double v) { return fmt::format("{}", v); }

}  // namespace

NetworkNode parse_tree_expression(std::string_view text, const std::vector<std::string>& ids) {
  return TreeParser(text, ids).parse();
}

std::string render_tree_expression(const NetworkNode& node, const std::vector<std::string>& ids) {
  if (node.kind == NetworkNode::Kind::Leaf) return ids.at(node.leaf);
  std::string out = node.kind == NetworkNode::Kind::Series ? "series(" : "parallel(";
  for (std::size_t c = 0; c < node.children.size(); ++c) {
    if (c > 0) out += ", ";
    out += render_tree_expression(node.children[c], ids);
  }
  return out + ")";
}

RunConfig parse_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line + 1);
  }
  if (!root || root.IsNull()) throw ConfigError("empty configuration");
  check_keys(root, {"converters", "network", "splits", "load", "scenario", "output"}, "configuration");

  RunConfig config;
  const YAML::Node converters = required(root, "converters");
  if (!converters.IsSequence() || converters.size() == 0) {
    fail(converters, "converters", "converter list must be a non-empty sequence");
  }
  std::set<std::string> seen;
  for (const auto& node : converters) {
    ConverterConfig c = parse_converter(node);
    if (!seen.insert(c.id).second) fail(node["id"], "id", "duplicate converter id '" + c.id + "'");
    config.converters.push_back(std::move(c));
  }

  const YAML::Node network = required(root, "network");
  config.network = scalar<std::string>(network, "network");
  if (const YAML::Node splits = root["splits"]) {
    if (!splits.IsSequence()) fail(splits, "splits", "expected a list of split lists");
    for (const auto& s : splits) {
      if (!s.IsSequence()) fail(s, "splits", "each parallel node needs a list of fractions");
      std::vector<double> fractions;
      for (const auto& f : s) fractions.push_back(number(f, "splits"));
      config.splits.push_back(std::move(fractions));
    }
  }
  config.load = positive(root, "load");
  optional_value(root, "output", config.output);

  if (const YAML::Node sc = root["scenario"]) {
    check_keys(sc, {"kind", "dt", "t_end", "controller_period", "seed", "perturb", "load_dip"}, "scenario");
    ScenarioConfig& s = config.scenario;
    if (const YAML::Node kind = sc["kind"]) {
      const auto name = scalar<std::string>(kind, "kind");
      const auto parsed = scenario_kind_from_string(name);
      if (!parsed) fail(kind, "kind", "unknown scenario '" + name + "'");
      s.kind = *parsed;
    }
    optional_value(sc, "dt", s.dt);
    optional_value(sc, "t_end", s.t_end);
    optional_value(sc, "controller_period", s.controller_period);
    optional_value(sc, "seed", s.seed);
    if (const YAML::Node p = sc["perturb"]) {
      check_keys(p, {"peak_to_peak", "hold_period", "t_end", "steady_band_start"}, "perturb");
      optional_value(p, "peak_to_peak", s.perturb.peak_to_peak);
      optional_number(p, "hold_period", s.perturb.hold_period);
      optional_number(p, "t_end", s.perturb.t_end);
      optional_value(p, "steady_band_start", s.perturb.steady_band_start);
    }
    if (const YAML::Node d = sc["load_dip"]) {
      check_keys(d, {"factor", "start", "stop", "t_end"}, "load_dip");
      optional_value(d, "factor", s.load_dip.factor);
      optional_value(d, "start", s.load_dip.start);
      optional_value(d, "stop", s.load_dip.stop);
      optional_number(d, "t_end", s.load_dip.t_end);
    }
  }

  // Structural checks that need the whole document.
  const NetworkSpec spec = [&] {
    try {
      return build_network_spec(config);
    } catch (const ConfigError& e) {
      throw ConfigError(e.message(), line_of(network), e.key());
    }
  }();
  (void)spec;
  for (ScenarioKind kind : {ScenarioKind::Ideal, ScenarioKind::Perturb, ScenarioKind::LoadDip}) {
    try {
      build_scenario(config, kind);
    } catch (const DomainError& e) {
      throw ConfigError(e.what(), root["scenario"] ? std::optional<int>(line_of(root["scenario"])) : std::nullopt,
                        "scenario");
    }
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string render_config(const RunConfig& config) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "converters" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : config.converters) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << c.id;
    out << YAML::Key << "topology" << YAML::Value << to_string(c.topology);
    out << YAML::Key << "L" << YAML::Value << format_number(c.inductance);
    out << YAML::Key << "C" << YAML::Value << format_number(c.capacitance);
    out << YAML::Key << "E" << YAML::Value << format_number(c.source_voltage);
    out << YAML::Key << "k" << YAML::Value << format_number(c.gain);
    out << YAML::Key << "i0" << YAML::Value << format_number(c.initial_current);
    out << YAML::Key << "v0" << YAML::Value << format_number(c.initial_voltage);
    out << YAML::Key << "v_target" << YAML::Value << format_number(c.target_voltage);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "network" << YAML::Value << YAML::DoubleQuoted << config.network;
  out << YAML::Key << "splits" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : config.splits) {
    out << YAML::Flow << YAML::BeginSeq;
    for (double f : s) out << format_number(f);
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "load" << YAML::Value << format_number(config.load);

  const ScenarioConfig& s = config.scenario;
  out << YAML::Key << "scenario" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << to_string(s.kind);
  out << YAML::Key << "dt" << YAML::Value << format_number(s.dt);
  out << YAML::Key << "t_end" << YAML::Value << format_number(s.t_end);
  out << YAML::Key << "controller_period" << YAML::Value << format_number(s.controller_period);
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  out << YAML::Key << "perturb" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "peak_to_peak" << YAML::Value << format_number(s.perturb.peak_to_peak);
  if (s.perturb.hold_period) {
    out << YAML::Key << "hold_period" << YAML::Value << format_number(*s.perturb.hold_period);
  }
  if (s.perturb.t_end) out << YAML::Key << "t_end" << YAML::Value << format_number(*s.perturb.t_end);
  out << YAML::Key << "steady_band_start" << YAML::Value << format_number(s.perturb.steady_band_start);
  out << YAML::EndMap;
  out << YAML::Key << "load_dip" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "factor" << YAML::Value << format_number(s.load_dip.factor);
  out << YAML::Key << "start" << YAML::Value << format_number(s.load_dip.start);
  out << YAML::Key << "stop" << YAML::Value << format_number(s.load_dip.stop);
  if (s.load_dip.t_end) out << YAML::Key << "t_end" << YAML::Value << format_number(*s.load_dip.t_end);
  out << YAML::EndMap;
  out << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << config.output;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

NetworkSpec build_network_spec(const RunConfig& config) {
  if (config.converters.empty()) throw ConfigError("converter list is empty", std::nullopt, "converters");
  const std::vector<std::string> ids = ids_of(config);
  NetworkSpec spec;
  spec.root = parse_tree_expression(config.network, ids);

  std::vector<const NetworkNode*> parallels;
  count_parallel(spec.root, parallels);
  if (parallels.size() != config.splits.size()) {
    throw ConfigError(fmt::format("network has {} parallel node(s) but {} split list(s) are given",
                                  parallels.size(), config.splits.size()),
                      std::nullopt, "splits");
  }
  std::size_t next = 0;
  attach_splits(spec.root, config.splits, next);

  spec.physical_load = config.load;
  for (const auto& c : config.converters) {
    spec.voltage_targets.push_back(c.target_voltage);
    spec.leaf_names.push_back(c.id);
  }
  try {
    validate_spec(spec);
  } catch (const ConsistencyError& e) {
    throw ConfigError(e.what(), std::nullopt, "network");
  }
  return spec;
}

std::vector<ConverterModel> build_leaf_models(const RunConfig& config) {
  std::vector<ConverterModel> out;
  for (const auto& c : config.converters) {
    out.push_back(make_converter({c.topology, c.inductance, c.capacitance, c.source_voltage, 1.0}));
  }
  return out;
}

std::vector<double> gains(const RunConfig& config) {
  std::vector<double> out;
  for (const auto& c : config.converters) out.push_back(c.gain);
  return out;
}

Scenario build_scenario(const RunConfig& config, ScenarioKind kind) {
  const ScenarioConfig& s = config.scenario;
  Scenario out;
  out.dt = s.dt;
  out.t_end = s.t_end;
  out.controller_period = s.controller_period;
  for (const auto& c : config.converters) {
    Vector x(2);
    x << c.initial_current, c.initial_voltage;
    out.initial_state.push_back(x);
  }
  switch (kind) {
    case ScenarioKind::Ideal:
      out.disturbance = IdealScenario{};
      break;
    case ScenarioKind::Perturb:
      out.disturbance = InputPerturbation{s.perturb.peak_to_peak, s.seed,
                                          s.perturb.hold_period.value_or(s.controller_period)};
      if (s.perturb.t_end) out.t_end = *s.perturb.t_end;
      break;
    case ScenarioKind::LoadDip:
      out.disturbance = LoadFluctuation{s.load_dip.factor, s.load_dip.start, s.load_dip.stop};
      if (s.load_dip.t_end) out.t_end = *s.load_dip.t_end;
      break;
  }
  out.validate();
  return out;
}

}  // namespace pbcnet::cli
