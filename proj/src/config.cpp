#include "spde/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "spde/errors.hpp"

namespace spde {
namespace {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front())
    return v.substr(1, v.size() - 2);
  return v;
}

// Strips a trailing comment, ignoring '#' inside quotes.
std::string_view strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string qualified(const std::string& section, const std::string& key) { return section + "." + key; }

double parse_double(const std::string& text, const std::string& what) {
  const auto t = trim(text);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (t.empty() || ec != std::errc() || ptr != end) throw ConfigError(what + ": expected a number, got '" + t + "'");
  return v;
}

std::int64_t parse_int(const std::string& text, const std::string& what) {
  const auto t = trim(text);
  std::int64_t v = 0;
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (t.empty() || ec != std::errc() || ptr != end) throw ConfigError(what + ": expected an integer, got '" + t + "'");
  return v;
}

std::size_t parse_count(const Config& c, const std::string& s, const std::string& k, std::int64_t fallback,
                        std::int64_t minimum) {
  const auto v = c.get_int(s, k, fallback);
  if (v < minimum) throw ConfigError(qualified(s, k) + " must be at least " + std::to_string(minimum));
  return static_cast<std::size_t>(v);
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& source) {
  Config c;
  c.source_ = source;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(strip_comment(line));
    if (body.empty()) continue;
    const auto where = source + ":" + std::to_string(line_no);
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      c.entries_[section];
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of a section");
    auto key = trim(std::string_view(body).substr(0, eq));
    auto value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (c.entries_[section].count(key)) throw ConfigError(where + ": duplicate key " + qualified(section, key));
    c.entries_[section][key] = value;
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void Config::set(const std::string& section, const std::string& key, std::string value) {
  entries_[section][key] = std::move(value);
}

bool Config::has(const std::string& section, const std::string& key) const { return raw(section, key).has_value(); }

std::optional<std::string> Config::raw(const std::string& section, const std::string& key) const {
  const auto s = entries_.find(section);
  if (s == entries_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

std::string Config::get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
  const auto v = raw(section, key);
  return v ? unquote(*v) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
  const auto v = raw(section, key);
  return v ? parse_double(unquote(*v), qualified(section, key)) : fallback;
}

std::optional<double> Config::get_optional_double(const std::string& section, const std::string& key) const {
  const auto v = raw(section, key);
  if (!v) return std::nullopt;
  return parse_double(unquote(*v), qualified(section, key));
}

std::int64_t Config::get_int(const std::string& section, const std::string& key, std::int64_t fallback) const {
  const auto v = raw(section, key);
  return v ? parse_int(unquote(*v), qualified(section, key)) : fallback;
}

std::optional<std::vector<double>> Config::get_list(const std::string& section, const std::string& key) const {
  const auto v = raw(section, key);
  if (!v) return std::nullopt;
  const auto what = qualified(section, key);
  auto body = trim(*v);
  if (body.size() < 2 || body.front() != '[' || body.back() != ']')
    throw ConfigError(what + ": expected a list [a, b, ...]");
  body = trim(std::string_view(body).substr(1, body.size() - 2));
  std::vector<double> out;
  if (body.empty()) return out;
  std::istringstream items(body);
  std::string item;
  while (std::getline(items, item, ',')) out.push_back(parse_double(item, what));
  return out;
}

void Config::check_keys(const std::map<std::string, std::vector<std::string>>& allowed) const {
  for (const auto& [section, keys] : entries_) {
    const auto a = allowed.find(section);
    if (a == allowed.end()) throw ConfigError(source_ + ": unknown section [" + section + "]");
    for (const auto& [key, value] : keys) {
      (void)value;
      if (std::find(a->second.begin(), a->second.end(), key) == a->second.end())
        throw ConfigError(source_ + ": unknown key " + qualified(section, key));
    }
  }
}

std::string Config::dump() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, keys] : entries_) {
    if (!first) out << '\n';
    first = false;
    out << '[' << section << "]\n";
    for (const auto& [key, value] : keys) out << key << " = " << value << '\n';
  }
  return out.str();
}

namespace {

const std::map<std::string, std::vector<std::string>>& allowed_keys() {
  static const std::map<std::string, std::vector<std::string>> keys{
      {"model",
       {"nu", "horizon", "reaction", "reaction_c", "reaction_slope", "reaction_intercept", "noise", "rho", "rho1",
        "rho2", "boundary", "left", "right", "gamma_left", "gamma_right", "initial", "sigma", "multiplier_base",
        "multiplier_wave"}},
      {"grid", {"n_space", "n_time", "dx", "dt"}},
      {"estimator", {"x0", "h", "bandwidth_constant", "beta", "alpha_bar", "zeta", "mode", "gamma", "nu"}},
      {"experiment",
       {"n_runs", "base_seed", "workers", "x0_grid", "nu_list", "gamma_list", "h_list", "output_dir", "trajectory",
        "t", "a_low", "a_high", "n_bins", "n_points", "time_stride", "buffer"}},
  };
  return keys;
}

ReactionFn build_reaction(const Config& c) {
  const auto name = c.get_string("model", "reaction", "allen_cahn");
  if (name == "allen_cahn") return allen_cahn_reaction();
  if (name == "zero") return zero_reaction();
  if (name == "constant") return constant_reaction(c.get_double("model", "reaction_c", 0.0));
  if (name == "linear")
    return linear_reaction(c.get_double("model", "reaction_slope", 0.0), c.get_double("model", "reaction_intercept", 0.0));
  throw ConfigError("model.reaction: unknown reaction '" + name + "'");
}

NoiseKind build_noise_kind(const Config& c) {
  const auto name = c.get_string("model", "noise", "white");
  if (name == "white") return WhiteNoise{};
  if (name == "riesz") return RieszNoise{c.get_double("model", "rho", 0.8)};
  if (name == "spectral") return SpectralNoise{c.get_double("model", "rho1", 2.0), c.get_double("model", "rho2", 0.0)};
  throw ConfigError("model.noise: unknown noise '" + name + "'");
}

Boundary build_boundary(const Config& c) {
  const auto name = c.get_string("model", "boundary", "dirichlet");
  if (name == "dirichlet") return Boundary::Dirichlet;
  if (name == "neumann") return Boundary::Neumann;
  throw ConfigError("model.boundary: unknown boundary '" + name + "'");
}

}  // namespace

ModelSpec build_model(const Config& c) {
  ModelSpec m;
  m.domain.left = c.get_double("model", "left", 0.0);
  m.domain.right = c.get_double("model", "right", 1.0);
  m.domain.boundary = build_boundary(c);
  m.domain.gamma_left = c.get_double("model", "gamma_left", 0.1);
  m.domain.gamma_right = c.get_double("model", "gamma_right", 0.9);
  m.nu = c.get_double("model", "nu", 1.0);
  m.horizon = c.get_double("model", "horizon", 1.0);
  m.reaction = build_reaction(c);
  m.noise.kind = build_noise_kind(c);

  const double base = c.get_double("model", "multiplier_base", 1.0);
  const double wave = c.get_double("model", "multiplier_wave", 0.0);
  if (c.has("model", "multiplier_base") || c.has("model", "multiplier_wave")) {
    if (base - std::abs(wave) <= 0.0) throw ConfigError("model.multiplier_base must exceed |multiplier_wave|");
    const double left = m.domain.left;
    const double len = m.domain.length();
    m.noise.multiplier = Multiplier{
        [base, wave, left, len](double y) { return base + wave * std::sin(2.0 * std::numbers::pi * (y - left) / len); },
        base - std::abs(wave), base + std::abs(wave)};
  }
  if (const auto x0 = c.get_optional_double("model", "initial")) {
    const double v = *x0;
    if (v != 0.0) m.initial = [v](double) { return v; };
  }
  m.sigma_override = c.get_optional_double("model", "sigma");
  m.validate();
  return m;
}

GridSpec build_grid(const Config& c, const ModelSpec& model) {
  const auto n_space = parse_count(c, "grid", "n_space", 200, 1);
  std::optional<std::size_t> n_time;
  if (c.has("grid", "n_time")) n_time = parse_count(c, "grid", "n_time", 1, 1);
  return GridSpec::for_model(model, n_space, n_time);
}

std::vector<double> linspace_step(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw ConfigError("linspace_step needs step > 0 and hi >= lo");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + static_cast<double>(i) * step;
  return out;
}

std::size_t ExperimentConfig::t_index() const {
  if (t < 0.0 || t > model.horizon * (1.0 + 1e-12)) throw ConfigError("experiment.t must lie in [0, horizon]");
  const auto i = static_cast<std::size_t>(std::llround(t / grid.dt));
  return std::min(i, grid.n_time);
}

EstimatorConfig ExperimentConfig::estimator_at(double x0, const ModelSpec& m) const {
  EstimatorConfig e = estimator;
  e.x0 = x0;
  e.sigma = m.sigma();
  if (!source.has("estimator", "nu")) e.nu_known = m.nu;
  if (auto_bandwidth) {
    e.h = e.mode == EstimatorMode::GrowingWindow ? select_bandwidth_growing(e.gamma, e.beta, bandwidth_constant)
                                                 : select_bandwidth(e.sigma, e.beta, bandwidth_constant);
  }
  e.validate();
  return e;
}

void ExperimentConfig::validate() const {
  model.validate();
  grid.check_against(model);
  if (n_runs < 1) throw ConfigError("experiment.n_runs must be at least 1");
  if (x0_grid && x0_grid->empty()) throw ConfigError("experiment.x0_grid must not be empty");
  if (!(a_low <= a_high)) throw ConfigError("experiment.a_low must not exceed experiment.a_high");
  if (!(buffer >= 0.0)) throw ConfigError("experiment.buffer must be non-negative");
  if (!(gw_dx > 0.0) || !(gw_dt > 0.0)) throw ConfigError("grid.dx and grid.dt must be positive");
  if (n_bins < 2) throw ConfigError("experiment.n_bins must be at least 2");
}

ExperimentConfig build_experiment(const Config& c) {
  c.check_keys(allowed_keys());
  ExperimentConfig e;
  e.source = c;
  e.model = build_model(c);
  e.grid = build_grid(c, e.model);

  auto& est = e.estimator;
  est.x0 = c.get_double("estimator", "x0", 0.0);
  const auto h = c.get_string("estimator", "h", "0.1");
  e.auto_bandwidth = h == "auto";
  if (!e.auto_bandwidth) est.h = parse_double(h, "estimator.h");
  e.bandwidth_constant = c.get_double("estimator", "bandwidth_constant", 1.0);
  est.beta = c.get_double("estimator", "beta", 2.0);
  est.alpha_bar = c.get_double("estimator", "alpha_bar", 0.05);
  est.zeta = c.get_optional_double("estimator", "zeta");
  est.nu_known = c.get_double("estimator", "nu", e.model.nu);
  est.sigma = e.model.sigma();
  const auto mode = c.get_string("estimator", "mode", "small_diffusivity");
  if (mode == "small_diffusivity") {
    est.mode = EstimatorMode::SmallDiffusivity;
  } else if (mode == "growing_window") {
    est.mode = EstimatorMode::GrowingWindow;
  } else {
    throw ConfigError("estimator.mode: unknown mode '" + mode + "'");
  }
  est.gamma = c.get_double("estimator", "gamma", e.model.domain.gamma_length());

  const auto runs = c.get_int("experiment", "n_runs", 200);
  if (runs < 1) throw ConfigError("experiment.n_runs must be at least 1");
  e.n_runs = static_cast<std::size_t>(runs);
  const auto seed = c.get_int("experiment", "base_seed", 1);
  if (seed < 0) throw ConfigError("experiment.base_seed must be non-negative");
  e.base_seed = static_cast<std::uint64_t>(seed);
  e.workers = static_cast<int>(c.get_int("experiment", "workers", 0));
  e.x0_grid = c.get_list("experiment", "x0_grid");
  e.nu_list = c.get_list("experiment", "nu_list");
  e.gamma_list = c.get_list("experiment", "gamma_list");
  e.h_list = c.get_list("experiment", "h_list");
  e.output_dir = c.get_string("experiment", "output_dir", "out");
  if (c.has("experiment", "trajectory")) e.trajectory = c.get_string("experiment", "trajectory", "");
  e.t = c.get_double("experiment", "t", e.model.horizon);
  e.a_low = c.get_double("experiment", "a_low", 0.5);
  e.a_high = c.get_double("experiment", "a_high", 1.5);
  e.n_bins = parse_count(c, "experiment", "n_bins", 60, 2);
  e.n_points = parse_count(c, "experiment", "n_points", 5, 1);
  e.time_stride = parse_count(c, "experiment", "time_stride", 1, 1);
  e.buffer = c.get_double("experiment", "buffer", 5.0);
  e.gw_dx = c.get_double("grid", "dx", 0.1);
  e.gw_dt = c.get_double("grid", "dt", 1e-4);

  e.validate();
  if (!e.auto_bandwidth) est.validate();
  return e;
}

}  // namespace spde
