#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "arff/cli.hpp"
#include "arff/csv.hpp"

namespace arff::cli {

namespace {

using Setter = std::function<void(RunSpec&, const std::string&)>;
using Getter = std::function<std::optional<std::string>(const RunSpec&)>;

struct KeyDef {
  std::string name;
  Setter set;
  Getter get;  // nullopt: omit from the written config
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) { return csv::parse_double(trim(v)); }

Index to_index(const std::string& v) { return static_cast<Index>(csv::parse_int(trim(v))); }

int to_int(const std::string& v) {
  const auto x = csv::parse_int(trim(v));
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw IoError("integer out of range: " + v);
  }
  return static_cast<int>(x);
}

std::uint64_t to_u64(const std::string& v) {
  const std::string t = trim(v);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
    throw IoError("not an unsigned integer: '" + v + "'");
  }
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(t.c_str(), &end, 10);
  if (errno == ERANGE) throw IoError("unsigned integer out of range: " + v);
  return static_cast<std::uint64_t>(x);
}

bool to_bool(const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw IoError("not a boolean: '" + v + "'");
}

RealVector to_list(const std::string& v) {
  std::vector<double> xs;
  for (const auto& f : csv::split_line(trim(v))) xs.push_back(csv::parse_double(trim(f)));
  if (xs.empty()) throw IoError("empty list");
  return Eigen::Map<const RealVector>(xs.data(), static_cast<Index>(xs.size()));
}

std::string from_list(const RealVector& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += csv::format_double(v(i));
  }
  return s;
}

std::string fmt(double x) { return csv::format_double(x); }
std::string fmt(std::int64_t x) { return csv::format_int(x); }
std::string fmt(bool b) { return b ? "true" : "false"; }

const std::vector<std::pair<std::string, std::vector<KeyDef>>>& table() {
  static const std::vector<std::pair<std::string, std::vector<KeyDef>>> t = {
      {"target",
       {
           {"kind", [](RunSpec& s, const std::string& v) { s.kind = parse_target_kind(trim(v)); },
            [](const RunSpec& s) { return std::optional(to_string(s.kind)); }},
           {"dimension", [](RunSpec& s, const std::string& v) { s.dimension = to_int(v); },
            [](const RunSpec& s) { return std::optional(fmt(std::int64_t{s.dimension})); }},
           {"direction",
            [](RunSpec& s, const std::string& v) {
              const std::string t = trim(v);
              if (t == "axis") {
                s.direction_mode = RunSpec::Direction::Axis;
              } else if (t == "random") {
                s.direction_mode = RunSpec::Direction::Random;
              } else {
                s.direction_mode = RunSpec::Direction::Given;
                s.direction = to_list(t);
              }
            },
            [](const RunSpec& s) {
              switch (s.direction_mode) {
                case RunSpec::Direction::Axis: return std::optional<std::string>("axis");
                case RunSpec::Direction::Random: return std::optional<std::string>("random");
                case RunSpec::Direction::Given: break;
              }
              return std::optional(from_list(s.direction));
            }},
           {"sharpness", [](RunSpec& s, const std::string& v) { s.sharpness = to_double(v); },
            [](const RunSpec& s) { return std::optional(fmt(s.sharpness)); }},
           {"period",
            [](RunSpec& s, const std::string& v) {
              const std::string t = trim(v);
              if (t == "none") {
                s.period.reset();
              } else {
                s.period = to_double(t);
              }
            },
            [](const RunSpec& s) { return std::optional(s.period ? fmt(*s.period) : std::string("none")); }},
           {"constant", [](RunSpec& s, const std::string& v) { s.constant = to_double(v); },
            [](const RunSpec& s) {
              return s.kind == TargetKind::Constant ? std::optional(fmt(s.constant)) : std::nullopt;
            }},
           {"mode", [](RunSpec& s, const std::string& v) { s.mode = to_list(v); },
            [](const RunSpec& s) {
              return s.mode.size() > 0 ? std::optional(from_list(s.mode)) : std::nullopt;
            }},
           {"samples", [](RunSpec& s, const std::string& v) { s.samples = to_index(v); },
            [](const RunSpec& s) { return std::optional(fmt(std::int64_t{s.samples})); }},
           {"noise", [](RunSpec& s, const std::string& v) { s.noise_std = to_double(v); },
            [](const RunSpec& s) { return std::optional(fmt(s.noise_std)); }},
           {"nsr", [](RunSpec& s, const std::string& v) { s.nsr = to_double(v); },
            [](const RunSpec& s) { return s.nsr ? std::optional(fmt(*s.nsr)) : std::nullopt; }},
           {"test_fraction", [](RunSpec& s, const std::string& v) { s.test_fraction = to_double(v); },
            [](const RunSpec& s) { return std::optional(fmt(s.test_fraction)); }},
       }},
      {"train",
       {
           {"algorithm", [](RunSpec& s, const std::string& v) { s.train.algorithm = parse_algorithm(trim(v)); },
            [](const RunSpec& s) { return std::optional(to_string(s.train.algorithm)); }},
           {"K", [](RunSpec& s, const std::string& v) { s.train.K = to_index(v); },
            [](const RunSpec& s) { return std::optional(fmt(std::int64_t{s.train.K})); }},
           {"iterations", [](RunSpec& s, const std::string& v) { s.train.iterations = to_int(v); },
            [](const RunSpec& s) { return std::optional(fmt(std::int64_t{s.train.iterations})); }},
           {"init", [](RunSpec& s, const std::string& v) { s.train.init = parse_init_mode(trim(v)); },
            [](const RunSpec& s) { return std::optional(to_string(s.train.init)); }},
           {"base",
            [](RunSpec& s, const std::string& v) {
              const std::string t = trim(v);
              if (t != "auto" && t != "normal" && t != "lattice_normal") {
                throw IoError("base must be auto, normal or lattice_normal");
              }
              s.base = t;
            },
            [](const RunSpec& s) { return std::optional(s.base); }},
           {"validation_fraction",
            [](RunSpec& s, const std::string& v) { s.train.validation_fraction = to_double(v); },
            [](const RunSpec& s) { return std::optional(fmt(s.train.validation_fraction)); }},
           {"seed", [](RunSpec& s, const std::string& v) { s.train.seed = to_u64(v); },
            [](const RunSpec& s) { return std::optional(std::to_string(s.train.seed)); }},
           {"snapshot_every", [](RunSpec& s, const std::string& v) { s.train.snapshot_every = to_int(v); },
            [](const RunSpec& s) { return std::optional(fmt(std::int64_t{s.train.snapshot_every})); }},
           {"record_timing", [](RunSpec& s, const std::string& v) { s.train.record_timing = to_bool(v); },
            [](const RunSpec& s) { return std::optional(fmt(s.train.record_timing)); }},
           {"verify_every", [](RunSpec& s, const std::string& v) { s.train.verify_every = to_int(v); },
            [](const RunSpec& s) { return std::optional(fmt(std::int64_t{s.train.verify_every})); }},
           {"reference_nmax", [](RunSpec& s, const std::string& v) { s.reference_nmax = to_int(v); },
            [](const RunSpec& s) { return std::optional(fmt(std::int64_t{s.reference_nmax})); }},
           {"reference_grid", [](RunSpec& s, const std::string& v) { s.reference_grid = to_int(v); },
            [](const RunSpec& s) { return std::optional(fmt(std::int64_t{s.reference_grid})); }},
       }},
      {"walk",
       {
           {"delta", [](RunSpec& s, const std::string& v) { s.train.walk.delta = to_double(v); },
            [](const RunSpec& s) { return std::optional(fmt(s.train.walk.delta)); }},
           {"eps_hat", [](RunSpec& s, const std::string& v) { s.train.walk.eps_hat = to_double(v); },
            [](const RunSpec& s) { return std::optional(fmt(s.train.walk.eps_hat)); }},
       }},
      {"cutoff",
       {
           {"epsilon", [](RunSpec& s, const std::string& v) { s.train.cutoff.epsilon = to_double(v); },
            [](const RunSpec& s) { return std::optional(fmt(s.train.cutoff.epsilon)); }},
           {"q_epsilon", [](RunSpec& s, const std::string& v) { s.train.cutoff.q_epsilon = to_double(v); },
            [](const RunSpec& s) { return std::optional(fmt(s.train.cutoff.q_epsilon)); }},
       }},
      {"solver",
       {
           {"lambda1", [](RunSpec& s, const std::string& v) { s.train.solver.lambda1 = to_double(v); },
            [](const RunSpec& s) { return std::optional(fmt(s.train.solver.lambda1)); }},
           {"lambda2", [](RunSpec& s, const std::string& v) { s.train.solver.lambda2 = to_double(v); },
            [](const RunSpec& s) { return std::optional(fmt(s.train.solver.lambda2)); }},
           {"cg_rel_tol", [](RunSpec& s, const std::string& v) { s.train.solver.cg_rel_tol = to_double(v); },
            [](const RunSpec& s) { return std::optional(fmt(s.train.solver.cg_rel_tol)); }},
           {"cg_max_iters", [](RunSpec& s, const std::string& v) { s.train.solver.cg_max_iters = to_int(v); },
            [](const RunSpec& s) { return std::optional(fmt(std::int64_t{s.train.solver.cg_max_iters})); }},
           {"newton_tol", [](RunSpec& s, const std::string& v) { s.train.solver.newton_tol = to_double(v); },
            [](const RunSpec& s) { return std::optional(fmt(s.train.solver.newton_tol)); }},
           {"newton_max_iters",
            [](RunSpec& s, const std::string& v) { s.train.solver.newton_max_iters = to_int(v); },
            [](const RunSpec& s) { return std::optional(fmt(std::int64_t{s.train.solver.newton_max_iters})); }},
       }},
      {"oracle",
       {
           {"grid", [](RunSpec& s, const std::string& v) { s.oracle_grid = to_int(v); },
            [](const RunSpec& s) { return std::optional(fmt(std::int64_t{s.oracle_grid})); }},
       }},
  };
  return t;
}

}  // namespace

const std::vector<std::pair<std::string, std::vector<std::string>>>& config_schema() {
  static const auto schema = [] {
    std::vector<std::pair<std::string, std::vector<std::string>>> out;
    for (const auto& [sec, keys] : table()) {
      std::vector<std::string> names;
      for (const auto& k : keys) names.push_back(k.name);
      out.emplace_back(sec, names);
    }
    return out;
  }();
  return schema;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0u : 1u)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::string nearest_key(std::string_view key, std::span<const std::string> candidates) {
  std::string best;
  std::size_t best_d = std::numeric_limits<std::size_t>::max();
  for (const auto& c : candidates) {
    const std::size_t d = edit_distance(key, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

namespace {

// Drops a trailing "; ..." or "# ..." comment that follows whitespace.
std::string strip_inline_comment(const std::string& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if ((v[i] == ';' || v[i] == '#') && std::isspace(static_cast<unsigned char>(v[i - 1]))) {
      std::size_t end = i;
      while (end > 0 && std::isspace(static_cast<unsigned char>(v[end - 1]))) --end;
      return v.substr(0, end);
    }
  }
  return v;
}

}  // namespace

RunSpec parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config syntax error at line " + std::to_string(e.line()) + ": " + e.message());
  }

  std::vector<std::string> section_names;
  for (const auto& [sec, _] : table()) section_names.push_back(sec);

  RunSpec spec;
  std::vector<std::string> problems;
  for (const auto& [sec, node] : tree) {
    if (node.empty() && !node.data().empty()) {
      problems.push_back("key '" + sec + "' outside any section");
      continue;
    }
    const auto it = std::find_if(table().begin(), table().end(), [&](const auto& p) { return p.first == sec; });
    if (it == table().end()) {
      problems.push_back("unknown section [" + sec + "] (did you mean [" + nearest_key(sec, section_names) + "]?)");
      continue;
    }
    std::vector<std::string> key_names;
    for (const auto& k : it->second) key_names.push_back(k.name);
    for (const auto& [key, value] : node) {
      const auto kd = std::find_if(it->second.begin(), it->second.end(), [&](const KeyDef& d) { return d.name == key; });
      if (kd == it->second.end()) {
        problems.push_back("unknown key '" + key + "' in [" + sec + "] (did you mean '" +
                           nearest_key(key, key_names) + "'?)");
        continue;
      }
      const std::string text = strip_inline_comment(value.data());
      try {
        kd->set(spec, text);
      } catch (const std::exception& e) {
        problems.push_back("bad value for [" + sec + "] " + key + " = '" + text + "': " + e.what());
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return spec;
}

RunSpec parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in);
}

void write_config(const RunSpec& spec, std::ostream& out) {
  bool first = true;
  for (const auto& [sec, keys] : table()) {
    if (!first) out << '\n';
    first = false;
    out << '[' << sec << "]\n";
    for (const auto& k : keys) {
      if (auto v = k.get(spec)) out << k.name << " = " << *v << '\n';
    }
  }
}

std::optional<std::uint64_t> seed_from_env() {
  const char* s = std::getenv("ARFF_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    return to_u64(s);
  } catch (const std::exception&) {
    throw ConfigError(std::string("ARFF_SEED must be an unsigned integer, got '") + s + "'");
  }
}

TargetSpec resolve_target(const RunSpec& spec, RngStream& rng) {
  if (spec.dimension < 1) throw ConfigError("target dimension must be >= 1");
  RealVector v;
  switch (spec.direction_mode) {
    case RunSpec::Direction::Axis:
      v = RealVector::Unit(spec.dimension, 0);
      break;
    case RunSpec::Direction::Random:
      v = random_direction(spec.dimension, rng);
      break;
    case RunSpec::Direction::Given:
      if (spec.direction.size() != spec.dimension) {
        throw ConfigError("direction has " + std::to_string(spec.direction.size()) +
                          " entries for dimension " + std::to_string(spec.dimension));
      }
      if (!(spec.direction.norm() > 0.0)) throw ConfigError("direction must be nonzero");
      v = spec.direction / spec.direction.norm();
      break;
  }
  switch (spec.kind) {
    case TargetKind::Bump:
      return TargetSpec::bump(v, spec.sharpness, spec.period);
    case TargetKind::SineIntegral:
      return TargetSpec::sine_integral(v, spec.sharpness, spec.period);
    case TargetKind::Constant:
      return TargetSpec::constant_value(spec.dimension, spec.constant, spec.period);
    case TargetKind::Cosine:
      if (spec.mode.size() != spec.dimension) throw ConfigError("cosine mode needs one entry per dimension");
      return TargetSpec::cosine(spec.mode, spec.period);
  }
  throw ConfigError("unknown target kind");
}

PreparedData prepare_data(const RunSpec& spec) {
  if (spec.samples < 2) throw ConfigError("samples must be >= 2");
  if (!(spec.noise_std >= 0.0)) throw ConfigError("noise must be >= 0");
  if (spec.nsr && !(*spec.nsr >= 0.0 && *spec.nsr < 1.0)) throw ConfigError("nsr must lie in [0, 1)");
  if (spec.nsr && spec.noise_std > 0.0) throw ConfigError("set either noise or nsr, not both");
  if (!(spec.test_fraction >= 0.0)) throw ConfigError("test_fraction must be >= 0");

  RngStream rng = RngStream(spec.train.seed).split(1000);
  PreparedData out;
  out.target = resolve_target(spec, rng);
  const Dataset clean = sample_dataset(out.target, spec.samples, 0.0, rng);
  double s = spec.noise_std;
  if (spec.nsr) {
    // E|xi|^2 / (E|f|^2 + E|xi|^2) = nsr
    const double mean_f2 = clean.targets.squaredNorm() / static_cast<double>(spec.samples);
    s = std::sqrt(*spec.nsr / (1.0 - *spec.nsr) * mean_f2);
  }
  ComplexVector y = clean.targets;
  if (s > 0.0) {
    for (Index j = 0; j < y.size(); ++j) y(j) += s * rng.normal();
  }
  out.train = Dataset(clean.inputs, std::move(y), s);
  out.nsr = s > 0.0 ? noise_to_signal_ratio(out.train, clean.targets) : 0.0;
  const auto n_test = static_cast<Index>(std::llround(spec.test_fraction * static_cast<double>(spec.samples)));
  if (n_test > 0) out.test = sample_dataset(out.target, n_test, 0.0, rng);
  return out;
}

TrainConfig resolve_train_config(const RunSpec& spec, const TargetSpec& target) {
  TrainConfig c = spec.train;
  const int d = target.dimension();
  const bool lattice_alg = c.algorithm == Algorithm::LatticeWalk;
  switch (c.algorithm) {
    case Algorithm::RandomWalk:
      c.walk = WalkConfig::continuous(spec.train.walk.delta);
      break;
    case Algorithm::LatticeWalk:
      if (!target.period) throw ConfigError("alg2 needs a periodic target (set [target] period)");
      c.walk = WalkConfig::lattice_projected(spec.train.walk.delta, target.lattice());
      break;
    case Algorithm::AdaptiveWalk:
      c.walk = WalkConfig::adaptive(spec.train.walk.delta, spec.train.walk.eps_hat);
      break;
  }
  c.walk.eps_hat = spec.train.walk.eps_hat;
  std::string base = spec.base;
  if (base == "auto") base = lattice_alg ? "lattice_normal" : "normal";
  if (base == "lattice_normal") {
    if (!target.period) throw ConfigError("lattice_normal base needs a periodic target");
    c.base = BaseDistribution::lattice_normal(target.lattice());
  } else {
    c.base = BaseDistribution::standard_normal(d);
  }
  if (spec.reference_nmax > 0) {
    if (!target.period) throw ConfigError("reference_nmax needs a periodic target");
    int grid = spec.reference_grid;
    if (grid == 0) {
      grid = 64;
      while (grid < 32 * spec.reference_nmax) grid *= 2;
    }
    c.reference = optimal_distribution(compute_fourier_table(target, spec.reference_nmax, grid));
  }
  c.validate(d);
  return c;
}

RunOutcome execute(const RunSpec& spec) {
  RunOutcome out;
  out.data = prepare_data(spec);
  const TrainConfig cfg = resolve_train_config(spec, out.data.target);
  out.result = run(cfg, out.data.train, out.data.test);
  return out;
}

void write_metrics_csv(const std::vector<IterationMetrics>& metrics, std::ostream& out) {
  out << "iteration,train_rel_err,val_rel_err,cg_iters,tv_to_reference\n";
  for (const auto& m : metrics) {
    out << m.iteration << ',' << csv::format_double(m.train_rel_err) << ','
        << csv::format_double(m.val_rel_err) << ',' << m.cg_iters << ','
        << (m.tv_to_reference ? csv::format_double(*m.tv_to_reference) : std::string()) << '\n';
  }
}

std::vector<IterationMetrics> read_metrics_csv(std::istream& in) {
  const csv::Table t = csv::read(in);
  const auto ci = t.column("iteration"), ct = t.column("train_rel_err"), cv = t.column("val_rel_err"),
             cc = t.column("cg_iters"), cr = t.column("tv_to_reference");
  std::vector<IterationMetrics> out;
  for (const auto& r : t.rows) {
    IterationMetrics m;
    m.iteration = static_cast<int>(csv::parse_int(r[ci]));
    m.train_rel_err = csv::parse_double(r[ct]);
    m.val_rel_err = csv::parse_double(r[cv]);
    m.cg_iters = static_cast<int>(csv::parse_int(r[cc]));
    if (!r[cr].empty()) m.tv_to_reference = csv::parse_double(r[cr]);
    out.push_back(m);
  }
  return out;
}

}  // namespace arff::cli
