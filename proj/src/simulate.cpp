#include "prepivot/simulate.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "prepivot/errors.hpp"

namespace prepivot {

namespace {

// ---------------------------------------------------------------------------
// Flat TOML-subset parsing.

struct ConfigValue {
  enum Kind { kInt, kFloat, kBool, kString, kArray };
  Kind kind = kInt;
  std::int64_t i = 0;
  double f = 0.0;
  bool b = false;
  std::string s;
  std::vector<ConfigValue> arr;
};

[[noreturn]] void parse_fail(int lineno, const std::string& what) {
  std::ostringstream os;
  os << "config line " << lineno << ": " << what;
  throw ConfigError(os.str());
}

// Strips a trailing comment that starts outside any quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

ConfigValue parse_scalar(const std::string& text, int lineno) {
  ConfigValue v;
  if (text.empty()) parse_fail(lineno, "empty value");
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"')
      parse_fail(lineno, "unterminated string");
    const std::string body = text.substr(1, text.size() - 2);
    if (body.find('"') != std::string::npos || body.find('\\') != std::string::npos)
      parse_fail(lineno, "escapes and embedded quotes are not supported");
    v.kind = ConfigValue::kString;
    v.s = body;
    return v;
  }
  if (text == "true" || text == "false") {
    v.kind = ConfigValue::kBool;
    v.b = (text == "true");
    return v;
  }
  const bool floaty = text.find_first_of(".eE") != std::string::npos;
  errno = 0;
  char* end = nullptr;
  if (floaty) {
    v.kind = ConfigValue::kFloat;
    v.f = std::strtod(text.c_str(), &end);
  } else {
    v.kind = ConfigValue::kInt;
    v.i = std::strtoll(text.c_str(), &end, 10);
  }
  if (errno != 0 || end != text.c_str() + text.size())
    parse_fail(lineno, "cannot parse value \"" + text + "\"");
  return v;
}

ConfigValue parse_value(const std::string& text, int lineno) {
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') parse_fail(lineno, "unterminated array");
    ConfigValue v;
    v.kind = ConfigValue::kArray;
    const std::string body = trim(text.substr(1, text.size() - 2));
    if (body.empty()) return v;
    std::size_t pos = 0;
    bool quoted = false;
    std::size_t start = 0;
    for (; pos <= body.size(); ++pos) {
      if (pos < body.size() && body[pos] == '"') quoted = !quoted;
      if (pos == body.size() || (body[pos] == ',' && !quoted)) {
        const std::string item = trim(body.substr(start, pos - start));
        if (item.empty()) parse_fail(lineno, "empty array element");
        v.arr.push_back(parse_scalar(item, lineno));
        start = pos + 1;
      }
    }
    if (quoted) parse_fail(lineno, "unterminated string");
    return v;
  }
  return parse_scalar(text, lineno);
}

std::map<std::string, ConfigValue> parse_flat(const std::string& text) {
  std::map<std::string, ConfigValue> out;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[')
      parse_fail(lineno, "section headers are not supported; use flat keys");
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) parse_fail(lineno, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) parse_fail(lineno, "empty key");
    for (char c : key) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
        parse_fail(lineno, "invalid key \"" + key + "\"");
    }
    if (out.count(key)) parse_fail(lineno, "duplicate key \"" + key + "\"");
    out[key] = parse_value(trim(line.substr(eq + 1)), lineno);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Typed extraction.

class Extractor {
 public:
  explicit Extractor(std::map<std::string, ConfigValue> kv) : kv_(std::move(kv)) {}

  bool has(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return false;
    return true;
  }

  const ConfigValue& take(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("config is missing required key \"" + key + "\"");
    seen_.push_back(key);
    return it->second;
  }

  std::int64_t take_int(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const ConfigValue& v = take(key);
    if (v.kind != ConfigValue::kInt)
      throw ConfigError("config key \"" + key + "\" must be an integer");
    return v.i;
  }

  double take_float(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const ConfigValue& v = take(key);
    if (v.kind == ConfigValue::kInt) return double(v.i);
    if (v.kind != ConfigValue::kFloat)
      throw ConfigError("config key \"" + key + "\" must be a number");
    return v.f;
  }

  std::string take_string(const std::string& key) {
    const ConfigValue& v = take(key);
    if (v.kind != ConfigValue::kString)
      throw ConfigError("config key \"" + key + "\" must be a quoted string");
    return v.s;
  }

  std::vector<std::string> take_string_array(const std::string& key) {
    const ConfigValue& v = take(key);
    if (v.kind != ConfigValue::kArray)
      throw ConfigError("config key \"" + key + "\" must be an array");
    std::vector<std::string> out;
    for (const ConfigValue& e : v.arr) {
      if (e.kind != ConfigValue::kString)
        throw ConfigError("config key \"" + key + "\" must hold quoted strings");
      out.push_back(e.s);
    }
    return out;
  }

  std::vector<double> take_float_array(const std::string& key) {
    const ConfigValue& v = take(key);
    if (v.kind != ConfigValue::kArray)
      throw ConfigError("config key \"" + key + "\" must be an array");
    std::vector<double> out;
    for (const ConfigValue& e : v.arr) {
      if (e.kind == ConfigValue::kInt)
        out.push_back(double(e.i));
      else if (e.kind == ConfigValue::kFloat)
        out.push_back(e.f);
      else
        throw ConfigError("config key \"" + key + "\" must hold numbers");
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : kv_) {
      (void)value;
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        throw ConfigError("unknown config key \"" + key + "\"");
    }
  }

 private:
  std::map<std::string, ConfigValue> kv_;
  std::vector<std::string> seen_;
};

int checked_count(std::int64_t v, const char* key) {
  if (v < 1 || v > (std::int64_t(1) << 31) - 1)
    throw ConfigError(std::string("config key \"") + key + "\" must be a positive 32-bit count");
  return int(v);
}

// Shortest decimal representation that parses back to exactly x.
std::string fmt_double(double x) {
  for (int prec = 15; prec <= 17; ++prec) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    if (std::strtod(os.str().c_str(), nullptr) == x) return os.str();
  }
  return std::to_string(x);
}

}  // namespace

bool operator==(const ScenarioSpec& a, const ScenarioSpec& b) {
  return a.id == b.id && a.n == b.n && a.group_fractions == b.group_fractions &&
         a.dim == b.dim;
}

bool operator==(const SimulationConfig& a, const SimulationConfig& b) {
  return a.scenario == b.scenario && a.statistics == b.statistics &&
         a.prepivots == b.prepivots && a.nsim == b.nsim && a.nperm == b.nperm &&
         a.nboot == b.nboot && a.mc_draws == b.mc_draws && a.vboot == b.vboot &&
         a.gaussian_mode == b.gaussian_mode && a.alpha == b.alpha &&
         a.seed == b.seed;
}

SimulationConfig parse_config(const std::string& text) {
  Extractor ex(parse_flat(text));
  SimulationConfig cfg;

  cfg.scenario.id = scenario_from_string(ex.take_string("scenario"));
  cfg.scenario.n = checked_count(ex.take_int("n", 0), "n");
  if (ex.has("group_fractions"))
    cfg.scenario.group_fractions = ex.take_float_array("group_fractions");
  const std::int64_t dim = ex.take_int("dim", 0);
  if (dim < 0) throw ConfigError("config key \"dim\" must be non-negative");
  cfg.scenario.dim = int(dim);

  for (const std::string& s : ex.take_string_array("statistics"))
    cfg.statistics.push_back(stat_id_from_string(s));
  for (const std::string& s : ex.take_string_array("prepivots"))
    cfg.prepivots.push_back(prepivot_kind_from_string(s));

  cfg.nsim = checked_count(ex.take_int("nsim", cfg.nsim), "nsim");
  cfg.nperm = checked_count(ex.take_int("nperm", cfg.nperm), "nperm");
  cfg.nboot = checked_count(ex.take_int("nboot", cfg.nboot), "nboot");
  cfg.mc_draws = checked_count(ex.take_int("mc_draws", cfg.mc_draws), "mc_draws");
  cfg.vboot = checked_count(ex.take_int("vboot", cfg.vboot), "vboot");
  if (ex.has("gaussian_mode"))
    cfg.gaussian_mode = gaussian_mode_from_string(ex.take_string("gaussian_mode"));
  cfg.alpha = ex.take_float("alpha", cfg.alpha);
  const std::int64_t seed = ex.take_int("seed", 0);
  if (seed < 0) throw ConfigError("config key \"seed\" must be non-negative");
  cfg.seed = std::uint64_t(seed);

  ex.reject_unknown();
  return cfg;
}

SimulationConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string emit_config(const SimulationConfig& cfg) {
  std::ostringstream os;
  os << "scenario = \"" << to_string(cfg.scenario.id) << "\"\n";
  os << "n = " << cfg.scenario.n << "\n";
  if (!cfg.scenario.group_fractions.empty()) {
    os << "group_fractions = [";
    for (std::size_t i = 0; i < cfg.scenario.group_fractions.size(); ++i)
      os << (i ? ", " : "") << fmt_double(cfg.scenario.group_fractions[i]);
    os << "]\n";
  }
  os << "dim = " << cfg.scenario.dim << "\n";
  os << "statistics = [";
  for (std::size_t i = 0; i < cfg.statistics.size(); ++i)
    os << (i ? ", " : "") << '"' << to_string(cfg.statistics[i]) << '"';
  os << "]\n";
  os << "prepivots = [";
  for (std::size_t i = 0; i < cfg.prepivots.size(); ++i)
    os << (i ? ", " : "") << '"' << to_string(cfg.prepivots[i]) << '"';
  os << "]\n";
  os << "nsim = " << cfg.nsim << "\n";
  os << "nperm = " << cfg.nperm << "\n";
  os << "nboot = " << cfg.nboot << "\n";
  os << "mc_draws = " << cfg.mc_draws << "\n";
  os << "vboot = " << cfg.vboot << "\n";
  os << "gaussian_mode = \"" << to_string(cfg.gaussian_mode) << "\"\n";
  os << "alpha = " << fmt_double(cfg.alpha) << "\n";
  os << "seed = " << cfg.seed << "\n";
  return os.str();
}

std::vector<GridCell> config_grid(const SimulationConfig& cfg) {
  std::vector<GridCell> cells;
  cells.reserve(cfg.statistics.size() * cfg.prepivots.size());
  for (StatId stat : cfg.statistics) {
    for (PrepivotKind kind : cfg.prepivots) {
      GridCell cell;
      cell.stat.id = stat;
      cell.stat.vboot = cfg.vboot;
      cell.prep.kind = kind;
      cell.prep.gaussian_mode = cfg.gaussian_mode;
      cell.prep.mc_draws = cfg.mc_draws;
      cell.prep.nboot = cfg.nboot;
      cells.push_back(cell);
    }
  }
  return cells;
}

void validate_simulation(const SimulationConfig& cfg) {
  if (cfg.statistics.empty()) throw ConfigError("statistics list is empty");
  if (cfg.prepivots.empty()) throw ConfigError("prepivots list is empty");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    throw ConfigError("alpha must lie strictly between 0 and 1");
  const ScenarioShape shape = resolve_shape(cfg.scenario);
  const int k = int(shape.sizes.size());
  for (StatId stat : cfg.statistics) check_admissible(stat, k, shape.dim);
  for (const GridCell& cell : config_grid(cfg)) check_compatible(cell.prep, cell.stat);
}

RejectionTable run_simulation(const SimulationConfig& cfg, int threads) {
  validate_simulation(cfg);
  const std::vector<GridCell> cells = config_grid(cfg);
  const int nc = int(cells.size());
  const int nsim = cfg.nsim;

  std::vector<char> reject(std::size_t(nsim) * nc, 0);
  std::vector<char> errored(std::size_t(nsim), 0);
  std::vector<std::string> messages(static_cast<std::size_t>(nsim));

  parallel_chunks(nsim, threads, [&](int first, int last) {
    for (int r = first; r < last; ++r) {
      const RngStream rep = derive_stream(cfg.seed, {{std::uint64_t(r)}});
      try {
        RngStream data_rng = rep.child(0);
        const GroupedDataset ds = generate_scenario(cfg.scenario, data_rng);
        const std::vector<TestResult> results =
            run_test_grid(ds, cells, cfg.nperm, rep.child(1), cfg.seed, 1);
        for (int j = 0; j < nc; ++j)
          reject[std::size_t(r) * nc + j] = results[std::size_t(j)].p_value <= cfg.alpha;
      } catch (const Error& e) {
        errored[std::size_t(r)] = 1;
        messages[std::size_t(r)] = e.what();
      }
    }
  });

  RejectionTable table;
  table.requested_nsim = nsim;
  for (int r = 0; r < nsim; ++r) {
    if (errored[std::size_t(r)]) {
      ++table.error_count;
      if (table.first_error.empty()) {
        table.first_error =
            "replicate " + std::to_string(r) + ": " + messages[std::size_t(r)];
      }
    }
  }
  const int contributing = nsim - table.error_count;

  table.rows.resize(std::size_t(nc));
  for (int j = 0; j < nc; ++j) {
    RejectionRow& row = table.rows[std::size_t(j)];
    row.statistic = cells[std::size_t(j)].stat.id;
    row.prepivot = cells[std::size_t(j)].prep.kind;
    row.nsim = contributing;
    int count = 0;
    for (int r = 0; r < nsim; ++r)
      if (!errored[std::size_t(r)] && reject[std::size_t(r) * nc + j]) ++count;
    row.rate = contributing > 0 ? double(count) / contributing : 0.0;
    row.se = contributing > 0
                 ? std::sqrt(row.rate * (1.0 - row.rate) / contributing)
                 : 0.0;
  }
  return table;
}

std::string rejection_table_csv(const RejectionTable& table) {
  std::ostringstream os;
  os << "statistic,prepivot,rate,se,nsim\n";
  for (const RejectionRow& row : table.rows) {
    os << to_string(row.statistic) << ',' << to_string(row.prepivot) << ','
       << fmt_double(row.rate) << ',' << fmt_double(row.se) << ',' << row.nsim
       << "\n";
  }
  return os.str();
}

}  // namespace prepivot
