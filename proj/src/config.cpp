#include "qpce/config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <unsupported/Eigen/KroneckerProduct>

#include "qpce/errors.hpp"

namespace qpce {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return parts;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  const std::string buf(s);
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || errno == ERANGE) return std::nullopt;
  return value;
}

// Reads the longest numeric prefix of s starting at pos; advances pos.
std::optional<double> read_number(std::string_view s, std::size_t& pos) {
  const std::string buf(s.substr(pos));
  if (buf.empty()) return std::nullopt;
  const char c = buf[0];
  if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '.')) return std::nullopt;
  char* end = nullptr;
  const double value = std::strtod(buf.c_str(), &end);
  if (end == buf.c_str()) return std::nullopt;
  pos += static_cast<std::size_t>(end - buf.c_str());
  return value;
}

Operator pauli_word(std::string_view word) {
  Operator out = Operator::Identity(1, 1);
  for (char c : word) {
    Operator p;
    switch (c) {
      case 'I': p = pauli::identity(); break;
      case 'X': p = pauli::x(); break;
      case 'Y': p = pauli::y(); break;
      case 'Z': p = pauli::z(); break;
      default:
        throw Error(Errc::config, fmt::format("unknown Pauli letter '{}'", c));
    }
    out = Eigen::kroneckerProduct(out, p).eval();
  }
  return out;
}

Complex parse_entry(std::string_view raw) {
  std::string s;
  for (char c : raw)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty()) throw Error(Errc::config, "empty matrix entry");
  if (s.back() != 'i') {
    if (const auto v = to_double(s)) return {*v, 0.0};
    throw Error(Errc::config, fmt::format("malformed matrix entry '{}'", raw));
  }
  s.pop_back();
  std::size_t split_at = std::string::npos;
  for (std::size_t i = s.size(); i-- > 1;) {
    if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E') {
      split_at = i;
      break;
    }
  }
  const std::string re = split_at == std::string::npos ? "" : s.substr(0, split_at);
  std::string im = split_at == std::string::npos ? s : s.substr(split_at);
  if (im.empty() || im == "+") im = "1";
  else if (im == "-") im = "-1";
  const auto re_v = re.empty() ? std::optional<double>(0.0) : to_double(re);
  const auto im_v = to_double(im);
  if (!re_v || !im_v)
    throw Error(Errc::config, fmt::format("malformed matrix entry '{}'", raw));
  return {*re_v, *im_v};
}

Operator parse_matrix(std::string_view spec) {
  if (spec.size() < 2 || spec.back() != ']')
    throw Error(Errc::config, "matrix must be written as [a, b; c, d]");
  const auto rows = split(spec.substr(1, spec.size() - 2), ';');
  std::vector<std::vector<Complex>> entries;
  for (auto row : rows) {
    std::vector<std::string_view> cells;
    if (row.find(',') != std::string_view::npos) {
      cells = split(row, ',');
    } else {
      std::istringstream in{std::string(row)};
      std::string cell;
      std::vector<std::string> owned;
      while (in >> cell) owned.push_back(cell);
      std::vector<Complex> parsed;
      for (const auto& c : owned) parsed.push_back(parse_entry(c));
      entries.push_back(std::move(parsed));
      continue;
    }
    std::vector<Complex> parsed;
    for (auto c : cells) parsed.push_back(parse_entry(c));
    entries.push_back(std::move(parsed));
  }
  const auto n = static_cast<Eigen::Index>(entries.size());
  Operator m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(entries[i].size()) != n)
      throw Error(Errc::config, "matrix must be square");
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = entries[i][j];
  }
  return m;
}

}  // namespace

Operator parse_operator(std::string_view spec, Eigen::Index zero_dim) {
  spec = trim(spec);
  if (spec.empty()) throw Error(Errc::config, "empty operator");
  if (spec.front() == '[') return parse_matrix(spec);
  if (const auto v = to_double(spec); v && *v == 0.0)
    return Operator::Zero(zero_dim, zero_dim);

  Operator total;
  std::size_t pos = 0;
  auto skip = [&] {
    while (pos < spec.size() && std::isspace(static_cast<unsigned char>(spec[pos])))
      ++pos;
  };
  bool first = true;
  while (true) {
    skip();
    if (pos == spec.size()) break;
    double sign = 1.0;
    if (spec[pos] == '+' || spec[pos] == '-') {
      sign = spec[pos] == '-' ? -1.0 : 1.0;
      ++pos;
      skip();
    } else if (!first) {
      throw Error(Errc::config,
                  fmt::format("expected '+' or '-' in operator '{}'", spec));
    }
    double coef = 1.0;
    if (const auto c = read_number(spec, pos)) {
      coef = *c;
      skip();
      if (pos < spec.size() && spec[pos] == '*') {
        ++pos;
        skip();
      }
    }
    const std::size_t start = pos;
    while (pos < spec.size() && std::isalpha(static_cast<unsigned char>(spec[pos])))
      ++pos;
    const auto word = spec.substr(start, pos - start);
    if (word.empty())
      throw Error(Errc::config,
                  fmt::format("missing Pauli word in operator '{}'", spec));
    const Operator term = sign * coef * pauli_word(word);
    if (first) {
      total = term;
    } else if (term.rows() != total.rows()) {
      throw Error(Errc::config,
                  fmt::format("Pauli words of different length in '{}'", spec));
    } else {
      total += term;
    }
    first = false;
  }
  if (first) throw Error(Errc::config, "empty operator");
  return total;
}

DensityMatrix parse_initial_state(std::string_view spec) {
  std::istringstream in{std::string(spec)};
  std::string label;
  StateVector psi = StateVector::Ones(1);
  bool any = false;
  while (in >> label) {
    psi = Eigen::kroneckerProduct(psi, pauli_eigenstate(label)).eval();
    any = true;
  }
  if (!any) throw Error(Errc::config, "empty initial state");
  return DensityMatrix::pure(psi);
}

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

struct Section {
  int line = 0;
  std::map<std::string, Entry> keys;
};

const std::map<std::string, std::vector<std::string>, std::less<>>& schema() {
  static const std::map<std::string, std::vector<std::string>, std::less<>> s{
      {"model", {"h0", "v", "tau", "initial_state"}},
      {"noise", {"kind", "alpha", "tau_c", "table"}},
      {"kle", {"grid_size", "candidate_modes", "S"}},
      {"pce", {"P", "dt_max", "output_points"}},
      {"mc", {"n_traj", "dt", "seed", "sampler", "batch", "stderr_target"}},
      {"observable", {"op"}},
      {"output", {"prefix"}},
      {"sweep", {"orders", "dimensions"}},
      {"tolerances", {"hermitian", "trace"}},
  };
  return s;
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw Error(Errc::config, fmt::format("line {}: {}", line, msg));
}

class Reader {
 public:
  Reader(std::map<std::string, Section> sections, int last_line)
      : sections_(std::move(sections)), last_line_(last_line) {}

  const Entry* find(const std::string& sec, const std::string& key) const {
    const auto s = sections_.find(sec);
    if (s == sections_.end()) return nullptr;
    const auto k = s->second.keys.find(key);
    return k == s->second.keys.end() ? nullptr : &k->second;
  }

  const Entry& require(const std::string& sec, const std::string& key) const {
    if (const Entry* e = find(sec, key)) return *e;
    const auto s = sections_.find(sec);
    const int line = s == sections_.end() ? last_line_ : s->second.line;
    fail(line, fmt::format("missing required field '{}' in [{}]", key, sec));
  }

  double number(const Entry& e, const std::string& key) const {
    const auto v = to_double(e.value);
    if (!v || !std::isfinite(*v))
      fail(e.line, fmt::format("'{}' must be a finite number, got '{}'", key,
                               e.value));
    return *v;
  }

  double positive(const Entry& e, const std::string& key) const {
    const double v = number(e, key);
    if (!(v > 0.0)) fail(e.line, fmt::format("'{}' must be positive", key));
    return v;
  }

  std::uint64_t integer(const Entry& e, const std::string& key) const {
    const auto s = trim(e.value);
    if (!s.empty() && s.front() == '-')
      fail(e.line, fmt::format("'{}' must be nonnegative, got '{}'", key, s));
    std::uint64_t out = 0;
    if (s.empty()) fail(e.line, fmt::format("'{}' is empty", key));
    for (char c : s) {
      if (!std::isdigit(static_cast<unsigned char>(c)))
        fail(e.line, fmt::format("'{}' must be an integer, got '{}'", key, s));
      const auto digit = static_cast<std::uint64_t>(c - '0');
      if (out > (UINT64_MAX - digit) / 10)
        fail(e.line, fmt::format("'{}' is out of range", key));
      out = out * 10 + digit;
    }
    return out;
  }

  std::vector<std::uint64_t> integer_list(const Entry& e,
                                          const std::string& key) const {
    std::vector<std::uint64_t> out;
    if (trim(e.value).empty()) return out;
    for (auto part : split(e.value, ','))
      out.push_back(integer(Entry{std::string(part), e.line}, key));
    return out;
  }

 private:
  std::map<std::string, Section> sections_;
  int last_line_;
};

bool is_auto(const Entry& e) { return trim(e.value) == "auto"; }

}  // namespace

RunConfig parse_config(std::string_view text) {
  std::map<std::string, Section> sections;
  std::string current;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(
        start, end == std::string_view::npos ? std::string_view::npos : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty() || line.front() == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed section header");
      current = std::string(trim(line.substr(1, line.size() - 2)));
      if (!schema().contains(current))
        fail(line_no, fmt::format("unknown section [{}]", current));
      if (sections.contains(current))
        fail(line_no, fmt::format("duplicate section [{}]", current));
      sections[current].line = line_no;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(line_no, fmt::format("expected 'key = value', got '{}'", line));
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (current.empty()) fail(line_no, fmt::format("key '{}' outside a section", key));
    const auto& allowed = schema().find(current)->second;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail(line_no, fmt::format("unknown key '{}' in [{}]", key, current));
    auto& keys = sections[current].keys;
    if (keys.contains(key))
      fail(line_no, fmt::format("duplicate key '{}' in [{}]", key, current));
    keys[key] = Entry{value, line_no};
  }

  const Reader r(std::move(sections), line_no);
  RunConfig c;

  // [model]
  const Entry& h0 = r.require("model", "h0");
  const Entry& v = r.require("model", "v");
  c.model.tau = r.positive(r.require("model", "tau"), "tau");
  c.model.h0 = h0.value;
  c.model.v = v.value;
  if (const Entry* e = r.find("model", "initial_state")) c.model.initial_state = e->value;

  // [noise]
  if (const Entry* e = r.find("noise", "kind")) {
    if (e->value == "ou") c.noise.kind = NoiseKind::ou;
    else if (e->value == "tabulated") c.noise.kind = NoiseKind::tabulated;
    else fail(e->line, fmt::format("unknown noise kind '{}'", e->value));
  }
  if (c.noise.kind == NoiseKind::ou) {
    c.noise.alpha = r.number(r.require("noise", "alpha"), "alpha");
    c.noise.tau_c = r.positive(r.require("noise", "tau_c"), "tau_c");
  } else {
    c.noise.table = r.require("noise", "table").value;
    if (const Entry* e = r.find("noise", "alpha")) c.noise.alpha = r.number(*e, "alpha");
    if (const Entry* e = r.find("noise", "tau_c")) c.noise.tau_c = r.positive(*e, "tau_c");
  }
  if (c.noise.kind == NoiseKind::ou)
    if (const Entry* e = r.find("noise", "table")) c.noise.table = e->value;

  // [kle]
  if (const Entry* e = r.find("kle", "grid_size")) {
    c.kle.grid_size = r.integer(*e, "grid_size");
    if (c.kle.grid_size < 2) fail(e->line, "'grid_size' must be >= 2");
  }
  if (const Entry* e = r.find("kle", "S")) {
    c.kle.S = r.integer(*e, "S");
    if (c.kle.S < 1) fail(e->line, "'S' must be >= 1");
  }
  if (const Entry* e = r.find("kle", "candidate_modes"); e && !is_auto(*e)) {
    c.kle.candidate_modes = r.integer(*e, "candidate_modes");
    if (*c.kle.candidate_modes < c.kle.S || *c.kle.candidate_modes > c.kle.grid_size)
      fail(e->line, "'candidate_modes' must lie in [S, grid_size]");
  }

  // [pce]
  if (const Entry* e = r.find("pce", "P")) {
    const auto p = r.integer(*e, "P");
    if (p > 1000) fail(e->line, "'P' is unreasonably large");
    c.pce.P = static_cast<unsigned>(p);
  }
  if (const Entry* e = r.find("pce", "dt_max"); e && !is_auto(*e))
    c.pce.dt_max = r.positive(*e, "dt_max");
  if (const Entry* e = r.find("pce", "output_points")) {
    c.pce.output_points = r.integer(*e, "output_points");
    if (c.pce.output_points < 2) fail(e->line, "'output_points' must be >= 2");
  }

  // [mc]
  if (const Entry* e = r.find("mc", "n_traj")) {
    c.mc.n_traj = r.integer(*e, "n_traj");
    if (c.mc.n_traj < 2) fail(e->line, "'n_traj' must be >= 2");
  }
  if (const Entry* e = r.find("mc", "dt"); e && !is_auto(*e)) {
    c.mc.dt = r.positive(*e, "dt");
    if (*c.mc.dt > c.model.tau / 100.0 * (1.0 + 1e-12))
      fail(e->line, "'dt' must not exceed tau/100");
  }
  if (const Entry* e = r.find("mc", "seed")) c.mc.seed = r.integer(*e, "seed");
  if (const Entry* e = r.find("mc", "sampler")) {
    if (e->value == "exact_ou") c.mc.sampler = NoiseSampler::exact_ou;
    else if (e->value == "kle") c.mc.sampler = NoiseSampler::truncated_kle;
    else fail(e->line, fmt::format("unknown sampler '{}'", e->value));
  }
  if (const Entry* e = r.find("mc", "batch")) {
    c.mc.batch = r.integer(*e, "batch");
    if (c.mc.batch < 1) fail(e->line, "'batch' must be >= 1");
  }
  if (const Entry* e = r.find("mc", "stderr_target"))
    c.mc.stderr_target = r.positive(*e, "stderr_target");

  if (const Entry* e = r.find("observable", "op")) c.observable.op = e->value;
  if (const Entry* e = r.find("output", "prefix")) c.output.prefix = e->value;

  // [sweep]
  if (const Entry* e = r.find("sweep", "orders")) {
    c.sweep.orders.clear();
    for (auto p : r.integer_list(*e, "orders")) c.sweep.orders.push_back(static_cast<unsigned>(p));
    if (c.sweep.orders.empty()) fail(e->line, "'orders' must not be empty");
  }
  if (const Entry* e = r.find("sweep", "dimensions")) {
    for (auto s : r.integer_list(*e, "dimensions")) {
      if (s < 1) fail(e->line, "'dimensions' entries must be >= 1");
      c.sweep.dimensions.push_back(s);
    }
  }

  if (const Entry* e = r.find("tolerances", "hermitian"))
    c.tolerances.hermitian = r.positive(*e, "hermitian");
  if (const Entry* e = r.find("tolerances", "trace"))
    c.tolerances.trace = r.positive(*e, "trace");

  // Operators are validated here so errors point at the offending line.
  Operator v_op, h0_op;
  try {
    v_op = parse_operator(c.model.v, 2);
    require_hermitian(v_op, "v", c.tolerances.hermitian);
  } catch (const Error& err) {
    fail(v.line, err.what());
  }
  try {
    h0_op = parse_operator(c.model.h0, v_op.rows());
    require_hermitian(h0_op, "h0", c.tolerances.hermitian);
    require_same_dim(h0_op, v_op, "h0 and v");
  } catch (const Error& err) {
    fail(h0.line, err.what());
  }
  try {
    const auto rho0 = parse_initial_state(c.model.initial_state);
    require_same_dim(rho0.op(), v_op, "initial_state");
  } catch (const Error& err) {
    const Entry* e = r.find("model", "initial_state");
    fail(e ? e->line : h0.line, err.what());
  }
  try {
    const auto obs = parse_operator(c.observable.op, v_op.rows());
    require_hermitian(obs, "observable", c.tolerances.hermitian);
    require_same_dim(obs, v_op, "observable");
  } catch (const Error& err) {
    const Entry* e = r.find("observable", "op");
    fail(e ? e->line : line_no, err.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, fmt::format("cannot open config '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig c;
  try {
    c = parse_config(buf.str());
  } catch (const Error& err) {
    throw Error(err.code(), fmt::format("{}: {}", path.string(), err.what()));
  }
  c.base_dir = path.parent_path();
  return c;
}

std::string emit_config(const RunConfig& c) {
  std::string out;
  auto line = [&](std::string_view key, const auto& value) {
    out += fmt::format("{} = {}\n", key, value);
  };
  auto join = [](const auto& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i)
      s += (i ? ", " : "") + fmt::format("{}", xs[i]);
    return s;
  };
  out += "[model]\n";
  line("h0", c.model.h0);
  line("v", c.model.v);
  line("tau", c.model.tau);
  line("initial_state", c.model.initial_state);
  out += "\n[noise]\n";
  line("kind", c.noise.kind == NoiseKind::ou ? "ou" : "tabulated");
  if (c.noise.kind == NoiseKind::ou || c.noise.alpha != 0.0) line("alpha", c.noise.alpha);
  if (c.noise.kind == NoiseKind::ou || c.noise.tau_c != 0.0) line("tau_c", c.noise.tau_c);
  if (!c.noise.table.empty()) line("table", c.noise.table);
  out += "\n[kle]\n";
  line("grid_size", c.kle.grid_size);
  if (c.kle.candidate_modes) line("candidate_modes", *c.kle.candidate_modes);
  else line("candidate_modes", "auto");
  line("S", c.kle.S);
  out += "\n[pce]\n";
  line("P", c.pce.P);
  if (c.pce.dt_max) line("dt_max", *c.pce.dt_max);
  else line("dt_max", "auto");
  line("output_points", c.pce.output_points);
  out += "\n[mc]\n";
  line("n_traj", c.mc.n_traj);
  if (c.mc.dt) line("dt", *c.mc.dt);
  else line("dt", "auto");
  line("seed", c.mc.seed);
  line("sampler", c.mc.sampler == NoiseSampler::exact_ou ? "exact_ou" : "kle");
  line("batch", c.mc.batch);
  line("stderr_target", c.mc.stderr_target);
  out += "\n[observable]\n";
  line("op", c.observable.op);
  out += "\n[output]\n";
  line("prefix", c.output.prefix);
  out += "\n[sweep]\n";
  line("orders", join(c.sweep.orders));
  line("dimensions", join(c.sweep.dimensions));
  out += "\n[tolerances]\n";
  line("hermitian", c.tolerances.hermitian);
  line("trace", c.tolerances.trace);
  return out;
}

CorrelationKernel build_kernel(const RunConfig& c) {
  if (c.noise.kind == NoiseKind::ou)
    return CorrelationKernel::ornstein_uhlenbeck(c.noise.alpha, c.noise.tau_c);

  const auto path = c.base_dir / c.noise.table;
  std::ifstream in(path);
  if (!in)
    throw Error(Errc::io, fmt::format("cannot open noise table '{}'", path.string()));
  std::vector<double> lags, values;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto s = trim(raw);
    if (s.empty() || s.front() == '#') continue;
    std::string norm(s);
    for (char& ch : norm)
      if (ch == ',') ch = ' ';
    std::istringstream fields(norm);
    std::string a, b, extra;
    fields >> a >> b;
    const auto lag = to_double(a);
    const auto val = to_double(b);
    if (!lag || !val || (fields >> extra))
      throw Error(Errc::config, fmt::format("{}:{}: expected 'lag, value'",
                                            path.string(), line_no));
    lags.push_back(*lag);
    values.push_back(*val);
  }
  if (lags.size() < 2 || lags.front() != 0.0)
    throw Error(Errc::config,
                fmt::format("{}: table must start at lag 0 and have >= 2 rows",
                            path.string()));
  const double spacing = lags[1] - lags[0];
  for (std::size_t k = 1; k < lags.size(); ++k)
    if (std::abs(lags[k] - spacing * static_cast<double>(k)) > 1e-9 * spacing * k)
      throw Error(Errc::config,
                  fmt::format("{}: lags must be uniformly spaced", path.string()));
  return CorrelationKernel::tabulated(spacing, std::move(values));
}

StochasticModel build_model(const RunConfig& c) {
  Operator v = parse_operator(c.model.v, 2);
  Operator h0 = parse_operator(c.model.h0, v.rows());
  return StochasticModel(std::move(h0), std::move(v), build_kernel(c),
                         c.model.tau, c.tolerances.hermitian);
}

Operator build_observable(const RunConfig& c) {
  const Operator v = parse_operator(c.model.v, 2);
  return parse_operator(c.observable.op, v.rows());
}

MCConfig build_mc_config(const RunConfig& c) {
  MCConfig mc;
  mc.n_traj = c.mc.n_traj;
  mc.dt = c.mc.dt.value_or(0.0);
  mc.seed = c.mc.seed;
  mc.sampler = c.mc.sampler;
  mc.batch = c.mc.batch;
  mc.stderr_target = c.mc.stderr_target;
  return mc;
}

std::vector<double> output_grid(double tau, std::size_t points) {
  if (points < 2) throw Error(Errc::invalid_argument, "need >= 2 output points");
  std::vector<double> t(points);
  for (std::size_t i = 0; i < points; ++i)
    t[i] = tau * static_cast<double>(i) / static_cast<double>(points - 1);
  t.back() = tau;
  return t;
}

}  // namespace qpce
