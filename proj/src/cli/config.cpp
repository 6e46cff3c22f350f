#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "sclab/cli.hpp"
#include "sclab/errors.hpp"

namespace sclab::cli {

namespace {

enum class Type { String, Number, Integer, Unsigned, Bool, List };

struct Key {
  const char* name;
  Type type;
  const char* fallback;
  const char* help;
  std::vector<std::string> choices = {};
};

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      {"surface.kind", Type::String, "torus", "torus | bolza", {"torus", "bolza"}},
      {"surface.n", Type::Integer, "32", "torus grid resolution"},
      {"surface.refine", Type::Integer, "4", "Bolza refinement depth"},
      {"surface.L", Type::Number, "1", "torus side length"},
      {"spectrum.N", Type::Integer, "25", "retained modes"},
      {"spectrum.solver", Type::String, "auto", "auto | dense | shift-invert | fourier",
       {"auto", "dense", "shift-invert", "fourier"}},
      {"spectrum.tol", Type::Number, "1e-9", "relative eigen-residual tolerance"},
      {"spectrum.extrapolate", Type::Bool, "false", "report lambda_1 extrapolated over three meshes"},
      {"potential.epsilon", Type::Number, "0", "amplitude of the bump potential"},
      {"potential.x", Type::Number, "0", "bump center x"},
      {"potential.y", Type::Number, "0", "bump center y"},
      {"potential.radius", Type::Number, "0.3", "bump radius"},
      {"region.shape", Type::String, "strip", "whole | ball | strip", {"whole", "ball", "strip"}},
      {"region.x0", Type::Number, "0", "strip start"},
      {"region.x1", Type::Number, "0.5", "strip end"},
      {"region.cx", Type::Number, "0", "ball center x"},
      {"region.cy", Type::Number, "0", "ball center y"},
      {"region.radius", Type::Number, "0.6", "ball radius"},
      {"region.band", Type::Number, "-1", "transition band width; negative means 10% of the diameter"},
      {"time.T", Type::List, "1", "observation times"},
      {"time.n_steps", Type::Integer, "0", "Gauss-Legendre panels; 0 picks from the fastest phase"},
      {"windows.h", Type::List, "", "semiclassical scales"},
      {"windows.k_min", Type::Integer, "0", "first dyadic window"},
      {"windows.k_max", Type::Integer, "-1", "last dyadic window; below k_min disables"},
      {"windows.C_horizon", Type::List, "1", "wave horizons T = C log(1/h)"},
      {"windows.tau", Type::List, "", "energy levels for the quasimode check"},
      {"windows.probes", Type::Integer, "1000", "quasimode probes per (h, tau)"},
      {"hum.epsilon", Type::Number, "0", "Tikhonov regularization"},
      {"hum.seed", Type::Unsigned, "1", "seed for initial data and probes"},
      {"hum.fine_N", Type::Integer, "0", "modes of the spillover basis; 0 disables"},
      {"hum.probes", Type::Integer, "20", "random probes in the check suite"},
      {"check.basis_file", Type::String, "", "load the basis from a file instead of solving"},
      {"output.directory", Type::String, "out", "experiment root"},
      {"output.formats", Type::String, "csv,json", "csv | json | csv,json", {"csv", "json", "csv,json"}},
  };
  return k;
}

const Key& find_key(const std::string& name) {
  for (const Key& k : keys())
    if (name == k.name) return k;
  throw ConfigError("unknown key '" + name + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  double d;
  if (!(is >> d) || !is.eof() || !std::isfinite(d))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

template <class I>
I parse_int(const std::string& key, const std::string& v) {
  I out{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError(key + ": empty list entry");
    out.push_back(parse_double(key, item));
  }
  return out;
}

void validate(const Key& k, const std::string& v) {
  switch (k.type) {
    case Type::String:
      if (!k.choices.empty() && std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end())
        throw ConfigError(std::string(k.name) + ": invalid value '" + v + "' (" + k.help + ")");
      break;
    case Type::Number:
      parse_double(k.name, v);
      break;
    case Type::Integer:
      parse_int<long long>(k.name, v);
      break;
    case Type::Unsigned:
      parse_int<std::uint64_t>(k.name, v);
      break;
    case Type::Bool:
      if (v != "true" && v != "false")
        throw ConfigError(std::string(k.name) + ": expected true or false, got '" + v + "'");
      break;
    case Type::List:
      if (!v.empty()) parse_list(k.name, v);
      break;
  }
}

}  // namespace

Config Config::defaults() {
  Config c;
  for (const Key& k : keys()) c.values_[k.name] = k.fallback;
  return c;
}

void Config::set(const std::string& key, const std::string& value) {
  const Key& k = find_key(key);
  validate(k, value);
  values_[key] = value;
}

Config Config::parse(std::istream& is, const std::string& source) {
  Config c = defaults();
  std::string line;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (seen.count(key))
      throw ConfigError(key + ": duplicate key (lines " + std::to_string(seen[key]) + " and " +
                        std::to_string(lineno) + ")");
    seen[key] = lineno;
    c.set(key, trim(line.substr(eq + 1)));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  return parse(is, path.string());
}

std::string Config::str(const std::string& key) const {
  find_key(key);
  return values_.at(key);
}

double Config::num(const std::string& key) const { return parse_double(key, str(key)); }

int Config::integer(const std::string& key) const {
  return static_cast<int>(parse_int<long long>(key, str(key)));
}

std::uint64_t Config::u64(const std::string& key) const {
  return parse_int<std::uint64_t>(key, str(key));
}

bool Config::flag(const std::string& key) const { return str(key) == "true"; }

std::vector<double> Config::list(const std::string& key) const {
  const std::string v = str(key);
  return v.empty() ? std::vector<double>{} : parse_list(key, v);
}

std::string Config::canonical() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
  return os.str();
}

std::string Config::hash() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_)
    if (k.rfind("output.", 0) != 0) os << k << " = " << v << '\n';
  return sha1_hex(os.str());
}

std::vector<std::array<std::string, 3>> Config::schema() {
  std::vector<std::array<std::string, 3>> out;
  for (const Key& k : keys()) out.push_back({k.name, k.fallback, k.help});
  return out;
}

std::string sha1_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha1(), nullptr))
    throw IoError("SHA-1 digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

}  // namespace sclab::cli
