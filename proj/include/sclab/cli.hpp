#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sclab/spectral.hpp"
#include "sclab/surface.hpp"

namespace sclab::cli {

// Flat `section.key = value` text; `#` starts a comment. Every key has a
// declared type and default; unknown keys and malformed values throw
// ConfigError naming the key.
class Config {
 public:
  static Config parse(std::istream& is, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);
  static Config defaults();

  void set(const std::string& key, const std::string& value);

  std::string str(const std::string& key) const;
  double num(const std::string& key) const;
  int integer(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;

  // Canonical `key = value` lines, sorted, with defaults filled in.
  std::string canonical() const;
  // SHA-1 of the canonical text, hex.
  std::string hash() const;

  // Documented schema: key, default, description.
  static std::vector<std::array<std::string, 3>> schema();

 private:
  std::map<std::string, std::string> values_;
};

std::string sha1_hex(const std::string& text);

struct Options {
  std::string command;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  bool force = false;
  bool quiet = false;
};

enum ExitCode { Success = 0, ConfigFailure = 2, NumericalFailure = 3, IoFailure = 4 };

// Runs one subcommand and maps errors to exit codes.
int run(const Options& options, std::ostream& out, std::ostream& err);

// Building blocks shared by the subcommands.
surface::SurfaceMesh build_mesh(const Config& c);
surface::ControlRegion build_region(const Config& c, const surface::SurfaceMesh& mesh);
spectral::EigenBasis build_basis(const Config& c, const surface::SurfaceMesh& mesh);

}  // namespace sclab::cli
