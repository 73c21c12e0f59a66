#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "common/options.hpp"

namespace sf::app {

inline constexpr const char* kVersion = "0.1.0";

struct FlagSpec {
  std::string key;            // config-file key; the flag is --key with '_' -> '-'
  std::string default_value;  // empty means no default
  std::string help;
  bool is_switch = false;
  bool required = false;
};

struct CommandSpec {
  std::string name;
  std::string summary;
  std::vector<FlagSpec> flags;

  const FlagSpec* find(const std::string& key) const;
};

const std::vector<CommandSpec>& commands();
/// Usage error for unknown names.
const CommandSpec& command(const std::string& name);

std::string flag_name(const std::string& key);

/// Defaults, then the file named by "config" (if any), then `explicit_flags`.
/// Unknown keys in either source are usage errors.
Options resolve_options(const CommandSpec& cmd, const Options& explicit_flags);

/// Hash of the resolved options minus out/force/config.
std::uint64_t config_hash(const Options& resolved);

/// REPRO.txt body. `timestamp` goes on its own "timestamp:" line, the only
/// line expected to differ between identical runs.
std::string repro_header(const std::string& command, const Options& resolved, const std::string& timestamp);

/// 0 ok, 1 usage, 2 data, 3 numeric.
int exit_code_for(ErrorCode code);

using Log = std::function<void(const std::string&)>;

/// Runs a subcommand with already-resolved options. Throws sf::Error.
void run(const std::string& command, const Options& resolved, const Log& log);

}  // namespace sf::app
