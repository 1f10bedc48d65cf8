#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cdmp/protocol.h"

namespace cdmp {

/// Everything a command needs to be re-run exactly.
struct RunConfig {
  std::string dataset = "ucihar";
  std::filesystem::path root;   // dataset root; CDMP_DATA_ROOT when unset
  std::filesystem::path out;    // ./runs/<timestamp> when unset
  ProtocolConfig protocol;

  void validate() const;
};

nlohmann::json run_config_to_json(const RunConfig& config);
/// Keys: dataset, root, out, protocol. Missing keys keep `base`.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

/// Entry point of the `cdmp` tool; `args` excludes the program name.
/// Returns the process exit status. Diagnostics go to `err` as one line.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cdmp
