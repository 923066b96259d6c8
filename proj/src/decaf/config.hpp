#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "decaf/trainer.hpp"

namespace decaf {

// Flat `key = value` configuration with `#` comments and dotted nested keys.
// Unknown keys are rejected by name; every accepted key is echoed into the
// run summary with its resolved value.
struct ConfigBundle {
  RunConfig run;
  bool dump_adapters = false;
  bool dump_data = false;
  std::string topology_csv;  // set when topology weights were loaded from file

  // canonical key -> resolved value, every key present
  std::vector<std::pair<std::string, std::string>> resolved;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues parse_config_text(const std::string& text);
KeyValues parse_config_file(const std::string& path);

// Builds the bundle from file pairs plus override pairs (applied last, same
// semantics as config lines). A `preset` key installs its defaults before any
// other key is applied.
ConfigBundle build_config(const KeyValues& pairs);

std::string sha1_hex(const std::string& bytes);
// Git-style blob hash: sha1("blob <size>\0" + content).
std::string git_blob_hash(const std::string& content);

// Hash of the resolved configuration (plus the custom-topology file when
// used); identifies a run's inputs in summary.json.
std::string inputs_hash(const ConfigBundle& bundle);

std::string summary_json(const ConfigBundle& bundle, const RunResult& result);

// Atomic write: temp file in the target directory, then rename.
void atomic_write_file(const std::string& path, const std::string& content);

// metrics.csv + summary.json + ledger.csv (+ optional adapters/ and data/).
void write_run_outputs(const std::string& out_dir, const ConfigBundle& bundle,
                       const RunResult& result);

}  // namespace decaf
