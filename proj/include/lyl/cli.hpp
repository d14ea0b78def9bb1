#pragma once

// Batch front end: estimation, covariate ranking, simulation studies,
// oracle truths, and the influence-function finite-difference probe as
// subcommands over config files with explicit override precedence
// (flags beat the file, the file beats defaults) and atomic outputs.

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace lyl {

using ConfigValue =
    std::variant<bool, double, std::string, std::vector<double>>;
using ConfigTree = std::map<std::string, ConfigValue>;

// Minimal human-readable config reader: `key = value` assignments,
// `[section]` headers whose names prefix the keys that follow
// (dot-joined), `#` comments, quoted strings, bare true/false, plain
// numbers, and bracketed number arrays.  Later assignments win.
// InputError on anything it cannot read.
ConfigTree parse_config_text(const std::string& text);
ConfigTree load_config(const std::string& path);

// Entry point used by the binary: `args` excludes the program name.
// Returns the process exit code: 0 success, 2 usage error, 3 bad
// input, 4 computation failure.  The primary result goes to stdout (or
// --out via an atomic temp-file rename); diagnostics and
// machine-readable error objects go to stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace lyl
