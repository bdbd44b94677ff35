#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace pelrec::cli {

/// key=value lines; blank lines and lines starting with '#' are ignored.
/// Keys may repeat. Throws ConfigError on a malformed line.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

/// Expands a `--config FILE` argument into `--key=value` arguments placed
/// before the command-line ones. Keys given on the command line are
/// dropped from the file so flags win. Keys not in `known` are rejected.
/// `args` excludes the program name and starts at the subcommand.
std::vector<std::string> merge_config(const std::vector<std::string>& args,
                                      const std::set<std::string>& known);

}  // namespace pelrec::cli
