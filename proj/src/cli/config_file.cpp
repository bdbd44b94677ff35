#include "config_file.hpp"

#include "pelrec/errors.hpp"
#include "pelrec/io.hpp"

#include <algorithm>
#include <sstream>

namespace pelrec::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// "--key=value" -> "key", "--key" -> "key", anything else -> "".
std::string flag_name(const std::string& arg) {
  if (arg.rfind("--", 0) != 0) return {};
  const auto eq = arg.find('=');
  return arg.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("config line " + std::to_string(number) + " is not key=value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::vector<std::string> merge_config(const std::vector<std::string>& args,
                                      const std::set<std::string>& known) {
  std::vector<std::string> rest;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config_path.empty()) return rest;

  std::string text;
  try {
    text = io::read_file(config_path);
  } catch (const Error&) {
    throw ConfigError("cannot read config file " + config_path);
  }
  std::set<std::string> on_command_line;
  for (const auto& a : rest) {
    const std::string name = flag_name(a);
    if (!name.empty()) on_command_line.insert(name);
  }
  std::vector<std::string> merged;
  if (!rest.empty()) merged.push_back(rest.front());  // subcommand
  for (const auto& [key, value] : parse_key_values(text)) {
    if (!known.contains(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    if (on_command_line.contains(key)) continue;
    merged.push_back("--" + key + "=" + value);
  }
  merged.insert(merged.end(), rest.begin() + (rest.empty() ? 0 : 1), rest.end());
  return merged;
}

}  // namespace pelrec::cli
