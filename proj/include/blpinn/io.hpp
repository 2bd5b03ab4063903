#pragma once

#include <string>
#include <vector>

namespace blpinn {

// Shortest round-trip decimal (17 significant digits) used by every file
// writer, so outputs are byte-stable across runs.
std::string fmt17(double v);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

double parse_double(const std::string& s, const std::string& what);
long long parse_int(const std::string& s, const std::string& what);

// Throws ConfigError when `path` exists and force is false.
void check_overwrite(const std::string& path, bool force);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace blpinn
