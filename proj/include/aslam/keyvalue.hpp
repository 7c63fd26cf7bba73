#pragma once

#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aslam
{

class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Flat `key = value` text. '#' starts a comment; blank lines are skipped.
/// Keys may repeat; order is preserved.
using KeyValueList = std::vector<std::pair<std::string, std::string>>;

KeyValueList parse_key_values(std::istream& in, const std::string& source_name = "<stream>");
KeyValueList read_key_value_file(const std::filesystem::path& path);

double parse_double(const std::string& text, const std::string& key);
std::vector<double> parse_doubles(const std::string& text, const std::string& key);

}  // namespace aslam
