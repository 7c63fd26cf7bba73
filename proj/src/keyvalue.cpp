#include "aslam/keyvalue.hpp"

#include <fstream>
#include <sstream>

namespace aslam
{

namespace
{

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

KeyValueList parse_key_values(std::istream& in, const std::string& source_name)
{
    KeyValueList out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source_name + ":" + std::to_string(line_no) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(source_name + ":" + std::to_string(line_no) + ": empty key");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

KeyValueList read_key_value_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    return parse_key_values(in, path.string());
}

double parse_double(const std::string& text, const std::string& key)
{
    std::istringstream ss(text);
    double v = 0.0;
    std::string rest;
    if (!(ss >> v) || (ss >> rest))
        throw ConfigError("key '" + key + "': expected a number, got '" + text + "'");
    return v;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& key)
{
    std::istringstream ss(text);
    std::vector<double> values;
    std::string tok;
    while (ss >> tok)
        values.push_back(parse_double(tok, key));
    return values;
}

}  // namespace aslam
