#include "mrm/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mrm {

std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

KeyValues KeyValues::parse(const std::string& line)
{
    KeyValues kv;
    std::istringstream in(line);
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::invalid_argument("malformed key=value token: '" + token + "'");
        kv.set(token.substr(0, eq), token.substr(eq + 1));
    }
    return kv;
}

void KeyValues::set(const std::string& key, const std::string& value)
{
    if (value.find_first_of(" \t\n") != std::string::npos)
        throw std::invalid_argument("value for '" + key + "' contains whitespace");
    auto it = std::find_if(items_.begin(), items_.end(),
                           [&](const auto& kv) { return kv.first == key; });
    if (it != items_.end())
        it->second = value;
    else
        items_.emplace_back(key, value);
}

void KeyValues::set(const std::string& key, double value) { set(key, format_double(value)); }
void KeyValues::set(const std::string& key, long long value) { set(key, std::to_string(value)); }
void KeyValues::set(const std::string& key, unsigned long long value)
{
    set(key, std::to_string(value));
}

bool KeyValues::has(const std::string& key) const
{
    return std::any_of(items_.begin(), items_.end(),
                       [&](const auto& kv) { return kv.first == key; });
}

const std::string& KeyValues::get(const std::string& key) const
{
    for (const auto& [k, v] : items_)
        if (k == key)
            return v;
    throw std::out_of_range("missing key '" + key + "'");
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text)
{
    T value{};
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last)
        throw std::invalid_argument("bad numeric value for '" + key + "': '" + text + "'");
    return value;
}

}  // namespace

double KeyValues::get_double(const std::string& key) const
{
    return parse_number<double>(key, get(key));
}

long long KeyValues::get_int(const std::string& key) const
{
    return parse_number<long long>(key, get(key));
}

unsigned long long KeyValues::get_uint(const std::string& key) const
{
    return parse_number<unsigned long long>(key, get(key));
}

void KeyValues::merge(const KeyValues& other)
{
    for (const auto& [k, v] : other.items_)
        set(k, v);
}

std::string KeyValues::str() const
{
    std::string out;
    for (const auto& [k, v] : items_) {
        if (!out.empty())
            out += ' ';
        out += k;
        out += '=';
        out += v;
    }
    return out;
}

KeyValues read_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config file " + path);
    KeyValues kv;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        kv.merge(KeyValues::parse(line));
    }
    return kv;
}

}  // namespace mrm
