#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace mrm {

/// Ordered key=value pairs, the grammar shared by file headers and config
/// files. Tokens are separated by whitespace; values may not contain spaces.
class KeyValues
{
public:
    KeyValues() = default;

    static KeyValues parse(const std::string& line);

    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set(const std::string& key, long long value);
    void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }
    void set(const std::string& key, unsigned long long value);

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;  // throws if absent
    double get_double(const std::string& key) const;
    long long get_int(const std::string& key) const;
    unsigned long long get_uint(const std::string& key) const;

    /// Copies every pair of other into this, overriding existing keys.
    void merge(const KeyValues& other);

    std::string str() const;
    const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

    bool operator==(const KeyValues&) const = default;

private:
    std::vector<std::pair<std::string, std::string>> items_;
};

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);

/// Reads a config file of key=value tokens; '#' starts a comment.
KeyValues read_config_file(const std::string& path);

}  // namespace mrm
