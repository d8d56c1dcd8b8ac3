#pragma once

#include <cctype>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sburgers {

/// Configuration error carrying the offending line and field so the CLI can
/// report them verbatim.
struct ConfigError : std::runtime_error {
    ConfigError(std::string message, int line_no = 0, std::string field_name = {})
        : std::runtime_error(std::move(message)), line(line_no), field(std::move(field_name)) {}
    int line;
    std::string field;
};

/// Minimal INI-style scenario config: [section] headers, key = value pairs,
/// '#' or ';' comments. Values keep their raw text; typed getters parse on
/// demand and name the field in every error.
class Config {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    static Config parse_string(const std::string& text, const std::string& origin = "<string>") {
        Config cfg;
        cfg.origin_ = origin;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string s = strip(line);
            if (s.empty() || s[0] == '#' || s[0] == ';') continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw ConfigError(origin + ":" + std::to_string(line_no) +
                                          ": unterminated section header",
                                      line_no);
                section = strip(s.substr(1, s.size() - 2));
                if (section.empty())
                    throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty section name",
                                      line_no);
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                      ": expected 'key = value', got '" + s + "'",
                                  line_no);
            std::string key = strip(s.substr(0, eq));
            std::string value = strip_comment(strip(s.substr(eq + 1)));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key", line_no);
            cfg.data_[section][key] = Entry{value, line_no};
        }
        return cfg;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        Config cfg = parse_string(ss.str(), path);
        cfg.raw_text_ = ss.str();
        return cfg;
    }

    const std::string& raw_text() const { return raw_text_; }
    const std::string& origin() const { return origin_; }

    bool has(const std::string& section, const std::string& key) const {
        auto s = data_.find(section);
        return s != data_.end() && s->second.count(key) > 0;
    }

    std::string require(const std::string& section, const std::string& key) const {
        auto s = data_.find(section);
        if (s == data_.end() || !s->second.count(key))
            throw ConfigError("missing required field '" + section + "." + key + "' in " + origin_,
                              0, section + "." + key);
        return s->second.at(key).value;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
        return has(section, key) ? data_.at(section).at(key).value : fallback;
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        if (!has(section, key)) return fallback;
        return parse_double(section, key, data_.at(section).at(key));
    }

    double require_double(const std::string& section, const std::string& key) const {
        require(section, key);
        return parse_double(section, key, data_.at(section).at(key));
    }

    long get_int(const std::string& section, const std::string& key, long fallback) const {
        if (!has(section, key)) return fallback;
        const auto& e = data_.at(section).at(key);
        try {
            std::size_t pos = 0;
            const long v = std::stol(e.value, &pos);
            if (pos != e.value.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(field_msg(section, key, e, "an integer"), e.line, section + "." + key);
        }
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        if (!has(section, key)) return fallback;
        const auto& e = data_.at(section).at(key);
        if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
        if (e.value == "false" || e.value == "0" || e.value == "no") return false;
        throw ConfigError(field_msg(section, key, e, "a boolean"), e.line, section + "." + key);
    }

    std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                        std::vector<double> fallback = {}) const {
        if (!has(section, key)) return fallback;
        const auto& e = data_.at(section).at(key);
        std::vector<double> out;
        std::string item;
        std::istringstream in(e.value);
        while (std::getline(in, item, ',')) {
            item = strip(item);
            if (item.empty()) continue;
            try {
                std::size_t pos = 0;
                out.push_back(std::stod(item, &pos));
                if (pos != item.size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw ConfigError(field_msg(section, key, e, "a comma-separated number list"),
                                  e.line, section + "." + key);
            }
        }
        return out;
    }

    const std::map<std::string, std::map<std::string, Entry>>& sections() const { return data_; }

private:
    static std::string strip(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    static std::string strip_comment(const std::string& s) {
        const auto pos = s.find_first_of("#;");
        return pos == std::string::npos ? s : strip(s.substr(0, pos));
    }

    static std::string field_msg(const std::string& section, const std::string& key,
                                 const Entry& e, const char* what) {
        return "field '" + section + "." + key + "' (line " + std::to_string(e.line) +
               "): '" + e.value + "' is not " + what;
    }

    double parse_double(const std::string& section, const std::string& key,
                        const Entry& e) const {
        try {
            std::size_t pos = 0;
            const double v = std::stod(e.value, &pos);
            if (pos != e.value.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(field_msg(section, key, e, "a number"), e.line, section + "." + key);
        }
    }

    std::map<std::string, std::map<std::string, Entry>> data_;
    std::string raw_text_;
    std::string origin_ = "<string>";
};

}  // namespace sburgers
