#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sburgers/fields.hpp"
#include "sburgers/noise_field.hpp"

namespace sburgers {

inline constexpr const char* kVersion = "0.1.0";

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Deterministic float formatting shared by every CSV writer, so identical
/// runs produce byte-identical payloads.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Collects artifacts and timings of one CLI run and finishes with the JSON
/// manifest; every output file must be registered here.
class RunWriter {
public:
    RunWriter(std::filesystem::path out_dir, std::string subcommand)
        : dir_(std::move(out_dir)), subcommand_(std::move(subcommand)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const { return dir_; }

    std::ofstream open(const std::string& name) {
        outputs_.push_back(name);
        std::ofstream f(dir_ / name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open output file: " + (dir_ / name).string());
        return f;
    }

    void note_timing(const std::string& key, double seconds) { timings_[key] = seconds; }
    void note(const std::string& key, const nlohmann::json& value) { extra_[key] = value; }

    void write_manifest(const std::string& config_text, const std::string& config_path,
                        std::uint64_t seed) {
        nlohmann::json j;
        j["subcommand"] = subcommand_;
        j["version"] = kVersion;
        j["config_path"] = config_path;
        j["config_hash"] = hex64(fnv1a64(config_text));
        j["seed"] = seed;
        j["outputs"] = outputs_;
        j["timings_seconds"] = timings_;
        for (const auto& [k, v] : extra_.items()) j[k] = v;
        const auto now = std::chrono::system_clock::now().time_since_epoch();
        j["written_at_unix_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
        std::ofstream f(dir_ / "manifest.json", std::ios::binary);
        f << j.dump(2) << "\n";
    }

private:
    std::filesystem::path dir_;
    std::string subcommand_;
    std::vector<std::string> outputs_;
    std::map<std::string, double> timings_;
    nlohmann::json extra_ = nlohmann::json::object();
};

/// CSV dump of a space-time field: t, node, coordinates, components, and the
/// gradient channel when present.
inline void write_field_csv(std::ofstream& f, const SpaceTimeField& u) {
    const std::size_t n = u.space.dim();
    f << "t,node";
    for (std::size_t a = 0; a < n; ++a) f << ",x" << a;
    for (std::size_t i = 0; i < u.comp; ++i) f << ",y" << i;
    if (u.has_gradient())
        for (std::size_t i = 0; i < u.comp; ++i)
            for (std::size_t a = 0; a < n; ++a) f << ",dy" << i << "_dx" << a;
    f << "\n";
    std::vector<double> x(n);
    for (std::size_t j = 0; j < u.time.slices(); ++j)
        for (std::size_t m = 0; m < u.space.total_nodes(); ++m) {
            u.space.node_point(m, x);
            f << format_double(u.time.time(j)) << "," << m;
            for (std::size_t a = 0; a < n; ++a) f << "," << format_double(x[a]);
            for (std::size_t i = 0; i < u.comp; ++i) f << "," << format_double(u.at(j, m, i));
            if (u.has_gradient())
                for (std::size_t i = 0; i < u.comp; ++i)
                    for (std::size_t a = 0; a < n; ++a)
                        f << "," << format_double(u.grad_at(j, m, i, a));
            f << "\n";
        }
}

/// Columnar CSV dump of a noise realization: every derivative channel of
/// every component, one row per (time, node). Pair with the JSON sidecar for
/// replay metadata.
inline void write_noise_csv(std::ofstream& f, const NoiseField& eta) {
    const std::size_t n = eta.space_grid().dim();
    const auto& mis = eta.multi_indices();
    f << "t_index,node";
    for (std::size_t a = 0; a < n; ++a) f << ",x" << a;
    for (std::size_t c = 0; c < eta.channel_count(); ++c) {
        auto alpha = mis.alpha(c);
        std::string label = "d";
        for (int v : alpha) label += std::to_string(v);
        for (std::size_t i = 0; i < eta.components(); ++i)
            f << ",eta" << i << "_" << label;
    }
    f << "\n";
    std::vector<double> x(n);
    for (std::size_t j = 0; j < eta.time_grid().slices(); ++j)
        for (std::size_t m = 0; m < eta.space_grid().total_nodes(); ++m) {
            eta.space_grid().node_point(m, x);
            f << j << "," << m;
            for (std::size_t a = 0; a < n; ++a) f << "," << format_double(x[a]);
            for (std::size_t c = 0; c < eta.channel_count(); ++c)
                for (std::size_t i = 0; i < eta.components(); ++i)
                    f << "," << format_double(eta.at(c, j, m, i));
            f << "\n";
        }
}

inline nlohmann::json noise_sidecar(const NoiseField& eta, std::uint64_t seed) {
    nlohmann::json j;
    j["seed"] = seed;
    j["time_steps"] = eta.time_grid().steps();
    j["horizon"] = eta.time_grid().horizon();
    j["deriv_order"] = eta.deriv_order();
    j["holder_beta"] = eta.holder_beta();
    j["components"] = eta.components();
    nlohmann::json axes = nlohmann::json::array();
    for (std::size_t a = 0; a < eta.space_grid().dim(); ++a)
        axes.push_back({{"lo", eta.space_grid().axis(a).lo},
                        {"hi", eta.space_grid().axis(a).hi},
                        {"nodes", eta.space_grid().nodes(a)}});
    j["axes"] = axes;
    j["periodic"] = eta.space_grid().periodic();
    return j;
}

/// Generic table: header row plus rows of formatted doubles.
inline void write_table_csv(std::ofstream& f, const std::vector<std::string>& header,
                            const std::vector<std::vector<double>>& rows) {
    for (std::size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
    f << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << format_double(row[i]);
        f << "\n";
    }
}

}  // namespace sburgers
