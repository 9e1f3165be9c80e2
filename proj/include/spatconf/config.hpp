#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "spatconf/experiments.hpp"

namespace spatconf {

[[nodiscard]] std::string library_version();

struct ConfigEntry {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

// Flat key=value text. Blank lines and lines starting with '#' are skipped;
// whitespace around keys and values is trimmed. A line without '=', an empty
// key or a repeated key is a ParseError naming the line.
[[nodiscard]] std::vector<ConfigEntry> parse_config(std::istream& is);
[[nodiscard]] std::vector<ConfigEntry> read_config_file(const std::string& path);

struct RunConfig {
    ExperimentSpec spec;
    std::string output_dir = ".";
    bool seed_given = false;
};

// Every accepted key, in manifest order.
[[nodiscard]] const std::vector<std::string>& config_keys();

// Sets one key. Unknown keys and unparsable values throw DomainError.
// Lists are comma separated.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
void apply_settings(RunConfig& config, const std::vector<ConfigEntry>& entries);

// Current value of every key, with replicate count and design resolved, so
// that feeding the result back through apply_setting reproduces the run.
[[nodiscard]] std::vector<std::pair<std::string, std::string>> to_settings(const RunConfig& config);

// Settings plus comment lines for version, wall time and output files. The
// manifest is itself a valid config file.
void write_manifest(std::ostream& os, const RunConfig& config, double wall_seconds, const std::string& csv_name);

} // namespace spatconf
