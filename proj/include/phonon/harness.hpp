#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace phonon::harness {

using json = nlohmann::json;

enum ExitCode : int { exit_ok = 0, exit_failed = 1, exit_config = 2, exit_invalid_run = 3 };

struct Check {
    std::string name;
    double measured = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    bool informational = false;  // reported, never fails the run
    std::string note;
};

struct OutputFile {
    std::string name;
    std::string content;
};

struct RunReport {
    std::string command;
    json config;  // merged config actually used
    std::vector<Check> checks;
    json data = json::object();  // command-specific results
    std::vector<OutputFile> files;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    double wall_seconds = 0.0;
    std::string status = "pass";  // pass, fail, invalid, config_error, error
    std::string message;

    bool passed() const;
    int exit_code() const;
    json to_json() const;
    void add(Check c);
};

struct RunOptions {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;  // 0: environment, then config, then hardware
};

const std::vector<std::string>& commands();

// Named config fragments. Every command starts from the fragment of the same
// name; a config may list further presets under "preset", merged in order,
// and its own keys win.
std::vector<std::string> preset_names();
json preset(const std::string& name);

// Recursive merge of objects; non-object values in `patch` replace.
json merge(json base, const json& patch);

// Merged and key-checked config. Throws ConfigError naming the offending key.
json resolve_config(const std::string& command, const json& user);

// Runs one command. Config rejections and invalid runs come back as reports
// with the matching status; files are written only when out_dir is set.
RunReport run(const std::string& command, const json& user_config, const RunOptions& options = {});

// Writes report.json, the command outputs and manifest.json under dir.
void write_outputs(const RunReport& report, const std::string& dir);

// Loads a config file (JSON). Throws ConfigError.
json load_config(const std::string& path);

}  // namespace phonon::harness
