#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "duotok/core.hpp"

namespace duotok::cli {

// One recognized configuration key. A key with neither a default nor
// required=true is optional.
struct KeySpec {
    std::string name;
    std::optional<std::string> default_value;
    bool required = false;
    std::string help;
};

// Resolved settings for one command. Values come from, in increasing
// precedence: declared defaults, the --config file, then --key value
// arguments. Unknown keys are rejected.
struct RunConfig {
    std::map<std::string, std::string> values;
    std::vector<std::string> positional;

    bool has(const std::string &key) const { return values.count(key) != 0; }
    const std::string &str(const std::string &key) const;
    std::int64_t i64(const std::string &key) const;
    double f64(const std::string &key) const;
    bool flag(const std::string &key) const;

    // "key = value" lines, sorted by key; parse(serialize(c)) == c.
    std::string serialize() const;
};

// Parses "--key value" arguments plus an optional "--config path" file of
// "key = value" lines. Throws ConfigError on unknown keys, missing required
// keys, or malformed input.
RunConfig parse_run_config(const std::vector<std::string> &args, const std::vector<KeySpec> &known,
                           bool allow_positional = false);

// Parses just a config file against the known keys (no CLI overlay).
RunConfig parse_config_file(const std::string &path, const std::vector<KeySpec> &known);

// Exit codes: 0 success, 2 config error, 3 data error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

int cmd_featurize(const RunConfig &cfg);
int cmd_bestrq_targets(const RunConfig &cfg);
int cmd_train_vq(const RunConfig &cfg);
int cmd_tokenize(const RunConfig &cfg);
int cmd_eval_lm(const RunConfig &cfg);
int cmd_pareto(const RunConfig &cfg);

const std::vector<KeySpec> &keys_for(const std::string &verb);

// Full dispatcher: run({"featurize", "--in", ...}). Catches the library
// error classes and maps them to exit codes.
int run(const std::vector<std::string> &args);
int run(int argc, char **argv);

}  // namespace duotok::cli
