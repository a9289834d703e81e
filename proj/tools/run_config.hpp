#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "adrbayes/model.hpp"
#include "adrbayes/sampler.hpp"
#include "adrbayes/simulator.hpp"

// Run configuration shared by every subcommand. A config file is a JSON object
// (see docs/config_schema.json); command-line flags are written into the same
// object before anything runs, so the effective config alone reproduces a run.
namespace adrb::cli {

using Json = nlohmann::json;

/// Bad invocation or config: unknown preset, missing required key, unreadable config.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Json load_config(const std::filesystem::path& path);

/// Sets a dotted key ("sampler.chains"), creating intermediate objects.
void set_key(Json& cfg, std::string_view dotted, Json value);
/// "key=value" from --set; the value is parsed as JSON, falling back to a string.
void apply_assignment(Json& cfg, std::string_view assignment);

/// Value at a dotted key, or nullptr json when absent.
const Json& lookup(const Json& cfg, std::string_view dotted);
std::string require_string(const Json& cfg, std::string_view dotted);

/// Compact dump with sorted keys; the config hash is taken over this text.
std::string canonical(const Json& cfg);
std::uint64_t seed_of(const Json& cfg);

/// "model": preset name, or {"preset": name, <flag>: bool ...}.
ModelSpec model_from(const Json& cfg);
/// "hyperparams": preset name, or {"preset": name, <field>: number ...}.
Hyperparams hyperparams_from(const Json& cfg);
/// "sampler": chain settings; "seed" and "threads" are top-level.
SamplerConfig sampler_from(const Json& cfg);
/// "simulate": {"preset", "n_times", "sigma2", "phi", "u0"} with "seed".
SimConfig simulation_from(const Json& cfg);

}  // namespace adrb::cli
