#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "pdmp/capacity.hpp"
#include "pdmp/lp.hpp"
#include "pdmp/model.hpp"
#include "pdmp/operators.hpp"
#include "pdmp/policy.hpp"

namespace pdmp {

using Json = nlohmann::ordered_json;

enum class InstanceKind { Tabulated, CapacityExpansion };

const char* to_string(InstanceKind k);

/// Parses JSON text; syntax errors become ParseError with "source:line:column".
Json parse_json(const std::string& text, const std::string& source);
Json read_json_file(const std::filesystem::path& path);
/// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);
/// Pretty JSON with a trailing newline.
std::string dump_json(const Json& j);

Json instance_to_json(const FiniteInstance& inst);
FiniteInstance instance_from_json(const Json& j);
Json capacity_to_json(const CapacityParams& p);
CapacityParams capacity_from_json(const Json& j);

/// An instance file together with the model that produced it, if any.
struct LoadedInstance {
    InstanceKind kind = InstanceKind::Tabulated;
    FiniteInstance instance;
    std::optional<CapacityParams> capacity;
    /// The capacity model, or the constant-rate realization of a tabulated instance.
    std::shared_ptr<const PdmpModel> model;
    /// Why a tabulated instance has no model; empty when it has one.
    std::string model_note;
    std::string digest;
};

LoadedInstance load_instance(const Json& j, const QuadratureConfig& quad = {});
LoadedInstance load_instance_file(const std::filesystem::path& path, const QuadratureConfig& quad = {});

Json policy_to_json(const StationaryPolicy& phi);
StationaryPolicy policy_from_json(const Json& j);

/// Columns state,interior_action,boundary_action,mu.
void write_measure_csv(std::ostream& out, const FiniteInstance& inst, const OccupationMeasure& mu);

/// Round-trip decimal form for CSV output ("." separator regardless of locale).
std::string format_number(double x);

/// FNV-1a 64-bit hash of the compact JSON text, as 16 hex digits.
std::string digest(const Json& j);

}  // namespace pdmp
