#pragma once

#include <string>

#include <json.hpp>

namespace metacurv {

inline constexpr const char* kToolkitVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// Report skeleton shared by every subcommand; key order is fixed so that
// serialized reports are byte-identical across runs.
Json make_report(const std::string& command, const std::string& chart_name,
                 std::uint64_t seed);

// Text rendering derived from the JSON document (never computed separately).
std::string render_text(const Json& j);

}  // namespace metacurv
