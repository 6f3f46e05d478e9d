#include "metacurv/report.hpp"

#include <sstream>

namespace metacurv {

Json make_report(const std::string& command, const std::string& chart_name,
                 std::uint64_t seed) {
  Json j;
  j["command"] = command;
  j["chart"] = chart_name;
  j["toolkit_version"] = kToolkitVersion;
  j["seed"] = seed;
  return j;
}

namespace {

void render(const Json& j, const std::string& prefix, std::ostringstream& os) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it->is_object() || it->is_array()) {
        os << prefix << it.key() << ":\n";
        render(*it, prefix + "  ", os);
      } else {
        os << prefix << it.key() << ": " << it->dump() << "\n";
      }
    }
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (v.is_object() || v.is_array()) {
        os << prefix << "-\n";
        render(v, prefix + "  ", os);
      } else {
        os << prefix << "- " << v.dump() << "\n";
      }
    }
  } else {
    os << prefix << j.dump() << "\n";
  }
}

}  // namespace

std::string render_text(const Json& j) {
  std::ostringstream os;
  render(j, "", os);
  return os.str();
}

}  // namespace metacurv
