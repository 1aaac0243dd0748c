#ifndef A4LAB_ERROR_HPP
#define A4LAB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace a4lab {

enum class Errc {
  malformed = 1,
  dangling_edge,
  missing_request,
  duplicate_id,
  invalid_structure,
  invalid_node,
  no_anchor,
  dimension_mismatch,
  single_class,
  empty_corpus,
  empty_report,
  missing_file,
  missing_model,
  schema_mismatch,
  invalid_config,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::malformed: return "malformed";
    case Errc::dangling_edge: return "dangling-edge";
    case Errc::missing_request: return "missing-request";
    case Errc::duplicate_id: return "duplicate-id";
    case Errc::invalid_structure: return "invalid-structure";
    case Errc::invalid_node: return "invalid-node";
    case Errc::no_anchor: return "no-anchor";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::single_class: return "single-class";
    case Errc::empty_corpus: return "empty-corpus";
    case Errc::empty_report: return "empty-report";
    case Errc::missing_file: return "missing-file";
    case Errc::missing_model: return "missing-model";
    case Errc::schema_mismatch: return "schema-mismatch";
    case Errc::invalid_config: return "invalid-config";
  }
  return "unknown";
}

/// Library-wide exception. Every failure that a caller may want to branch on
/// carries a distinct Errc.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace a4lab

#endif  // A4LAB_ERROR_HPP
