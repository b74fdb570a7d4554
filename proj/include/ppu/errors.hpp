#ifndef PPU_ERRORS_HPP
#define PPU_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace ppu {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidLayout : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct InvalidTarget : Error { using Error::Error; };
struct InvalidProbabilities : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct SpecError : Error { using Error::Error; };
struct InfeasibleError : Error { using Error::Error; };
struct NumericalOverflow : Error { using Error::Error; };
struct UsageError : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct IncompleteRun : Error { using Error::Error; };

struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line(line) {}
  std::size_t line;
};

// Thrown when the label column is not exactly {0, ..., K-1}. `remap` lists
// the mapping that would make it contiguous.
struct LabelMappingError : Error {
  LabelMappingError(const std::string& what, std::vector<std::pair<long long, int>> remap)
      : Error(what), remap(std::move(remap)) {}
  std::vector<std::pair<long long, int>> remap;
};

// Carries every offending field, not just the first one found.
struct ValidationError : Error {
  explicit ValidationError(std::vector<std::string> issues)
      : Error(join(issues)), issues(std::move(issues)) {}
  std::vector<std::string> issues;

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid configuration:";
    for (const auto& s : items) out += "\n  - " + s;
    return out;
  }
};

}  // namespace ppu

#endif  // PPU_ERRORS_HPP
