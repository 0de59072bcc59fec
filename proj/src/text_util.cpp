#include "text_util.hpp"

#include <fstream>
#include <sstream>

namespace headpose {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kProjectionSingularity: return "projection-singularity";
    case ErrorCode::kInsufficientPoints: return "insufficient-points";
    case ErrorCode::kNumericalFailure: return "numerical-failure";
    case ErrorCode::kDegenerateTraining: return "degenerate-training";
    case ErrorCode::kModelIncomplete: return "model-incomplete";
    case ErrorCode::kUndefinedMetric: return "undefined-metric";
    case ErrorCode::kSplitInfeasible: return "split-infeasible";
    case ErrorCode::kSpecInvalid: return "spec-invalid";
  }
  return "unknown";
}

namespace detail {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace detail
}  // namespace headpose
