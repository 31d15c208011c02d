#include "rppg/error.hpp"

namespace rppg {

std::string_view ToString(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kInvariant: return "invariant error";
    case ErrorKind::kInsufficientData: return "insufficient data";
    case ErrorKind::kGeometry: return "geometry error";
    case ErrorKind::kParameter: return "parameter error";
    case ErrorKind::kDegenerateData: return "degenerate data";
    case ErrorKind::kNumericalDivergence: return "numerical divergence";
    case ErrorKind::kEmptyRoi: return "empty ROI";
    case ErrorKind::kNoSignal: return "no signal";
    case ErrorKind::kDegenerateEmbedding: return "degenerate embedding";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kIo: return "I/O error";
  }
  return "error";
}

}  // namespace rppg
