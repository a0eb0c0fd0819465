#include "d4d/error.hpp"

namespace d4d {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::kFormat: return "format";
    case Errc::kBadMagic: return "bad-magic";
    case Errc::kTruncated: return "truncated";
    case Errc::kCountMismatch: return "count-mismatch";
    case Errc::kIo: return "io";
    case Errc::kConfig: return "config";
    case Errc::kNormalization: return "normalization-required";
    case Errc::kLookup: return "lookup";
    case Errc::kDegenerate: return "degenerate";
    case Errc::kShape: return "shape";
    case Errc::kEmpty: return "empty";
    case Errc::kScoring: return "scoring";
    case Errc::kDuplicate: return "duplicate";
    case Errc::kNotFinite: return "not-finite";
  }
  return "unknown";
}

}  // namespace d4d
