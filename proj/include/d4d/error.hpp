#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace d4d {

enum class Errc {
  kFormat,           // malformed file contents
  kBadMagic,         // magic bytes do not match the expected tag
  kTruncated,        // file ended before the declared payload
  kCountMismatch,    // declared counts disagree with each other
  kIo,               // open/read/write failure
  kConfig,           // invalid configuration values
  kNormalization,    // quaternion is not unit length
  kLookup,           // unknown id or timestamp
  kDegenerate,       // input that has no defined result
  kShape,            // tensor/vector dimensions disagree
  kEmpty,            // operation needs a non-empty input
  kScoring,          // prediction and ground truth have incompatible types
  kDuplicate,        // repeated id
  kNotFinite,        // NaN or inf where finite values are required
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace d4d
