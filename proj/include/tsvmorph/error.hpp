#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsvmorph {

enum class Errc {
  BadMagic,
  TruncatedPayload,
  NonFiniteSample,
  ZeroPitch,
  BadDimensions,
  InvalidParams,
  LabelCountMismatch,
  ImageTooSmall,
  InvalidGrid,
  BoxTooLarge,
  WrongSize,
  UnlabeledRecord,
  InvalidLabel,
  KernelLargerThanInput,
  WindowLargerThanInput,
  SingletonBatchInTrainMode,
  NoForwardCache,
  ShapeMismatch,
  ShapeUnderflow,
  InvalidConfig,
  OverlappingSplits,
  EmptyClass,
  BadCheckpoint,
  BadManifest,
  UnsupportedImage,
  Io,
};

std::string_view to_string(Errc code) noexcept;

/// Domain error carrying a machine-checkable code; the message names the
/// offending input.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace tsvmorph
