#include "tsvmorph/error.hpp"

namespace tsvmorph {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::NonFiniteSample: return "NonFiniteSample";
    case Errc::ZeroPitch: return "ZeroPitch";
    case Errc::BadDimensions: return "BadDimensions";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::LabelCountMismatch: return "LabelCountMismatch";
    case Errc::ImageTooSmall: return "ImageTooSmall";
    case Errc::InvalidGrid: return "InvalidGrid";
    case Errc::BoxTooLarge: return "BoxTooLarge";
    case Errc::WrongSize: return "WrongSize";
    case Errc::UnlabeledRecord: return "UnlabeledRecord";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::KernelLargerThanInput: return "KernelLargerThanInput";
    case Errc::WindowLargerThanInput: return "WindowLargerThanInput";
    case Errc::SingletonBatchInTrainMode: return "SingletonBatchInTrainMode";
    case Errc::NoForwardCache: return "NoForwardCache";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::ShapeUnderflow: return "ShapeUnderflow";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::OverlappingSplits: return "OverlappingSplits";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::BadCheckpoint: return "BadCheckpoint";
    case Errc::BadManifest: return "BadManifest";
    case Errc::UnsupportedImage: return "UnsupportedImage";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace tsvmorph
