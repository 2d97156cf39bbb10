#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace simpack {

enum class Errc {
  // pnm
  UnknownMagic,
  UnsupportedMaxval,
  TruncatedPayload,
  TrailingGarbage,
  MalformedHeader,
  SampleExceedsMaxval,
  // features
  ImageTooSmall,
  BadFeatureCache,
  // similarity
  DuplicateImageId,
  NotEnoughEntries,
  PoolTooSmall,
  BadManifest,
  // longrange
  BadDistance,
  BadLength,
  BadMagic,
  UnsupportedVersion,
  CorruptPayload,
  ExternalBackendFailed,
  // archive
  MissingFile,
  EntryTableMismatch,
  ZeroCompressedSize,
  // bench
  EmptyInput,
  BadReport,
  IoFailure,
  InvalidArgument,
};

constexpr std::string_view errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::UnknownMagic: return "UnknownMagic";
    case Errc::UnsupportedMaxval: return "UnsupportedMaxval";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::TrailingGarbage: return "TrailingGarbage";
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::SampleExceedsMaxval: return "SampleExceedsMaxval";
    case Errc::ImageTooSmall: return "ImageTooSmall";
    case Errc::BadFeatureCache: return "BadFeatureCache";
    case Errc::DuplicateImageId: return "DuplicateImageId";
    case Errc::NotEnoughEntries: return "NotEnoughEntries";
    case Errc::PoolTooSmall: return "PoolTooSmall";
    case Errc::BadManifest: return "BadManifest";
    case Errc::BadDistance: return "BadDistance";
    case Errc::BadLength: return "BadLength";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::CorruptPayload: return "CorruptPayload";
    case Errc::ExternalBackendFailed: return "ExternalBackendFailed";
    case Errc::MissingFile: return "MissingFile";
    case Errc::EntryTableMismatch: return "EntryTableMismatch";
    case Errc::ZeroCompressedSize: return "ZeroCompressedSize";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::BadReport: return "BadReport";
    case Errc::IoFailure: return "IoFailure";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace simpack
