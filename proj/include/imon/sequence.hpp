#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "imon/core.hpp"

namespace imon {

// Sequence container: a directory with manifest.txt plus one raw binary file
// per frame. manifest.txt lists `width`, `height`, `frame_count`,
// `nominal_fps`, `participant_id` as "key value" lines followed by one
// timestamp_ms line per frame (ms since sequence start). Each frame file
// holds the R, G and B planes (w*h bytes each) followed by row-major u16
// little-endian depth.
struct SequenceManifest {
  int width = 0;
  int height = 0;
  int frame_count = 0;
  double nominal_fps = 0.0;
  std::string participant_id;
  std::vector<i64> timestamps_ms;
};

std::string frame_filename(int index);

// Abstract frame producer so the pipeline can consume either an on-disk
// container or frames rendered in memory.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual const SequenceManifest& manifest() const = 0;
  // Frames come back in index order; nullopt past the end.
  virtual bool next(RgbdFrame& out) = 0;
};

class SequenceReader : public FrameSource {
 public:
  explicit SequenceReader(const std::filesystem::path& dir);

  const SequenceManifest& manifest() const override { return manifest_; }
  bool next(RgbdFrame& out) override;

  // Random access; `index` in [0, frame_count).
  RgbdFrame read(int index) const;

 private:
  std::filesystem::path dir_;
  SequenceManifest manifest_;
  int cursor_ = 0;
};

class SequenceWriter {
 public:
  // Writes the manifest immediately; timestamps must be complete up front.
  SequenceWriter(const std::filesystem::path& dir, SequenceManifest manifest);

  // Frames must arrive in index order and match the manifest dimensions.
  void write(const RgbdFrame& frame);
  int written() const { return next_index_; }

 private:
  std::filesystem::path dir_;
  SequenceManifest manifest_;
  int next_index_ = 0;
};

SequenceManifest read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, const SequenceManifest& m);

}  // namespace imon
