#include "imon/sequence.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace imon {

namespace fs = std::filesystem;

std::string frame_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d.bin", index);
  return buf;
}

SequenceManifest read_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("missing manifest: " + file.string());
  SequenceManifest m;
  bool have_w = false, have_h = false, have_n = false, have_fps = false,
       have_pid = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (std::isalpha(static_cast<unsigned char>(line[0]))) {
      std::istringstream ls(line);
      std::string key, value;
      ls >> key >> value;
      if (key == "width") {
        m.width = std::stoi(value);
        have_w = true;
      } else if (key == "height") {
        m.height = std::stoi(value);
        have_h = true;
      } else if (key == "frame_count") {
        m.frame_count = std::stoi(value);
        have_n = true;
      } else if (key == "nominal_fps") {
        m.nominal_fps = std::stod(value);
        have_fps = true;
      } else if (key == "participant_id") {
        m.participant_id = value;
        have_pid = true;
      } else {
        throw DataError("manifest line " + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
      }
    } else {
      m.timestamps_ms.push_back(std::stoll(line));
    }
  }
  if (!have_w || !have_h || !have_n || !have_fps || !have_pid)
    throw DataError("manifest incomplete: " + file.string());
  if (m.width <= 0 || m.height <= 0 || m.frame_count < 0 ||
      m.nominal_fps <= 0.0)
    throw DataError("manifest has invalid dimensions/fps: " + file.string());
  if (int(m.timestamps_ms.size()) != m.frame_count)
    throw DataError("manifest lists " + std::to_string(m.timestamps_ms.size()) +
                    " timestamps for " + std::to_string(m.frame_count) +
                    " frames");
  return m;
}

void write_manifest(const fs::path& file, const SequenceManifest& m) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + file.string());
  char fps[32];
  std::snprintf(fps, sizeof(fps), "%g", m.nominal_fps);
  out << "width " << m.width << "\n"
      << "height " << m.height << "\n"
      << "frame_count " << m.frame_count << "\n"
      << "nominal_fps " << fps << "\n"
      << "participant_id " << m.participant_id << "\n";
  for (i64 ts : m.timestamps_ms) out << ts << "\n";
  if (!out) throw DataError("manifest write failed: " + file.string());
}

SequenceReader::SequenceReader(const fs::path& dir)
    : dir_(dir), manifest_(read_manifest(dir / "manifest.txt")) {}

RgbdFrame SequenceReader::read(int index) const {
  if (index < 0 || index >= manifest_.frame_count)
    throw DataError("frame index " + std::to_string(index) + " out of range");
  const fs::path file = dir_ / frame_filename(index);
  std::ifstream in(file, std::ios::binary);
  if (!in)
    throw DataError("missing frame " + std::to_string(index) + ": " +
                    file.string());
  const int w = manifest_.width, h = manifest_.height;
  const size_t npx = size_t(w) * h;

  RgbdFrame f;
  f.index = index;
  f.timestamp_ms = manifest_.timestamps_ms[index];
  f.color = ColorFrame(w, h);
  f.depth.resize(w, h);

  in.read(reinterpret_cast<char*>(f.color.data.data()), std::streamsize(3 * npx));
  std::vector<u8> raw(2 * npx);
  in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
  if (size_t(in.gcount()) != raw.size() || !in)
    throw DataError("truncated frame " + std::to_string(index) + ": " +
                    file.string());
  u16* d = f.depth.data();
  for (size_t i = 0; i < npx; ++i)
    d[i] = u16(raw[2 * i]) | (u16(raw[2 * i + 1]) << 8);
  return f;
}

bool SequenceReader::next(RgbdFrame& out) {
  if (cursor_ >= manifest_.frame_count) return false;
  out = read(cursor_++);
  return true;
}

SequenceWriter::SequenceWriter(const fs::path& dir, SequenceManifest manifest)
    : dir_(dir), manifest_(std::move(manifest)) {
  fs::create_directories(dir_);
  write_manifest(dir_ / "manifest.txt", manifest_);
}

void SequenceWriter::write(const RgbdFrame& frame) {
  if (next_index_ >= manifest_.frame_count)
    throw DataError("writing past declared frame_count");
  if (frame.width() != manifest_.width || frame.height() != manifest_.height ||
      frame.color.w != manifest_.width || frame.color.h != manifest_.height)
    throw DataError("frame " + std::to_string(next_index_) +
                    " dimensions do not match manifest");
  const fs::path file = dir_ / frame_filename(next_index_);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write frame file: " + file.string());
  const size_t npx = size_t(manifest_.width) * manifest_.height;
  out.write(reinterpret_cast<const char*>(frame.color.data.data()),
            std::streamsize(3 * npx));
  std::vector<u8> raw(2 * npx);
  const u16* d = frame.depth.data();
  for (size_t i = 0; i < npx; ++i) {
    raw[2 * i] = u8(d[i] & 0xff);
    raw[2 * i + 1] = u8(d[i] >> 8);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
  if (!out) throw DataError("frame write failed: " + file.string());
  ++next_index_;
}

}  // namespace imon
