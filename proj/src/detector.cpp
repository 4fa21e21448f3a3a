#include "imon/detector.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace imon {

using json = nlohmann::ordered_json;

bool StubBackend::request(int frame_index, const ColorFrame&) {
  pending_ = frame_index;
  return true;
}

std::optional<std::pair<int, std::vector<Detection>>> StubBackend::poll() {
  if (!pending_) return std::nullopt;
  const int frame = *pending_;
  pending_.reset();
  std::vector<Detection> dets;
  if (const PersonRange* r = gt_.person_range_at(frame))
    dets.push_back({Detection::Class::Human, r->bbox, 1.0, frame});
  if (const auto* pets = gt_.pets_at(frame))
    for (const Rect& b : *pets)
      dets.push_back({Detection::Class::Pet, b, 1.0, frame});
  return std::make_pair(frame, std::move(dets));
}

std::map<int, std::vector<Detection>> load_detections(
    const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open detections: " + file.string());
  std::map<int, std::vector<Detection>> by_frame;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      Detection d;
      d.frame = j.at("frame").get<int>();
      const std::string klass = j.at("class").get<std::string>();
      if (klass == "human")
        d.klass = Detection::Class::Human;
      else if (klass == "pet")
        d.klass = Detection::Class::Pet;
      else
        throw DataError("class must be human|pet");
      const auto& bb = j.at("bbox");
      d.bbox = {bb.at(0).get<int>(), bb.at(1).get<int>(), bb.at(2).get<int>(),
                bb.at(3).get<int>()};
      d.confidence = j.at("conf").get<double>();
      by_frame[d.frame].push_back(d);
    } catch (const json::exception& e) {
      throw DataError("detections line " + std::to_string(lineno) + ": " +
                      e.what());
    }
  }
  return by_frame;
}

FileBackend::FileBackend(const std::filesystem::path& file)
    : by_frame_(load_detections(file)) {}

bool FileBackend::request(int frame_index, const ColorFrame&) {
  pending_ = frame_index;
  return true;
}

std::optional<std::pair<int, std::vector<Detection>>> FileBackend::poll() {
  if (!pending_) return std::nullopt;
  const int frame = *pending_;
  pending_.reset();
  auto it = by_frame_.find(frame);
  if (it == by_frame_.end()) return std::make_pair(frame, std::vector<Detection>{});
  return std::make_pair(frame, it->second);
}

void write_ppm(const std::filesystem::path& file, const ColorFrame& rgb) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write ppm: " + file.string());
  out << "P6\n" << rgb.w << " " << rgb.h << "\n255\n";
  const size_t npx = size_t(rgb.w) * rgb.h;
  std::vector<u8> inter(3 * npx);
  const u8* r = rgb.plane(0);
  const u8* g = rgb.plane(1);
  const u8* b = rgb.plane(2);
  for (size_t i = 0; i < npx; ++i) {
    inter[3 * i] = r[i];
    inter[3 * i + 1] = g[i];
    inter[3 * i + 2] = b[i];
  }
  out.write(reinterpret_cast<const char*>(inter.data()),
            std::streamsize(inter.size()));
  if (!out) throw DataError("ppm write failed: " + file.string());
}

ProcessBackend::ProcessBackend(const std::string& command,
                               const std::filesystem::path& tmpdir)
    : tmpdir_(tmpdir) {
  std::filesystem::create_directories(tmpdir_);
  ::signal(SIGPIPE, SIG_IGN);

  int in_pipe[2], out_pipe[2];  // parent->child, child->parent
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0)
    throw DataError("detector pipe() failed");
  pid_ = ::fork();
  if (pid_ < 0) throw DataError("detector fork() failed");
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
    _exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  ::fcntl(from_child_, F_SETFL, O_NONBLOCK);
  ::fcntl(to_child_, F_SETFL, O_NONBLOCK);
}

ProcessBackend::~ProcessBackend() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    ::kill(pid_, SIGTERM);
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

void ProcessBackend::reap() const {
  if (dead_ || pid_ <= 0) return;
  int status = 0;
  if (::waitpid(pid_, &status, WNOHANG) == pid_) dead_ = true;
}

bool ProcessBackend::alive() const {
  reap();
  return !dead_;
}

bool ProcessBackend::request(int frame_index, const ColorFrame& rgb) {
  if (!alive() || outstanding_) return false;
  current_ppm_ = tmpdir_ / ("frame_" + std::to_string(frame_index) + ".ppm");
  try {
    write_ppm(current_ppm_, rgb);
  } catch (const DataError&) {
    return false;
  }
  std::string line =
      "DETECT " + std::to_string(frame_index) + " " + current_ppm_.string() + "\n";
  ssize_t n = ::write(to_child_, line.data(), line.size());
  if (n != ssize_t(line.size())) {
    dead_ = true;
    std::error_code ec;
    std::filesystem::remove(current_ppm_, ec);
    return false;
  }
  outstanding_ = frame_index;
  parsed_.clear();
  return true;
}

std::optional<std::pair<int, std::vector<Detection>>>
ProcessBackend::resolve_dead() {
  dead_ = true;
  std::error_code ec;
  std::filesystem::remove(current_ppm_, ec);
  if (!outstanding_) return std::nullopt;
  const int frame = *outstanding_;
  outstanding_.reset();
  return std::make_pair(frame, std::vector<Detection>{});  // resolves empty
}

std::optional<std::pair<int, std::vector<Detection>>> ProcessBackend::poll() {
  if (!outstanding_) return std::nullopt;

  // Drain everything first: a child may answer and exit in one burst, so an
  // EOF must not discard a complete answer already in the buffer.
  bool lost = false;
  char buf[4096];
  while (true) {
    ssize_t n = ::read(from_child_, buf, sizeof(buf));
    if (n > 0) {
      rxbuf_.append(buf, size_t(n));
      continue;
    }
    if (n == 0 || (errno != EAGAIN && errno != EWOULDBLOCK)) lost = true;
    break;
  }

  size_t pos;
  while ((pos = rxbuf_.find('\n')) != std::string::npos) {
    std::string line = rxbuf_.substr(0, pos);
    rxbuf_.erase(0, pos + 1);
    if (line == "END") {
      const int frame = *outstanding_;
      outstanding_.reset();
      std::error_code ec;
      std::filesystem::remove(current_ppm_, ec);
      return std::make_pair(frame, std::move(parsed_));
    }
    std::istringstream ls(line);
    std::string tag;
    Detection d;
    int x, y, w, h;
    double conf;
    if ((ls >> tag >> x >> y >> w >> h >> conf) &&
        (tag == "HUMAN" || tag == "PET")) {
      d.klass = tag == "HUMAN" ? Detection::Class::Human : Detection::Class::Pet;
      d.bbox = {x, y, w, h};
      d.confidence = conf;
      d.frame = *outstanding_;
      parsed_.push_back(d);
    }
    // Anything else on stdout is ignored.
  }
  if (lost || !alive()) return resolve_dead();
  return std::nullopt;
}

DetectorScheduler::DetectorScheduler(std::unique_ptr<DetectorBackend> backend,
                                     const PipelineConfig& cfg)
    : backend_(std::move(backend)), period_s_(cfg.detector_period_s) {}

bool DetectorScheduler::pet_mode(i64 ts_ms) const {
  return pet_seen_ && ts_ms - last_pet_ms_ < 60'000;
}

std::optional<DetectorScheduler::Delivery> DetectorScheduler::tick(
    int frame_index, i64 ts_ms, const ColorFrame& rgb) {
  std::optional<Delivery> out;
  if (!backend_) return out;

  auto merge = [&](std::pair<int, std::vector<Detection>>&& d) {
    Delivery del;
    del.frame = d.first;
    for (Detection& det : d.second) {
      if (det.confidence < 0.5) continue;
      if (det.klass == Detection::Class::Pet) {
        pet_seen_ = true;
        last_pet_ms_ = ts_ms;
      }
      del.detections.push_back(det);
    }
    out = std::move(del);
  };

  if (auto d = backend_->poll()) merge(std::move(*d));

  const bool due = !issued_any_ ||
                   ts_ms - last_issue_ms_ >= i64(std::llround(period_s_ * 1000.0)) ||
                   pet_mode(ts_ms);
  if (due && !backend_->busy()) {
    if (backend_->alive() && backend_->request(frame_index, rgb)) {
      ++invocations_;
      issued_any_ = true;
      last_issue_ms_ = ts_ms;
      // Synchronous backends answer right away.
      if (auto d = backend_->poll()) merge(std::move(*d));
    } else if (!backend_->alive() && !degraded_) {
      degraded_ = true;
      warnings_.push_back("detector backend unavailable from frame " +
                          std::to_string(frame_index) +
                          "; continuing without detections");
    }
  }
  return out;
}

}  // namespace imon
