#include "uncseg/bridge.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "uncseg/scene_io.hpp"

extern char** environ;

namespace uncseg {

namespace {

using nlohmann::json;

bool known_op(std::string_view op) {
  return op == "seed_all" || op == "prompt_point" || op == "high_precision" || op == "load_frame" ||
         op == "shutdown";
}

json parse_object(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed message: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("message is not an object");
  return j;
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

std::string encode_request(const BridgeRequest& r) {
  json j;
  j["op"] = r.op;
  j["frame_id"] = r.frame_id;
  if (r.pixel) j["pixel"] = {(*r.pixel)[0], (*r.pixel)[1]};
  if (r.path) j["path"] = *r.path;
  if (r.seed) j["seed"] = *r.seed;
  return j.dump();
}

BridgeRequest decode_request(std::string_view line) {
  const json j = parse_object(line);
  BridgeRequest r;
  try {
    r.op = j.at("op").get<std::string>();
    if (!known_op(r.op)) throw ProtocolError("unknown op '" + r.op + "'");
    if (j.contains("frame_id")) r.frame_id = j["frame_id"].get<std::string>();
    if (j.contains("pixel")) {
      const json& p = j["pixel"];
      if (!p.is_array() || p.size() != 2) throw ProtocolError("pixel must be [row, col]");
      r.pixel = std::array<int, 2>{p[0].get<int>(), p[1].get<int>()};
    }
    if (j.contains("path")) r.path = j["path"].get<std::string>();
    if (j.contains("seed")) r.seed = j["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed request: ") + e.what());
  }
  return r;
}

std::string encode_response(const BridgeResponse& r) {
  json j;
  j["masks"] = r.masks;
  j["grid"] = {r.grid.rows, r.grid.cols};
  if (r.error) j["error"] = *r.error;
  return j.dump();
}

BridgeResponse decode_response(std::string_view line) {
  const json j = parse_object(line);
  BridgeResponse r;
  try {
    if (j.contains("error") && !j["error"].is_null()) r.error = j["error"].get<std::string>();
    r.masks = j.at("masks").get<std::vector<std::string>>();
    const json& g = j.at("grid");
    if (!g.is_array() || g.size() != 2) throw ProtocolError("grid must be [H, W]");
    r.grid = {g[0].get<int>(), g[1].get<int>()};
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what());
  }
  if (r.grid.rows < 0 || r.grid.cols < 0) throw ProtocolError("negative grid size");
  return r;
}

ChildProcessTransport::ChildProcessTransport(const std::vector<std::string>& argv) {
  if (argv.empty()) throw Error("empty bridge command");
  ignore_sigpipe();
  int in[2], out[2];
  if (::pipe2(in, O_CLOEXEC) != 0) throw TransportError(errno_text("pipe"));
  if (::pipe2(out, O_CLOEXEC) != 0) {
    ::close(in[0]);
    ::close(in[1]);
    throw TransportError(errno_text("pipe"));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out[1], STDOUT_FILENO);
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  const int rc = ::posix_spawnp(&pid_, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in[0]);
  ::close(out[1]);
  if (rc != 0) {
    ::close(in[1]);
    ::close(out[0]);
    pid_ = -1;
    throw TransportError("cannot start '" + argv[0] + "': " + std::strerror(rc));
  }
  to_child_ = in[1];
  from_child_ = out[0];
}

ChildProcessTransport::~ChildProcessTransport() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ <= 0) return;
  // Give the child a moment to exit on end of input, then insist.
  for (int i = 0; i < 100; ++i) {
    if (::waitpid(pid_, nullptr, WNOHANG) != 0) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(pid_, SIGKILL);
  ::waitpid(pid_, nullptr, 0);
}

void ChildProcessTransport::send_line(std::string_view line) {
  if (to_child_ < 0) throw TransportError("input already closed");
  std::string data(line);
  data.push_back('\n');
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("write failed"));
    }
    done += static_cast<std::size_t>(n);
  }
}

std::string ChildProcessTransport::receive_line() {
  if (from_child_ < 0) throw TransportError("output already closed");
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("read failed"));
    }
    if (n == 0) throw TransportError("bridge closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

int ChildProcessTransport::finish() {
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  int status = 0;
  if (pid_ > 0) {
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
  return status;
}

BridgeClient::BridgeClient(std::unique_ptr<Transport> transport) : transport_(std::move(transport)) {
  if (!transport_) throw Error("bridge client without transport");
}

BridgeResponse BridgeClient::call(const BridgeRequest& request) {
  std::lock_guard lock(mutex_);
  transport_->send_line(encode_request(request));
  BridgeResponse r = decode_response(transport_->receive_line());
  if (r.error) throw ProtocolError(request.op + " failed: " + *r.error);
  return r;
}

void BridgeClient::shutdown() { call({"shutdown", "", std::nullopt, std::nullopt, std::nullopt}); }

BridgeSegmenter::BridgeSegmenter(std::shared_ptr<BridgeClient> client, std::shared_ptr<const FrameStore> frames)
    : client_(std::move(client)), frames_(std::move(frames)) {
  static std::atomic<int> counter{0};
  dir_ = std::filesystem::temp_directory_path() /
         ("uncseg-bridge-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::create_directories(dir_);
}

BridgeSegmenter::~BridgeSegmenter() {
  std::error_code ec;
  std::filesystem::remove_all(dir_, ec);
}

void BridgeSegmenter::load_frame(const Frame& frame) {
  const std::string id = std::to_string(frame.obs.handle.id);
  const auto path = dir_ / (id + ".scene");
  save_scene(frame.scene, path.string());
  const BridgeResponse r = client_->call({"load_frame", id, std::nullopt, path.string(), std::nullopt});
  if (r.grid != frame.obs.shape) throw ProtocolError("load_frame answered with a different grid");
  std::lock_guard lock(mutex_);
  loaded_[frame.obs.handle] = r.grid;
}

GridShape BridgeSegmenter::ensure_loaded(FrameHandle handle) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = loaded_.find(handle); it != loaded_.end()) return it->second;
  }
  const auto frame = frames_->get(handle);
  load_frame(*frame);
  return frame->obs.shape;
}

std::vector<Mask> BridgeSegmenter::query(FrameHandle handle, BridgeRequest request, MaskSource source) {
  const GridShape shape = ensure_loaded(handle);
  request.frame_id = std::to_string(handle.id);
  const BridgeResponse r = client_->call(request);
  if (r.grid != shape) throw ProtocolError(request.op + " answered with a different grid");
  std::vector<Mask> out;
  for (const auto& rle : r.masks) {
    try {
      out.push_back(decode_rle(rle, shape, source));
    } catch (const ProtocolError&) {
      throw;
    } catch (const Error& e) {
      throw ProtocolError(e.what());
    }
  }
  return out;
}

std::vector<Mask> BridgeSegmenter::seed_all(FrameHandle handle, Rng& rng) {
  const std::uint64_t seed = draw_seed(rng);
  return query(handle, {"seed_all", "", std::nullopt, std::nullopt, seed}, MaskSource::bottom_up);
}

Mask BridgeSegmenter::prompt_point(FrameHandle handle, int pixel, Rng& rng) {
  const std::uint64_t seed = draw_seed(rng);
  const GridShape shape = ensure_loaded(handle);
  if (pixel < 0 || pixel >= shape.size()) throw Error("prompt pixel outside grid");
  const std::array<int, 2> rc{pixel / shape.cols, pixel % shape.cols};
  auto masks = query(handle, {"prompt_point", "", rc, std::nullopt, seed}, MaskSource::bottom_up);
  if (masks.size() != 1) throw ProtocolError("prompt_point must answer with exactly one mask");
  return std::move(masks[0]);
}

std::vector<Mask> BridgeSegmenter::high_precision(FrameHandle handle, Rng& rng) {
  const std::uint64_t seed = draw_seed(rng);
  return query(handle, {"high_precision", "", std::nullopt, std::nullopt, seed}, MaskSource::top_down);
}

void serve_oracle(std::istream& in, std::ostream& out, const OracleConfig& config, double resolution) {
  auto store = std::make_shared<FrameStore>();
  OracleSegmenter oracle(store, config);
  std::map<std::string, FrameHandle> frames;
  std::string line;
  while (std::getline(in, line)) {
    BridgeResponse resp;
    bool stop = false;
    try {
      const BridgeRequest req = decode_request(line);
      if (req.op == "shutdown") {
        stop = true;
      } else if (req.op == "load_frame") {
        if (!req.path) throw ProtocolError("load_frame needs a path");
        const auto frame = store->add(load_scene(*req.path), resolution);
        if (auto it = frames.find(req.frame_id); it != frames.end()) {
          oracle.forget(it->second);
          store->release(it->second);
        }
        frames[req.frame_id] = frame->obs.handle;
        resp.grid = frame->obs.shape;
      } else {
        auto it = frames.find(req.frame_id);
        if (it == frames.end()) throw Error("stale frame");
        if (!req.seed) throw ProtocolError(req.op + " needs a seed");
        const GridShape shape = store->get(it->second)->obs.shape;
        std::vector<Mask> masks;
        if (req.op == "seed_all") {
          masks = oracle.seed_all_seeded(it->second, *req.seed);
        } else if (req.op == "high_precision") {
          masks = oracle.high_precision_seeded(it->second, *req.seed);
        } else {
          if (!req.pixel) throw ProtocolError("prompt_point needs a pixel");
          const auto [r, c] = *req.pixel;
          if (r < 0 || c < 0 || r >= shape.rows || c >= shape.cols) throw Error("prompt pixel outside grid");
          masks.push_back(oracle.prompt_point_seeded(it->second, r * shape.cols + c, *req.seed));
        }
        for (const auto& m : masks) resp.masks.push_back(encode_rle(m));
        resp.grid = shape;
      }
    } catch (const std::exception& e) {
      resp = {};
      resp.error = e.what();
    }
    out << encode_response(resp) << '\n' << std::flush;
    if (stop) return;
  }
}

}  // namespace uncseg
