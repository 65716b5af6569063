#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uncseg/error.hpp"
#include "uncseg/segmenter.hpp"

namespace uncseg {

/// The peer is unreachable: the process exited, a pipe closed, or a read
/// or write failed. Restarting the bridge may help.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what) : Error("bridge transport: " + what) {}
};

/// The peer answered, but not with a well-formed response to the request,
/// or it reported an error. Retrying the same request will not help.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error("bridge protocol: " + what) {}
};

/// One line of the wire format. Queries are "seed_all", "prompt_point" and
/// "high_precision"; control messages are "load_frame" (with `path`) and
/// "shutdown". `seed` is the per-query draw from the caller's stream, so a
/// seeded backend answers exactly like its in-process twin.
struct BridgeRequest {
  std::string op;
  std::string frame_id;
  std::optional<std::array<int, 2>> pixel;
  std::optional<std::string> path;
  std::optional<std::uint64_t> seed;
  bool operator==(const BridgeRequest&) const = default;
};

struct BridgeResponse {
  std::vector<std::string> masks;
  GridShape grid;
  std::optional<std::string> error;
  bool operator==(const BridgeResponse&) const = default;
};

/// Single-line JSON, without the trailing newline.
std::string encode_request(const BridgeRequest& request);
std::string encode_response(const BridgeResponse& response);
/// Throw ProtocolError on malformed input.
BridgeRequest decode_request(std::string_view line);
BridgeResponse decode_response(std::string_view line);

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send_line(std::string_view line) = 0;
  virtual std::string receive_line() = 0;
};

/// Child process speaking one message per line over its standard input and
/// output. Standard error is inherited. SIGPIPE is ignored process-wide so
/// that writing to a dead child surfaces as a TransportError.
class ChildProcessTransport : public Transport {
 public:
  explicit ChildProcessTransport(const std::vector<std::string>& argv);
  ~ChildProcessTransport() override;
  ChildProcessTransport(const ChildProcessTransport&) = delete;
  ChildProcessTransport& operator=(const ChildProcessTransport&) = delete;

  void send_line(std::string_view line) override;
  std::string receive_line() override;

  int pid() const { return pid_; }
  /// Closes the child's input and waits for it to exit; returns its status.
  int finish();

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Strict request-response alternation over a transport. Calls are
/// serialized, so one client may be shared between threads.
class BridgeClient {
 public:
  explicit BridgeClient(std::unique_ptr<Transport> transport);

  /// Throws TransportError when the exchange fails and ProtocolError when
  /// the reply is malformed or carries an error.
  BridgeResponse call(const BridgeRequest& request);
  /// Sends "shutdown" and waits for the acknowledgement.
  void shutdown();

  Transport& transport() { return *transport_; }

 private:
  std::mutex mutex_;
  std::unique_ptr<Transport> transport_;
};

/// Segmenter served by a bridge. Frames are exported to scene files in a
/// private temporary directory and registered with "load_frame" on first
/// use; the served backend renders them itself.
class BridgeSegmenter : public Segmenter {
 public:
  BridgeSegmenter(std::shared_ptr<BridgeClient> client, std::shared_ptr<const FrameStore> frames);
  ~BridgeSegmenter() override;

  void load_frame(const Frame& frame) override;
  std::vector<Mask> seed_all(FrameHandle handle, Rng& rng) override;
  Mask prompt_point(FrameHandle handle, int pixel, Rng& rng) override;
  std::vector<Mask> high_precision(FrameHandle handle, Rng& rng) override;

 private:
  GridShape ensure_loaded(FrameHandle handle);
  std::vector<Mask> query(FrameHandle handle, BridgeRequest request, MaskSource source);

  std::shared_ptr<BridgeClient> client_;
  std::shared_ptr<const FrameStore> frames_;
  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<FrameHandle, GridShape> loaded_;
};

/// Serves an oracle segmenter over line streams until "shutdown" or end of
/// input. Frames named by "load_frame" are scene files rendered at
/// `resolution`. Malformed lines get an error response and the loop goes on.
void serve_oracle(std::istream& in, std::ostream& out, const OracleConfig& config, double resolution);

}  // namespace uncseg
