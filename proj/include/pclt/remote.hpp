#pragma once

// Client side of the line-delimited JSON model protocol. Any process that
// speaks it (over stdio or TCP) becomes a PredictiveRule.
//
//   > {"id":1,"op":"hello","version":1}
//   < {"id":1,"ok":true,"version":1,"capabilities":{"tasks":[...],
//      "max_context":N,"ensemble_size":E,"model_id":"...","ops":[...]}}
//   > {"id":2,"op":"predict","task":"binary","k":2,
//      "context":{"x":[[...],...],"y":[...]},"queries":[[...],...],"events":[...]}
//   < {"id":2,"ok":true,"values":[...]}   or   {"id":2,"ok":false,"error":"..."}
//
// predict_batch carries the full context plus "prefix_lengths" and answers
// with one value list per length. Servers that do not advertise it get
// pipelined predict requests instead.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pclt/core.hpp"
#include "pclt/error.hpp"
#include "pclt/rules.hpp"

extern char** environ;

namespace pclt {

inline constexpr int kProtocolVersion = 1;

struct SubprocessTransport {
  std::vector<std::string> argv;
};

struct TcpTransport {
  std::string host;
  int port = 0;
};

struct Endpoint {
  std::variant<SubprocessTransport, TcpTransport> transport;
  int timeout_ms = 30000;
  std::size_t max_in_flight = 1;
  std::string replay_log;  // empty: no log

  void validate() const {
    if (timeout_ms <= 0) throw DataError("endpoint timeout must be positive");
    if (max_in_flight < 1) throw DataError("max_in_flight must be at least 1");
    if (const auto* s = std::get_if<SubprocessTransport>(&transport)) {
      if (s->argv.empty()) throw DataError("subprocess endpoint needs a command");
    } else {
      const auto& t = std::get<TcpTransport>(transport);
      if (t.host.empty() || t.port <= 0 || t.port > 65535) throw DataError("invalid tcp endpoint");
    }
  }

  /// PCLT_REMOTE_TIMEOUT_MS overrides the configured timeout.
  int effective_timeout_ms() const {
    if (const char* env = std::getenv("PCLT_REMOTE_TIMEOUT_MS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    }
    return timeout_ms;
  }

  std::string describe() const {
    if (const auto* s = std::get_if<SubprocessTransport>(&transport)) {
      std::string out = "subprocess:";
      for (std::size_t i = 0; i < s->argv.size(); ++i) out += (i ? " " : "") + s->argv[i];
      return out;
    }
    const auto& t = std::get<TcpTransport>(transport);
    return "tcp:" + t.host + ":" + std::to_string(t.port);
  }
};

struct Capabilities {
  std::set<TaskType> tasks;
  std::size_t max_context = 1;
  std::size_t ensemble_size = 1;
  std::string model_id;
  bool predict_batch = false;
};

inline TaskType parse_task_type(const std::string& s) {
  if (s == "binary") return TaskType::Binary;
  if (s == "multiclass") return TaskType::Multiclass;
  if (s == "regression_cdf" || s == "regression-cdf") return TaskType::RegressionCdf;
  throw ProtocolError("unknown task name '" + s + "'");
}

namespace detail {

/// Splits a command string on whitespace; single and double quotes group.
inline std::vector<std::string> split_command(const std::string& cmd) {
  std::vector<std::string> out;
  std::string cur;
  bool have = false;
  char quote = 0;
  for (char c : cmd) {
    if (quote) {
      if (c == quote) quote = 0;
      else cur += c;
    } else if (c == '\'' || c == '"') {
      quote = c;
      have = true;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (have) out.push_back(std::move(cur));
      cur.clear();
      have = false;
    } else {
      cur += c;
      have = true;
    }
  }
  if (quote) throw DataError("unterminated quote in command: " + cmd);
  if (have) out.push_back(std::move(cur));
  return out;
}

inline void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

using Clock = std::chrono::steady_clock;

/// A bidirectional line channel over a pair of file descriptors.
class LineChannel {
 public:
  virtual ~LineChannel() { close_fds(); }

  void write_line(const std::string& line, Clock::time_point deadline) {
    std::string buf = line + '\n';
    std::size_t off = 0;
    while (off < buf.size()) {
      wait_ready(out_fd_, POLLOUT, deadline, "write");
      const ssize_t w = ::write(out_fd_, buf.data() + off, buf.size() - off);
      if (w < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        broken_ = true;
        throw TransportError("write to " + name_ + " failed: " + std::strerror(errno));
      }
      off += static_cast<std::size_t>(w);
    }
  }

  std::string read_line(Clock::time_point deadline) {
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      wait_ready(in_fd_, POLLIN, deadline, "read");
      char chunk[65536];
      const ssize_t r = ::read(in_fd_, chunk, sizeof chunk);
      if (r < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        broken_ = true;
        throw TransportError("read from " + name_ + " failed: " + std::strerror(errno));
      }
      if (r == 0) {
        broken_ = true;
        throw TransportError(name_ + " closed the connection");
      }
      buffer_.append(chunk, static_cast<std::size_t>(r));
    }
  }

  bool broken() const { return broken_; }
  void mark_broken() { broken_ = true; }

 protected:
  void set_fds(int in_fd, int out_fd) {
    in_fd_ = in_fd;
    out_fd_ = out_fd;
    for (int fd : {in_fd_, out_fd_}) ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
  }

  void close_fds() {
    if (in_fd_ >= 0) ::close(in_fd_);
    if (out_fd_ >= 0 && out_fd_ != in_fd_) ::close(out_fd_);
    in_fd_ = out_fd_ = -1;
  }

  std::string name_;

 private:
  void wait_ready(int fd, short events, Clock::time_point deadline, const char* what) {
    for (;;) {
      const auto left =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      if (left <= 0) {
        broken_ = true;  // a late reply would desynchronize the stream
        throw TimeoutError(std::string("timed out waiting to ") + what + " " + name_);
      }
      pollfd p{fd, events, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1 << 30)));
      if (rc < 0) {
        if (errno == EINTR) continue;
        broken_ = true;
        throw TransportError("poll on " + name_ + " failed: " + std::strerror(errno));
      }
      if (rc == 0) continue;
      if (p.revents & (events | POLLHUP | POLLERR)) return;
    }
  }

  int in_fd_ = -1, out_fd_ = -1;
  std::string buffer_;
  bool broken_ = false;
};

class SubprocessChannel final : public LineChannel {
 public:
  explicit SubprocessChannel(const std::vector<std::string>& argv) {
    ignore_sigpipe();
    name_ = "subprocess '" + argv.front() + "'";
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw TransportError("pipe failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw TransportError("pipe failed");
    }
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&fa, from_child[1], STDOUT_FILENO);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    const int rc = ::posix_spawnp(&pid_, args[0], &fa, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&fa);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      pid_ = -1;
      throw TransportError("cannot start " + name_ + ": " + std::strerror(rc));
    }
    set_fds(from_child[0], to_child[1]);
  }

  ~SubprocessChannel() override {
    close_fds();  // EOF on stdin asks the server to exit
    if (pid_ <= 0) return;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) != 0) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }

 private:
  pid_t pid_ = -1;
};

class TcpChannel final : public LineChannel {
 public:
  TcpChannel(const TcpTransport& t, Clock::time_point deadline) {
    ignore_sigpipe();
    name_ = "tcp " + t.host + ":" + std::to_string(t.port);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(t.port);
    if (const int rc = ::getaddrinfo(t.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
      throw TransportError("cannot resolve " + t.host + ": " + ::gai_strerror(rc));
    }
    std::string last = "no addresses";
    int fd = -1;
    for (addrinfo* a = res; a && fd < 0; a = a->ai_next) {
      fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, a->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, a->ai_addr, a->ai_addrlen) != 0 && errno != EINPROGRESS) {
        last = std::strerror(errno);
        ::close(fd);
        fd = -1;
        continue;
      }
      const auto left =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      pollfd p{fd, POLLOUT, 0};
      int err = 0;
      socklen_t len = sizeof err;
      if (left <= 0 || ::poll(&p, 1, static_cast<int>(left)) <= 0) {
        last = "connect timed out";
        ::close(fd);
        fd = -1;
      } else if (::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) != 0 || err != 0) {
        last = std::strerror(err);
        ::close(fd);
        fd = -1;
      }
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw TransportError("cannot connect to " + name_ + ": " + last);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    set_fds(fd, fd);
  }
};

inline nlohmann::json context_json(Rows prefix) {
  nlohmann::json xs = nlohmann::json::array(), ys = nlohmann::json::array();
  for (const auto& o : prefix) {
    xs.push_back(o.x);
    ys.push_back(o.y);
  }
  return {{"x", std::move(xs)}, {"y", std::move(ys)}};
}

/// True when the queries are exactly classes 0..K-1 at one covariate, in
/// which case the reply must be a normalized distribution.
inline bool is_full_distribution(const TaskKind& task, const QuerySpec& q) {
  if (task.type != TaskType::Multiclass || q.size() != static_cast<std::size_t>(task.classes)) return false;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i].event != static_cast<double>(i) || q[i].x != q[0].x) return false;
  return true;
}

}  // namespace detail

/// One open, handshaken connection. Not thread-safe; the pool hands each
/// connection to one caller at a time.
class RemoteConnection {
 public:
  using Json = nlohmann::json;

  RemoteConnection(const Endpoint& ep, std::function<void(char, const std::string&)> log)
      : timeout_ms_(ep.effective_timeout_ms()), log_(std::move(log)) {
    const auto deadline = detail::Clock::now() + std::chrono::milliseconds(timeout_ms_);
    if (const auto* s = std::get_if<SubprocessTransport>(&ep.transport)) {
      chan_ = std::make_unique<detail::SubprocessChannel>(s->argv);
    } else {
      chan_ = std::make_unique<detail::TcpChannel>(std::get<TcpTransport>(ep.transport), deadline);
    }
  }

  Capabilities handshake(std::uint64_t id) {
    Json req = {{"id", id}, {"op", "hello"}, {"version", kProtocolVersion}};
    const Json rep = round_trip(req);
    const Json* ver = rep.contains("version") ? &rep["version"] : nullptr;
    if (!ver || !ver->is_number_integer()) throw ProtocolError("hello reply lacks an integer version");
    if (ver->get<int>() != kProtocolVersion) {
      throw ProtocolError("protocol version mismatch: client speaks " + std::to_string(kProtocolVersion) +
                          ", server replied " + std::to_string(ver->get<int>()));
    }
    if (!rep.contains("capabilities") || !rep["capabilities"].is_object())
      throw ProtocolError("hello reply lacks capabilities");
    const Json& c = rep["capabilities"];
    Capabilities caps;
    try {
      for (const auto& t : c.at("tasks")) caps.tasks.insert(parse_task_type(t.get<std::string>()));
      caps.max_context = c.at("max_context").get<std::size_t>();
      caps.ensemble_size = c.value("ensemble_size", std::size_t{1});
      caps.model_id = c.value("model_id", std::string{});
      if (c.contains("ops"))
        for (const auto& op : c["ops"])
          if (op == "predict_batch") caps.predict_batch = true;
    } catch (const Json::exception& e) {
      throw ProtocolError(std::string("malformed capabilities: ") + e.what());
    }
    if (caps.max_context < 1) throw ProtocolError("server reports max_context < 1");
    return caps;
  }

  /// Sends all requests, then reads the replies in order. Each reply must
  /// carry the id of the request it answers.
  std::vector<Json> pipeline(const std::vector<Json>& reqs) {
    const auto deadline = detail::Clock::now() + std::chrono::milliseconds(timeout_ms_);
    for (const auto& r : reqs) send(r, deadline);
    std::vector<Json> out;
    out.reserve(reqs.size());
    for (const auto& r : reqs) out.push_back(receive(r.at("id").get<std::uint64_t>(), deadline));
    return out;
  }

  Json round_trip(const Json& req) { return pipeline({req}).front(); }

  bool broken() const { return chan_->broken(); }

 private:
  void send(const Json& req, detail::Clock::time_point deadline) {
    const std::string line = req.dump();
    if (log_) log_('>', line);
    chan_->write_line(line, deadline);
  }

  Json receive(std::uint64_t expect, detail::Clock::time_point deadline) {
    const std::string line = chan_->read_line(deadline);
    if (log_) log_('<', line);
    Json rep;
    try {
      rep = Json::parse(line);
    } catch (const Json::exception&) {
      chan_->mark_broken();
      throw ProtocolError("malformed reply line: " + line.substr(0, 200));
    }
    if (!rep.is_object() || !rep.contains("id") || !rep["id"].is_number_unsigned()) {
      chan_->mark_broken();
      throw ProtocolError("reply without a valid id");
    }
    const auto id = rep["id"].get<std::uint64_t>();
    if (id != expect) {
      chan_->mark_broken();
      throw ProtocolError("reply id " + std::to_string(id) + " does not match request id " +
                          std::to_string(expect));
    }
    if (!rep.contains("ok") || !rep["ok"].is_boolean()) throw ProtocolError("reply lacks boolean 'ok'");
    if (!rep["ok"].get<bool>()) {
      throw RuleError("remote error: " + rep.value("error", std::string("(no message)")));
    }
    return rep;
  }

  int timeout_ms_;
  std::function<void(char, const std::string&)> log_;
  std::unique_ptr<detail::LineChannel> chan_;
};

/// PredictiveRule backed by a remote model server. Thread-safe; opens up to
/// max_in_flight connections lazily and hands each to one caller at a time.
class RemoteRule final : public PredictiveRule {
 public:
  using Json = nlohmann::json;

  explicit RemoteRule(Endpoint ep) : ep_(std::move(ep)) {
    ep_.validate();
    if (!ep_.replay_log.empty()) {
      log_file_.open(ep_.replay_log, std::ios::out | std::ios::trunc);
      if (!log_file_) throw DataError("cannot open replay log " + ep_.replay_log);
    }
    open_count_ = 1;
    release(open());  // handshake up front so errors surface early
  }

  std::string id() const override { return "external:" + ep_.describe(); }
  const Capabilities& capabilities() const { return caps_; }
  const Endpoint& endpoint() const { return ep_; }

  bool supports(const TaskKind& task) const override { return caps_.tasks.count(task.type) > 0; }

  std::vector<double> predict(const TaskKind& task, Rows prefix, const QuerySpec& queries) const override {
    check_request(task, prefix.size());
    return with_retry([&](RemoteConnection& c) {
      auto rep = c.round_trip(predict_request(task, prefix, queries));
      return parse_values(rep, task, queries);
    });
  }

  std::vector<std::vector<double>> predict_prefixes(const TaskKind& task, Rows context,
                                                    std::span<const std::size_t> lengths,
                                                    const QuerySpec& queries) const override {
    std::vector<std::vector<double>> out;
    out.reserve(lengths.size());
    if (lengths.empty()) return out;
    for (std::size_t len : lengths) {
      if (len > context.size()) throw RuleError("prefix length exceeds context");
      check_request(task, len);
    }
    if (caps_.predict_batch) {
      const std::size_t longest = *std::max_element(lengths.begin(), lengths.end());
      return with_retry([&](RemoteConnection& c) {
        Json req = base_request("predict_batch", task, context.first(longest), queries);
        req["prefix_lengths"] = std::vector<std::size_t>(lengths.begin(), lengths.end());
        const Json rep = c.round_trip(req);
        if (!rep.contains("values") || !rep["values"].is_array() || rep["values"].size() != lengths.size())
          throw ProtocolError("predict_batch reply has the wrong number of value lists");
        std::vector<std::vector<double>> res;
        for (const auto& row : rep["values"]) res.push_back(check_values(row, task, queries));
        return res;
      });
    }
    // Pipelined predict requests in windows small enough that replies fit in
    // the transport buffers.
    constexpr std::size_t kWindow = 8;
    for (std::size_t b = 0; b < lengths.size(); b += kWindow) {
      const std::size_t e = std::min(lengths.size(), b + kWindow);
      auto part = with_retry([&](RemoteConnection& c) {
        std::vector<Json> reqs;
        for (std::size_t i = b; i < e; ++i) reqs.push_back(predict_request(task, context.first(lengths[i]), queries));
        auto reps = c.pipeline(reqs);
        std::vector<std::vector<double>> res;
        for (const auto& r : reps) res.push_back(parse_values(r, task, queries));
        return res;
      });
      for (auto& v : part) out.push_back(std::move(v));
    }
    return out;
  }

 private:
  std::unique_ptr<RemoteConnection> open() const {
    auto conn = std::make_unique<RemoteConnection>(
        ep_, log_file_.is_open() ? std::function<void(char, const std::string&)>(
                                       [this](char dir, const std::string& line) { log_line(dir, line); })
                                 : nullptr);
    Capabilities caps = conn->handshake(next_id_++);
    std::lock_guard lk(mu_);
    if (!handshaken_) {
      caps_ = std::move(caps);
      handshaken_ = true;
    }
    return conn;
  }

  std::unique_ptr<RemoteConnection> acquire() const {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return !idle_.empty() || open_count_ < ep_.max_in_flight; });
    if (!idle_.empty()) {
      auto c = std::move(idle_.back());
      idle_.pop_back();
      return c;
    }
    ++open_count_;
    lk.unlock();
    try {
      return open();
    } catch (...) {
      std::lock_guard lk2(mu_);
      --open_count_;
      cv_.notify_one();
      throw;
    }
  }

  void release(std::unique_ptr<RemoteConnection> c) const {
    std::lock_guard lk(mu_);
    if (c && !c->broken()) {
      idle_.push_back(std::move(c));
    } else {
      --open_count_;
    }
    cv_.notify_one();
  }

  /// Runs fn on a pooled connection. A transport failure discards the
  /// connection and retries once on a fresh one; protocol violations and
  /// timeouts are not retried.
  template <typename Fn>
  auto with_retry(Fn&& fn) const -> decltype(fn(std::declval<RemoteConnection&>())) {
    for (int attempt = 0;; ++attempt) {
      std::unique_ptr<RemoteConnection> c;
      try {
        c = acquire();
        auto result = fn(*c);
        release(std::move(c));
        return result;
      } catch (const TransportError&) {
        discard(std::move(c));
        if (attempt >= 1) throw;
      } catch (...) {
        if (c) release(std::move(c));  // broken connections are dropped in release
        throw;
      }
    }
  }

  void discard(std::unique_ptr<RemoteConnection> c) const {
    if (!c) return;  // acquire itself failed; it already fixed the count
    std::lock_guard lk(mu_);
    --open_count_;
    cv_.notify_one();
  }

  void check_request(const TaskKind& task, std::size_t len) const {
    if (!supports(task)) throw RuleError(id() + ": server does not support task " + to_string(task.type));
    if (len < 1) throw RuleError(id() + ": remote rules need a non-empty prefix");
    if (len > caps_.max_context) {
      throw RuleError(id() + ": context of " + std::to_string(len) + " rows exceeds server max_context " +
                      std::to_string(caps_.max_context));
    }
  }

  Json base_request(const char* op, const TaskKind& task, Rows ctx, const QuerySpec& queries) const {
    Json qx = Json::array(), ev = Json::array();
    for (const auto& q : queries) {
      qx.push_back(q.x);
      ev.push_back(q.event);
    }
    Json req;
    req["id"] = next_id_++;
    req["op"] = op;
    req["task"] = to_string(task.type);
    req["k"] = task.classes;
    req["context"] = detail::context_json(ctx);
    req["queries"] = std::move(qx);
    req["events"] = std::move(ev);
    return req;
  }

  Json predict_request(const TaskKind& task, Rows prefix, const QuerySpec& queries) const {
    return base_request("predict", task, prefix, queries);
  }

  std::vector<double> parse_values(const Json& rep, const TaskKind& task, const QuerySpec& queries) const {
    if (!rep.contains("values")) throw ProtocolError("predict reply lacks 'values'");
    return check_values(rep["values"], task, queries);
  }

  std::vector<double> check_values(const Json& vals, const TaskKind& task, const QuerySpec& queries) const {
    if (!vals.is_array() || vals.size() != queries.size()) {
      throw ProtocolError(id() + ": expected " + std::to_string(queries.size()) + " values");
    }
    std::vector<double> v;
    v.reserve(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (!vals[i].is_number()) throw ProtocolError(id() + ": non-numeric value at index " + std::to_string(i));
      const double p = vals[i].get<double>();
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ProtocolError(id() + ": probability " + std::to_string(p) + " at index " + std::to_string(i) +
                            " outside [0,1]");
      }
      v.push_back(p);
    }
    if (detail::is_full_distribution(task, queries)) {
      double s = 0.0;
      for (double p : v) s += p;
      if (std::abs(s - 1.0) > 1e-6) throw ProtocolError(id() + ": class probabilities sum to " + std::to_string(s));
    }
    return v;
  }

  void log_line(char dir, const std::string& line) const {
    std::lock_guard lk(log_mu_);
    log_file_ << dir << ' ' << line << '\n';
    log_file_.flush();
  }

  Endpoint ep_;
  mutable Capabilities caps_;
  mutable bool handshaken_ = false;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  mutable std::vector<std::unique_ptr<RemoteConnection>> idle_;
  mutable std::size_t open_count_ = 0;
  mutable std::atomic<std::uint64_t> next_id_{1};
  mutable std::mutex log_mu_;
  mutable std::ofstream log_file_;
};

}  // namespace pclt
