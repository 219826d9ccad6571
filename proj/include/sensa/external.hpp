#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "sensa/error.hpp"
#include "sensa/evaluator.hpp"

extern char** environ;

namespace sensa {

struct ExternalEvaluatorSpec {
  std::string command;  // run through /bin/sh -c
  std::chrono::milliseconds handshake_timeout{5000};
  std::chrono::milliseconds evaluation_timeout{30000};
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::size_t pool_size = 1;

  void validate() const {
    if (command.empty()) throw Error(ErrorKind::config, "external evaluator command is empty");
    if (handshake_timeout.count() <= 0 || evaluation_timeout.count() <= 0) {
      throw Error(ErrorKind::config, "evaluator timeouts must be positive");
    }
    if (inputs == 0 || outputs == 0) throw Error(ErrorKind::config, "evaluator needs m >= 1 and n >= 1");
    if (pool_size == 0) throw Error(ErrorKind::config, "evaluator pool size must be >= 1");
  }
};

namespace detail {

/// A child process speaking line-delimited JSON over its stdin/stdout.
class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command) {
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw Error(ErrorKind::config, "pipe() failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw Error(ErrorKind::config, "pipe() failed");
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
    std::string shell = "/bin/sh";
    std::string flag = "-c";
    std::string cmd = command;
    char* argv[] = {shell.data(), flag.data(), cmd.data(), nullptr};
    // Own process group, so teardown reaches whatever the shell starts.
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, &attr, argv, environ);
    posix_spawnattr_destroy(&attr);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      throw Error(ErrorKind::config, "cannot start evaluator: " + command);
    }
    in_ = to_child[1];
    out_ = from_child[0];
    ::fcntl(in_, F_SETFL, ::fcntl(in_, F_GETFL) | O_NONBLOCK);
    ::fcntl(out_, F_SETFL, ::fcntl(out_, F_GETFL) | O_NONBLOCK);
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() {
    if (in_ >= 0) ::close(in_);
    if (out_ >= 0) ::close(out_);
    if (pid_ > 0) {
      int status = 0;
      bool reaped = false;
      for (int tries = 0; tries < 20 && !reaped; ++tries) {
        reaped = ::waitpid(pid_, &status, WNOHANG) == pid_;
        if (!reaped) std::this_thread::sleep_for(std::chrono::milliseconds(5));
      }
      ::kill(-pid_, SIGKILL);
      if (!reaped) ::waitpid(pid_, &status, 0);
    }
  }

  int input_fd() const { return in_; }
  int output_fd() const { return out_; }

  void queue(const std::string& line) { pending_ += line; }
  bool has_pending() const { return written_ < pending_.size(); }

  /// Write as much of the pending buffer as the pipe accepts. False once the child is gone.
  bool flush() {
    while (written_ < pending_.size()) {
      const auto n = ::write(in_, pending_.data() + written_, pending_.size() - written_);
      if (n > 0) {
        written_ += static_cast<std::size_t>(n);
      } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
        return true;
      } else if (n < 0 && errno == EINTR) {
        continue;
      } else {
        return false;
      }
    }
    pending_.clear();
    written_ = 0;
    return true;
  }

  /// Drain readable bytes and return complete lines. Sets `closed` on EOF.
  std::vector<std::string> read_lines(bool& closed) {
    closed = false;
    char buf[65536];
    for (;;) {
      const auto n = ::read(out_, buf, sizeof buf);
      if (n > 0) {
        partial_.append(buf, static_cast<std::size_t>(n));
      } else if (n == 0) {
        closed = true;
        break;
      } else if (errno == EINTR) {
        continue;
      } else {
        break;
      }
    }
    std::vector<std::string> lines;
    std::size_t start = 0;
    for (std::size_t p; (p = partial_.find('\n', start)) != std::string::npos; start = p + 1) {
      lines.push_back(partial_.substr(start, p - start));
    }
    partial_.erase(0, start);
    return lines;
  }

 private:
  pid_t pid_ = -1;
  int in_ = -1;
  int out_ = -1;
  std::string pending_;
  std::size_t written_ = 0;
  std::string partial_;
};

}  // namespace detail

/// Pool of child processes speaking the evaluator protocol:
///   engine  -> {"hello":{"m":M,"n":N}}     evaluator -> {"ready":true}
///   engine  -> {"id":I,"x":[...]}          evaluator -> {"id":I,"y":[...]}
/// Responses are matched by id and may arrive in any order. After any
/// failure the pool is torn down and respawned on the next call.
class ExternalEvaluator final : public Evaluator {
 public:
  explicit ExternalEvaluator(ExternalEvaluatorSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    start();
  }

  std::size_t inputs() const override { return spec_.inputs; }
  std::size_t outputs() const override { return spec_.outputs; }
  const ExternalEvaluatorSpec& spec() const { return spec_; }

  std::vector<std::vector<double>> evaluate(std::span<const EvaluationRequest> requests) override {
    if (children_.empty()) start();
    try {
      return run(requests);
    } catch (...) {
      children_.clear();
      throw;
    }
  }

 private:
  using Clock = std::chrono::steady_clock;

  void start() {
    children_.clear();
    for (std::size_t c = 0; c < spec_.pool_size; ++c) {
      children_.push_back(std::make_unique<detail::ChildProcess>(spec_.command));
    }
    const nlohmann::json hello = {{"hello", {{"m", spec_.inputs}, {"n", spec_.outputs}}}};
    for (auto& child : children_) child->queue(hello.dump() + "\n");
    const auto deadline = Clock::now() + spec_.handshake_timeout;
    std::vector<bool> ready(children_.size(), false);
    std::size_t remaining = children_.size();
    while (remaining > 0) {
      const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (wait.count() <= 0) {
        children_.clear();
        throw Error(ErrorKind::config, "evaluator handshake timed out: " + spec_.command);
      }
      std::vector<pollfd> fds;
      for (auto& child : children_) {
        if (!child->flush()) {
          children_.clear();
          throw Error(ErrorKind::config, "evaluator exited during handshake: " + spec_.command);
        }
        fds.push_back({child->output_fd(), POLLIN, 0});
      }
      ::poll(fds.data(), fds.size(), static_cast<int>(wait.count()));
      for (std::size_t c = 0; c < children_.size(); ++c) {
        if (ready[c] || !(fds[c].revents & (POLLIN | POLLHUP | POLLERR))) continue;
        bool closed = false;
        for (const auto& line : children_[c]->read_lines(closed)) {
          const auto msg = nlohmann::json::parse(line, nullptr, false);
          if (!msg.is_discarded() && msg.is_object() && msg.value("ready", false) == true) {
            ready[c] = true;
            --remaining;
            break;
          }
          children_.clear();
          throw Error(ErrorKind::config, "evaluator handshake reply not understood: " + line);
        }
        if (!ready[c] && closed) {
          children_.clear();
          throw Error(ErrorKind::config, "evaluator exited during handshake: " + spec_.command);
        }
      }
    }
  }

  std::vector<std::vector<double>> run(std::span<const EvaluationRequest> requests) {
    std::vector<std::vector<double>> results(requests.size());
    std::vector<bool> done(requests.size(), false);
    // id -> request slot; outstanding ids per child in send order.
    std::map<std::int64_t, std::size_t> slots;
    std::vector<std::vector<std::int64_t>> outstanding(children_.size());
    for (std::size_t r = 0; r < requests.size(); ++r) {
      if (requests[r].x.size() != spec_.inputs) {
        throw Error(ErrorKind::validation, "request x has " + std::to_string(requests[r].x.size()) +
                                               " coordinates, evaluator expects " + std::to_string(spec_.inputs));
      }
      const std::int64_t id = next_id_++;
      const std::size_t c = r % children_.size();
      slots[id] = r;
      outstanding[c].push_back(id);
      const nlohmann::json msg = {{"id", id}, {"x", requests[r].x}};
      children_[c]->queue(msg.dump() + "\n");
    }
    std::vector<Clock::time_point> progress(children_.size(), Clock::now());
    std::size_t remaining = requests.size();
    std::vector<std::size_t> answered(children_.size(), 0);

    while (remaining > 0) {
      std::vector<pollfd> fds;
      for (std::size_t c = 0; c < children_.size(); ++c) {
        auto& child = *children_[c];
        if (!child.flush()) crashed(c, outstanding, answered);
        fds.push_back({child.output_fd(), POLLIN, 0});
        fds.push_back({child.input_fd(), static_cast<short>(child.has_pending() ? POLLOUT : 0), 0});
      }
      auto wait = std::chrono::milliseconds::max();
      const auto now = Clock::now();
      for (std::size_t c = 0; c < children_.size(); ++c) {
        if (answered[c] == outstanding[c].size()) continue;
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            progress[c] + spec_.evaluation_timeout - now);
        if (left.count() <= 0) {
          throw Error(ErrorKind::evaluation_timeout,
                      "no response for request id " + std::to_string(first_open(outstanding[c], slots, done)) +
                          " within " + std::to_string(spec_.evaluation_timeout.count()) + " ms");
        }
        wait = std::min(wait, left);
      }
      ::poll(fds.data(), fds.size(), static_cast<int>(std::min<std::int64_t>(wait.count() + 1, 60'000)));
      for (std::size_t c = 0; c < children_.size(); ++c) {
        if (!(fds[2 * c].revents & (POLLIN | POLLHUP | POLLERR))) continue;
        bool closed = false;
        for (const auto& line : children_[c]->read_lines(closed)) {
          const auto msg = nlohmann::json::parse(line, nullptr, false);
          if (msg.is_discarded() || !msg.is_object() || !msg.contains("id") || !msg["id"].is_number_integer() ||
              !msg.contains("y") || !msg["y"].is_array()) {
            throw Error(ErrorKind::protocol, "malformed evaluator line: " + line);
          }
          const auto id = msg["id"].get<std::int64_t>();
          const auto slot = slots.find(id);
          if (slot == slots.end() || done[slot->second]) {
            throw Error(ErrorKind::protocol, "response for unknown id " + std::to_string(id) + ": " + line);
          }
          std::vector<double> y;
          for (const auto& v : msg["y"]) {
            if (!v.is_number()) throw Error(ErrorKind::protocol, "non-numeric output in line: " + line);
            y.push_back(v.get<double>());
          }
          if (y.size() != spec_.outputs) {
            throw Error(ErrorKind::protocol, "expected " + std::to_string(spec_.outputs) + " outputs for id " +
                                                 std::to_string(id) + ": " + line);
          }
          results[slot->second] = std::move(y);
          done[slot->second] = true;
          --remaining;
          ++answered[c];
          progress[c] = Clock::now();
        }
        if (closed && answered[c] < outstanding[c].size()) crashed(c, outstanding, answered);
      }
    }
    return results;
  }

  static std::int64_t first_open(const std::vector<std::int64_t>& ids, const std::map<std::int64_t, std::size_t>& slots,
                                 const std::vector<bool>& done) {
    for (auto id : ids) {
      if (!done[slots.at(id)]) return id;
    }
    return -1;
  }

  [[noreturn]] void crashed(std::size_t c, const std::vector<std::vector<std::int64_t>>& outstanding,
                            const std::vector<std::size_t>& answered) {
    throw Error(ErrorKind::evaluator_crashed, "evaluator process " + std::to_string(c) + " exited with " +
                                                  std::to_string(outstanding[c].size() - answered[c]) +
                                                  " requests unanswered");
  }

  ExternalEvaluatorSpec spec_;
  std::vector<std::unique_ptr<detail::ChildProcess>> children_;
  std::int64_t next_id_ = 1;
};

}  // namespace sensa
