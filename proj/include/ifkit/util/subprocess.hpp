#pragma once

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include "ifkit/errors.hpp"

extern "C" char** environ;

namespace ifkit {

struct SubprocessOptions {
  std::vector<std::string> argv;  // argv[0] is PATH-searched
  std::string stdin_data;
  std::optional<std::filesystem::path> cwd;
  std::chrono::milliseconds timeout{0};    // 0 means unlimited
  std::uint64_t memory_limit_bytes{0};     // 0 means unlimited; RLIMIT_AS
  // Appended over the inherited environment; an empty value unsets the key.
  std::vector<std::pair<std::string, std::string>> env;
};

struct SubprocessResult {
  int exit_code = -1;   // -1 when terminated by signal
  int term_signal = 0;
  bool timed_out = false;
  std::string out;
  std::string err;
};

namespace detail {

inline void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

struct Pipe {
  int rd = -1, wr = -1;
  Pipe() {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0)
      throw EnvironmentError("pipe2 failed: " + std::string(std::strerror(errno)));
    rd = fds[0];
    wr = fds[1];
  }
  ~Pipe() {
    close_rd();
    close_wr();
  }
  void close_rd() {
    if (rd >= 0) ::close(rd), rd = -1;
  }
  void close_wr() {
    if (wr >= 0) ::close(wr), wr = -1;
  }
};

inline std::vector<std::string> merged_environ(
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::vector<std::string> env;
  for (char** e = ::environ; *e; ++e) {
    std::string_view entry(*e);
    size_t eq = entry.find('=');
    std::string_view key = entry.substr(0, eq);
    bool overridden = false;
    for (const auto& [k, v] : overrides)
      if (k == key) overridden = true;
    if (!overridden) env.emplace_back(entry);
  }
  for (const auto& [k, v] : overrides)
    if (!v.empty()) env.push_back(k + "=" + v);
  return env;
}

}  // namespace detail

// Runs a child process to completion, feeding stdin and draining both output
// pipes concurrently so neither side can deadlock on a full pipe. On timeout
// the whole process group is killed, so grandchildren do not outlive us.
inline SubprocessResult run_subprocess(const SubprocessOptions& opt) {
  using clock = std::chrono::steady_clock;
  if (opt.argv.empty()) throw ConfigError("subprocess: empty argv");
  detail::ignore_sigpipe_once();

  detail::Pipe in, out, err, status;  // status carries errno if exec fails

  std::vector<std::string> env_store = detail::merged_environ(opt.env);
  std::vector<char*> envp;
  envp.reserve(env_store.size() + 1);
  for (auto& e : env_store) envp.push_back(e.data());
  envp.push_back(nullptr);

  std::vector<char*> argv;
  argv.reserve(opt.argv.size() + 1);
  for (const auto& a : opt.argv) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  pid_t pid = ::fork();
  if (pid < 0)
    throw EnvironmentError("fork failed: " + std::string(std::strerror(errno)));

  if (pid == 0) {
    ::setpgid(0, 0);
    if (opt.cwd && ::chdir(opt.cwd->c_str()) != 0) {
      int e = errno;
      (void)!::write(status.wr, &e, sizeof e);
      ::_exit(127);
    }
    if (opt.memory_limit_bytes > 0) {
      rlimit lim{opt.memory_limit_bytes, opt.memory_limit_bytes};
      ::setrlimit(RLIMIT_AS, &lim);
    }
    ::dup2(in.rd, STDIN_FILENO);
    ::dup2(out.wr, STDOUT_FILENO);
    ::dup2(err.wr, STDERR_FILENO);
    ::execvpe(argv[0], argv.data(), envp.data());
    int e = errno;
    (void)!::write(status.wr, &e, sizeof e);
    ::_exit(127);
  }

  in.close_rd();
  out.close_wr();
  err.close_wr();
  status.close_wr();

  // Non-blocking stdin writes; reads are gated by poll so they stay blocking.
  ::fcntl(in.wr, F_SETFL, O_NONBLOCK);

  SubprocessResult result;
  size_t stdin_off = 0;
  if (opt.stdin_data.empty()) in.close_wr();

  auto deadline = clock::now() + opt.timeout;
  bool have_deadline = opt.timeout.count() > 0;
  bool killed = false;
  char buf[16384];

  while (out.rd >= 0 || err.rd >= 0 || in.wr >= 0) {
    pollfd fds[3];
    nfds_t n = 0;
    int idx_out = -1, idx_err = -1, idx_in = -1;
    if (out.rd >= 0) {
      idx_out = static_cast<int>(n);
      fds[n++] = {out.rd, POLLIN, 0};
    }
    if (err.rd >= 0) {
      idx_err = static_cast<int>(n);
      fds[n++] = {err.rd, POLLIN, 0};
    }
    if (in.wr >= 0) {
      idx_in = static_cast<int>(n);
      fds[n++] = {in.wr, POLLOUT, 0};
    }

    int wait_ms = -1;
    if (have_deadline && !killed) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - clock::now());
      wait_ms = static_cast<int>(std::max<long long>(0, left.count()));
    }
    int rc = ::poll(fds, n, wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
      throw EnvironmentError("poll failed: " + std::string(std::strerror(errno)));
    }
    if (rc == 0) {
      // Deadline hit: kill the group, then keep draining until EOF.
      result.timed_out = true;
      killed = true;
      ::kill(-pid, SIGKILL);
      in.close_wr();
      continue;
    }

    if (idx_out >= 0 && (fds[idx_out].revents & (POLLIN | POLLHUP))) {
      ssize_t got = ::read(out.rd, buf, sizeof buf);
      if (got > 0)
        result.out.append(buf, static_cast<size_t>(got));
      else if (got == 0 || errno != EINTR)
        out.close_rd();
    }
    if (idx_err >= 0 && (fds[idx_err].revents & (POLLIN | POLLHUP))) {
      ssize_t got = ::read(err.rd, buf, sizeof buf);
      if (got > 0)
        result.err.append(buf, static_cast<size_t>(got));
      else if (got == 0 || errno != EINTR)
        err.close_rd();
    }
    if (idx_in >= 0 && (fds[idx_in].revents & (POLLOUT | POLLERR | POLLHUP))) {
      if (fds[idx_in].revents & (POLLERR | POLLHUP)) {
        in.close_wr();  // child closed stdin early; that is its business
      } else {
        ssize_t put = ::write(in.wr, opt.stdin_data.data() + stdin_off,
                              opt.stdin_data.size() - stdin_off);
        if (put > 0) {
          stdin_off += static_cast<size_t>(put);
          if (stdin_off == opt.stdin_data.size()) in.close_wr();
        } else if (put < 0 && errno != EINTR && errno != EAGAIN) {
          in.close_wr();
        }
      }
    }
  }

  int wstatus = 0;
  while (::waitpid(pid, &wstatus, 0) < 0 && errno == EINTR) {
  }

  int exec_errno = 0;
  if (::read(status.rd, &exec_errno, sizeof exec_errno) == sizeof(exec_errno)) {
    throw EnvironmentError("cannot execute '" + opt.argv[0] +
                           "': " + std::strerror(exec_errno));
  }

  if (WIFEXITED(wstatus)) {
    result.exit_code = WEXITSTATUS(wstatus);
  } else if (WIFSIGNALED(wstatus)) {
    result.term_signal = WTERMSIG(wstatus);
  }
  return result;
}

}  // namespace ifkit
