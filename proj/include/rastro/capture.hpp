// SPDX-License-Identifier: Apache-2.0
#pragma once

// Automatic registration of training runs, either in-process through a
// RunContext or out-of-process by wrapping a command line.

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "rastro/core.hpp"
#include "rastro/store.hpp"

extern char** environ;

namespace rastro {

/// The caller-declared parts of a training record.
struct RunSpec {
  Configuration configuration;
  DataUsed data_used;
  TrainingParams training_params;
  TestParams test_params;
};

/// Returns `s` as valid UTF-8, with each malformed byte replaced by U+FFFD.
inline std::string sanitize_utf8(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    if (c < 0x80) len = 1;
    else if ((c & 0xE0) == 0xC0 && c >= 0xC2) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0 && c <= 0xF4) len = 4;
    bool ok = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      ok = (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
    }
    if (ok) {
      out.append(s.substr(i, len));
      i += len;
    } else {
      out.append("\xEF\xBF\xBD");
      ++i;
    }
  }
  return out;
}

/// An open training run. Metrics and epochs accumulate in memory; the record
/// is committed once, at end_run, so that failed runs still carry their
/// error. Single-threaded by contract.
template <typename MonotonicClock = std::chrono::steady_clock>
class BasicRunContext {
 public:
  BasicRunContext(TrailStore& store, Configuration configuration, DataUsed data_used,
                  TrainingParams training_params, TestParams test_params)
      : store_(&store), started_(MonotonicClock::now()), started_wall_(Timestamp::now()) {
    if (!fs::exists(store.root() / "project.json")) {
      throw IoError("trail at '" + store.root().string() + "' is unavailable");
    }
    draft_.configuration = std::move(configuration);
    draft_.data_used = std::move(data_used);
    draft_.training_params = std::move(training_params);
    draft_.test_params = std::move(test_params);
  }

  BasicRunContext(TrailStore& store, RunSpec spec)
      : BasicRunContext(store, std::move(spec.configuration), std::move(spec.data_used),
                        std::move(spec.training_params), std::move(spec.test_params)) {}

  bool is_open() const noexcept { return open_; }
  const TrainingRecord& draft() const noexcept { return draft_; }
  Timestamp started_at() const noexcept { return started_wall_; }
  std::int64_t epochs() const noexcept { return draft_.context.epochs; }

  /// Violations found at commit time, if the record had to be salvaged.
  const ValidationReport& violations() const noexcept { return violations_; }

  void log_metric(std::string_view name, double value) {
    require_open("log_metric");
    if (name.empty()) throw InvalidArgument("metric name must not be empty");
    if (!std::isfinite(value)) throw InvalidArgument(fmt::format("metric '{}' got a non-finite value", name));
    logged_[std::string(name)].push_back(value);
  }

  std::int64_t log_epoch() {
    require_open("log_epoch");
    return ++draft_.context.epochs;
  }

  /// Validates and appends the record, closing the context. Logged samples
  /// become sample-list metrics; `final_metrics` entries win on name clash.
  /// A record that fails validation is still persisted, as interrupted, with
  /// the violations in its error message.
  std::int64_t end_run(RunStatus status, std::map<std::string, MetricResult> final_metrics = {},
                       std::optional<std::string> model_ref = std::nullopt,
                       std::optional<std::string> error_message = std::nullopt) {
    require_open("end_run");
    open_ = false;

    const auto elapsed = MonotonicClock::now() - started_;
    draft_.context.duration_seconds =
        std::max(0.0, std::chrono::duration<double>(elapsed).count());
    draft_.context.status = status;
    if (error_message) draft_.context.error_message = sanitize_utf8(*error_message);
    for (auto& [name, xs] : logged_) draft_.results.metrics[name] = MetricResult::samples(std::move(xs));
    logged_.clear();
    for (auto& [name, m] : final_metrics) draft_.results.metrics[name] = std::move(m);
    draft_.results.model_ref = std::move(model_ref);

    violations_ = validate_training(draft_);
    if (!violations_.empty()) salvage();
    return store_->append(draft_);
  }

 private:
  void require_open(std::string_view op) const {
    if (!open_) throw StateError(fmt::format("{} on a closed run", op));
  }

  /// Drops the offending fields so the record can be stored, and records
  /// what was dropped in the error message.
  void salvage() {
    auto& r = draft_;
    std::string message = "record failed validation: " + describe(violations_);
    if (r.context.error_message && !detail::blank(*r.context.error_message)) {
      message += "; original error: " + *r.context.error_message;
    }
    for (const auto& v : violations_) {
      constexpr std::string_view metrics_prefix = "results.metrics.";
      constexpr std::string_view hyper_prefix = "training_params.hyperparameters.";
      if (v.path.starts_with(metrics_prefix)) {
        r.results.metrics.erase(v.path.substr(metrics_prefix.size()));
      } else if (v.path == "results.metrics") {
        r.results.metrics.erase("");
      } else if (v.path.starts_with(hyper_prefix)) {
        r.training_params.hyperparameters.erase(v.path.substr(hyper_prefix.size()));
      } else if (v.path == "training_params.hyperparameters") {
        r.training_params.hyperparameters.erase("");
      } else if (v.path.starts_with("test_params.evaluation_procedure")) {
        r.test_params.evaluation_procedure.reset();
      } else if (v.path == "data_used.record_count") {
        r.data_used.record_count.reset();
      } else if (v.path == "data_used.class_count") {
        r.data_used.class_count.reset();
      }
    }
    r.context.status = RunStatus::interrupted;
    r.context.error_message = std::move(message);
  }

  TrailStore* store_;
  typename MonotonicClock::time_point started_;
  Timestamp started_wall_;
  TrainingRecord draft_;
  std::map<std::string, std::vector<double>> logged_;
  ValidationReport violations_;
  bool open_ = true;
};

using RunContext = BasicRunContext<>;

inline RunContext begin_run(TrailStore& store, Configuration configuration, DataUsed data_used,
                            TrainingParams training_params, TestParams test_params) {
  return RunContext(store, std::move(configuration), std::move(data_used), std::move(training_params),
                    std::move(test_params));
}

// ---------------------------------------------------------------------------
// Command wrapper

struct WrapOptions {
  /// Bytes of standard error kept as the failure message.
  std::size_t stderr_tail_bytes = 4096;
  /// Copy the child's standard error through to ours as it arrives.
  bool tee_stderr = true;
};

struct WrappedRun {
  std::int64_t code = 0;
  RunStatus status = RunStatus::succeeded;
  /// Exit status of the child, or -1 when it did not exit normally.
  int exit_code = -1;
};

/// Shell-style rendering of argv, used as the program id.
inline std::string join_command_line(const std::vector<std::string>& argv) {
  std::string out;
  for (const auto& arg : argv) {
    if (!out.empty()) out.push_back(' ');
    const bool plain = !arg.empty() && arg.find_first_of(" \t\n'\"\\$`*?;&|<>()") == std::string::npos;
    if (plain) {
      out += arg;
      continue;
    }
    out.push_back('\'');
    for (char c : arg) {
      if (c == '\'') out += "'\\''";
      else out.push_back(c);
    }
    out.push_back('\'');
  }
  return out;
}

/// Runs `argv` as a child process and registers it as one training: start
/// and end time, exit status (nonzero means failed) and the tail of its
/// standard error. A command that cannot be spawned is registered as failed
/// with the spawn error.
inline WrappedRun wrap_command(TrailStore& store, const std::vector<std::string>& argv, RunSpec spec,
                               const WrapOptions& options = {}) {
  if (argv.empty()) throw InvalidArgument("no command to run");
  spec.configuration.program_id = join_command_line(argv);

  TrainingRecord record;
  record.configuration = std::move(spec.configuration);
  record.data_used = std::move(spec.data_used);
  record.training_params = std::move(spec.training_params);
  record.test_params = std::move(spec.test_params);
  // Reject a bad declaration before running anything, not after.
  if (auto report = validate_training(record); !report.empty()) throw ValidationError(std::move(report));

  const auto started = std::chrono::steady_clock::now();

  auto finish = [&](RunStatus status, std::optional<std::string> message, int exit_code) {
    record.context.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    record.context.status = status;
    record.context.error_message = std::move(message);
    const auto code = store.append(record);
    return WrappedRun{code, status, exit_code};
  };

  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    return finish(RunStatus::failed, fmt::format("cannot create pipe: {}", std::strerror(errno)), -1);
  }
  detail::FileDescriptor read_end(fds[0]);
  detail::FileDescriptor write_end(fds[1]);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, write_end.get(), STDERR_FILENO);

  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, cargv[0], &actions, nullptr, cargv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  write_end.reset();
  if (rc != 0) {
    return finish(RunStatus::failed, fmt::format("failed to spawn '{}': {}", argv[0], std::strerror(rc)), -1);
  }

  std::string tail;
  char buf[4096];
  for (;;) {
    const auto n = ::read(read_end.get(), buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    if (options.tee_stderr) std::cerr.write(buf, n).flush();
    tail.append(buf, static_cast<std::size_t>(n));
    if (tail.size() > 2 * options.stderr_tail_bytes) tail.erase(0, tail.size() - options.stderr_tail_bytes);
  }
  if (tail.size() > options.stderr_tail_bytes) tail.erase(0, tail.size() - options.stderr_tail_bytes);

  int wstatus = 0;
  while (::waitpid(pid, &wstatus, 0) < 0) {
    if (errno != EINTR) {
      return finish(RunStatus::failed, fmt::format("waitpid failed: {}", std::strerror(errno)), -1);
    }
  }

  auto text = sanitize_utf8(tail);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  if (WIFEXITED(wstatus)) {
    const int exit_code = WEXITSTATUS(wstatus);
    if (exit_code == 0) return finish(RunStatus::succeeded, std::nullopt, 0);
    if (detail::blank(text)) text = fmt::format("command exited with status {}", exit_code);
    return finish(RunStatus::failed, std::move(text), exit_code);
  }
  const int sig = WIFSIGNALED(wstatus) ? WTERMSIG(wstatus) : 0;
  auto message = fmt::format("command terminated by signal {} ({})", sig, ::strsignal(sig));
  if (!detail::blank(text)) message += "\n" + text;
  return finish(RunStatus::interrupted, std::move(message), -1);
}

}  // namespace rastro
