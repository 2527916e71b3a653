// SPDX-License-Identifier: Apache-2.0
#pragma once

// Append-only trail storage for one project directory.
//
// Layout:
//   <root>/project.json     project metadata and tunables
//   <root>/actions.jsonl    one ActionDefinition per line
//   <root>/trainings.jsonl  one TrainingRecord per line
//   <root>/lessons.jsonl    one Lesson per line
//   <root>/.lock            advisory writer lock
//
// Writers serialize on an flock(2) of .lock. Readers take no lock; a
// trailing line without its newline belongs to an in-flight (or crashed)
// writer and is skipped with a warning.

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "rastro/core.hpp"
#include "rastro/serialize.hpp"

namespace rastro {

namespace fs = std::filesystem;

enum class RecordKind { action, training, lesson };

inline std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::action: return "action";
    case RecordKind::training: return "training";
    case RecordKind::lesson: return "lesson";
  }
  return "action";
}

/// Accepts the singular and plural spellings.
inline std::optional<RecordKind> parse_record_kind(std::string_view s) {
  if (s == "action" || s == "actions") return RecordKind::action;
  if (s == "training" || s == "trainings") return RecordKind::training;
  if (s == "lesson" || s == "lessons") return RecordKind::lesson;
  return std::nullopt;
}

inline std::string_view file_name(RecordKind k) {
  switch (k) {
    case RecordKind::action: return "actions.jsonl";
    case RecordKind::training: return "trainings.jsonl";
    case RecordKind::lesson: return "lessons.jsonl";
  }
  return "actions.jsonl";
}

template <typename Record>
struct record_traits;

template <>
struct record_traits<ActionDefinition> {
  static constexpr RecordKind kind = RecordKind::action;
  static ActionDefinition decode(const Json& j) { return action_from_json(j); }
};

template <>
struct record_traits<TrainingRecord> {
  static constexpr RecordKind kind = RecordKind::training;
  static TrainingRecord decode(const Json& j) { return training_from_json(j); }
};

template <>
struct record_traits<Lesson> {
  static constexpr RecordKind kind = RecordKind::lesson;
  static Lesson decode(const Json& j) { return lesson_from_json(j); }
};

template <typename T>
concept TrailRecord = requires { record_traits<T>::kind; };

inline std::int64_t code_of(const ActionDefinition& a) { return a.code; }
inline std::int64_t code_of(const Lesson& l) { return l.code; }
inline std::int64_t code_of(const TrainingRecord& t) { return t.context.code; }

inline Timestamp registered_at_of(const ActionDefinition& a) { return a.registered_at.value_or(Timestamp{}); }
inline Timestamp registered_at_of(const Lesson& l) { return l.registered_at.value_or(Timestamp{}); }
inline Timestamp registered_at_of(const TrainingRecord& t) {
  return t.context.registered_at.value_or(Timestamp{});
}

struct StoreOptions {
  std::chrono::milliseconds lock_timeout{10'000};
  /// fdatasync(2) each committed line before append returns.
  bool durable = true;
  std::function<Timestamp()> clock = [] { return Timestamp::now(); };
  /// Receives non-fatal diagnostics (skipped partial lines, repairs).
  std::function<void(const std::string&)> on_warning = [](const std::string& msg) {
    std::cerr << "rastro: warning: " << msg << '\n';
  };
};

namespace detail {

[[noreturn]] inline void throw_errno(const std::string& what, const fs::path& p) {
  throw IoError(what + " '" + p.string() + "': " + std::strerror(errno));
}

class FileDescriptor {
 public:
  FileDescriptor() = default;
  explicit FileDescriptor(int fd) : fd_(fd) {}
  FileDescriptor(const FileDescriptor&) = delete;
  FileDescriptor& operator=(const FileDescriptor&) = delete;
  FileDescriptor(FileDescriptor&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  FileDescriptor& operator=(FileDescriptor&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~FileDescriptor() { reset(); }

  int get() const noexcept { return fd_; }
  explicit operator bool() const noexcept { return fd_ >= 0; }

  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

/// Exclusive advisory lock on `<root>/.lock`, polled until the timeout.
class DirectoryLock {
 public:
  DirectoryLock(const fs::path& lock_path, std::chrono::milliseconds timeout) {
    fd_ = FileDescriptor(::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644));
    if (!fd_) throw_errno("cannot open lock file", lock_path);
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    auto backoff = std::chrono::microseconds(50);
    while (::flock(fd_.get(), LOCK_EX | LOCK_NB) != 0) {
      if (errno == EINTR) continue;
      if (errno != EWOULDBLOCK) throw_errno("cannot lock", lock_path);
      if (std::chrono::steady_clock::now() >= deadline) {
        throw LockTimeout("timed out waiting for writer lock '" + lock_path.string() + "'");
      }
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, std::chrono::microseconds(5000));
    }
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;
  ~DirectoryLock() {
    if (fd_) ::flock(fd_.get(), LOCK_UN);
  }

 private:
  FileDescriptor fd_;
};

inline std::string read_file_range(const fs::path& p, std::uint64_t from) {
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    if (!fs::exists(p)) return {};
    throw IoError("cannot read '" + p.string() + "'");
  }
  in.seekg(static_cast<std::streamoff>(from));
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

inline void write_all(int fd, std::string_view data, const fs::path& p) {
  while (!data.empty()) {
    const auto n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("write failed on", p);
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

/// Writes a small file atomically via a sibling temp file and rename(2).
inline void write_file_atomic(const fs::path& p, std::string_view data) {
  auto tmp = p;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    FileDescriptor fd(::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
    if (!fd) throw_errno("cannot create", tmp);
    write_all(fd.get(), data, tmp);
    if (::fsync(fd.get()) != 0) throw_errno("fsync failed on", tmp);
  }
  if (::rename(tmp.c_str(), p.c_str()) != 0) throw_errno("cannot rename into", p);
}

struct LineScan {
  std::vector<std::string> lines;
  std::vector<std::int64_t> codes;
  /// Bytes covered by complete lines.
  std::uint64_t consumed = 0;
  bool partial_tail = false;
};

/// Splits `data` into complete lines and decodes each one's header. Line
/// numbers in errors count from `first_line`.
inline LineScan scan_lines(std::string_view data, const fs::path& file, std::size_t first_line,
                           std::int64_t previous_code) {
  LineScan out;
  std::size_t pos = 0;
  std::size_t line_no = first_line;
  while (pos < data.size()) {
    const auto nl = data.find('\n', pos);
    if (nl == std::string_view::npos) {
      out.partial_tail = true;
      break;
    }
    const auto line = data.substr(pos, nl - pos);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw CorruptionError(file.string(), line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("code") || !j["code"].is_number_integer() ||
        !j.contains("schema_version") || !j["schema_version"].is_number_integer()) {
      throw CorruptionError(file.string(), line_no, "missing schema_version or code");
    }
    if (j["schema_version"].get<std::int64_t>() > kSchemaVersion) {
      throw SchemaVersionError(file.string() + ":" + std::to_string(line_no) + ": schema_version " +
                               std::to_string(j["schema_version"].get<std::int64_t>()) +
                               " is newer than supported version " + std::to_string(kSchemaVersion));
    }
    const auto code = j["code"].get<std::int64_t>();
    if (code <= previous_code) {
      throw CorruptionError(file.string(), line_no,
                            "code " + std::to_string(code) + " does not increase over " +
                                std::to_string(previous_code));
    }
    previous_code = code;
    out.lines.emplace_back(line);
    out.codes.push_back(code);
    pos = nl + 1;
    out.consumed = pos;
    ++line_no;
  }
  return out;
}

}  // namespace detail

class TrailStore {
 public:
  static constexpr std::array<RecordKind, 3> kKinds{RecordKind::action, RecordKind::training,
                                                    RecordKind::lesson};

  /// Opens the trail at `root`, creating it (and project.json) when absent.
  /// Idempotent. The name is only used on first creation; an empty name
  /// falls back to the directory name.
  static TrailStore open_or_init(const fs::path& root, std::string_view project_name,
                                 StoreOptions options = {}) {
    std::error_code ec;
    if (fs::exists(root, ec) && !fs::is_directory(root, ec)) {
      throw IoError("'" + root.string() + "' exists and is not a directory");
    }
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create '" + root.string() + "': " + ec.message());

    const auto meta_path = root / "project.json";
    if (!fs::exists(meta_path)) {
      const detail::DirectoryLock lock(root / ".lock", options.lock_timeout);
      if (!fs::exists(meta_path)) {
        ProjectMeta meta;
        meta.name = project_name.empty() ? fs::absolute(root).lexically_normal().filename().string()
                                         : std::string(project_name);
        if (meta.name.empty()) meta.name = fs::absolute(root).lexically_normal().parent_path().filename().string();
        meta.created_at = options.clock();
        for (auto kind : kKinds) {
          const auto p = root / file_name(kind);
          detail::FileDescriptor fd(::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644));
          if (!fd) detail::throw_errno("cannot create", p);
        }
        detail::write_file_atomic(meta_path, to_json(meta).dump(2) + "\n");
      }
    }
    return open(root, std::move(options));
  }

  /// Opens an existing trail. Fails with NotFound when `root` has no
  /// project.json.
  static TrailStore open(const fs::path& root, StoreOptions options = {}) {
    const auto meta_path = root / "project.json";
    if (!fs::exists(meta_path)) {
      throw NotFound("'" + root.string() + "' is not a trail directory (no project.json)");
    }
    std::ifstream in(meta_path);
    if (!in) throw IoError("cannot read '" + meta_path.string() + "'");
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw CorruptionError(meta_path.string(), 1, e.what());
    }
    ProjectMeta meta;
    try {
      meta = project_meta_from_json(j);
    } catch (const DecodeError& e) {
      throw CorruptionError(meta_path.string(), 1, e.what());
    }
    TrailStore store(root, std::move(meta), std::move(options));
    for (auto kind : kKinds) store.recover(kind);
    return store;
  }

  const fs::path& root() const noexcept { return root_; }
  const ProjectMeta& meta() const noexcept { return meta_; }
  Taxonomy taxonomy() const { return meta_.config.taxonomy(); }

  fs::path path_of(RecordKind kind) const { return root_ / file_name(kind); }

  /// Highest code this handle has seen committed for `kind` (0 when none).
  std::int64_t last_code(RecordKind kind) const { return tails_[index(kind)].last_code; }
  std::int64_t next_code(RecordKind kind) const { return last_code(kind) + 1; }

  std::int64_t append(ActionDefinition a) {
    if (auto report = validate_action(a); !report.empty()) throw ValidationError(std::move(report));
    return commit(RecordKind::action, [&](std::int64_t code, Timestamp at) {
      a.code = code;
      if (!a.registered_at) a.registered_at = at;
      return encode_line(to_json(a));
    });
  }

  std::int64_t append(Lesson l) {
    if (auto report = validate_lesson(l); !report.empty()) throw ValidationError(std::move(report));
    return commit(RecordKind::lesson, [&](std::int64_t code, Timestamp at) {
      const auto& trainings = tails_[index(RecordKind::training)].codes;
      ValidationReport report;
      for (std::size_t i = 0; i < l.related_training_codes.size(); ++i) {
        if (!std::binary_search(trainings.begin(), trainings.end(), l.related_training_codes[i])) {
          report.push_back({"related_training_codes[" + std::to_string(i) + "]",
                            "training " + std::to_string(l.related_training_codes[i]) + " does not exist"});
        }
      }
      if (!report.empty()) throw ValidationError(std::move(report));
      l.code = code;
      if (!l.registered_at) l.registered_at = at;
      return encode_line(to_json(l));
    });
  }

  std::int64_t append(TrainingRecord t) {
    if (auto report = validate_training(t); !report.empty()) throw ValidationError(std::move(report));
    return commit(RecordKind::training, [&](std::int64_t code, Timestamp at) {
      t.context.code = code;
      if (!t.context.registered_at) t.context.registered_at = at;
      return encode_line(to_json(t));
    });
  }

  /// Committed lines of `kind` in code order, without their newlines.
  std::vector<std::string> scan_lines(RecordKind kind) const { return load(kind).lines; }

  template <TrailRecord Record>
  std::vector<Record> scan() const {
    constexpr auto kind = record_traits<Record>::kind;
    const auto loaded = load(kind);
    std::vector<Record> out;
    out.reserve(loaded.lines.size());
    for (std::size_t i = 0; i < loaded.lines.size(); ++i) {
      out.push_back(decode<Record>(loaded.lines[i], i + 1));
    }
    return out;
  }

  template <TrailRecord Record>
  Record read(std::int64_t code) const {
    constexpr auto kind = record_traits<Record>::kind;
    const auto loaded = load(kind);
    for (std::size_t i = 0; i < loaded.codes.size(); ++i) {
      if (loaded.codes[i] == code) return decode<Record>(loaded.lines[i], i + 1);
      if (loaded.codes[i] > code) break;
    }
    throw NotFound(std::string(to_string(kind)) + " " + std::to_string(code) + " not found");
  }

  std::string read_line(RecordKind kind, std::int64_t code) const {
    const auto loaded = load(kind);
    for (std::size_t i = 0; i < loaded.codes.size(); ++i) {
      if (loaded.codes[i] == code) return loaded.lines[i];
    }
    throw NotFound(std::string(to_string(kind)) + " " + std::to_string(code) + " not found");
  }

  std::vector<ActionDefinition> actions() const { return scan<ActionDefinition>(); }
  std::vector<TrainingRecord> trainings() const { return scan<TrainingRecord>(); }
  std::vector<Lesson> lessons() const { return scan<Lesson>(); }

 private:
  struct Tail {
    std::uint64_t committed_bytes = 0;
    std::size_t committed_lines = 0;
    std::int64_t last_code = 0;
    /// Committed codes, ascending.
    std::vector<std::int64_t> codes;
  };

  TrailStore(fs::path root, ProjectMeta meta, StoreOptions options)
      : root_(std::move(root)), meta_(std::move(meta)), options_(std::move(options)) {}

  static std::size_t index(RecordKind k) { return static_cast<std::size_t>(k); }

  void warn(const std::string& msg) const {
    if (options_.on_warning) options_.on_warning(msg);
  }

  detail::LineScan load(RecordKind kind) const {
    const auto p = path_of(kind);
    auto scan = detail::scan_lines(detail::read_file_range(p, 0), p, 1, 0);
    if (scan.partial_tail) warn("skipping incomplete trailing line in '" + p.string() + "'");
    return scan;
  }

  void recover(RecordKind kind) {
    const auto p = path_of(kind);
    if (!fs::exists(p)) return;
    auto& tail = tails_[index(kind)];
    const auto scan = load(kind);
    // Decode every line so a corrupt trail is reported at open time.
    for (std::size_t i = 0; i < scan.lines.size(); ++i) decode_any(kind, scan.lines[i], i + 1);
    tail.committed_bytes = scan.consumed;
    tail.committed_lines = scan.lines.size();
    tail.last_code = scan.codes.empty() ? 0 : scan.codes.back();
    tail.codes = scan.codes;
  }

  /// Catches up with lines committed by other writers since this handle last
  /// looked. Must hold the directory lock. A partial tail found here can only
  /// come from a writer that died mid-line, so it is cut off.
  void sync_tail(RecordKind kind, int fd) {
    const auto p = path_of(kind);
    auto& tail = tails_[index(kind)];
    struct stat st {};
    if (::fstat(fd, &st) != 0) detail::throw_errno("cannot stat", p);
    const auto size = static_cast<std::uint64_t>(st.st_size);
    if (size < tail.committed_bytes) {
      throw CorruptionError(p.string(), tail.committed_lines, "file shrank below committed length");
    }
    if (size == tail.committed_bytes) return;
    const auto fresh = detail::read_file_range(p, tail.committed_bytes);
    const auto scan = detail::scan_lines(fresh, p, tail.committed_lines + 1, tail.last_code);
    tail.committed_bytes += scan.consumed;
    tail.committed_lines += scan.lines.size();
    if (!scan.codes.empty()) tail.last_code = scan.codes.back();
    tail.codes.insert(tail.codes.end(), scan.codes.begin(), scan.codes.end());
    if (scan.partial_tail) {
      warn("truncating incomplete trailing line in '" + p.string() + "' left by an interrupted writer");
      if (::ftruncate(fd, static_cast<off_t>(tail.committed_bytes)) != 0) {
        detail::throw_errno("cannot truncate", p);
      }
    }
  }

  template <typename Encode>
  std::int64_t commit(RecordKind kind, Encode&& encode) {
    const detail::DirectoryLock lock(root_ / ".lock", options_.lock_timeout);
    const auto p = path_of(kind);
    detail::FileDescriptor fd(::open(p.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644));
    if (!fd) detail::throw_errno("cannot open", p);
    sync_tail(kind, fd.get());
    if (kind == RecordKind::lesson) {
      const auto tp = path_of(RecordKind::training);
      detail::FileDescriptor tfd(::open(tp.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644));
      if (!tfd) detail::throw_errno("cannot open", tp);
      sync_tail(RecordKind::training, tfd.get());
    }

    auto& tail = tails_[index(kind)];
    const auto code = tail.last_code + 1;
    auto line = encode(code, options_.clock());
    line.push_back('\n');
    try {
      detail::write_all(fd.get(), line, p);
      if (options_.durable && ::fdatasync(fd.get()) != 0) detail::throw_errno("fdatasync failed on", p);
    } catch (...) {
      // Never leave a partial line behind.
      [[maybe_unused]] const int rc = ::ftruncate(fd.get(), static_cast<off_t>(tail.committed_bytes));
      throw;
    }
    tail.committed_bytes += line.size();
    tail.committed_lines += 1;
    tail.last_code = code;
    tail.codes.push_back(code);
    return code;
  }

  template <TrailRecord Record>
  Record decode(const std::string& line, std::size_t line_no) const {
    const auto p = path_of(record_traits<Record>::kind);
    try {
      return record_traits<Record>::decode(Json::parse(line));
    } catch (const DecodeError& e) {
      throw CorruptionError(p.string(), line_no, e.what());
    } catch (const Json::exception& e) {
      throw CorruptionError(p.string(), line_no, e.what());
    }
  }

  void decode_any(RecordKind kind, const std::string& line, std::size_t line_no) const {
    switch (kind) {
      case RecordKind::action: decode<ActionDefinition>(line, line_no); break;
      case RecordKind::training: decode<TrainingRecord>(line, line_no); break;
      case RecordKind::lesson: decode<Lesson>(line, line_no); break;
    }
  }

  fs::path root_;
  ProjectMeta meta_;
  StoreOptions options_;
  std::array<Tail, 3> tails_{};
};

/// Resolves the project directory: an explicit path wins, then RASTRO_DIR.
inline fs::path resolve_project_dir(const std::optional<fs::path>& explicit_dir) {
  if (explicit_dir && !explicit_dir->empty()) return *explicit_dir;
  if (const char* env = std::getenv("RASTRO_DIR"); env != nullptr && *env != '\0') return fs::path(env);
  throw InvalidArgument("no project directory: pass --dir or set RASTRO_DIR");
}

}  // namespace rastro
