// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_CORE_LOG_HPP
#define AFFORD_CORE_LOG_HPP

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace afford::log {

enum class Level { info, warning };

using Sink = std::function<void(Level, const std::string&)>;

namespace detail {
inline std::mutex& mutex() {
  static std::mutex m;
  return m;
}
inline Sink& sink() {
  static Sink s = [](Level level, const std::string& msg) {
    std::cerr << (level == Level::warning ? "[warn] " : "[info] ") << msg << '\n';
  };
  return s;
}
}  // namespace detail

/// Replaces the process-wide sink and returns the previous one.
inline Sink set_sink(Sink s) {
  std::lock_guard lock(detail::mutex());
  return std::exchange(detail::sink(), std::move(s));
}

inline void emit(Level level, const std::string& msg) {
  std::lock_guard lock(detail::mutex());
  if (detail::sink()) detail::sink()(level, msg);
}

inline void warn(const std::string& msg) { emit(Level::warning, msg); }
inline void info(const std::string& msg) { emit(Level::info, msg); }

/// RAII helper that collects messages for the lifetime of the object.
class Capture {
public:
  Capture()
      : previous_(set_sink([this](Level l, const std::string& m) {
          messages.emplace_back(l, m);
        })) {}
  ~Capture() { set_sink(std::move(previous_)); }
  Capture(const Capture&) = delete;
  Capture& operator=(const Capture&) = delete;

  std::size_t warnings() const {
    std::size_t n = 0;
    for (const auto& [l, m] : messages) n += (l == Level::warning);
    return n;
  }

  std::vector<std::pair<Level, std::string>> messages;

private:
  Sink previous_;
};

}  // namespace afford::log

#endif  // AFFORD_CORE_LOG_HPP
