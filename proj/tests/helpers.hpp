#ifndef MOCOLL_TESTS_HELPERS_HPP
#define MOCOLL_TESTS_HELPERS_HPP

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <unistd.h>

#include "mocoll/backends.hpp"

namespace mocoll::testing {

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "mocoll") {
    static std::atomic<unsigned> counter{0};
    auto base = std::filesystem::temp_directory_path();
    path_ = base / (tag + "-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path write_text(const std::filesystem::path& path,
                                        const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

/// VQA test double: replies with the value whose key appears in the last
/// user text, else the fallback.
inline std::shared_ptr<ChatBackend> mapping_backend(std::map<std::string, std::string> replies,
                                                    std::string fallback = "unknown",
                                                    bool vision = true) {
  return std::make_shared<CallbackBackend>(
      [replies = std::move(replies), fallback = std::move(fallback)](
          const std::vector<ChatMessage>& messages, const GenerationParams&) {
        std::string text;
        for (auto it = messages.rbegin(); it != messages.rend(); ++it)
          if (it->role == Role::user) {
            text = it->joined_text();
            break;
          }
        for (const auto& [key, value] : replies)
          if (text.find(key) != std::string::npos) return value;
        return fallback;
      },
      vision);
}

}  // namespace mocoll::testing

#endif  // MOCOLL_TESTS_HELPERS_HPP
