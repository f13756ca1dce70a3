#ifndef MOCOLL_ERROR_HPP
#define MOCOLL_ERROR_HPP

#include <sstream>
#include <stdexcept>
#include <string>

namespace mocoll {

/// Error type thrown across the library. All failures carry a message
/// naming the offending record, case_id, or file where applicable.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void format_parts(std::ostringstream&) {}

template <typename T, typename... Rest>
void format_parts(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  format_parts(os, rest...);
}
}  // namespace detail

// errorf("bad record ", idx, ": ", reason) -> Error with concatenated message
template <typename... Parts>
[[noreturn]] void raise(const Parts&... parts) {
  std::ostringstream os;
  detail::format_parts(os, parts...);
  throw Error(os.str());
}

}  // namespace mocoll

#endif  // MOCOLL_ERROR_HPP
