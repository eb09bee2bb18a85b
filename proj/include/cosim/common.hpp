#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace cosim {

// Thrown when a caller violates an operation's preconditions (bad shapes,
// out-of-range arguments). Maps to CLI exit code 2.
struct invalid_argument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown on dataset/file problems (missing files, undecodable images).
// Maps to CLI exit code 3.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a computation diverges (NaN/Inf loss). Maps to CLI exit code 4.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace detail

}  // namespace cosim

#define COSIM_CHECK_ARG(cond, ...)                                     \
  do {                                                                 \
    if (!(cond)) throw ::cosim::invalid_argument(::cosim::detail::cat(__VA_ARGS__)); \
  } while (0)

#define COSIM_CHECK_DATA(cond, ...)                                    \
  do {                                                                 \
    if (!(cond)) throw ::cosim::data_error(::cosim::detail::cat(__VA_ARGS__)); \
  } while (0)
