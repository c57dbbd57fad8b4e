#pragma once

#include <charconv>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace projbnn {

template <class S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Index = Eigen::Index;

template <class... A>
std::string cat(A&&... a) {
  std::ostringstream os;
  (os << ... << a);
  return os.str();
}

// The message is assembled only on failure, so checks stay cheap in hot loops.
template <class... A>
inline void require(bool cond, A&&... message_parts) {
  if (!cond) [[unlikely]]
    throw std::invalid_argument(cat(std::forward<A>(message_parts)...));
}

// Shortest representation that round-trips; used for CSV cells and fingerprints.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace projbnn
