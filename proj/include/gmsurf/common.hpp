#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gmsurf {

using Vec3 = Eigen::Vector3d;

/// Axis-aligned cube (or box) in world coordinates.
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 extent() const { return hi - lo; }
  double diagonal() const { return (hi - lo).norm(); }

  /// Map a world point to local coordinates in [-1,1]^3.
  Vec3 to_local(const Vec3& p) const {
    return ((2.0 * p - lo - hi).array() / (hi - lo).array()).matrix();
  }
  Vec3 to_world(const Vec3& q) const {
    return (0.5 * (lo + hi).array() + 0.5 * q.array() * (hi - lo).array()).matrix();
  }
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (PQR or OFF); carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Inconsistent contour topology inside one cell.
class TopologyError : public Error {
 public:
  TopologyError(std::uint64_t cell, const std::string& what)
      : Error("cell " + std::to_string(cell) + ": " + what), cell_(cell) {}
  std::uint64_t cell() const { return cell_; }

 private:
  std::uint64_t cell_;
};

/// Two cells emitted the same directed edge, so their orientations disagree.
class WeldError : public Error {
 public:
  WeldError(std::uint64_t cell_a, std::uint64_t cell_b)
      : Error("orientation conflict between cells " + std::to_string(cell_a) + " and " + std::to_string(cell_b)),
        a_(cell_a), b_(cell_b) {}
  std::uint64_t cell_a() const { return a_; }
  std::uint64_t cell_b() const { return b_; }

 private:
  std::uint64_t a_, b_;
};

}  // namespace gmsurf
