#pragma once

#include <stdexcept>
#include <string>

namespace navpruner {

// Base class for all library errors.
class NavError : public std::runtime_error {
 public:
  explicit NavError(const std::string& what) : std::runtime_error(what) {}
};

class UnknownViewpoint : public NavError {
 public:
  explicit UnknownViewpoint(const std::string& id)
      : NavError("unknown viewpoint: " + id) {}
};

class NonAdjacentStep : public NavError {
 public:
  NonAdjacentStep(const std::string& a, const std::string& b)
      : NavError("path step is not an edge: " + a + " -> " + b) {}
};

class DegeneratePosition : public NavError {
 public:
  explicit DegeneratePosition(const std::string& what) : NavError(what) {}
};

class InvalidConfig : public NavError {
 public:
  explicit InvalidConfig(const std::string& what) : NavError(what) {}
};

class NoFeasiblePair : public NavError {
 public:
  explicit NoFeasiblePair(const std::string& what) : NavError(what) {}
};

class InvalidEpisode : public NavError {
 public:
  explicit InvalidEpisode(const std::string& what) : NavError(what) {}
};

class NotSuccessful : public NavError {
 public:
  explicit NotSuccessful(const std::string& what) : NavError(what) {}
};

class DimensionMismatch : public NavError {
 public:
  explicit DimensionMismatch(const std::string& what) : NavError(what) {}
};

class EmptyDataset : public NavError {
 public:
  explicit EmptyDataset(const std::string& what) : NavError(what) {}
};

class IoError : public NavError {
 public:
  explicit IoError(const std::string& what) : NavError(what) {}
};

class FormatVersionMismatch : public NavError {
 public:
  explicit FormatVersionMismatch(const std::string& what) : NavError(what) {}
};

class ProtocolError : public NavError {
 public:
  explicit ProtocolError(const std::string& what) : NavError(what) {}
};

class InvalidAction : public NavError {
 public:
  explicit InvalidAction(const std::string& what) : NavError(what) {}
};

class TimeoutError : public NavError {
 public:
  explicit TimeoutError(const std::string& what) : NavError(what) {}
};

class Misalignment : public NavError {
 public:
  explicit Misalignment(const std::string& what) : NavError(what) {}
};

class NoPresentedNeighbor : public NavError {
 public:
  explicit NoPresentedNeighbor(const std::string& what) : NavError(what) {}
};

}  // namespace navpruner
