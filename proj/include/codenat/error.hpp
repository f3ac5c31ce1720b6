#ifndef CODENAT_ERROR_HPP
#define CODENAT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace codenat {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (files, arguments, preconditions).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A patch edit does not match the source it is applied to.
class ConflictError : public Error {
 public:
  ConflictError(std::size_t edit_index, const std::string& what)
      : Error("edit " + std::to_string(edit_index) + ": " + what),
        edit_index_(edit_index) {}

  std::size_t edit_index() const { return edit_index_; }

 private:
  std::size_t edit_index_;
};

/// A backend could not be reached or answered with an error status.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts, int last_status)
      : Error(what), attempts_(attempts), last_status_(last_status) {}

  int attempts() const { return attempts_; }
  // HTTP status of the final attempt, or -1 when no response arrived.
  int last_status() const { return last_status_; }

 private:
  int attempts_;
  int last_status_;
};

/// The backend cannot answer this kind of query.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// The evaluation environment is unusable (e.g. the test command is missing).
class SetupError : public Error {
 public:
  using Error::Error;
};

}  // namespace codenat

#endif  // CODENAT_ERROR_HPP
