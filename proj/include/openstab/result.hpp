#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace openstab {

/// A numerical evaluation that left the domain of a function (log of a
/// non-positive number, division by zero, ...). Faults are ordinary values so
/// that a sweep over many probes can record them and keep going.
struct DomainFault {
  std::string reason;
  std::string subexpression;
  std::vector<double> input;

  std::string describe() const;
};

class BadResultAccess : public std::logic_error {
 public:
  explicit BadResultAccess(const DomainFault& fault)
      : std::logic_error("value requested from a faulted result: " + fault.describe()) {}
};

/// Either a value or a DomainFault.
template <class T>
class Result {
 public:
  Result(T value) : data_(std::move(value)) {}              // NOLINT(google-explicit-constructor)
  Result(DomainFault fault) : data_(std::move(fault)) {}    // NOLINT(google-explicit-constructor)

  bool ok() const { return std::holds_alternative<T>(data_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    if (!ok()) throw BadResultAccess(fault());
    return std::get<T>(data_);
  }
  T&& value() && {
    if (!ok()) throw BadResultAccess(fault());
    return std::get<T>(std::move(data_));
  }
  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

  const DomainFault& fault() const { return std::get<DomainFault>(data_); }

 private:
  std::variant<T, DomainFault> data_;
};

inline std::string DomainFault::describe() const {
  std::string out = reason;
  if (!subexpression.empty()) out += " in '" + subexpression + "'";
  if (!input.empty()) {
    out += " at (";
    for (std::size_t i = 0; i < input.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(input[i]);
    }
    out += ")";
  }
  return out;
}

}  // namespace openstab
