#pragma once

// Report emission with byte-stable output: insertion-ordered objects and
// fixed %.17g float formatting. Config *parsing* uses nlohmann/json; this
// writer exists so identical runs produce identical report bytes.

#include "mfvi/common.hpp"

#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace mfvi {

class Jv {
 public:
  Jv() : node_(nullptr) {}
  Jv(bool b) : node_(b) {}
  Jv(double x) : node_(x) {}
  Jv(int x) : node_(static_cast<long long>(x)) {}
  Jv(long x) : node_(static_cast<long long>(x)) {}
  Jv(long long x) : node_(x) {}
  Jv(unsigned long long x) : node_(static_cast<long long>(x)) {}
  Jv(const char* s) : node_(std::string(s)) {}
  Jv(std::string s) : node_(std::move(s)) {}
  Jv(const VectorXd& v);

  static Jv object() {
    Jv j;
    j.node_ = Object{};
    return j;
  }
  static Jv array() {
    Jv j;
    j.node_ = Array{};
    return j;
  }

  Jv& set(const std::string& key, Jv v);  // insertion-ordered
  Jv& push(Jv v);

  std::string dump(int indent = 2) const;

 private:
  struct Object {
    std::vector<std::pair<std::string, Jv>> items;
  };
  struct Array {
    std::vector<Jv> items;
  };
  using Node =
      std::variant<std::nullptr_t, bool, long long, double, std::string,
                   Object, Array>;
  Node node_;
  void dump_to(std::string& out, int indent, int depth) const;
};

void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace mfvi
