#include "mfvi/report.hpp"

#include <fstream>
#include <sstream>

namespace mfvi {

Jv::Jv(const VectorXd& v) {
  Array a;
  a.items.reserve(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) a.items.emplace_back(v[i]);
  node_ = std::move(a);
}

Jv& Jv::set(const std::string& key, Jv v) {
  if (!std::holds_alternative<Object>(node_))
    throw Error("Jv::set on non-object");
  std::get<Object>(node_).items.emplace_back(key, std::move(v));
  return *this;
}

Jv& Jv::push(Jv v) {
  if (!std::holds_alternative<Array>(node_))
    throw Error("Jv::push on non-array");
  std::get<Array>(node_).items.push_back(std::move(v));
  return *this;
}

namespace {

void escape_into(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

}  // namespace

void Jv::dump_to(std::string& out, int indent, int depth) const {
  const std::string pad(static_cast<std::size_t>(indent) * depth, ' ');
  const std::string pad1(static_cast<std::size_t>(indent) * (depth + 1), ' ');
  if (std::holds_alternative<std::nullptr_t>(node_)) {
    out += "null";
  } else if (std::holds_alternative<bool>(node_)) {
    out += std::get<bool>(node_) ? "true" : "false";
  } else if (std::holds_alternative<long long>(node_)) {
    out += std::to_string(std::get<long long>(node_));
  } else if (std::holds_alternative<double>(node_)) {
    out += format_double(std::get<double>(node_));
  } else if (std::holds_alternative<std::string>(node_)) {
    escape_into(out, std::get<std::string>(node_));
  } else if (std::holds_alternative<Object>(node_)) {
    const auto& items = std::get<Object>(node_).items;
    if (items.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    for (std::size_t i = 0; i < items.size(); ++i) {
      out += pad1;
      escape_into(out, items[i].first);
      out += ": ";
      items[i].second.dump_to(out, indent, depth + 1);
      if (i + 1 < items.size()) out += ',';
      out += '\n';
    }
    out += pad + "}";
  } else {
    const auto& items = std::get<Array>(node_).items;
    if (items.empty()) {
      out += "[]";
      return;
    }
    out += "[\n";
    for (std::size_t i = 0; i < items.size(); ++i) {
      out += pad1;
      items[i].dump_to(out, indent, depth + 1);
      if (i + 1 < items.size()) out += ',';
      out += '\n';
    }
    out += pad + "]";
  }
}

std::string Jv::dump(int indent) const {
  std::string out;
  dump_to(out, indent, 0);
  out += '\n';
  return out;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open for writing: " + path);
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace mfvi
