#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace netreg {

// Minimal JSON value for report emission. Object keys keep insertion order
// and doubles are printed with 17 significant digits, so a report is
// byte-identical across reruns.
class Json {
public:
  enum class Type { Null, Bool, Int, Double, String, Array, Object };

  Json() : type_(Type::Null) {}
  Json(bool b) : type_(Type::Bool), bool_(b) {}
  Json(int v) : type_(Type::Int), int_(v) {}
  Json(long v) : type_(Type::Int), int_(v) {}
  Json(long long v) : type_(Type::Int), int_(v) {}
  Json(std::size_t v) : type_(Type::Int), int_(static_cast<long long>(v)) {}
  Json(double v) : type_(Type::Double), double_(v) {}
  Json(const char* s) : type_(Type::String), str_(s) {}
  Json(std::string s) : type_(Type::String), str_(std::move(s)) {}

  static Json array() {
    Json j;
    j.type_ = Type::Array;
    return j;
  }
  static Json object() {
    Json j;
    j.type_ = Type::Object;
    return j;
  }

  void push_back(Json v) { items_.push_back(std::move(v)); }

  // Sets (or replaces) a key, preserving first-insertion order.
  void set(const std::string& key, Json v);

  bool is_object() const { return type_ == Type::Object; }

  std::string dump(int indent = -1) const;

private:
  void write(std::string& out, int indent, int depth) const;

  Type type_;
  bool bool_ = false;
  long long int_ = 0;
  double double_ = 0.0;
  std::string str_;
  std::vector<Json> items_;                              // array
  std::vector<std::pair<std::string, Json>> members_;    // object
};

std::string json_escape(const std::string& s);
std::string format_double_17(double v);

}  // namespace netreg
