#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "clbc/errors.hpp"

namespace clbc {

// Structured value model: maps with string keys, sequences, strings, 64-bit
// integers, fixed-precision decimals, booleans, null. Free-form binary floats
// are deliberately absent; anything real-valued enters as a decimal with an
// explicit scale. Values normalize at construction so equivalent numeric
// spellings collapse to one stored form ("1.50" == "1.5", "2.0" == 2).
class Value {
 public:
  enum class Kind { Null, Bool, Int, Decimal, String, Array, Map };

  struct Decimal {
    std::int64_t unscaled{0};
    std::uint32_t scale{0};  // value = unscaled * 10^-scale, 1 <= scale <= 18 once normalized

    friend bool operator==(const Decimal&, const Decimal&) = default;
    friend auto operator<=>(const Decimal&, const Decimal&) = default;
  };

  using Array = std::vector<Value>;
  using Map = std::map<std::string, Value>;  // std::less<std::string> = byte order

  static constexpr std::uint32_t kMaxScale = 18;

  Value() : node_(nullptr) {}

  static Value null() { return Value(); }

  static Value boolean(bool b) {
    Value v;
    v.node_ = b;
    return v;
  }

  static Value integer(std::int64_t i) {
    Value v;
    v.node_ = i;
    return v;
  }

  // Normalizing factory: strips trailing fraction zeros; a fully integral
  // decimal degrades to an Int node so 2.0 and 2 are the same value.
  static Value decimal(std::int64_t unscaled, std::uint32_t scale) {
    if (scale > kMaxScale) throw UnsupportedValue("decimal scale exceeds supported precision");
    while (scale > 0 && unscaled % 10 == 0) {
      unscaled /= 10;
      --scale;
    }
    if (scale == 0) return integer(unscaled);
    Value v;
    v.node_ = Decimal{unscaled, scale};
    return v;
  }

  // Nearest fixed-precision decimal to x, ties away from zero. Rejects
  // non-finite input rather than coercing.
  static Value decimal_from_double(double x, std::uint32_t scale);

  static Value string(std::string s) {
    Value v;
    v.node_ = std::move(s);
    return v;
  }

  static Value array(Array items = {}) {
    Value v;
    v.node_ = std::move(items);
    return v;
  }

  static Value map(Map entries = {}) {
    Value v;
    v.node_ = std::move(entries);
    return v;
  }

  Kind kind() const { return static_cast<Kind>(node_.index()); }

  bool is_null() const { return kind() == Kind::Null; }
  bool is_bool() const { return kind() == Kind::Bool; }
  bool is_int() const { return kind() == Kind::Int; }
  bool is_decimal() const { return kind() == Kind::Decimal; }
  bool is_number() const { return is_int() || is_decimal(); }
  bool is_string() const { return kind() == Kind::String; }
  bool is_array() const { return kind() == Kind::Array; }
  bool is_map() const { return kind() == Kind::Map; }

  bool as_bool() const { return get<bool>("bool"); }
  std::int64_t as_int() const { return get<std::int64_t>("int"); }
  const Decimal& as_decimal() const { return get<Decimal>("decimal"); }
  const std::string& as_string() const { return get<std::string>("string"); }
  const Array& as_array() const { return get<Array>("array"); }
  Array& as_array() { return get_mut<Array>("array"); }
  const Map& as_map() const { return get<Map>("map"); }
  Map& as_map() { return get_mut<Map>("map"); }

  // Numeric read across Int/Decimal, for computation sites that work in
  // doubles (utilities, metrics). Never used on the canonical byte path.
  double as_double() const {
    if (is_int()) return static_cast<double>(as_int());
    if (is_decimal()) {
      const Decimal& d = as_decimal();
      double p = 1.0;
      for (std::uint32_t i = 0; i < d.scale; ++i) p *= 10.0;
      return static_cast<double>(d.unscaled) / p;
    }
    throw UnsupportedValue("numeric read on non-number node");
  }

  const Value* find(const std::string& key) const {
    const Map& m = as_map();
    auto it = m.find(key);
    return it == m.end() ? nullptr : &it->second;
  }

  const Value& at(const std::string& key) const {
    const Value* v = find(key);
    if (!v) throw ParseError("missing key: " + key);
    return *v;
  }

  Value& set(const std::string& key, Value v) {
    return as_map().insert_or_assign(key, std::move(v)).first->second;
  }

  friend bool operator==(const Value&, const Value&) = default;

 private:
  template <class T>
  const T& get(const char* what) const {
    if (const T* p = std::get_if<T>(&node_)) return *p;
    throw UnsupportedValue(std::string("value is not a ") + what);
  }

  template <class T>
  T& get_mut(const char* what) {
    if (T* p = std::get_if<T>(&node_)) return *p;
    throw UnsupportedValue(std::string("value is not a ") + what);
  }

  std::variant<std::nullptr_t, bool, std::int64_t, Decimal, std::string, Array, Map> node_;
};

inline Value Value::decimal_from_double(double x, std::uint32_t scale) {
  if (!(x == x) || x > 1e18 || x < -1e18) throw UnsupportedValue("non-encodable numeric");
  if (scale > kMaxScale) throw UnsupportedValue("decimal scale exceeds supported precision");
  double p = 1.0;
  for (std::uint32_t i = 0; i < scale; ++i) p *= 10.0;
  double scaled = x * p;
  double rounded = (scaled >= 0.0) ? static_cast<double>(static_cast<std::int64_t>(scaled + 0.5))
                                   : static_cast<double>(static_cast<std::int64_t>(scaled - 0.5));
  return decimal(static_cast<std::int64_t>(rounded), scale);
}

}  // namespace clbc
