#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "clbc/bytes.hpp"
#include "clbc/digest.hpp"
#include "clbc/errors.hpp"
#include "clbc/value.hpp"

// Canonical byte encoding of the structured value model. One value, one byte
// string: UTF-8, map keys in byte order, no insignificant whitespace, integers
// in minimal decimal form, decimals in normalized minimal form, sequences
// order-preserving. The parser accepts non-canonical spellings (whitespace,
// any key order, exponent numerics, escape variants) and the serializer maps
// them all back to the single canonical form.

namespace clbc {

inline constexpr std::string_view kEncodingId = "clbc-c14n-1";

using CanonicalBytes = Bytes;

namespace detail {

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = s[i];
    if (c < 0x80) {
      ++i;
      continue;
    }
    int extra;
    std::uint32_t cp;
    if ((c & 0xe0) == 0xc0) {
      extra = 1;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      extra = 2;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (int k = 1; k <= extra; ++k) {
      unsigned char cc = s[i + k];
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    static constexpr std::uint32_t kMin[4] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra]) return false;                  // overlong
    if (cp >= 0xd800 && cp <= 0xdfff) return false;      // surrogate
    if (cp > 0x10ffff) return false;
    i += extra + 1;
  }
  return true;
}

inline void serialize_string(std::string& out, const std::string& s) {
  if (!valid_utf8(s)) throw UnsupportedValue("string is not well-formed UTF-8");
  out.push_back('"');
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\f': out += "\\f"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20) {
          static const char* hexd = "0123456789abcdef";
          out += "\\u00";
          out.push_back(hexd[c >> 4]);
          out.push_back(hexd[c & 0xf]);
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  out.push_back('"');
}

inline void serialize_decimal(std::string& out, const Value::Decimal& d) {
  std::uint64_t mag = d.unscaled < 0
                          ? ~static_cast<std::uint64_t>(d.unscaled) + 1
                          : static_cast<std::uint64_t>(d.unscaled);
  std::string digits = std::to_string(mag);
  if (digits.size() <= d.scale) digits.insert(0, d.scale + 1 - digits.size(), '0');
  if (d.unscaled < 0) out.push_back('-');
  out.append(digits, 0, digits.size() - d.scale);
  out.push_back('.');
  out.append(digits, digits.size() - d.scale, d.scale);
}

inline void serialize_node(std::string& out, const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Null: out += "null"; break;
    case Value::Kind::Bool: out += v.as_bool() ? "true" : "false"; break;
    case Value::Kind::Int: out += std::to_string(v.as_int()); break;
    case Value::Kind::Decimal: serialize_decimal(out, v.as_decimal()); break;
    case Value::Kind::String: serialize_string(out, v.as_string()); break;
    case Value::Kind::Array: {
      out.push_back('[');
      bool first = true;
      for (const Value& item : v.as_array()) {
        if (!first) out.push_back(',');
        first = false;
        serialize_node(out, item);
      }
      out.push_back(']');
      break;
    }
    case Value::Kind::Map: {
      out.push_back('{');
      bool first = true;
      for (const auto& [key, item] : v.as_map()) {
        if (!first) out.push_back(',');
        first = false;
        serialize_string(out, key);
        out.push_back(':');
        serialize_node(out, item);
      }
      out.push_back('}');
      break;
    }
  }
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Value run() {
    Value v = parse_value(0);
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("trailing content after value");
    return v;
  }

 private:
  static constexpr int kMaxDepth = 100;

  std::string_view text_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what + " at offset " + std::to_string(pos_));
  }

  bool eof() const { return pos_ >= text_.size(); }

  char peek() const {
    if (eof()) throw ParseError("unexpected end of input");
    return text_[pos_];
  }

  char take() {
    char c = peek();
    ++pos_;
    return c;
  }

  void skip_ws() {
    while (!eof()) {
      char c = text_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
        ++pos_;
      else
        break;
    }
  }

  void expect(char c) {
    if (take() != c) fail(std::string("expected '") + c + "'");
  }

  Value parse_value(int depth) {
    if (depth > kMaxDepth) fail("nesting too deep");
    skip_ws();
    char c = peek();
    switch (c) {
      case '{': return parse_map(depth);
      case '[': return parse_array(depth);
      case '"': return Value::string(parse_string());
      case 't': expect_literal("true"); return Value::boolean(true);
      case 'f': expect_literal("false"); return Value::boolean(false);
      case 'n': expect_literal("null"); return Value::null();
      default:
        if (c == '-' || (c >= '0' && c <= '9')) return parse_number();
        fail("unexpected character");
    }
  }

  void expect_literal(std::string_view lit) {
    if (text_.substr(pos_, lit.size()) != lit) fail("bad literal");
    pos_ += lit.size();
  }

  Value parse_map(int depth) {
    expect('{');
    Value::Map entries;
    skip_ws();
    if (peek() == '}') {
      ++pos_;
      return Value::map(std::move(entries));
    }
    while (true) {
      skip_ws();
      std::string key = parse_string();
      if (!detail::valid_utf8(key)) fail("map key is not well-formed UTF-8");
      skip_ws();
      expect(':');
      Value item = parse_value(depth + 1);
      if (!entries.emplace(std::move(key), std::move(item)).second) fail("duplicate map key");
      skip_ws();
      char c = take();
      if (c == '}') break;
      if (c != ',') fail("expected ',' or '}'");
    }
    return Value::map(std::move(entries));
  }

  Value parse_array(int depth) {
    expect('[');
    Value::Array items;
    skip_ws();
    if (peek() == ']') {
      ++pos_;
      return Value::array(std::move(items));
    }
    while (true) {
      items.push_back(parse_value(depth + 1));
      skip_ws();
      char c = take();
      if (c == ']') break;
      if (c != ',') fail("expected ',' or ']'");
    }
    return Value::array(std::move(items));
  }

  std::string parse_string() {
    expect('"');
    std::string out;
    while (true) {
      if (eof()) fail("unterminated string");
      unsigned char c = static_cast<unsigned char>(take());
      if (c == '"') break;
      if (c == '\\') {
        char e = take();
        switch (e) {
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          case '/': out.push_back('/'); break;
          case 'b': out.push_back('\b'); break;
          case 't': out.push_back('\t'); break;
          case 'n': out.push_back('\n'); break;
          case 'f': out.push_back('\f'); break;
          case 'r': out.push_back('\r'); break;
          case 'u': {
            std::uint32_t cp = parse_hex4();
            if (cp >= 0xd800 && cp <= 0xdbff) {
              if (eof() || take() != '\\' || take() != 'u') fail("unpaired high surrogate");
              std::uint32_t lo = parse_hex4();
              if (lo < 0xdc00 || lo > 0xdfff) fail("invalid low surrogate");
              cp = 0x10000 + ((cp - 0xd800) << 10) + (lo - 0xdc00);
            } else if (cp >= 0xdc00 && cp <= 0xdfff) {
              fail("unpaired low surrogate");
            }
            append_utf8(out, cp);
            break;
          }
          default: fail("invalid escape");
        }
      } else if (c < 0x20) {
        fail("raw control character in string");
      } else {
        out.push_back(static_cast<char>(c));
      }
    }
    if (!detail::valid_utf8(out)) fail("string is not well-formed UTF-8");
    return out;
  }

  std::uint32_t parse_hex4() {
    std::uint32_t cp = 0;
    for (int i = 0; i < 4; ++i) {
      int n = hex_nibble(take());
      if (n < 0) fail("invalid \\u escape");
      cp = (cp << 4) | static_cast<std::uint32_t>(n);
    }
    return cp;
  }

  static void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
      out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
  }

  Value parse_number() {
    std::size_t start = pos_;
    bool neg = false;
    if (peek() == '-') {
      neg = true;
      ++pos_;
    }
    std::string int_digits;
    if (peek() == '0') {
      int_digits = "0";
      ++pos_;
      if (!eof() && text_[pos_] >= '0' && text_[pos_] <= '9') fail("leading zero");
    } else {
      while (!eof() && text_[pos_] >= '0' && text_[pos_] <= '9') int_digits.push_back(text_[pos_++]);
      if (int_digits.empty()) fail("expected digits");
    }
    std::string frac_digits;
    if (!eof() && text_[pos_] == '.') {
      ++pos_;
      while (!eof() && text_[pos_] >= '0' && text_[pos_] <= '9') frac_digits.push_back(text_[pos_++]);
      if (frac_digits.empty()) fail("expected fraction digits");
    }
    long long exponent = 0;
    if (!eof() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      bool eneg = false;
      if (!eof() && (text_[pos_] == '+' || text_[pos_] == '-')) eneg = take() == '-';
      std::string ed;
      while (!eof() && text_[pos_] >= '0' && text_[pos_] <= '9') ed.push_back(text_[pos_++]);
      if (ed.empty()) fail("expected exponent digits");
      if (ed.size() > 4) fail("exponent out of range");
      exponent = std::stoll(ed);
      if (eneg) exponent = -exponent;
    }
    (void)start;
    return build_number(neg, int_digits, frac_digits, exponent);
  }

  Value build_number(bool neg, const std::string& int_digits, const std::string& frac_digits,
                     long long exponent) {
    std::string digits = int_digits + frac_digits;
    long long scale = static_cast<long long>(frac_digits.size()) - exponent;
    // Normalize on the digit string before materializing, so spellings like
    // 0.5000 or 5e2 land in range without overflowing.
    std::size_t lead = 0;
    while (lead + 1 < digits.size() && digits[lead] == '0') ++lead;
    digits.erase(0, lead);
    while (scale > 0 && digits.size() > 1 && digits.back() == '0') {
      digits.pop_back();
      --scale;
    }
    if (digits == "0") scale = 0;
    if (scale > static_cast<long long>(Value::kMaxScale)) fail("decimal precision out of range");

    __int128 acc = 0;
    const __int128 kInt64Max = static_cast<__int128>(INT64_MAX);
    for (char c : digits) {
      acc = acc * 10 + (c - '0');
      if (acc > kInt64Max + (neg ? 1 : 0)) fail("number out of range");
    }
    while (scale < 0) {
      acc *= 10;
      if (acc > kInt64Max + (neg ? 1 : 0)) fail("number out of range");
      ++scale;
    }
    std::int64_t unscaled = neg ? static_cast<std::int64_t>(-acc) : static_cast<std::int64_t>(acc);
    if (scale == 0) return Value::integer(unscaled);
    return Value::decimal(unscaled, static_cast<std::uint32_t>(scale));
  }
};

}  // namespace detail

inline std::string serialize_text(const Value& v) {
  std::string out;
  detail::serialize_node(out, v);
  return out;
}

inline CanonicalBytes canonicalize(const Value& v) { return string_to_bytes(serialize_text(v)); }

inline Value parse_value(std::string_view text) { return detail::Parser(text).run(); }

inline Value parse_value(const Bytes& b) {
  return parse_value(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
}

inline bool is_canonical(std::string_view text) {
  try {
    return serialize_text(parse_value(text)) == text;
  } catch (const Error&) {
    return false;
  }
}

inline bool is_canonical(const Bytes& b) {
  return is_canonical(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
}

inline Digest value_digest(const Value& v) { return sha256(serialize_text(v)); }

}  // namespace clbc
