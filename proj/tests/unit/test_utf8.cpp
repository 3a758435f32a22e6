#include <doctest.h>

#include "snprex/utf8.hpp"

using namespace snprex;

TEST_CASE("code point offsets over mixed text") {
  const std::string s = "Ménière’s x";
  CHECK(utf8::length(s) == 11);
  CHECK(utf8::substr(s, 0, 7).value() == "Ménière");
  CHECK(utf8::substr(s, 7, 9).value() == "’s");
  CHECK_FALSE(utf8::substr(s, 3, 12).has_value());
  CHECK(utf8::is_valid(s));
}

TEST_CASE("invalid sequences are detected") {
  CHECK_FALSE(utf8::is_valid("\xC3"));
  CHECK_FALSE(utf8::is_valid("a\xC0\xAF"));
  CHECK_FALSE(utf8::is_valid("\xED\xA0\x80"));
  CHECK(utf8::is_valid("\xEF\xBF\xBD"));
}

TEST_CASE("encode and decode agree") {
  for (char32_t cp : {U'a', U'é', U'’', U'😀'}) {
    std::string s;
    utf8::append(s, cp);
    std::size_t pos = 0;
    CHECK(utf8::decode(s, pos) == cp);
    CHECK(pos == s.size());
  }
}
