#include "tapfm/verbalizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace tapfm {

namespace {

const std::array<const char*, 20> kOnes = {
    "zero",    "one",     "two",       "three",    "four",    "five",    "six",
    "seven",   "eight",   "nine",      "ten",      "eleven",  "twelve",  "thirteen",
    "fourteen", "fifteen", "sixteen",  "seventeen", "eighteen", "nineteen"};
const std::array<const char*, 10> kTens = {"",      "",      "twenty", "thirty", "forty",
                                           "fifty", "sixty", "seventy", "eighty", "ninety"};
const std::array<const char*, 13> kMonths = {"",     "january", "february", "march",
                                             "april", "may",     "june",     "july",
                                             "august", "september", "october", "november",
                                             "december"};
// ordinal day words 1..31
const std::array<const char*, 32> kOrdinals = {
    "",           "first",        "second",        "third",         "fourth",
    "fifth",      "sixth",        "seventh",       "eighth",        "ninth",
    "tenth",      "eleventh",     "twelfth",       "thirteenth",    "fourteenth",
    "fifteenth",  "sixteenth",    "seventeenth",   "eighteenth",    "nineteenth",
    "twentieth",  "twenty first", "twenty second", "twenty third",  "twenty fourth",
    "twenty fifth", "twenty sixth", "twenty seventh", "twenty eighth", "twenty ninth",
    "thirtieth",  "thirty first"};

void append_below_thousand(long n, std::vector<std::string>& out) {
  if (n >= 100) {
    out.push_back(kOnes[n / 100]);
    out.push_back("hundred");
    n %= 100;
  }
  if (n >= 20) {
    out.push_back(kTens[n / 10]);
    n %= 10;
    if (n > 0) out.push_back(kOnes[n]);
  } else if (n > 0) {
    out.push_back(kOnes[n]);
  }
}

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(),
                                   [](unsigned char c) { return std::isdigit(c); });
}

long parse_long(const std::string& s, const char* what) {
  if (!all_digits(s) || s.size() > 6) throw VerbalizeError(std::string("bad ") + what + ": " + s);
  return std::stol(s);
}

// Pairwise year reading: 1999 -> nineteen ninety nine, 2000 -> two thousand,
// 1900 -> nineteen hundred, 2007 -> two thousand seven.
void append_year(long y, std::vector<std::string>& out) {
  if (y < 1000 || y > 9999) throw VerbalizeError("year out of range: " + std::to_string(y));
  long hi = y / 100, lo = y % 100;
  if (hi % 10 == 0) {  // x000..x009 style years
    out.push_back(kOnes[hi / 10]);
    out.push_back("thousand");
    if (lo > 0) append_below_thousand(lo, out);
  } else if (lo == 0) {
    append_below_thousand(hi, out);
    out.push_back("hundred");
  } else if (lo < 10) {
    append_below_thousand(hi, out);
    out.push_back("oh");
    out.push_back(kOnes[lo]);
  } else {
    append_below_thousand(hi, out);
    append_below_thousand(lo, out);
  }
}

}  // namespace

std::vector<std::string> number_to_words(long n) {
  if (n < 0 || n > 999999) throw VerbalizeError("cardinal out of range: " + std::to_string(n));
  if (n == 0) return {"zero"};
  std::vector<std::string> out;
  if (n >= 1000) {
    append_below_thousand(n / 1000, out);
    out.push_back("thousand");
    n %= 1000;
  }
  append_below_thousand(n, out);
  return out;
}

NswClass nsw_class_from_string(const std::string& s) {
  if (s == "PLAIN") return NswClass::PLAIN;
  if (s == "CARDINAL") return NswClass::CARDINAL;
  if (s == "DATE") return NswClass::DATE;
  if (s == "MONEY") return NswClass::MONEY;
  if (s == "TIME") return NswClass::TIME;
  if (s == "LETTERS") return NswClass::LETTERS;
  throw VerbalizeError("unknown NSW class: " + s);
}

std::string nsw_class_to_string(NswClass c) {
  switch (c) {
    case NswClass::PLAIN: return "PLAIN";
    case NswClass::CARDINAL: return "CARDINAL";
    case NswClass::DATE: return "DATE";
    case NswClass::MONEY: return "MONEY";
    case NswClass::TIME: return "TIME";
    case NswClass::LETTERS: return "LETTERS";
  }
  throw VerbalizeError("unknown NSW class");
}

std::vector<std::string> verbalize(const std::string& text, NswClass cls) {
  std::vector<std::string> out;
  switch (cls) {
    case NswClass::PLAIN:
      throw VerbalizeError("PLAIN tokens are not verbalized");

    case NswClass::CARDINAL:
      return number_to_words(parse_long(text, "cardinal"));

    case NswClass::DATE: {
      size_t a = text.find('/');
      if (a == std::string::npos) throw VerbalizeError("bad date: " + text);
      size_t b = text.find('/', a + 1);
      long month = parse_long(text.substr(0, a), "month");
      long day, year = -1;
      if (b == std::string::npos) {
        day = parse_long(text.substr(a + 1), "day");
      } else {
        day = parse_long(text.substr(a + 1, b - a - 1), "day");
        year = parse_long(text.substr(b + 1), "year");
      }
      if (month < 1 || month > 12) throw VerbalizeError("bad month: " + text);
      if (day < 1 || day > 31) throw VerbalizeError("bad day: " + text);
      out.push_back(kMonths[month]);
      std::string ord = kOrdinals[day];
      size_t sp = ord.find(' ');
      if (sp == std::string::npos) {
        out.push_back(ord);
      } else {
        out.push_back(ord.substr(0, sp));
        out.push_back(ord.substr(sp + 1));
      }
      if (year >= 0) append_year(year, out);
      return out;
    }

    case NswClass::MONEY: {
      if (text.empty() || text[0] != '$') throw VerbalizeError("bad money: " + text);
      std::string body = text.substr(1);
      size_t dot = body.find('.');
      long dollars, cents = -1;
      if (dot == std::string::npos) {
        dollars = parse_long(body, "dollars");
      } else {
        dollars = parse_long(body.substr(0, dot), "dollars");
        std::string c = body.substr(dot + 1);
        if (c.size() != 2) throw VerbalizeError("bad cents: " + text);
        cents = parse_long(c, "cents");
      }
      auto d = number_to_words(dollars);
      out.insert(out.end(), d.begin(), d.end());
      out.push_back(dollars == 1 ? "dollar" : "dollars");
      if (cents > 0) {
        auto c = number_to_words(cents);
        out.insert(out.end(), c.begin(), c.end());
        out.push_back(cents == 1 ? "cent" : "cents");
      }
      return out;
    }

    case NswClass::TIME: {
      size_t colon = text.find(':');
      if (colon == std::string::npos) throw VerbalizeError("bad time: " + text);
      long hour = parse_long(text.substr(0, colon), "hour");
      std::string m = text.substr(colon + 1);
      if (m.size() != 2) throw VerbalizeError("bad minutes: " + text);
      long minute = parse_long(m, "minutes");
      if (hour > 23 || minute > 59) throw VerbalizeError("time out of range: " + text);
      auto h = number_to_words(hour);
      out.insert(out.end(), h.begin(), h.end());
      if (minute == 0) {
        out.push_back("o'clock");
      } else if (minute < 10) {
        out.push_back("oh");
        out.push_back(kOnes[minute]);
      } else {
        append_below_thousand(minute, out);
      }
      return out;
    }

    case NswClass::LETTERS: {
      if (text.empty()) throw VerbalizeError("empty LETTERS token");
      for (unsigned char c : text) {
        if (!std::isalpha(c)) throw VerbalizeError("bad LETTERS token: " + text);
        out.push_back(std::string(1, static_cast<char>(std::tolower(c))));
      }
      return out;
    }
  }
  throw VerbalizeError("unreachable");
}

}  // namespace tapfm
