#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tapfm {

// NSW classes handled by the rule-based verbalizer. PLAIN tokens pass
// through and are never verbalized.
enum class NswClass { PLAIN, CARDINAL, DATE, MONEY, TIME, LETTERS };

NswClass nsw_class_from_string(const std::string& s);
std::string nsw_class_to_string(NswClass c);

struct VerbalizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Expands one NSW token into spoken words: lowercase, no hyphens, no "and".
// Accepted syntax per class:
//   CARDINAL  digit string, 0..999999
//   DATE      M/D or M/D/YYYY (months 1..12, days 1..31)
//   MONEY     $N or $N.CC
//   TIME      H:MM (H 0..23, MM 00..59)
//   LETTERS   alphabetic string, read letter by letter
// Throws VerbalizeError with a reason on anything else.
std::vector<std::string> verbalize(const std::string& text, NswClass cls);

// Cardinal number words for 0..999999 (helper, exposed for tests).
std::vector<std::string> number_to_words(long n);

}  // namespace tapfm
