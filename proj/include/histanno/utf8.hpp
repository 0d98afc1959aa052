#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace histanno::utf8 {

// Byte length of the sequence starting with lead byte `c`; 0 for an invalid lead.
std::size_t sequence_length(unsigned char c);

// True when `s` is well-formed UTF-8 (no overlongs, no surrogates).
bool is_valid(std::string_view s);

// Number of code points. `s` must be valid UTF-8.
std::size_t length(std::string_view s);

// Splits into one string per code point.
std::vector<std::string> code_points(std::string_view s);

// Lowercases ASCII and the Latin-1 supplement capitals (À..Þ), which covers
// historical French orthography. Other code points pass through unchanged.
std::string fold_case(std::string_view s);

}  // namespace histanno::utf8
