#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace queryback::text {

/// Remove leading and trailing ASCII whitespace.
std::string trim(std::string_view s);

/// Lowercase ASCII letters; non-ASCII bytes pass through untouched.
std::string to_lower(std::string_view s);

/// Collapse runs of whitespace to single spaces and trim the ends.
std::string collapse_whitespace(std::string_view s);

/// trim + lowercase + whitespace collapse. The canonical key form used by the
/// simulated world's lookup tables and the hashed n-gram embedder.
std::string normalize_basic(std::string_view s);

/// Transliterate common accented Latin characters to plain ASCII
/// (UTF-8 input; covers Latin-1 Supplement and the usual Latin Extended-A
/// letters seen in person names). Unknown multi-byte sequences are dropped.
std::string fold_diacritics(std::string_view s);

/// Normalization used when comparing extracted names and truth strings:
/// diacritics folded, lowercased, punctuation stripped, whitespace collapsed.
std::string normalize_name(std::string_view s);

/// Split on a literal separator; no trimming of pieces.
std::vector<std::string> split(std::string_view s, std::string_view sep);

bool starts_with(std::string_view s, std::string_view prefix);
bool contains(std::string_view haystack, std::string_view needle);

/// FNV-1a 64-bit over the bytes of `s`.
std::uint64_t fnv1a64(std::string_view s);

/// splitmix64 finalizer; used to derive well-mixed seeds from combined hashes.
std::uint64_t mix64(std::uint64_t x);

/// Derive a seed from an arbitrary list of string and integer parts.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0);

}  // namespace queryback::text
