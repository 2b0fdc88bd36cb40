#include "queryback/text.hpp"

#include <array>
#include <cctype>

namespace queryback::text {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

// Maps a Unicode code point in the accented-Latin ranges to its ASCII base
// letter(s). Returns an empty view when the code point has no mapping.
std::string_view ascii_base(char32_t cp) {
    switch (cp) {
        case U'À': case U'Á': case U'Â': case U'Ã': case U'Ä': case U'Å': case U'Ā': case U'Ă': case U'Ą': return "A";
        case U'à': case U'á': case U'â': case U'ã': case U'ä': case U'å': case U'ā': case U'ă': case U'ą': return "a";
        case U'Æ': return "AE";
        case U'æ': return "ae";
        case U'Ç': case U'Ć': case U'Č': return "C";
        case U'ç': case U'ć': case U'č': return "c";
        case U'Ď': case U'Đ': return "D";
        case U'ď': case U'đ': return "d";
        case U'È': case U'É': case U'Ê': case U'Ë': case U'Ē': case U'Ė': case U'Ę': case U'Ě': return "E";
        case U'è': case U'é': case U'ê': case U'ë': case U'ē': case U'ė': case U'ę': case U'ě': return "e";
        case U'Ğ': return "G";
        case U'ğ': return "g";
        case U'Ì': case U'Í': case U'Î': case U'Ï': case U'Ī': case U'Į': case U'İ': return "I";
        case U'ì': case U'í': case U'î': case U'ï': case U'ī': case U'į': case U'ı': return "i";
        case U'Ł': return "L";
        case U'ł': return "l";
        case U'Ñ': case U'Ń': case U'Ň': return "N";
        case U'ñ': case U'ń': case U'ň': return "n";
        case U'Ò': case U'Ó': case U'Ô': case U'Õ': case U'Ö': case U'Ø': case U'Ō': case U'Ő': return "O";
        case U'ò': case U'ó': case U'ô': case U'õ': case U'ö': case U'ø': case U'ō': case U'ő': return "o";
        case U'Ŕ': case U'Ř': return "R";
        case U'ŕ': case U'ř': return "r";
        case U'Ś': case U'Š': case U'Ş': return "S";
        case U'ś': case U'š': case U'ş': return "s";
        case U'ß': return "ss";
        case U'Ť': case U'Ţ': return "T";
        case U'ť': case U'ţ': return "t";
        case U'Ù': case U'Ú': case U'Û': case U'Ü': case U'Ū': case U'Ů': case U'Ű': return "U";
        case U'ù': case U'ú': case U'û': case U'ü': case U'ū': case U'ů': case U'ű': return "u";
        case U'Ý': return "Y";
        case U'ý': case U'ÿ': return "y";
        case U'Ź': case U'Ż': case U'Ž': return "Z";
        case U'ź': case U'ż': case U'ž': return "z";
        default: return {};
    }
}

}  // namespace

std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

std::string normalize_basic(std::string_view s) {
    return collapse_whitespace(to_lower(s));
}

std::string fold_diacritics(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
            ++i;
            continue;
        }
        // Decode one UTF-8 sequence; malformed bytes are skipped.
        char32_t cp = 0;
        size_t len = 0;
        if ((c & 0xE0) == 0xC0) {
            cp = c & 0x1F;
            len = 2;
        } else if ((c & 0xF0) == 0xE0) {
            cp = c & 0x0F;
            len = 3;
        } else if ((c & 0xF8) == 0xF0) {
            cp = c & 0x07;
            len = 4;
        } else {
            ++i;
            continue;
        }
        if (i + len > s.size()) break;
        bool ok = true;
        for (size_t k = 1; k < len; ++k) {
            unsigned char cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (!ok) {
            ++i;
            continue;
        }
        out += ascii_base(cp);
        i += len;
    }
    return out;
}

std::string normalize_name(std::string_view s) {
    std::string folded = fold_diacritics(s);
    std::string out;
    out.reserve(folded.size());
    for (char ch : folded) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            out.push_back(static_cast<char>(std::tolower(c)));
        } else if (std::isspace(c) || c == '-' || c == '.' || c == '\'') {
            out.push_back(' ');
        }
        // other punctuation dropped
    }
    return collapse_whitespace(out);
}

std::vector<std::string> split(std::string_view s, std::string_view sep) {
    std::vector<std::string> parts;
    if (sep.empty()) {
        parts.emplace_back(s);
        return parts;
    }
    size_t pos = 0;
    while (true) {
        size_t next = s.find(sep, pos);
        if (next == std::string_view::npos) {
            parts.emplace_back(s.substr(pos));
            break;
        }
        parts.emplace_back(s.substr(pos, next - pos));
        pos = next + sep.size();
    }
    return parts;
}

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index) {
    return base ^ mix64(fnv1a64(tag) + 0x9e3779b97f4a7c15ULL * (index + 1));
}

}  // namespace queryback::text
