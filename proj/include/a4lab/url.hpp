#ifndef A4LAB_URL_HPP
#define A4LAB_URL_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace a4lab {

/// Key of the query pairs appended by the attack. Chosen so that it cannot
/// complete any default ad keyword or dimension pattern.
inline constexpr std::string_view kPadKey = "qz";

/// Length added to a decoded URL by one appended pad pair, excluding payload
/// ("?qz=" or "&qz=").
inline constexpr std::size_t kPadOverhead = 4;

/// Stand-in character used by the ASCII view for every character reference.
inline constexpr char kOpaqueReference = '\x1a';

namespace detail {

inline void append_utf8(std::string& out, std::uint32_t cp) {
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

// Recognizes a well-formed character reference starting at `pos` (which must
// hold '&'). Returns its length, or 0 when the '&' is a plain character.
inline std::size_t match_reference(std::string_view s, std::size_t pos, std::string* decoded) {
  if (pos >= s.size() || s[pos] != '&') return 0;
  std::size_t i = pos + 1;
  if (i < s.size() && s[i] == '#') {
    ++i;
    bool hex = false;
    if (i < s.size() && (s[i] == 'x' || s[i] == 'X')) {
      hex = true;
      ++i;
    }
    std::size_t digits_begin = i;
    std::uint32_t cp = 0;
    while (i < s.size() && i - digits_begin < 8) {
      char c = s[i];
      int digit = -1;
      if (c >= '0' && c <= '9') digit = c - '0';
      else if (hex && c >= 'a' && c <= 'f') digit = c - 'a' + 10;
      else if (hex && c >= 'A' && c <= 'F') digit = c - 'A' + 10;
      if (digit < 0) break;
      cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(digit);
      ++i;
    }
    if (i == digits_begin || i >= s.size() || s[i] != ';') return 0;
    if (cp == 0 || cp > 0x10ffff) return 0;
    if (decoded) {
      decoded->clear();
      append_utf8(*decoded, cp);
    }
    return i + 1 - pos;
  }
  static constexpr std::pair<std::string_view, char> kNamed[] = {
      {"amp;", '&'}, {"lt;", '<'}, {"gt;", '>'}, {"quot;", '"'}, {"apos;", '\''}};
  for (const auto& [name, ch] : kNamed) {
    if (s.substr(i, name.size()) == name) {
      if (decoded) *decoded = std::string(1, ch);
      return 1 + name.size();
    }
  }
  return 0;
}

struct MarkupToken {
  std::size_t begin = 0;
  std::size_t length = 1;
  bool reference = false;
};

inline std::vector<MarkupToken> tokenize(std::string_view markup) {
  std::vector<MarkupToken> tokens;
  tokens.reserve(markup.size());
  for (std::size_t i = 0; i < markup.size();) {
    std::size_t len = match_reference(markup, i, nullptr);
    if (len > 0) {
      tokens.push_back({i, len, true});
      i += len;
    } else {
      tokens.push_back({i, 1, false});
      ++i;
    }
  }
  return tokens;
}

inline bool is_unreserved(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_' || c == '~';
}

}  // namespace detail

/// Decodes numeric (decimal and hexadecimal) and the five XML named character
/// references. Anything that is not a well-formed reference is kept verbatim.
inline std::string decode_entities(std::string_view markup) {
  std::string out;
  out.reserve(markup.size());
  std::string ref;
  for (std::size_t i = 0; i < markup.size();) {
    std::size_t len = detail::match_reference(markup, i, &ref);
    if (len > 0) {
      out += ref;
      i += len;
    } else {
      out.push_back(markup[i]);
      ++i;
    }
  }
  return out;
}

/// Hexadecimal numeric reference for one byte, e.g. 'a' -> "&#x61;".
inline std::string encode_char_entity(char c) {
  static constexpr char kHex[] = "0123456789abcdef";
  auto byte = static_cast<unsigned char>(c);
  std::string out = "&#x";
  out.push_back(kHex[byte >> 4]);
  out.push_back(kHex[byte & 0xf]);
  out.push_back(';');
  return out;
}

/// What a matcher that assumes plain ASCII text sees: literal characters pass
/// through, every character reference collapses to one opaque byte.
inline std::string ascii_view(std::string_view markup) {
  std::string view;
  view.reserve(markup.size());
  for (const auto& token : detail::tokenize(markup))
    view.push_back(token.reference ? kOpaqueReference : markup[token.begin]);
  return view;
}

inline std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + 1))
    ++count;
  return count;
}

/// Number of (possibly overlapping) literal occurrences of the keywords in the
/// markup, as seen by an ASCII substring matcher.
inline std::size_t ascii_match_count(std::string_view markup, std::span<const std::string> keywords) {
  std::string view = ascii_view(markup);
  std::size_t total = 0;
  for (const auto& k : keywords) total += count_occurrences(view, k);
  return total;
}

inline bool ascii_contains_any(std::string_view markup, std::span<const std::string> keywords) {
  std::string view = ascii_view(markup);
  return std::any_of(keywords.begin(), keywords.end(), [&](const std::string& k) {
    return !k.empty() && view.find(k) != std::string::npos;
  });
}

struct QueryPair {
  std::string key;
  std::string value;
  bool has_value = true;

  friend bool operator==(const QueryPair&, const QueryPair&) = default;
};

/// Decoded URL split at the query and fragment delimiters.
struct UrlParts {
  std::string base;                     // scheme, authority and path
  std::optional<std::string> query;     // text after '?', without it
  std::optional<std::string> fragment;  // text after '#', without it

  friend bool operator==(const UrlParts&, const UrlParts&) = default;
};

inline UrlParts split_url(std::string_view decoded) {
  UrlParts parts;
  std::size_t hash = decoded.find('#');
  std::string_view head = decoded.substr(0, hash);
  if (hash != std::string_view::npos) parts.fragment = std::string(decoded.substr(hash + 1));
  std::size_t question = head.find('?');
  parts.base = std::string(head.substr(0, question));
  if (question != std::string_view::npos) parts.query = std::string(head.substr(question + 1));
  return parts;
}

inline std::string join_url(const UrlParts& parts) {
  std::string out = parts.base;
  if (parts.query) out += "?" + *parts.query;
  if (parts.fragment) out += "#" + *parts.fragment;
  return out;
}

/// Splits a query string on '&'; empty segments are kept so that
/// serialize_query(parse_query(q)) == q for every q.
inline std::vector<QueryPair> parse_query(std::string_view query) {
  std::vector<QueryPair> pairs;
  std::size_t start = 0;
  while (true) {
    std::size_t amp = query.find('&', start);
    std::string_view segment = query.substr(start, amp == std::string_view::npos ? amp : amp - start);
    std::size_t eq = segment.find('=');
    if (eq == std::string_view::npos)
      pairs.push_back({std::string(segment), "", false});
    else
      pairs.push_back({std::string(segment.substr(0, eq)), std::string(segment.substr(eq + 1)), true});
    if (amp == std::string_view::npos) break;
    start = amp + 1;
  }
  return pairs;
}

inline std::string serialize_query(std::span<const QueryPair> pairs) {
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0) out.push_back('&');
    out += pairs[i].key;
    if (pairs[i].has_value) out += "=" + pairs[i].value;
  }
  return out;
}

/// Lower-cased host of an absolute URL ("scheme://user@host:port/..."), or an
/// empty string when there is no authority component.
inline std::string host_of(std::string_view decoded) {
  std::size_t scheme = decoded.find("://");
  if (scheme == std::string_view::npos) return {};
  std::string_view rest = decoded.substr(scheme + 3);
  rest = rest.substr(0, rest.find_first_of("/?#"));
  if (std::size_t at = rest.rfind('@'); at != std::string_view::npos) rest = rest.substr(at + 1);
  rest = rest.substr(0, rest.find(':'));
  std::string host(rest);
  std::transform(host.begin(), host.end(), host.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return host;
}

/// Suffix match on labels: "a.b.com" belongs to "b.com", "xb.com" does not.
inline bool host_in_domain(std::string_view host, std::string_view domain) {
  if (domain.empty()) return false;
  if (host == domain) return true;
  return host.size() > domain.size() && host.ends_with(domain) &&
         host[host.size() - domain.size() - 1] == '.';
}

/// A request URL as it appears in page markup together with what the browser
/// actually requests. The decoded form is always derived from the markup.
class Url {
 public:
  Url() = default;

  static Url from_markup(std::string markup) {
    Url url;
    url.decoded_ = decode_entities(markup);
    url.markup_ = std::move(markup);
    return url;
  }

  /// Markup equal to the decoded text, except that an '&' which would start a
  /// character reference is itself escaped.
  static Url from_decoded(std::string_view decoded) {
    std::string markup;
    markup.reserve(decoded.size());
    for (const auto& token : detail::tokenize(decoded)) {
      if (token.reference) {
        markup += encode_char_entity('&');
        markup.append(decoded.substr(token.begin + 1, token.length - 1));
      } else {
        markup.push_back(decoded[token.begin]);
      }
    }
    return from_markup(std::move(markup));
  }

  const std::string& markup_form() const noexcept { return markup_; }
  const std::string& decoded_form() const noexcept { return decoded_; }

  std::vector<QueryPair> query_pairs() const {
    auto parts = split_url(decoded_);
    if (!parts.query) return {};
    return parse_query(*parts.query);
  }

  std::string host() const { return host_of(decoded_); }

  friend bool operator==(const Url&, const Url&) = default;

 private:
  std::string markup_;
  std::string decoded_;
};

/// Replaces every literal occurrence of the keywords in the markup with
/// per-character hexadecimal references. The decoded form is unchanged.
inline Url reencode_url_keywords(const Url& url, std::span<const std::string> keywords) {
  const std::string& markup = url.markup_form();
  auto tokens = detail::tokenize(markup);
  std::string view;
  view.reserve(tokens.size());
  for (const auto& t : tokens) view.push_back(t.reference ? kOpaqueReference : markup[t.begin]);

  std::vector<bool> hide(tokens.size(), false);
  bool any = false;
  for (const auto& k : keywords) {
    if (k.empty()) continue;
    for (std::size_t pos = view.find(k); pos != std::string::npos; pos = view.find(k, pos + 1)) {
      std::fill(hide.begin() + static_cast<std::ptrdiff_t>(pos),
                hide.begin() + static_cast<std::ptrdiff_t>(pos + k.size()), true);
      any = true;
    }
  }
  if (!any) return url;

  std::string out;
  out.reserve(markup.size() * 2);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (hide[i])
      out += encode_char_entity(markup[tokens[i].begin]);
    else
      out.append(markup, tokens[i].begin, tokens[i].length);
  }
  return Url::from_markup(std::move(out));
}

/// Characters allowed in a pad payload: RFC 3986 unreserved plus the
/// sub-delimiters and ':' '@' '/', minus the query separators '&' and '='.
inline bool is_url_safe_payload(std::string_view payload) {
  static constexpr std::string_view kExtra = "!$'()*+,;:@/";
  return std::all_of(payload.begin(), payload.end(), [](char c) {
    return detail::is_unreserved(c) || kExtra.find(c) != std::string_view::npos;
  });
}

/// Appends a trailing `qz=<payload>` pair to the query, inserting it before a
/// fragment when there is one. Existing pairs, host and path are untouched.
inline Url append_unused_query(const Url& url, std::string_view payload) {
  if (!is_url_safe_payload(payload))
    throw std::invalid_argument("pad payload must contain URL-safe characters only");

  const std::string& decoded = url.decoded_form();
  std::size_t fragment_at = decoded.find('#');
  std::size_t insert_at = fragment_at == std::string::npos ? decoded.size() : fragment_at;
  std::string_view head = std::string_view(decoded).substr(0, insert_at);

  std::string addition;
  std::size_t question = head.find('?');
  if (question == std::string_view::npos)
    addition = "?";
  else
    addition = "&";
  addition += kPadKey;
  addition += "=";
  addition += payload;

  // Locate the markup offset that decodes to `insert_at`.
  const std::string& markup = url.markup_form();
  std::size_t markup_at = markup.size();
  if (fragment_at != std::string::npos) {
    std::size_t decoded_offset = 0;
    std::string ref;
    for (std::size_t i = 0; i < markup.size();) {
      if (decoded_offset == insert_at) {
        markup_at = i;
        break;
      }
      std::size_t len = detail::match_reference(markup, i, &ref);
      decoded_offset += len > 0 ? ref.size() : 1;
      i += len > 0 ? len : 1;
    }
  }
  std::string new_markup = markup.substr(0, markup_at) + addition + markup.substr(markup_at);
  return Url::from_markup(std::move(new_markup));
}

/// True iff `modified` requests the same resource as `original` with nothing
/// but trailing pad pairs added to its query, and its markup decodes exactly
/// to its decoded form.
inline bool equivalent_up_to_padding(const Url& original, const Url& modified) {
  if (decode_entities(modified.markup_form()) != modified.decoded_form()) return false;
  auto before = split_url(original.decoded_form());
  auto after = split_url(modified.decoded_form());
  if (before.base != after.base || before.fragment != after.fragment) return false;
  if (!after.query) return !before.query;

  auto after_pairs = parse_query(*after.query);
  std::vector<QueryPair> before_pairs;
  if (before.query) before_pairs = parse_query(*before.query);
  if (after_pairs.size() < before_pairs.size()) return false;
  if (!std::equal(before_pairs.begin(), before_pairs.end(), after_pairs.begin())) return false;
  for (std::size_t i = before_pairs.size(); i < after_pairs.size(); ++i) {
    const auto& p = after_pairs[i];
    if (p.key != kPadKey || !p.has_value || !is_url_safe_payload(p.value)) return false;
  }
  // Exact string check: the modified URL is the original with only the
  // appended pairs inserted.
  UrlParts rebuilt = before;
  std::vector<QueryPair> tail(after_pairs.begin() + static_cast<std::ptrdiff_t>(before_pairs.size()),
                              after_pairs.end());
  if (!tail.empty()) {
    std::string appended = serialize_query(tail);
    rebuilt.query = before.query ? *before.query + "&" + appended : appended;
  }
  return join_url(rebuilt) == modified.decoded_form();
}

}  // namespace a4lab

#endif  // A4LAB_URL_HPP
