#include "iupf/toml_lite.hpp"

#include "iupf/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace iupf::toml {

namespace {

class Cursor {
public:
    Cursor(std::string_view text, int line) : text_(text), line_(line) {}

    bool done() const { return pos_ >= text_.size(); }
    char peek() const { return done() ? '\0' : text_[pos_]; }
    char get() { return text_[pos_++]; }
    int line() const { return line_; }

    void skip_ws() {
        while (!done()) {
            const char c = peek();
            if (c == ' ' || c == '\t' || c == '\r') {
                ++pos_;
            } else if (c == '\n') {
                ++pos_;
                ++line_;
            } else if (c == '#') {
                while (!done() && peek() != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    // Skips blanks on the current line only.
    void skip_inline_ws() {
        while (!done() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos_;
    }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_); }

    std::string_view rest_of_line() const {
        const std::size_t end = text_.find('\n', pos_);
        return text_.substr(pos_, end == std::string_view::npos ? std::string_view::npos : end - pos_);
    }

    void advance(std::size_t n) { pos_ += n; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int line_;
};

bool is_bare_key_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

std::string parse_basic_string(Cursor& cur) {
    cur.get();  // opening quote
    std::string out;
    while (true) {
        if (cur.done() || cur.peek() == '\n') cur.fail("unterminated string");
        const char c = cur.get();
        if (c == '"') break;
        if (c != '\\') {
            out.push_back(c);
            continue;
        }
        if (cur.done()) cur.fail("unterminated escape");
        switch (const char e = cur.get()) {
            case '"': out.push_back('"'); break;
            case '\\': out.push_back('\\'); break;
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            case 'r': out.push_back('\r'); break;
            default: cur.fail(std::string("unsupported escape \\") + e);
        }
    }
    return out;
}

std::string parse_literal_string(Cursor& cur) {
    cur.get();
    std::string out;
    while (true) {
        if (cur.done() || cur.peek() == '\n') cur.fail("unterminated string");
        const char c = cur.get();
        if (c == '\'') break;
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> parse_key(Cursor& cur) {
    std::vector<std::string> parts;
    while (true) {
        cur.skip_inline_ws();
        if (cur.peek() == '"') {
            parts.push_back(parse_basic_string(cur));
        } else if (cur.peek() == '\'') {
            parts.push_back(parse_literal_string(cur));
        } else {
            std::string k;
            while (!cur.done() && is_bare_key_char(cur.peek())) k.push_back(cur.get());
            if (k.empty()) cur.fail("expected a key");
            parts.push_back(std::move(k));
        }
        cur.skip_inline_ws();
        if (cur.peek() != '.') break;
        cur.get();
    }
    return parts;
}

Document parse_scalar_token(std::string_view tok, const Cursor& cur) {
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    if (tok == "nan" || tok == "+nan" || tok == "-nan") return std::numeric_limits<double>::quiet_NaN();

    std::string clean;
    for (char c : tok) {
        if (c != '_') clean.push_back(c);
    }
    if (clean.empty()) cur.fail("expected a value");
    const char* first = clean.data();
    const char* last = clean.data() + clean.size();
    if (*first == '+') ++first;
    const bool floaty = clean.find_first_of(".eE") != std::string::npos;
    if (!floaty) {
        long long v = 0;
        auto [p, ec] = std::from_chars(first, last, v);
        if (ec == std::errc() && p == last) return v;
    } else {
        double v = 0.0;
        auto [p, ec] = std::from_chars(first, last, v);
        if (ec == std::errc() && p == last) return v;
    }
    cur.fail("invalid value '" + std::string(tok) + "'");
}

Document parse_value_at(Cursor& cur) {
    cur.skip_inline_ws();
    const char c = cur.peek();
    if (c == '"') {
        if (cur.rest_of_line().starts_with("\"\"\"")) cur.fail("multi-line strings are not supported");
        return parse_basic_string(cur);
    }
    if (c == '\'') return parse_literal_string(cur);
    if (c == '{') cur.fail("inline tables are not supported");
    if (c == '[') {
        cur.get();
        Document arr = Document::array();
        while (true) {
            cur.skip_ws();
            if (cur.done()) cur.fail("unterminated array");
            if (cur.peek() == ']') {
                cur.get();
                break;
            }
            arr.push_back(parse_value_at(cur));
            cur.skip_ws();
            if (cur.peek() == ',') {
                cur.get();
            } else if (cur.peek() != ']') {
                cur.fail("expected ',' or ']' in array");
            }
        }
        return arr;
    }
    std::string tok;
    while (!cur.done()) {
        const char t = cur.peek();
        if (t == ',' || t == ']' || t == '#' || t == '\n' || t == ' ' || t == '\t' || t == '\r') break;
        tok.push_back(cur.get());
    }
    return parse_scalar_token(tok, cur);
}

std::string join(const std::vector<std::string>& parts) {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) s += '.';
        s += parts[i];
    }
    return s;
}

// Walks to (creating) the table named by `parts`, descending into the last
// element of arrays of tables.
Document& descend(Document& root, const std::vector<std::string>& parts, const Cursor& cur) {
    Document* node = &root;
    for (const std::string& p : parts) {
        if (!node->contains(p)) (*node)[p] = Document::object();
        Document* child = &(*node)[p];
        if (child->is_array()) {
            if (child->empty() || !child->back().is_object()) cur.fail("'" + p + "' is not a table");
            child = &child->back();
        } else if (!child->is_object()) {
            cur.fail("'" + p + "' is already a value");
        }
        node = child;
    }
    return *node;
}

}  // namespace

Document parse(std::string_view text) {
    Document root = Document::object();
    Document* table = &root;
    std::vector<std::string> defined_tables;
    Cursor cur(text, 1);

    while (true) {
        cur.skip_ws();
        if (cur.done()) break;
        if (cur.peek() == '[') {
            cur.get();
            const bool array_table = cur.peek() == '[';
            if (array_table) cur.get();
            const std::vector<std::string> parts = parse_key(cur);
            if (cur.peek() != ']') cur.fail("expected ']'");
            cur.get();
            if (array_table) {
                if (cur.peek() != ']') cur.fail("expected ']]'");
                cur.get();
                std::vector<std::string> parent(parts.begin(), parts.end() - 1);
                Document& owner = descend(root, parent, cur);
                Document& arr = owner[parts.back()];
                if (arr.is_null()) arr = Document::array();
                if (!arr.is_array()) cur.fail("'" + join(parts) + "' is not an array of tables");
                arr.push_back(Document::object());
                table = &arr.back();
            } else {
                const std::string name = join(parts);
                for (const std::string& t : defined_tables) {
                    if (t == name) cur.fail("table [" + name + "] defined twice");
                }
                defined_tables.push_back(name);
                table = &descend(root, parts, cur);
            }
        } else {
            const std::vector<std::string> parts = parse_key(cur);
            if (cur.peek() != '=') cur.fail("expected '=' after key '" + join(parts) + "'");
            cur.get();
            Document value = parse_value_at(cur);
            std::vector<std::string> parent(parts.begin(), parts.end() - 1);
            Document& owner = descend(*table, parent, cur);
            if (owner.contains(parts.back())) cur.fail("key '" + join(parts) + "' defined twice");
            owner[parts.back()] = std::move(value);
        }
        cur.skip_inline_ws();
        if (cur.peek() == '#') {
            while (!cur.done() && cur.peek() != '\n') cur.advance(1);
        }
        if (!cur.done() && cur.peek() != '\n') cur.fail("unexpected trailing text");
    }
    return root;
}

Document parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
}

Document parse_value(std::string_view text) {
    try {
        Cursor cur(text, 1);
        Document v = parse_value_at(cur);
        cur.skip_inline_ws();
        if (cur.done()) return v;
    } catch (const ParseError&) {
    }
    return std::string(text);
}

std::string format_float(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, p);
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}

namespace {

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out.push_back(c);
        }
    }
    return out + "\"";
}

std::string format_key(const std::string& k) {
    if (k.empty()) return "\"\"";
    for (char c : k) {
        if (!is_bare_key_char(c)) return quote(k);
    }
    return k;
}

std::string format_scalar(const Document& v) {
    switch (v.type()) {
        case Document::value_t::boolean: return v.get<bool>() ? "true" : "false";
        case Document::value_t::number_integer: return std::to_string(v.get<long long>());
        case Document::value_t::number_unsigned: return std::to_string(v.get<unsigned long long>());
        case Document::value_t::number_float: return format_float(v.get<double>());
        case Document::value_t::string: return quote(v.get<std::string>());
        case Document::value_t::array: {
            std::string s = "[";
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) s += ", ";
                s += format_scalar(v[i]);
            }
            return s + "]";
        }
        default: throw InvalidParameter("value cannot be written as TOML");
    }
}

bool is_table_array(const Document& v) {
    if (!v.is_array() || v.empty()) return false;
    for (const auto& e : v) {
        if (!e.is_object()) return false;
    }
    return true;
}

void dump_table(const Document& t, const std::string& prefix, std::ostringstream& out) {
    for (auto it = t.begin(); it != t.end(); ++it) {
        if (it.value().is_object() || is_table_array(it.value())) continue;
        out << format_key(it.key()) << " = " << format_scalar(it.value()) << "\n";
    }
    for (auto it = t.begin(); it != t.end(); ++it) {
        const std::string name = prefix.empty() ? format_key(it.key()) : prefix + "." + format_key(it.key());
        if (it.value().is_object()) {
            out << "\n[" << name << "]\n";
            dump_table(it.value(), name, out);
        } else if (is_table_array(it.value())) {
            for (const auto& e : it.value()) {
                out << "\n[[" << name << "]]\n";
                dump_table(e, name, out);
            }
        }
    }
}

}  // namespace

std::string dump(const Document& doc) {
    if (!doc.is_object()) throw InvalidParameter("TOML document root must be a table");
    std::ostringstream out;
    dump_table(doc, "", out);
    return out.str();
}

}  // namespace iupf::toml
