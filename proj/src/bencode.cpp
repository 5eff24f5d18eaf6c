#include "btsleuth/bencode.hpp"

#include <algorithm>
#include <limits>

namespace btsleuth {

namespace {

struct Decoder {
    std::span<const std::uint8_t> in;
    std::size_t pos = 0;
    bool canonical = true;

    static constexpr int kMaxDepth = 128;

    [[noreturn]] void fail(const std::string& what, std::size_t at) const {
        throw CodecError(Errc::malformed_bencoding, at, what);
    }

    std::uint8_t peek() const {
        if (pos >= in.size()) fail("truncated input", pos);
        return in[pos];
    }

    // Decimal digits limited to what fits a signed 64-bit value.
    std::int64_t digits(bool& leading_zero) {
        std::size_t start = pos;
        std::int64_t value = 0;
        while (pos < in.size() && in[pos] >= '0' && in[pos] <= '9') {
            int d = in[pos] - '0';
            if (value > (std::numeric_limits<std::int64_t>::max() - d) / 10) {
                fail("integer overflow", start);
            }
            value = value * 10 + d;
            ++pos;
        }
        if (pos == start) fail("expected digits", pos);
        leading_zero = in[start] == '0' && pos - start > 1;
        return value;
    }

    BValue value(int depth) {
        if (depth > kMaxDepth) fail("nesting too deep", pos);
        std::uint8_t c = peek();
        if (c == 'i') return integer();
        if (c == 'l') return list(depth);
        if (c == 'd') return dict(depth);
        if (c >= '0' && c <= '9') return byte_string();
        fail("unexpected token", pos);
    }

    BValue integer() {
        std::size_t start = pos;
        ++pos;  // 'i'
        bool negative = false;
        if (pos < in.size() && in[pos] == '-') {
            negative = true;
            ++pos;
        }
        // Accumulates toward the sign so INT64_MIN, whose magnitude does not
        // fit a positive int64, still decodes.
        std::size_t dstart = pos;
        std::int64_t value = 0;
        while (pos < in.size() && in[pos] >= '0' && in[pos] <= '9') {
            int d = in[pos] - '0';
            if (negative) {
                if (value < (std::numeric_limits<std::int64_t>::min() + d) / 10) {
                    fail("integer overflow", dstart);
                }
                value = value * 10 - d;
            } else {
                if (value > (std::numeric_limits<std::int64_t>::max() - d) / 10) {
                    fail("integer overflow", dstart);
                }
                value = value * 10 + d;
            }
            ++pos;
        }
        if (pos == dstart) fail("expected digits", pos);
        if (in[dstart] == '0' && pos - dstart > 1) fail("leading zeros in integer", dstart);
        if (negative && value == 0) fail("negative zero", start + 1);
        if (pos >= in.size() || in[pos] != 'e') fail("unterminated integer", pos);
        ++pos;
        return BValue::integer(value);
    }

    BValue byte_string() {
        std::size_t start = pos;
        bool leading_zero = false;
        std::int64_t len = digits(leading_zero);
        if (leading_zero) canonical = false;
        if (pos >= in.size() || in[pos] != ':') fail("expected ':' after length", pos);
        ++pos;
        if (static_cast<std::uint64_t>(len) > in.size() - pos) {
            fail("string length exceeds input", start);
        }
        Bytes data(in.begin() + pos, in.begin() + pos + len);
        pos += static_cast<std::size_t>(len);
        return BValue::string(std::move(data));
    }

    BValue list(int depth) {
        ++pos;  // 'l'
        BValue::List items;
        while (true) {
            if (pos >= in.size()) fail("unterminated list", pos);
            if (in[pos] == 'e') {
                ++pos;
                return BValue::list(std::move(items));
            }
            items.push_back(value(depth + 1));
        }
    }

    BValue dict(int depth) {
        ++pos;  // 'd'
        BValue out = BValue::dict();
        bool first = true;
        Bytes prev_key;
        while (true) {
            if (pos >= in.size()) fail("unterminated dictionary", pos);
            if (in[pos] == 'e') {
                ++pos;
                return out;
            }
            std::size_t key_at = pos;
            if (!(in[pos] >= '0' && in[pos] <= '9')) fail("dictionary key must be a string", pos);
            Bytes key = byte_string().as_string();
            if (!first) {
                if (key == prev_key) fail("duplicate dictionary key", key_at);
                if (key < prev_key) canonical = false;  // tolerated, flagged
            }
            if (out.find(std::string_view(reinterpret_cast<const char*>(key.data()),
                                          key.size())) != nullptr) {
                fail("duplicate dictionary key", key_at);
            }
            BValue val = value(depth + 1);
            out.set(key, std::move(val));
            prev_key = std::move(key);
            first = false;
        }
    }
};

void encode_into(const BValue& v, Bytes& out) {
    switch (v.type()) {
        case BValue::Type::byte_string: {
            const Bytes& s = v.as_string();
            append(out, std::to_string(s.size()));
            out.push_back(':');
            append(out, s);
            break;
        }
        case BValue::Type::integer: {
            out.push_back('i');
            append(out, std::to_string(v.as_integer()));
            out.push_back('e');
            break;
        }
        case BValue::Type::list: {
            out.push_back('l');
            for (const auto& item : v.as_list()) encode_into(item, out);
            out.push_back('e');
            break;
        }
        case BValue::Type::dict: {
            out.push_back('d');
            for (const auto& [key, val] : v.as_dict()) {
                append(out, std::to_string(key.size()));
                out.push_back(':');
                append(out, key);
                encode_into(val, out);
            }
            out.push_back('e');
            break;
        }
    }
}

}  // namespace

const Bytes& BValue::as_string() const {
    if (type_ != Type::byte_string) throw Error(Errc::protocol_error, "not a byte string");
    return str_;
}

std::int64_t BValue::as_integer() const {
    if (type_ != Type::integer) throw Error(Errc::protocol_error, "not an integer");
    return int_;
}

const BValue::List& BValue::as_list() const {
    if (type_ != Type::list) throw Error(Errc::protocol_error, "not a list");
    return list_;
}

BValue::List& BValue::as_list() {
    if (type_ != Type::list) throw Error(Errc::protocol_error, "not a list");
    return list_;
}

const BValue::Dict& BValue::as_dict() const {
    if (type_ != Type::dict) throw Error(Errc::protocol_error, "not a dictionary");
    return dict_;
}

void BValue::set(std::string_view key, BValue v) {
    set(bytes_of(key), std::move(v));
}

void BValue::set(const Bytes& key, BValue v) {
    if (type_ != Type::dict) throw Error(Errc::protocol_error, "not a dictionary");
    auto it = std::lower_bound(dict_.begin(), dict_.end(), key,
                               [](const auto& entry, const Bytes& k) { return entry.first < k; });
    if (it != dict_.end() && it->first == key) {
        it->second = std::move(v);
    } else {
        dict_.insert(it, {key, std::move(v)});
    }
}

const BValue* BValue::find(std::string_view key) const {
    if (type_ != Type::dict) return nullptr;
    Bytes k = bytes_of(key);
    auto it = std::lower_bound(dict_.begin(), dict_.end(), k,
                               [](const auto& entry, const Bytes& kk) { return entry.first < kk; });
    if (it != dict_.end() && it->first == k) return &it->second;
    return nullptr;
}

void BValue::push_back(BValue v) {
    if (type_ != Type::list) throw Error(Errc::protocol_error, "not a list");
    list_.push_back(std::move(v));
}

bool BValue::operator==(const BValue& other) const {
    if (type_ != other.type_) return false;
    switch (type_) {
        case Type::byte_string:
            return str_ == other.str_;
        case Type::integer:
            return int_ == other.int_;
        case Type::list:
            return list_ == other.list_;
        case Type::dict:
            return dict_ == other.dict_;
    }
    return false;
}

Bytes encode_bvalue(const BValue& v) {
    Bytes out;
    encode_into(v, out);
    return out;
}

BDecoded decode_bvalue(std::span<const std::uint8_t> in) {
    if (in.empty()) {
        throw CodecError(Errc::malformed_bencoding, 0, "empty input");
    }
    Decoder d{in};
    BValue v = d.value(0);
    return BDecoded{std::move(v), d.pos, d.canonical};
}

}  // namespace btsleuth
